"""Figure rendering for trace CSVs and run summaries.

Kept separate from the training path: traces are written as plain CSV and
these helpers turn an existing trace (plus optional summary JSON) into PNG
files next to it.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .simulator import StepRecord


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_trace_figures(
    steps: list[StepRecord],
    per_epoch: list[dict] | None,
    out_dir,
) -> list[Path]:
    """Render entanglement, loss, dominance, and accuracy figures.

    Returns the list of written files; the accuracy panel is skipped when
    no per-epoch records are available.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    xs = [rec.step for rec in steps]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    ax1.plot(xs, [rec.gdc for rec in steps], lw=0.9, color="tab:red")
    ax1.set_xlabel("step")
    ax1.set_ylabel("gdc")
    ax1.set_title("gradient deviation")
    ax2.plot(xs, [rec.soc for rec in steps], lw=0.9, color="tab:blue")
    ax2.set_xlabel("step")
    ax2.set_ylabel("soc")
    ax2.set_title("subspace overlap")
    written.append(_save(fig, out / "entanglement.png"))

    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    ax.plot(xs, [rec.loss_sup for rec in steps], lw=0.9, label="supervised")
    ax.plot(xs, [rec.loss_unsup for rec in steps], lw=0.9, label="unsupervised")
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.legend()
    written.append(_save(fig, out / "losses.png"))

    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    ax.plot(xs, [rec.rho_grad for rec in steps], lw=0.9, label="rho_grad")
    ax.plot(xs, [rec.rho_in for rec in steps], lw=0.9, label="rho_in")
    ax.set_xlabel("step")
    ax.set_ylim(0, 1)
    ax.legend()
    written.append(_save(fig, out / "dominance.png"))

    if per_epoch:
        fig, ax = plt.subplots(figsize=(5.5, 3.2))
        es = [rec["epoch"] for rec in per_epoch]
        for part in ("all", "old", "new"):
            ax.plot(es, [rec["acc"][part] for rec in per_epoch], marker="o",
                    ms=2.5, lw=0.9, label=part)
        ax.set_xlabel("epoch")
        ax.set_ylabel("clustering accuracy")
        ax.set_ylim(0, 1)
        ax.legend()
        written.append(_save(fig, out / "accuracy.png"))

    return written
