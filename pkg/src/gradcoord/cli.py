"""Command-line entry point.

Subcommands: gen-data, train-ref, train, lemma1, metrics, report. Flags
mirror config keys in kebab-case; a flat ``--config`` file supplies the
middle layer of the flag > file > default precedence. Relative output
paths resolve under $GRADCOORD_OUT when it is set.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
abort (a NaN abort still flushes the partial trace).
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys
import time
from pathlib import Path

import numpy as np

from . import fileio, metrics, plotting
from .config import (
    GEN_ECHO_KEYS,
    LEMMA1_ECHO_KEYS,
    REF_ECHO_KEYS,
    SCHEMA,
    TRAIN_ECHO_KEYS,
    RunConfig,
    load_config_file,
    parse_value,
    train_config,
)
from .errors import ArgumentError, DataError, GradcoordError, exit_code_for
from .simulator import (
    TrainingAborted,
    TrainTrace,
    evaluate,
    gen_synthetic,
    labeled_accuracy,
    train_gcd,
    train_reference,
)
from .subspace import build_pca, build_pca_for_energy
from .theory import LinearSystemSpec, lemma1_report

OUT_DIR_ENV = "GRADCOORD_OUT"


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems via ArgumentError."""

    def error(self, message):
        raise ArgumentError(message)


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_keys(parser: argparse.ArgumentParser, names: list[str]) -> None:
    for name in names:
        key = SCHEMA[name]
        extra = f" (default: {key.default})" if key.default != "" else ""
        parser.add_argument(
            _flag(name), dest=name, default=None, metavar=key.type.upper(),
            help=key.help + extra,
        )


def _resolve_config(args: argparse.Namespace, names: list[str]) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    flag_values = {}
    for name in names:
        raw = getattr(args, name, None)
        if raw is not None:
            flag_values[name] = parse_flag(name, raw)
    return RunConfig(flag_values, file_values)


def parse_flag(name: str, raw: str):
    return parse_value(SCHEMA[name], raw)


def _out_path(raw: str) -> Path:
    path = Path(raw)
    if path.is_absolute():
        return path
    return Path(os.environ.get(OUT_DIR_ENV, ".")) / path


def _read_dataset(path: str):
    try:
        return fileio.read_dataset(path)
    except FileNotFoundError as exc:
        raise DataError(f"dataset file not found: {path}") from exc


def _read_model(path: str):
    try:
        return fileio.read_model(path)
    except FileNotFoundError as exc:
        raise DataError(f"model file not found: {path}") from exc


def _read_matrix(path: str) -> np.ndarray:
    try:
        return fileio.read_matrix(path)
    except FileNotFoundError as exc:
        raise DataError(f"matrix file not found: {path}") from exc


def _base_report(command: str, cfg: RunConfig, echo_keys: list[str], started: float) -> dict:
    return {
        "command": command,
        "config": cfg.echo(echo_keys),
        "seed": cfg["seed"],
        "wall_clock_s": time.perf_counter() - started,
        "hostname": socket.gethostname(),
    }


def cmd_gen_data(args) -> int:
    keys = GEN_ECHO_KEYS + ["out"]
    cfg = _resolve_config(args, keys)
    data = gen_synthetic(
        num_known=cfg["num_known"],
        num_novel=cfg["num_novel"],
        per_class=cfg["per_class"],
        d_in=cfg["d_in"],
        class_sep=cfg["class_sep"],
        noise_std=cfg["noise_std"],
        seed=cfg["seed"],
    )
    out = _out_path(cfg["out"] or "data.txt")
    out.parent.mkdir(parents=True, exist_ok=True)
    fileio.write_dataset(out, data)
    n_lab = data.labeled_x.shape[0]
    n_unl = data.unlabeled_x.shape[0]
    print(f"wrote {out} ({n_lab} labeled, {n_unl} unlabeled samples)")
    return 0


def cmd_train_ref(args) -> int:
    started = time.perf_counter()
    keys = REF_ECHO_KEYS + ["data", "out"]
    cfg = _resolve_config(args, keys)
    data = _read_dataset(cfg["data"])
    tc = train_config(cfg)
    model, final_loss = train_reference(data, tc)
    train_acc = labeled_accuracy(model, data.labeled_x, data.labeled_y)

    prefix = _out_path(cfg["out"] or "ref")
    prefix.parent.mkdir(parents=True, exist_ok=True)
    model_path = prefix.with_name(prefix.name + ".model.txt")
    fileio.write_model(model_path, model)
    report = _base_report("train-ref", cfg, REF_ECHO_KEYS, started)
    report["results"] = {"final_loss": final_loss, "train_acc": train_acc}
    fileio.write_json(prefix.with_name(prefix.name + ".json"), report)
    print(f"wrote {model_path} (final loss {final_loss:.4f}, train acc {train_acc:.4f})")
    return 0


def _train_summary(cfg: RunConfig, trace: TrainTrace, started: float) -> dict:
    report = _base_report("train", cfg, TRAIN_ECHO_KEYS, started)
    mean_gdc, mean_soc = trace.window_means()
    results = {
        "aborted": trace.aborted,
        "steps_recorded": len(trace.steps),
        "epochs_run": trace.epochs[-1].epoch if trace.epochs else 0,
        "mean_gdc_first200": mean_gdc,
        "mean_soc_first200": mean_soc,
        "per_epoch": fileio.epochs_to_list(trace.epochs),
    }
    if trace.epochs:
        best = trace.best_epoch
        results["final_acc"] = fileio.acc_to_dict(trace.final_acc)
        results["best_acc"] = fileio.acc_to_dict(best.acc)
        results["best_epoch"] = best.epoch
    report["results"] = results
    return report


def cmd_train(args) -> int:
    started = time.perf_counter()
    keys = TRAIN_ECHO_KEYS + ["data", "ref_model", "out"]
    cfg = _resolve_config(args, keys)
    data = _read_dataset(cfg["data"])
    ref_model = _read_model(cfg["ref_model"])
    tc = train_config(cfg)

    prefix = _out_path(cfg["out"] or "run")
    prefix.parent.mkdir(parents=True, exist_ok=True)
    trace_path = prefix.with_name(prefix.name + ".trace.csv")
    summary_path = prefix.with_name(prefix.name + ".summary.json")

    try:
        trace = train_gcd(data, ref_model, tc)
    except TrainingAborted as exc:
        fileio.write_trace_csv(trace_path, exc.trace)
        fileio.write_json(summary_path, _train_summary(cfg, exc.trace, started))
        print(f"numerical abort: {exc}", file=sys.stderr)
        print(f"partial trace flushed to {trace_path}", file=sys.stderr)
        return 3

    fileio.write_trace_csv(trace_path, trace)
    fileio.write_json(summary_path, _train_summary(cfg, trace, started))
    final = trace.final_acc
    print(
        f"wrote {trace_path} and {summary_path} "
        f"(acc all={final.all:.4f} old={final.old:.4f} new={final.new:.4f})"
    )
    return 0


def cmd_lemma1(args) -> int:
    started = time.perf_counter()
    keys = LEMMA1_ECHO_KEYS + ["out"]
    cfg = _resolve_config(args, keys)
    dim = cfg["dim"]
    spec = LinearSystemSpec(
        H=np.diag(np.linspace(cfg["h_min"], cfg["h_max"], dim)),
        lambda_a=cfg["lambda_a"],
        eta_lr=cfg["eta_lr"],
        noise_cov=np.eye(dim),
        steps=cfg["steps"],
        burn_in=None if cfg["burn_in"] < 0 else cfg["burn_in"],
        seed=cfg["seed"],
    )
    report = lemma1_report(spec)
    payload = _base_report("lemma1", cfg, LEMMA1_ECHO_KEYS, started)
    payload["results"] = {
        "deviation_ordering_holds": report.deviation_ordering_holds,
        "empirical_ordering_holds": report.empirical_ordering_holds,
        "psd_margin": report.psd_margin,
        "empirical_margin": report.empirical_margin,
        "grad_comparison_margin": report.grad_comparison_margin,
        "note": report.note,
        "analytic_cov_base": report.analytic_cov_base.tolist(),
        "analytic_cov_prox": report.analytic_cov_prox.tolist(),
        "empirical_cov_base": report.empirical_cov_base.tolist(),
        "empirical_cov_prox": report.empirical_cov_prox.tolist(),
        "grad_cov_base": report.grad_cov_base.tolist(),
        "grad_cov_prox": report.grad_cov_prox.tolist(),
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if cfg["out"]:
        out = _out_path(cfg["out"])
        out.parent.mkdir(parents=True, exist_ok=True)
        fileio.write_json(out, payload)
        print(f"wrote {out} (deviation_ordering_holds: "
              f"{str(report.deviation_ordering_holds).lower()})")
    else:
        print(text)
    return 0


def cmd_metrics(args) -> int:
    keys = ["grad_ref", "grad", "labeled_features", "novel_features",
            "pca_k", "pca_energy", "class_grad_norms", "num_known", "out"]
    cfg = _resolve_config(args, keys)
    result: dict[str, object] = {"step": 0, "gdc": None, "soc": None,
                                 "rho_grad": None, "rho_in": None}
    computed = False

    if cfg["grad_ref"] or cfg["grad"]:
        if not (cfg["grad_ref"] and cfg["grad"]):
            raise ArgumentError("gdc needs both --grad-ref and --grad")
        g_hat = fileio.matrix_to_vector(_read_matrix(cfg["grad_ref"]), "grad_ref")
        g = fileio.matrix_to_vector(_read_matrix(cfg["grad"]), "grad")
        result["gdc"] = metrics.gdc(g_hat, g)
        computed = True

    if cfg["labeled_features"] or cfg["novel_features"]:
        if not (cfg["labeled_features"] and cfg["novel_features"]):
            raise ArgumentError("soc needs both --labeled-features and --novel-features")
        labeled = _read_matrix(cfg["labeled_features"])
        novel = _read_matrix(cfg["novel_features"])
        if cfg["pca_k"] > 0:
            projector = build_pca(labeled, cfg["pca_k"])
        else:
            projector = build_pca_for_energy(labeled, cfg["pca_energy"])
        overlap = metrics.soc(novel, projector)
        result["soc"] = overlap
        result["rho_in"] = overlap
        computed = True

    if cfg["class_grad_norms"]:
        norms = fileio.matrix_to_vector(_read_matrix(cfg["class_grad_norms"]))
        flags = np.arange(norms.shape[0]) < cfg["num_known"]
        result["rho_grad"] = metrics.rho_grad(norms, flags)
        computed = True

    if not computed:
        raise ArgumentError(
            "nothing to compute: pass gradient dumps and/or feature dumps"
        )

    text = json.dumps(result, indent=2, sort_keys=True)
    if cfg["out"]:
        out = _out_path(cfg["out"])
        out.parent.mkdir(parents=True, exist_ok=True)
        fileio.write_json(out, result)
        print(f"wrote {out}")
    else:
        print(text)
    return 0


def cmd_report(args) -> int:
    cfg = _resolve_config(args, ["trace", "summary", "out_dir"])
    try:
        steps = fileio.read_trace_csv(cfg["trace"])
    except FileNotFoundError as exc:
        raise DataError(f"trace file not found: {cfg['trace']}") from exc
    per_epoch = None
    if cfg["summary"]:
        try:
            summary = fileio.read_json(cfg["summary"])
        except FileNotFoundError as exc:
            raise DataError(f"summary file not found: {cfg['summary']}") from exc
        per_epoch = summary.get("results", {}).get("per_epoch")
    out_dir = _out_path(cfg["out_dir"] or "figures")
    written = plotting.render_trace_figures(steps, per_epoch, out_dir)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="gradcoord", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    specs = [
        ("gen-data", cmd_gen_data, GEN_ECHO_KEYS + ["out"],
         "generate a synthetic dataset file (default out: data.txt)"),
        ("train-ref", cmd_train_ref, REF_ECHO_KEYS + ["data", "out"],
         "train the frozen supervised reference model (default out prefix: ref)"),
        ("train", cmd_train, TRAIN_ECHO_KEYS + ["data", "ref_model", "out"],
         "joint training with optional gradient coordination (default out prefix: run)"),
        ("lemma1", cmd_lemma1, LEMMA1_ECHO_KEYS + ["out"],
         "deviation-covariance ordering check for the linear dynamics"),
        ("metrics", cmd_metrics,
         ["grad_ref", "grad", "labeled_features", "novel_features",
          "pca_k", "pca_energy", "class_grad_norms", "num_known", "out"],
         "compute entanglement diagnostics from saved dumps"),
        ("report", cmd_report, ["trace", "summary", "out_dir"],
         "render figures from a trace CSV (default out dir: figures)"),
    ]
    for name, func, keys, help_ in specs:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", default=None, help="flat key=value config file")
        _add_keys(sp, keys)
        sp.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except GradcoordError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
