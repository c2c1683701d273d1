"""Run configuration: key schema, config-file parsing, layered resolution.

Precedence is command-line flag > config-file key > documented default.
Config files are flat ``key = value`` text with ``#`` comments; unknown
keys are a hard error.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .coordinator import CLAMP_POLICIES, CoordinatorConfig
from .errors import ArgumentError
from .simulator import EAGC_MODES, MODE_OFF, TrainConfig

_TC = TrainConfig()
_CC = CoordinatorConfig()


@dataclass(frozen=True)
class Key:
    name: str
    type: str  # int | float | bool | str
    default: object
    help: str
    choices: tuple | None = None


def _k(name, type_, default, help_, choices=None):
    return Key(name=name, type=type_, default=default, help=help_, choices=choices)


SCHEMA: dict[str, Key] = {key.name: key for key in [
    # dataset generation
    _k("num_known", "int", 4, "number of known (labeled) classes"),
    _k("num_novel", "int", 4, "number of novel classes in the unlabeled pool"),
    _k("per_class", "int", 50, "samples drawn per class"),
    _k("d_in", "int", 32, "input dimensionality"),
    _k("class_sep", "float", 6.0, "radius of the sphere class means are drawn on"),
    _k("noise_std", "float", 1.0, "per-dimension sample noise around class means"),
    # shared
    _k("seed", "int", 0, "random seed"),
    # training
    _k("epochs", "int", _TC.epochs, "joint training epochs"),
    _k("batch_size", "int", _TC.batch_size, "target mixed-batch size"),
    _k("lr_encoder", "float", _TC.lr_encoder, "encoder learning rate"),
    _k("lr_head", "float", _TC.lr_head, "prototype-head learning rate"),
    _k("cosine_decay", "bool", _TC.cosine_decay, "cosine-decay the learning rates"),
    _k("feature_dim", "int", _TC.feature_dim, "encoder output dimensionality"),
    _k("sharpen_temp", "float", _TC.sharpen_temp, "sharpening temperature for self-distillation targets"),
    _k("entropy_weight", "float", _TC.entropy_weight, "weight of the mean-entropy regularizer"),
    _k("aug_noise_std", "float", _TC.aug_noise_std, "noise std of the two-view augmentation"),
    _k("measure_every", "int", _TC.measure_every, "diagnostic cadence after the first 200 steps"),
    _k("init_from_ref", "bool", _TC.init_from_ref, "start the encoder from the reference encoder"),
    _k("soc_energy", "float", _TC.soc_energy, "energy fraction selecting the overlap-diagnostic PCA rank"),
    _k("ref_epochs", "int", _TC.ref_epochs, "reference-model training epochs"),
    _k("ref_lr_encoder", "float", _TC.ref_lr_encoder, "reference-model encoder learning rate"),
    _k("ref_lr_head", "float", _TC.ref_lr_head, "reference-model head learning rate"),
    _k("ref_batch_size", "int", _TC.ref_batch_size, "reference-model batch size"),
    _k("eagc", "str", MODE_OFF, "gradient coordination mode", tuple(EAGC_MODES)),
    # coordinator
    _k("lambda_a", "float", _CC.lambda_a, "alignment strength"),
    _k("lambda_p", "float", _CC.lambda_p, "elastic projection strength"),
    _k("eta", "float", _CC.eta, "conceptor aperture"),
    _k("tau_clamp", "str", _CC.tau_clamp, "projection-weight clamp policy", tuple(CLAMP_POLICIES)),
    _k("alpha", "float", _CC.alpha, "supervised loss weight"),
    _k("beta", "float", _CC.beta, "unsupervised loss weight"),
    _k("tau_s", "float", _CC.tau_s, "softmax temperature"),
    # linear-dynamics harness
    _k("dim", "int", 8, "dimension of the linear deviation system"),
    _k("eta_lr", "float", 0.01, "step size of the deviation recursion"),
    _k("steps", "int", 200000, "simulated steps of the deviation chain"),
    _k("burn_in", "int", -1, "discarded steps before covariance estimation (-1: 10%)"),
    _k("h_min", "float", 0.5, "smallest Hessian eigenvalue of the default spec"),
    _k("h_max", "float", 2.0, "largest Hessian eigenvalue of the default spec"),
    # paths (subcommand defaults noted in each subcommand's help)
    _k("data", "str", "data.txt", "dataset file"),
    _k("ref_model", "str", "ref.model.txt", "reference model file"),
    _k("out", "str", "", "output path or prefix (subcommand-specific default)"),
    # metrics inputs
    _k("grad_ref", "str", "", "matrix file with the pure-supervised gradient"),
    _k("grad", "str", "", "matrix file with the joint gradient"),
    _k("labeled_features", "str", "", "matrix file with labeled features"),
    _k("novel_features", "str", "", "matrix file with novel features"),
    _k("pca_k", "int", 0, "PCA rank for the overlap metric (0: pick by energy)"),
    _k("pca_energy", "float", 0.90, "energy fraction for automatic PCA rank"),
    _k("class_grad_norms", "str", "", "matrix file with per-class gradient norms"),
    # report
    _k("trace", "str", "run.trace.csv", "trace CSV to render"),
    _k("summary", "str", "", "summary JSON accompanying the trace"),
    _k("out_dir", "str", "", "directory for rendered figures"),
]}


def parse_value(key: Key, raw: str):
    """Parse a raw string per the key's declared type."""
    if key.type == "int":
        try:
            value = int(raw)
        except ValueError as exc:
            raise ArgumentError(f"{key.name}: expected integer, got {raw!r}") from exc
    elif key.type == "float":
        try:
            value = float(raw)
        except ValueError as exc:
            raise ArgumentError(f"{key.name}: expected number, got {raw!r}") from exc
    elif key.type == "bool":
        lowered = raw.strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            value = True
        elif lowered in ("false", "0", "no", "off"):
            value = False
        else:
            raise ArgumentError(f"{key.name}: expected true/false, got {raw!r}")
    else:
        value = raw
    if key.choices is not None and value not in key.choices:
        raise ArgumentError(
            f"{key.name}: must be one of {', '.join(map(str, key.choices))}, got {raw!r}"
        )
    return value


def load_config_file(path) -> dict[str, object]:
    """Parse a flat key=value config file against the schema."""
    resolved: dict[str, object] = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ArgumentError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        name, raw = (part.strip() for part in stripped.split("=", 1))
        if name not in SCHEMA:
            raise ArgumentError(f"{path}:{lineno}: unknown config key {name!r}")
        resolved[name] = parse_value(SCHEMA[name], raw)
    return resolved


class RunConfig:
    """Layered view over flags, config-file entries, and schema defaults."""

    def __init__(self, flag_values: dict[str, object], file_values: dict[str, object]):
        for name in flag_values:
            if name not in SCHEMA:
                raise ArgumentError(f"unknown config key {name!r}")
        self._flags = flag_values
        self._file = file_values

    def __getitem__(self, name: str):
        if name not in SCHEMA:
            raise ArgumentError(f"unknown config key {name!r}")
        flag = self._flags.get(name)
        if flag is not None:
            return flag
        if name in self._file:
            return self._file[name]
        return SCHEMA[name].default

    def echo(self, names: list[str]) -> dict[str, object]:
        return {name: self[name] for name in names}


TRAIN_ECHO_KEYS = [
    "eagc", "seed", "epochs", "batch_size", "lr_encoder", "lr_head", "cosine_decay",
    "feature_dim", "sharpen_temp", "entropy_weight", "aug_noise_std", "measure_every",
    "init_from_ref", "soc_energy", "lambda_a", "lambda_p", "eta", "tau_clamp",
    "alpha", "beta", "tau_s",
]

REF_ECHO_KEYS = [
    "seed", "ref_epochs", "ref_lr_encoder", "ref_lr_head", "ref_batch_size",
    "cosine_decay", "feature_dim", "tau_s", "alpha",
]

GEN_ECHO_KEYS = [
    "seed", "num_known", "num_novel", "per_class", "d_in", "class_sep", "noise_std",
]

LEMMA1_ECHO_KEYS = [
    "seed", "dim", "eta_lr", "lambda_a", "steps", "burn_in", "h_min", "h_max",
]


def coordinator_config(cfg: RunConfig) -> CoordinatorConfig:
    return CoordinatorConfig(
        lambda_a=cfg["lambda_a"],
        lambda_p=cfg["lambda_p"],
        eta=cfg["eta"],
        tau_clamp=cfg["tau_clamp"],
        alpha=cfg["alpha"],
        beta=cfg["beta"],
        tau_s=cfg["tau_s"],
    )


def train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        lr_encoder=cfg["lr_encoder"],
        lr_head=cfg["lr_head"],
        cosine_decay=cfg["cosine_decay"],
        seed=cfg["seed"],
        feature_dim=cfg["feature_dim"],
        sharpen_temp=cfg["sharpen_temp"],
        entropy_weight=cfg["entropy_weight"],
        aug_noise_std=cfg["aug_noise_std"],
        eagc_mode=cfg["eagc"],
        measure_every=cfg["measure_every"],
        init_from_ref=cfg["init_from_ref"],
        soc_energy=cfg["soc_energy"],
        ref_epochs=cfg["ref_epochs"],
        ref_lr_encoder=cfg["ref_lr_encoder"],
        ref_lr_head=cfg["ref_lr_head"],
        ref_batch_size=cfg["ref_batch_size"],
        coord=coordinator_config(cfg),
    )
