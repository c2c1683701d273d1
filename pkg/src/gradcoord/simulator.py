"""Desk-scale category-discovery environment with analytic gradients.

Synthetic Gaussian-blob data is split GCD-style: half of each known class
is labeled, the rest of the known samples plus all novel samples form the
unlabeled pool (their labels stay hidden from training). The model is a
linear encoder followed by a cosine classifier with temperature. The
supervised objective is cross-entropy on labeled rows; the unsupervised
objective is two-view self-distillation (each view's prediction is trained
toward the other view's sharpened, stop-gradient prediction) plus a
mean-entropy regularizer that discourages cluster collapse.

All gradients are computed in closed form at the feature level, which is
what lets the gradient coordinator intervene exactly where a backward hook
would: the per-row feature gradients are adjusted first and only then
propagated through the encoder via W_grad = X^T G.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics
from .coordinator import (
    BatchMask,
    CoordinatorConfig,
    GradientAdjustment,
    coordinate,
    proximal_loss,
)
from .errors import ArgumentError, DataError, NumericalError
from .numerics import SeededRng, gaussian
from .subspace import (
    Conceptor,
    EnergyStats,
    build_conceptor,
    build_pca_for_energy,
    labeled_energy_stats,
)

MODE_OFF = "off"
MODE_ON = "on"
MODE_LOSS_VARIANT = "loss-variant"
MODE_UNIFORM_PROJ = "uniform-proj"
EAGC_MODES = (MODE_OFF, MODE_ON, MODE_LOSS_VARIANT, MODE_UNIFORM_PROJ)

# Entanglement diagnostics are recorded every step in this initial window
# and at the configured cadence afterwards; windowed means are taken here.
MEASURE_WINDOW = 200


@dataclass
class DatasetSplit:
    """GCD data: labeled known-class samples plus a mixed unlabeled pool."""

    labeled_x: np.ndarray
    labeled_y: np.ndarray
    unlabeled_x: np.ndarray
    unlabeled_y: np.ndarray  # hidden ground truth, evaluation only
    unlabeled_is_known: np.ndarray
    num_known_classes: int
    num_total_classes: int

    @property
    def input_dim(self) -> int:
        return self.labeled_x.shape[1]

    @property
    def known_flags(self) -> np.ndarray:
        return np.arange(self.num_total_classes) < self.num_known_classes


@dataclass
class Model:
    """Linear encoder plus unit-norm prototype rows (cosine classifier)."""

    encoder: np.ndarray  # d_in x d
    prototypes: np.ndarray  # K x d, rows unit norm

    def features(self, x: np.ndarray) -> np.ndarray:
        return x @ self.encoder

    def copy(self) -> "Model":
        return Model(self.encoder.copy(), self.prototypes.copy())

    def renormalize_prototypes(self) -> None:
        norms = np.linalg.norm(self.prototypes, axis=1, keepdims=True)
        self.prototypes /= np.maximum(norms, 1e-300)


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run needs, including the coordinator knobs."""

    epochs: int = 60
    batch_size: int = 128
    lr_encoder: float = 0.4
    lr_head: float = 1.0
    cosine_decay: bool = True
    seed: int = 0
    feature_dim: int = 16
    sharpen_temp: float = 0.05
    entropy_weight: float = 1.0
    aug_noise_std: float = 0.5
    eagc_mode: str = MODE_OFF
    measure_every: int = 10
    init_from_ref: bool = True
    soc_energy: float = 0.90
    ref_epochs: int = 30
    ref_lr_encoder: float = 0.15
    ref_lr_head: float = 0.6
    ref_batch_size: int = 32
    coord: CoordinatorConfig = field(default_factory=CoordinatorConfig)

    def __post_init__(self):
        if self.eagc_mode not in EAGC_MODES:
            raise ArgumentError(f"eagc_mode must be one of {EAGC_MODES}, got {self.eagc_mode!r}")
        for name in ("epochs", "ref_epochs"):
            if getattr(self, name) < 0:
                raise ArgumentError(f"{name} must be >= 0")
        for name in ("batch_size", "feature_dim", "measure_every", "ref_batch_size"):
            if getattr(self, name) < 1:
                raise ArgumentError(f"{name} must be >= 1")
        for name in ("sharpen_temp",):
            if getattr(self, name) <= 0:
                raise ArgumentError(f"{name} must be positive")
        for name in ("lr_encoder", "lr_head", "ref_lr_encoder", "ref_lr_head",
                     "entropy_weight", "aug_noise_std"):
            if getattr(self, name) < 0:
                raise ArgumentError(f"{name} must be >= 0")
        if not 0 < self.soc_energy <= 1:
            raise ArgumentError("soc_energy must be in (0, 1]")

    @property
    def eagc_enabled(self) -> bool:
        return self.eagc_mode != MODE_OFF


@dataclass(frozen=True)
class StepRecord:
    step: int
    loss_sup: float
    loss_unsup: float
    gdc: float
    soc: float
    rho_grad: float
    rho_in: float


@dataclass(frozen=True)
class EpochRecord:
    """End-of-epoch snapshot; epoch 0 is the initialization state."""

    epoch: int
    acc: metrics.AccTriple
    labeled_loss: float


@dataclass
class TrainTrace:
    steps: list[StepRecord] = field(default_factory=list)
    epochs: list[EpochRecord] = field(default_factory=list)
    aborted: bool = False
    final_model: "Model | None" = None

    @property
    def final_acc(self) -> metrics.AccTriple:
        return self.epochs[-1].acc

    @property
    def best_epoch(self) -> EpochRecord:
        return max(self.epochs, key=lambda rec: rec.acc.all)

    def window_means(self, first_n: int = MEASURE_WINDOW) -> tuple[float, float]:
        """Mean (gdc, soc) over measured steps with index < first_n."""
        rows = [rec for rec in self.steps if rec.step < first_n]
        if not rows:
            return float("nan"), float("nan")
        with np.errstate(all="ignore"):
            return (
                float(np.nanmean([rec.gdc for rec in rows])),
                float(np.nanmean([rec.soc for rec in rows])),
            )


class TrainingAborted(NumericalError):
    """Raised on a non-finite loss; carries the partial trace."""

    def __init__(self, message: str, trace: TrainTrace):
        super().__init__(message)
        trace.aborted = True
        self.trace = trace


def gen_synthetic(
    num_known: int,
    num_novel: int,
    per_class: int,
    d_in: int,
    class_sep: float,
    noise_std: float,
    seed: int,
) -> DatasetSplit:
    """Gaussian blobs around class means drawn uniformly on a sphere.

    The first half of each known class's samples is labeled; the remaining
    known samples and every novel sample form the unlabeled pool.
    """
    if min(num_known, num_novel + 1, per_class) < 1:
        raise ArgumentError("num_known, per_class must be >= 1 and num_novel >= 0")
    if d_in < 2:
        raise ArgumentError(f"d_in must be >= 2, got {d_in}")
    if class_sep <= 0:
        raise ArgumentError(f"class_sep must be positive, got {class_sep}")
    if noise_std < 0:
        raise ArgumentError(f"noise_std must be >= 0, got {noise_std}")

    num_total = num_known + num_novel
    rng = SeededRng(seed)
    directions = rng.standard_normal((num_total, d_in))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    means = class_sep * directions

    lab_x, lab_y = [], []
    unl_x, unl_y, unl_known = [], [], []
    n_labeled_per_class = per_class // 2
    for cls in range(num_total):
        samples = means[cls] + gaussian(rng, 0.0, noise_std, (per_class, d_in))
        if cls < num_known:
            lab_x.append(samples[:n_labeled_per_class])
            lab_y.extend([cls] * n_labeled_per_class)
            unl_x.append(samples[n_labeled_per_class:])
            rest = per_class - n_labeled_per_class
            unl_y.extend([cls] * rest)
            unl_known.extend([True] * rest)
        else:
            unl_x.append(samples)
            unl_y.extend([cls] * per_class)
            unl_known.extend([False] * per_class)

    return DatasetSplit(
        labeled_x=np.vstack(lab_x),
        labeled_y=np.array(lab_y, dtype=int),
        unlabeled_x=np.vstack(unl_x),
        unlabeled_y=np.array(unl_y, dtype=int),
        unlabeled_is_known=np.array(unl_known, dtype=bool),
        num_known_classes=num_known,
        num_total_classes=num_total,
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cosine_probs(model: Model, x: np.ndarray, temperature: float) -> np.ndarray:
    """Softmax over cosine scores between normalized features and prototypes."""
    z = model.features(x)
    u = z / np.linalg.norm(z, axis=1, keepdims=True)
    return _softmax(u @ model.prototypes.T / temperature)


def init_model(rng: SeededRng, d_in: int, d: int, num_classes: int) -> Model:
    encoder = gaussian(rng, 0.0, d_in ** -0.5, (d_in, d))
    protos = rng.standard_normal((num_classes, d))
    protos /= np.linalg.norm(protos, axis=1, keepdims=True)
    return Model(encoder=encoder, prototypes=protos)


@dataclass(frozen=True)
class PreparedBatch:
    """Stacked batch rows: labeled inputs, then view-1 and view-2 inputs.

    The two views of every unlabeled sample are consecutive blocks, so row
    ``n_labeled + j`` and row ``n_labeled + n_unlabeled + j`` are the two
    views of unlabeled sample j.
    """

    x: np.ndarray
    labels: np.ndarray  # labels of the first n_labeled rows
    n_labeled: int
    n_unlabeled: int

    @property
    def mask(self) -> BatchMask:
        flags = np.zeros(self.x.shape[0], dtype=bool)
        flags[: self.n_labeled] = True
        return BatchMask(flags)


def prepare_batch(
    data: DatasetSplit,
    labeled_idx: np.ndarray,
    unlabeled_idx: np.ndarray,
    aug_noise_std: float,
    noise_rng: SeededRng,
) -> PreparedBatch:
    """Assemble batch rows; unlabeled samples get two noise-augmented views."""
    x_lab = data.labeled_x[labeled_idx]
    x_unl = data.unlabeled_x[unlabeled_idx]
    m = x_unl.shape[0]
    noise = gaussian(noise_rng, 0.0, aug_noise_std, (2, m, data.input_dim)) if m else np.zeros((2, 0, data.input_dim))
    x = np.vstack([x_lab, x_unl + noise[0], x_unl + noise[1]])
    return PreparedBatch(
        x=x,
        labels=data.labeled_y[labeled_idx],
        n_labeled=x_lab.shape[0],
        n_unlabeled=m,
    )


@dataclass
class BatchGradients:
    """Losses and analytic gradients of the joint objective on one batch."""

    loss_sup: float
    loss_unsup: float
    feature_grads: np.ndarray  # d(alpha Lsup + beta Lunsup)/dz, per row
    feature_grads_sup: np.ndarray  # labeled-row supervised component only
    proto_grad: np.ndarray
    proto_grad_sup: np.ndarray
    features: np.ndarray
    targets: tuple[np.ndarray, np.ndarray] | None


def batch_objective(
    model: Model,
    batch: PreparedBatch,
    cfg: TrainConfig,
    targets: tuple[np.ndarray, np.ndarray] | None = None,
    loss_only: bool = False,
) -> BatchGradients:
    """Forward pass with closed-form gradients.

    ``targets`` optionally fixes the sharpened self-distillation targets
    (they carry no gradient); passing the targets captured from a base
    evaluation makes the objective a plain differentiable function of the
    parameters, which the finite-difference tests rely on.
    """
    tau_s = cfg.coord.tau_s
    nl, m = batch.n_labeled, batch.n_unlabeled
    z = model.features(batch.x)
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    u = z / norms
    scores = u @ model.prototypes.T
    p = _softmax(scores / tau_s)

    d_score = np.zeros_like(scores)

    loss_sup = 0.0
    if nl:
        p_lab = p[:nl]
        picked = p_lab[np.arange(nl), batch.labels]
        loss_sup = float(-np.mean(np.log(picked)))
        onehot = np.zeros((nl, model.prototypes.shape[0]))
        onehot[np.arange(nl), batch.labels] = 1.0
        d_score[:nl] = cfg.coord.alpha / nl * (p_lab - onehot) / tau_s

    loss_unsup = 0.0
    if m:
        pa = p[nl : nl + m]
        pb = p[nl + m :]
        if targets is None:
            qa = _softmax(scores[nl : nl + m] / cfg.sharpen_temp)
            qb = _softmax(scores[nl + m :] / cfg.sharpen_temp)
        else:
            qa, qb = targets
        cross = -0.5 * (
            np.sum(qb * np.log(pa), axis=1) + np.sum(qa * np.log(pb), axis=1)
        )
        p_mean = (pa.sum(axis=0) + pb.sum(axis=0)) / (2 * m)
        neg_entropy = float(np.sum(p_mean * np.log(p_mean)))
        loss_unsup = float(np.mean(cross)) + cfg.entropy_weight * neg_entropy

        scale = cfg.coord.beta * 0.5 / (m * tau_s)
        d_score[nl : nl + m] = scale * (pa - qb)
        d_score[nl + m :] = scale * (pb - qa)
        v = np.log(p_mean) + 1.0
        ent_scale = cfg.coord.beta * cfg.entropy_weight / (2 * m * tau_s)
        for block in (slice(nl, nl + m), slice(nl + m, None)):
            pblk = p[block]
            d_score[block] += ent_scale * pblk * (v - (pblk @ v)[:, None])
        targets_out = (qa, qb)
    else:
        targets_out = None

    if loss_only:
        return BatchGradients(loss_sup, loss_unsup, np.zeros(0), np.zeros(0),
                              np.zeros(0), np.zeros(0), z, targets_out)

    du = d_score @ model.prototypes
    feature_grads = (du - np.sum(du * u, axis=1, keepdims=True) * u) / norms
    proto_grad = d_score.T @ u

    feature_grads_sup = np.zeros_like(feature_grads)
    proto_grad_sup = np.zeros_like(proto_grad)
    if nl:
        feature_grads_sup[:nl] = feature_grads[:nl]
        proto_grad_sup = d_score[:nl].T @ u[:nl]

    return BatchGradients(
        loss_sup=loss_sup,
        loss_unsup=loss_unsup,
        feature_grads=feature_grads,
        feature_grads_sup=feature_grads_sup,
        proto_grad=proto_grad,
        proto_grad_sup=proto_grad_sup,
        features=z,
        targets=targets_out,
    )


@dataclass
class StepResult:
    loss_sup: float
    loss_unsup: float
    prox_loss: float
    feature_grads_before: np.ndarray
    feature_grads_after: np.ndarray
    encoder_grad: np.ndarray  # applied (post-adjustment) encoder gradient
    proto_grad: np.ndarray
    encoder_grad_sup: np.ndarray  # pure supervised reference gradient
    proto_grad_sup: np.ndarray
    adjustment: GradientAdjustment | None
    encoder_update: np.ndarray
    proto_update: np.ndarray


def gcd_step(
    model: Model,
    batch: PreparedBatch,
    ref_model: Model,
    conceptor: Conceptor,
    stats: EnergyStats,
    cfg: TrainConfig,
    lr_encoder: float,
    lr_head: float,
) -> StepResult:
    """One joint-objective step with optional gradient coordination.

    Computes the analytic per-row feature gradients, lets the coordinator
    adjust them (mode-dependent), propagates through the encoder, and
    applies SGD updates in place. Prototype rows are renormalized after
    the update; prototype gradients are never adjusted.
    """
    grads = batch_objective(model, batch, cfg)
    prox = 0.0
    before = grads.feature_grads
    mode = cfg.eagc_mode
    adjustment = None

    if mode in (MODE_ON, MODE_UNIFORM_PROJ):
        ref_feats = ref_model.features(batch.x)
        after, adjustment = coordinate(
            before,
            grads.features,
            ref_feats,
            batch.mask,
            conceptor,
            stats,
            cfg.coord,
            uniform_weights=(mode == MODE_UNIFORM_PROJ),
        )
    elif mode == MODE_LOSS_VARIANT:
        after = before.copy()
        if batch.n_labeled and cfg.coord.lambda_a != 0.0:
            lab = slice(0, batch.n_labeled)
            ref_feats = ref_model.features(batch.x)
            prox, prox_grad = proximal_loss(
                grads.features[lab], ref_feats[lab], cfg.coord.lambda_a
            )
            after[lab] += prox_grad
    else:
        after = before

    total = cfg.coord.alpha * grads.loss_sup + cfg.coord.beta * grads.loss_unsup + prox
    if not math.isfinite(total):
        raise NumericalError(
            f"non-finite loss (sup={grads.loss_sup}, unsup={grads.loss_unsup})"
        )

    encoder_grad = batch.x.T @ after
    encoder_update = -lr_encoder * encoder_grad
    proto_update = -lr_head * grads.proto_grad
    model.encoder += encoder_update
    model.prototypes += proto_update
    model.renormalize_prototypes()

    return StepResult(
        loss_sup=grads.loss_sup,
        loss_unsup=grads.loss_unsup,
        prox_loss=prox,
        feature_grads_before=before,
        feature_grads_after=after,
        encoder_grad=encoder_grad,
        proto_grad=grads.proto_grad,
        encoder_grad_sup=batch.x.T @ grads.feature_grads_sup,
        proto_grad_sup=grads.proto_grad_sup,
        adjustment=adjustment,
        encoder_update=encoder_update,
        proto_update=proto_update,
    )


def labeled_cross_entropy(model: Model, x: np.ndarray, y: np.ndarray, tau_s: float) -> float:
    """Full-set supervised cross-entropy (diagnostic, not per-batch)."""
    p = cosine_probs(model, x, tau_s)
    return float(-np.mean(np.log(p[np.arange(len(y)), y])))


def labeled_accuracy(model: Model, x: np.ndarray, y: np.ndarray) -> float:
    z = model.features(x)
    u = z / np.linalg.norm(z, axis=1, keepdims=True)
    return float(np.mean(np.argmax(u @ model.prototypes.T, axis=1) == y))


def _cosine_lr(base: float, step: int, total: int, enabled: bool) -> float:
    if not enabled or total <= 0:
        return base
    return base * 0.5 * (1.0 + math.cos(math.pi * step / total))


def train_reference(data: DatasetSplit, cfg: TrainConfig) -> tuple[Model, float]:
    """Supervised training on the labeled subset only (the anchor model).

    Cross-entropy with the shared softmax temperature, SGD with optional
    cosine decay; prototypes cover only the known classes. The returned
    model is meant to be frozen by the caller.
    """
    if data.labeled_x.shape[0] == 0:
        raise DataError("reference training requires labeled samples")
    counts = np.bincount(data.labeled_y, minlength=data.num_known_classes)
    if np.any(counts == 0):
        raise DataError(f"labeled classes with zero samples: {np.where(counts == 0)[0]}")

    init_rng, shuffle_rng = SeededRng(cfg.seed).split(2)
    model = init_model(init_rng, data.input_dim, cfg.feature_dim, data.num_known_classes)
    n = data.labeled_x.shape[0]
    steps_per_epoch = max(1, math.ceil(n / cfg.ref_batch_size))
    total_steps = cfg.ref_epochs * steps_per_epoch
    # plain cross-entropy: neutralize the joint-objective alpha weight
    ref_cfg = replace(cfg, eagc_mode=MODE_OFF, coord=replace(cfg.coord, alpha=1.0))

    step = 0
    for _ in range(cfg.ref_epochs):
        perm = shuffle_rng.permutation(n)
        for chunk in np.array_split(perm, steps_per_epoch):
            if chunk.size == 0:
                continue
            batch = PreparedBatch(
                x=data.labeled_x[chunk],
                labels=data.labeled_y[chunk],
                n_labeled=chunk.size,
                n_unlabeled=0,
            )
            grads = batch_objective(model, batch, ref_cfg)
            if not math.isfinite(grads.loss_sup):
                raise NumericalError(f"non-finite reference loss {grads.loss_sup}")
            lr_e = _cosine_lr(cfg.ref_lr_encoder, step, total_steps, cfg.cosine_decay)
            lr_h = _cosine_lr(cfg.ref_lr_head, step, total_steps, cfg.cosine_decay)
            model.encoder -= lr_e * (batch.x.T @ grads.feature_grads)
            model.prototypes -= lr_h * grads.proto_grad
            model.renormalize_prototypes()
            step += 1
    final_loss = labeled_cross_entropy(model, data.labeled_x, data.labeled_y, cfg.coord.tau_s)
    return model, final_loss


def evaluate(model: Model, data: DatasetSplit) -> metrics.AccTriple:
    """Cluster the unlabeled pool by argmax prototype and score it."""
    z = model.features(data.unlabeled_x)
    u = z / np.linalg.norm(z, axis=1, keepdims=True)
    pred = np.argmax(u @ model.prototypes.T, axis=1)
    return metrics.hungarian_acc(pred, data.unlabeled_y, data.known_flags)


def _flatten_grads(encoder_grad: np.ndarray, proto_grad: np.ndarray) -> np.ndarray:
    return np.concatenate([encoder_grad.ravel(), proto_grad.ravel()])


def _safe_gdc(g_hat: np.ndarray, g: np.ndarray) -> float:
    if np.linalg.norm(g_hat) == 0.0 or np.linalg.norm(g) == 0.0:
        return float("nan")
    return metrics.gdc(g_hat, g)


def train_gcd(data: DatasetSplit, ref_model: Model, cfg: TrainConfig) -> TrainTrace:
    """Full joint training loop with diagnostics and per-epoch evaluation.

    The known-class subspace, its labeled energy statistics, and the PCA
    projector used by the overlap diagnostics are all built once from the
    frozen reference model's labeled features before the loop starts.
    """
    lab_n = data.labeled_x.shape[0]
    unl_n = data.unlabeled_x.shape[0]
    if lab_n == 0 or unl_n == 0:
        raise DataError("training requires both labeled and unlabeled samples")
    if ref_model.encoder.shape != (data.input_dim, cfg.feature_dim):
        raise ArgumentError(
            f"reference encoder shape {ref_model.encoder.shape} does not match "
            f"(d_in={data.input_dim}, d={cfg.feature_dim})"
        )

    z_old = ref_model.features(data.labeled_x)
    conceptor = build_conceptor(z_old, cfg.coord.eta)
    stats = labeled_energy_stats(z_old, conceptor)
    p_old = build_pca_for_energy(z_old, cfg.soc_energy)

    init_rng, shuffle_rng, noise_rng = SeededRng(cfg.seed).split(3)
    if cfg.init_from_ref:
        encoder0 = ref_model.encoder.copy()
        protos0 = init_model(init_rng, data.input_dim, cfg.feature_dim,
                             data.num_total_classes).prototypes
        model = Model(encoder=encoder0, prototypes=protos0)
    else:
        model = init_model(init_rng, data.input_dim, cfg.feature_dim, data.num_total_classes)

    novel_x = data.unlabeled_x[~data.unlabeled_is_known]

    n_steps_epoch = max(1, math.ceil((lab_n + unl_n) / cfg.batch_size))
    total_steps = cfg.epochs * n_steps_epoch

    trace = TrainTrace()
    trace.epochs.append(EpochRecord(
        epoch=0,
        acc=evaluate(model, data),
        labeled_loss=labeled_cross_entropy(model, data.labeled_x, data.labeled_y, cfg.coord.tau_s),
    ))

    step = 0
    for epoch in range(1, cfg.epochs + 1):
        lab_chunks = np.array_split(shuffle_rng.permutation(lab_n), n_steps_epoch)
        unl_chunks = np.array_split(shuffle_rng.permutation(unl_n), n_steps_epoch)
        for lab_idx, unl_idx in zip(lab_chunks, unl_chunks):
            batch = prepare_batch(data, lab_idx, unl_idx, cfg.aug_noise_std, noise_rng)
            lr_e = _cosine_lr(cfg.lr_encoder, step, total_steps, cfg.cosine_decay)
            lr_h = _cosine_lr(cfg.lr_head, step, total_steps, cfg.cosine_decay)
            try:
                result = gcd_step(model, batch, ref_model, conceptor, stats, cfg, lr_e, lr_h)
            except NumericalError as exc:
                raise TrainingAborted(str(exc), trace) from exc

            if step < MEASURE_WINDOW or step % cfg.measure_every == 0:
                g_hat = _flatten_grads(result.encoder_grad_sup, result.proto_grad_sup)
                g = _flatten_grads(result.encoder_grad, result.proto_grad)
                z_new = novel_x @ model.encoder if novel_x.shape[0] else np.zeros((0, cfg.feature_dim))
                if z_new.shape[0] and np.sum(z_new * z_new) > 0:
                    soc_val = metrics.soc(z_new, p_old)
                else:
                    soc_val = float("nan")
                proto_norms = np.linalg.norm(result.proto_grad, axis=1)
                rho_g = (
                    metrics.rho_grad(proto_norms, data.known_flags)
                    if proto_norms.sum() > 0 else float("nan")
                )
                trace.steps.append(StepRecord(
                    step=step,
                    loss_sup=result.loss_sup,
                    loss_unsup=result.loss_unsup,
                    gdc=_safe_gdc(g_hat, g),
                    soc=soc_val,
                    rho_grad=rho_g,
                    rho_in=soc_val,
                ))
            step += 1

        trace.epochs.append(EpochRecord(
            epoch=epoch,
            acc=evaluate(model, data),
            labeled_loss=labeled_cross_entropy(model, data.labeled_x, data.labeled_y, cfg.coord.tau_s),
        ))

    trace.final_model = model
    return trace
