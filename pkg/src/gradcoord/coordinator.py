"""Energy-aware gradient coordination.

Adjusts feature-level gradients before they reach the encoder: labeled rows
receive an alignment pull lambda_a (z - z_hat) toward frozen reference-model
anchors, and unlabeled rows have their component inside the known-class
subspace suppressed, -lambda_p tau_i (g S), with a per-sample elastic weight
tau_i = 1 - E(z_i) / E_bar derived from the feature's subspace energy ratio.
The alignment pull is exactly the gradient of the quadratic proximal penalty
(lambda_a / 2) ||z - z_hat||^2, which `proximal_loss` exposes directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError
from .numerics import as_matrix, as_vector
from .subspace import Conceptor, EnergyStats, energy_ratios

CLAMP_ZERO_ONE = "clamp_zero_one"
CLAMP_ZERO_ONLY = "clamp_zero_only"
UNCLAMPED = "unclamped"
CLAMP_POLICIES = (CLAMP_ZERO_ONE, CLAMP_ZERO_ONLY, UNCLAMPED)


@dataclass(frozen=True)
class CoordinatorConfig:
    """Coordination strengths and the shared loss/classifier knobs.

    Defaults: alignment 0.7, projection 0.5, aperture 2.0, softmax
    temperature 0.1. ``alpha`` and ``beta`` weight the supervised and
    unsupervised objectives; their default balance is an artifact choice.
    """

    lambda_a: float = 0.7
    lambda_p: float = 0.5
    eta: float = 2.0
    tau_clamp: str = CLAMP_ZERO_ONE
    alpha: float = 0.35
    beta: float = 0.65
    tau_s: float = 0.1

    def __post_init__(self):
        for name in ("lambda_a", "lambda_p", "alpha", "beta"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ArgumentError(f"{name} must be finite and >= 0, got {value}")
        if self.alpha + self.beta <= 0:
            raise ArgumentError("alpha + beta must be positive")
        if self.eta <= 0:
            raise ArgumentError(f"eta must be positive, got {self.eta}")
        if self.tau_s <= 0:
            raise ArgumentError(f"tau_s must be positive, got {self.tau_s}")
        if self.tau_clamp not in CLAMP_POLICIES:
            raise ArgumentError(
                f"tau_clamp must be one of {CLAMP_POLICIES}, got {self.tau_clamp!r}"
            )


@dataclass(frozen=True)
class BatchMask:
    """Boolean labeledness flags, one per batch row."""

    labeled_flags: np.ndarray

    def __post_init__(self):
        flags = np.asarray(self.labeled_flags, dtype=bool)
        object.__setattr__(self, "labeled_flags", flags)

    def __len__(self) -> int:
        return self.labeled_flags.shape[0]

    @property
    def unlabeled_flags(self) -> np.ndarray:
        return ~self.labeled_flags


@dataclass(frozen=True)
class GradientAdjustment:
    """Per-row deltas applied by `coordinate`.

    ``delta_align`` is zero on unlabeled rows, ``delta_proj`` is zero on
    labeled rows; ``tau`` holds the per-row projection weights (zero on
    labeled rows, where projection does not apply).
    """

    delta_align: np.ndarray
    delta_proj: np.ndarray
    tau: np.ndarray = field(default_factory=lambda: np.zeros(0))


def alignment_term(z_l, z_hat_l, lambda_a: float) -> np.ndarray:
    """Alignment pull toward reference anchors: lambda_a (z - z_hat)."""
    z = np.asarray(z_l, dtype=np.float64)
    z_hat = np.asarray(z_hat_l, dtype=np.float64)
    if z.shape != z_hat.shape:
        raise ArgumentError(f"shape mismatch: {z.shape} vs {z_hat.shape}")
    return lambda_a * (z - z_hat)


def clamp_tau(tau: np.ndarray, policy: str) -> np.ndarray:
    if policy == CLAMP_ZERO_ONE:
        return np.clip(tau, 0.0, 1.0)
    if policy == CLAMP_ZERO_ONLY:
        return np.maximum(tau, 0.0)
    if policy == UNCLAMPED:
        return tau
    raise ArgumentError(f"unknown tau clamp policy {policy!r}")


def adaptive_weights(
    z_u, conceptor: Conceptor, mean_labeled_energy: float, clamp: str = CLAMP_ZERO_ONE
) -> np.ndarray:
    """Elastic projection weights tau_i = 1 - E(z_i) / E_bar, clamped.

    Samples already well inside the known subspace get small tau (weak
    projection), so learning on unlabeled known-class samples is not
    suppressed; poorly aligned samples get tau near 1.
    """
    if mean_labeled_energy <= 0:
        raise ArgumentError(
            f"mean labeled energy must be positive, got {mean_labeled_energy}"
        )
    raw = 1.0 - energy_ratios(z_u, conceptor) / mean_labeled_energy
    return clamp_tau(raw, clamp)


def elastic_projection(g_u, conceptor: Conceptor, tau, lambda_p: float) -> np.ndarray:
    """Weighted suppression of subspace content: row i -> -lambda_p tau_i (g_i S)."""
    g = as_matrix(g_u, "unlabeled gradients")
    t = as_vector(tau, "tau")
    if t.shape[0] != g.shape[0]:
        raise ArgumentError(
            f"tau has length {t.shape[0]}, gradient matrix has {g.shape[0]} rows"
        )
    return -lambda_p * t[:, None] * (g @ conceptor.S)


def coordinate(
    feature_grads,
    features,
    ref_features,
    mask: BatchMask,
    conceptor: Conceptor,
    stats: EnergyStats,
    cfg: CoordinatorConfig,
    uniform_weights: bool = False,
) -> tuple[np.ndarray, GradientAdjustment]:
    """Apply alignment and elastic projection to a batch of feature gradients.

    Labeled rows get lambda_a (features - ref_features) added; unlabeled
    rows get their subspace component scaled down by the elastic weights
    computed from the *current* features. ``uniform_weights`` forces tau = 1
    on every unlabeled row (the no-energy-adaptation ablation).

    Returns the adjusted gradient matrix and the applied deltas.
    """
    g = as_matrix(feature_grads, "feature_grads")
    z = as_matrix(features, "features")
    z_hat = as_matrix(ref_features, "ref_features")
    n = g.shape[0]
    if z.shape != g.shape or z_hat.shape != g.shape:
        raise ArgumentError(
            f"inconsistent shapes: grads {g.shape}, features {z.shape}, refs {z_hat.shape}"
        )
    if len(mask) != n:
        raise ArgumentError(f"mask has {len(mask)} flags for {n} rows")

    lab = mask.labeled_flags
    unl = mask.unlabeled_flags
    adjusted = g.copy()

    delta_align = np.zeros_like(g)
    if cfg.lambda_a != 0.0 and np.any(lab):
        delta_align[lab] = alignment_term(z[lab], z_hat[lab], cfg.lambda_a)
        adjusted[lab] += delta_align[lab]

    delta_proj = np.zeros_like(g)
    tau = np.zeros(n)
    if np.any(unl):
        if uniform_weights:
            tau[unl] = 1.0
        else:
            tau[unl] = adaptive_weights(
                z[unl], conceptor, stats.mean_labeled_energy, cfg.tau_clamp
            )
        if cfg.lambda_p != 0.0:
            delta_proj[unl] = elastic_projection(g[unl], conceptor, tau[unl], cfg.lambda_p)
            adjusted[unl] += delta_proj[unl]

    return adjusted, GradientAdjustment(delta_align=delta_align, delta_proj=delta_proj, tau=tau)


def proximal_loss(z_l, z_hat_l, lambda_a: float) -> tuple[float, np.ndarray]:
    """Quadratic proximal penalty and its gradient.

    loss = (lambda_a / 2) sum_i ||z_i - z_hat_i||^2; the gradient is
    computed by `alignment_term` so the two routes agree bit for bit.
    """
    z = np.asarray(z_l, dtype=np.float64)
    z_hat = np.asarray(z_hat_l, dtype=np.float64)
    if z.shape != z_hat.shape:
        raise ArgumentError(f"shape mismatch: {z.shape} vs {z_hat.shape}")
    diff = z - z_hat
    loss = 0.5 * lambda_a * float(np.sum(diff * diff))
    return loss, alignment_term(z, z_hat, lambda_a)
