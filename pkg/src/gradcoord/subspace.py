"""Known-class representation subspaces and feature-energy ratios.

Two constructions over the labeled feature matrix are provided: a soft
conceptor operator S = R (R + eta^-2 I)^-1 built on the correlation matrix
R = Z^T Z / N, whose eigenvalues compress R's spectrum into [0, 1), and a
hard rank-k PCA projector P = U_k U_k^T. The energy ratio z^T S z / ||z||^2
measures how much of a feature's squared magnitude the subspace captures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DataError, DegenerateInputError
from .numerics import as_matrix, as_vector, solve_spd, sym_eig


@dataclass(frozen=True)
class Conceptor:
    """Soft subspace operator for the known classes.

    ``S`` is symmetric with eigenvalues in [0, 1); larger ``aperture_eta``
    admits more directions toward a full projector.
    """

    S: np.ndarray
    aperture_eta: float
    source_count: int


@dataclass(frozen=True)
class PcaProjector:
    """Hard orthogonal projector onto the top-k principal directions."""

    P: np.ndarray
    k: int
    captured_energy_fraction: float


@dataclass(frozen=True)
class EnergyStats:
    """Per-sample subspace energy ratios of a labeled feature matrix."""

    mean_labeled_energy: float
    per_sample: np.ndarray


def correlation_matrix(z: np.ndarray) -> np.ndarray:
    """Uncentered correlation matrix Z^T Z / N of a feature matrix."""
    return z.T @ z / z.shape[0]


def build_conceptor(z_old, eta: float) -> Conceptor:
    """Build the soft known-class subspace from labeled features.

    Solves S (R + eta^-2 I) = R and symmetrizes the result; R and the
    shift commute, so left and right forms agree up to rounding.
    """
    z = as_matrix(z_old, "z_old")
    if z.shape[0] < 1 or z.shape[1] < 1:
        raise ArgumentError(f"z_old must be non-empty, got shape {z.shape}")
    if eta <= 0:
        raise ArgumentError(f"aperture eta must be positive, got {eta}")
    r = correlation_matrix(z)
    d = r.shape[0]
    s = solve_spd(r + eta ** -2 * np.eye(d), r)
    s = (s + s.T) / 2.0
    return Conceptor(S=s, aperture_eta=float(eta), source_count=z.shape[0])


def build_pca(z_old, k: int) -> PcaProjector:
    """Rank-k projector from the top-k eigenvectors of Z^T Z / N."""
    z = as_matrix(z_old, "z_old")
    d = z.shape[1]
    if not 1 <= k <= d:
        raise ArgumentError(f"k must be in [1, {d}], got {k}")
    vals, vecs = sym_eig(correlation_matrix(z))
    u_k = vecs[:, :k]
    p = u_k @ u_k.T
    total = float(np.sum(vals))
    captured = float(np.sum(vals[:k]) / total) if total > 0 else 0.0
    return PcaProjector(P=(p + p.T) / 2.0, k=int(k), captured_energy_fraction=captured)


def build_pca_for_energy(z_old, energy_fraction: float = 0.90) -> PcaProjector:
    """Smallest-k PCA projector capturing at least ``energy_fraction``."""
    z = as_matrix(z_old, "z_old")
    if not 0 < energy_fraction <= 1:
        raise ArgumentError(f"energy_fraction must be in (0, 1], got {energy_fraction}")
    vals, _ = sym_eig(correlation_matrix(z))
    total = float(np.sum(vals))
    if total <= 0:
        return build_pca(z, 1)
    cumulative = np.cumsum(vals) / total
    k = int(np.searchsorted(cumulative, energy_fraction - 1e-12) + 1)
    return build_pca(z, min(k, z.shape[1]))


def energy_ratio(z, conceptor: Conceptor) -> float:
    """Fraction of a feature's squared magnitude inside the subspace."""
    vec = as_vector(z, "feature")
    if vec.shape[0] != conceptor.S.shape[0]:
        raise ArgumentError(
            f"feature has dim {vec.shape[0]}, conceptor expects {conceptor.S.shape[0]}"
        )
    sq = float(vec @ vec)
    if sq == 0.0:
        raise DegenerateInputError("energy_ratio of a zero feature vector")
    return max(float(vec @ conceptor.S @ vec) / sq, 0.0)


def energy_ratios(z, conceptor: Conceptor) -> np.ndarray:
    """Row-wise energy ratios z_i^T S z_i / ||z_i||^2 of a feature matrix."""
    arr = as_matrix(z, "features")
    if arr.shape[0] == 0:
        raise DataError("feature matrix is empty")
    if arr.shape[1] != conceptor.S.shape[0]:
        raise ArgumentError(
            f"features have dim {arr.shape[1]}, conceptor expects {conceptor.S.shape[0]}"
        )
    sq = np.einsum("ij,ij->i", arr, arr)
    if np.any(sq == 0.0):
        raise DegenerateInputError("feature matrix contains a zero row")
    num = np.einsum("ij,jk,ik->i", arr, conceptor.S, arr)
    return np.maximum(num / sq, 0.0)


def labeled_energy_stats(z_l, conceptor: Conceptor) -> EnergyStats:
    """Row-wise energy ratios of the labeled feature matrix, plus their mean."""
    per_sample = energy_ratios(z_l, conceptor)
    return EnergyStats(mean_labeled_energy=float(per_sample.mean()), per_sample=per_sample)


def apply_soft(conceptor: Conceptor, g) -> np.ndarray:
    """Project gradient rows into the subspace: returns G @ S."""
    arr = as_matrix(g, "gradient rows")
    if arr.shape[1] != conceptor.S.shape[0]:
        raise ArgumentError(
            f"gradient rows have dim {arr.shape[1]}, conceptor expects {conceptor.S.shape[0]}"
        )
    return arr @ conceptor.S
