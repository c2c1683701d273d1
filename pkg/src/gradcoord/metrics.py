"""Gradient-entanglement diagnostics and clustering accuracy.

gdc measures how far the joint optimization direction has rotated away
from the pure-supervised gradient (1 minus their cosine, in [0, 2]); soc
measures the fraction of novel-feature energy lying inside the known-class
PCA subspace. rho_grad is the known-class share of per-class gradient
norms and rho_in is soc tracked on current-encoder novel features.
Clustering accuracy matches predicted clusters to ground-truth classes
with a single optimal assignment over all samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DegenerateInputError
from .numerics import as_matrix, as_vector
from .subspace import PcaProjector


@dataclass(frozen=True)
class GeReport:
    """One measured step of the entanglement diagnostics."""

    gdc: float
    soc: float
    rho_grad: float
    rho_in: float
    step: int = 0


@dataclass(frozen=True)
class AccTriple:
    """Clustering accuracy over all / known-class / novel-class samples."""

    all: float
    old: float
    new: float


def gdc(g_hat_l, g) -> float:
    """Gradient deviation coefficient: 1 - cos(g_hat_l, g), in [0, 2]."""
    a = as_vector(g_hat_l, "g_hat_l")
    b = as_vector(g, "g")
    if a.shape != b.shape:
        raise ArgumentError(f"gradient shapes differ: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("gdc of a zero gradient vector")
    return 1.0 - float(a @ b) / (na * nb)


def soc(z_new, p_old) -> float:
    """Subspace overlap coefficient ||Z P||_F^2 / ||Z||_F^2, in [0, 1]."""
    z = as_matrix(z_new, "z_new")
    p = p_old.P if isinstance(p_old, PcaProjector) else as_matrix(p_old, "projector")
    total = float(np.sum(z * z))
    if total == 0.0:
        raise DegenerateInputError("soc of an all-zero feature matrix")
    projected = z @ p
    return float(np.sum(projected * projected)) / total


def rho_in(z_new_current, p_old) -> float:
    """Projection fraction of current-encoder novel features; same as soc."""
    return soc(z_new_current, p_old)


def rho_grad(per_class_grad_norms, known_flags) -> float:
    """Known-class share of the total per-class gradient norm."""
    norms = as_vector(per_class_grad_norms, "per_class_grad_norms")
    flags = np.asarray(known_flags, dtype=bool)
    if flags.shape[0] != norms.shape[0]:
        raise ArgumentError(
            f"{flags.shape[0]} known flags for {norms.shape[0]} class norms"
        )
    if np.any(norms < 0):
        raise ArgumentError("gradient norms must be non-negative")
    total = float(norms.sum())
    if total == 0.0:
        raise DegenerateInputError("all per-class gradient norms are zero")
    return float(norms[flags].sum()) / total


def min_cost_assignment(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost perfect matching on a square cost matrix.

    Augmenting-path algorithm with row/column potentials, O(n^3).
    Returns ``assign`` with ``assign[i]`` the column matched to row i.
    """
    c = as_matrix(cost, "cost")
    n = c.shape[0]
    if c.shape[1] != n:
        raise ArgumentError(f"cost matrix must be square, got {c.shape}")
    inf = float("inf")
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)  # p[j]: row matched to column j (1-based)
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = c[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    assign = np.zeros(n, dtype=int)
    for j in range(1, n + 1):
        assign[p[j] - 1] = j - 1
    return assign


def hungarian_acc(pred, gt, known_flags) -> AccTriple:
    """Clustering accuracy triple under one optimal cluster-class matching.

    The contingency table of (cluster, class) co-occurrence counts is
    padded to square, negated, and solved as a min-cost assignment; the
    all/old/new accuracies are read off that single global assignment.
    ``known_flags[c]`` says whether ground-truth class id ``c`` is known.
    An empty partition reports accuracy 0.0 with weight 0.
    """
    pred_arr = np.asarray(pred, dtype=int).reshape(-1)
    gt_arr = np.asarray(gt, dtype=int).reshape(-1)
    if pred_arr.shape[0] != gt_arr.shape[0]:
        raise ArgumentError(
            f"{pred_arr.shape[0]} predictions for {gt_arr.shape[0]} labels"
        )
    if pred_arr.shape[0] == 0:
        raise ArgumentError("empty input to hungarian_acc")
    flags = np.asarray(known_flags, dtype=bool)
    if gt_arr.min() < 0:
        raise ArgumentError("ground-truth class ids must be non-negative")
    if gt_arr.max() >= flags.shape[0]:
        raise ArgumentError(
            f"known_flags has {flags.shape[0]} entries, labels reach {gt_arr.max()}"
        )

    clusters, pred_idx = np.unique(pred_arr, return_inverse=True)
    classes, gt_idx = np.unique(gt_arr, return_inverse=True)
    n = max(clusters.shape[0], classes.shape[0])
    counts = np.zeros((n, n))
    np.add.at(counts, (pred_idx, gt_idx), 1.0)
    assign = min_cost_assignment(-counts)

    class_of_cluster = np.full(n, -1, dtype=int)
    for ci, cj in enumerate(assign):
        class_of_cluster[ci] = classes[cj] if cj < classes.shape[0] else -1
    correct = class_of_cluster[pred_idx] == gt_arr

    known_sample = flags[gt_arr]

    def partition_acc(sel: np.ndarray) -> float:
        return float(correct[sel].mean()) if np.any(sel) else 0.0

    return AccTriple(
        all=float(correct.mean()),
        old=partition_acc(known_sample),
        new=partition_acc(~known_sample),
    )
