"""Dense linear-algebra and randomness substrate.

Everything is float64. Matrices are plain ``numpy.ndarray`` with row-major
semantics; these helpers add the validation and determinism contracts the
rest of the library relies on.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import (
    ArgumentError,
    DataError,
    FactorizationError,
    NumericalError,
    SymmetryError,
)

# Relative jitter added before SPD solves so rank-deficient correlation
# matrices still factor: eps = JITTER_REL * trace(A) / d.
JITTER_REL = 1e-8

_SYM_RTOL = 1e-10


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-d float64 array, raising DataError otherwise."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ArgumentError(f"{name} must be 2-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite entries")
    return arr


def as_vector(a, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-d float64 array."""
    arr = np.asarray(a, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite entries")
    return arr


def check_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ArgumentError(f"{name} must be square, got shape {a.shape}")
    return a


def check_symmetric(a: np.ndarray, name: str = "matrix", rtol: float = _SYM_RTOL) -> np.ndarray:
    """Raise SymmetryError when ||A - A^T|| exceeds rtol * ||A||."""
    check_square(a, name)
    scale = np.linalg.norm(a)
    asym = np.linalg.norm(a - a.T)
    if asym > rtol * max(scale, 1e-300):
        raise SymmetryError(
            f"{name} is not symmetric: ||A - A^T|| = {asym:.3e} > {rtol:g} * ||A||"
        )
    return a


def sym_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns (eigenvalues, eigenvectors) with eigenvalues sorted descending
    and eigenvectors as the corresponding columns.
    """
    arr = as_matrix(a, "sym_eig input")
    check_symmetric(arr, "sym_eig input")
    sym = (arr + arr.T) / 2.0
    try:
        vals, vecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigendecomposition failed: {exc}") from exc
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def solve_spd(a, b) -> np.ndarray:
    """Solve A X = B for symmetric positive definite A.

    A small relative jitter is added before factorizing; one step of
    iterative refinement against the unjittered A restores the residual
    to ||A X - B||_F <= 1e-8 ||B||_F.
    """
    a_arr = as_matrix(a, "solve_spd A")
    check_symmetric(a_arr, "solve_spd A")
    b_arr = np.asarray(b, dtype=np.float64)
    if not np.all(np.isfinite(b_arr)):
        raise DataError("solve_spd B contains non-finite entries")
    b2 = b_arr.reshape(b_arr.shape[0], -1) if b_arr.ndim == 1 else b_arr
    if b2.shape[0] != a_arr.shape[0]:
        raise ArgumentError(
            f"solve_spd shape mismatch: A is {a_arr.shape}, B is {b_arr.shape}"
        )

    d = a_arr.shape[0]
    eps = JITTER_REL * np.trace(a_arr) / d
    jittered = a_arr + eps * np.eye(d)
    try:
        cho = scipy.linalg.cho_factor(jittered, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise FactorizationError(f"matrix is not positive definite after jitter: {exc}") from exc

    x = scipy.linalg.cho_solve(cho, b2, check_finite=False)
    for _ in range(2):
        residual = b2 - a_arr @ x
        x = x + scipy.linalg.cho_solve(cho, residual, check_finite=False)
    return x.reshape(b_arr.shape)


class SeededRng:
    """Deterministic random stream; equal seeds give identical draws.

    Backed by PCG64 so the stream is reproducible across platforms.
    ``split`` derives independent child streams, which keeps separate
    concerns (init, shuffling, noise) stable under code reordering.
    """

    def __init__(self, seed: int, _seq: np.random.SeedSequence | None = None):
        self.seed = int(seed)
        self._seq = np.random.SeedSequence(self.seed) if _seq is None else _seq
        self.generator = np.random.Generator(np.random.PCG64(self._seq))

    def split(self, n: int) -> list["SeededRng"]:
        return [SeededRng(self.seed, _seq=child) for child in self._seq.spawn(n)]

    def integers(self, low: int, high: int) -> int:
        return int(self.generator.integers(low, high))

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def standard_normal(self, shape) -> np.ndarray:
        return self.generator.standard_normal(shape)


def gaussian(rng: SeededRng, mean: float, std: float, shape) -> np.ndarray:
    """Gaussian draws; std = 0 returns a constant array of ``mean``."""
    if std < 0:
        raise ArgumentError(f"gaussian std must be >= 0, got {std}")
    return mean + std * rng.standard_normal(shape)
