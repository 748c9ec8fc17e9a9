"""Finite-dimensional coefficient space and the operator algebra on it.

Everything lives in a fixed D-dimensional truncation of a separable Hilbert
space, expressed in an abstract orthonormal reference basis: vectors are D
coefficient arrays, operators are D x D matrices, and all inner products are
plain Euclidean dot products.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

# Absolute tolerance certifying a matrix as symmetric.
SYMMETRY_TOL = 1e-12
# Relative pivot threshold below which a spectral inverse refuses to divide.
PIVOT_RTOL = 1e-12
# Relative gap below which neighbouring eigenvalues count as degenerate.
DEGENERATE_RTOL = 1e-10
# Most negative eigenvalue still accepted (and clamped) under the PSD flag.
PSD_EIG_FLOOR = -1e-10


class DimensionMismatchError(ValueError):
    """Operands live in coefficient spaces of different dimensions."""


class DegenerateSpectrumError(ValueError):
    """An eigenvalue is too small (relative to the largest) to invert."""


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class CoeffVector:
    """Element of the truncated space: D coefficients in the reference basis."""

    coeffs: np.ndarray

    def __post_init__(self):
        arr = _readonly(np.atleast_1d(self.coeffs))
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("coefficient vector must be one-dimensional and non-empty")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficient vector contains non-finite entries")
        object.__setattr__(self, "coeffs", arr)

    @property
    def dim(self) -> int:
        return self.coeffs.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    @classmethod
    def zeros(cls, dim: int) -> "CoeffVector":
        return cls(np.zeros(dim))

    @classmethod
    def basis(cls, dim: int, index: int) -> "CoeffVector":
        """The index-th reference basis vector (0-based)."""
        if not 0 <= index < dim:
            raise ValueError(f"basis index {index} outside [0, {dim})")
        coeffs = np.zeros(dim)
        coeffs[index] = 1.0
        return cls(coeffs)


@dataclass(frozen=True)
class LinearOp:
    """Bounded operator on the truncated space as a D x D coefficient matrix."""

    entries: np.ndarray
    is_symmetric: bool = False

    def __post_init__(self):
        m = _readonly(self.entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("operator matrix contains non-finite entries")
        if self.is_symmetric and np.max(np.abs(m - m.T)) > SYMMETRY_TOL:
            raise ValueError("operator flagged symmetric but entries are not")
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "LinearOp":
        """Wrap a matrix, auto-certifying symmetry when it holds exactly enough."""
        m = np.asarray(m, dtype=np.float64)
        sym = m.ndim == 2 and m.shape[0] == m.shape[1] and np.max(np.abs(m - m.T)) <= SYMMETRY_TOL
        return cls(m, is_symmetric=bool(sym))

    @classmethod
    def identity(cls, dim: int) -> "LinearOp":
        return cls(np.eye(dim), is_symmetric=True)

    @classmethod
    def zero(cls, dim: int) -> "LinearOp":
        return cls(np.zeros((dim, dim)), is_symmetric=True)

    @classmethod
    def diagonal(cls, values) -> "LinearOp":
        return cls(np.diag(np.asarray(values, dtype=np.float64)), is_symmetric=True)


class OpNorms(NamedTuple):
    sup: float
    hs: float
    trace: float


@dataclass(frozen=True)
class SpectralDecomp:
    """Eigen-decomposition of a symmetric operator, sorted non-increasing.

    ``vectors`` holds orthonormal eigenvectors as columns; ``gaps[j]`` is the
    isolation radius of eigenvalue j: the smaller of its distances to the two
    neighbouring eigenvalues (one-sided at the endpoints).  Runs of
    eigenvalues separated by less than DEGENERATE_RTOL * lambda_1 are recorded
    in ``degenerate_clusters`` as half-open index ranges.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    gaps: np.ndarray
    degenerate_clusters: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _readonly(self.eigenvalues))
        object.__setattr__(self, "vectors", _readonly(self.vectors))
        object.__setattr__(self, "gaps", _readonly(self.gaps))

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def eigenvector(self, l: int) -> CoeffVector:
        return CoeffVector(self.vectors[:, l])

    def reconstruct(self) -> LinearOp:
        """Sum of lambda_l e_l (x) e_l as an operator."""
        m = (self.vectors * self.eigenvalues) @ self.vectors.T
        return LinearOp(0.5 * (m + m.T), is_symmetric=True)


def _check_same_dim(*dims: int) -> None:
    if len(set(dims)) != 1:
        raise DimensionMismatchError(f"dimension mismatch: {dims}")


def inner_product(u: CoeffVector, v: CoeffVector) -> float:
    _check_same_dim(u.dim, v.dim)
    return float(np.dot(u.coeffs, v.coeffs))


def tensor_product(u: CoeffVector, v: CoeffVector) -> LinearOp:
    """Rank-one operator h -> <u, h> v."""
    _check_same_dim(u.dim, v.dim)
    return LinearOp.from_matrix(np.outer(v.coeffs, u.coeffs))


def apply(t: LinearOp, x: CoeffVector) -> CoeffVector:
    _check_same_dim(t.dim, x.dim)
    return CoeffVector(t.entries @ x.coeffs)


def compose(s: LinearOp, t: LinearOp) -> LinearOp:
    """The operator s o t (apply t first)."""
    _check_same_dim(s.dim, t.dim)
    return LinearOp.from_matrix(s.entries @ t.entries)


def adjoint(t: LinearOp) -> LinearOp:
    return LinearOp(t.entries.T, is_symmetric=t.is_symmetric)


def trace(t: LinearOp) -> float:
    return float(np.trace(t.entries))


def op_norms(t: LinearOp) -> OpNorms:
    """(sup, Hilbert-Schmidt, trace) norms via singular values."""
    sv = np.linalg.svd(t.entries, compute_uv=False)
    return OpNorms(float(sv[0]) if sv.size else 0.0,
                   float(np.sqrt(np.sum(sv ** 2))),
                   float(np.sum(sv)))


def hs_norm(m: np.ndarray) -> float:
    """Hilbert-Schmidt (Frobenius) norm of a raw matrix."""
    return float(np.linalg.norm(m, "fro"))


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # Each eigenvector is flipped so its largest-magnitude coordinate is
    # positive; np.argmax picks the lowest index on ties.
    v = vectors.copy()
    for j in range(v.shape[1]):
        lead = np.argmax(np.abs(v[:, j]))
        if v[lead, j] < 0:
            v[:, j] = -v[:, j]
    return v


def _spectral_gaps(eigenvalues: np.ndarray) -> np.ndarray:
    d = eigenvalues.size
    if d == 1:
        return np.array([np.inf])
    diffs = eigenvalues[:-1] - eigenvalues[1:]
    gaps = np.empty(d)
    gaps[0] = diffs[0]
    gaps[-1] = diffs[-1]
    for j in range(1, d - 1):
        gaps[j] = min(diffs[j - 1], diffs[j])
    return gaps


def _degenerate_clusters(eigenvalues: np.ndarray) -> tuple:
    d = eigenvalues.size
    tol = DEGENERATE_RTOL * max(abs(eigenvalues[0]), 1e-300)
    clusters = []
    start = 0
    for j in range(1, d + 1):
        if j == d or eigenvalues[j - 1] - eigenvalues[j] >= tol:
            if j - start > 1:
                clusters.append((start, j))
            start = j
    return tuple(clusters)


def sym_eigen(t: LinearOp, psd: bool = False) -> SpectralDecomp:
    """Eigen-decomposition of a symmetric operator.

    With ``psd=True``, eigenvalues slightly below zero (>= PSD_EIG_FLOOR) are
    clamped to 0 and anything more negative raises.
    """
    if not t.is_symmetric:
        raise ValueError("sym_eigen requires an operator certified symmetric")
    w, v = np.linalg.eigh(t.entries)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    if psd:
        if w[-1] < PSD_EIG_FLOOR:
            raise ValueError(f"operator is not PSD: smallest eigenvalue {w[-1]:.3e}")
        w = np.where(w < 0.0, 0.0, w)
    v = _fix_signs(v)
    return SpectralDecomp(eigenvalues=w, vectors=v, gaps=_spectral_gaps(w),
                          degenerate_clusters=_degenerate_clusters(w))


def psd_sqrt(t: LinearOp) -> LinearOp:
    """Square root of a PSD symmetric operator."""
    dec = sym_eigen(t, psd=True)
    m = (dec.vectors * np.sqrt(dec.eigenvalues)) @ dec.vectors.T
    return LinearOp(0.5 * (m + m.T), is_symmetric=True)


def psd_pinv_sqrt(decomp: SpectralDecomp, k: int) -> LinearOp:
    """Rank-k spectral inverse square root: sum_{l<=k} lambda_l^{-1/2} e_l (x) e_l."""
    _check_rank_pivot(decomp, k)
    vk = decomp.vectors[:, :k]
    m = (vk / np.sqrt(decomp.eigenvalues[:k])) @ vk.T
    return LinearOp(0.5 * (m + m.T), is_symmetric=True)


def _check_rank_pivot(decomp: SpectralDecomp, k: int) -> None:
    d = decomp.dim
    if not 1 <= k <= d:
        raise ValueError(f"cutoff k={k} outside [1, {d}]")
    lam = decomp.eigenvalues
    threshold = PIVOT_RTOL * max(lam[0], 0.0)
    for l in range(k):
        if lam[l] < threshold or lam[l] <= 0.0:
            raise DegenerateSpectrumError(
                f"eigenvalue {l + 1} of {d} is {lam[l]:.3e}, below the pivot "
                f"threshold {threshold:.3e}; cannot invert at cutoff {k}")
