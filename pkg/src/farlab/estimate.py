"""Empirical operators, spectral-cutoff regularization, the autocorrelation
estimator, one-step prediction, and asymptotic confidence intervals.

The estimator composes the lag-one cross covariance with a rank-limited
inverse of the empirical covariance; the cutoff follows the rate
floor(c n^{1/4} / log n) clamped to [1, D].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .hilbert import (
    CoeffVector,
    LinearOp,
    SpectralDecomp,
    _check_rank_pivot,
    apply,
    hs_norm,
    sym_eigen,
)
from .simulate import Path


def _path_matrix(path) -> np.ndarray:
    if isinstance(path, Path):
        return path.matrix
    m = np.asarray(path, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected a Path or an (n, D) array")
    return m


def empirical_covariance(path) -> LinearOp:
    """(1/n) sum X_k (x) X_k."""
    x = _path_matrix(path)
    if x.shape[0] < 1:
        raise ValueError("empirical covariance needs at least one observation")
    m = x.T @ x / x.shape[0]
    return LinearOp(0.5 * (m + m.T), is_symmetric=True)


def cross_covariance(path) -> LinearOp:
    """(1/(n-1)) sum X_k (x) X_{k+1}; maps h to the average of <X_k, h> X_{k+1}."""
    x = _path_matrix(path)
    n = x.shape[0]
    if n < 2:
        raise ValueError("cross covariance needs at least two observations")
    return LinearOp.from_matrix(x[1:].T @ x[:-1] / (n - 1))


def kn_rule(n: int, c: float = 1.0, dim: int | None = None) -> int:
    """Cutoff floor(c n^{1/4} / log n), clamped to [1, dim]."""
    if n < 2:
        raise ValueError("need n >= 2")
    if c <= 0.0:
        raise ValueError("cutoff constant c must be > 0")
    k = math.floor(c * n ** 0.25 / math.log(n))
    k = max(k, 1)
    if dim is not None:
        k = min(k, dim)
    return k


def gamma_dag(fpca: SpectralDecomp, k: int) -> LinearOp:
    """Rank-k spectral inverse sum_{l<=k} lambda_l^{-1} e_l (x) e_l."""
    _check_rank_pivot(fpca, k)
    vk = fpca.vectors[:, :k]
    m = (vk / fpca.eigenvalues[:k]) @ vk.T
    return LinearOp(0.5 * (m + m.T), is_symmetric=True)


def rank_projector(fpca: SpectralDecomp, k: int) -> LinearOp:
    """Orthogonal projector on the span of the k leading eigenvectors."""
    if not 1 <= k <= fpca.dim:
        raise ValueError(f"rank {k} outside [1, {fpca.dim}]")
    vk = fpca.vectors[:, :k]
    m = vk @ vk.T
    return LinearOp(0.5 * (m + m.T), is_symmetric=True)


@dataclass(frozen=True)
class Fit:
    """All by-products of one estimation pass over a path."""

    gamma_n: LinearOp
    delta_n: LinearOp
    fpca: SpectralDecomp
    k_n: int
    gamma_n_dag: LinearOp
    rho_hat: LinearOp
    pi_hat: LinearOp
    gamma_eps_hat: LinearOp
    n: int

    @property
    def dim(self) -> int:
        return self.gamma_n.dim


def fit(path, k: int | None = None, c: float = 1.0) -> Fit:
    """Estimate the autocorrelation operator from a path.

    The cutoff is k if given, else the rate rule with constant c.  The
    innovation covariance estimate is the covariance of the one-step
    residuals X_k - rho_hat(X_{k-1}).
    """
    x = _path_matrix(path)
    n = x.shape[0]
    gamma_n = empirical_covariance(x)
    delta_n = cross_covariance(x)
    fpca = sym_eigen(gamma_n, psd=True)
    k_n = k if k is not None else kn_rule(n, c, dim=x.shape[1])
    dag = gamma_dag(fpca, k_n)
    rho_hat = LinearOp.from_matrix(delta_n.entries @ dag.entries)
    pi_hat = rank_projector(fpca, k_n)
    residuals = x[1:] - x[:-1] @ rho_hat.entries.T
    g = residuals.T @ residuals / (n - 1)
    gamma_eps_hat = LinearOp(0.5 * (g + g.T), is_symmetric=True)
    return Fit(gamma_n=gamma_n, delta_n=delta_n, fpca=fpca, k_n=k_n,
               gamma_n_dag=dag, rho_hat=rho_hat, pi_hat=pi_hat,
               gamma_eps_hat=gamma_eps_hat, n=n)


def predict(fit_result: Fit, x_new: CoeffVector) -> CoeffVector:
    """One-step prediction rho_hat(x_new)."""
    return apply(fit_result.rho_hat, x_new)


def confidence_interval(fit_result: Fit, x_new: CoeffVector, direction: CoeffVector,
                        level: float = 0.95) -> tuple:
    """Interval for the projected prediction target along a direction.

    Centered on <rho_hat(x_new), u> with half width
    z_{(1+level)/2} sqrt(k_n/n) sqrt(<Gamma_eps_hat u, u>).
    """
    if not 0.0 <= level < 1.0:
        raise ValueError(f"level={level} must lie in [0, 1)")
    u = direction.coeffs
    nu = float(np.linalg.norm(u))
    if nu == 0.0:
        raise ValueError("direction must be a non-zero vector")
    center = float(np.dot(predict(fit_result, x_new).coeffs, u))
    quad = float(u @ fit_result.gamma_eps_hat.entries @ u)
    if quad < 0.0:
        raise ValueError(f"quadratic form of the innovation covariance estimate "
                         f"is negative ({quad:.3e})")
    z = norm.ppf(0.5 * (1.0 + level))
    half = z * math.sqrt(fit_result.k_n / fit_result.n) * math.sqrt(quad)
    return center - half, center + half


def align_signs(fpca: SpectralDecomp, reference_vectors: np.ndarray) -> SpectralDecomp:
    """Flip empirical eigenvectors to non-negative overlap with true ones.

    Diagnostics helper only: eigenvector comparisons are meaningless without
    it, while every estimator quantity is sign-invariant.
    """
    v = fpca.vectors.copy()
    for l in range(v.shape[1]):
        if float(v[:, l] @ reference_vectors[:, l]) < 0.0:
            v[:, l] = -v[:, l]
    return SpectralDecomp(eigenvalues=fpca.eigenvalues, vectors=v, gaps=fpca.gaps,
                          degenerate_clusters=fpca.degenerate_clusters)


def fit_diagnostics(fit_result: Fit) -> dict:
    """Numerical residuals of the regularization identities."""
    gn = fit_result.gamma_n.entries
    dag = fit_result.gamma_n_dag.entries
    pi = fit_result.pi_hat.entries
    lam_k = fit_result.fpca.eigenvalues[fit_result.k_n - 1]
    sup_dag = float(np.linalg.svd(dag, compute_uv=False)[0])
    return {
        "projector_residual": hs_norm(gn @ dag - pi),
        "projector_idempotent_residual": hs_norm(pi @ pi - pi),
        "projector_trace_error": abs(float(np.trace(pi)) - fit_result.k_n),
        "dag_sup_norm_product_error": abs(sup_dag * lam_k - 1.0),
        "eigenvalue_sum_error": abs(float(np.sum(fit_result.fpca.eigenvalues))
                                    - float(np.trace(gn))),
    }


def fit_to_json(fit_result: Fit) -> dict:
    """JSON-ready view: eigenvalues, cutoff, row-major matrices, diagnostics."""
    return {
        "n": fit_result.n,
        "k_n": fit_result.k_n,
        "eigenvalues": [float(v) for v in fit_result.fpca.eigenvalues],
        "gamma_n": _matrix_rows(fit_result.gamma_n),
        "delta_n": _matrix_rows(fit_result.delta_n),
        "gamma_n_dag": _matrix_rows(fit_result.gamma_n_dag),
        "rho_hat": _matrix_rows(fit_result.rho_hat),
        "gamma_eps_hat": _matrix_rows(fit_result.gamma_eps_hat),
        "diagnostics": fit_diagnostics(fit_result),
    }


def _matrix_rows(op: LinearOp) -> list:
    return [[float(v) for v in row] for row in op.entries]
