"""Score sampling and stationary path generation for the autoregression.

Randomness is organized as counter-based substreams: every stream is seeded by
the tuple (master_seed, replication, role), so replications are independent,
reproducible, and the innovation stream of a path is disjoint by construction
from the stream that drew its starting point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hilbert import CoeffVector, SpectralDecomp
from .model import PARETO_TAIL, XI_LAWS, FarModel

ROLE_INITIAL = 0
ROLE_INNOVATION = 1


def substream(master_seed: int, replication: int, role: int) -> np.random.Generator:
    """Independent generator for (seed, replication, role)."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, replication, role]))


def draw_xi(law: str, rng: np.random.Generator, shape) -> np.ndarray:
    """Standardized scores: mean 0, variance 1, i.i.d. across entries."""
    if law == "gaussian":
        return rng.standard_normal(shape)
    if law == "uniform":
        half = math.sqrt(3.0)
        return rng.uniform(-half, half, shape)
    if law == "two_sided_exponential":
        return rng.laplace(0.0, 1.0 / math.sqrt(2.0), shape)
    if law == "pareto":
        # symmetric Pareto with tail index 2.5: unit variance, infinite
        # fourth moment; exists for negative testing only
        body = rng.pareto(PARETO_TAIL, shape) + 1.0
        sign = rng.integers(0, 2, shape) * 2.0 - 1.0
        scale = math.sqrt(PARETO_TAIL / (PARETO_TAIL - 2.0))
        return sign * body / scale
    raise ValueError(f"unknown xi law {law!r}; expected one of {XI_LAWS}")


def kl_sample_batch(decomp: SpectralDecomp, xi_law: str,
                    rng: np.random.Generator, size: int) -> np.ndarray:
    """size draws of sum_k xi_k sqrt(lambda_k) e_k, one per row."""
    xi = draw_xi(xi_law, rng, (size, decomp.dim))
    return (xi * np.sqrt(decomp.eigenvalues)) @ decomp.vectors.T


def kl_sample(decomp: SpectralDecomp, xi_law: str, rng: np.random.Generator) -> CoeffVector:
    """One draw from the law with the given spectral decomposition."""
    return CoeffVector(kl_sample_batch(decomp, xi_law, rng, 1)[0])


@dataclass(frozen=True)
class Path:
    """Consecutive observations X_1..X_n of one simulated trajectory."""

    matrix: np.ndarray  # (n, D), row k-1 holds X_k
    model_id: str
    seed: int
    burn_in: int = 0
    replication: int = 0

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64, copy=True)
        if m.ndim != 2 or m.shape[0] < 2:
            raise ValueError("a path needs at least two observations")
        if not np.all(np.isfinite(m)):
            raise ValueError("path contains non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def observation(self, k: int) -> CoeffVector:
        """X_k for k = 1..n."""
        if not 1 <= k <= self.n:
            raise ValueError(f"observation index {k} outside [1, {self.n}]")
        return CoeffVector(self.matrix[k - 1])

    @property
    def observations(self) -> tuple:
        return tuple(CoeffVector(row) for row in self.matrix)


def simulate_with_innovations(model: FarModel, n: int, master_seed: int,
                              replication: int = 0, burn_in: int = 0):
    """Run the recursion, returning (x0, observations, innovations).

    x0 is the state just before X_1 (after burn-in); observations[k-1] = X_k
    and innovations[k-1] = eps_k, so X_k = rho(X_{k-1}) + eps_k exactly.
    The starting point is drawn from the stationary law, and all innovations
    come from a single pre-drawn block of the innovation substream.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    start = kl_sample_batch(model.gamma_decomp, model.xi_law,
                            substream(master_seed, replication, ROLE_INITIAL), 1)[0]
    eps = kl_sample_batch(model.gamma_eps_decomp, model.xi_law,
                          substream(master_seed, replication, ROLE_INNOVATION),
                          burn_in + n)
    rho = model.rho.entries
    x = start
    for k in range(burn_in):
        x = rho @ x + eps[k]
    x0 = x
    xs = np.empty((n, model.dim))
    for k in range(n):
        x = rho @ x + eps[burn_in + k]
        xs[k] = x
    return x0, xs, eps[burn_in:]


def simulate_far(model: FarModel, n: int, burn_in: int = 0, *,
                 master_seed: int, replication: int = 0) -> Path:
    """Stationary path X_1..X_n, deterministic in (model, n, burn_in, seed)."""
    if n < 2:
        raise ValueError("need n >= 2")
    _, xs, _ = simulate_with_innovations(model, n, master_seed,
                                         replication=replication, burn_in=burn_in)
    return Path(matrix=xs, model_id=model.model_hash, seed=int(master_seed),
                burn_in=burn_in, replication=replication)


def path_to_csv(path: Path, file) -> None:
    """Write a path as CSV: meta comment, header row, one row per index."""
    file.write(f"# farlab-path v1 model={path.model_id} seed={path.seed} "
               f"replication={path.replication} burn_in={path.burn_in} d={path.dim}\n")
    file.write("t," + ",".join(f"c{j + 1}" for j in range(path.dim)) + "\n")
    for k in range(path.n):
        row = ",".join(repr(float(v)) for v in path.matrix[k])
        file.write(f"{k + 1},{row}\n")


def path_from_csv(file) -> Path:
    """Parse a path CSV, reporting the line number of any malformed content."""
    meta = {"model": "unknown", "seed": 0, "replication": 0, "burn_in": 0}
    rows = []
    expected = None
    for lineno, line in enumerate(file, start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for token in line.lstrip("# ").split():
                if "=" in token:
                    key, _, value = token.partition("=")
                    if key in meta:
                        meta[key] = value if key == "model" else int(value)
            continue
        cells = line.split(",")
        if cells[0] == "t":
            expected = len(cells) - 1
            continue
        try:
            values = [float(c) for c in cells[1:]]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: malformed number in path CSV: {exc}") from exc
        if expected is None:
            expected = len(values)
        elif len(values) != expected:
            raise ValueError(f"line {lineno}: expected {expected} coefficients, got {len(values)}")
        rows.append(values)
    if len(rows) < 2:
        raise ValueError("path CSV holds fewer than two observations")
    return Path(matrix=np.asarray(rows), model_id=str(meta["model"]), seed=meta["seed"],
                burn_in=meta["burn_in"], replication=meta["replication"])
