"""Two independent eigenvalue approximations used as cross-checks.

* Monte Carlo Nystrom: sample y_1..y_N from the weight normalized to a
  probability density and take the eigenvalues of K(y_i, y_j)/N.
* Grid discretization: evaluate the symmetrized kernel
  K(s,t) sqrt(w(s) w(t)) on an equispaced truncated grid and scale the
  matrix so that it acts like the integral operator.

Two scalings of the grid matrix are offered.  ``"riemann"`` multiplies by
the grid step h = A/m.  ``"published"`` multiplies by the truncated length
divided by the node count (2A/(2m+1) on R, A/(m+1) on [0, inf)) and, on
the half-line, divides by 1 - exp(-A), the mass of the unit exponential
on [0, A]; this is the convention that reproduces the published grid
tables.  Both converge to the same limit as m grows.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.sparse.linalg import eigsh

from spectrakit.kernels import KernelSpec
from spectrakit.polybasis import BasisFamily, BasisKind
from spectrakit.rayleigh_ritz import Spectrum, _check_compatible

__all__ = [
    "MCConfig",
    "GridConfig",
    "MCSummary",
    "nystrom_mc",
    "mc_replicate",
    "grid_spectrum",
    "replication_rng",
    "thread_count",
]

# above this matrix size only the leading eigenvalues are computed (Lanczos)
DENSE_LIMIT = 2500
MAX_SAMPLES = 20000


def thread_count(requested: int | None = None) -> int:
    """Worker count, capped by the SPECTRAKIT_THREADS environment variable."""
    cap = os.environ.get("SPECTRAKIT_THREADS")
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ValueError(f"SPECTRAKIT_THREADS must be an integer, got {cap!r}") from None
    return max(1, n)


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    """Philox stream for one replication, derived from (seed, replication).

    Streams depend only on the pair, never on scheduling, so results are
    identical for any number of worker threads.
    """
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(replication)])))


@dataclass(frozen=True)
class MCConfig:
    """Monte Carlo Nystrom settings.

    The sampling density is the basis weight divided by its mass:
    uniform(0,1), Exp(gamma), Normal(0, 1/(2 gamma)), Poisson(rho) or the
    product normal in R^d.
    """

    kernel: KernelSpec
    basis: BasisFamily
    N: int
    replications: int = 1
    seed: int = 0
    top: int = 10

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if self.N > MAX_SAMPLES:
            raise ValueError(f"N > {MAX_SAMPLES} is not supported (dense eigensolve)")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.top < 1:
            raise ValueError("top must be >= 1")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        _check_compatible(self.kernel, self.basis)


@dataclass(frozen=True)
class GridConfig:
    """Grid discretization settings.

    ``gamma`` is the rate of the weight exp(-gamma t) on [0, inf) or
    exp(-gamma t^2) on R; ``gamma = 0`` (unit weight) is allowed because
    the grid truncates the support at ``A`` anyway.
    """

    kernel: KernelSpec
    A: float
    m: int
    gamma: float = 1.0
    top: int = 10
    scaling: str = "published"

    def __post_init__(self):
        if self.scaling not in ("published", "riemann"):
            raise ValueError(f"scaling must be 'published' or 'riemann', got {self.scaling!r}")
        if not self.A > 0:
            raise ValueError("A must be positive")
        if self.m < 10:
            raise ValueError("m must be >= 10")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.kernel.d > 1:
            raise ValueError("the grid method handles univariate kernels only")
        if self.kernel.support not in ("R", "[0,inf)", "any"):
            raise ValueError(f"grid method needs support R or [0,inf), kernel {self.kernel.id.value} "
                             f"lives on {self.kernel.support}")

    @property
    def nodes(self) -> np.ndarray:
        h = self.A / self.m
        if self.half_line:
            return h * np.arange(self.m + 1)
        return h * np.arange(-self.m, self.m + 1)

    @property
    def half_line(self) -> bool:
        return self.kernel.support == "[0,inf)"

    @property
    def scale(self) -> float:
        """Factor multiplying the raw kernel matrix."""
        if self.scaling == "riemann":
            return self.A / self.m
        if self.half_line:
            return self.A / (self.m + 1) / -math.expm1(-self.A)
        return 2.0 * self.A / (2 * self.m + 1)

    def weight(self, x):
        if self.half_line:
            return np.exp(-self.gamma * x)
        return np.exp(-self.gamma * x * x)


@dataclass(frozen=True, eq=False)
class MCSummary:
    """Per-rank mean and standard deviation over replications."""

    mean: np.ndarray
    sd: np.ndarray
    samples: np.ndarray  # (replications, top)
    provenance: dict = field(default_factory=dict)


def _draw(basis: BasisFamily, N: int, rng: np.random.Generator) -> np.ndarray:
    kind = basis.kind
    if kind is BasisKind.LEGENDRE01:
        return rng.random(N)
    if kind is BasisKind.LAGUERRE_EXP:
        return rng.exponential(1.0 / basis.gamma, N)
    if kind is BasisKind.HERMITE_GAUSS:
        return rng.normal(0.0, 1.0 / math.sqrt(2.0 * basis.gamma), N)
    if kind is BasisKind.CHARLIER_POISSON:
        return rng.poisson(basis.rho, N).astype(float)
    if kind is BasisKind.TENSOR_HERMITE:
        shape = (N, basis.dim) if basis.dim > 1 else N
        return rng.normal(0.0, 1.0 / math.sqrt(2.0 * basis.gamma), shape)
    raise ValueError(f"unsupported weight class {kind}")  # pragma: no cover


def _top_eigenvalues(M: np.ndarray, top: int) -> np.ndarray:
    """Largest eigenvalues of a symmetric matrix, descending, zero-padded to ``top``."""
    size = M.shape[0]
    k = min(top, size)
    if size <= DENSE_LIMIT or k >= size - 1:
        lam = eigh(M, eigvals_only=True, subset_by_index=[size - k, size - 1])
    else:
        v0 = np.ones(size) / math.sqrt(size)
        lam = eigsh(M, k=k, which="LA", v0=v0, return_eigenvectors=False, tol=1e-13)
    out = np.zeros(top)
    out[:k] = np.sort(lam)[::-1]
    return out


def _nystrom_values(cfg: MCConfig, replication: int) -> np.ndarray:
    rng = replication_rng(cfg.seed, replication)
    y = _draw(cfg.basis, cfg.N, rng)
    # repeated points (certain for the Poisson weight) are merged: with counts
    # c, diag(sqrt(c)) K diag(sqrt(c)) / N has the same nonzero spectrum
    pts, counts = np.unique(y, axis=0, return_counts=True)
    if pts.ndim == 1:
        K = cfg.kernel(pts[:, None], pts[None, :])
    else:
        K = cfg.kernel(pts[:, None, :], pts[None, :, :])
    r = np.sqrt(counts / cfg.N)
    M = np.broadcast_to(K, (len(pts), len(pts))) * r[:, None] * r[None, :]
    M = 0.5 * (M + M.T)
    lam = _top_eigenvalues(M, cfg.top) * cfg.basis.mass
    return np.where(lam < 0, 0.0, lam)


def nystrom_mc(cfg: MCConfig, replication: int = 0) -> Spectrum:
    """One Monte Carlo Nystrom replication.

    Eigenvalues are rescaled by the weight mass so that they estimate the
    spectrum under the unnormalized weight, as the Rayleigh-Ritz values do.
    """
    lam = _nystrom_values(cfg, replication)
    return Spectrum(
        lam,
        None,
        cfg.kernel,
        cfg.basis,
        cfg.N,
        None,
        0,
        "nystrom-mc",
        {"N": cfg.N, "seed": cfg.seed, "replication": replication, "rng": "philox"},
    )


def mc_replicate(cfg: MCConfig, threads: int | None = None) -> MCSummary:
    """Run all replications and report per-rank mean and sample sd.

    Replication r uses the stream derived from (seed, r); results are
    gathered in replication order, so the output does not depend on the
    number of threads.
    """
    reps = range(cfg.replications)
    workers = min(thread_count(threads), cfg.replications)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda r: _nystrom_values(cfg, r), reps))
    else:
        rows = [_nystrom_values(cfg, r) for r in reps]
    samples = np.array(rows)
    mean = samples.mean(axis=0)
    sd = samples.std(axis=0, ddof=1) if cfg.replications > 1 else np.zeros(cfg.top)
    prov = {
        "method": "nystrom-mc",
        "kernel": cfg.kernel.id.value,
        "basis": cfg.basis.kind.value,
        "N": cfg.N,
        "replications": cfg.replications,
        "seed": cfg.seed,
        "rng": "philox",
    }
    if cfg.kernel.tau is not None:
        prov["tau"] = cfg.kernel.tau
    if cfg.basis.gamma is not None:
        prov["gamma"] = cfg.basis.gamma
    if cfg.basis.rho is not None:
        prov["rho"] = cfg.basis.rho
    return MCSummary(mean, sd, samples, prov)


def grid_matrix(cfg: GridConfig, symmetrized: bool = True) -> np.ndarray:
    """The scaled grid matrix c K(x_i, x_j) sqrt(w_i w_j), c = ``cfg.scale``.

    With ``symmetrized=False`` the equivalent non-symmetric discretization
    c K(x_i, x_j) w_j is returned instead.
    """
    x = cfg.nodes
    w = cfg.weight(x)
    M = np.empty((len(x), len(x)))
    block = 512
    for i0 in range(0, len(x), block):
        M[i0:i0 + block] = cfg.kernel(x[i0:i0 + block, None], x[None, :])
    if symmetrized:
        r = np.sqrt(w)
        M *= r[:, None]
        M *= r[None, :]
        # average with the transpose block by block, without a full-size copy
        for i0 in range(0, len(x), block):
            for j0 in range(i0, len(x), block):
                upper = M[i0:i0 + block, j0:j0 + block]
                avg = 0.5 * (upper + M[j0:j0 + block, i0:i0 + block].T)
                M[i0:i0 + block, j0:j0 + block] = avg
                M[j0:j0 + block, i0:i0 + block] = avg.T
    else:
        M *= w[None, :]
    M *= cfg.scale
    return M


def grid_spectrum(cfg: GridConfig) -> Spectrum:
    """Leading eigenvalues of the symmetrized grid discretization."""
    M = grid_matrix(cfg)
    lam = _top_eigenvalues(M, cfg.top)
    clip = int(np.sum(lam < 0))
    lam = np.where(lam < 0, 0.0, lam)
    return Spectrum(
        lam,
        None,
        cfg.kernel,
        None,
        len(cfg.nodes),
        None,
        clip,
        "grid",
        {"A": cfg.A, "m": cfg.m, "gamma": cfg.gamma, "scaling": cfg.scaling},
    )
