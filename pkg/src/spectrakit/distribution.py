"""The law of W = sum_j lambda_j N_j^2 built from an eigenvalue sequence.

Cumulants come from two routes: power sums of the eigenvalues, and traces
of powers of the quadrature-discretized kernel (the iterated-kernel
formula without ever forming the iterates as functions).  Tail
probabilities use Imhof's inversion integral, quantiles invert it.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from spectrakit.altmethods import replication_rng, thread_count
from spectrakit.kernels import KernelSpec
from spectrakit.polybasis import BasisFamily, BasisKind
from spectrakit.quadrature import (
    QuadratureRule,
    default_order,
    gauss_rule,
    laguerre_shifted,
    legendre_on_interval,
    rule_for,
)

__all__ = [
    "TailModel",
    "CumulantSet",
    "SimulationResult",
    "cumulants_from_eigs",
    "cumulants_direct",
    "imhof_tail",
    "quantile",
    "simulate_w",
]

IMHOF_EPS = 1e-11
SIM_CHUNK = 20000
TINY_X = 1e-18


@dataclass(frozen=True, eq=False)
class TailModel:
    """An eigenvalue sequence viewed as the law of sum lambda_j N_j^2.

    Eigenvalues are stored in descending order.  Zero eigenvalues are kept
    for display but never enter a computation.
    """

    eigenvalues: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float).ravel()
        if lam.size == 0:
            raise ValueError("empty eigenvalue sequence")
        if not np.all(np.isfinite(lam)):
            raise ValueError("eigenvalues must be finite")
        if np.any(lam < 0):
            raise ValueError("eigenvalues must be nonnegative")
        if not np.any(lam > 0):
            raise ValueError("at least one eigenvalue must be positive")
        lam = np.sort(lam)[::-1].copy()
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    @classmethod
    def from_spectrum(cls, spectrum) -> TailModel:
        return cls(spectrum.eigenvalues, dict(spectrum.provenance))

    @property
    def positive(self) -> np.ndarray:
        return self.eigenvalues[self.eigenvalues > 0]

    def with_trace_completion(self, kappa1: float, k: int = 1) -> TailModel:
        """Add the missing trace kappa1 - sum(lambda) as k equal extra eigenvalues.

        A heuristic for truncated spectra: it restores the mean of W but
        not its higher cumulants.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        gap = kappa1 - float(np.sum(self.eigenvalues))
        if gap <= 0:
            return self
        extra = np.full(k, gap / k)
        prov = dict(self.provenance, trace_completion={"kappa1": kappa1, "k": k})
        return TailModel(np.concatenate([self.eigenvalues, extra]), prov)


@dataclass(frozen=True)
class CumulantSet:
    """First cumulants of W and the route that produced them."""

    kappa: tuple[float, ...]
    route: str

    def __getitem__(self, r: int) -> float:
        """1-based access, ``c[1]`` is the mean."""
        return self.kappa[r - 1]


def _cumulant_factor(r: int) -> float:
    return 2.0 ** (r - 1) * math.factorial(r - 1)


def cumulants_from_eigs(model: TailModel, r_max: int = 4) -> CumulantSet:
    """kappa_r = 2^(r-1) (r-1)! sum lambda_j^r for r = 1..r_max."""
    if not isinstance(model, TailModel):
        model = TailModel(model)
    lam = model.positive
    kappa = tuple(_cumulant_factor(r) * float(np.sum(lam**r)) for r in range(1, r_max + 1))
    return CumulantSet(kappa, "eigen_power_sums")


def kernel_matrix_on_rule(kernel: KernelSpec, rule: QuadratureRule) -> np.ndarray:
    """B_pq = K(t_p, t_q) sqrt(w_p w_q), the symmetric Nystrom matrix of the rule."""
    if rule.dim != 1 or kernel.d > 1:
        raise ValueError("cumulants_direct handles univariate kernels only")
    t = rule.nodes
    r = np.sqrt(rule.weights)
    B = np.broadcast_to(kernel(t[:, None], t[None, :]), (len(t), len(t))) * r[:, None] * r[None, :]
    return 0.5 * (B + B.T)


def cumulants_direct(kernel: KernelSpec, rule, r_max: int = 4, order: int | None = None,
                     method: str | None = None) -> CumulantSet:
    """Cumulants from the iterated kernel, without eigenvalues.

    kappa_r = 2^(r-1) (r-1)! int K_r(t, t) w(t) dt with K_1 = K and
    K_r(s, t) = int K_(r-1)(s, u) K(u, t) w(u) du.

    Two discretizations are available:

    ``"nystrom"``
        B_pq = K(t_p, t_q) sqrt(w_p w_q) on the nodes of one Gauss rule and
        kappa_r from trace(B^r).  Spectrally accurate for smooth kernels and
        exact for the truncated Poisson sum.
    ``"split"``
        For kernels with a kink on the diagonal (min, max, |s - t|): every
        inner integral is split at its kink points so that each piece is
        smooth, which restores fast convergence.  Needs a basis family
        on [0, 1] or [0, inf).

    Parameters
    ----------
    kernel : KernelSpec
    rule : QuadratureRule or BasisFamily
        The weight.  A basis family selects its matched Gauss rule.
    r_max : int
        Highest cumulant, at most 4.
    order : int, optional
        Nodes of the Gauss rule (default 128 for ``"nystrom"``, 64 per
        piece for ``"split"``).
    method : {"nystrom", "split"}, optional
        Default ``"split"`` for kinked kernels given with a basis family,
        ``"nystrom"`` otherwise.
    """
    if not 1 <= r_max <= 4:
        raise ValueError("r_max must be between 1 and 4")
    if kernel.d > 1 or (isinstance(rule, BasisFamily) and not rule.univariate and rule.dim > 1):
        raise ValueError("cumulants_direct handles univariate kernels only")
    if method is None:
        method = "split" if isinstance(rule, BasisFamily) and kernel.kinked else "nystrom"
    if method == "split":
        if not isinstance(rule, BasisFamily):
            raise ValueError("the split method needs a basis family, not a fixed rule")
        traces = _split_traces(kernel, rule, r_max, order or 64)
    elif method == "nystrom":
        if isinstance(rule, BasisFamily):
            rule = rule_for(rule, order or 2 * default_order(16))
        traces = _nystrom_traces(kernel_matrix_on_rule(kernel, rule), r_max)
    else:
        raise ValueError(f"unknown method {method!r}")
    kappa = tuple(_cumulant_factor(r) * traces[r - 1] for r in range(1, r_max + 1))
    return CumulantSet(kappa, "kernel_iterates")


def _nystrom_traces(B: np.ndarray, r_max: int) -> list[float]:
    traces = [float(np.trace(B))]
    if r_max >= 2:
        traces.append(float(np.sum(B * B)))
    if r_max >= 3:
        B2 = B @ B
        traces.append(float(np.sum(B2 * B)))
    if r_max >= 4:
        traces.append(float(np.sum(B2 * B2)))
    return traces


def _pieces(family: BasisFamily, breaks: np.ndarray, g: int):
    """Weighted Gauss nodes over the support, split at sorted break points.

    ``breaks`` has shape (..., k); the result has shape (..., (k+1) g).
    """
    lo = np.zeros(breaks.shape[:-1])
    nodes, weights = [], []
    for j in range(breaks.shape[-1]):
        hi = breaks[..., j]
        t, w = legendre_on_interval(g, lo, hi)
        nodes.append(t)
        weights.append(w * family.weight(t))
        lo = hi
    if family.kind is BasisKind.LEGENDRE01:
        t, w = legendre_on_interval(g, lo, np.ones_like(lo))
    else:
        t, w = laguerre_shifted(g, lo, family.gamma)
    nodes.append(t)
    weights.append(w)
    return np.concatenate(nodes, axis=-1), np.concatenate(weights, axis=-1)


def _split_traces(kernel: KernelSpec, family: BasisFamily, r_max: int, g: int) -> list[float]:
    if family.kind not in (BasisKind.LEGENDRE01, BasisKind.LAGUERRE_EXP):
        raise ValueError("the split method needs a basis on [0, 1] or [0, inf)")
    if family.kind not in kernel.compatible_bases():
        raise ValueError(f"support mismatch: kernel {kernel.id.value} lives on {kernel.support}")
    outer = gauss_rule(family.kind, g, gamma=family.gamma)
    s = outer.nodes
    traces = [float(outer.weights @ kernel(s, s))]
    if r_max == 1:
        return traces
    # t runs over the support split at s
    t, wt = _pieces(family, s[:, None], g)  # (Q, 2g)
    k_st = kernel(s[:, None], t)
    traces.append(float(outer.weights @ np.sum(wt * k_st**2, axis=1)))
    if r_max == 2:
        return traces
    # K_2(s, t) = int K(s, u) K(u, t) w(u) du, u split at min(s,t) and max(s,t)
    ss = np.broadcast_to(s[:, None], t.shape)
    brk = np.stack([np.minimum(ss, t), np.maximum(ss, t)], axis=-1)
    u, wu = _pieces(family, brk, g)  # (Q, 2g, 3g)
    k2 = np.sum(kernel(ss[..., None], u) * kernel(u, t[..., None]) * wu, axis=-1)
    traces.append(float(outer.weights @ np.sum(wt * k_st * k2, axis=1)))
    if r_max >= 4:
        traces.append(float(outer.weights @ np.sum(wt * k2**2, axis=1)))
    return traces


def _imhof_parts(lam: np.ndarray):
    def amp(u):
        # 1/(u rho(u)) and the phase from the eigenvalues
        lu = lam * u
        phase = 0.5 * np.sum(np.arctan(lu))
        logrho = 0.5 * np.sum(np.log(np.hypot(1.0, lu)))
        return phase, math.exp(-logrho) / u

    return amp


def _imhof_normalized(lam: np.ndarray, x: float) -> float:
    """Imhof tail for eigenvalues scaled so that max(lam) = 1."""
    # P(W <= x) <= P(N^2 <= x) <= sqrt(2 x / pi), negligible below this
    if x <= TINY_X:
        return 1.0
    amp = _imhof_parts(lam)
    half_trace = 0.5 * float(np.sum(lam))

    def head(u):
        if u < 1e-12:
            return half_trace - 0.5 * x
        phase, a = amp(u)
        return math.sin(phase - 0.5 * x * u) * a

    # the head runs over a fixed number of oscillation periods of exp(-i x u/2),
    # in decades so that small x (long, slowly decaying head) stays accurate
    u0 = 40.0 * math.pi / x
    if u0 <= 4.0:
        edges = [0.0, u0]
    else:
        edges = [0.0, *np.geomspace(4.0, u0, max(2, math.ceil(math.log10(u0 / 4.0)) + 1))]
    h = sum(quad(head, a, b, epsabs=IMHOF_EPS, epsrel=0.0, limit=2000)[0] for a, b in zip(edges, edges[1:]))

    # tail: sin(phase - x u/2) = sin(phase) cos(x u/2) - cos(phase) sin(x u/2)
    def s_part(u):
        phase, a = amp(u)
        return math.sin(phase) * a

    def c_part(u):
        phase, a = amp(u)
        return math.cos(phase) * a

    omega = 0.5 * x
    t1, _ = quad(s_part, u0, np.inf, weight="cos", wvar=omega, epsabs=IMHOF_EPS, limlst=200)
    t2, _ = quad(c_part, u0, np.inf, weight="sin", wvar=omega, epsabs=IMHOF_EPS, limlst=200)
    p = 0.5 + (h + t1 - t2) / math.pi
    return min(1.0, max(0.0, p))


def imhof_tail(model: TailModel, x: float) -> float:
    """P(W > x) by Imhof's inversion formula.

    The integrand is split at a point u0 covering a fixed number of
    periods of the factor exp(-i x u / 2); the head is integrated
    adaptively and the tail as two Fourier integrals (QUADPACK QAWF), whose
    cycle-by-cycle extrapolation handles the slow algebraic decay when only
    few eigenvalues are present.  Target absolute error 1e-8.
    """
    if not isinstance(model, TailModel):
        model = TailModel(model)
    x = float(x)
    if x < 0:
        raise ValueError("x must be nonnegative")
    lam = model.positive
    top = lam[0]
    return _imhof_normalized(lam / top, x / top)


def quantile(model: TailModel, p: float) -> float:
    """The x with P(W <= x) = p, found by root bracketing on the Imhof tail.

    The bracket is [0, kappa_1 + 20 sqrt(kappa_2)], widened if needed.
    The root is refined until the tail matches 1 - p to 1e-8.
    """
    if not isinstance(model, TailModel):
        model = TailModel(model)
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    lam = model.positive
    top = lam[0]
    z = lam / top
    target = 1.0 - p

    def g(x):
        return _imhof_normalized(z, x) - target

    k1 = float(np.sum(z))
    k2 = 2.0 * float(np.sum(z * z))
    hi = k1 + 20.0 * math.sqrt(k2)
    while g(hi) > 0:
        hi *= 2.0
    root = brentq(g, 0.0, hi, xtol=1e-13 * max(hi, 1.0), rtol=4 * np.finfo(float).eps, maxiter=200)
    return root * top


@dataclass(frozen=True, eq=False)
class SimulationResult:
    sample: np.ndarray
    quantiles: dict
    seed: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.sample))


def simulate_w(model: TailModel, reps: int, seed: int = 0, probs=(0.9, 0.95, 0.99),
               threads: int | None = None) -> SimulationResult:
    """Draw ``reps`` values of sum lambda_j N_j^2.

    Draws are produced in fixed chunks; chunk c uses the Philox stream
    derived from (seed, c), so the sample is identical for any thread
    count.
    """
    if not isinstance(model, TailModel):
        model = TailModel(model)
    if reps < 1:
        raise ValueError("reps must be >= 1")
    lam = model.positive
    chunks = [(c, min(SIM_CHUNK, reps - c * SIM_CHUNK)) for c in range(-(-reps // SIM_CHUNK))]

    def run(chunk):
        c, size = chunk
        rng = replication_rng(seed, c)
        z = rng.standard_normal((size, lam.size))
        return (z * z) @ lam

    workers = min(thread_count(threads), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    sample = np.concatenate(parts)
    qs = {float(p): float(np.quantile(sample, p)) for p in probs}
    return SimulationResult(sample, qs, seed)
