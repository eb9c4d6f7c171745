"""Gaussian quadrature rules matched to the basis weights.

Nodes come from the eigenvalues of the symmetric tridiagonal Jacobi
matrix of the weight (Golub-Welsch), polished by one Newton step on the
orthonormal recurrence.  Weights are computed from the Christoffel
function, ``w_i = mass / sum_k p_k(x_i)^2``, which keeps tiny weights in
the tails of the Laguerre and Hermite rules relatively accurate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.stats import poisson

from spectrakit.polybasis import BasisFamily, BasisKind

__all__ = [
    "QuadratureRule",
    "gauss_rule",
    "integrate_2d",
    "product_rule",
    "default_order",
    "charlier_truncation",
    "legendre_on_interval",
    "laguerre_shifted",
]

POISSON_TAIL_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and positive weights realizing the integral against a weight.

    ``nodes`` has shape (npts,) for one-dimensional rules and (npts, d)
    for product rules.  ``order`` is the node count per dimension.
    """

    nodes: np.ndarray
    weights: np.ndarray
    weight_class: BasisKind
    order: int
    dim: int = 1
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self):
        return len(self.weights)

    def integrate(self, f) -> float:
        """Sum of ``weights * f(nodes)``."""
        return float(np.dot(self.weights, f(self.nodes)))


def _recurrence(kind: BasisKind, q: int):
    """Jacobi matrix coefficients (diagonal a_0..a_q, off-diagonal b_1..b_q) of the
    normalized weight in its reference variable u."""
    k = np.arange(q + 1, dtype=float)
    if kind is BasisKind.LEGENDRE01:
        a = np.full(q + 1, 0.5)
        kk = k[1:]
        b = 0.5 * kk / np.sqrt(4.0 * kk * kk - 1.0)
    elif kind is BasisKind.LAGUERRE_EXP:
        a = 2.0 * k + 1.0
        b = k[1:].copy()
    elif kind in (BasisKind.HERMITE_GAUSS, BasisKind.TENSOR_HERMITE):
        a = np.zeros(q + 1)
        b = np.sqrt(k[1:] / 2.0)
    else:  # pragma: no cover
        raise ValueError(kind)
    return a, b


def _christoffel_and_newton(a, b, q, u):
    """Return (log of sum_{k<q} p_k(u)^2, Newton correction p_q/p_q') at nodes u.

    Values are rescaled on the fly so that high-degree Laguerre
    polynomials at large nodes never overflow.
    """
    p_prev = np.zeros_like(u)
    p = np.ones_like(u)
    dp_prev = np.zeros_like(u)
    dp = np.zeros_like(u)
    s = np.zeros_like(u)
    log_scale = np.zeros_like(u)
    for k in range(q):
        s += p * p
        b_next = b[k]
        b_k = b[k - 1] if k > 0 else 0.0
        p_new = ((u - a[k]) * p - b_k * p_prev) / b_next
        dp_new = ((u - a[k]) * dp + p - b_k * dp_prev) / b_next
        p_prev, p, dp_prev, dp = p, p_new, dp, dp_new
        big = np.abs(p) > 1e100
        if np.any(big):
            f = np.where(big, 1e-100, 1.0)
            p_prev *= f
            p *= f
            dp_prev *= f
            dp *= f
            s *= f * f
            log_scale += np.where(big, 2 * 100 * math.log(10.0), 0.0)
    return np.log(s) + log_scale, p / dp


@lru_cache(maxsize=256)
def _reference_rule(kind: BasisKind, q: int):
    """Gauss nodes/normalized weights in the reference variable (mass 1)."""
    a, b = _recurrence(kind, q)
    if q == 1:
        u = np.array([a[0]])
    else:
        u = eigh_tridiagonal(a[:q], b[: q - 1], eigvals_only=True)
    u = np.sort(u)
    _, corr = _christoffel_and_newton(a, b, q, u)
    u = u - corr
    if kind in (BasisKind.HERMITE_GAUSS, BasisKind.TENSOR_HERMITE):
        u = 0.5 * (u - u[::-1])
    log_s, _ = _christoffel_and_newton(a, b, q, u)
    w = np.exp(-log_s)
    if kind in (BasisKind.HERMITE_GAUSS, BasisKind.TENSOR_HERMITE):
        w = 0.5 * (w + w[::-1])
    return u, w


def charlier_truncation(rho: float, n: int = 0, tol: float = POISSON_TAIL_TOL) -> int:
    """Smallest truncation point v >= 10 for the Poisson-weighted sum.

    The upper tail mass beyond v must be below ``tol``.  When a basis size
    ``n`` is given, v is further increased until the neglected part of the
    norm of every basis function phi_0..phi_{n-1} is below ``tol`` and
    there are at least n support points.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    v = 10
    while poisson.sf(v, rho) >= tol:
        v += 1
    if n <= 0:
        return max(v, 10)
    from spectrakit.polybasis import _univariate_table

    fam = BasisFamily(BasisKind.CHARLIER_POISSON, rho=rho)
    v = max(v, n - 1)
    horizon = v + 400
    t = np.arange(horizon + 1, dtype=float)
    w = fam.weight(t)
    contrib = np.max(w[:, None] * _univariate_table(fam, n - 1, t) ** 2, axis=1)
    tail = np.cumsum(contrib[::-1])[::-1]  # tail[j] = sum_{t >= j}
    while v + 1 <= horizon and tail[v + 1] >= tol:
        v += 1
    return v


def gauss_rule(weight_class, order: int | None = None, *, gamma=None, rho=None, v=None) -> QuadratureRule:
    """Gauss rule for one of the basis weights.

    Parameters
    ----------
    weight_class : BasisKind or str
    order : int
        Number of nodes (ignored for the Poisson weight, which uses v).
    gamma : float
        Rate of the Laguerre/Hermite weight.
    rho, v : float, int
        Poisson mean and truncation point of the discrete weight.  The
        default v is :func:`charlier_truncation`.
    """
    kind = BasisKind(weight_class)
    if kind is BasisKind.CHARLIER_POISSON:
        if rho is None:
            raise ValueError("charlier rule needs rho")
        if not rho > 0:
            raise ValueError("rho must be positive")
        if v is None:
            v = charlier_truncation(rho)
        if v < 0 or int(v) != v:
            raise ValueError("truncation point v must be a nonnegative integer")
        t = np.arange(int(v) + 1, dtype=float)
        w = BasisFamily(kind, rho=rho).weight(t)
        return QuadratureRule(t, w, kind, len(t), params={"rho": rho, "v": int(v)})
    if order is None or order < 1:
        raise ValueError(f"quadrature order must be >= 1, got {order!r}")
    if kind is BasisKind.TENSOR_HERMITE:
        kind = BasisKind.HERMITE_GAUSS
    u, w = _reference_rule(kind, int(order))
    if kind is BasisKind.LEGENDRE01:
        return QuadratureRule(u.copy(), w.copy(), kind, order)
    if gamma is None:
        raise ValueError(f"{kind.value} rule needs gamma")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if kind is BasisKind.LAGUERRE_EXP:
        return QuadratureRule(u / gamma, w / gamma, kind, order, params={"gamma": gamma})
    return QuadratureRule(
        u / math.sqrt(gamma), w * math.sqrt(math.pi / gamma), kind, order, params={"gamma": gamma}
    )


def rule_for(family: BasisFamily, order: int | None = None, v: int | None = None) -> QuadratureRule:
    """The rule matching a basis family's weight (product rule for the tensor family)."""
    if family.kind is BasisKind.CHARLIER_POISSON:
        return gauss_rule(family.kind, rho=family.rho, v=v)
    if family.kind is BasisKind.TENSOR_HERMITE:
        return product_rule(gauss_rule(BasisKind.HERMITE_GAUSS, order, gamma=family.gamma), family.dim)
    return gauss_rule(family.kind, order, gamma=family.gamma)


def integrate_2d(f, rule: QuadratureRule) -> float:
    """Tensor-product approximation of the double integral of f(s, t) w(s) w(t)."""
    s = rule.nodes[:, None]
    t = rule.nodes[None, :]
    vals = np.broadcast_to(f(s, t), (len(rule), len(rule)))
    return float(rule.weights @ vals @ rule.weights)


def product_rule(rule_1d: QuadratureRule, d: int) -> QuadratureRule:
    """Tensor-product rule over R^d built from a one-dimensional rule."""
    if d < 1 or d > 3:
        raise ValueError(f"product rules are limited to 1 <= d <= 3, got {d}")
    if rule_1d.dim != 1:
        raise ValueError("product_rule expects a one-dimensional rule")
    if d == 1:
        return rule_1d
    grids = np.meshgrid(*([rule_1d.nodes] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    wgrids = np.meshgrid(*([rule_1d.weights] * d), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    kind = BasisKind.TENSOR_HERMITE if rule_1d.weight_class is BasisKind.HERMITE_GAUSS else rule_1d.weight_class
    return QuadratureRule(nodes, weights, kind, rule_1d.order, dim=d, params=dict(rule_1d.params))


def default_order(n: int, kinked: bool = False) -> int:
    """Per-dimension quadrature order used for Gram assembly of n basis functions."""
    q = max(64, 2 * n + 16)
    return 2 * q if kinked else q


def legendre_on_interval(order: int, lo, hi):
    """Gauss-Legendre nodes/weights (unit weight) mapped to [lo, hi].

    ``lo`` and ``hi`` may be arrays; the result then has shape
    ``lo.shape + (order,)``.
    """
    u, w = _reference_rule(BasisKind.LEGENDRE01, order)
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    return lo + (hi - lo) * u, (hi - lo) * w


def laguerre_shifted(order: int, start, gamma: float):
    """Nodes/weights for the integral over [start, inf) against exp(-gamma t)."""
    u, w = _reference_rule(BasisKind.LAGUERRE_EXP, order)
    start = np.asarray(start, dtype=float)[..., None]
    return start + u / gamma, np.exp(-gamma * start) * w / gamma
