"""Orthonormal polynomial bases evaluated by three-term recurrence.

Five families are supported, each tied to a support and a weight:

=================  ===========  =======================
kind               support      weight
=================  ===========  =======================
``legendre01``     [0, 1]       1
``laguerre``       [0, inf)     exp(-gamma t)
``hermite``        R            exp(-gamma t^2)
``charlier``       N_0          exp(-rho) rho^t / t!
``tensor_hermite`` R^d          exp(-gamma |t|^2)
=================  ===========  =======================

All univariate evaluation runs the recurrence of the *orthonormal*
polynomials directly, so no factorials or binomials of large arguments
ever appear.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "BasisKind",
    "BasisFamily",
    "eval_basis",
    "basis_matrix",
    "multi_indices",
    "DEFAULT_MAX_DEGREE",
]

DEFAULT_MAX_DEGREE = 200


class BasisKind(str, enum.Enum):
    LEGENDRE01 = "legendre01"
    LAGUERRE_EXP = "laguerre"
    HERMITE_GAUSS = "hermite"
    CHARLIER_POISSON = "charlier"
    TENSOR_HERMITE = "tensor_hermite"


_SUPPORT = {
    BasisKind.LEGENDRE01: "[0,1]",
    BasisKind.LAGUERRE_EXP: "[0,inf)",
    BasisKind.HERMITE_GAUSS: "R",
    BasisKind.CHARLIER_POISSON: "N0",
    BasisKind.TENSOR_HERMITE: "R^d",
}


@dataclass(frozen=True)
class BasisFamily:
    """An orthonormal polynomial family together with its weight.

    ``gamma`` is the rate of the Laguerre/Hermite weights, ``rho`` the
    Poisson mean of the Charlier weight, ``dim`` the dimension of the
    tensor Hermite family.
    """

    kind: BasisKind
    gamma: float | None = None
    rho: float | None = None
    dim: int = 1
    max_degree: int = DEFAULT_MAX_DEGREE

    def __post_init__(self):
        object.__setattr__(self, "kind", BasisKind(self.kind))
        kind = self.kind
        needs_gamma = kind in (BasisKind.LAGUERRE_EXP, BasisKind.HERMITE_GAUSS, BasisKind.TENSOR_HERMITE)
        if needs_gamma:
            if self.gamma is None or not self.gamma > 0:
                raise ValueError(f"{kind.value} basis needs gamma > 0, got {self.gamma!r}")
        elif self.gamma is not None:
            raise ValueError(f"{kind.value} basis takes no gamma")
        if kind is BasisKind.CHARLIER_POISSON:
            if self.rho is None or not self.rho > 0:
                raise ValueError(f"charlier basis needs rho > 0, got {self.rho!r}")
        elif self.rho is not None:
            raise ValueError(f"{kind.value} basis takes no rho")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.dim > 1 and kind is not BasisKind.TENSOR_HERMITE:
            raise ValueError("dim > 1 is only valid for the tensor_hermite basis")
        if self.max_degree < 0:
            raise ValueError("max_degree must be nonnegative")

    @property
    def support(self) -> str:
        return _SUPPORT[self.kind]

    @property
    def univariate(self) -> bool:
        return self.kind is not BasisKind.TENSOR_HERMITE

    @property
    def mass(self) -> float:
        """Total mass of the weight, the integral of w over the support."""
        k = self.kind
        if k is BasisKind.LEGENDRE01 or k is BasisKind.CHARLIER_POISSON:
            return 1.0
        if k is BasisKind.LAGUERRE_EXP:
            return 1.0 / self.gamma
        if k is BasisKind.HERMITE_GAUSS:
            return math.sqrt(math.pi / self.gamma)
        return (math.pi / self.gamma) ** (self.dim / 2)

    def weight(self, x) -> np.ndarray:
        """Evaluate the weight function (pmf for the Poisson case)."""
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k is BasisKind.LEGENDRE01:
            return np.ones_like(x)
        if k is BasisKind.LAGUERRE_EXP:
            return np.exp(-self.gamma * x)
        if k is BasisKind.HERMITE_GAUSS:
            return np.exp(-self.gamma * x**2)
        if k is BasisKind.CHARLIER_POISSON:
            from scipy.special import gammaln

            return np.exp(x * math.log(self.rho) - self.rho - gammaln(x + 1.0))
        x = x.reshape(-1, self.dim)
        return np.exp(-self.gamma * np.sum(x**2, axis=1))

    def check_support(self, x) -> np.ndarray:
        """Return ``x`` as an array, raising ValueError if any point lies outside the support."""
        x = np.asarray(x, dtype=float)
        k = self.kind
        if not np.all(np.isfinite(x)):
            raise ValueError("points must be finite")
        if k is BasisKind.LEGENDRE01:
            bad = (x < 0.0) | (x > 1.0)
        elif k is BasisKind.LAGUERRE_EXP:
            bad = x < 0.0
        elif k is BasisKind.CHARLIER_POISSON:
            bad = (x < 0.0) | (x != np.round(x))
        elif k is BasisKind.TENSOR_HERMITE:
            if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
                x = x[..., None]  # univariate points carry no coordinate axis
            if x.ndim == 0 or x.shape[-1] != self.dim:
                raise ValueError(f"points must have trailing dimension {self.dim}")
            bad = np.zeros(1, dtype=bool)
        else:
            bad = np.zeros(1, dtype=bool)
        if np.any(bad):
            raise ValueError(f"point outside the support {self.support} of the {k.value} basis")
        return x


def multi_indices(dim: int, degree: int) -> list[tuple[int, ...]]:
    """All multi-indices of length ``dim`` with total degree <= ``degree``.

    Ordered by total degree, then lexicographically.
    """
    return list(_multi_indices(dim, degree))


@lru_cache(maxsize=64)
def _multi_indices(dim, degree):
    out = []
    for total in range(degree + 1):
        level = [c for c in itertools.product(range(total + 1), repeat=dim) if sum(c) == total]
        out.extend(sorted(level))
    return tuple(out)


def _univariate_table(family: BasisFamily, kmax: int, x: np.ndarray) -> np.ndarray:
    """Values of phi_0..phi_kmax at the points x, shape x.shape + (kmax+1,)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (kmax + 1,))
    kind = family.kind
    if kind is BasisKind.LEGENDRE01:
        y = 2.0 * x - 1.0
        out[..., 0] = 1.0
        if kmax >= 1:
            out[..., 1] = math.sqrt(3.0) * y
        for k in range(1, kmax):
            b_k = k / math.sqrt(4.0 * k * k - 1.0)
            b_next = (k + 1) / math.sqrt(4.0 * (k + 1) ** 2 - 1.0)
            out[..., k + 1] = (y * out[..., k] - b_k * out[..., k - 1]) / b_next
    elif kind is BasisKind.LAGUERRE_EXP:
        u = family.gamma * x
        out[..., 0] = 1.0
        if kmax >= 1:
            out[..., 1] = 1.0 - u
        for k in range(1, kmax):
            out[..., k + 1] = ((2 * k + 1 - u) * out[..., k] - k * out[..., k - 1]) / (k + 1)
        out *= math.sqrt(family.gamma)
    elif kind in (BasisKind.HERMITE_GAUSS, BasisKind.TENSOR_HERMITE):
        u = math.sqrt(family.gamma) * x
        out[..., 0] = math.pi**-0.25
        if kmax >= 1:
            out[..., 1] = math.sqrt(2.0) * u * out[..., 0]
        for k in range(1, kmax):
            out[..., k + 1] = math.sqrt(2.0 / (k + 1)) * u * out[..., k] - math.sqrt(k / (k + 1)) * out[..., k - 1]
        out *= family.gamma**0.25
    elif kind is BasisKind.CHARLIER_POISSON:
        # the forward recurrence loses the minimal solution at x < k, so the
        # polynomials are evaluated exactly in rational arithmetic
        xi = x.astype(np.int64)
        table = _charlier_exact(float(family.rho), kmax, int(xi.max(initial=0)))
        out[...] = table[xi]
    else:  # pragma: no cover
        raise ValueError(kind)
    return out


@lru_cache(maxsize=32)
def _charlier_exact(rho: float, kmax: int, xmax: int) -> np.ndarray:
    """phi_k(x) for x = 0..xmax, k = 0..kmax, shape (xmax+1, kmax+1).

    C_{k+1}(x) = ((k + rho - x) C_k(x) - k C_{k-1}(x)) / rho with
    C_0 = 1, C_1 = 1 - x/rho, and phi_k = (-1)^k (rho^k/k!)^(1/2) C_k.
    """
    a = Fraction(rho)
    out = np.empty((xmax + 1, kmax + 1))
    norm = np.array([(-1) ** k * math.exp(0.5 * (k * math.log(rho) - math.lgamma(k + 1.0)))
                     for k in range(kmax + 1)])
    for x in range(xmax + 1):
        prev, cur = Fraction(0), Fraction(1)
        vals = [cur]
        for k in range(kmax):
            prev, cur = cur, ((k + a - x) * cur - k * prev) / a
            vals.append(cur)
        out[x] = [_fraction_float(v) for v in vals]
    out *= norm
    out.setflags(write=False)
    return out


def _fraction_float(v: Fraction) -> float:
    try:
        return float(v)
    except OverflowError:
        return math.copysign(math.inf, v)


def basis_size(family: BasisFamily, n: int) -> int:
    """Number of basis functions for size parameter ``n``.

    For univariate families this is ``n`` itself (phi_0..phi_{n-1}); for the
    tensor family ``n`` is a total-degree bound.
    """
    if family.univariate:
        return n
    return len(_multi_indices(family.dim, n))


def basis_matrix(family: BasisFamily, n: int, x) -> np.ndarray:
    """Evaluate the first basis functions at many points.

    Parameters
    ----------
    family : BasisFamily
    n : int
        Univariate families: number of functions (degrees 0..n-1).
        Tensor family: total-degree bound, all multi-indices with
        ``sum(k) <= n`` in the order of :func:`multi_indices`.
    x : array_like
        Points, shape (npts,) or (npts, dim) for the tensor family.

    Returns
    -------
    ndarray, shape (npts, basis_size)
    """
    x = family.check_support(x)
    if family.univariate:
        if n < 1:
            raise ValueError("n must be >= 1")
        if n - 1 > family.max_degree:
            raise ValueError(f"degree {n - 1} exceeds the configured bound {family.max_degree}")
        return _univariate_table(family, n - 1, np.atleast_1d(x))
    if n < 0:
        raise ValueError("degree bound must be >= 0")
    if n > family.max_degree:
        raise ValueError(f"degree {n} exceeds the configured bound {family.max_degree}")
    x = x.reshape(-1, family.dim)
    table = _univariate_table(family, n, x)  # (npts, dim, n+1)
    idx = np.array(_multi_indices(family.dim, n))
    out = np.ones((x.shape[0], len(idx)))
    for i in range(family.dim):
        out *= table[:, i, idx[:, i]]
    return out


def eval_basis(family: BasisFamily, k, x):
    """Evaluate a single basis function phi_k at ``x``.

    ``k`` is an integer degree for univariate families and a multi-index
    (sequence of ``dim`` nonnegative integers) for the tensor family.
    Returns a float for scalar input, an array otherwise.
    """
    x = family.check_support(x)
    if family.univariate:
        if isinstance(k, (tuple, list)) or int(k) != k or k < 0:
            raise ValueError(f"degree must be a nonnegative integer, got {k!r}")
        k = int(k)
        if k > family.max_degree:
            raise ValueError(f"degree {k} exceeds the configured bound {family.max_degree}")
        val = _univariate_table(family, k, x)[..., k]
        return float(val) if val.ndim == 0 else val
    k = tuple(int(c) for c in k)
    if len(k) != family.dim or min(k) < 0:
        raise ValueError(f"multi-index must have {family.dim} nonnegative components")
    if sum(k) > family.max_degree:
        raise ValueError(f"total degree {sum(k)} exceeds the configured bound {family.max_degree}")
    scalar = x.ndim == 1
    pts = x.reshape(-1, family.dim)
    table = _univariate_table(family, max(k), pts)
    val = np.ones(pts.shape[0])
    for i, ki in enumerate(k):
        val *= table[:, i, ki]
    return float(val[0]) if scalar else val
