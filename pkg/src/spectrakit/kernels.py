"""Catalog of covariance kernels of goodness-of-fit limit processes.

Every kernel is evaluated with numpy broadcasting: ``kernel_eval(spec, s, t)``
accepts scalars or arrays (for the multivariate BHEP kernel the last axis
holds the coordinates).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from spectrakit.polybasis import BasisKind

__all__ = [
    "KernelId",
    "KernelSpec",
    "kernel_eval",
    "bessel_i_series",
    "bessel_ratio",
    "bessel_ratio_dorder",
    "bessel_ratio_dtau",
    "Factor",
    "SeparableTerm",
    "SeparableForm",
    "separable_form",
]


class KernelId(str, enum.Enum):
    CVM = "cvm"
    HN2000 = "hn2000"
    EKS2021 = "eks2021"
    BH_RHO = "bh_rho"
    K0_EXP = "k0_exp"
    K2001 = "k2001"
    EBNER_KZ = "ebner_kz"
    HJM_C = "hjm_c"
    DEH_K = "deh_k"
    VONMISES = "vonmises"
    BHEP = "bhep"
    # constant kernels, handy as test fixtures for the alternative methods
    ONE = "one"
    ZERO = "zero"


_SUPPORT = {
    KernelId.CVM: "[0,1]",
    KernelId.HN2000: "[0,1]",
    KernelId.EKS2021: "[0,1]",
    KernelId.BH_RHO: "[0,inf)",
    KernelId.K0_EXP: "[0,inf)",
    KernelId.K2001: "[0,inf)",
    KernelId.EBNER_KZ: "R",
    KernelId.HJM_C: "R",
    KernelId.DEH_K: "R",
    KernelId.VONMISES: "N0",
    KernelId.BHEP: "R^d",
}

# basis families whose support matches the kernel's
_BASES = {
    "[0,1]": (BasisKind.LEGENDRE01,),
    "[0,inf)": (BasisKind.LAGUERRE_EXP,),
    "R": (BasisKind.HERMITE_GAUSS, BasisKind.TENSOR_HERMITE),
    "N0": (BasisKind.CHARLIER_POISSON,),
    "R^d": (BasisKind.HERMITE_GAUSS, BasisKind.TENSOR_HERMITE),
}

# kernels with a derivative jump on the diagonal s = t
_KINKED = {KernelId.CVM, KernelId.HN2000, KernelId.EKS2021, KernelId.BH_RHO, KernelId.K0_EXP, KernelId.K2001}


@dataclass(frozen=True)
class KernelSpec:
    """A catalog kernel with its parameters.

    ``tau`` and ``mu`` belong to the von Mises kernel (only ``mu = 0`` is
    supported, the kernel is complex otherwise); ``d`` is the BHEP dimension.

    ``dq`` selects the derivative q' entering the von Mises kernel:
    ``"tau"`` (default) differentiates q(s; tau) in the concentration, which
    is what makes the kernel a covariance (K(0, 0) = 0); ``"order"``
    differentiates in s, the literal reading of the published display.
    """

    id: KernelId
    tau: float | None = None
    mu: float = 0.0
    d: int = 1
    dq: str = "tau"

    def __post_init__(self):
        object.__setattr__(self, "id", KernelId(self.id))
        if self.id is KernelId.VONMISES:
            if self.tau is None or not self.tau > 0:
                raise ValueError(f"vonmises kernel needs tau > 0, got {self.tau!r}")
            if self.mu != 0:
                raise ValueError("only mu = 0 (the real von Mises kernel) is supported")
            if self.dq not in ("tau", "order"):
                raise ValueError(f"dq must be 'tau' or 'order', got {self.dq!r}")
        elif self.tau is not None:
            raise ValueError(f"kernel {self.id.value} takes no tau")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.d > 1 and self.id not in (KernelId.BHEP, KernelId.ONE, KernelId.ZERO):
            raise ValueError(f"kernel {self.id.value} is univariate")

    @property
    def support(self) -> str:
        if self.id in (KernelId.ONE, KernelId.ZERO):
            return "any"
        if self.id is KernelId.BHEP and self.d == 1:
            return "R"
        return _SUPPORT[self.id]

    @property
    def kinked(self) -> bool:
        return self.id in _KINKED

    @property
    def symmetric(self) -> bool:
        return True

    def compatible_bases(self) -> tuple[BasisKind, ...]:
        if self.support == "any":
            return tuple(BasisKind)
        return _BASES[self.support]

    def __call__(self, s, t):
        return kernel_eval(self, s, t)


def _check_support(spec: KernelSpec, x):
    sup = spec.support
    if sup == "[0,1]":
        bad = np.any((x < 0) | (x > 1))
    elif sup == "[0,inf)":
        bad = np.any(x < 0)
    elif sup == "N0":
        bad = np.any((x < 0) | (x != np.round(x)))
    else:
        bad = not np.all(np.isfinite(x))
    if bad:
        raise ValueError(f"point outside the support {sup} of kernel {spec.id.value}")


def kernel_eval(spec: KernelSpec, s, t):
    """Evaluate K(s, t); broadcasts over array arguments."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    _check_support(spec, s)
    _check_support(spec, t)
    out = _EVAL[spec.id](spec, s, t)
    return float(out) if np.ndim(out) == 0 else out


def _cvm(spec, s, t):
    return np.minimum(s, t) - s * t


def _hn2000(spec, s, t):
    m = np.minimum(s, t)
    return s * t * m / 2.0 - m**3 / 6.0 - s**2 * t**2 / 4.0


def _eks2021(spec, s, t):
    M = np.maximum(s, t)
    return (1.0 - (2.0 * M - 1.0) ** 3) / 6.0 - s * t * (1.0 - s) * (1.0 - t)


def _bh_rho(spec, s, t):
    a = -np.expm1(-s)
    b = -np.expm1(-t)
    return np.minimum(a, b) - a * b


def _k0_exp(spec, s, t):
    return np.exp(-np.maximum(s, t)) - np.exp(-(s + t))


def _k2001(spec, s, t):
    return (np.abs(s - t) + 2.0) * np.exp(-np.maximum(s, t)) - (s + t + s * t + 2.0) * np.exp(-(s + t))


def _ebner_kz(spec, s, t):
    return (s * t + 1.0) * np.exp(-((s - t) ** 2) / 2.0) - (2.0 * s * t + 1.0) * np.exp(-(s**2 + t**2) / 2.0)


def _hjm_c(spec, s, t):
    st = s * t
    return np.exp(st) + 0.5 * (np.exp(st) + np.exp(-st)) + 2.0 * np.cos(st) - st - 4.0


def _deh_k(spec, s, t):
    s2 = s * s
    t2 = t * t
    d2 = (s - t) ** 2
    first = np.exp(-d2 / 2.0) * ((d2 - 3.0) ** 2 - 6.0)
    bracket = (
        -s2 * t2 * (s2 - 5.0) * (t2 - 5.0) / 2.0
        + 6.0 * (s2 + t2)
        - s2 * s2
        - t2 * t2
        - s2 * t2
        - s * t * (s2 - 3.0) * (t2 - 3.0)
        - 3.0
    )
    return first + np.exp(-(s2 + t2) / 2.0) * bracket


def _bhep(spec, s, t):
    d = spec.d
    if d == 1:
        # univariate points carry no coordinate axis
        s = s[..., None]
        t = t[..., None]
    if s.shape[-1:] != (d,) or t.shape[-1:] != (d,):
        raise ValueError(f"bhep kernel with d={d} needs points with trailing dimension {d}")
    diff = np.sum((s - t) ** 2, axis=-1)
    dot = np.sum(s * t, axis=-1)
    norms = np.sum(s * s, axis=-1) + np.sum(t * t, axis=-1)
    return np.exp(-diff / 2.0) - (1.0 + dot + dot**2 / 2.0) * np.exp(-norms / 2.0)


def _vonmises(spec, s, t):
    tau = spec.tau
    smax = int(max(np.max(s, initial=0), np.max(t, initial=0)))
    q_abs, dq = _vonmises_tables(tau, smax, spec.dq)
    q1 = q_abs[1]
    si = s.astype(int)
    ti = t.astype(int)
    lag = np.abs(si - ti)
    return (
        q_abs[lag]
        - q_abs[si] * q_abs[ti] * (1.0 + s * t / (tau * q1))
        - dq[si] * dq[ti] / (1.0 - q1**2 - q1 / tau)
    )


@lru_cache(maxsize=64)
def _vonmises_tables_cached(tau, size, mode):
    deriv = bessel_ratio_dtau if mode == "tau" else bessel_ratio_dorder
    # dtau needs order k + 1, so exact values stop one below the guard
    exact = min(size, _MAX_ORDER_INT - 1)
    q = np.zeros(size + 1)
    dq = np.zeros(size + 1)
    q[: exact + 1] = [bessel_ratio(k, tau) for k in range(exact + 1)]
    dq[: exact + 1] = [deriv(k, tau) for k in range(exact + 1)]
    if size > exact and (abs(q[exact]) > _NEGLIGIBLE or abs(dq[exact]) > _NEGLIGIBLE):
        raise ValueError(f"order {size} outside the series guard |s| <= {_MAX_ORDER} for tau={tau}")
    q.setflags(write=False)
    dq.setflags(write=False)
    return q, dq


def _vonmises_tables(tau, smax, mode):
    # grow in blocks so that repeated calls share one cache entry; orders beyond
    # the series guard are set to zero when q has already underflowed there
    size = max(smax, 1 << (max(smax, 16) - 1).bit_length())
    return _vonmises_tables_cached(float(tau), size, mode)


def _one(spec, s, t):
    if spec.d > 1:
        return np.ones(np.broadcast_shapes(s.shape[:-1], t.shape[:-1]))
    return np.ones(np.broadcast_shapes(s.shape, t.shape))


def _zero(spec, s, t):
    return 0.0 * _one(spec, s, t)


_EVAL = {
    KernelId.CVM: _cvm,
    KernelId.HN2000: _hn2000,
    KernelId.EKS2021: _eks2021,
    KernelId.BH_RHO: _bh_rho,
    KernelId.K0_EXP: _k0_exp,
    KernelId.K2001: _k2001,
    KernelId.EBNER_KZ: _ebner_kz,
    KernelId.HJM_C: _hjm_c,
    KernelId.DEH_K: _deh_k,
    KernelId.VONMISES: _vonmises,
    KernelId.BHEP: _bhep,
    KernelId.ONE: _one,
    KernelId.ZERO: _zero,
}


# --------------------------------------------------------------------------
# modified Bessel functions of the first kind, real order

_SERIES_TOL = 1e-17
_MAX_ORDER = 60.0
_MAX_ORDER_INT = 60
_NEGLIGIBLE = 1e-30


def _log_recip_gamma(z):
    """(sign, log|1/Gamma(z)|); sign 0 at the poles."""
    if z <= 0 and z == math.floor(z):
        return 0.0, 0.0
    sign = 1.0
    if z < 0 and math.floor(z) % 2 == 1:  # Gamma is negative on (-1,0), (-3,-2), ...
        sign = -1.0
    return sign, -math.lgamma(z)


def bessel_i_series(nu: float, x: float) -> float:
    """I_nu(x) from the ascending series, for real order nu and x > 0."""
    if not x > 0:
        raise ValueError("argument must be positive")
    half = x / 2.0
    log_half = math.log(half)
    total = 0.0
    m = 0
    while True:
        sign, log_rg = _log_recip_gamma(m + nu + 1.0)
        term = 0.0
        if sign != 0.0:
            log_term = (2 * m + nu) * log_half - math.lgamma(m + 1.0) + log_rg
            if log_term > 709.0:
                raise ArithmeticError(f"I_{nu}({x}) overflows double precision")
            term = sign * math.exp(log_term)
        total += term
        # term ratios half^2 / ((m+1)(m+nu+1)) stay below 1 from here on
        if (m + 1) * (m + nu + 1) > half * half and m + nu + 1 > 0 and abs(term) <= _SERIES_TOL * abs(total):
            break
        m += 1
        if m > 10000:  # pragma: no cover
            raise ArithmeticError("Bessel series did not converge")
    return total


def _check_ratio_args(s, tau):
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau!r}")
    if abs(s) > _MAX_ORDER:
        raise ValueError(f"order {s} outside the series guard |s| <= {_MAX_ORDER}")


def bessel_ratio(s: float, tau: float) -> float:
    """q(s; tau) = I_|s|(tau) / I_0(tau)."""
    _check_ratio_args(s, tau)
    if s == 0:
        return 1.0
    return bessel_i_series(abs(s), tau) / bessel_i_series(0.0, tau)


def bessel_ratio_dorder(s: float, tau: float, h: float = 1e-5) -> float:
    """Derivative of q(s; tau) with respect to the order s.

    Central difference of the plain real-order series, no reflection in s:
    at s = 0 this uses I_{-h}, so the result is the two-sided derivative of
    nu -> I_nu(tau) / I_0(tau), equal to -K_0(tau)/I_0(tau).
    """
    _check_ratio_args(s, tau)
    i0 = bessel_i_series(0.0, tau)
    return (bessel_i_series(s + h, tau) - bessel_i_series(s - h, tau)) / (2.0 * h * i0)


def bessel_ratio_dtau(s: float, tau: float) -> float:
    """Derivative of q(s; tau) with respect to tau.

    Uses I_nu' = (I_{nu-1} + I_{nu+1}) / 2, so that
    dq/dtau = (I_{|s|-1} + I_{|s|+1}) / (2 I_0) - q(s) q(1).
    """
    _check_ratio_args(s, tau)
    s = abs(s)
    i0 = bessel_i_series(0.0, tau)
    lower = bessel_i_series(s - 1.0, tau)
    upper = bessel_i_series(s + 1.0, tau)
    return (lower + upper) / (2.0 * i0) - bessel_ratio(s, tau) * bessel_ratio(1.0, tau)


# --------------------------------------------------------------------------
# separable (sum of rank-1 tensor) description for multivariate assembly


@dataclass(frozen=True)
class Factor:
    """One coordinate factor g(s_i, t_i) of a separable term.

    Either ``bivariate`` is a closed-form function of (s_i, t_i), or the
    factor is the product ``left(s_i) * right(t_i)``.
    """

    bivariate: object = None
    left: object = None
    right: object = None
    kinked: bool = False

    @property
    def is_product(self) -> bool:
        return self.bivariate is None

    def __call__(self, s, t):
        if self.bivariate is not None:
            return self.bivariate(s, t)
        return self.left(s) * self.right(t)


@dataclass(frozen=True)
class SeparableTerm:
    coeff: float
    factors: tuple[Factor, ...]


@dataclass(frozen=True)
class SeparableForm:
    terms: tuple[SeparableTerm, ...]
    d: int

    def __call__(self, s, t):
        s = np.asarray(s, dtype=float).reshape(-1, self.d)
        t = np.asarray(t, dtype=float).reshape(-1, self.d)
        total = 0.0
        for term in self.terms:
            prod = term.coeff
            for i, f in enumerate(term.factors):
                prod = prod * f(s[:, i], t[:, i])
            total = total + prod
        return total


def _gauss_diag(s, t):
    return np.exp(-((s - t) ** 2) / 2.0)


@lru_cache(maxsize=3)
def _moment_factor(a):
    def h(x):
        x = np.asarray(x, dtype=float)
        return x**a * np.exp(-(x**2) / 2.0)

    return h


def separable_form(spec: KernelSpec) -> SeparableForm:
    """Sum-of-products representation used for multivariate Gram assembly.

    Univariate kernels give a single closed-form term.  The BHEP kernel
    splits into exp(-|s-t|^2/2) (one term of bivariate factors) minus
    exp(-(|s|^2+|t|^2)/2)(1 + s.t + (s.t)^2/2), the latter expanded into
    1 + d + d^2 rank-1 terms of univariate products.
    """
    if spec.id is not KernelId.BHEP:
        if spec.d > 1:
            raise ValueError(f"no separable form for kernel {spec.id.value} with d > 1")
        f = Factor(bivariate=lambda s, t, _spec=spec: _EVAL[_spec.id](_spec, np.asarray(s), np.asarray(t)),
                   kinked=spec.kinked)
        return SeparableForm((SeparableTerm(1.0, (f,)),), 1)
    d = spec.d
    terms = [SeparableTerm(1.0, tuple(Factor(bivariate=_gauss_diag) for _ in range(d)))]

    def product_term(coeff, powers):
        return SeparableTerm(
            coeff, tuple(Factor(left=_moment_factor(a), right=_moment_factor(a)) for a in powers)
        )

    terms.append(product_term(-1.0, [0] * d))
    for i in range(d):
        p = [0] * d
        p[i] = 1
        terms.append(product_term(-1.0, p))
    for i in range(d):
        for j in range(d):
            p = [0] * d
            p[i] += 1
            p[j] += 1
            terms.append(product_term(-0.5, p))
    return SeparableForm(tuple(terms), d)
