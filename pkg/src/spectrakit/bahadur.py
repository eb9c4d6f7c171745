"""Approximate Bahadur slopes and local efficiencies of weighted L2 statistics.

For a statistic T_n whose null limit is ||Z||^2 = sum lambda_j N_j^2 the
approximate slope is

    c*(theta) = b(theta)^2 / lambda_1,

where b(theta) is the limit in probability of the normalized statistic under
the alternative and lambda_1 the largest eigenvalue of the covariance
operator.  Locally, c*(theta) = b''(0) theta^2 / (2 lambda_1) + o(theta^2),
and the local efficiency is c*(theta) / (2 K(theta)) with K the
Kullback-Leibler distance to the null family.

Two normalizations of b appear in the literature: the limit of T_n / sqrt(n)
(for which c* = a_T b^2 with a_T = 1/lambda_1 as written above) and the
limit of T_n / n.  The functions here do not guess; the caller supplies b
in whichever normalization its limit theory uses, and the formulas are
applied as written.

The module also ships the usual close alternatives as densities.  Deriving
b(theta) for them is test-specific and left to the caller.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.stats import norm

__all__ = [
    "SlopeInputs",
    "approx_slope",
    "local_slope",
    "local_efficiency",
    "tabulated_b",
    "ALTERNATIVES",
    "alternative_density",
]

B0_TOL = 1e-10
RICHARDSON_TOL = 1e-4
EFFICIENCY_TOL = 1e-6


@dataclass(frozen=True)
class SlopeInputs:
    """Ingredients of the slope computation.

    Parameters
    ----------
    lambda1 : float
        Largest eigenvalue of the null covariance operator.
    b : callable
        theta -> limit in probability of the normalized statistic.
    kl : callable, optional
        theta -> Kullback-Leibler distance to the null family.  Needed only
        for :func:`local_efficiency`.
    h : float
        Step of the second difference for b''(0).
    """

    lambda1: float
    b: Callable[[float], float]
    kl: Callable[[float], float] | None = None
    h: float = 1e-3

    def __post_init__(self):
        if not self.lambda1 > 0:
            raise ValueError(f"lambda1 must be positive, got {self.lambda1!r}")
        if not self.h > 0:
            raise ValueError("h must be positive")
        b0 = float(self.b(0.0))
        if abs(b0) > B0_TOL:
            warnings.warn(f"b(0) = {b0:.3e} is not zero; the slope formulas assume b(0) = 0",
                          RuntimeWarning, stacklevel=2)


def approx_slope(inputs: SlopeInputs, theta: float) -> float:
    """c*(theta) = b(theta)^2 / lambda_1."""
    return float(inputs.b(theta)) ** 2 / inputs.lambda1


def _second_difference(b, h):
    return (float(b(h)) - 2.0 * float(b(0.0)) + float(b(-h))) / (h * h)


def local_slope(inputs: SlopeInputs, theta: float) -> float:
    """b''(0) theta^2 / (2 lambda_1).

    b''(0) is the Richardson combination of central second differences at
    steps h and h/2.

    Raises
    ------
    ArithmeticError
        If the two differences disagree by more than 1e-4 relative, which
        signals roundoff or a b that is not smooth at 0.
    """
    h = inputs.h
    d1 = _second_difference(inputs.b, h)
    d2 = _second_difference(inputs.b, h / 2.0)
    scale = max(abs(d1), abs(d2))
    if abs(d1 - d2) > RICHARDSON_TOL * scale and abs(d1 - d2) > 1e-12:
        raise ArithmeticError(
            f"unstable second difference: {d1:.6g} at h={h:g} vs {d2:.6g} at h/2; "
            "choose another step or check that b is twice differentiable at 0"
        )
    b2 = (4.0 * d2 - d1) / 3.0
    return b2 * theta * theta / (2.0 * inputs.lambda1)


def local_efficiency(inputs: SlopeInputs, theta: float) -> float:
    """local_slope(theta) / (2 K(theta)).

    Values above 1 are impossible for consistent inputs; they are returned
    with a warning.
    """
    if inputs.kl is None:
        raise ValueError("local_efficiency needs the Kullback-Leibler function kl")
    k = float(inputs.kl(theta))
    if not k > 0:
        raise ValueError(f"Kullback-Leibler distance must be positive, got {k!r} at theta={theta!r}")
    eff = local_slope(inputs, theta) / (2.0 * k)
    if eff > 1.0 + EFFICIENCY_TOL:
        warnings.warn(f"efficiency {eff:.6g} exceeds 1; the inputs are inconsistent", RuntimeWarning,
                      stacklevel=2)
    return eff


def tabulated_b(theta, values) -> Callable[[float], float]:
    """Cubic-spline interpolant of tabulated (theta, b(theta)) pairs.

    The table must bracket the points where b is evaluated; for
    :func:`local_slope` that means [-h, h].
    """
    theta = np.asarray(theta, dtype=float)
    values = np.asarray(values, dtype=float)
    if theta.ndim != 1 or theta.shape != values.shape or len(theta) < 4:
        raise ValueError("need at least four (theta, value) pairs")
    order = np.argsort(theta)
    theta, values = theta[order], values[order]
    if np.any(np.diff(theta) <= 0):
        raise ValueError("theta values must be distinct")
    spline = CubicSpline(theta, values, extrapolate=False)
    lo, hi = theta[0], theta[-1]

    def b(t):
        if not lo <= t <= hi:
            raise ValueError(f"theta={t!r} outside the tabulated range [{lo}, {hi}]")
        return float(spline(t))

    return b


# --------------------------------------------------------------------------
# close alternatives; theta = 0 gives the null density


def _weibull(x, theta):
    x = np.asarray(x, dtype=float)
    return np.exp(-(x ** (1.0 + theta))) * (1.0 + theta) * x**theta


def _gamma(x, theta):
    x = np.asarray(x, dtype=float)
    return x**theta * np.exp(-x) / math.gamma(theta + 1.0)


def _makeham(x, theta):
    # normalized: the unscaled form exp(-x - theta e^x)(1 + theta e^x) has mass exp(-theta)
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        val = np.exp(-x - theta * np.expm1(x)) * (1.0 + theta * np.exp(x))
    return np.where(np.isfinite(val), val, 0.0)


def _lfr(x, theta):
    x = np.asarray(x, dtype=float)
    return np.exp(-x - theta * x * x / 2.0) * (1.0 + theta * x)


def _emnw(x, theta, beta=3.0):
    if beta <= 1:
        raise ValueError("EMNW needs beta > 1")
    if not 0 <= theta <= 1.0 / (beta - 1.0):
        raise ValueError(f"EMNW needs 0 <= theta <= 1/(beta-1) = {1.0 / (beta - 1.0):g}")
    x = np.asarray(x, dtype=float)
    return (1.0 + theta) * np.exp(-x) - theta * beta * np.exp(-beta * x)


def _lehmann(x, theta, null=norm):
    return (1.0 + theta) * null.cdf(x) ** theta * null.pdf(x)


def _ley_paindaveine_1(x, theta, null=norm):
    F = null.cdf(x)
    return null.pdf(x) * np.exp(-theta * (1.0 - F)) * (1.0 + theta * F)


def _ley_paindaveine_2(x, theta, null=norm):
    if theta > 1.0 / math.pi:
        raise ValueError("the second Ley-Paindaveine density needs theta <= 1/pi")
    return null.pdf(x) * (1.0 - theta * math.pi * np.cos(math.pi * null.cdf(x)))


def _contamination(x, theta, mu=0.0, sigma=1.0, null=norm):
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return (1.0 - theta) * null.pdf(x) + theta * null.pdf((np.asarray(x) - mu) / sigma) / sigma


# name -> (density, support of x)
ALTERNATIVES = {
    "weibull": (_weibull, "[0,inf)"),
    "gamma": (_gamma, "[0,inf)"),
    "makeham": (_makeham, "[0,inf)"),
    "lfr": (_lfr, "[0,inf)"),
    "emnw": (_emnw, "[0,inf)"),
    "lehmann": (_lehmann, "R"),
    "ley_paindaveine_1": (_ley_paindaveine_1, "R"),
    "ley_paindaveine_2": (_ley_paindaveine_2, "R"),
    "contamination": (_contamination, "R"),
}


def alternative_density(name: str, x, theta: float, **params):
    """Density of a close alternative at x.

    Exponentiality alternatives (Weibull, gamma, Makeham, LFR, EMNW with
    ``beta``) reduce to Exp(1) at theta = 0.  Normality alternatives
    (Lehmann, first and second Ley-Paindaveine, contamination with ``mu``
    and ``sigma``) perturb the null density ``null`` (a frozen
    scipy.stats distribution, standard normal by default).
    """
    try:
        f, support = ALTERNATIVES[name]
    except KeyError:
        raise ValueError(f"unknown alternative {name!r}; choose from {sorted(ALTERNATIVES)}") from None
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    if support == "[0,inf)" and np.any(np.asarray(x) < 0):
        raise ValueError(f"{name} is a density on [0, inf)")
    return f(x, theta, **params)
