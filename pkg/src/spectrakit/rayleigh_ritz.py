"""Rayleigh-Ritz approximation of covariance operator spectra.

The operator ``f -> int K(., t) f(t) w(t) dt`` is projected onto the span
of the first basis functions; the eigenvalues of the projected (Gram)
matrix are the Ritz values, which approach the operator eigenvalues from
below as the basis grows.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from spectrakit.kernels import KernelId, KernelSpec, separable_form
from spectrakit.polybasis import BasisFamily, BasisKind, basis_matrix, basis_size, multi_indices
from spectrakit.quadrature import (
    charlier_truncation,
    default_order,
    gauss_rule,
    laguerre_shifted,
    legendre_on_interval,
)

__all__ = [
    "GramMatrix",
    "Spectrum",
    "SweepTable",
    "gram_matrix",
    "sym_eig",
    "rr_spectrum",
    "convergence_sweep",
    "eigenfunction_eval",
]

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Projected operator M_jk = <K psi_j, psi_k> with its provenance."""

    entries: np.ndarray
    kernel: KernelSpec
    basis: BasisFamily
    n: int
    quad_order: int

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def provenance(self) -> dict:
        return _provenance(self.kernel, self.basis, self.n, self.quad_order)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Descending Ritz values with their coefficient vectors (as columns)."""

    eigenvalues: np.ndarray
    vectors: np.ndarray | None
    kernel: KernelSpec | None
    basis: BasisFamily | None
    n: int
    quad_order: int | None = None
    clip_count: int = 0
    method: str = "rayleigh-ritz"
    extra: dict = field(default_factory=dict)

    @property
    def provenance(self) -> dict:
        out = {"method": self.method}
        if self.kernel is not None:
            out.update(_provenance(self.kernel, self.basis, self.n, self.quad_order))
        out["clip_count"] = self.clip_count
        out.update(self.extra)
        return out

    def top(self, m: int) -> np.ndarray:
        """The m largest eigenvalues, zero-padded if fewer are available."""
        out = np.zeros(m)
        k = min(m, len(self.eigenvalues))
        out[:k] = self.eigenvalues[:k]
        return out


def _provenance(kernel, basis, n, quad_order):
    out = {"kernel": kernel.id.value}
    if kernel.tau is not None:
        out["tau"] = kernel.tau
        out["mu"] = kernel.mu
        out["dq"] = kernel.dq
    if kernel.id is KernelId.BHEP:
        out["d"] = kernel.d
    if basis is not None:
        out["basis"] = basis.kind.value
        if basis.gamma is not None:
            out["gamma"] = basis.gamma
        if basis.rho is not None:
            out["rho"] = basis.rho
        if basis.kind is BasisKind.TENSOR_HERMITE:
            out["dim"] = basis.dim
    out["n"] = n
    if quad_order is not None:
        out["quad_order"] = quad_order
    return out


def _check_compatible(kernel: KernelSpec, basis: BasisFamily):
    if basis.kind not in kernel.compatible_bases():
        raise ValueError(
            f"support mismatch: kernel {kernel.id.value} lives on {kernel.support}, "
            f"basis {basis.kind.value} on {basis.support}"
        )
    kd = kernel.d
    if basis.kind is BasisKind.TENSOR_HERMITE and basis.dim != kd:
        raise ValueError(f"dimension mismatch: kernel d={kd}, basis dim={basis.dim}")
    if basis.kind is BasisKind.HERMITE_GAUSS and kd > 1:
        raise ValueError(f"kernel with d={kd} needs the tensor_hermite basis")


def gram_matrix(kernel: KernelSpec, basis: BasisFamily, n: int, quad_order: int | None = None,
                v: int | None = None) -> GramMatrix:
    """Assemble the Gram matrix of ``kernel`` in the first ``n`` basis functions.

    For the tensor Hermite basis ``n`` is the total-degree bound.  ``v`` is
    the truncation point of the Poisson sum (Charlier basis only); its
    default is chosen from the Poisson tail and the basis size.
    """
    _check_compatible(kernel, basis)
    if n < (0 if basis.kind is BasisKind.TENSOR_HERMITE else 1):
        raise ValueError(f"invalid basis size n={n}")
    if basis.kind is BasisKind.CHARLIER_POISSON:
        if v is None:
            v = charlier_truncation(basis.rho, n)
        M = _gram_discrete(kernel, basis, n, v)
        order = v + 1
    else:
        size = basis_size(basis, n) if basis.univariate else n + 1
        order = quad_order if quad_order is not None else default_order(size, kernel.kinked)
        if order < size:
            raise ValueError(f"quadrature order {order} below basis size {size}")
        if basis.kind is BasisKind.TENSOR_HERMITE:
            M = _gram_separable(kernel, basis, n, order)
        elif kernel.kinked:
            M = _gram_split(kernel, basis, n, order)
        else:
            M = _gram_smooth(kernel, basis, n, order)
    M = 0.5 * (M + M.T)
    return GramMatrix(M, kernel, basis, n, order)


def _weighted_basis(basis, n, nodes, weights):
    """basis_matrix(basis, n, nodes) * weights[:, None], skipping nodes whose weight underflowed.

    Far out on [0, inf) or R the polynomial factor can overflow where the
    weight is already 0, and inf * 0 would poison the sum with NaN.
    """
    nodes = np.asarray(nodes)
    weights = np.asarray(weights)
    out = np.zeros(weights.shape + (n,))
    live = weights != 0
    out[live] = basis_matrix(basis, n, nodes[live]) * weights[live][:, None]
    return out


def _gram_discrete(kernel, basis, n, v):
    rule = gauss_rule(BasisKind.CHARLIER_POISSON, rho=basis.rho, v=v)
    P = _weighted_basis(basis, n, rule.nodes, rule.weights)
    K = kernel(rule.nodes[:, None], rule.nodes[None, :])
    return P.T @ K @ P


def _gram_smooth(kernel, basis, n, order):
    rule = gauss_rule(basis.kind, order, gamma=basis.gamma)
    P = _weighted_basis(basis, n, rule.nodes, rule.weights)
    K = kernel(rule.nodes[:, None], rule.nodes[None, :])
    return P.T @ K @ P


def _gram_split(kernel, basis, n, order):
    """Gram matrix of a kernel with a kink on s = t.

    For every outer node s the inner integral over t is split at t = s so
    that each piece sees a smooth integrand; the resulting function of s
    is smooth and integrated with the plain Gauss rule.
    """
    outer = gauss_rule(basis.kind, order, gamma=basis.gamma)
    s = outer.nodes
    if basis.kind is BasisKind.LEGENDRE01:
        t1, w1 = legendre_on_interval(order, 0.0, s)
        t2, w2 = legendre_on_interval(order, s, 1.0)
    elif basis.kind is BasisKind.LAGUERRE_EXP:
        t1, w1 = legendre_on_interval(order, 0.0, s)
        w1 = w1 * np.exp(-basis.gamma * t1)
        t2, w2 = laguerre_shifted(order, s, basis.gamma)
    else:  # pragma: no cover
        raise ValueError(f"no split rule for {basis.kind.value}")
    t = np.concatenate([t1, t2], axis=1)
    wt = np.concatenate([w1, w2], axis=1)
    kphi = _weighted_basis(basis, n, t.ravel(), (kernel(s[:, None], t) * wt).ravel())
    inner = kphi.reshape(t.shape + (n,)).sum(axis=1)  # (K phi_k)(s_p)
    P = _weighted_basis(basis, n, s, outer.weights)
    return P.T @ inner


def _factor_matrix(factor, family1d, n1, rule):
    """Matrix int int g(s,t) phi_a(s) phi_b(t) w(s) w(t) for a single coordinate factor."""
    P = _weighted_basis(family1d, n1, rule.nodes, rule.weights)
    if factor.is_product:
        left = P.T @ factor.left(rule.nodes)
        right = P.T @ factor.right(rule.nodes)
        return np.outer(left, right)
    G = factor.bivariate(rule.nodes[:, None], rule.nodes[None, :])
    return P.T @ G @ P


def _gram_separable(kernel, basis, n, order):
    """Gram matrix over the multi-index basis of total degree <= n.

    Each separable term contributes the elementwise product over
    coordinates of its factor matrices, gathered at the multi-indices.
    Terms whose factors are all rank-1 are accumulated as U C U^T.
    """
    form = separable_form(kernel)
    d = basis.dim
    fam1 = BasisFamily(BasisKind.HERMITE_GAUSS, gamma=basis.gamma)
    rule = gauss_rule(BasisKind.HERMITE_GAUSS, order, gamma=basis.gamma)
    idx = np.array(multi_indices(d, n))
    N = len(idx)
    M = np.zeros((N, N))
    low_rank_u = []
    low_rank_c = []
    cache = {}
    for term in form.terms:
        if all(f.is_product and f.left is f.right for f in term.factors):
            u = np.ones(N)
            for i, f in enumerate(term.factors):
                if f.left not in cache:
                    Pw = _weighted_basis(fam1, n + 1, rule.nodes, rule.weights)
                    cache[f.left] = Pw.T @ f.left(rule.nodes)
                u *= cache[f.left][idx[:, i]]
            low_rank_u.append(u)
            low_rank_c.append(term.coeff)
            continue
        prod = np.full((N, N), term.coeff)
        for i, f in enumerate(term.factors):
            A = cache.get(("F", id(f.bivariate), f.left, f.right))
            if A is None:
                A = cache[("F", id(f.bivariate), f.left, f.right)] = _factor_matrix(f, fam1, n + 1, rule)
            prod *= A[np.ix_(idx[:, i], idx[:, i])]
        M += prod
    if low_rank_u:
        U = np.stack(low_rank_u, axis=1)
        M += (U * np.array(low_rank_c)) @ U.T
    return M


def sym_eig(matrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix, eigenvalues in descending order.

    Raises ValueError if the input is not symmetric to a relative 1e-10.
    """
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("sym_eig needs a square matrix")
    scale = max(np.max(np.abs(M), initial=0.0), np.finfo(float).tiny)
    if np.max(np.abs(M - M.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    return w[::-1].copy(), V[:, ::-1].copy()


def _spectrum_from_matrix(M, kernel, basis, n, order, vectors=True, method="rayleigh-ritz", extra=None):
    if vectors:
        lam, V = sym_eig(M)
        V = _fix_signs(V)
    else:
        lam = np.sort(np.linalg.eigvalsh(0.5 * (M + M.T)))[::-1]
        V = None
    clip = int(np.sum(lam < 0))
    lam = np.where(lam < 0, 0.0, lam)
    return Spectrum(lam, V, kernel, basis, n, order, clip, method, dict(extra or {}))


def _fix_signs(V):
    """Make the first clearly nonzero coefficient of each column positive."""
    V = V.copy()
    for j in range(V.shape[1]):
        col = V[:, j]
        big = np.abs(col) > 1e-8 * np.max(np.abs(col))
        first = np.argmax(big)
        if col[first] < 0:
            V[:, j] = -col
    return V


def rr_spectrum(kernel: KernelSpec, basis: BasisFamily, n: int, quad_order: int | None = None,
                v: int | None = None, vectors: bool = True) -> Spectrum:
    """Ritz values and coefficient vectors for the first n basis functions.

    Negative Ritz values (roundoff on a positive semidefinite operator) are
    clipped to zero; their number is kept in ``clip_count``.
    """
    G = gram_matrix(kernel, basis, n, quad_order=quad_order, v=v)
    return _spectrum_from_matrix(G.entries, kernel, basis, n, G.quad_order, vectors=vectors)


@dataclass(frozen=True, eq=False)
class SweepTable:
    """Leading Ritz values for a sequence of basis sizes."""

    n_list: tuple[int, ...]
    values: np.ndarray  # (len(n_list), top_m), zero-padded
    monotone: bool
    violations: tuple = ()
    provenance: dict = field(default_factory=dict)


def convergence_sweep(kernel: KernelSpec, basis: BasisFamily, n_list, top_m: int | None = None,
                      quad_order: int | None = None, v: int | None = None, slack: float = 1e-10) -> SweepTable:
    """Ritz values for each n in an ascending list.

    The Gram matrix is assembled once for the largest n; smaller n use its
    leading principal blocks, so the subspaces are exactly nested and the
    Ritz values are nondecreasing in n.
    """
    n_list = tuple(int(n) for n in n_list)
    if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly ascending and nonempty")
    nmax = n_list[-1]
    if top_m is None:
        top_m = min(basis_size(basis, n_list[0]), 10)
    G = gram_matrix(kernel, basis, nmax, quad_order=quad_order, v=v)
    rows = []
    for n in n_list:
        k = basis_size(basis, n)
        lam = np.linalg.eigvalsh(G.entries[:k, :k])[::-1]
        lam = np.where(lam < 0, 0.0, lam)
        row = np.zeros(top_m)
        row[: min(top_m, k)] = lam[:top_m]
        rows.append(row)
    values = np.array(rows)
    violations = []
    for r in range(1, len(n_list)):
        bad = np.nonzero(values[r] < values[r - 1] - slack)[0]
        violations.extend((n_list[r], int(i) + 1) for i in bad)
    prov = G.provenance
    prov["n"] = list(n_list)
    return SweepTable(n_list, values, not violations, tuple(violations), prov)


def eigenfunction_eval(spectrum: Spectrum, i: int, x):
    """Evaluate the i-th (1-based) approximate eigenfunction sum_j alpha_ji psi_j(x)."""
    if spectrum.vectors is None or spectrum.basis is None:
        raise ValueError("spectrum carries no coefficient vectors")
    if not 1 <= i <= spectrum.vectors.shape[1]:
        raise IndexError(f"eigenfunction index {i} out of range 1..{spectrum.vectors.shape[1]}")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0 or (spectrum.basis.kind is BasisKind.TENSOR_HERMITE and x.ndim == 1)
    P = basis_matrix(spectrum.basis, spectrum.n, x)
    vals = P @ spectrum.vectors[:, i - 1]
    return float(vals[0]) if scalar else vals


def trace_bound(kernel: KernelSpec, basis: BasisFamily, order: int = 256) -> float:
    """Quadrature value of int K(t,t) w(t) dt, the first cumulant of the limit law."""
    if basis.kind is BasisKind.CHARLIER_POISSON:
        rule = gauss_rule(basis.kind, rho=basis.rho, v=charlier_truncation(basis.rho))
        return float(rule.weights @ kernel(rule.nodes, rule.nodes))
    if basis.kind is BasisKind.TENSOR_HERMITE and basis.dim > 1:
        from spectrakit.quadrature import product_rule

        rule = product_rule(gauss_rule(BasisKind.HERMITE_GAUSS, min(order, 64), gamma=basis.gamma), basis.dim)
        return float(rule.weights @ kernel(rule.nodes, rule.nodes))
    rule = gauss_rule(basis.kind, order, gamma=basis.gamma)
    return float(rule.weights @ kernel(rule.nodes, rule.nodes))
