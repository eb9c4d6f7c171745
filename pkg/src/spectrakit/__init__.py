"""Rayleigh-Ritz eigenvalue approximation for covariance operators of Gaussian processes."""

from spectrakit.polybasis import BasisFamily, BasisKind, basis_matrix, eval_basis, multi_indices
from spectrakit.quadrature import QuadratureRule, gauss_rule, integrate_2d, product_rule
from spectrakit.kernels import KernelSpec, bessel_ratio, bessel_ratio_dorder, kernel_eval, separable_form
from spectrakit.rayleigh_ritz import (
    GramMatrix,
    Spectrum,
    convergence_sweep,
    eigenfunction_eval,
    gram_matrix,
    rr_spectrum,
    sym_eig,
)
from spectrakit.altmethods import GridConfig, MCConfig, grid_spectrum, mc_replicate, nystrom_mc
from spectrakit.distribution import (
    CumulantSet,
    TailModel,
    cumulants_direct,
    cumulants_from_eigs,
    imhof_tail,
    quantile,
    simulate_w,
)
from spectrakit.bahadur import SlopeInputs, approx_slope, local_efficiency, local_slope

__version__ = "0.1.0"
