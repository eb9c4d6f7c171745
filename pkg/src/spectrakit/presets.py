"""Named computations that regenerate published eigenvalue and cumulant tables.

Published Rayleigh-Ritz tables label their rows by the polynomial degree
bound, so a row labelled ``k`` uses the k + 1 functions phi_0..phi_k (the
tensor family is labelled by its total-degree bound, as here).  Every
table below reports both the row label and the basis size ``n`` in the
library's own convention.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import numpy as np

from spectrakit.altmethods import GridConfig, MCConfig, grid_spectrum, mc_replicate
from spectrakit.distribution import TailModel, cumulants_direct, cumulants_from_eigs
from spectrakit.kernels import KernelSpec
from spectrakit.polybasis import BasisFamily
from spectrakit.rayleigh_ritz import convergence_sweep, rr_spectrum

__all__ = ["Table", "Preset", "PRESETS", "get_preset", "load_golden"]

GRID_M = (100, 500, 1000, 2000, 5000)
MC_N = (50, 100, 250, 1000, 2000, 3000, 4000, 5000)
VM_PARAMS = ((0.5, 1.0), (0.5, 5.0), (1.0, 1.0), (1.0, 5.0))


@dataclass
class Table:
    """Rows of numbers with column names and a provenance block."""

    columns: list[str]
    rows: list[list] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# provenance: " + _json_line(self.provenance) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_value(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [[_json_value(v) for v in row] for row in self.rows]
        doc = {"columns": self.columns, "rows": rows, "provenance": self.provenance}
        return json.dumps(doc, indent=2) + "\n"


def _json_line(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def _json_value(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(format(float(v), ".12g"))
    return v


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    build: Callable[..., Table]
    slow: bool = False


def _lambda_columns(top):
    return [f"lambda_{j}" for j in range(1, top + 1)]


def _sweep(kernel, basis, labels, top, v=None):
    """Rows (label, n, lambda_1..lambda_top) with n = label + 1."""
    sweep = convergence_sweep(kernel, basis, [k + 1 for k in labels], top_m=top, v=v)
    return [[k, k + 1, *sweep.values[i]] for i, k in enumerate(labels)], sweep.provenance


def _five_largest(kernel_id):
    def build(**_):
        kernel = KernelSpec(kernel_id)
        rows, prov = _sweep(kernel, BasisFamily("legendre01"), range(3, 16), 5)
        # row k lists only its k largest Ritz values, the smallest of the k + 1 is shown as 0
        for row in rows:
            for j in range(row[0] + 1, 6):
                row[1 + j] = 0.0
        return Table(["row", "n", *_lambda_columns(5)], rows, {"preset": f"table-{kernel_id}", **prov})

    return build


def _two_largest_by_gamma(kernel_id, basis_kind, gammas, labels):
    def build(**_):
        rows, prov = [], {}
        for g in gammas:
            part, prov = _sweep(KernelSpec(kernel_id), BasisFamily(basis_kind, gamma=g), labels, 2)
            rows.extend([g, *r] for r in part)
        prov = {k: v for k, v in prov.items() if k not in ("gamma", "n")}
        prov.update(gammas=list(gammas), rows=list(labels))
        return Table(["gamma", "row", "n", *_lambda_columns(2)], rows, prov)

    return build


def _ebner_cumulants(**_):
    rows = []
    kernel = KernelSpec("ebner_kz")
    labels = (10, 15, 20, 25, 30)
    for g in (0.5, 1.0, 2.0):
        basis = BasisFamily("hermite", gamma=g)
        exact = cumulants_direct(kernel, basis, r_max=4)
        rows.append([g, "exact", "", exact.route, *exact.kappa])
        for k in labels:
            spec = rr_spectrum(kernel, basis, k + 1, vectors=False)
            c = cumulants_from_eigs(TailModel(spec.eigenvalues), r_max=4)
            rows.append([g, k, k + 1, c.route, *c.kappa])
    prov = {"kernel": "ebner_kz", "basis": "hermite", "gammas": [0.5, 1.0, 2.0], "rows": list(labels)}
    return Table(["gamma", "row", "n", "route", "kappa_1", "kappa_2", "kappa_3", "kappa_4"], rows, prov)


def _bhep_cumulants(d):
    def build(**_):
        kernel = KernelSpec("bhep", d=d)
        labels = (10, 15, 20, 25, 30)
        rows = []
        for g in (0.5, 1.0, 2.0):
            if d == 1:
                basis = BasisFamily("hermite", gamma=g)
                exact = cumulants_direct(kernel, basis, r_max=3)
                rows.append([g, "exact", "", exact.route, *exact.kappa])
                sizes = [k + 1 for k in labels]
            else:
                basis = BasisFamily("tensor_hermite", gamma=g, dim=d)
                sizes = list(labels)  # total-degree bound
            sweep = convergence_sweep(kernel, basis, sizes, top_m=10_000)
            for k, n, lam in zip(labels, sizes, sweep.values):
                c = cumulants_from_eigs(TailModel(lam), r_max=3)
                rows.append([g, k, n, c.route, *c.kappa])
        prov = {"kernel": "bhep", "d": d, "basis": "hermite" if d == 1 else "tensor_hermite",
                "gammas": [0.5, 1.0, 2.0], "rows": list(labels)}
        return Table(["gamma", "row", "n", "route", "kappa_1", "kappa_2", "kappa_3"], rows, prov)

    return build


def _deh_text(**_):
    kernel = KernelSpec("deh_k")
    rows = []
    for g, n in ((0.5, 15), (1.0, 15), (2.0, 15), (3.0, 15), (0.5, 21)):
        lam = rr_spectrum(kernel, BasisFamily("hermite", gamma=g), n, vectors=False).eigenvalues[0]
        rows.append([g, n, lam])
    return Table(["gamma", "n", "lambda_1"], rows, {"kernel": "deh_k", "basis": "hermite"})


def _vm_rr(**_):
    rows = []
    for rho, tau in VM_PARAMS:
        part, _ = _sweep(KernelSpec("vonmises", tau=tau), BasisFamily("charlier", rho=rho), (10, 15, 20), 2, v=10)
        rows.extend([rho, tau, *r] for r in part)
    prov = {"kernel": "vonmises", "basis": "charlier", "v": 10, "mu": 0.0, "dq": "tau"}
    return Table(["rho", "tau", "row", "n", *_lambda_columns(2)], rows, prov)


def _vm_mc(reps=500, seed=42, threads=None, **_):
    rows = []
    for rho, tau in VM_PARAMS:
        for N in MC_N:
            cfg = MCConfig(KernelSpec("vonmises", tau=tau), BasisFamily("charlier", rho=rho), N,
                           replications=reps, seed=seed, top=2)
            s = mc_replicate(cfg, threads=threads)
            rows.append([rho, tau, N, s.mean[0], s.sd[0], s.mean[1], s.sd[1]])
    prov = {"kernel": "vonmises", "method": "nystrom-mc", "replications": reps, "seed": seed, "rng": "philox"}
    return Table(["rho", "tau", "N", "mean_1", "sd_1", "mean_2", "sd_2"], rows, prov)


def _grid(cases, max_m=None, scaling="published", **_):
    ms = [m for m in GRID_M if max_m is None or m <= max_m]
    rows = []
    for kernel_id, g, A in cases:
        kernel = KernelSpec(kernel_id)
        for m in ms:
            lam = grid_spectrum(GridConfig(kernel, A, m, gamma=g, top=1, scaling=scaling)).eigenvalues[0]
            rows.append([kernel_id, g, A, m, lam])
    prov = {"method": "grid", "scaling": scaling, "m": ms}
    return Table(["kernel", "gamma", "A", "m", "lambda_1"], rows, prov)


_GRID_EXP = [(k, g, 10.0) for k in ("bh_rho", "k2001") for g in (0.0, 1.0, 2.0, 3.0)]
_GRID_NORMAL = [
    ("ebner_kz", 0.5, 5.0), ("ebner_kz", 1.0, 4.0), ("ebner_kz", 2.0, 3.0), ("ebner_kz", 3.0, 3.0),
    ("hjm_c", 1.5, 4.0), ("hjm_c", 2.0, 3.0), ("hjm_c", 3.0, 3.0),
    ("deh_k", 0.5, 5.0), ("deh_k", 1.0, 4.0), ("deh_k", 2.0, 3.0), ("deh_k", 3.0, 3.0),
]


PRESETS = {
    p.name: p
    for p in [
        Preset("table-cvm", "Cramer-von Mises kernel, five largest, rows 3..15", _five_largest("cvm")),
        Preset("table-hn2000", "HN2000 kernel, five largest, rows 3..15", _five_largest("hn2000")),
        Preset("table-eks2021", "EKS2021 kernel, five largest, rows 3..15", _five_largest("eks2021")),
        Preset("table-k0", "K0 exponentiality kernel, gamma 1 and 2, rows 10(5)30",
               _two_largest_by_gamma("k0_exp", "laguerre", (1.0, 2.0), (10, 15, 20, 25, 30))),
        Preset("table-k2001", "K2001 exponentiality kernel, gamma 0.5, 1, 1.5, rows 10(5)30",
               _two_largest_by_gamma("k2001", "laguerre", (0.5, 1.0, 1.5), (10, 15, 20, 25, 30))),
        Preset("table-ebner-kz", "EbnerKZ normality kernel, cumulants 1..4, gamma 0.5, 1, 2", _ebner_cumulants),
        Preset("table-hjm", "HJM_C normality kernel, gamma 1.5, 2, 3, rows 5..13",
               _two_largest_by_gamma("hjm_c", "hermite", (1.5, 2.0, 3.0), tuple(range(5, 14)))),
        Preset("deh", "DEH_K largest eigenvalue for gamma 0.5, 1, 2, 3", _deh_text),
        Preset("table-vm-rr", "von Mises kernel, Rayleigh-Ritz with v = 10", _vm_rr),
        Preset("table-vm-mc", "von Mises kernel, Monte Carlo Nystrom, 500 replications", _vm_mc, slow=True),
        Preset("table-bhep-d1", "BHEP cumulants 1..3, d = 1", _bhep_cumulants(1)),
        Preset("table-bhep-d2", "BHEP cumulants 1..3, d = 2", _bhep_cumulants(2)),
        Preset("table-bhep-d3", "BHEP cumulants 1..3, d = 3", _bhep_cumulants(3), slow=True),
        Preset("table-grid-exp", "grid method, exponentiality kernels, A = 10",
               lambda **kw: _grid(_GRID_EXP, **kw), slow=True),
        Preset("table-grid-normal", "grid method, normality kernels",
               lambda **kw: _grid(_GRID_NORMAL, **kw), slow=True),
    ]
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown table {name!r}; available: {', '.join(PRESETS)}") from None


def load_golden(name: str) -> tuple[list[str], list[list[str]]]:
    """Stored output of a preset: (columns, rows as strings)."""
    get_preset(name)
    text = resources.files("spectrakit").joinpath("golden", f"{name}.csv").read_text()
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = list(csv.reader(lines))
    return reader[0], reader[1:]
