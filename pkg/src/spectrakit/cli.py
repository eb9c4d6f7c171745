"""Command-line front end.

Every command writes one table (CSV by default, or JSON) to stdout or to
``--output``, preceded in CSV by a ``# provenance:`` comment line.
Diagnostics go to stderr.  Exit codes: 0 success, 1 numerical failure,
2 usage or validation error.

Options can also come from a JSON file (``--config``) whose keys are the
long option names with dashes replaced by underscores; flags given on the
command line override the file.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from spectrakit.altmethods import GridConfig, MCConfig, grid_spectrum, mc_replicate
from spectrakit.bahadur import SlopeInputs, approx_slope, local_efficiency, local_slope, tabulated_b
from spectrakit.distribution import TailModel, cumulants_direct, cumulants_from_eigs, imhof_tail, quantile
from spectrakit.kernels import KernelSpec
from spectrakit.polybasis import BasisFamily
from spectrakit.presets import PRESETS, Table, get_preset
from spectrakit.rayleigh_ritz import _check_compatible, convergence_sweep, rr_spectrum

__all__ = ["RunConfig", "UsageError", "parse_config", "run", "main"]

COMMANDS = ("rr", "grid", "mc", "cumulants", "quantile", "tail", "bahadur", "reproduce")

# basis used when --basis is omitted
_DEFAULT_BASIS = {
    "[0,1]": "legendre01",
    "[0,inf)": "laguerre",
    "R": "hermite",
    "N0": "charlier",
    "R^d": "tensor_hermite",
}


class UsageError(Exception):
    """Invalid or incomplete configuration (exit code 2)."""


@dataclass
class RunConfig:
    command: str
    kernel: str | None = None
    tau: float | None = None
    dq: str = "tau"
    d: int = 1
    basis: str | None = None
    gamma: float | None = None
    rho: float | None = None
    n: int | None = None
    n_list: list[int] | None = None
    quad_order: int | None = None
    v: int | None = None
    top: int = 10
    emit: str = "eigenvalues"
    A: float | None = None
    m: int | None = None
    scaling: str = "published"
    N: int | None = None
    reps: int = 1
    seed: int | None = None
    threads: int | None = None
    eigs_from: str | None = None
    p: list[float] = field(default_factory=lambda: [0.95])
    x: list[float] | None = None
    lambda1: float | None = None
    b_table: str | None = None
    kl_table: str | None = None
    theta: list[float] | None = None
    h: float = 1e-3
    table: str | None = None
    max_m: int | None = None
    format: str = "csv"
    output: str | None = None


_CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def _floats(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def _ints(text):
    return [int(t) for t in str(text).split(",") if t.strip()]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    s = argparse.SUPPRESS
    common.add_argument("--config", default=s, help="JSON file with option values")
    common.add_argument("--format", choices=("csv", "json"), default=s)
    common.add_argument("--output", "-o", default=s, help="write the table here instead of stdout")

    kern = _Parser(add_help=False)
    kern.add_argument("--kernel", default=s, help="kernel id, e.g. cvm, k0_exp, vonmises, bhep")
    kern.add_argument("--tau", type=float, default=s, help="von Mises concentration")
    kern.add_argument("--dq", choices=("tau", "order"), default=s, help="von Mises derivative q'")
    kern.add_argument("--d", type=int, default=s, help="BHEP dimension")
    kern.add_argument("--basis", default=s, help="basis family (inferred from the kernel if omitted)")
    kern.add_argument("--gamma", type=float, default=s, help="Laguerre/Hermite weight rate")
    kern.add_argument("--rho", type=float, default=s, help="Poisson mean of the Charlier weight")
    kern.add_argument("--n", type=int, default=s, help="basis size (total-degree bound for tensor_hermite)")
    kern.add_argument("--n-list", type=_ints, default=s, help="comma-separated ascending sizes (sweep)")
    kern.add_argument("--quad-order", type=int, default=s)
    kern.add_argument("--v", type=int, default=s, help="Poisson truncation point")
    kern.add_argument("--top", type=int, default=s)

    eigs = _Parser(add_help=False)
    eigs.add_argument("--eigs-from", default=s, help="spectrum file (JSON or CSV output of rr/grid/mc)")

    parser = _Parser(prog="spectrakit", description="Eigenvalues of covariance operators and the law of "
                                                     "sum lambda_j N_j^2.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("rr", parents=[common, kern], help="Rayleigh-Ritz eigenvalues or sweeps")
    p.add_argument("--emit", choices=("eigenvalues", "cumulants"), default=s)

    p = sub.add_parser("grid", parents=[common, kern], help="grid discretization")
    p.add_argument("--A", type=float, default=s, help="truncation point of the support")
    p.add_argument("--m", type=int, default=s, help="grid intervals")
    p.add_argument("--scaling", choices=("published", "riemann"), default=s)

    p = sub.add_parser("mc", parents=[common, kern], help="Monte Carlo Nystrom replications")
    p.add_argument("--N", type=int, default=s, help="sample size")
    p.add_argument("--reps", type=int, default=s, help="replications")
    p.add_argument("--seed", type=int, default=s)
    p.add_argument("--threads", type=int, default=s)

    sub.add_parser("cumulants", parents=[common, kern, eigs], help="cumulants by both routes")

    p = sub.add_parser("quantile", parents=[common, kern, eigs], help="quantiles of sum lambda_j N_j^2")
    p.add_argument("--p", type=_floats, default=s, help="comma-separated probabilities")

    p = sub.add_parser("tail", parents=[common, kern, eigs], help="P(W > x) by Imhof's method")
    p.add_argument("--x", type=_floats, default=s, help="comma-separated thresholds")

    p = sub.add_parser("bahadur", parents=[common, kern, eigs], help="approximate Bahadur slopes")
    p.add_argument("--lambda1", type=float, default=s, help="largest eigenvalue (else computed)")
    p.add_argument("--b-table", default=s, help="CSV of theta,b(theta) pairs")
    p.add_argument("--kl-table", default=s, help="CSV of theta,K(theta) pairs (for efficiencies)")
    p.add_argument("--theta", type=_floats, default=s, help="comma-separated theta values")
    p.add_argument("--h", type=float, default=s, help="second-difference step")

    p = sub.add_parser("reproduce", parents=[common], help="regenerate a published table by name")
    p.add_argument("table", nargs="?", default=s, help="table name, or 'list'")
    p.add_argument("--max-m", type=int, default=s, help="grid tables: skip m above this")
    p.add_argument("--seed", type=int, default=s)
    p.add_argument("--threads", type=int, default=s)
    return parser


def parse_config(argv) -> RunConfig:
    """Parse command-line arguments, merged over an optional JSON config file."""
    ns = vars(_build_parser().parse_args(argv))
    values = {}
    path = ns.pop("config", None)
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(doc) - _CONFIG_KEYS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        if "command" in doc and doc["command"] != ns["command"]:
            raise UsageError(f"config file is for command {doc['command']!r}, not {ns['command']!r}")
        values.update(doc)
    values.update(ns)
    for key in ("n_list", "p", "x", "theta"):
        if isinstance(values.get(key), (int, float)):
            values[key] = [values[key]]
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _require(cfg, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise UsageError(f"{cfg.command}: missing field {name} (--{name.replace('_', '-')})")


def _validate(cfg: RunConfig):
    if cfg.command in ("rr", "grid", "mc") or (
        cfg.command in ("cumulants", "quantile", "tail", "bahadur") and cfg.eigs_from is None
        and not (cfg.command == "bahadur" and cfg.lambda1 is not None)
    ):
        _require(cfg, "kernel")
    if cfg.command == "rr" and cfg.n is None and cfg.n_list is None:
        raise UsageError("rr: missing field n (--n) or n_list (--n-list)")
    if cfg.command == "grid":
        _require(cfg, "A", "m")
    if cfg.command == "mc":
        _require(cfg, "N")
    if cfg.command == "bahadur":
        _require(cfg, "b_table", "theta")
    if cfg.command == "tail":
        _require(cfg, "x")
    if cfg.command == "reproduce":
        _require(cfg, "table")
        if cfg.table != "list" and cfg.table not in PRESETS:
            raise UsageError(f"unknown table {cfg.table!r}; available: {', '.join(PRESETS)}")
    if cfg.top < 1:
        raise UsageError("top must be >= 1")


# --------------------------------------------------------------------------


def _kernel(cfg: RunConfig) -> KernelSpec:
    return KernelSpec(cfg.kernel, tau=cfg.tau, d=cfg.d, dq=cfg.dq)


def _basis(cfg: RunConfig, kernel: KernelSpec) -> BasisFamily:
    kind = cfg.basis or _DEFAULT_BASIS.get(kernel.support)
    if kind is None:
        raise UsageError(f"kernel {kernel.id.value} needs an explicit --basis")
    dim = kernel.d if kind == "tensor_hermite" else 1
    basis = BasisFamily(kind, gamma=cfg.gamma, rho=cfg.rho, dim=dim)
    _check_compatible(kernel, basis)
    return basis


def _spectrum_table(spectrum, top) -> Table:
    lam = spectrum.top(top)
    rows = [[j + 1, float(x)] for j, x in enumerate(lam)]
    return Table(["rank", "eigenvalue"], rows, spectrum.provenance)


def _run_rr(cfg):
    kernel = _kernel(cfg)
    basis = _basis(cfg, kernel)
    if cfg.n_list is not None:
        sweep = convergence_sweep(kernel, basis, cfg.n_list, top_m=cfg.top, quad_order=cfg.quad_order, v=cfg.v)
        if not sweep.monotone:
            print(f"warning: Ritz values decreased at {list(sweep.violations)}", file=sys.stderr)
        if cfg.emit == "cumulants":
            raise UsageError("--emit cumulants needs a single --n")
        cols = ["n", *[f"lambda_{j}" for j in range(1, cfg.top + 1)]]
        rows = [[n, *vals] for n, vals in zip(sweep.n_list, sweep.values)]
        return Table(cols, rows, {"method": "rayleigh-ritz", **sweep.provenance})
    spec = rr_spectrum(kernel, basis, cfg.n, quad_order=cfg.quad_order, v=cfg.v, vectors=False)
    if spec.clip_count:
        print(f"note: {spec.clip_count} negative Ritz values clipped to zero", file=sys.stderr)
    if cfg.emit == "cumulants":
        c = cumulants_from_eigs(TailModel.from_spectrum(spec))
        return Table(["route", "kappa_1", "kappa_2", "kappa_3", "kappa_4"], [[c.route, *c.kappa]],
                     spec.provenance)
    return _spectrum_table(spec, cfg.top)


def _run_grid(cfg):
    gamma = 1.0 if cfg.gamma is None else cfg.gamma
    grid = GridConfig(_kernel(cfg), cfg.A, cfg.m, gamma=gamma, top=cfg.top, scaling=cfg.scaling)
    return _spectrum_table(grid_spectrum(grid), cfg.top)


def _run_mc(cfg):
    kernel = _kernel(cfg)
    mc = MCConfig(kernel, _basis(cfg, kernel), cfg.N, replications=cfg.reps,
                  seed=0 if cfg.seed is None else cfg.seed, top=cfg.top)
    s = mc_replicate(mc, threads=cfg.threads)
    rows = [[j + 1, float(a), float(b)] for j, (a, b) in enumerate(zip(s.mean, s.sd))]
    return Table(["rank", "mean", "sd"], rows, s.provenance)


def load_eigenvalues(path: str) -> tuple[np.ndarray, dict]:
    """Eigenvalues from a JSON or CSV table written by this tool.

    Also accepted: a JSON list of numbers, a JSON object with an
    ``eigenvalues`` list, or a text file with one number per line.
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    prov = {"eigs_from": path}
    stripped = text.lstrip()
    if stripped.startswith("{") or stripped.startswith("["):
        doc = json.loads(text)
        if isinstance(doc, list):
            return np.asarray(doc, dtype=float), prov
        if "eigenvalues" in doc:
            return np.asarray(doc["eigenvalues"], dtype=float), prov
        cols = doc.get("columns", [])
        for name in ("eigenvalue", "mean"):
            if name in cols:
                j = cols.index(name)
                prov["source"] = doc.get("provenance", {})
                return np.array([row[j] for row in doc["rows"]], dtype=float), prov
        raise UsageError(f"{path}: no eigenvalue column found")
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if lines and any(c.isalpha() for c in lines[0].replace("e-", "").replace("e+", "")):
        rows = list(csv.reader(lines))
        header = rows[0]
        for name in ("eigenvalue", "mean"):
            if name in header:
                j = header.index(name)
                return np.array([float(r[j]) for r in rows[1:]]), prov
        raise UsageError(f"{path}: no eigenvalue column found")
    return np.array([float(ln) for ln in lines]), prov


def _model(cfg) -> TailModel:
    if cfg.eigs_from is not None:
        lam, prov = load_eigenvalues(cfg.eigs_from)
        return TailModel(lam, prov)
    kernel = _kernel(cfg)
    if cfg.n is None:
        raise UsageError(f"{cfg.command}: missing field n (--n) or eigs_from (--eigs-from)")
    spec = rr_spectrum(kernel, _basis(cfg, kernel), cfg.n, quad_order=cfg.quad_order, v=cfg.v, vectors=False)
    return TailModel.from_spectrum(spec)


def _run_cumulants(cfg):
    cols = ["route", "kappa_1", "kappa_2", "kappa_3", "kappa_4"]
    rows = []
    prov = {}
    if cfg.eigs_from is not None or cfg.n is not None:
        model = _model(cfg)
        c = cumulants_from_eigs(model)
        rows.append([c.route, *c.kappa])
        prov = dict(model.provenance)
    if cfg.kernel is not None:
        kernel = _kernel(cfg)
        if kernel.d == 1:
            c = cumulants_direct(kernel, _basis(cfg, kernel), order=cfg.quad_order)
            rows.append([c.route, *c.kappa])
            prov.setdefault("kernel", kernel.id.value)
        elif not rows:
            raise UsageError("cumulants: the direct route handles d = 1 only; give --n for the eigenvalue route")
    if not rows:
        raise UsageError("cumulants: give --kernel (direct route) and/or --n or --eigs-from")
    return Table(cols, rows, prov)


def _run_quantile(cfg):
    model = _model(cfg)
    rows = [[p, quantile(model, p)] for p in cfg.p]
    return Table(["p", "quantile"], rows, dict(model.provenance))


def _run_tail(cfg):
    model = _model(cfg)
    rows = [[x, imhof_tail(model, x)] for x in cfg.x]
    return Table(["x", "tail_probability"], rows, dict(model.provenance))


def _read_pairs(path):
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read theta,value pairs from {path}: {exc}") from None
    if data.shape[1] != 2:
        raise UsageError(f"{path}: expected two columns theta,value")
    return data[:, 0], data[:, 1]


def _run_bahadur(cfg):
    if cfg.lambda1 is not None:
        lambda1, prov = cfg.lambda1, {"lambda1": cfg.lambda1}
    else:
        model = _model(cfg)
        lambda1, prov = float(model.eigenvalues[0]), dict(model.provenance)
    b = tabulated_b(*_read_pairs(cfg.b_table))
    kl = tabulated_b(*_read_pairs(cfg.kl_table)) if cfg.kl_table else None
    inputs = SlopeInputs(lambda1, b, kl, h=cfg.h)
    cols = ["theta", "approx_slope", "local_slope"] + (["local_efficiency"] if kl else [])
    rows = []
    for theta in cfg.theta:
        row = [theta, approx_slope(inputs, theta), local_slope(inputs, theta)]
        if kl:
            row.append(local_efficiency(inputs, theta))
        rows.append(row)
    prov.update(b_table=cfg.b_table, h=cfg.h, lambda1=lambda1)
    return Table(cols, rows, prov)


def _run_reproduce(cfg):
    if cfg.table == "list":
        rows = [[name, p.description] for name, p in PRESETS.items()]
        return Table(["table", "description"], rows, {})
    preset = get_preset(cfg.table)
    kwargs = {}
    if cfg.max_m is not None:
        kwargs["max_m"] = cfg.max_m
    if cfg.threads is not None:
        kwargs["threads"] = cfg.threads
    if cfg.seed is not None:
        kwargs["seed"] = cfg.seed
    table = preset.build(**kwargs)
    table.provenance = {"table": preset.name, **table.provenance}
    return table


_RUNNERS = {
    "rr": _run_rr,
    "grid": _run_grid,
    "mc": _run_mc,
    "cumulants": _run_cumulants,
    "quantile": _run_quantile,
    "tail": _run_tail,
    "bahadur": _run_bahadur,
    "reproduce": _run_reproduce,
}


def _emit(table: Table, cfg: RunConfig):
    text = table.to_json() if cfg.format == "json" else table.to_csv()
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(cfg: RunConfig) -> int:
    """Execute a parsed configuration and write its table; returns the exit code."""
    try:
        table = _RUNNERS[cfg.command](cfg)
        _emit(table, cfg)
    except UsageError as exc:
        print(f"spectrakit {cfg.command}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:
        print(f"spectrakit {cfg.command}: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"spectrakit {cfg.command}: numerical failure: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"spectrakit: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:
        print(f"spectrakit: invalid configuration: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
