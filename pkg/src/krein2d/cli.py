"""Command-line interface.

Every table is CSV on stdout (or ``--output``), preceded by one ``#`` line
echoing the unit convention.  Exit codes: 0 success, 1 a certificate failed
verification, 2 a numerical failure, 64 bad usage or input.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bounds import (
    certificate_ch,
    certificate_generic,
    verify_certificate,
)
from .configio import dumps_config, read_config
from .errors import (
    AtBoundStateError,
    DivergenceError,
    KreinError,
    NoCrossingError,
)
from .geometry import (
    Flat,
    GenericBounds,
    Hyperbolic,
    PhysicalConstants,
    hex_lattice,
    hyperbolic_level_packing,
    poisson_disk_sample,
)
from .kernels import heat_kernel, heat_kernel_upper_gaussian, heat_kernel_upper_generic
from .principal import phi_diagonal, regularized_coupling, regularized_phi_diagonal
from .spectrum import eigenflow, ground_state

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_NUMERIC = 2
EXIT_USAGE = 64

COMMANDS = ("spectrum", "certificate", "verify", "kernels", "lattice", "flow", "montecarlo")


class UsageError(Exception):
    """Bad command-line usage; maps to exit code 64."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunSpec:
    """A fully parsed invocation.

    Centers come from ``config_path`` (a JSON file) or ``generator``
    (``hex``, ``hyperbolic``, ``poisson``); commands that need centers
    require exactly one of the two.  Subcommand-specific flags land in
    ``options``.
    """

    command: str
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    kappa: Optional[float] = None
    A: float = 2.0
    B: float = 5.0
    generic: Optional[dict] = None
    config_path: Optional[str] = None
    generator: Optional[str] = None
    d_min: Optional[float] = None
    mu: float = 1.0
    mu_star: Optional[float] = None
    levels: int = 2
    radius: float = 5.0
    output: Optional[str] = None
    tol: float = 1e-10
    seed: int = 0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if not self.tol > 0:
            raise UsageError("--tol must be positive")
        if self.config_path is not None and self.generator is not None:
            raise UsageError("give either --config or --generate, not both")

    @property
    def units_line(self) -> str:
        c = self.constants
        return f"# units: {c.describe()}, hbar^2/2m={c.kinetic!r}"


def _add_model_flags(p):
    g = p.add_argument_group("model")
    geo = g.add_mutually_exclusive_group()
    geo.add_argument("--flat", action="store_true", help="Euclidean plane (kappa = 0)")
    geo.add_argument("--kappa", type=float, help="curvature bound / hyperbolic curvature -kappa")
    g.add_argument("--A", type=float, default=2.0, help="Gaussian bound prefactor")
    g.add_argument("--B", type=float, default=5.0, help="Gaussian bound width, > 4")


def _add_common(p):
    p.add_argument("--hbar", type=float, default=1.0)
    p.add_argument("--mass", type=float, default=0.5)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="write to this file instead of stdout")


def _add_source(p, levels=2):
    g = p.add_argument_group("centers")
    g.add_argument("--config", dest="config_path", help="JSON configuration file")
    g.add_argument("--generate", dest="generator", choices=("hex", "hyperbolic", "poisson"))
    g.add_argument("--dmin", dest="d_min", type=float, help="minimum distance")
    g.add_argument("--mu", type=float, default=1.0, help="bound-state scale of generated centers")
    g.add_argument("--levels", type=int, default=levels)
    g.add_argument("--radius", type=float, default=5.0, help="region radius for poisson sampling")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="krein2d", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("spectrum", help="ground state and eigenvalue flow")
    _add_source(p)
    _add_model_flags(p)
    p.add_argument("--grid", type=int, default=9, help="flow grid size")
    _add_common(p)

    p = sub.add_parser("certificate", help="certified lower bound -nu*^2")
    _add_model_flags(p)
    p.add_argument("--generic", action="store_true", help="generic noncompact bound")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--D", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--n-star", dest="n_star", type=int, default=6)
    p.add_argument("--lambda-gap", dest="lambda_gap", type=float, default=0.0)
    p.add_argument("--dmin", dest="d_min", type=float, required=True)
    p.add_argument("--mu-star", dest="mu_star", type=float, required=True)
    _add_common(p)

    p = sub.add_parser("verify", help="check a certificate against a configuration")
    _add_source(p)
    _add_model_flags(p)
    p.add_argument("--mu-star", dest="mu_star", type=float)
    _add_common(p)

    p = sub.add_parser("kernels", help="heat kernel and its bounds on a (t, d) grid")
    _add_model_flags(p)
    p.add_argument("--t", type=float, nargs="+", default=[0.1, 1.0, 10.0])
    p.add_argument("--d", type=float, nargs="+", default=[0.0, 1.0, 3.0])
    _add_common(p)

    p = sub.add_parser("lattice", help="write a generated configuration file")
    _add_source(p)
    _add_model_flags(p)
    _add_common(p)

    p = sub.add_parser("flow", help="bare coupling lambda(eps) as the cutoff is removed")
    _add_model_flags(p)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--nu", type=float, default=2.0)
    p.add_argument("--eps", type=float, nargs="+", default=[1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
    _add_common(p)

    p = sub.add_parser("montecarlo", help="ground states of random Poisson-disk configurations")
    _add_source(p)
    _add_model_flags(p)
    p.add_argument("--trials", type=int, default=10)
    _add_common(p)
    return parser


def spec_from_args(ns: argparse.Namespace) -> RunSpec:
    d = vars(ns)
    kappa = 0.0 if d.get("flat") else d.get("kappa")
    generic = None
    if d.get("generic"):
        generic = {k: d[k] for k in ("C", "D", "rho", "n_star", "lambda_gap")}
    try:
        constants = PhysicalConstants(d["hbar"], d["mass"])
    except KreinError as exc:
        raise UsageError(str(exc)) from None
    known = {"command", "hbar", "mass", "flat", "kappa", "A", "B", "generic", "C", "D", "rho",
             "n_star", "lambda_gap", "config_path", "generator", "d_min", "mu", "mu_star", "levels",
             "radius", "output", "tol", "seed"}
    return RunSpec(
        command=d["command"], constants=constants, kappa=kappa, A=d["A"], B=d["B"], generic=generic,
        config_path=d.get("config_path"), generator=d.get("generator"), d_min=d.get("d_min"),
        mu=d.get("mu", 1.0), mu_star=d.get("mu_star"), levels=d.get("levels", 2),
        radius=d.get("radius", 5.0), output=d.get("output"), tol=d["tol"], seed=d["seed"],
        options={k: v for k, v in d.items() if k not in known},
    )


def _model_for(spec: RunSpec):
    if spec.kappa is None or spec.kappa == 0:
        return Flat()
    return Hyperbolic(spec.kappa)


def _configuration(spec: RunSpec):
    """Returns ``(configuration, A, B)``; A and B from the file override the flags."""
    if spec.config_path is not None:
        doc = read_config(spec.config_path)
        if doc.config is None:
            raise UsageError("this command needs a flat or hyperbolic configuration")
        return doc.config, doc.A if doc.A is not None else spec.A, doc.B if doc.B is not None else spec.B
    if spec.generator is None:
        raise UsageError("give --config FILE or --generate {hex,hyperbolic,poisson}")
    if spec.d_min is None:
        raise UsageError("--dmin is required with --generate")
    if spec.generator == "hex":
        cfg = hex_lattice(spec.d_min, spec.levels, spec.mu, spec.constants)
    elif spec.generator == "hyperbolic":
        if not spec.kappa:
            raise UsageError("--generate hyperbolic needs --kappa > 0")
        cfg = hyperbolic_level_packing(spec.kappa, spec.d_min, spec.levels, spec.mu, spec.constants)
    else:
        cfg = poisson_disk_sample(_model_for(spec), spec.radius, spec.d_min, spec.seed,
                                  spec.constants, spec.mu)
    return cfg, spec.A, spec.B


def _g(x) -> str:
    return format(float(x), ".17g") if isinstance(x, (float, np.floating)) else str(x)


def _table(out, spec, header, rows, notes=()):
    out.write(spec.units_line + "\n")
    for note in notes:
        out.write(f"# {note}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_g(v) for v in r])


def _cmd_spectrum(spec, out):
    cfg, _, _ = _configuration(spec)
    res = ground_state(cfg, tol=spec.tol)
    n = max(2, int(spec.options.get("grid", 9)))
    grid = res.nu_gr * np.geomspace(0.5, 2.0, n)
    flow = eigenflow(cfg, grid)
    notes = [f"size={len(cfg)}, nu_gr={_g(res.nu_gr)}, energy={_g(res.energy)}"]
    rows = [("ground_state", res.nu_gr, res.energy, 0.0, "")]
    rows += [("flow", nu, -nu * nu, lam, neg)
             for nu, lam, neg in zip(flow.nu_grid, flow.lambda_min, flow.neg_counts)]
    _table(out, spec, ["kind", "nu", "energy", "lambda_min", "neg_count"], rows, notes)
    return EXIT_OK


def _certificate(spec, d_min, mu_star, A, B):
    if spec.generic is not None:
        params = GenericBounds(kappa=spec.kappa or 0.0, A=A, B=B, **spec.generic)
        return certificate_generic(params, d_min, mu_star, spec.constants, spec.tol)
    return certificate_ch(spec.kappa or 0.0, d_min, mu_star, A, B, spec.constants, spec.tol)


def _cmd_certificate(spec, out):
    cert = _certificate(spec, spec.d_min, spec.mu_star, spec.A, spec.B)
    rows = list(cert.as_dict().items()) + [("margin", cert.margin())]
    _table(out, spec, ["key", "value"], rows)
    return EXIT_OK


def _cmd_verify(spec, out):
    cfg, A, B = _configuration(spec)
    kappa = cfg.model.kappa if spec.kappa is None else spec.kappa
    spec.kappa = kappa
    mu_star = cfg.mu_star if spec.mu_star is None else spec.mu_star
    cert = _certificate(spec, cfg.d_min, mu_star, A, B)
    rep = verify_certificate(cfg, cert, tol=spec.tol)
    rows = [("status", rep.status), ("size", rep.size), ("energy", rep.energy),
            ("nu_star", rep.nu_star), ("energy_lower_bound", cert.energy_lower_bound),
            ("margin", rep.margin), ("certificate_margin", rep.certificate_margin),
            ("neumann_gate", rep.gate)]
    _table(out, spec, ["key", "value"], rows)
    return EXIT_OK if rep.ok else EXIT_VERIFY_FAILED


def _cmd_kernels(spec, out):
    model = _model_for(spec)
    generic = GenericBounds(kappa=model.kappa, A=spec.A, B=spec.B)
    rows = []
    for t in spec.options["t"]:
        for d in spec.options["d"]:
            rows.append((t, d, float(heat_kernel(model, t, d, spec.constants)),
                         float(heat_kernel_upper_gaussian(t, d, spec.A, spec.B, spec.constants)),
                         heat_kernel_upper_generic(t, d, generic, spec.constants)))
    _table(out, spec, ["t", "d", "heat_kernel", "gaussian_bound", "generic_bound"], rows,
           [f"model={model.kind}, kappa={_g(model.kappa)}, A={_g(spec.A)}, B={_g(spec.B)}"])
    return EXIT_OK


def _cmd_lattice(spec, out):
    cfg, A, B = _configuration(spec)
    out.write(dumps_config(cfg))
    return EXIT_OK


def _cmd_flow(spec, out):
    model = _model_for(spec)
    mu, nu = spec.mu, spec.options["nu"]
    exact = phi_diagonal(model, nu, mu, spec.constants)
    rows = []
    for eps in sorted(spec.options["eps"], reverse=True):
        lam = regularized_coupling(model, eps, mu, spec.constants)
        reg = regularized_phi_diagonal(model, eps, nu, mu, spec.constants)
        rows.append((eps, lam, reg, reg - exact))
    _table(out, spec, ["epsilon", "coupling", "phi_diagonal_regularized", "gap_to_limit"], rows,
           [f"model={model.kind}, mu={_g(mu)}, nu={_g(nu)}, phi_diagonal={_g(exact)}"])
    return EXIT_OK


def _cmd_montecarlo(spec, out):
    if spec.d_min is None:
        raise UsageError("--dmin is required")
    trials = int(spec.options.get("trials", 10))
    if trials < 1:
        raise UsageError("--trials must be >= 1")
    model = _model_for(spec)
    cert = certificate_ch(model.kappa, spec.d_min, spec.mu, spec.A, spec.B, spec.constants, spec.tol)
    rows, energies = [], []
    for k in range(trials):
        seed = spec.seed + k
        cfg = poisson_disk_sample(model, spec.radius, spec.d_min, seed, spec.constants, spec.mu)
        e = ground_state(cfg, tol=spec.tol).energy
        energies.append(e)
        rows.append((k, seed, len(cfg), e, e + cert.nu_star ** 2))
    e = np.array(energies)
    notes = [f"nu_star={_g(cert.nu_star)}, energy_lower_bound={_g(cert.energy_lower_bound)}",
             f"energy mean={_g(e.mean())}, std={_g(e.std())}, min={_g(e.min())}, max={_g(e.max())}"]
    _table(out, spec, ["trial", "seed", "size", "energy", "margin"], rows, notes)
    return EXIT_OK


_HANDLERS = {
    "spectrum": _cmd_spectrum, "certificate": _cmd_certificate, "verify": _cmd_verify,
    "kernels": _cmd_kernels, "lattice": _cmd_lattice, "flow": _cmd_flow,
    "montecarlo": _cmd_montecarlo,
}


def run(spec: RunSpec, stdout=None, stderr=None) -> int:
    """Execute one command and return its exit code."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    buf = io.StringIO()
    try:
        code = _HANDLERS[spec.command](spec, buf)
    except UsageError as exc:
        stderr.write(f"krein2d {spec.command}: {exc}\n")
        return EXIT_USAGE
    except (NoCrossingError, AtBoundStateError, DivergenceError, ArithmeticError, RuntimeError) as exc:
        stderr.write(f"krein2d {spec.command}: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except (KreinError, ValueError, OSError) as exc:
        stderr.write(f"krein2d {spec.command}: invalid input: {exc}\n")
        return EXIT_USAGE
    text = buf.getvalue()
    if spec.output:
        with open(spec.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        spec = spec_from_args(ns)
    except UsageError as exc:
        sys.stderr.write(f"krein2d: {exc}\n")
        return EXIT_USAGE
    return run(spec)
