"""Norm bounds on the principal matrix and certified lower bounds on the ground state.

Phi = D + O is invertible whenever ``sup_i (1/D_ii) ||O|| < 1``.  A uniform
lower bound on ``D_ii`` and a configuration-free upper bound on the row sums
of ``|O|`` turn this into a scalar inequality in ``nu``; the smallest ``nu*``
satisfying it certifies ``E_gr > -nu*^2`` for every configuration obeying the
geometric assumptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import ContractViolation, DomainError, IncompatibleCertificateError, ThresholdError, ValidityError
from .geometry import NATURAL, Configuration, Flat, GenericBounds, Hyperbolic, PhysicalConstants
from .principal import MatrixSplit, assemble, split
from .special import bessel_k0, bessel_k0e, bessel_k1

ROWSUM_TAIL_TOL = 1e-12
ROWSUM_MAX_TERMS = 10_000_000
GENERIC_SERIES_TERMS = 20


def holmgren_norm(offdiag) -> float:
    """``[sup_i sum_j |O_ij| * sup_j sum_i |O_ij|]^{1/2}``, an upper bound on ``||O||_2``.

    For a symmetric matrix both factors equal the largest absolute row sum.
    """
    o = np.asarray(offdiag, dtype=float)
    if o.ndim != 2 or o.shape[0] != o.shape[1]:
        raise ContractViolation(f"expected a square matrix, got shape {o.shape}")
    if o.size == 0:
        return 0.0
    if np.any(np.diag(o) != 0):
        raise ContractViolation("holmgren_norm expects a zero diagonal")
    a = np.abs(o)
    rows = a.sum(axis=1).max()
    cols = a.sum(axis=0).max()
    return float(rows) if rows == cols else float(math.sqrt(rows * cols))


def neumann_gate(parts: MatrixSplit) -> float:
    """``max_i (1/D_ii) * holmgren_norm(O)``; below 1 it certifies Phi invertible.

    Returns ``inf`` when some ``D_ii <= 0``, where the test does not apply.
    """
    if np.any(parts.diag <= 0):
        return math.inf
    return float(np.max(1.0 / parts.diag) * holmgren_norm(parts.offdiag))


def _exponent(nu, kappa, constants):
    return math.sqrt(1.0 + 4.0 * nu * nu / (constants.kinetic * kappa))


def diagonal_lower_bound(kappa: float, nu: float, mu: float,
                         constants: PhysicalConstants = NATURAL) -> float:
    """Lower bound on a diagonal entry valid when the sectional curvature is ``>= -kappa``.

    ``(m / pi hbar^2) log((1 + b) / (1 + a))`` with ``a``, ``b`` the exponents
    of ``mu`` and ``nu``; the flat value ``(m / 2 pi hbar^2) log(nu^2/mu^2)``
    at ``kappa = 0``.
    """
    if kappa < 0:
        raise DomainError("kappa must be >= 0")
    if not (nu > 0 and mu > 0):
        raise DomainError("nu and mu must be positive")
    if kappa == 0:
        return constants.green_prefactor * math.log(nu / mu)
    a = _exponent(mu, kappa, constants)
    b = _exponent(nu, kappa, constants)
    return constants.green_prefactor * math.log((1.0 + b) / (1.0 + a))


def _log_ratio(kappa, nu, mu, constants):
    # diagonal_lower_bound without the prefactor
    return diagonal_lower_bound(kappa, nu, mu, constants) / constants.green_prefactor


def _ch_threshold(kappa, B, constants):
    return math.sqrt(B * constants.kinetic * kappa)


def _check_AB(A, B):
    if not A > 0:
        raise DomainError("A must be positive")
    if not B > 4:
        raise DomainError("B must exceed 4")


class RowSumBound(NamedTuple):
    series: float
    closed_form: float


def offdiag_rowsum_bound_ch(kappa: float, d_min: float, nu: float, A: float = 2.0, B: float = 5.0,
                            constants: PhysicalConstants = NATURAL) -> RowSumBound:
    """Configuration-free bound on ``sum_{j != i} |O_ij|`` under ``Sec >= -kappa``.

    Returns the level series ``(A m / pi hbar^2) sum_l n(l) K0(c l nu)`` with
    the relaxed packing count ``n(l)`` and ``c = 2 sqrt(2 m d^2 / B hbar^2)``,
    summed until the remaining tail is below ``1e-12``, together with its
    closed-form majorant ``(2ABm/hbar^2)(hbar^2/2md^2) sech(sqrt(kappa) d/4) / (nu (nu - nu_c))``
    where ``nu_c = sqrt(B hbar^2 kappa / 2m)``.

    Raises
    ------
    ThresholdError
        If ``nu <= nu_c``; the series diverges there.
    """
    _check_AB(A, B)
    if kappa < 0 or not d_min > 0:
        raise DomainError("need kappa >= 0 and d_min > 0")
    crit = _ch_threshold(kappa, B, constants)
    if not nu > crit:
        raise ThresholdError(f"nu = {nu} is not above the convergence threshold {crit}", crit)
    pref = A * constants.mass / (math.pi * constants.hbar ** 2)
    sech = 1.0 / math.cosh(0.25 * math.sqrt(kappa) * d_min)
    closed = (2.0 * A * B * constants.mass / constants.hbar ** 2
              * constants.kinetic / d_min ** 2 * sech / (nu * (nu - crit)))

    c = 2.0 * math.sqrt(d_min ** 2 / (B * constants.kinetic)) * nu
    # With K0(x) <= (2/x) exp(-x/2) each term is below amp * q^l.
    decay = 0.5 * c - math.sqrt(kappa) * d_min
    amp = pref * 4.0 * math.pi * sech / c
    total = 0.0
    start = 1
    chunk = 256
    while True:
        ls = np.arange(start, start + chunk, dtype=float)
        x = c * ls
        # packing_count_bound_relaxed(l) * K0(x), combined in log space to avoid overflow
        log_term = np.log(2.0 * math.pi * sech * ls) + math.sqrt(kappa) * d_min * ls - x
        total += pref * float(np.sum(bessel_k0e(x) * np.exp(log_term)))
        last = start + chunk - 1
        tail = amp * math.exp(-decay * (last + 1)) / (-math.expm1(-decay))
        if tail < ROWSUM_TAIL_TOL * max(total, 1.0) or last >= ROWSUM_MAX_TERMS:
            break
        start = last + 1
        chunk = min(4 * chunk, 1 << 16)
    return RowSumBound(total, closed)


@dataclass(frozen=True)
class Certificate:
    """A certified threshold with ``E_gr > -nu_star**2``.

    Attributes
    ----------
    nu_star : float
    regime : {"flat_limit", "cartan_hadamard", "generic"}
    d_min, mu_star, kappa : float
    A, B : float or None
        Gaussian heat-kernel bound constants (Cartan-Hadamard regimes).
    params : GenericBounds or None
        Heat-kernel and packing data (generic regime).
    validity : bool or None
        Generic regime only: whether ``sqrt(2m) d nu*/hbar >= log n*``.
    """

    nu_star: float
    regime: str
    d_min: float
    mu_star: float
    kappa: float
    constants: PhysicalConstants = field(default=NATURAL)
    A: Optional[float] = None
    B: Optional[float] = None
    params: Optional[GenericBounds] = None
    validity: Optional[bool] = None

    @property
    def energy_lower_bound(self) -> float:
        return -self.nu_star ** 2

    def sides(self, nu: Optional[float] = None):
        """``(lhs, rhs)`` of the defining inequality at ``nu`` (default ``nu_star``)."""
        nu = self.nu_star if nu is None else nu
        if self.regime == "generic":
            return _generic_sides(self.params, self.d_min, self.mu_star, nu, self.constants)
        return _ch_sides(self.kappa, self.d_min, self.mu_star, self.A, self.B, nu, self.constants)

    def margin(self) -> float:
        """``rhs - lhs`` recomputed at ``nu_star``; positive for a sound certificate."""
        lhs, rhs = self.sides()
        return rhs - lhs

    def as_dict(self) -> dict:
        out = {"regime": self.regime, "nu_star": self.nu_star,
               "energy_lower_bound": self.energy_lower_bound, "d_min": self.d_min,
               "mu_star": self.mu_star, "kappa": self.kappa}
        if self.regime == "generic":
            p = self.params
            out.update(C=p.C, D=p.D, rho=p.rho, n_star=p.n_star, lambda_gap=p.lambda_gap,
                       validity=self.validity)
        else:
            out.update(A=self.A, B=self.B)
        return out


def _ch_sides(kappa, d_min, mu_star, A, B, nu, constants):
    crit = _ch_threshold(kappa, B, constants)
    if nu <= crit:
        lhs = math.inf
    else:
        sech = 1.0 / math.cosh(0.25 * math.sqrt(kappa) * d_min)
        lhs = 2.0 * math.pi * A * B * constants.kinetic / d_min ** 2 * sech / (nu * (nu - crit))
    return lhs, _log_ratio(kappa, nu, mu_star, constants)


def _smallest_satisfying(g, lo, tol):
    # g increasing with g(lo) <= 0; returns the upper end of a bracket of width <= tol*hi.
    hi = 2.0 * lo
    for _ in range(200):
        if g(hi) > 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise RuntimeError("certificate inequality not satisfied below nu = %g" % hi)
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    return hi


def certificate_ch(kappa: float, d_min: float, mu_star: float, A: float = 2.0, B: float = 5.0,
                   constants: PhysicalConstants = NATURAL, tol: float = 1e-10) -> Certificate:
    """Smallest ``nu*`` with ``2 pi A B (hbar^2/2m d^2) sech(sqrt(kappa) d/4) / (nu (nu - nu_c))``
    strictly below ``log((1 + b)/(1 + a*))``.

    ``kappa = 0`` uses the flat limit, where the right side is ``log(nu/mu*)``.
    The returned value is the upper end of a bisection bracket of relative
    width ``tol``, so the inequality holds strictly there.
    """
    _check_AB(A, B)
    if kappa < 0 or not d_min > 0 or not mu_star > 0:
        raise DomainError("need kappa >= 0, d_min > 0 and mu_star > 0")

    def g(nu):
        lhs, rhs = _ch_sides(kappa, d_min, mu_star, A, B, nu, constants)
        return rhs - lhs

    lo = max(mu_star, _ch_threshold(kappa, B, constants))
    nu_star = _smallest_satisfying(g, lo, tol)
    regime = "flat_limit" if kappa == 0 else "cartan_hadamard"
    return Certificate(nu_star, regime, d_min, mu_star, kappa, constants, A=A, B=B)


def _generic_xbar(d_min, nu, constants):
    # sqrt(2 m d^2 nu^2 / hbar^2)
    return d_min * nu / math.sqrt(constants.kinetic)


def _effective_nu(params, nu):
    # A spectral gap adds lambda to nu^2 in the heat-kernel exponent.
    return math.sqrt(nu * nu + params.lambda_gap)


def offdiag_term_generic(l: int, params: GenericBounds, d_min: float, nu: float,
                         constants: PhysicalConstants = NATURAL) -> float:
    """Time integral of the generic heat-kernel bound at distance ``l * d_min``.

    With ``x = sqrt(2 m d^2 nu^2 / hbar^2) l``::

        (C m / pi hbar^2) [(1 + 4 x^2) K0(x) + 12 x K1(x)]
        + (D / 4 pi rho^2 nu^2) [x (1 + 4 x^2) K1(x) + 4 x^2 K0(x)]
    """
    if l < 1:
        raise DomainError("level l must be >= 1")
    if not (d_min > 0 and nu > 0):
        raise DomainError("d_min and nu must be positive")
    nu = _effective_nu(params, nu)
    x = _generic_xbar(d_min, nu, constants) * l
    k0 = float(bessel_k0(x)) if x < 700 else 0.0
    k1 = float(bessel_k1(x)) if x < 700 else 0.0
    x2 = 4.0 * x * x
    total = 0.0
    if params.C:
        total += params.C * constants.mass / (math.pi * constants.hbar ** 2) * ((1 + x2) * k0 + 12 * x * k1)
    if params.D:
        total += params.D / (4 * math.pi * params.rho ** 2 * nu ** 2) * (x * (1 + x2) * k1 + x2 * k0)
    return total


class NormBound(NamedTuple):
    closed_form: float
    series: float


def _generic_reduced(params, d_min, nu, constants):
    # The four-term bound without the overall m/hbar^2 factor.
    nu = _effective_nu(params, nu)
    xb = _generic_xbar(d_min, nu, constants)
    L = math.log(params.n_star)
    gap = xb - L
    C, D = params.C, params.D
    s = constants.kinetic / (params.rho ** 2 * nu ** 2)  # hbar^2 / 2 m rho^2 nu^2
    if gap <= 0 and (C or D):
        return math.inf
    total = 0.0
    if C:
        total += C / math.sqrt(2.0) * xb ** -0.5 / math.sqrt(gap)
    if C or D:
        total += (12.0 * C + D / (2.0 * math.pi) * s) * (2.0 * xb - L) / gap ** 2
        total += 3.0 / math.sqrt(2.0) * xb ** 1.5 * (C + 0.5 * D * s) / gap ** 2.5
    if D:
        total += 4.0 * D / math.pi * (d_min ** 2 / params.rho ** 2) * (4.0 * xb - L) / gap ** 4
    return total


def _generic_series(params, d_min, nu, constants, terms=GENERIC_SERIES_TERMS):
    # sum_l n*^l times the level term with K0(x) <= sqrt(pi/2x) e^-x and K1(x) <= (1 + 1/x) e^-x
    nu = _effective_nu(params, nu)
    xb = _generic_xbar(d_min, nu, constants)
    ls = np.arange(1, terms + 1, dtype=float)
    x = xb * ls
    weight = np.exp(ls * math.log(params.n_star) - x)
    k0b = np.sqrt(np.pi / (2 * x)) * weight
    k1b = (1 + 1 / x) * weight
    x2 = 4 * x * x
    out = 0.0
    if params.C:
        out += params.C * constants.mass / (math.pi * constants.hbar ** 2) * np.sum((1 + x2) * k0b + 12 * x * k1b)
    if params.D:
        out += params.D / (4 * math.pi * params.rho ** 2 * nu ** 2) * np.sum(x * (1 + x2) * k1b + x2 * k0b)
    return float(out)


def generic_validity_nu(params: GenericBounds, d_min: float,
                        constants: PhysicalConstants = NATURAL) -> float:
    """Smallest ``nu`` with ``2 m d^2 nu^2 / hbar^2 >= log^2 n*``."""
    return math.log(params.n_star) * math.sqrt(constants.kinetic) / d_min


def offdiag_norm_bound_generic(params: GenericBounds, d_min: float, nu: float,
                               constants: PhysicalConstants = NATURAL) -> NormBound:
    """Four-term closed-form bound on ``||O||`` for the generic heat-kernel bound.

    Also returns the 20-level series of Bessel-majorized terms weighted by
    ``n(l) <= n*^l`` that the closed form dominates.

    Raises
    ------
    ValidityError
        If ``sqrt(2m) d nu / hbar < log n*``.
    """
    if not (d_min > 0 and nu > 0):
        raise DomainError("d_min and nu must be positive")
    crit = generic_validity_nu(params, d_min, constants)
    if nu < crit:
        raise ValidityError(f"nu = {nu} is below the validity threshold {crit}", crit)
    pref = constants.mass / constants.hbar ** 2
    return NormBound(pref * _generic_reduced(params, d_min, nu, constants),
                     _generic_series(params, d_min, nu, constants))


def _generic_sides(params, d_min, mu_star, nu, constants):
    if nu < generic_validity_nu(params, d_min, constants):
        lhs = math.inf
    else:
        lhs = _generic_reduced(params, d_min, nu, constants)
    return lhs, _log_ratio(params.kappa, nu, mu_star, constants) / math.pi


def certificate_generic(params: GenericBounds, d_min: float, mu_star: float,
                        constants: PhysicalConstants = NATURAL, tol: float = 1e-10) -> Certificate:
    """Smallest ``nu*`` on the validity ray where the four-term bound is strictly
    below ``(1/pi) log((1 + b)/(1 + a*))``."""
    if not (d_min > 0 and mu_star > 0):
        raise DomainError("d_min and mu_star must be positive")

    def g(nu):
        lhs, rhs = _generic_sides(params, d_min, mu_star, nu, constants)
        return rhs - lhs

    lo = max(mu_star, generic_validity_nu(params, d_min, constants))
    nu_star = lo if g(lo) > 0 else _smallest_satisfying(g, lo, tol)
    valid = nu_star >= generic_validity_nu(params, d_min, constants)
    return Certificate(nu_star, "generic", d_min, mu_star, params.kappa, constants,
                       params=params, validity=valid)


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of checking a certificate against a concrete configuration.

    ``status`` is ``"verified"`` when the certificate is self-consistent and
    ``E_gr > -nu*^2``; ``"failed"`` when ``E_gr <= -nu*^2``; ``"inconclusive"``
    when the energy clears the bound but the certificate inequality itself
    does not hold at ``nu*``.
    """

    status: str
    energy: float
    nu_star: float
    margin: float
    certificate_margin: float
    gate: float
    size: int

    @property
    def ok(self) -> bool:
        return self.status == "verified"


def _check_compatible(config: Configuration, cert: Certificate):
    model = config.model
    if cert.regime == "flat_limit" and not isinstance(model, Flat):
        raise IncompatibleCertificateError("a flat-limit certificate needs a flat configuration")
    if cert.regime in ("cartan_hadamard", "generic") and model.kappa > cert.kappa:
        raise IncompatibleCertificateError(
            f"configuration curvature -{model.kappa} lies below the certified bound -{cert.kappa}"
        )
    if not isinstance(model, (Flat, Hyperbolic)):
        raise IncompatibleCertificateError("configuration must be flat or hyperbolic")
    if config.constants != cert.constants:
        raise IncompatibleCertificateError("unit conventions differ")
    if len(config) > 1 and config.pair_distances.min() < cert.d_min * (1.0 - 1e-9):
        raise IncompatibleCertificateError("configuration has centers closer than the certified d_min")
    if config.mu_star > cert.mu_star:
        raise IncompatibleCertificateError("configuration has mu above the certified mu_star")


def verify_certificate(config: Configuration, cert: Certificate, tol: float = 1e-10) -> VerificationReport:
    """Compare the ground state of ``config`` with the certified bound."""
    from .spectrum import ground_state

    _check_compatible(config, cert)
    res = ground_state(config, tol=tol)
    margin = res.energy + cert.nu_star ** 2
    cmargin = cert.margin()
    gate = neumann_gate(split(assemble(config, cert.nu_star)))
    if margin <= 0:
        status = "failed"
    elif cmargin > 0:
        status = "verified"
    else:
        status = "inconclusive"
    return VerificationReport(status, res.energy, cert.nu_star, margin, cmargin, gate, len(config))
