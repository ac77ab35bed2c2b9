"""The renormalized principal operator Phi(-nu^2) and its regularized predecessor.

For centers ``p_i`` with bound-state scales ``mu_i``::

    Phi_ii = int_0^inf (dt/hbar) (exp(-mu_i^2 t/hbar) - exp(-nu^2 t/hbar)) K_t(p_i, p_i)
    Phi_ij = -int_0^inf (dt/hbar) exp(-nu^2 t/hbar) K_t(p_i, p_j)

Bound states sit at the energies ``-nu^2`` where an eigenvalue of Phi vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnsupportedBackendError
from .geometry import NATURAL, Configuration, Flat, Hyperbolic, ManifoldModel, PhysicalConstants
from .kernels import flat_heat_kernel, free_resolvent_kernel, hyperbolic_heat_kernel
from .special import AccuracyBudget, frullani_sinh_integral, integrate


@dataclass(frozen=True, eq=False)
class PrincipalMatrix:
    """Dense symmetric principal matrix at a fixed ``nu``."""

    nu: float
    entries: np.ndarray
    config: Configuration

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True, eq=False)
class MatrixSplit:
    """Diagonal part and zero-diagonal off-diagonal part of a principal matrix."""

    diag: np.ndarray
    offdiag: np.ndarray

    def reassemble(self) -> np.ndarray:
        out = self.offdiag.copy()
        np.fill_diagonal(out, self.diag)
        return out


def _hyperbolic_exponent(nu, kappa, constants):
    # sqrt(1 + 8 m nu^2 / (hbar^2 kappa))
    return math.sqrt(1.0 + 4.0 * nu * nu / (constants.kinetic * kappa))


def phi_diagonal(model: ManifoldModel, nu: float, mu: float,
                 constants: PhysicalConstants = NATURAL) -> float:
    """Renormalized diagonal entry for a center with scale ``mu``.

    Flat: ``(m / 2 pi hbar^2) log(nu^2 / mu^2)``.  Hyperbolic: ``(m / pi hbar^2)``
    times the sinh-Frullani integral between ``a = sqrt(1 + 8 m mu^2/hbar^2 kappa)``
    and ``b`` (same with ``nu``), negative when ``nu < mu``.
    """
    if not (nu > 0 and mu > 0):
        raise DomainError("nu and mu must be positive")
    if isinstance(model, Flat):
        return constants.green_prefactor * math.log(nu / mu)
    if not isinstance(model, Hyperbolic):
        raise UnsupportedBackendError("phi_diagonal needs a flat or hyperbolic model")
    a = _hyperbolic_exponent(mu, model.kappa, constants)
    b = _hyperbolic_exponent(nu, model.kappa, constants)
    if a == b:
        return 0.0
    if b > a:
        return constants.green_prefactor * frullani_sinh_integral(a, b)
    return -constants.green_prefactor * frullani_sinh_integral(b, a)


def phi_offdiagonal(model: ManifoldModel, nu: float, dist,
                    constants: PhysicalConstants = NATURAL):
    """Off-diagonal entry ``-G_nu(dist)``; strictly negative."""
    return -free_resolvent_kernel(model, nu, dist, constants)


def assemble(config: Configuration, nu: float) -> PrincipalMatrix:
    """Build Phi(-nu^2) with rows ordered as ``config.points``."""
    if not nu > 0:
        raise DomainError("nu must be positive")
    n = len(config)
    entries = np.zeros((n, n))
    if n > 1:
        iu = np.triu_indices(n, 1)
        vals = phi_offdiagonal(config.model, nu, config.pair_distances, config.constants)
        entries[iu] = vals
        entries.T[iu] = vals
        del iu, vals
    uniq, inv = np.unique(config.mus, return_inverse=True)
    diag = np.array([phi_diagonal(config.model, nu, m, config.constants) for m in uniq])
    np.fill_diagonal(entries, diag[inv])
    entries.setflags(write=False)
    return PrincipalMatrix(float(nu), entries, config)


def split(pm: PrincipalMatrix) -> MatrixSplit:
    """``Phi = D + O`` with ``D`` diagonal and ``O`` of zero diagonal."""
    diag = np.diag(pm.entries).copy()
    off = np.array(pm.entries, copy=True)
    np.fill_diagonal(off, 0.0)
    return MatrixSplit(diag, off)


def _on_diagonal_kernel(model, constants):
    if isinstance(model, Flat):
        return lambda t: float(flat_heat_kernel(t, 0.0, constants))
    if isinstance(model, Hyperbolic):
        return lambda t: hyperbolic_heat_kernel(t, 0.0, model.kappa, constants, rel_tol=1e-11)
    raise UnsupportedBackendError("regularization needs a flat or hyperbolic model")


def _tail_integral(weight, epsilon, rate, model, constants, rel_tol):
    # int_eps^inf (dt/hbar) weight(t - eps) K_t(p, p), in log t, weight decaying like exp(-rate u)
    kernel = _on_diagonal_kernel(model, constants)
    hbar = constants.hbar

    def f(u):
        t = math.exp(u)
        return t / hbar * weight(t - epsilon) * kernel(t)

    u_hi = math.log(epsilon + 60.0 / rate)
    u_lo = math.log(epsilon)
    knots = [math.log(epsilon + m / rate) for m in (0.01, 0.1, 1.0, 5.0, 20.0)]
    edges = [u_lo] + [k for k in knots if u_lo < k < u_hi] + [u_hi]
    budget = AccuracyBudget(rel_tol=rel_tol, abs_tol=0.0)
    return sum(integrate(f, lo, hi, budget) for lo, hi in zip(edges[:-1], edges[1:]))


def regularized_coupling(model: ManifoldModel, epsilon: float, mu: float,
                         constants: PhysicalConstants = NATURAL, rel_tol: float = 1e-10) -> float:
    """Bare coupling ``lambda(eps)`` that makes the isolated center bind at ``-mu^2``.

    ``1/lambda(eps) = int_eps^inf (dt/hbar) exp(-mu^2 (t - eps)/hbar) K_t(p, p)``;
    tends to zero like ``1/log(1/eps)`` as ``eps -> 0``.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be positive; the bare coupling diverges at 0")
    if not mu > 0:
        raise DomainError("mu must be positive")
    rate = mu * mu / constants.hbar
    inv = _tail_integral(lambda u: math.exp(-rate * u), epsilon, rate, model, constants, rel_tol)
    return 1.0 / inv


def regularized_phi_diagonal(model: ManifoldModel, epsilon: float, nu: float, mu: float,
                             constants: PhysicalConstants = NATURAL,
                             rel_tol: float = 1e-10) -> float:
    """Diagonal entry before the cutoff is removed.

    ``1/lambda(eps) - int_eps^inf (dt/hbar) exp(-nu^2 (t - eps)/hbar) K_t(p, p)``,
    computed as one integral of the difference of the two weights.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    if not (nu > 0 and mu > 0):
        raise DomainError("nu and mu must be positive")
    if nu == mu:
        return 0.0
    mu_rate = mu * mu / constants.hbar
    gap = (nu * nu - mu * mu) / constants.hbar

    def weight(u):
        return -math.exp(-mu_rate * u) * math.expm1(-gap * u)

    rate = min(mu_rate, nu * nu / constants.hbar)
    return _tail_integral(weight, epsilon, rate, model, constants, rel_tol)
