"""Eigenvalue analysis of the principal matrix.

Bound states are the energies ``-nu^2`` at which an eigenvalue of Phi(nu)
crosses zero.  ``dPhi/dnu`` is the Gram matrix of the functions
``t -> 2 nu t exp(-nu^2 t) K_t(p_i, .)``, hence positive definite, so every
eigenvalue of Phi is strictly increasing in ``nu``.  The ground state is
therefore the unique root of ``lambda_min(Phi(nu))`` and the number of
negative eigenvalues of Phi(nu) counts the bound states below ``-nu^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.optimize as sopt
import scipy.sparse.linalg as sspl

from .errors import AtBoundStateError, ContractViolation, DomainError, NoCrossingError
from .geometry import Configuration, distances_from
from .kernels import free_resolvent_kernel
from .principal import assemble

SYMMETRY_TOL = 1e-12
# Above this size the lowest eigenpair comes from Lanczos iteration.
DENSE_LIMIT = 600
MAX_DOUBLINGS = 60


class Inertia(NamedTuple):
    negative: int
    zero: int
    positive: int


def _check_symmetric(matrix) -> np.ndarray:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolation(f"expected a square matrix, got shape {a.shape}")
    n = len(a)
    step = max(1, 2_000_000 // max(n, 1))
    for lo in range(0, n, step):
        if np.abs(a[lo:lo + step] - a[:, lo:lo + step].T).max(initial=0.0) > SYMMETRY_TOL:
            raise ContractViolation("matrix is not symmetric within 1e-12")
    return a


def _lowest_pair(a: np.ndarray, v0: Optional[np.ndarray] = None):
    n = len(a)
    if n <= DENSE_LIMIT:
        w, v = sla.eigh(a, subset_by_index=[0, 0])
        return float(w[0]), v[:, 0]
    # Shift by a Gershgorin bound so ARPACK's relative tolerance is absolute near 0.
    shift = float(np.abs(a).sum(axis=1).max())
    op = sspl.LinearOperator((n, n), matvec=lambda x: a @ x + shift * x, dtype=float)
    try:
        w, v = sspl.eigsh(op, k=1, which="SA", v0=v0, tol=1e-14, maxiter=20 * n)
    except sspl.ArpackNoConvergence:
        w, v = sla.eigh(a, subset_by_index=[0, 0])
        return float(w[0]), v[:, 0]
    return float(w[0]) - shift, v[:, 0]


def smallest_eigenvalue(matrix) -> float:
    """Smallest eigenvalue of a symmetric matrix.

    Dense LAPACK for ``N <= DENSE_LIMIT``, shifted Lanczos above.

    Raises
    ------
    ContractViolation
        If the matrix is not symmetric within ``1e-12``.
    """
    return _lowest_pair(_check_symmetric(matrix))[0]


def inertia(matrix) -> Inertia:
    """Counts of negative, zero and positive eigenvalues via a Bunch-Kaufman LDL^T.

    By Sylvester's law the inertia of the block-diagonal factor equals that of
    the matrix.
    """
    a = _check_symmetric(matrix)
    if len(a) <= DENSE_LIMIT:
        w = sla.eigvalsh(a)
        neg, zero = int(np.sum(w < 0)), int(np.sum(w == 0))
        return Inertia(neg, zero, len(w) - neg - zero)
    _, d, _ = sla.ldl(a, lower=True)
    diag = np.diag(d)
    sub = np.diag(d, -1)
    neg = zero = 0
    i, n = 0, len(diag)
    while i < n:
        if i + 1 < n and sub[i] != 0.0:
            w = np.linalg.eigvalsh(d[i:i + 2, i:i + 2])
            neg += int(np.sum(w < 0))
            zero += int(np.sum(w == 0))
            i += 2
        else:
            neg += int(diag[i] < 0)
            zero += int(diag[i] == 0)
            i += 1
    return Inertia(neg, zero, n - neg - zero)


@dataclass(frozen=True)
class GroundStateResult:
    """Ground state located as the zero of ``lambda_min(Phi(nu))``.

    Attributes
    ----------
    nu_gr : float
    energy : float
        ``-nu_gr**2``.
    iterations : int
        Number of principal-matrix evaluations, bracketing included.
    bracket : tuple of float
        Tightest ``(nu_lo, nu_hi)`` seen with ``lambda_min < 0 < lambda_min``
        (an end coincides with ``nu_gr`` when the root was hit exactly).
    residual : float
        ``|lambda_min(Phi(nu_gr))|``.
    """

    nu_gr: float
    energy: float
    iterations: int
    bracket: tuple
    residual: float


class _Tracker:
    def __init__(self, config):
        self.config = config
        self.calls = 0
        self.lo = None
        self.hi = None
        self.v = None
        self.last = {}

    def __call__(self, nu):
        self.calls += 1
        a = assemble(self.config, nu).entries
        v0 = self.v if self.v is not None and len(a) > DENSE_LIMIT else None
        lam, self.v = _lowest_pair(a, v0)
        self.last[nu] = lam
        if lam < 0 and (self.lo is None or nu > self.lo[0]):
            self.lo = (nu, lam)
        if lam > 0 and (self.hi is None or nu < self.hi[0]):
            self.hi = (nu, lam)
        return lam


def ground_state(config: Configuration, nu_lo: Optional[float] = None,
                 nu_hi: Optional[float] = None, tol: float = 1e-10) -> GroundStateResult:
    """Ground-state energy of the point-interaction Hamiltonian.

    Parameters
    ----------
    config : Configuration
    nu_lo, nu_hi : float, optional
        Initial bracket.  ``nu_lo`` defaults to ``0.999 * max(mu)``, where
        ``lambda_min`` is negative because the largest-``mu`` diagonal entry
        is.  ``nu_hi`` defaults to ``max(mu_star, 1/d_min)``.  Ends that do
        not bracket are doubled upward (halved downward for ``nu_lo``).
    tol : float
        Relative tolerance on ``nu``.

    Raises
    ------
    NoCrossingError
        If no sign change is found within 60 doublings.
    """
    if not 0 < tol < 1:
        raise DomainError("tol must lie in (0, 1)")
    g = _Tracker(config)
    lo = 0.999 * config.mu_star if nu_lo is None else float(nu_lo)
    hi = max(config.mu_star, 1.0 / config.d_min) if nu_hi is None else float(nu_hi)
    if not (lo > 0 and hi > 0):
        raise DomainError("bracket ends must be positive")
    hi = max(hi, lo)

    def done(nu):
        lam = g.last[nu]
        br = (g.lo[0] if g.lo else nu, g.hi[0] if g.hi else nu)
        return GroundStateResult(nu, -nu * nu, g.calls, br, abs(lam))

    for _ in range(MAX_DOUBLINGS + 1):
        if g(lo) <= 0:
            break
        lo *= 0.5
    else:
        raise NoCrossingError("lambda_min stays positive down to nu = %g" % lo)
    if g.last[lo] == 0:
        return done(lo)
    for _ in range(MAX_DOUBLINGS + 1):
        if g(hi) >= 0:
            break
        hi *= 2.0
    else:
        raise NoCrossingError(
            "lambda_min stays negative up to nu = %g; compute a certificate to bound "
            "the spectrum from below" % hi
        )
    if g.last[hi] == 0:
        return done(hi)
    lo, hi = g.lo[0], g.hi[0]
    root = sopt.brentq(g, lo, hi, xtol=1e-300, rtol=max(tol, 1e-15), maxiter=200)
    if root not in g.last:
        g(root)
    return done(root)


def count_bound_states_below(config: Configuration, nu: float) -> int:
    """Number of bound states with energy below ``-nu**2``."""
    if not nu > 0:
        raise DomainError("nu must be positive")
    return inertia(assemble(config, nu).entries).negative


@dataclass(frozen=True)
class EigenFlow:
    """``lambda_min`` and negative-eigenvalue counts along a grid of ``nu``."""

    nu_grid: np.ndarray
    lambda_min: np.ndarray
    neg_counts: np.ndarray

    @property
    def monotone(self) -> bool:
        """``lambda_min`` nondecreasing and ``neg_counts`` nonincreasing."""
        return bool(np.all(np.diff(self.lambda_min) >= 0) and np.all(np.diff(self.neg_counts) <= 0))


def eigenflow(config: Configuration, nu_grid: Sequence[float]) -> EigenFlow:
    grid = np.asarray(nu_grid, dtype=float)
    if grid.ndim != 1 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise DomainError("nu_grid must be positive and strictly increasing")
    lam = np.empty(len(grid))
    neg = np.empty(len(grid), dtype=int)
    for k, nu in enumerate(grid):
        a = assemble(config, nu).entries
        lam[k] = _lowest_pair(a)[0]
        neg[k] = inertia(a).negative
    return EigenFlow(grid, lam, neg)


@dataclass(frozen=True)
class TruncationStudy:
    """Ground-state energies of nested truncations.

    ``sizes[k]`` centers give ``energies[k]``; ``nu_star`` is the optional
    certificate threshold the energies are compared to.
    """

    sizes: np.ndarray
    energies: np.ndarray
    nu_star: Optional[float] = None

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.energies) <= 0))

    @property
    def certified(self) -> Optional[bool]:
        if self.nu_star is None:
            return None
        return bool(np.all(self.energies > -self.nu_star ** 2))

    def rows(self):
        return list(zip(self.sizes.tolist(), self.energies.tolist()))


def truncation_study(family: Iterable[Configuration], nu_star: Optional[float] = None,
                     tol: float = 1e-10) -> TruncationStudy:
    """Ground states along a nested family of configurations.

    Each configuration must extend the previous one (same model, earlier
    centers as a prefix); otherwise :class:`ContractViolation` is raised.
    """
    sizes, energies = [], []
    prev = None
    prev_nu = None
    for cfg in family:
        if prev is not None and not prev.is_prefix_of(cfg):
            raise ContractViolation(f"configuration of size {len(cfg)} does not extend its predecessor")
        # Adding centers can only lower the ground state, so the previous root seeds the bracket.
        lo = None if prev_nu is None else prev_nu * (1.0 - 1e-9)
        res = ground_state(cfg, nu_lo=lo, tol=tol)
        sizes.append(len(cfg))
        energies.append(res.energy)
        prev, prev_nu = cfg, res.nu_gr
    return TruncationStudy(np.array(sizes), np.array(energies), nu_star)


def resolvent_correction(config: Configuration, nu: float, x, y) -> float:
    """Finite-rank part of the full resolvent kernel at ``E = -nu**2``.

    ``sum_ij G(x, p_i) [Phi^{-1}]_ij G(p_j, y)`` with ``G`` the free resolvent.

    Raises
    ------
    AtBoundStateError
        If Phi(nu) is singular to working precision.
    """
    pm = assemble(config, nu)
    a = pm.entries
    w = sla.eigvalsh(a)
    if np.min(np.abs(w)) <= 1e-12 * max(1.0, np.max(np.abs(w))):
        raise AtBoundStateError(f"Phi({nu}) is singular: -nu^2 is a bound-state energy")
    gx = free_resolvent_kernel(config.model, nu, distances_from(config.model, config.points, x),
                               config.constants)
    gy = free_resolvent_kernel(config.model, nu, distances_from(config.model, config.points, y),
                               config.constants)
    sol = sla.solve(a, gy, assume_a="sym")
    return float(gx @ sol)
