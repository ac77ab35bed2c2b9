"""Heat kernels, free resolvent kernels and heat-kernel upper bounds.

The heat kernel solves ``-(hbar^2/2m) Lap K = -hbar dK/dt``, so in the
plane ``K_t(d) = (2m / 4 pi hbar t) exp(-2m d^2 / 4 hbar t)``.  The free
resolvent at ``E = -nu^2`` is its Laplace transform
``G(d) = int_0^inf (dt/hbar) exp(-nu^2 t/hbar) K_t(d)``.

On the hyperbolic plane the Laplace transform has the closed form
``G = (m / pi hbar^2) Q_{s-1}(cosh(sqrt(kappa) d))`` with the Legendre function
of the second kind and ``s = (1 + sqrt(1 + 8 m nu^2 / hbar^2 kappa)) / 2``,
which is what :func:`hyperbolic_resolvent_kernel` evaluates.  The literal
t-quadrature of the heat kernel is kept in :func:`laplace_transform`.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import poch

from .errors import DivergenceError, DomainError, UnsupportedBackendError
from .geometry import NATURAL, Flat, GenericBounds, Hyperbolic, ManifoldModel, PhysicalConstants
from .special import AccuracyBudget, bessel_k0, integrate

# Hypergeometric series is used while exp(-2 rho) stays below this.
_SERIES_MAX_Z = 0.9
_SERIES_EPS = 1e-17


def _log_sinh(y):
    # log(sinh y) for y > 0 without overflow or loss at small y.
    return y + math.log(-math.expm1(-2.0 * y)) - math.log(2.0)


def flat_heat_kernel(t, dist, constants: PhysicalConstants = NATURAL):
    """Gaussian heat kernel of the plane."""
    t = np.asarray(t, dtype=float)
    dist = np.asarray(dist, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("t must be positive")
    if np.any(dist < 0):
        raise DomainError("dist must be >= 0")
    dt = constants.diffusivity * t
    out = np.exp(-dist * dist / (4.0 * dt)) / (4.0 * math.pi * dt)
    return out[()] if out.ndim == 0 else out


def hyperbolic_heat_kernel(t: float, dist: float, kappa: float,
                           constants: PhysicalConstants = NATURAL,
                           rel_tol: float = 1e-9) -> float:
    """Heat kernel of the hyperbolic plane of curvature ``-kappa``.

    With ``tau = (hbar kappa / 2m) t`` and ``rho = sqrt(kappa) d``::

        K = sqrt(2) kappa exp(-tau/4) / (4 pi tau)^{3/2}
            * int_rho^inf xi exp(-xi^2 / 4 tau) / sqrt(cosh xi - cosh rho) dxi

    The inverse square-root endpoint singularity is removed by
    ``xi = rho + s^2``; the Gaussian factor ``exp(-rho^2 / 4 tau)`` is pulled
    out of the integral.
    """
    if not kappa > 0:
        raise DomainError("hyperbolic heat kernel needs kappa > 0")
    if not t > 0:
        raise DomainError("t must be positive")
    if dist < 0:
        raise DomainError("dist must be >= 0")
    tau = constants.diffusivity * kappa * t
    rho = math.sqrt(kappa) * dist
    c = 1.0 / (4.0 * tau)

    def f(s):
        if s == 0.0:
            return 0.0 if rho == 0.0 else 2.0 * rho / math.exp(0.5 * _log_sinh(rho))
        s2 = s * s
        xi = rho + s2
        log_den = 0.5 * (math.log(2.0) + _log_sinh(rho + 0.5 * s2) + _log_sinh(0.5 * s2))
        return 2.0 * s * xi * math.exp(-c * (2.0 * rho * s2 + s2 * s2) - log_den)

    # s^2 at which the Gaussian exponent reaches a given size
    def s_at(expo):
        return math.sqrt(-rho + math.sqrt(rho * rho + 4.0 * tau * expo))

    budget = AccuracyBudget(rel_tol=rel_tol, abs_tol=0.0)
    edges = [0.0, s_at(0.5), s_at(4.0), s_at(20.0), s_at(60.0)]
    total = sum(integrate(f, lo, hi, budget) for lo, hi in zip(edges[:-1], edges[1:]))
    log_pref = (math.log(math.sqrt(2.0) * kappa) - 0.25 * tau - 1.5 * math.log(4.0 * math.pi * tau)
                - c * rho * rho)
    return math.exp(log_pref) * total


def heat_kernel(model: ManifoldModel, t, dist, constants: PhysicalConstants = NATURAL):
    """Dispatch to the exact heat kernel of ``model``."""
    if isinstance(model, Flat):
        return flat_heat_kernel(t, dist, constants)
    if isinstance(model, Hyperbolic):
        return hyperbolic_heat_kernel(t, dist, model.kappa, constants)
    raise UnsupportedBackendError("no exact heat kernel for GenericBounds models")


def heat_kernel_upper_gaussian(t, dist, A: float = 2.0, B: float = 5.0,
                               constants: PhysicalConstants = NATURAL):
    """Cartan-Hadamard upper bound ``A / (4 pi (hbar/2m) t) exp(-2m d^2 / B hbar t)``."""
    if not B > 4:
        raise DomainError("B must be strictly larger than 4")
    if not A > 0:
        raise DomainError("A must be positive")
    t = np.asarray(t, dtype=float)
    dist = np.asarray(dist, dtype=float)
    dt = constants.diffusivity * t
    out = A / (4.0 * math.pi * dt) * np.exp(-dist * dist / (B * dt))
    return out[()] if out.ndim == 0 else out


def heat_kernel_upper_generic(t: float, dist: float, params: GenericBounds,
                              constants: PhysicalConstants = NATURAL) -> float:
    """Off-diagonal upper bound on a generic noncompact surface.

    ``const / (4 pi min(hbar t/2m, rho^2)) (1 + 2m d^2/hbar t)^2
    exp(-lambda t/hbar - 2m d^2 / 4 hbar t)`` with ``const = C`` for
    ``t <= 2m rho^2 / hbar`` and ``const = D`` beyond.
    """
    if not isinstance(params, GenericBounds):
        raise UnsupportedBackendError("heat_kernel_upper_generic needs a GenericBounds model")
    if not t > 0:
        raise DomainError("t must be positive")
    dt = constants.diffusivity * t
    rho2 = params.rho**2
    const = params.C if dt <= rho2 else params.D
    ratio = dist * dist / dt
    return (const / (4.0 * math.pi * min(dt, rho2)) * (1.0 + ratio) ** 2
            * math.exp(-params.lambda_gap * t / constants.hbar - 0.25 * ratio))


def _check_resolvent_args(nu, dist):
    if np.any(~(np.asarray(nu) > 0)):
        raise DomainError("nu must be positive")
    dist = np.asarray(dist, dtype=float)
    if np.any(dist < 0):
        raise DomainError("dist must be >= 0")
    if np.any(dist == 0):
        raise DivergenceError("the free resolvent kernel diverges at zero distance")
    return dist


def flat_resolvent_kernel(nu: float, dist, constants: PhysicalConstants = NATURAL):
    """``(m / pi hbar^2) K_0(sqrt(2m) nu d / hbar)``."""
    dist = _check_resolvent_args(nu, dist)
    arg = math.sqrt(2.0 * constants.mass) * nu / constants.hbar * dist
    out = constants.green_prefactor * np.asarray(bessel_k0(arg))
    return out[()] if out.ndim == 0 else out


def _legendre_order(nu, kappa, constants):
    # s = (1 + b)/2 with b = sqrt(1 + 8 m nu^2 / (hbar^2 kappa))
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * nu * nu / (constants.kinetic * kappa)))


def hyperbolic_resolvent_quadrature(nu: float, dist: float, kappa: float,
                                    constants: PhysicalConstants = NATURAL,
                                    rel_tol: float = 1e-11) -> float:
    """Hyperbolic free resolvent from its single-integral representation.

    ``G = (m / sqrt(2) pi hbar^2) int_rho^inf exp(-b xi/2) / sqrt(cosh xi - cosh rho) dxi``,
    obtained by carrying out the t-integration of the heat kernel in closed
    form; evaluated with ``xi = rho + u^2``.
    """
    _check_resolvent_args(nu, dist)
    s = _legendre_order(nu, kappa, constants)
    half_b = s - 0.5
    rho = math.sqrt(kappa) * dist

    def f(u):
        if u == 0.0:
            return 2.0 / math.exp(0.5 * _log_sinh(rho))
        u2 = u * u
        log_den = 0.5 * (math.log(2.0) + _log_sinh(rho + 0.5 * u2) + _log_sinh(0.5 * u2))
        return 2.0 * u * math.exp(-half_b * u2 - log_den)

    u_max = math.sqrt(60.0 / half_b)
    pts = sorted({min(math.sqrt(rho), u_max / 2), math.sqrt(1.0 / half_b)})
    edges = [0.0] + [p for p in pts if p < u_max] + [u_max]
    budget = AccuracyBudget(rel_tol=rel_tol, abs_tol=0.0)
    total = sum(integrate(f, lo, hi, budget) for lo, hi in zip(edges[:-1], edges[1:]))
    return constants.green_prefactor / math.sqrt(2.0) * math.exp(-half_b * rho) * total


def _hyp_series(s, z):
    # 2F1(1/2, s; s + 1/2; z) for an array z <= _SERIES_MAX_Z, truncated per element.
    nterms = np.ceil(np.log(_SERIES_EPS * (1.0 - z)) / np.log(np.maximum(z, 1e-300)))
    nterms = np.clip(nterms, 1, None).astype(int)
    order = np.argsort(-nterms, kind="stable")
    zs = z[order]
    counts = nterms[order]
    total = np.ones_like(zs)
    term = np.ones_like(zs)
    kmax = int(counts[0]) if len(counts) else 0
    for k in range(kmax):
        # counts is sorted descending: the first n elements still need term k+1
        n = int(np.searchsorted(-counts, -(k + 1), side="right"))
        if n == 0:
            break
        ratio = (k + 0.5) * (s + k) / ((s + 0.5 + k) * (k + 1.0))
        term[:n] *= ratio * zs[:n]
        total[:n] += term[:n]
    out = np.empty_like(total)
    out[order] = total
    return out


def hyperbolic_resolvent_kernel(nu: float, dist, kappa: float,
                                constants: PhysicalConstants = NATURAL):
    """Free resolvent kernel of the hyperbolic plane, vectorised over ``dist``.

    ``G = (m / pi hbar^2) sqrt(pi) Gamma(s)/Gamma(s+1/2) e^{-s rho}
    2F1(1/2, s; s+1/2; e^{-2 rho})``, with the hypergeometric series summed
    directly while ``e^{-2 rho} <= 0.9``.  Closer pairs fall back to
    :func:`hyperbolic_resolvent_quadrature`.
    """
    if not kappa > 0:
        raise DomainError("hyperbolic resolvent needs kappa > 0")
    dist_arr = _check_resolvent_args(nu, dist)
    flat = np.atleast_1d(dist_arr).ravel()
    s = _legendre_order(nu, kappa, constants)
    rho = math.sqrt(kappa) * flat
    z = np.exp(-2.0 * rho)
    out = np.empty_like(flat)
    near = z > _SERIES_MAX_Z
    far = ~near
    if np.any(far):
        pref = constants.green_prefactor * math.sqrt(math.pi) / poch(s, 0.5)
        out[far] = pref * np.exp(-s * rho[far]) * _hyp_series(s, z[far])
    for i in np.flatnonzero(near):
        out[i] = hyperbolic_resolvent_quadrature(nu, flat[i], kappa, constants)
    return out[0] if np.ndim(dist_arr) == 0 else out.reshape(np.shape(dist_arr))


def laplace_transform(kernel, nu: float, dist: float, constants: PhysicalConstants = NATURAL,
                      rel_tol: float = 1e-9) -> float:
    """``int_0^inf (dt/hbar) exp(-nu^2 t / hbar) kernel(t)`` by quadrature in ``log t``.

    ``kernel(t)`` must be dominated by the flat Gaussian kernel at distance
    ``dist`` (true for every Cartan-Hadamard heat kernel).  The range is cut
    where that dominating integrand has fallen by ``exp(-45)`` below its peak,
    on both sides.
    """
    if not (nu > 0 and dist > 0):
        raise DomainError("laplace_transform needs nu > 0 and dist > 0")
    hbar = constants.hbar
    rate = nu * nu / hbar
    spread = dist * dist / (4.0 * constants.diffusivity)
    t_peak = math.sqrt(spread / rate)
    peak = 2.0 * math.sqrt(spread * rate)
    cut = peak + 45.0
    # rate t = cut and spread / t = cut bracket the mass
    u_lo = math.log(spread / cut)
    u_hi = math.log(cut / rate)

    def f(u):
        t = math.exp(u)
        return t / hbar * math.exp(-rate * t) * kernel(t)

    w = 1.0 / math.sqrt(1.0 + peak)
    u0 = math.log(t_peak)
    pts = [u0 - 4 * w, u0 - w, u0, u0 + w, u0 + 4 * w]
    edges = [u_lo] + [p for p in pts if u_lo < p < u_hi] + [u_hi]
    budget = AccuracyBudget(rel_tol=rel_tol, abs_tol=0.0)
    return sum(integrate(f, lo, hi, budget) for lo, hi in zip(edges[:-1], edges[1:]))


def free_resolvent_kernel(model: ManifoldModel, nu: float, dist,
                          constants: PhysicalConstants = NATURAL, method: str = "closed"):
    """Kernel of ``(H_0 + nu^2)^{-1}`` between points ``dist`` apart.

    ``method="closed"`` uses the closed forms (vectorised); ``method="laplace"``
    integrates the heat kernel over t directly (scalar ``dist`` only).
    """
    if isinstance(model, GenericBounds) or not isinstance(model, (Flat, Hyperbolic)):
        raise UnsupportedBackendError("no free resolvent for GenericBounds models")
    if method == "laplace":
        _check_resolvent_args(nu, dist)
        return laplace_transform(lambda t: float(heat_kernel(model, t, dist, constants)),
                                 nu, float(dist), constants)
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    if isinstance(model, Flat):
        return flat_resolvent_kernel(nu, dist, constants)
    return hyperbolic_resolvent_kernel(nu, dist, model.kappa, constants)
