"""Geometric backends, center configurations and packing counts.

Two computable backends are supported: the Euclidean plane and the
hyperbolic plane of constant sectional curvature ``-kappa`` in Poincare
disk coordinates.  A third model, :class:`GenericBounds`, only carries the
constants entering the heat-kernel upper bound and the packing count of a
generic noncompact surface; it has no coordinates and no distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import ClassVar, Union

import numpy as np
from scipy.spatial.distance import pdist

from .errors import (
    ConfigurationError,
    DomainError,
    NoPairsError,
    UnsupportedBackendError,
)

# Poincare-disk points must stay this far inside the unit circle.
DISK_MARGIN = 1e-12
# Relative slack when checking generated configurations against d_min.
DMIN_RTOL = 1e-9


@dataclass(frozen=True)
class PhysicalConstants:
    """Planck constant and particle mass.

    The defaults are natural units with ``hbar**2 / (2 m) = 1``.
    """

    hbar: float = 1.0
    mass: float = 0.5

    def __post_init__(self):
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise DomainError(f"hbar must be positive and finite, got {self.hbar}")
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise DomainError(f"mass must be positive and finite, got {self.mass}")

    @property
    def diffusivity(self) -> float:
        """hbar / 2m, the diffusion constant of the heat semigroup."""
        return self.hbar / (2.0 * self.mass)

    @property
    def kinetic(self) -> float:
        """hbar**2 / 2m, the energy scale attached to one inverse length squared."""
        return self.hbar**2 / (2.0 * self.mass)

    @property
    def green_prefactor(self) -> float:
        """m / (pi hbar**2), the prefactor of the 2D free resolvent."""
        return self.mass / (math.pi * self.hbar**2)

    def describe(self) -> str:
        return f"hbar={self.hbar!r}, mass={self.mass!r}"


NATURAL = PhysicalConstants()


@dataclass(frozen=True)
class Flat:
    """The Euclidean plane."""

    kind: ClassVar[str] = "flat"

    @property
    def kappa(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Hyperbolic:
    """Hyperbolic plane with sectional curvature ``-kappa`` (Poincare disk)."""

    kappa: float
    kind: ClassVar[str] = "hyperbolic"

    def __post_init__(self):
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise DomainError(f"hyperbolic model needs kappa > 0, got {self.kappa}")


@dataclass(frozen=True)
class GenericBounds:
    """Constants describing a generic noncompact surface.

    Parameters
    ----------
    kappa : float
        Lower curvature bound ``Sec >= -kappa`` used by the diagonal estimate.
    C, D : float
        Prefactors of the off-diagonal heat-kernel bound for short and long
        times respectively.
    rho : float
        Radius of the geodesic balls on which the exponential map is a
        diffeomorphism; separates the short- and long-time regimes.
    n_star : int
        Largest number of first-level neighbours of any center.
    lambda_gap : float
        Bottom of the spectrum of the Laplacian.
    A, B : float
        Gaussian upper-bound constants, ``B > 4``.
    """

    kappa: float = 0.0
    C: float = 1.0
    D: float = 1.0
    rho: float = 1.0
    n_star: int = 6
    lambda_gap: float = 0.0
    A: float = 2.0
    B: float = 5.0
    kind: ClassVar[str] = "generic"

    def __post_init__(self):
        if self.kappa < 0:
            raise DomainError("kappa must be >= 0")
        if self.C < 0 or self.D < 0:
            raise DomainError("C and D must be non-negative")
        if not self.rho > 0:
            raise DomainError("rho must be positive")
        if int(self.n_star) != self.n_star or self.n_star < 2:
            raise DomainError("n_star must be an integer >= 2")
        if self.lambda_gap < 0:
            raise DomainError("lambda_gap must be >= 0")
        if not self.A > 0:
            raise DomainError("A must be positive")
        if not self.B > 4:
            raise DomainError("B must be strictly larger than 4")


ManifoldModel = Union[Flat, Hyperbolic, GenericBounds]


def require_geometric(model: ManifoldModel) -> None:
    """Raise unless ``model`` has coordinates and a distance function."""
    if not isinstance(model, (Flat, Hyperbolic)):
        raise UnsupportedBackendError(
            f"{type(model).__name__} has no coordinates; only bound and "
            "certificate operations are available"
        )


def check_point(model: ManifoldModel, p) -> np.ndarray:
    """Return ``p`` as a float array of shape (2,), validated for ``model``."""
    require_geometric(model)
    arr = np.asarray(p, dtype=float)
    if arr.shape != (2,) or not np.all(np.isfinite(arr)):
        raise DomainError(f"a point is a pair of finite reals, got {p!r}")
    if isinstance(model, Hyperbolic) and arr @ arr >= 1.0 - DISK_MARGIN:
        raise DomainError(f"point {tuple(arr)} is not inside the Poincare disk")
    return arr


def _disk_weights(points: np.ndarray) -> np.ndarray:
    r2 = np.einsum("ij,ij->i", points, points)
    return 1.0 - r2


def distance(model: ManifoldModel, p, q) -> float:
    """Geodesic distance between two points.

    In the disk, ``d = (1/sqrt(kappa)) arccosh(1 + 2|p-q|^2/((1-|p|^2)(1-|q|^2)))``,
    evaluated in the cancellation-free form ``2 asinh(|p-q| / sqrt(w_p w_q))``.
    """
    p = check_point(model, p)
    q = check_point(model, q)
    chord = math.hypot(p[0] - q[0], p[1] - q[1])
    if isinstance(model, Flat):
        return chord
    w = math.sqrt((1.0 - p @ p) * (1.0 - q @ q))
    return 2.0 * math.asinh(chord / w) / math.sqrt(model.kappa)


def distances_from(model: ManifoldModel, points: np.ndarray, q) -> np.ndarray:
    """Distances from ``q`` to each row of ``points``."""
    q = check_point(model, q)
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    chord = np.hypot(points[:, 0] - q[0], points[:, 1] - q[1])
    if isinstance(model, Flat):
        return chord
    w = np.sqrt(_disk_weights(points) * (1.0 - q @ q))
    return 2.0 * np.arcsinh(chord / w) / math.sqrt(model.kappa)


def pair_distances(model: ManifoldModel, points: np.ndarray) -> np.ndarray:
    """Condensed vector of all pairwise distances, ordered as ``np.triu_indices(N, 1)``."""
    require_geometric(model)
    points = np.asarray(points, dtype=float)
    chord = pdist(points)
    if isinstance(model, Flat):
        return chord
    n = len(points)
    iu, ju = np.triu_indices(n, 1)
    w = _disk_weights(points)
    chord /= np.sqrt(w[iu] * w[ju])
    return 2.0 * np.arcsinh(chord, out=chord) / math.sqrt(model.kappa)


def from_polar(model: ManifoldModel, radius: float, angle: float) -> np.ndarray:
    """Point at geodesic distance ``radius`` from the origin in direction ``angle``."""
    require_geometric(model)
    if isinstance(model, Flat):
        r = radius
    else:
        r = math.tanh(0.5 * math.sqrt(model.kappa) * radius)
    return np.array([r * math.cos(angle), r * math.sin(angle)])


def offset(model: ManifoldModel, p, radius: float, angle: float) -> np.ndarray:
    """Exponential map: move ``radius`` from ``p`` along direction ``angle``.

    On the disk the displaced origin point is carried to ``p`` by the
    Moebius isometry ``z -> (z + p) / (1 + conj(p) z)``.
    """
    step = from_polar(model, radius, angle)
    if isinstance(model, Flat):
        return np.asarray(p, dtype=float) + step
    z = complex(step[0], step[1])
    a = complex(p[0], p[1])
    w = (z + a) / (1.0 + a.conjugate() * z)
    return np.array([w.real, w.imag])


@dataclass(frozen=True, eq=False)
class Configuration:
    """Interaction centers with their bound-state scales.

    Parameters
    ----------
    model : Flat or Hyperbolic
    points : array_like, shape (N, 2)
        Cartesian coordinates (flat) or disk coordinates (hyperbolic).
    mus : array_like, shape (N,)
        Bound-state scale ``mu_i > 0`` of each isolated center; the isolated
        center binds at energy ``-mu_i**2``.
    d_min : float
        Certified lower bound on all pairwise distances.  Verified at
        construction up to a relative slack of ``1e-9``.
    constants : PhysicalConstants
    """

    model: ManifoldModel
    points: np.ndarray
    mus: np.ndarray
    d_min: float
    constants: PhysicalConstants = field(default=NATURAL)

    def __post_init__(self):
        require_geometric(self.model)
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        mus = np.array(self.mus, dtype=float).reshape(-1)
        if len(pts) == 0:
            raise ConfigurationError("a configuration needs at least one center")
        if len(mus) != len(pts):
            raise ConfigurationError(f"{len(pts)} points but {len(mus)} mu values")
        if not (self.d_min > 0 and math.isfinite(self.d_min)):
            raise ConfigurationError(f"d_min must be positive, got {self.d_min}")
        bad = np.flatnonzero(~(mus > 0) | ~np.isfinite(mus))
        if bad.size:
            raise ConfigurationError(f"center {bad[0]}: mu must be positive, got {mus[bad[0]]}")
        for i, p in enumerate(pts):
            try:
                check_point(self.model, p)
            except DomainError as exc:
                raise DomainError(f"center {i}: {exc}") from None
        pts.setflags(write=False)
        mus.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "mus", mus)
        if len(pts) > 1:
            dmin = self.pair_distances.min()
            if dmin < self.d_min * (1.0 - DMIN_RTOL):
                k = int(np.argmin(self.pair_distances))
                i, j = np.triu_indices(len(pts), 1)
                raise ConfigurationError(
                    f"centers {i[k]} and {j[k]} are {float(dmin)!r} apart, below d_min={self.d_min!r}"
                )

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return (
            self.model == other.model
            and self.constants == other.constants
            and self.d_min == other.d_min
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.mus, other.mus)
        )

    __hash__ = None

    @property
    def mu_star(self) -> float:
        return float(self.mus.max())

    @cached_property
    def pair_distances(self) -> np.ndarray:
        return pair_distances(self.model, self.points)

    def distance_matrix(self) -> np.ndarray:
        n = len(self)
        out = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        out[iu] = self.pair_distances
        out.T[iu] = self.pair_distances
        return out

    def prefix(self, n: int) -> "Configuration":
        """The first ``n`` centers, keeping ``d_min``."""
        if not 1 <= n <= len(self):
            raise DomainError(f"prefix length must be in 1..{len(self)}")
        return Configuration(self.model, self.points[:n], self.mus[:n], self.d_min, self.constants)

    def is_prefix_of(self, other: "Configuration") -> bool:
        n = len(self)
        return (
            self.model == other.model
            and n <= len(other)
            and np.array_equal(self.points, other.points[:n])
            and np.array_equal(self.mus, other.mus[:n])
        )

    def with_mus(self, mus) -> "Configuration":
        mus = np.broadcast_to(np.asarray(mus, dtype=float), (len(self),))
        return Configuration(self.model, self.points, mus, self.d_min, self.constants)


def min_pairwise_distance(config: Configuration) -> float:
    """Exact minimum over all pairs of centers."""
    if len(config) < 2:
        raise NoPairsError("a single center has no pairwise distance")
    return float(config.pair_distances.min())


def _hex_ring(level: int):
    # Axial coordinates of the hexagonal ring at hex-distance `level`.
    if level == 0:
        return [(0, 0)]
    steps = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)]
    q, r = -level, level
    out = []
    for dq, dr in steps:
        for _ in range(level):
            out.append((q, r))
            q, r = q + dq, r + dr
    return out


def hex_lattice(d_min: float, levels: int, mu: float = 1.0,
                constants: PhysicalConstants = NATURAL) -> Configuration:
    """Triangular lattice points within ``levels`` hexagonal rings of the origin.

    Centers are ordered ring by ring, so the lattice with fewer levels is a
    prefix of the one with more.  Ring ``l`` holds ``6 l`` points and the
    total is the centered hexagonal number ``1 + 3 l (l + 1)``.
    """
    if not d_min > 0:
        raise DomainError("d_min must be positive")
    if levels < 0:
        raise DomainError("levels must be >= 0")
    axial = [qr for lev in range(levels + 1) for qr in _hex_ring(lev)]
    qr = np.array(axial, dtype=float)
    pts = np.column_stack([d_min * (qr[:, 0] + 0.5 * qr[:, 1]),
                           d_min * (math.sqrt(3.0) / 2.0) * qr[:, 1]])
    return Configuration(Flat(), pts, np.full(len(pts), mu), d_min, constants)


def hex_ring_index(config_size: int) -> np.ndarray:
    """Ring label of each center of a :func:`hex_lattice` of ``config_size`` points."""
    labels = [0]
    lev = 1
    while len(labels) < config_size:
        labels.extend([lev] * (6 * lev))
        lev += 1
    return np.array(labels[:config_size])


def level_angle(kappa: float, d_min: float, level: int) -> float:
    """Angle at the center subtending two level-``level`` points ``d_min`` apart.

    Uses the isosceles half-angle form ``2 arcsin(sinh(s d/2) / sinh(s l d))``,
    ``s = sqrt(kappa)``, which stays accurate when the angle is tiny.
    """
    if level < 1:
        raise DomainError("level must be >= 1")
    if kappa < 0:
        raise DomainError("kappa must be >= 0")
    if kappa == 0:
        ratio = 1.0 / (2.0 * level)
    else:
        x = math.sqrt(kappa) * d_min
        ratio = math.sinh(0.5 * x) / math.sinh(x * level)
    return 4.0 * math.atan(ratio / (1.0 + math.sqrt((1.0 - ratio) * (1.0 + ratio))))


def level_count(kappa: float, d_min: float, level: int) -> int:
    """Number of equally spaced points fitting on the level circle."""
    if level == 0:
        return 1
    # absolute slack so that exact fits such as the flat hexagon survive rounding
    return int(math.floor(2.0 * math.pi / level_angle(kappa, d_min, level) + 1e-9))


def hyperbolic_level_packing(kappa: float, d_min: float, levels: int, mu: float = 1.0,
                             constants: PhysicalConstants = NATURAL) -> Configuration:
    """Greedy level-by-level packing around a center of the hyperbolic plane.

    Level ``l`` places the largest number of equally spaced points on the
    geodesic circle of radius ``l * d_min`` whose neighbours are at least
    ``d_min`` apart.  Points of distinct levels are automatically separated by
    at least ``d_min`` because their distances from the center differ by a
    multiple of ``d_min``.
    """
    if not d_min > 0:
        raise DomainError("d_min must be positive")
    if levels < 0:
        raise DomainError("levels must be >= 0")
    model = Hyperbolic(kappa)
    pts = [np.zeros(2)]
    for lev in range(1, levels + 1):
        n = level_count(kappa, d_min, lev)
        r = math.tanh(0.5 * math.sqrt(kappa) * lev * d_min)
        theta = 2.0 * math.pi * np.arange(n) / n
        pts.extend(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
    pts = np.array(pts)
    return Configuration(model, pts, np.full(len(pts), mu), d_min, constants)


def poisson_disk_sample(model: ManifoldModel, region_radius: float, d_min: float, seed: int,
                        constants: PhysicalConstants = NATURAL, mu: float = 1.0,
                        attempts: int = 30) -> Configuration:
    """Bridson-style blue-noise sample inside the geodesic ball ``region_radius``.

    The origin is always a center.  Candidates are drawn in the annulus
    ``[d_min, 2 d_min]`` around an active center through the exponential map,
    using a Philox counter-based generator keyed by ``seed``.
    """
    require_geometric(model)
    if not d_min > 0:
        raise DomainError("d_min must be positive")
    if region_radius < d_min:
        raise DomainError("region_radius must be >= d_min")
    rng = np.random.Generator(np.random.Philox(seed))
    origin = np.zeros(2)
    pts = [origin]
    active = [0]
    while active:
        k = int(rng.integers(len(active)))
        base = pts[active[k]]
        arr = np.array(pts)
        for _ in range(attempts):
            r = d_min * (1.0 + rng.random())
            theta = 2.0 * math.pi * rng.random()
            cand = offset(model, base, r, theta)
            if isinstance(model, Hyperbolic) and cand @ cand >= 1.0 - 1e-9:
                continue
            if distances_from(model, origin[None, :], cand)[0] > region_radius:
                continue
            if distances_from(model, arr, cand).min() >= d_min:
                pts.append(cand)
                active.append(len(pts) - 1)
                break
        else:
            active.pop(k)
    return Configuration(model, np.array(pts), np.full(len(pts), mu), d_min, constants)


def comparison_angle(kappa: float, side_a: float, side_b: float, side_c: float) -> float:
    """Angle between sides ``a`` and ``b`` (opposite ``c``) of a model-space triangle.

    Uses the half-angle form of the law of cosines,
    ``sin^2(alpha/2) = S(s-a) S(s-b) / (S(a) S(b))`` with ``S = sinh(sqrt(kappa) .)``
    (``S = identity`` when ``kappa = 0``), which stays accurate as
    ``kappa -> 0`` where the cosine form cancels catastrophically.
    """
    if kappa < 0:
        raise DomainError("kappa must be >= 0")
    a, b, c = float(side_a), float(side_b), float(side_c)
    if min(a, b, c) <= 0:
        raise DomainError("triangle sides must be positive")
    tol = 1e-12 * (a + b + c)
    if c > a + b + tol or a > b + c + tol or b > a + c + tol:
        raise DomainError(f"sides ({a}, {b}, {c}) violate the triangle inequality")
    s = 0.5 * (a + b + c)
    sa, sb = max(s - a, 0.0), max(s - b, 0.0)
    if kappa == 0:
        ratio = sa * sb / (a * b)
    else:
        k = math.sqrt(kappa)
        ratio = math.sinh(k * sa) * math.sinh(k * sb) / (math.sinh(k * a) * math.sinh(k * b))
    return 2.0 * math.asin(min(1.0, math.sqrt(ratio)))


def comparison_angle_cosine(kappa: float, side_a: float, side_b: float, side_c: float) -> float:
    """Same angle from the plain law of cosines (reference form, poor as kappa -> 0)."""
    if kappa == 0:
        cos_alpha = (side_a**2 + side_b**2 - side_c**2) / (2 * side_a * side_b)
    else:
        k = math.sqrt(kappa)
        cos_alpha = (math.cosh(k * side_a) * math.cosh(k * side_b) - math.cosh(k * side_c)) / (
            math.sinh(k * side_a) * math.sinh(k * side_b))
    return math.acos(max(-1.0, min(1.0, cos_alpha)))


def packing_count_bound_exact(kappa: float, d_min: float, level: int) -> float:
    """``pi / arcsin(sinh(sqrt(kappa) d/2) / sinh(sqrt(kappa) d l))``.

    ``kappa = 0`` gives the flat limit ``pi / arcsin(1 / (2 l))``.
    """
    if level < 1:
        raise DomainError("level must be >= 1")
    if kappa < 0:
        raise DomainError("kappa must be >= 0")
    if kappa == 0:
        ratio = 1.0 / (2.0 * level)
    else:
        x = math.sqrt(kappa) * d_min
        ratio = math.sinh(0.5 * x) / math.sinh(x * level)
    # arcsin via the half-angle arctangent: correctly rounded at ratio = 1/2.
    arcsin = 2.0 * math.atan(ratio / (1.0 + math.sqrt((1.0 - ratio) * (1.0 + ratio))))
    return math.pi / arcsin


def packing_count_bound_relaxed(kappa: float, d_min: float, level: int) -> float:
    """``2 pi l sech(sqrt(kappa) d/4) exp(sqrt(kappa) d l)``."""
    if level < 1:
        raise DomainError("level must be >= 1")
    if kappa < 0:
        raise DomainError("kappa must be >= 0")
    x = math.sqrt(kappa) * d_min
    return 2.0 * math.pi * level * math.exp(x * level) / math.cosh(0.25 * x)


def packing_count_bound_generic(n_star: int, level: int) -> float:
    """Replica count ``n_star ** l``."""
    if level < 1:
        raise DomainError("level must be >= 1")
    return float(n_star) ** level
