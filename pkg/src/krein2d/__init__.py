"""Bound states of point interactions on two-dimensional manifolds.

Renormalized point interactions are handled through the principal matrix
Phi(-nu^2) of the resolvent formula: bound states sit where one of its
eigenvalues vanishes.  The package evaluates Phi on the Euclidean and
hyperbolic planes, solves for ground states, and computes certified lower
bounds ``E_gr > -nu*^2`` from heat-kernel and packing estimates.
"""

from .bounds import (
    Certificate,
    VerificationReport,
    certificate_ch,
    certificate_generic,
    diagonal_lower_bound,
    holmgren_norm,
    neumann_gate,
    offdiag_norm_bound_generic,
    offdiag_rowsum_bound_ch,
    offdiag_term_generic,
    verify_certificate,
)
from .configio import parse_config_file, write_config_file
from .errors import *  # noqa: F401,F403
from .geometry import (
    NATURAL,
    Configuration,
    Flat,
    GenericBounds,
    Hyperbolic,
    PhysicalConstants,
    distance,
    hex_lattice,
    hyperbolic_level_packing,
    poisson_disk_sample,
)
from .kernels import free_resolvent_kernel, heat_kernel
from .principal import PrincipalMatrix, assemble, phi_diagonal, phi_offdiagonal, split
from .spectrum import count_bound_states_below, eigenflow, ground_state, smallest_eigenvalue, truncation_study

__version__ = "0.1.0"
