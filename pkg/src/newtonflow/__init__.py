"""Desingularized Newton flows of elliptic functions on the torus.

Build an elliptic function from its zeros and poles, integrate its Newton
flow, locate and classify the equilibria, certify structural stability and
perturb degenerate functions into generic position.
"""

from .efun import (
    Divisor,
    DivisorError,
    EllipticFunction,
    add_constant,
    build,
    build_closed,
    nuclear_divisor,
    recover_zeros,
    sn_divisor,
    validate_divisor,
)
from .equilibria import (
    Circle,
    Equilibrium,
    Parallelogram,
    classify,
    count_by_argument_principle,
    critical_points,
    find_equilibria,
    full_cell,
)
from .flow import FlowField, Trajectory, field_at, integrate, jacobian_at, newton_step, potential
from .lattice import Lattice, LatticeError, canonical_map, congruent, normalize, reduce_basis, scale
from .portrait import Portrait, build_portrait, export_json, export_svg
from .stability import (
    PerturbationConfig,
    StabilityCertificate,
    certify,
    critical_value_screen,
    detect_saddle_connections,
    perturb_to_generic,
    sensitivity,
)
from .weierstrass import PoleError, invariants, weierstrass

__version__ = "0.1.0"
