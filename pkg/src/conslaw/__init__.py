"""conslaw: a numerical laboratory for scalar conservation laws.

Computes entropy solutions of genuinely nonlinear scalar conservation
laws and verifies, at desk scale, the regularity machinery around them:
nonlinearity classification, anisotropic scaling, kinetic entropy
dissipation measures, truncation-ladder oscillation estimates, continuity
outside the jump set, optimal large-time decay, and straight-line
characteristics.
"""

from .errors import (
    ConslawError,
    ConstructionError,
    GeometryError,
    InputError,
    LevelLostError,
    NumericalError,
    StabilityError,
    UnsupportedFluxError,
)
from .fields import ScalarField, Trajectory, field_from_function
from .fluxes import (
    FluxSpec,
    NonlinearityReport,
    estimate_alpha,
    get_flux,
    hormander_order,
    make_burgers,
    make_generalized_burgers,
    make_power,
    make_trig,
    nondegeneracy_constant,
    nonlinearity_measure,
    sign_decomposition,
)
from .solver import (
    cfl_dt,
    exact_decay_solution,
    grid_floor,
    riemann_exact,
    solve,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "ConslawError",
    "ConstructionError",
    "FluxSpec",
    "GeometryError",
    "InputError",
    "LevelLostError",
    "NonlinearityReport",
    "NumericalError",
    "ScalarField",
    "StabilityError",
    "Trajectory",
    "UnsupportedFluxError",
    "cfl_dt",
    "estimate_alpha",
    "exact_decay_solution",
    "field_from_function",
    "get_flux",
    "grid_floor",
    "hormander_order",
    "make_burgers",
    "make_generalized_burgers",
    "make_power",
    "make_trig",
    "nondegeneracy_constant",
    "nonlinearity_measure",
    "riemann_exact",
    "sign_decomposition",
    "solve",
    "step",
    "__version__",
]
