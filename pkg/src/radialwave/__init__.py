"""
radialwave: a pseudospectral laboratory for the defocusing cubic wave
equation in three space dimensions with radial data.

Radial functions are reduced through g = r*u to a 1D Dirichlet problem whose
sine basis diagonalizes the Laplacian exactly, so the linear propagator,
Littlewood-Paley projections, fractional derivatives, and the smoothing
multiplier are all exact frequency-space operations.  On top of that
substrate the package measures the functionals a frequency-calculus proof
manipulates: energy and smoothed-energy conservation, the cubic commutator,
Strichartz and local-energy norms, sharp Huygens support windows, and
scaling invariance of the critical norm.
"""

__version__ = "0.1.0"

from .grid import (
    FOUR_PI,
    GridMismatchError,
    RadialField,
    RadialGrid,
    SpectralField,
    State,
    ball_mass,
    l2_norm,
    l2_pairing,
    make_grid,
    radial_derivative,
    sample_profile,
    support_radius,
    to_physical,
    to_spectral,
    zero_field,
    zero_state,
)
from .multiplier import (
    MultiplierSpec,
    apply_multiplier,
    fractional_derivative,
    i_operator,
    psi_cutoff,
    sobolev_norm,
)
from .evolve import (
    DomainTooSmallError,
    EvolveParams,
    KIRCHHOFF_CONSTANT,
    SolutionOverflowError,
    Trajectory,
    calibrate_kirchhoff_constant,
    duhamel,
    duhamel_kirchhoff_dt_oracle,
    duhamel_kirchhoff_oracle,
    evolve,
    linear_propagate,
    load_checkpoint,
    save_checkpoint,
    step_nonlinear,
)
from .functionals import (
    DiagnosticsRecord,
    NormBundle,
    bilinear_quantities,
    energy,
    local_energy,
    long_time_S,
    modified_energy,
    modified_energy_derivative,
    strichartz_l4,
    write_timeseries,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    run_scenario,
)
