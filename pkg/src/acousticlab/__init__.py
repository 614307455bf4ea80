"""Numerical laboratory for a velocity-damped acoustic system on a staggered grid."""

from .damping import DampingField, DampingProfile, apply_brinkman, apply_modified, sample_profile
from .decay import DecayFit, analyze, classify, fit_exponential, fit_polynomial, gap_time
from .evolution import (
    EvolutionConfig,
    MidpointStepper,
    Trajectory,
    apply_generator,
    simulate,
    step_midpoint,
)
from .grid import (
    CellField,
    FaceField,
    Grid,
    State,
    build_grid,
    div,
    energy,
    grad,
    inner,
    pack,
    stream_velocity,
    unpack,
    zero_state,
)
from .helmholtz import ConvergenceError, HelmholtzSolver, neumann_poisson, project
from .observability import (
    ObservabilityReport,
    WaveState,
    collar_sweep,
    gramian_constant,
    make_wave_state,
    wave_simulate,
    wave_step,
)
from .spectral import (
    GeneratorMatrix,
    ResolventSample,
    SpectralReport,
    assemble,
    deflate,
    divfree_kernel_basis,
    eigen,
    fit_resolvent_exponent,
    kernel_basis,
    project_H0,
    resolved_band_limit,
    resolvent_norm,
    resolvent_sweep,
)

__version__ = "0.1.0"
