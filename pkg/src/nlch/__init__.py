"""Pseudo-spectral solvers for nonlocal conserved phase-field dynamics.

Periodic and no-flux (neumann) boundary conditions, tabulated interaction
kernels, first-order stabilized time stepping, energy and mass
diagnostics, and binary-image inpainting through a fidelity term.
"""

from .grid import (
    Grid,
    GridError,
    ScalarField,
    SpectralField,
    VectorField,
    boundary_normal_flux,
    constant_field,
    divergence_of_product,
    gradient,
    inner,
    inverse_laplacian_zero_mean,
    laplacian,
    make_grid,
    norm_l2,
    read_snapshot,
    transform,
    write_snapshot,
)
from .physics import (
    HypothesisEntry,
    HypothesisReport,
    Kernel,
    PhysicsError,
    Potential,
    build_kernel,
    check_hypotheses,
    chemical_potential,
    chemical_potential_local,
    convolve,
    energy,
    potential_eval,
    sharp_norm,
)
from .stepper import (
    DivergedError,
    ModelSpec,
    RunResult,
    SimConfig,
    StabilityReport,
    State,
    StepperError,
    make_velocity,
    mass_closed_form_cho,
    run,
    spinodal_initial,
    stability_limits,
    step,
)
from .diagnostics import (
    CSV_FIELDS,
    DependenceReport,
    DiagRecord,
    DiagnosticsError,
    PatternMetrics,
    ProbeReport,
    ResidualSeries,
    StateTrail,
    TimeSeries,
    continuous_dependence,
    dissipativity_probe,
    energy_equality_residual,
    pattern_metrics,
    read_diagnostics_csv,
    record,
    write_diagnostics_csv,
)
from .inpaint import (
    FidelitySpec,
    ImageGray,
    InpaintError,
    InpaintParams,
    InpaintResult,
    Mask,
    build_fidelity,
    inpaint,
    read_mask,
    read_pgm,
    threshold,
    write_pgm,
)

__version__ = "0.1.0"
