"""Desk-scale simulation and verification toolkit for the 2D damped wave
equation with localized nonlinear damping and disturbance inputs."""

__version__ = "0.1.0"

from .geometry import (
    DomainSpec,
    Grid,
    build_grid,
    gamma_region,
    epsilon_neighborhood,
    check_mgc,
    build_mgc_region,
    build_localization,
    build_cutoffs,
    default_radii,
    smoothstep,
)
from .damping import (
    DampingLaw,
    linear,
    saturating,
    sublinear,
    cubic,
    custom,
    eval_g,
    eval_g_prime,
    verify_law,
    select_p,
    solve_pointwise_implicit,
)
from .disturbance import (
    Channel,
    DisturbanceSpec,
    ZeroTime,
    ExpDecay,
    Pulse,
    GaussianBump,
    EigenmodeField,
    ConstantField,
    eval_d,
    eval_e,
    eval_d_t,
    eval_e_t,
    accumulate_dbar,
    compute_budgets,
)
from .solver import (
    SimConfig,
    WaveState,
    RunRecord,
    InitialRule,
    init_state,
    step,
    run,
    energy,
    dissipation,
    energy_identity_residual,
    solve_poisson,
)
from .analysis import (
    EnergyTrace,
    trace_of,
    fit_decay,
    iss_report,
    gn_theta,
    gn_trajectory_ratio,
    multiplier_terms,
    gronwall_check,
    fit_gronwall_constants,
    generalized_gronwall_bound,
    self_test_generalized_gronwall,
)
from .config import parse_config, ExperimentConfig
from .errors import ConfigError, SolverFailure, LawError
