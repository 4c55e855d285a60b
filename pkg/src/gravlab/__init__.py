"""Desk-scale gravimeter simulation and analysis toolkit.

Simulates a four-pulse atom interferometer driven by smooth
amplitude-shaped beamsplitters, with optional spin-squeezed input
states, and provides the estimation chain from raw shot logs to a
gravity value, squeezing factors, and Allan deviations.
"""

from .analysis import (
    AllanSeries,
    DeltaPSeries,
    FringeFit,
    GravityEstimate,
    PhaseNoiseBudget,
    SqueezingEstimate,
    allan_deviation,
    delta_p,
    estimate_g,
    fit_fringe,
    fringe_intersection,
    gravity_from_delta_p,
    metrological_squeezing,
    phase_noise_budget,
    squeezing_from_pairs,
)
from .config import AppConfig, config_hash, load_config, parse_config
from .errors import (
    CalibrationError,
    ConfigError,
    DataError,
    DomainError,
    FitError,
    GravlabError,
    NumericalError,
)
from .pulses import (
    PulseShape,
    TwoLevelState,
    accumulated_area,
    averaged_transfer,
    envelope,
    evolve_two_level,
    pulse_sensitivity,
    transfer_probability,
)
from .sensitivity import (
    PhysicalConstants,
    SensitivityProfile,
    SequenceTiming,
    gravity_sensitivity,
    net_area,
    phase_signal,
    scale_factor,
)
from .shots import (
    CampaignConfig,
    NoiseConfig,
    ShotRecord,
    read_shot_log,
    run_campaign,
    simulate_shot,
    write_shot_log,
)
from .squeezing import (
    FockSpace,
    HamiltonianParams,
    SqueezingModel,
    build_hamiltonians,
    build_operators,
    calibrate_model,
    coherent_model,
    evolve,
    mean_occupations,
    mode_transform,
    occupation_distribution,
    squeezed_vacuum_stats,
    squeezing_parameter,
    tomography_variance,
    vacuum_state,
)

__version__ = "0.1.0"

__all__ = [
    "AllanSeries",
    "AppConfig",
    "CalibrationError",
    "CampaignConfig",
    "ConfigError",
    "DataError",
    "DeltaPSeries",
    "DomainError",
    "FitError",
    "FockSpace",
    "FringeFit",
    "GravityEstimate",
    "GravlabError",
    "HamiltonianParams",
    "NoiseConfig",
    "NumericalError",
    "PhaseNoiseBudget",
    "PhysicalConstants",
    "PulseShape",
    "SensitivityProfile",
    "SequenceTiming",
    "ShotRecord",
    "SqueezingEstimate",
    "SqueezingModel",
    "TwoLevelState",
    "accumulated_area",
    "allan_deviation",
    "averaged_transfer",
    "build_hamiltonians",
    "build_operators",
    "calibrate_model",
    "coherent_model",
    "config_hash",
    "delta_p",
    "envelope",
    "estimate_g",
    "evolve",
    "evolve_two_level",
    "fit_fringe",
    "fringe_intersection",
    "gravity_from_delta_p",
    "gravity_sensitivity",
    "load_config",
    "mean_occupations",
    "metrological_squeezing",
    "mode_transform",
    "net_area",
    "occupation_distribution",
    "parse_config",
    "phase_noise_budget",
    "phase_signal",
    "pulse_sensitivity",
    "read_shot_log",
    "run_campaign",
    "scale_factor",
    "simulate_shot",
    "squeezed_vacuum_stats",
    "squeezing_from_pairs",
    "squeezing_parameter",
    "tomography_variance",
    "transfer_probability",
    "vacuum_state",
    "write_shot_log",
    "__version__",
]
