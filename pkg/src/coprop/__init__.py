"""Phase-space simulation of a quantum pulse co-propagating with classical
WDM channels in lossy nonlinear fiber.

The package integrates a pair of independent complex fields whose ensemble
averages reproduce normally ordered observables: deterministic mean-field
runs when vacuum and thermal noise are switched off, full stochastic
trajectories when they are on.  On top of the integrator sit channel-plan
bookkeeping, 16-QAM launch synthesis, band demultiplexing with
common-random-number crosstalk estimates, and a sweep harness with
deterministic artifacts.
"""

from .demux import (
    BandFilter,
    CrosstalkResult,
    EnsembleIntensity,
    bandpass_extract,
    build_band_filter,
    crosstalk_ratio,
    mean_intensity,
    quantum_band_filter,
    rms_width,
)
from .engine import (
    EngineConfig,
    MidpointDivergenceError,
    NonFiniteFieldError,
    PropagationRecord,
    deterministic_mode,
    propagate,
    scaled_photon_number,
)
from .harness import (
    ConfigError,
    RunConfig,
    RunDirectoryError,
    SweepSpec,
    load_config,
    run_ensemble,
    run_sweep,
)
from .noise import NoiseConfig, thermal_occupation
from .params import (
    GridPolicy,
    GridSizeError,
    PhysicalParams,
    ScaledUnits,
    SimulationGrid,
    WdmPlan,
    attenuation_from_db_per_km,
    build_grid,
    channel_offset,
    channel_wavelength,
    derive_scaled_units,
    field_to_photon_amplitude,
    itu_frequency,
    walkoff_time,
)
from .signals import (
    LaunchSpec,
    QamConfig,
    ScaledFieldPair,
    compose_launch,
    make_launch_spec,
    qam16_waveform,
    quantum_pulse,
    root_raised_cosine,
)

__version__ = "0.1.0"

__all__ = [
    "BandFilter",
    "ConfigError",
    "CrosstalkResult",
    "EngineConfig",
    "EnsembleIntensity",
    "GridPolicy",
    "GridSizeError",
    "LaunchSpec",
    "MidpointDivergenceError",
    "NoiseConfig",
    "NonFiniteFieldError",
    "PhysicalParams",
    "PropagationRecord",
    "QamConfig",
    "RunConfig",
    "RunDirectoryError",
    "ScaledFieldPair",
    "ScaledUnits",
    "SimulationGrid",
    "SweepSpec",
    "WdmPlan",
    "attenuation_from_db_per_km",
    "bandpass_extract",
    "build_band_filter",
    "build_grid",
    "channel_offset",
    "channel_wavelength",
    "compose_launch",
    "crosstalk_ratio",
    "derive_scaled_units",
    "deterministic_mode",
    "field_to_photon_amplitude",
    "itu_frequency",
    "load_config",
    "make_launch_spec",
    "mean_intensity",
    "propagate",
    "qam16_waveform",
    "quantum_band_filter",
    "quantum_pulse",
    "rms_width",
    "root_raised_cosine",
    "run_ensemble",
    "run_sweep",
    "scaled_photon_number",
    "thermal_occupation",
    "walkoff_time",
]
