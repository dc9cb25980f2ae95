"""Subsample time-delay estimation and image-source localization.

The package estimates arrival times of windowed acoustic reflections on
a sample grid, refines them below the sample period with one of five
interpolation methods, and triangulates image-source positions from the
resulting delay differences. A synthetic bench, a measured-data pipeline,
and a CSV-emitting command line sit on top of the core estimators.
"""

from .errors import (
    ConfigError,
    DegenerateDelay,
    EmptySet,
    FormatError,
    GeometryMismatch,
    InsufficientPeaks,
    InvalidFactor,
    NoPeak,
    TdelocError,
)
from .ingest import (
    MeasurementSet,
    downsample,
    estimate_matched_filter,
    evaluate_measurement,
    ground_truth_pipeline,
    load_measurement,
    pick_peaks,
)
from .interp import METHODS, InterpConfig, PeakNeighborhood, refine_peak
from .locate import (
    ArrayGeometry,
    center_toa,
    estimate_position,
    estimate_slowness,
    localization_error,
)
from .scenario import (
    ScenarioConfig,
    SweepSpec,
    place_image_sources,
    run_sweep,
    run_trial,
    synth_sensor_signals,
)
from .signals import SampledSignal, ThiranSpec, apply_fractional_delay
from .tde import estimate_tdoa, estimate_toa, matched_filter, sliding_window

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "ConfigError",
    "DegenerateDelay",
    "EmptySet",
    "FormatError",
    "GeometryMismatch",
    "InsufficientPeaks",
    "InterpConfig",
    "InvalidFactor",
    "METHODS",
    "MeasurementSet",
    "NoPeak",
    "PeakNeighborhood",
    "SampledSignal",
    "ScenarioConfig",
    "SweepSpec",
    "TdelocError",
    "ThiranSpec",
    "apply_fractional_delay",
    "center_toa",
    "downsample",
    "estimate_matched_filter",
    "estimate_position",
    "estimate_slowness",
    "estimate_tdoa",
    "estimate_toa",
    "evaluate_measurement",
    "ground_truth_pipeline",
    "load_measurement",
    "localization_error",
    "matched_filter",
    "pick_peaks",
    "place_image_sources",
    "refine_peak",
    "run_sweep",
    "run_trial",
    "sliding_window",
    "synth_sensor_signals",
    "__version__",
]
