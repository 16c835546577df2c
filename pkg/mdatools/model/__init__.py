from .acquisition import NoiseSpec, ToneSpec
from .comb import CombSpec, PulseKind, PulseShape
from .config import (
    Estimator,
    ExperimentConfig,
    InterpolationScale,
    PeakConfig,
    PresampleMethod,
    TransformMethod,
)
from .grid import FrequencyGrid

__all__ = [
    "CombSpec",
    "Estimator",
    "ExperimentConfig",
    "FrequencyGrid",
    "InterpolationScale",
    "NoiseSpec",
    "PeakConfig",
    "PresampleMethod",
    "PulseKind",
    "PulseShape",
    "ToneSpec",
    "TransformMethod",
]
