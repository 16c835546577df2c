import enum
import typing as t

import pydantic

from .acquisition import NoiseSpec, ToneSpec
from .base import BaseModel
from .comb import CombSpec, PulseShape
from .grid import FrequencyGrid


class Estimator(enum.Enum):
    MDA = "mda"
    MDA_QUAD = "mda-quad"


class PresampleMethod(enum.Enum):
    ANALYTIC = "analytic"
    OVERSAMPLED = "oversampled"


class InterpolationScale(enum.Enum):
    LINEAR = "linear"
    LOG = "log"
    JACOBSEN = "jacobsen"


class TransformMethod(enum.Enum):
    FFT = "fft"
    CHIRP_Z = "chirp-z"


class PeakConfig(BaseModel):
    rel_threshold_db: float = pydantic.Field(-40.0, le=0.0)
    min_separation_bins: int = pydantic.Field(10, ge=1)


class ExperimentConfig(BaseModel):
    grid: FrequencyGrid
    comb: CombSpec
    tones: t.List[ToneSpec] = pydantic.Field(..., min_items=1)
    noise: NoiseSpec
    pulse: PulseShape
    order_count: int = pydantic.Field(..., ge=1)
    estimator: Estimator = Estimator.MDA
    method: PresampleMethod = PresampleMethod.ANALYTIC
    oversample_factor: int = pydantic.Field(16, ge=2)
    peaks: PeakConfig = pydantic.Field(default_factory=PeakConfig)
    interpolation: InterpolationScale = InterpolationScale.LINEAR
    transform: TransformMethod = TransformMethod.FFT
    cluster_tolerance_bins: float = pydantic.Field(1.0, gt=0.0)

    @pydantic.root_validator(pre=True)
    def _index_comb_on_grid(cls, values: t.Dict[str, t.Any]) -> t.Dict[str, t.Any]:
        """
        A comb given only by its repetition rate gets its (alpha, epsilon)
        decomposition from the configured grid
        """
        comb = values.get("comb")
        if not isinstance(comb, dict) or "alpha" in comb or "epsilon" in comb:
            return values

        try:
            grid = FrequencyGrid.parse_obj(values.get("grid"))
        except pydantic.ValidationError:
            # Reported by field validation
            return values

        if "rep_rate_hz" not in comb:
            return values

        return {**values, "comb": CombSpec.on_grid(comb["rep_rate_hz"], grid)}

    @pydantic.root_validator(skip_on_failure=True)
    def _consistent_with_grid(cls, values: t.Dict[str, t.Any]) -> t.Dict[str, t.Any]:
        grid: FrequencyGrid = values["grid"]
        comb: CombSpec = values["comb"]
        pulse: PulseShape = values["pulse"]

        if not comb.matches_grid(grid):
            raise ValueError(
                f"Comb indices ({comb.alpha} + {comb.epsilon}) do not reproduce "
                f"{comb.rep_rate_hz} Hz on a {grid.resolution_hz} Hz grid"
            )

        for tone in values["tones"]:
            if tone.freq_hz >= grid.nyquist_hz:
                raise ValueError(
                    f"Tone at {tone.freq_hz} Hz is not below the grid Nyquist "
                    f"frequency {grid.nyquist_hz} Hz"
                )

        pulse.check_droop(comb, grid)

        return values

    def with_noise_seed(self, seed: int) -> "ExperimentConfig":
        return self.copy(update={"noise": self.noise.copy(update={"seed": seed})})

    def without_noise(self) -> "ExperimentConfig":
        return self.copy(
            update={"noise": self.noise.copy(update={"spectral_snr_db": float("inf")})}
        )

    def with_method(self, method: PresampleMethod) -> "ExperimentConfig":
        return self.copy(update={"method": method})

    def tone_priors_hz(self) -> t.List[float]:
        return [tone.located_hz for tone in self.tones]
