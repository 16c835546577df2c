import enum
import math
import typing as t

import pydantic

from mdatools import deviation

from .base import BaseModel
from .grid import FrequencyGrid

_FWHM_PER_SIGMA = 2 * math.sqrt(2 * math.log(2))
MAX_DROOP_DB = 3.0


class CombSpec(BaseModel):
    rep_rate_hz: float = pydantic.Field(..., gt=0.0)
    alpha: int = pydantic.Field(..., ge=0)
    epsilon: float = pydantic.Field(..., ge=0.0, lt=1.0)

    @classmethod
    def on_grid(cls, rep_rate_hz: float, grid: FrequencyGrid) -> "CombSpec":
        index = deviation.index_of(rep_rate_hz, grid)
        return cls(
            rep_rate_hz=rep_rate_hz,
            alpha=index.integer_part,
            epsilon=index.fractional_part,
        )

    def matches_grid(self, grid: FrequencyGrid) -> bool:
        indexed_hz = (self.alpha + self.epsilon) * grid.resolution_hz
        return abs(indexed_hz - self.rep_rate_hz) <= 1e-6 * grid.resolution_hz


class PulseKind(enum.Enum):
    IDEAL_COMB = "ideal-comb"
    GAUSSIAN = "gaussian"


class PulseShape(BaseModel):
    kind: PulseKind
    rms_width_s: t.Optional[float] = pydantic.Field(None, gt=0.0)

    @pydantic.root_validator(skip_on_failure=True)
    def _gaussian_has_width(cls, values: t.Dict[str, t.Any]) -> t.Dict[str, t.Any]:
        if values["kind"] is PulseKind.GAUSSIAN and values["rms_width_s"] is None:
            raise ValueError("A gaussian pulse needs rms_width_s")
        return values

    @property
    def fwhm_s(self) -> t.Optional[float]:
        if self.rms_width_s is None:
            return None
        return _FWHM_PER_SIGMA * self.rms_width_s

    def harmonic_coefficient(self, order: int, rep_rate_hz: float) -> float:
        if self.kind is PulseKind.IDEAL_COMB:
            return 1.0

        assert self.rms_width_s is not None
        return math.exp(-2 * (math.pi * order * rep_rate_hz * self.rms_width_s) ** 2)

    def droop_db(self, comb: CombSpec, grid: FrequencyGrid) -> float:
        """Envelope loss of the highest comb harmonic below the grid's Nyquist"""
        top_order = math.floor(grid.nyquist_hz / comb.rep_rate_hz)
        return -20 * math.log10(self.harmonic_coefficient(top_order, comb.rep_rate_hz))

    def check_droop(self, comb: CombSpec, grid: FrequencyGrid) -> None:
        droop_db = self.droop_db(comb, grid)
        if droop_db >= MAX_DROOP_DB:
            raise ValueError(
                f"Pulse envelope droops {droop_db:.2f} dB across the band; "
                f"must stay below {MAX_DROOP_DB} dB"
            )
