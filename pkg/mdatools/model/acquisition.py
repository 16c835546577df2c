import math
import typing as t

import pydantic

from .base import BaseModel


class ToneSpec(BaseModel):
    freq_hz: float = pydantic.Field(..., gt=0.0)
    amplitude: float = pydantic.Field(..., gt=0.0)
    phase_rad: float
    # Coarse location used to pick this tone's alias out of the presampled spectrum
    prior_hz: t.Optional[float] = pydantic.Field(None, gt=0.0)

    @property
    def located_hz(self) -> float:
        return self.freq_hz if self.prior_hz is None else self.prior_hz


class NoiseSpec(BaseModel):
    spectral_snr_db: float
    seed: int = pydantic.Field(..., ge=0, lt=2**64)
    reference_amplitude: float = pydantic.Field(..., gt=0.0)

    @pydantic.validator("spectral_snr_db")
    def _finite_or_disabled(cls, spectral_snr_db: float) -> float:
        if math.isnan(spectral_snr_db) or spectral_snr_db == -math.inf:
            raise ValueError("Spectral SNR must be finite, or +inf to disable noise")
        return spectral_snr_db

    @classmethod
    def disabled(cls, seed: int = 0, reference_amplitude: float = 1.0) -> "NoiseSpec":
        return cls(
            spectral_snr_db=math.inf,
            seed=seed,
            reference_amplitude=reference_amplitude,
        )

    @property
    def enabled(self) -> bool:
        return math.isfinite(self.spectral_snr_db)
