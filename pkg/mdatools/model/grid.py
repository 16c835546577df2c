import pydantic

from .base import BaseModel


class FrequencyGrid(BaseModel):
    """
    Sampling rate and transform length of an acquisition. Every bin index in the
    package is a coordinate on one of these grids.
    """

    sample_rate_hz: float = pydantic.Field(..., gt=0.0)
    fft_size: int = pydantic.Field(..., ge=2)

    @property
    def resolution_hz(self) -> float:
        return self.sample_rate_hz / self.fft_size

    @property
    def nyquist_hz(self) -> float:
        return self.sample_rate_hz / 2

    @property
    def bin_count(self) -> int:
        return self.fft_size // 2 + 1

    def bin_frequency(self, bin_: float) -> float:
        return bin_ * self.resolution_hz
