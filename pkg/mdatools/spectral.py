import dataclasses
import logging
import math
import typing as t

import numpy as np
import scipy.fft
import scipy.signal
from numpy.typing import NDArray

from mdatools import model
from mdatools.deviation import DomainError
from mdatools.synthesis import SampleBlock

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True, eq=False)
class Spectrum:
    magnitudes: NDArray[np.float64]
    grid: model.FrequencyGrid
    # One-sided DFT the magnitudes were taken from, when it is known
    coefficients: t.Optional[NDArray[np.complex128]] = None

    def __post_init__(self) -> None:
        if len(self.magnitudes) != self.grid.bin_count:
            raise DomainError(
                f"Spectrum holds {len(self.magnitudes)} bins but the grid has "
                f"{self.grid.bin_count}"
            )
        if not np.all(np.isfinite(self.magnitudes)) or np.any(self.magnitudes < 0):
            raise DomainError("Spectrum magnitudes must be finite and non-negative")
        if self.coefficients is not None and len(self.coefficients) != len(
            self.magnitudes
        ):
            raise DomainError(
                f"Spectrum holds {len(self.coefficients)} coefficients for "
                f"{len(self.magnitudes)} bins"
            )

    @property
    def freqs_hz(self) -> NDArray[np.float64]:
        return np.arange(self.grid.bin_count) * self.grid.resolution_hz

    def magnitude_db(self, floor_db: float = -300.0) -> NDArray[np.float64]:
        peak = self.magnitudes.max(initial=0.0)
        if peak == 0:
            return np.full(len(self.magnitudes), floor_db)
        with np.errstate(divide="ignore"):
            level_db = 20 * np.log10(self.magnitudes / peak)
        return np.maximum(level_db, floor_db)


@dataclasses.dataclass(frozen=True)
class Peak:
    bin: int
    magnitude: float
    refined_offset_bins: t.Optional[float] = None


@dataclasses.dataclass(frozen=True)
class Interpolation:
    offset_bins: float
    degenerate: bool = False


def magnitude_spectrum(
    block: SampleBlock, method: model.TransformMethod = model.TransformMethod.FFT
) -> Spectrum:
    grid = block.grid
    if len(block.samples) != grid.fft_size:
        raise DomainError(
            f"Block holds {len(block.samples)} samples but the grid expects "
            f"{grid.fft_size}"
        )

    if method is model.TransformMethod.FFT:
        coefficients = scipy.fft.rfft(block.samples)
    else:
        # Chirp-z on the unit circle, stepping one DFT bin per output point
        coefficients = scipy.signal.czt(
            block.samples,
            m=grid.bin_count,
            w=np.exp(-2j * np.pi / grid.fft_size),
            a=1.0,
        )

    return Spectrum(np.abs(coefficients), grid, coefficients=coefficients)


def find_peaks(
    spec: Spectrum, rel_threshold_db: float, min_separation_bins: int
) -> t.List[Peak]:
    """
    Interior local maxima within |rel_threshold_db| of the strongest bin, thinned
    greedily from the strongest down so that no two kept peaks are closer than
    min_separation_bins. A bin tied with its right neighbour counts as the peak.
    """
    if rel_threshold_db > 0:
        raise DomainError(f"Relative threshold must be <= 0 dB, got {rel_threshold_db}")
    if min_separation_bins < 1:
        raise DomainError(
            f"Minimum peak separation must be at least 1 bin, got {min_separation_bins}"
        )

    magnitudes = spec.magnitudes
    if len(magnitudes) < 3:
        return []
    strongest = magnitudes.max()
    if strongest <= 0:
        return []

    interior = magnitudes[1:-1]
    is_peak = (interior > magnitudes[:-2]) & (interior >= magnitudes[2:])
    is_peak &= interior >= strongest * 10 ** (rel_threshold_db / 20)
    candidates = np.flatnonzero(is_peak) + 1

    # Strongest first, lower bin first among equals
    ranked = candidates[np.lexsort((candidates, -magnitudes[candidates]))]
    blocked = np.zeros(len(magnitudes), dtype=bool)
    kept = []
    for bin_ in ranked:
        if blocked[bin_]:
            continue
        kept.append(int(bin_))
        low = max(bin_ - min_separation_bins + 1, 0)
        blocked[low : bin_ + min_separation_bins] = True

    logger.debug(
        "Kept %d of %d local maxima above %.1f dB",
        len(kept),
        len(candidates),
        rel_threshold_db,
    )
    return [Peak(bin_, float(magnitudes[bin_])) for bin_ in sorted(kept)]


def quad_interp(
    spec: Spectrum,
    bin_: int,
    scale: model.InterpolationScale = model.InterpolationScale.LINEAR,
) -> Interpolation:
    """
    Fractional offset of the spectral peak from bin_, clamped to half a bin either
    side. LINEAR and LOG take the vertex of the parabola through the three
    magnitudes around bin_. JACOBSEN fits the complex coefficients instead, which
    is exact for a lone rectangular-window tone.
    """
    if not 0 < bin_ < len(spec.magnitudes) - 1:
        raise DomainError(f"Bin {bin_} is not an interior bin of the spectrum")

    if scale is model.InterpolationScale.JACOBSEN:
        return _jacobsen(spec, bin_)

    left, centre, right = map(float, spec.magnitudes[bin_ - 1 : bin_ + 2])
    if scale is model.InterpolationScale.LOG:
        if min(left, centre, right) <= 0:
            return Interpolation(0.0, degenerate=True)
        left, centre, right = math.log(left), math.log(centre), math.log(right)

    curvature = left - 2 * centre + right
    if curvature == 0:
        return Interpolation(0.0, degenerate=True)

    offset = 0.5 * (left - right) / curvature
    return Interpolation(min(max(offset, -0.5), 0.5))


def refine_peaks(
    spec: Spectrum,
    peaks: t.Iterable[Peak],
    scale: model.InterpolationScale = model.InterpolationScale.LINEAR,
) -> t.List[Peak]:
    return [
        dataclasses.replace(
            peak, refined_offset_bins=quad_interp(spec, peak.bin, scale).offset_bins
        )
        for peak in peaks
    ]


def _jacobsen(spec: Spectrum, bin_: int) -> Interpolation:
    if spec.coefficients is None:
        raise DomainError("Complex interpolation needs the spectrum's DFT coefficients")

    left, centre, right = map(complex, spec.coefficients[bin_ - 1 : bin_ + 2])
    denominator = 2 * centre - left - right
    if denominator == 0:
        return Interpolation(0.0, degenerate=True)

    # Bias correction for the finite transform length
    half_bin_rad = math.pi / spec.grid.fft_size
    correction = math.tan(half_bin_rad) / half_bin_rad
    offset = correction * ((left - right) / denominator).real
    return Interpolation(min(max(offset, -0.5), 0.5))
