"""
Simulated acquisition: multi-tone input, comb presampling on the mixer and
additive noise calibrated to a spectral-domain SNR.

Mixing a tone A·cos(2πft + φ) with the comb 1 + 2·Σ c_n·cos(2πn·f_c·(t − t0))
gives lines at f ± n·f_c with amplitude A·c_n and phase φ ∓ 2πn·f_c·t0. Lines
falling below DC fold back with their phase negated. Only lines inside
(0, f_s/2) reach the ADC.
"""
import dataclasses
import enum
import logging
import math
import typing as t

import numpy as np
import scipy.fft
from numpy.typing import NDArray

from mdatools import model
from mdatools.deviation import DomainError

logger = logging.getLogger(__name__)

_MIN_SAMPLES_PER_FWHM = 4


class ConfigurationError(ValueError):
    pass


class LineSign(enum.Enum):
    TONE = 0
    SUM = 1
    DIFFERENCE = -1


@dataclasses.dataclass(frozen=True)
class MixedLine:
    tone_index: int
    sign: LineSign
    order: int
    freq_hz: float
    amplitude: float
    phase_rad: float
    folded: bool = False


@dataclasses.dataclass(frozen=True, eq=False)
class SampleBlock:
    samples: NDArray[np.float64]
    grid: model.FrequencyGrid

    def __post_init__(self) -> None:
        if len(self.samples) != self.grid.fft_size:
            raise DomainError(
                f"Block holds {len(self.samples)} samples but the grid expects "
                f"{self.grid.fft_size}"
            )


def synth_tones(
    tones: t.Sequence[model.ToneSpec], grid: model.FrequencyGrid
) -> SampleBlock:
    for tone in tones:
        _check_below_nyquist(tone.freq_hz, grid)

    return SampleBlock(
        _render_lines(
            grid,
            [tone.freq_hz for tone in tones],
            [tone.amplitude for tone in tones],
            [tone.phase_rad for tone in tones],
        ),
        grid,
    )


def mixed_line_table(
    tones: t.Sequence[model.ToneSpec],
    comb: model.CombSpec,
    pulse: model.PulseShape,
    grid: model.FrequencyGrid,
    comb_offset_s: float = 0.0,
) -> t.List[MixedLine]:
    _check_droop(pulse, comb, grid)

    lines = []
    for tone_index, tone in enumerate(tones):
        lines.append(
            MixedLine(
                tone_index=tone_index,
                sign=LineSign.TONE,
                order=0,
                freq_hz=tone.freq_hz,
                amplitude=tone.amplitude
                * pulse.harmonic_coefficient(0, comb.rep_rate_hz),
                phase_rad=tone.phase_rad,
            )
        )

        top_order = math.floor((tone.freq_hz + grid.nyquist_hz) / comb.rep_rate_hz) + 1
        for order in range(1, top_order + 1):
            amplitude = tone.amplitude * pulse.harmonic_coefficient(
                order, comb.rep_rate_hz
            )
            comb_phase = 2 * math.pi * order * comb.rep_rate_hz * comb_offset_s
            for sign in (LineSign.SUM, LineSign.DIFFERENCE):
                freq_hz = tone.freq_hz + sign.value * order * comb.rep_rate_hz
                phase_rad = tone.phase_rad - sign.value * comb_phase
                folded = freq_hz < 0
                if folded:
                    freq_hz, phase_rad = -freq_hz, -phase_rad

                if 0 < freq_hz < grid.nyquist_hz:
                    lines.append(
                        MixedLine(
                            tone_index=tone_index,
                            sign=sign,
                            order=order,
                            freq_hz=freq_hz,
                            amplitude=amplitude,
                            phase_rad=phase_rad,
                            folded=folded,
                        )
                    )

    logger.debug("Mixed %d tones into %d in-band lines", len(tones), len(lines))
    return lines


def comb_offset(comb: model.CombSpec, seed: t.Optional[int]) -> float:
    """Time of the first comb pulse, uniform over one period when seeded"""
    if seed is None:
        return 0.0
    return float(np.random.default_rng(seed).uniform(0.0, 1.0 / comb.rep_rate_hz))


def presample(
    tones: t.Sequence[model.ToneSpec],
    comb: model.CombSpec,
    pulse: model.PulseShape,
    grid: model.FrequencyGrid,
    method: model.PresampleMethod = model.PresampleMethod.ANALYTIC,
    oversample_factor: int = 16,
    seed: t.Optional[int] = None,
) -> SampleBlock:
    for tone in tones:
        _check_below_nyquist(tone.freq_hz, grid)

    offset_s = comb_offset(comb, seed)
    if method is model.PresampleMethod.ANALYTIC:
        lines = mixed_line_table(tones, comb, pulse, grid, comb_offset_s=offset_s)
        samples = _render_lines(
            grid,
            [line.freq_hz for line in lines],
            [line.amplitude for line in lines],
            [line.phase_rad for line in lines],
        )
    else:
        samples = _presample_oversampled(
            tones, comb, pulse, grid, oversample_factor, offset_s
        )

    return SampleBlock(samples, grid)


def noise_sigma(
    reference_amplitude: float, fft_size: int, spectral_snr_db: float
) -> float:
    """
    Standard deviation of white noise whose mean bin power sits spectral_snr_db
    below the peak bin power (A·N/2)² of a tone of the reference amplitude
    """
    return reference_amplitude * math.sqrt(
        fft_size / (4 * 10 ** (spectral_snr_db / 10))
    )


def add_noise(
    block: SampleBlock,
    noise: model.NoiseSpec,
    reference_amplitude: t.Optional[float] = None,
) -> SampleBlock:
    if reference_amplitude is None:
        reference_amplitude = noise.reference_amplitude
    if reference_amplitude <= 0:
        raise DomainError(
            f"Reference amplitude must be positive, got {reference_amplitude}"
        )
    if not noise.enabled:
        return block

    sigma = noise_sigma(reference_amplitude, block.grid.fft_size, noise.spectral_snr_db)
    rng = np.random.default_rng(noise.seed)
    return SampleBlock(
        block.samples + rng.normal(0.0, sigma, size=block.grid.fft_size),
        block.grid,
    )


def _render_lines(
    grid: model.FrequencyGrid,
    freqs_hz: t.Sequence[float],
    amplitudes: t.Sequence[float],
    phases_rad: t.Sequence[float],
) -> NDArray[np.float64]:
    sample_index = np.arange(grid.fft_size, dtype=np.float64)
    samples = np.zeros(grid.fft_size, dtype=np.float64)
    for freq_hz, amplitude, phase_rad in zip(freqs_hz, amplitudes, phases_rad):
        cycles_per_sample = freq_hz / grid.sample_rate_hz
        samples += amplitude * np.cos(
            2 * np.pi * cycles_per_sample * sample_index + phase_rad
        )
    return samples


def _presample_oversampled(
    tones: t.Sequence[model.ToneSpec],
    comb: model.CombSpec,
    pulse: model.PulseShape,
    grid: model.FrequencyGrid,
    factor: int,
    offset_s: float,
) -> NDArray[np.float64]:
    if factor < 2:
        raise ConfigurationError(
            f"Oversampling factor must be at least 2, got {factor}"
        )
    _check_droop(pulse, comb, grid)

    dense_rate_hz = factor * grid.sample_rate_hz
    fwhm_s = pulse.fwhm_s
    if fwhm_s is not None and fwhm_s * dense_rate_hz < _MIN_SAMPLES_PER_FWHM:
        raise ConfigurationError(
            f"A {fwhm_s:.3e} s pulse spans fewer than {_MIN_SAMPLES_PER_FWHM} "
            f"samples at {dense_rate_hz:.3e} Sa/s; raise the oversampling factor"
        )

    times_s = np.arange(factor * grid.fft_size, dtype=np.float64) / dense_rate_hz
    carrier = np.zeros_like(times_s)
    for tone in tones:
        carrier += tone.amplitude * np.cos(
            2 * np.pi * tone.freq_hz * times_s + tone.phase_rad
        )
    mixed = carrier * _pulse_train(pulse, comb, times_s - offset_s, dense_rate_hz / 2)

    # Ideal brick-wall at f_s/2: keep the ADC band of the dense spectrum and
    # resynthesise it directly at the ADC rate
    band = scipy.fft.rfft(mixed)[: grid.bin_count].copy()
    if grid.fft_size % 2 == 0:
        band[-1] = 0.0
    logger.debug(
        "Oversampled presampling: %d dense samples decimated by %d",
        len(times_s),
        factor,
    )
    return scipy.fft.irfft(band, n=grid.fft_size) / factor


def _pulse_train(
    pulse: model.PulseShape,
    comb: model.CombSpec,
    times_s: NDArray[np.float64],
    band_limit_hz: float,
) -> NDArray[np.float64]:
    """
    Comb normalised so its Fourier series reads 1 + 2·Σ c_n·cos(2πn·f_c·t)
    """
    if pulse.kind is model.PulseKind.IDEAL_COMB:
        # Every harmonic below the dense Nyquist, summed in closed form
        harmonics = math.floor(band_limit_hz / comb.rep_rate_hz)
        half_angle = np.pi * comb.rep_rate_hz * times_s
        denominator = np.sin(half_angle)
        near_pulse = np.abs(denominator) < 1e-12
        safe_denominator = np.where(near_pulse, 1.0, denominator)
        return np.where(
            near_pulse,
            2.0 * harmonics + 1.0,
            np.sin((2 * harmonics + 1) * half_angle) / safe_denominator,
        )

    assert pulse.rms_width_s is not None
    period_s = 1.0 / comb.rep_rate_hz
    # Pulses are far narrower than the period, so only the nearest one counts
    nearest_offset_s = np.mod(times_s + period_s / 2, period_s) - period_s / 2
    sigma = pulse.rms_width_s
    return np.exp(-(nearest_offset_s**2) / (2 * sigma**2)) / (
        comb.rep_rate_hz * sigma * math.sqrt(2 * math.pi)
    )


def _check_below_nyquist(freq_hz: float, grid: model.FrequencyGrid) -> None:
    if not 0 < freq_hz < grid.nyquist_hz:
        raise DomainError(
            f"Tone at {freq_hz} Hz is outside (0, {grid.nyquist_hz}) Hz of the grid"
        )


def _check_droop(
    pulse: model.PulseShape, comb: model.CombSpec, grid: model.FrequencyGrid
) -> None:
    try:
        pulse.check_droop(comb, grid)
    except ValueError as e:
        raise ConfigurationError(str(e)) from e
