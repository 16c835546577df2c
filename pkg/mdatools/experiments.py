import concurrent.futures
import dataclasses
import itertools
import logging
import math
import typing as t

import numpy as np
import pandas as pd

from mdatools import deviation, estimation, model, spectral, synthesis, utils
from mdatools.deviation import DomainError
from mdatools.estimation import EstimationFailure

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["delta", "dev1_bins", "devavg_bins"]
TRIAL_COLUMNS = ["trial", "seed", "tone", "freq_hz", "avg_deviation_hz", "failure"]


@dataclasses.dataclass(frozen=True)
class SweepRow:
    delta: float
    dev1_bins: float
    devavg_bins: float


@dataclasses.dataclass(frozen=True)
class SweepResult:
    epsilon: float
    order_count: int
    rows: t.List[SweepRow]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [dataclasses.astuple(row) for row in self.rows], columns=SWEEP_COLUMNS
        )

    @property
    def max_abs_dev1_bins(self) -> float:
        return max((abs(row.dev1_bins) for row in self.rows), default=0.0)

    @property
    def max_abs_devavg_bins(self) -> float:
        return max((abs(row.devavg_bins) for row in self.rows), default=0.0)


@dataclasses.dataclass(frozen=True)
class ToneOutcome:
    tone_index: int
    tone: model.ToneSpec
    nyquist_zone: int
    prediction: estimation.DeviationPrediction
    estimate: t.Optional[estimation.MdaEstimate] = None
    failure: t.Optional[str] = None

    @property
    def avg_deviation_hz(self) -> t.Optional[float]:
        return None if self.estimate is None else self.estimate.avg_deviation_hz


@dataclasses.dataclass(frozen=True)
class ChainResult:
    config: model.ExperimentConfig
    spectrum: spectral.Spectrum
    peaks: t.List[spectral.Peak]
    tones: t.List[ToneOutcome]

    @property
    def failures(self) -> t.List[str]:
        return [outcome.failure for outcome in self.tones if outcome.failure]


@dataclasses.dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int
    estimates: t.List[t.Optional[estimation.MdaEstimate]]
    failures: t.List[t.Optional[str]]

    @property
    def avg_deviations_hz(self) -> t.List[t.Optional[float]]:
        return [
            None if estimate is None else estimate.avg_deviation_hz
            for estimate in self.estimates
        ]


@dataclasses.dataclass(frozen=True)
class ToneStatistics:
    tone_index: int
    freq_hz: float
    rms_hz: float
    mean_hz: float
    max_abs_hz: float
    trials: int
    failures: int


@dataclasses.dataclass(frozen=True)
class MonteCarloSummary:
    config: model.ExperimentConfig
    base_seed: int
    trials: t.List[TrialResult]
    tones: t.List[ToneStatistics]

    def to_frame(self) -> pd.DataFrame:
        return _trial_frame(self.config, self.trials)


def run_delta_sweep(epsilon: float, order_count: int, steps: int) -> SweepResult:
    if steps < 2:
        raise DomainError(f"A sweep needs at least 2 steps, got {steps}")

    rows = []
    for step in range(steps):
        delta = step / (steps - 1)
        rows.append(
            SweepRow(
                delta=delta,
                dev1_bins=deviation.delta_single(delta),
                devavg_bins=deviation.delta_mda(delta, epsilon, order_count),
            )
        )
    return SweepResult(epsilon=epsilon, order_count=order_count, rows=rows)


def run_full_chain(config: model.ExperimentConfig, strict: bool = True) -> ChainResult:
    """
    Presample, digitise and estimate every configured tone. With strict set, a
    tone the estimator cannot recover raises EstimationFailure; otherwise the
    failure is recorded on that tone's outcome.
    """
    predictions = [
        estimation.predict_deviation(
            tone.freq_hz, config.comb, config.grid, config.order_count
        )
        for tone in config.tones
    ]
    for tone in config.tones:
        gap_bins = estimation.mirror_gap_bins(tone.freq_hz, config.comb, config.grid)
        if gap_bins < config.peaks.min_separation_bins:
            logger.warning(
                "Tone at %.1f Hz lies %.1f bins from its mirrored lines; peaks "
                "closer than %d bins cannot both be kept",
                tone.freq_hz,
                gap_bins,
                config.peaks.min_separation_bins,
            )

    logger.info("Presampling %d tones (%s)", len(config.tones), config.method.value)
    block = synthesis.presample(
        config.tones,
        config.comb,
        config.pulse,
        config.grid,
        method=config.method,
        oversample_factor=config.oversample_factor,
        seed=utils.derive_seed(config.noise.seed, "comb"),
    )
    block = synthesis.add_noise(block, config.noise)

    spectrum = spectral.magnitude_spectrum(block, method=config.transform)
    peaks = spectral.find_peaks(
        spectrum, config.peaks.rel_threshold_db, config.peaks.min_separation_bins
    )
    if config.estimator is model.Estimator.MDA_QUAD:
        peaks = spectral.refine_peaks(spectrum, peaks, config.interpolation)
    logger.info("Found %d spectral peaks", len(peaks))

    try:
        clusters = estimation.group_by_cluster(
            estimation.associate_orders(
                peaks,
                config.comb,
                config.grid,
                config.order_count,
                priors_hz=config.tone_priors_hz(),
                tolerance_bins=config.cluster_tolerance_bins,
            )
        )
        association_failure = None
    except EstimationFailure as e:
        if strict:
            raise
        clusters, association_failure = {}, str(e)

    outcomes = []
    for tone_index, (tone, prediction) in enumerate(zip(config.tones, predictions)):
        outcome = ToneOutcome(
            tone_index=tone_index,
            tone=tone,
            nyquist_zone=deviation.nyquist_zone(tone.freq_hz, config.comb),
            prediction=prediction,
        )
        zones = clusters.get(tone_index)
        if zones is None:
            failure = association_failure or (
                f"No cluster of {config.order_count} orders found for the tone "
                f"at {tone.freq_hz} Hz"
            )
            if strict:
                raise EstimationFailure(failure)
            outcomes.append(dataclasses.replace(outcome, failure=failure))
            continue

        estimate = _estimate(config, spectrum, zones, tone)
        outcomes.append(dataclasses.replace(outcome, estimate=estimate))

    return ChainResult(config=config, spectrum=spectrum, peaks=peaks, tones=outcomes)


def run_monte_carlo(
    config: model.ExperimentConfig,
    trials: int,
    base_seed: int,
    workers: int = 1,
) -> MonteCarloSummary:
    """
    Repeat the chain with per-trial seeds derived from (base_seed, trial) and
    reduce per-tone statistics in trial order, so the summary does not depend on
    scheduling or on the number of workers.
    """
    if trials < 1:
        raise DomainError(f"At least one trial is required, got {trials}")
    if workers < 1:
        raise DomainError(f"At least one worker is required, got {workers}")

    seeds = [utils.derive_seed(base_seed, trial) for trial in range(trials)]
    if workers == 1:
        results = list(map(_run_trial, itertools.repeat(config), range(trials), seeds))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(
                executor.map(
                    _run_trial,
                    itertools.repeat(config),
                    range(trials),
                    seeds,
                    chunksize=max(1, trials // (4 * workers)),
                )
            )

    # Only a trial that lost every tone counts as failed
    if all(estimate is None for result in results for estimate in result.estimates):
        raise EstimationFailure(f"All {trials} trials failed: {results[0].failures}")

    frame = _trial_frame(config, results)
    statistics = [
        _tone_statistics(tone_index, tone, frame[frame["tone"] == tone_index])
        for tone_index, tone in enumerate(config.tones)
    ]
    for stats in statistics:
        logger.info(
            "Tone %d: RMS %.1f Hz over %d trials (%d failed)",
            stats.tone_index,
            stats.rms_hz,
            stats.trials,
            stats.failures,
        )
    return MonteCarloSummary(
        config=config, base_seed=base_seed, trials=results, tones=statistics
    )


def _estimate(
    config: model.ExperimentConfig,
    spectrum: spectral.Spectrum,
    zones: t.List[estimation.ZoneMeasurement],
    tone: model.ToneSpec,
) -> estimation.MdaEstimate:
    if config.estimator is model.Estimator.MDA_QUAD:
        return estimation.mda_quad_estimate(
            spectrum,
            zones,
            config.comb,
            truth_hz=tone.freq_hz,
            scale=config.interpolation,
        )
    return estimation.mda_estimate(zones, config.comb, truth_hz=tone.freq_hz)


def _run_trial(config: model.ExperimentConfig, trial: int, seed: int) -> TrialResult:
    result = run_full_chain(config.with_noise_seed(seed), strict=False)
    if trial % 10 == 0:
        logger.info("Finished trial %d", trial)
    return TrialResult(
        trial=trial,
        seed=seed,
        estimates=[outcome.estimate for outcome in result.tones],
        failures=[outcome.failure for outcome in result.tones],
    )


def _trial_frame(
    config: model.ExperimentConfig, results: t.Sequence[TrialResult]
) -> pd.DataFrame:
    rows = [
        (
            result.trial,
            result.seed,
            tone_index,
            tone.freq_hz,
            math.nan if avg_deviation_hz is None else avg_deviation_hz,
            failure or "",
        )
        for result in results
        for tone_index, (tone, avg_deviation_hz, failure) in enumerate(
            zip(config.tones, result.avg_deviations_hz, result.failures)
        )
    ]
    return pd.DataFrame(rows, columns=TRIAL_COLUMNS)


def _tone_statistics(
    tone_index: int, tone: model.ToneSpec, trials: pd.DataFrame
) -> ToneStatistics:
    deviations = trials["avg_deviation_hz"].dropna().to_numpy()
    if len(deviations) == 0:
        rms_hz = mean_hz = max_abs_hz = math.nan
    else:
        rms_hz = float(np.sqrt(np.mean(deviations**2)))
        mean_hz = float(np.mean(deviations))
        max_abs_hz = float(np.max(np.abs(deviations)))

    return ToneStatistics(
        tone_index=tone_index,
        freq_hz=tone.freq_hz,
        rms_hz=rms_hz,
        mean_hz=mean_hz,
        max_abs_hz=max_abs_hz,
        trials=len(trials),
        failures=int((trials["failure"] != "").sum()),
    )
