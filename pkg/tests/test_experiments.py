import math
import typing as t

import numpy as np
import pandas as pd
import pytest

from mdatools import deviation, estimation, experiments, model
from mdatools.deviation import DomainError
from mdatools.estimation import EstimationFailure


def _starved(config: model.ExperimentConfig) -> model.ExperimentConfig:
    # Peaks 500 bins apart can never cover ten orders spaced 100 bins apart
    return config.copy(update={"peaks": model.PeakConfig(min_separation_bins=500)})


def _assert_matches_prediction(outcome: experiments.ToneOutcome) -> None:
    assert outcome.estimate is not None
    for zone, record in zip(outcome.estimate.zones, outcome.prediction.records):
        assert zone.deviation_hz is not None
        # Equal magnitudes either side of an exact tie leave the pick to leakage
        assert abs(zone.deviation_hz) == pytest.approx(
            abs(record.deviation_hz), abs=1e-3
        )
    assert abs(outcome.avg_deviation_hz or 0.0) == pytest.approx(
        abs(outcome.prediction.average_hz), abs=1e-3
    )


def test_delta_sweep_bounds() -> None:
    result = experiments.run_delta_sweep(0.1, 10, 1001)

    assert len(result.rows) == 1001
    assert result.rows[0].delta == 0.0
    assert result.rows[-1].delta == 1.0
    assert result.max_abs_dev1_bins == pytest.approx(0.5)
    assert 0.045 <= result.max_abs_devavg_bins <= 0.05 + 1e-12


def test_delta_sweep_without_comb_offset_is_single_order() -> None:
    result = experiments.run_delta_sweep(0.0, 1, 11)

    for row in result.rows:
        assert row.devavg_bins == pytest.approx(row.dev1_bins, abs=1e-12)


def test_delta_sweep_frame() -> None:
    frame = experiments.run_delta_sweep(0.1, 10, 2).to_frame()

    assert list(frame.columns) == experiments.SWEEP_COLUMNS
    assert frame["delta"].tolist() == [0.0, 1.0]


def test_delta_sweep_needs_two_steps() -> None:
    with pytest.raises(DomainError):
        experiments.run_delta_sweep(0.1, 10, 1)


def test_noiseless_chain_on_small_grid(small_config: model.ExperimentConfig) -> None:
    result = experiments.run_full_chain(small_config.without_noise())

    assert result.failures == []
    assert [outcome.nyquist_zone for outcome in result.tones] == [25, 55]
    for outcome in result.tones:
        _assert_matches_prediction(outcome)
        assert abs(outcome.avg_deviation_hz or 0.0) == pytest.approx(5.0, abs=1e-6)


def test_oversampled_chain_on_small_grid(small_config: model.ExperimentConfig) -> None:
    config = small_config.without_noise().with_method(
        model.PresampleMethod.OVERSAMPLED
    )

    result = experiments.run_full_chain(config)

    for outcome in result.tones:
        _assert_matches_prediction(outcome)


def test_chirp_z_chain_matches_fft(small_config: model.ExperimentConfig) -> None:
    fft = experiments.run_full_chain(small_config)
    czt = experiments.run_full_chain(
        small_config.copy(update={"transform": model.TransformMethod.CHIRP_Z})
    )

    assert [peak.bin for peak in czt.peaks] == [peak.bin for peak in fft.peaks]
    assert [o.avg_deviation_hz for o in czt.tones] == pytest.approx(
        [o.avg_deviation_hz for o in fft.tones]
    )


def test_single_order_chain_measures_directly(
    small_config: model.ExperimentConfig,
) -> None:
    result = experiments.run_full_chain(
        small_config.without_noise().copy(update={"order_count": 1})
    )

    for outcome in result.tones:
        assert outcome.estimate is not None
        assert [zone.order for zone in outcome.estimate.zones] == [0]
        assert outcome.avg_deviation_hz == pytest.approx(0.0, abs=1e-6)


def test_quad_chain_on_small_grid(small_config: model.ExperimentConfig) -> None:
    config = small_config.copy(update={"estimator": model.Estimator.MDA_QUAD})

    result = experiments.run_full_chain(config)

    for outcome in result.tones:
        assert outcome.estimate is not None
        assert all(
            zone.refined_offset_bins is not None for zone in outcome.estimate.zones
        )
        assert outcome.estimate.estimate_hz == pytest.approx(
            outcome.tone.freq_hz, abs=0.1 * config.grid.resolution_hz
        )


def test_jacobsen_chain_on_small_grid(small_config: model.ExperimentConfig) -> None:
    config = small_config.without_noise().copy(
        update={
            "estimator": model.Estimator.MDA_QUAD,
            "interpolation": model.InterpolationScale.JACOBSEN,
        }
    )

    result = experiments.run_full_chain(config)

    for outcome in result.tones:
        assert outcome.estimate is not None
        assert outcome.estimate.degenerate_orders == []
        assert abs(outcome.avg_deviation_hz or math.inf) <= (
            0.02 * config.grid.resolution_hz
        )


def test_noiseless_reference_chain(reference_config: model.ExperimentConfig) -> None:
    result = experiments.run_full_chain(reference_config.without_noise())

    assert [outcome.nyquist_zone for outcome in result.tones] == [27, 76]
    for outcome in result.tones:
        _assert_matches_prediction(outcome)
        assert outcome.estimate is not None
        assert abs(outcome.avg_deviation_hz or 0.0) == pytest.approx(10e3, abs=1e-3)
        assert outcome.estimate.max_abs_zone_deviation_hz == pytest.approx(
            100e3, abs=1e-3
        )


def test_noisy_reference_chain(reference_config: model.ExperimentConfig) -> None:
    result = experiments.run_full_chain(reference_config)

    for outcome in result.tones:
        assert outcome.estimate is not None
        assert abs(outcome.avg_deviation_hz or 0.0) == pytest.approx(10e3, abs=1e3)
        assert outcome.estimate.max_abs_zone_deviation_hz == pytest.approx(
            100e3, abs=100e3
        )


def test_tone_never_borrows_another_tones_alias(
    reference_config: model.ExperimentConfig, caplog: pytest.LogCaptureFixture
) -> None:
    # Near 83 comb periods the tone's lines and their mirrors are 3.5 bins
    # apart, while the first tone's sum lines form a complete cluster 20 MHz up
    tones = [
        reference_config.tones[0],
        model.ToneSpec(freq_hz=8302005673.07, amplitude=1.0, phase_rad=0.0),
    ]
    config = reference_config.copy(update={"tones": tones})

    first, second = experiments.run_full_chain(config, strict=False).tones

    assert first.failure is None
    assert abs(first.avg_deviation_hz or 0.0) == pytest.approx(10e3, abs=1e3)
    assert second.estimate is None
    assert second.failure
    assert "mirrored lines" in caplog.text
    with pytest.raises(EstimationFailure):
        experiments.run_full_chain(config)


def _avoids_ties(freq_hz: float, config: model.ExperimentConfig) -> bool:
    # Leakage from neighbouring lines decides bins this close to a rounding tie
    delta = deviation.index_of(freq_hz, config.grid).fractional_part
    return all(
        abs(deviation.frac_mod1(delta - order * config.comb.epsilon) - 0.5) >= 0.02
        for order in range(config.order_count)
    )


def test_noiseless_average_deviation_bound(
    small_config_doc: t.Dict[str, t.Any]
) -> None:
    # 50 Hz bins under a 25.005 kHz comb: alpha = 500 and epsilon = 1/10
    base = model.ExperimentConfig.parse_obj(
        {
            **small_config_doc,
            "grid": {"sample_rate_hz": 1e6, "fft_size": 20000},
            "comb": {"rep_rate_hz": 25005.0},
        }
    ).without_noise()
    grid, comb = base.grid, base.comb
    bound_hz = grid.resolution_hz * (1 / (2 * base.order_count) + 1e-6)
    rng = np.random.default_rng(31)

    checked = 0
    for _ in range(2000):
        freq_hz = float(
            rng.uniform(
                10 * comb.rep_rate_hz, grid.nyquist_hz - 20 * grid.resolution_hz
            )
        )
        # Closer mirrors merge with the tone's lines under peak thinning
        crowded = estimation.mirror_gap_bins(freq_hz, comb, grid) < 30
        if crowded or not _avoids_ties(freq_hz, base):
            continue

        tone = model.ToneSpec(
            freq_hz=freq_hz, amplitude=1.0, phase_rad=float(rng.uniform(-3.0, 3.0))
        )
        (outcome,) = experiments.run_full_chain(
            base.copy(update={"tones": [tone]})
        ).tones

        assert outcome.avg_deviation_hz is not None
        assert abs(outcome.avg_deviation_hz) <= bound_hz, freq_hz
        checked += 1
        if checked == 200:
            break

    assert checked == 200


def test_predictions_precede_presampling(small_config: model.ExperimentConfig) -> None:
    # 6 kHz reaches DC at order 1 of the 10.01 kHz comb
    low = small_config.copy(
        update={"tones": [model.ToneSpec(freq_hz=6e3, amplitude=1.0, phase_rad=0.0)]}
    )

    with pytest.raises(DomainError):
        experiments.run_full_chain(low)


def test_strict_chain_raises(small_config: model.ExperimentConfig) -> None:
    with pytest.raises(EstimationFailure):
        experiments.run_full_chain(_starved(small_config))


def test_lenient_chain_records_failures(small_config: model.ExperimentConfig) -> None:
    result = experiments.run_full_chain(_starved(small_config), strict=False)

    assert len(result.failures) == 2
    assert all(outcome.estimate is None for outcome in result.tones)
    assert all(outcome.avg_deviation_hz is None for outcome in result.tones)


def test_monte_carlo_is_deterministic(small_config: model.ExperimentConfig) -> None:
    first = experiments.run_monte_carlo(small_config, 3, base_seed=11)
    second = experiments.run_monte_carlo(small_config, 3, base_seed=11)

    pd.testing.assert_frame_equal(first.to_frame(), second.to_frame())
    assert first.tones == second.tones
    assert list(first.to_frame().columns) == experiments.TRIAL_COLUMNS


def test_monte_carlo_seeds_differ(small_config: model.ExperimentConfig) -> None:
    summary = experiments.run_monte_carlo(small_config, 3, base_seed=11)

    assert len({trial.seed for trial in summary.trials}) == 3
    assert [trial.trial for trial in summary.trials] == [0, 1, 2]


def test_monte_carlo_parallel_equals_serial(
    small_config: model.ExperimentConfig,
) -> None:
    serial = experiments.run_monte_carlo(small_config, 4, base_seed=5)
    parallel = experiments.run_monte_carlo(small_config, 4, base_seed=5, workers=2)

    pd.testing.assert_frame_equal(serial.to_frame(), parallel.to_frame())
    assert serial.tones == parallel.tones


def test_single_trial_rms_is_its_deviation(
    small_config: model.ExperimentConfig,
) -> None:
    summary = experiments.run_monte_carlo(small_config, 1, base_seed=3)

    (trial,) = summary.trials
    for stats, deviation_hz in zip(summary.tones, trial.avg_deviations_hz):
        assert deviation_hz is not None
        assert stats.rms_hz == pytest.approx(abs(deviation_hz))
        assert stats.max_abs_hz == pytest.approx(abs(deviation_hz))
        assert stats.mean_hz == pytest.approx(deviation_hz)
        assert (stats.trials, stats.failures) == (1, 0)


def test_monte_carlo_fails_when_every_trial_fails(
    small_config: model.ExperimentConfig,
) -> None:
    with pytest.raises(EstimationFailure, match="All 2 trials failed"):
        experiments.run_monte_carlo(_starved(small_config), 2, base_seed=1)


def test_monte_carlo_keeps_tones_that_survive(
    small_config: model.ExperimentConfig,
) -> None:
    # 60 dB down, the second tone never clears the peak threshold
    faint = small_config.tones[1].copy(update={"amplitude": 1e-3})
    config = small_config.copy(update={"tones": [small_config.tones[0], faint]})

    summary = experiments.run_monte_carlo(config, 3, base_seed=2)

    kept, lost = summary.tones
    assert (kept.trials, kept.failures) == (3, 0)
    assert abs(kept.mean_hz) <= 50.0
    assert (lost.trials, lost.failures) == (3, 3)
    assert math.isnan(lost.rms_hz)


@pytest.mark.parametrize("trials, workers", [(0, 1), (1, 0)])
def test_monte_carlo_rejects_bad_counts(
    small_config: model.ExperimentConfig, trials: int, workers: int
) -> None:
    with pytest.raises(DomainError):
        experiments.run_monte_carlo(small_config, trials, base_seed=1, workers=workers)


def _assert_quad_accuracy(
    summary: experiments.MonteCarloSummary, trials: int
) -> None:
    config = summary.config
    for stats in summary.tones:
        plain = estimation.predict_deviation(
            stats.freq_hz, config.comb, config.grid, config.order_count
        )
        assert (stats.trials, stats.failures) == (trials, 0)
        assert stats.rms_hz <= 500.0
        assert abs(plain.average_hz) / stats.rms_hz > 100
        assert not math.isnan(stats.mean_hz)


def test_quad_monte_carlo_single_tone(
    reference_single_tone_config: model.ExperimentConfig,
) -> None:
    summary = experiments.run_monte_carlo(reference_single_tone_config, 24, base_seed=1)

    _assert_quad_accuracy(summary, 24)


def test_quad_monte_carlo_two_tones(
    reference_quad_config: model.ExperimentConfig,
) -> None:
    summary = experiments.run_monte_carlo(reference_quad_config, 24, base_seed=1)

    _assert_quad_accuracy(summary, 24)


@pytest.mark.slow
def test_quad_monte_carlo_full_run(
    reference_quad_config: model.ExperimentConfig,
) -> None:
    summary = experiments.run_monte_carlo(
        reference_quad_config, 200, base_seed=reference_quad_config.noise.seed
    )

    _assert_quad_accuracy(summary, 200)
