import enum
import json
import logging
import math
import pathlib
import typing as t

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

from mdatools import experiments, model

logger = logging.getLogger(__name__)

Result = t.Union[
    experiments.SweepResult, experiments.ChainResult, experiments.MonteCarloSummary
]

SPECTRUM_COLUMNS = ["bin", "freq_hz", "magnitude"]
_SVG_STYLE = {"svg.hashsalt": "mdatools", "svg.fonttype": "none"}


class OutputFormat(enum.Enum):
    CSV = "csv"
    JSON = "json"
    SVG = "svg"


class OutputError(OSError):
    def __init__(self, path: pathlib.Path, reason: str) -> None:
        super().__init__(path, reason)
        self.path = path
        self.reason = reason

    def __str__(self) -> str:
        return f"Could not write {self.path}: {self.reason}"


def emit_outputs(
    result: Result,
    out_dir: pathlib.Path,
    formats: t.Iterable[OutputFormat],
) -> t.List[pathlib.Path]:
    formats = set(formats)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(out_dir, e.strerror or str(e)) from e

    if isinstance(result, experiments.SweepResult):
        writers = _sweep_writers(result)
    elif isinstance(result, experiments.ChainResult):
        writers = _chain_writers(result)
    else:
        writers = _monte_carlo_writers(result)

    written = []
    for output_format, name, write in writers:
        if output_format not in formats:
            continue
        path = out_dir / name
        try:
            write(path)
        except OSError as e:
            raise OutputError(path, e.strerror or str(e)) from e
        logger.info("Wrote %s", path)
        written.append(path)
    return written


Writer = t.Tuple[OutputFormat, str, t.Callable[[pathlib.Path], None]]


def _sweep_writers(result: experiments.SweepResult) -> t.List[Writer]:
    frame = result.to_frame()
    document = {
        "epsilon": result.epsilon,
        "order_count": result.order_count,
        "max_abs_dev1_bins": result.max_abs_dev1_bins,
        "max_abs_devavg_bins": result.max_abs_devavg_bins,
        "rows": frame.to_dict(orient="records"),
    }
    return [
        (OutputFormat.CSV, "sweep.csv", lambda path: _write_csv(frame, path)),
        (OutputFormat.JSON, "sweep.json", lambda path: _write_json(document, path)),
        (OutputFormat.SVG, "sweep.svg", lambda path: _plot_sweep(result, path)),
    ]


def _chain_writers(result: experiments.ChainResult) -> t.List[Writer]:
    spectrum = result.spectrum
    frame = pd.DataFrame(
        {
            "bin": np.arange(len(spectrum.magnitudes)),
            "freq_hz": spectrum.freqs_hz,
            "magnitude": spectrum.magnitudes,
        },
        columns=SPECTRUM_COLUMNS,
    )
    document = {
        "config": _config_echo(result.config),
        "tones": [_tone_document(outcome) for outcome in result.tones],
    }
    return [
        (OutputFormat.CSV, "spectrum.csv", lambda path: _write_csv(frame, path)),
        (OutputFormat.JSON, "zones.json", lambda path: _write_json(document, path)),
        (OutputFormat.SVG, "spectrum.svg", lambda path: _plot_spectrum(result, path)),
        (
            OutputFormat.SVG,
            "deviations.svg",
            lambda path: _plot_deviations(result, path),
        ),
    ]


def _monte_carlo_writers(result: experiments.MonteCarloSummary) -> t.List[Writer]:
    document = {
        "base_seed": result.base_seed,
        "trials": len(result.trials),
        "tones": [
            {
                "tone": stats.tone_index,
                "freq_hz": stats.freq_hz,
                "rms_hz": stats.rms_hz,
                "mean_hz": stats.mean_hz,
                "max_abs_hz": stats.max_abs_hz,
                "trials": stats.trials,
                "failures": stats.failures,
            }
            for stats in result.tones
        ],
        "config": _config_echo(result.config),
    }
    frame = result.to_frame()
    return [
        (OutputFormat.CSV, "montecarlo.csv", lambda path: _write_csv(frame, path)),
        (
            OutputFormat.JSON,
            "montecarlo.json",
            lambda path: _write_json(document, path),
        ),
        (
            OutputFormat.SVG,
            "montecarlo.svg",
            lambda path: _plot_monte_carlo(result, path),
        ),
    ]


def _tone_document(outcome: experiments.ToneOutcome) -> t.Dict[str, t.Any]:
    estimate = outcome.estimate
    predicted_hz = {
        record.order: record.deviation_hz for record in outcome.prediction.records
    }
    return {
        "tone": outcome.tone_index,
        "truth_hz": outcome.tone.freq_hz,
        "nyquist_zone": outcome.nyquist_zone,
        "estimate_hz": None if estimate is None else estimate.estimate_hz,
        "avg_deviation_hz": outcome.avg_deviation_hz,
        "predicted_avg_deviation_hz": outcome.prediction.average_hz,
        "failure": outcome.failure,
        "zones": [
            {
                "order": zone.order,
                "measured_bin": zone.measured_bin,
                "refined_offset_bins": zone.refined_offset_bins,
                "zone_freq_hz": zone.zone_freq_hz,
                "reconstructed_hz": zone.reconstructed_hz,
                "deviation_hz": zone.deviation_hz,
                "predicted_deviation_hz": predicted_hz.get(zone.order),
                "degenerate": zone.degenerate,
            }
            for zone in ([] if estimate is None else estimate.zones)
        ],
    }


def _config_echo(config: model.ExperimentConfig) -> t.Any:
    return json.loads(config.json())


def _json_ready(value: t.Any) -> t.Any:
    """Non-finite floats become null"""
    if isinstance(value, dict):
        return {key: _json_ready(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_json_ready(item) for item in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _write_csv(frame: pd.DataFrame, path: pathlib.Path) -> None:
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def _write_json(document: t.Any, path: pathlib.Path) -> None:
    text = json.dumps(_json_ready(document), indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def _save(figure: Figure, path: pathlib.Path) -> None:
    with matplotlib.rc_context(_SVG_STYLE):
        figure.savefig(path, format="svg", metadata={"Date": None})


def _plot_sweep(result: experiments.SweepResult, path: pathlib.Path) -> None:
    frame = result.to_frame()
    figure = Figure(figsize=(8, 4.5))
    axes = figure.subplots()
    axes.plot(frame["delta"], frame["dev1_bins"], label="single order")
    axes.plot(
        frame["delta"],
        frame["devavg_bins"],
        label=f"{result.order_count}-order average",
    )
    axes.set_xlabel("fractional bin offset")
    axes.set_ylabel("deviation (bins)")
    axes.legend()
    axes.grid(True, alpha=0.3)
    _save(figure, path)


def _plot_spectrum(result: experiments.ChainResult, path: pathlib.Path) -> None:
    spectrum = result.spectrum
    figure = Figure(figsize=(10, 4.5))
    axes = figure.subplots()
    axes.plot(spectrum.freqs_hz / 1e9, spectrum.magnitude_db(floor_db=-160.0), lw=0.5)
    axes.set_xlabel("frequency (GHz)")
    axes.set_ylabel("magnitude (dB re. peak)")
    axes.grid(True, alpha=0.3)
    _save(figure, path)


def _plot_deviations(result: experiments.ChainResult, path: pathlib.Path) -> None:
    figure = Figure(figsize=(8, 4.5))
    axes = figure.subplots()
    for outcome in result.tones:
        if outcome.estimate is None or outcome.estimate.avg_deviation_hz is None:
            continue
        zones = outcome.estimate.zones
        label = f"{outcome.tone.freq_hz / 1e9:.4g} GHz"
        container = axes.stem(
            [zone.order for zone in zones],
            [(zone.deviation_hz or 0.0) / 1e3 for zone in zones],
            label=label,
        )
        axes.axhline(
            outcome.estimate.avg_deviation_hz / 1e3,
            ls="--",
            color=container.markerline.get_color(),
        )
    axes.set_xlabel("comb order")
    axes.set_ylabel("deviation (kHz)")
    axes.grid(True, alpha=0.3)
    if result.tones:
        axes.legend()
    _save(figure, path)


def _plot_monte_carlo(
    result: experiments.MonteCarloSummary, path: pathlib.Path
) -> None:
    frame = result.to_frame()
    figure = Figure(figsize=(8, 4.5))
    axes = figure.subplots()
    for stats in result.tones:
        trials = frame[frame["tone"] == stats.tone_index]
        axes.plot(
            trials["trial"],
            trials["avg_deviation_hz"],
            ".",
            label=f"{stats.freq_hz / 1e9:.4g} GHz, RMS {stats.rms_hz:.0f} Hz",
        )
    axes.set_xlabel("trial")
    axes.set_ylabel("average deviation (Hz)")
    axes.grid(True, alpha=0.3)
    axes.legend()
    _save(figure, path)
