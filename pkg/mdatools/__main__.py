import contextlib
import logging
import pathlib
import sys
import typing as t

import click
import pydantic
import tabulate

try:
    from devtools import debug
except ImportError:
    debug = print

from mdatools import estimation, experiments, model, outputs, synthesis
from mdatools.deviation import DomainError

EXIT_CONFIG = 2
EXIT_ESTIMATION = 3
EXIT_OUTPUT = 4

_LOG_LEVELS = [logging.WARNING, logging.INFO, logging.DEBUG]

config_option = click.option(
    "-c",
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=pathlib.Path),
    required=True,
    show_envvar=True,
    help="Experiment configuration (JSON)",
)


def format_option(*default: str) -> t.Callable[[t.Callable], t.Callable]:
    return click.option(
        "-f",
        "--format",
        "formats",
        type=click.Choice([e.value for e in outputs.OutputFormat]),
        multiple=True,
        default=default,
        show_default=True,
        help="Output format; repeat for several",
    )


@click.group(
    context_settings={
        "auto_envvar_prefix": "MDATOOLS",
        "help_option_names": ["-h", "--help"],
    }
)
@click.option(
    "-v",
    "--verbose",
    count=True,
    help="Log pipeline stages (-v) or per-cluster diagnostics (-vv)",
)
def main(verbose: int) -> None:
    logging.basicConfig(
        level=_LOG_LEVELS[min(verbose, len(_LOG_LEVELS) - 1)],
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("-e", "--epsilon", type=float, default=0.1, show_default=True)
@click.option(
    "-n", "--orders", type=click.IntRange(min=1), default=10, show_default=True
)
@click.option(
    "-s", "--steps", type=click.IntRange(min=2), default=1001, show_default=True
)
@click.option(
    "-o",
    "--out",
    "out_dir",
    type=click.Path(file_okay=False, path_type=pathlib.Path),
    default=pathlib.Path("."),
    show_default=True,
)
@format_option("csv")
def sweep(
    epsilon: float,
    orders: int,
    steps: int,
    out_dir: pathlib.Path,
    formats: t.Tuple[str],
) -> None:
    with _exit_codes():
        result = experiments.run_delta_sweep(epsilon, orders, steps)
        _emit(result, out_dir, formats)

    _banner("DEVIATION SWEEP")
    print(
        tabulate.tabulate(
            [
                ("Single order", result.max_abs_dev1_bins),
                (f"{orders}-order average", result.max_abs_devavg_bins),
            ],
            headers=["Estimator", "Max |Deviation| (bins)"],
            floatfmt=".6f",
        )
    )


@main.command()
@config_option
@click.option(
    "-o",
    "--out-dir",
    type=click.Path(file_okay=False, path_type=pathlib.Path),
    default=pathlib.Path("."),
    show_default=True,
)
@click.option("--no-noise", is_flag=True, help="Disable the additive noise")
@click.option(
    "-m",
    "--method",
    type=click.Choice([e.value for e in model.PresampleMethod]),
    help="Override the configured presampling method",
)
@format_option("csv", "json")
def simulate(
    config_path: pathlib.Path,
    out_dir: pathlib.Path,
    no_noise: bool,
    method: t.Optional[str],
    formats: t.Tuple[str],
) -> None:
    with _exit_codes():
        config = model.ExperimentConfig.parse_file(config_path)
        if no_noise:
            config = config.without_noise()
        if method is not None:
            config = config.with_method(model.PresampleMethod(method))

        result = experiments.run_full_chain(config)
        _emit(result, out_dir, formats)

    _banner("TONES")
    print(
        tabulate.tabulate(
            [
                (
                    outcome.tone.freq_hz,
                    outcome.nyquist_zone,
                    outcome.estimate.estimate_hz if outcome.estimate else None,
                    outcome.avg_deviation_hz,
                    outcome.prediction.average_hz,
                    outcome.estimate.max_abs_zone_deviation_hz
                    if outcome.estimate
                    else None,
                )
                for outcome in result.tones
            ],
            headers=[
                "Tone (Hz)",
                "Nyquist Zone",
                "Estimate (Hz)",
                "Avg Deviation (Hz)",
                "Predicted Avg (Hz)",
                "Max |Order Deviation| (Hz)",
            ],
            floatfmt=".1f",
        ),
        end="\n\n",
    )

    _banner("ORDERS")
    print(
        tabulate.tabulate(
            [
                (
                    outcome.tone.freq_hz,
                    zone.order,
                    zone.measured_bin,
                    zone.refined_offset_bins,
                    zone.deviation_hz,
                    record.deviation_hz,
                )
                for outcome in result.tones
                if outcome.estimate
                for zone, record in zip(
                    outcome.estimate.zones, outcome.prediction.records
                )
            ],
            headers=[
                "Tone (Hz)",
                "Order",
                "Bin",
                "Refined Offset (bins)",
                "Deviation (Hz)",
                "Predicted (Hz)",
            ],
            floatfmt=".4f",
        )
    )


@main.command()
@config_option
@click.option(
    "-t", "--trials", type=click.IntRange(min=1), default=200, show_default=True
)
@click.option(
    "-s",
    "--seed",
    type=click.IntRange(0, 2**64 - 1),
    default=0,
    show_default=True,
    show_envvar=True,
)
@click.option(
    "-o",
    "--out",
    "out_dir",
    type=click.Path(file_okay=False, path_type=pathlib.Path),
    default=pathlib.Path("."),
    show_default=True,
)
@click.option(
    "-w",
    "--workers",
    type=click.IntRange(min=1),
    default=1,
    show_default=True,
    show_envvar=True,
    help="Worker processes running trials",
)
@format_option("json")
def montecarlo(
    config_path: pathlib.Path,
    trials: int,
    seed: int,
    out_dir: pathlib.Path,
    workers: int,
    formats: t.Tuple[str],
) -> None:
    with _exit_codes():
        config = model.ExperimentConfig.parse_file(config_path)
        summary = experiments.run_monte_carlo(config, trials, seed, workers=workers)
        _emit(summary, out_dir, formats)

    _banner("MONTE CARLO")
    print(
        tabulate.tabulate(
            [
                (
                    stats.freq_hz,
                    stats.rms_hz,
                    stats.mean_hz,
                    stats.max_abs_hz,
                    stats.trials,
                    stats.failures,
                )
                for stats in summary.tones
            ],
            headers=[
                "Tone (Hz)",
                "RMS (Hz)",
                "Mean (Hz)",
                "Max |Deviation| (Hz)",
                "Trials",
                "Failures",
            ],
            floatfmt=".1f",
        )
    )


@main.command()
@config_option
@click.option("--freq-hz", type=float, required=True, help="Input tone frequency")
def predict(config_path: pathlib.Path, freq_hz: float) -> None:
    with _exit_codes():
        config = model.ExperimentConfig.parse_file(config_path)
        prediction = estimation.predict_deviation(
            freq_hz, config.comb, config.grid, config.order_count
        )

    _banner("PREDICTED DEVIATIONS")
    print(
        tabulate.tabulate(
            [
                (record.order, record.deviation_bins, record.deviation_hz)
                for record in prediction.records
            ],
            headers=["Order", "Deviation (bins)", "Deviation (Hz)"],
            floatfmt=".4f",
        ),
        end="\n\n",
    )
    print(f"Average deviation: {prediction.average_hz:.4f} Hz")
    print(
        f"Max |deviation|: {prediction.max_abs_hz:.4f} Hz "
        f"(order {prediction.worst_order})"
    )


@main.command()
@config_option
def print_config(config_path: pathlib.Path) -> None:
    with _exit_codes():
        config = model.ExperimentConfig.parse_file(config_path)
    debug(config)


def _emit(
    result: outputs.Result, out_dir: pathlib.Path, formats: t.Iterable[str]
) -> None:
    for path in outputs.emit_outputs(
        result, out_dir, [outputs.OutputFormat(value) for value in formats]
    ):
        click.echo(f"Wrote {path}", err=True)


def _banner(title: str) -> None:
    print("=" * len(title))
    print(title)
    print("=" * len(title))
    print()


@contextlib.contextmanager
def _exit_codes() -> t.Iterator[None]:
    try:
        yield
    except (
        pydantic.ValidationError,
        synthesis.ConfigurationError,
        DomainError,
    ) as err:
        click.echo(f"Configuration error: {err}", err=True)
        sys.exit(EXIT_CONFIG)
    except estimation.EstimationFailure as err:
        click.echo(f"Estimation failed: {err}", err=True)
        sys.exit(EXIT_ESTIMATION)
    except outputs.OutputError as err:
        click.echo(str(err), err=True)
        sys.exit(EXIT_OUTPUT)


if __name__ == "__main__":
    main()  # pylint: disable=no-value-for-parameter
