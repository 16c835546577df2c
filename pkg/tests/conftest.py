import json
import pathlib
import typing as t

import pytest

from mdatools import model

CONFIG_DIR = pathlib.Path(__file__).resolve().parent.parent / "configs"

# 100 Hz bins; a 10.01 kHz comb sits at alpha = 100, epsilon = 0.1
SMALL_GRID = {"sample_rate_hz": 1e6, "fft_size": 10000}
SMALL_REP_RATE_HZ = 10010.0
SMALL_TONE_HZ = 123400.0
SMALL_SECOND_TONE_HZ = 271000.0


@pytest.fixture
def small_grid() -> model.FrequencyGrid:
    return model.FrequencyGrid(**SMALL_GRID)


@pytest.fixture
def small_comb(small_grid: model.FrequencyGrid) -> model.CombSpec:
    return model.CombSpec.on_grid(SMALL_REP_RATE_HZ, small_grid)


@pytest.fixture
def ideal_pulse() -> model.PulseShape:
    return model.PulseShape(kind=model.PulseKind.IDEAL_COMB)


@pytest.fixture
def small_config_doc() -> t.Dict[str, t.Any]:
    return {
        "grid": dict(SMALL_GRID),
        "comb": {"rep_rate_hz": SMALL_REP_RATE_HZ},
        "tones": [
            {"freq_hz": SMALL_TONE_HZ, "amplitude": 1.0, "phase_rad": 0.3},
            {"freq_hz": SMALL_SECOND_TONE_HZ, "amplitude": 0.8, "phase_rad": -1.1},
        ],
        "noise": {"spectral_snr_db": 77.0, "seed": 7, "reference_amplitude": 1.0},
        "pulse": {"kind": "ideal-comb"},
        "order_count": 10,
    }


@pytest.fixture
def small_config(small_config_doc: t.Dict[str, t.Any]) -> model.ExperimentConfig:
    return model.ExperimentConfig.parse_obj(small_config_doc)


@pytest.fixture
def small_config_path(
    tmp_path: pathlib.Path, small_config_doc: t.Dict[str, t.Any]
) -> pathlib.Path:
    path = tmp_path / "small.json"
    path.write_text(json.dumps(small_config_doc))
    return path


@pytest.fixture
def reference_config() -> model.ExperimentConfig:
    return model.ExperimentConfig.parse_file(CONFIG_DIR / "reference.json")


@pytest.fixture
def reference_single_tone_config() -> model.ExperimentConfig:
    return model.ExperimentConfig.parse_file(CONFIG_DIR / "reference_single_tone.json")


@pytest.fixture
def reference_quad_config() -> model.ExperimentConfig:
    return model.ExperimentConfig.parse_file(CONFIG_DIR / "reference_quad.json")
