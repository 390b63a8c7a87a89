import json

import pytest

from src import config
from src.core.channel import ChannelParams
from src.data.dataset import DEFAULT_SIGNAL_POWER_MAP, EIT_CHANNEL
from src.errors import ConfigError
from src.services.run_config import (
    EXPERIMENTS,
    RunConfig,
    apply_overrides,
    load_run_config,
    run_config_from_dict,
)


def test_defaults_follow_protocol_constants():
    run_config = run_config_from_dict({"experiment": "csqpt", "seed": 1})
    assert run_config.process_mle.n_max == config.PROCESS_N_MAX
    assert run_config.probes.count == config.PROBE_COUNT
    assert run_config.detection.params().efficiency == config.DETECTION_EFFICIENCY
    assert len(run_config.detection.params().phase_sweep) == config.PHASE_RAMP_POINTS
    assert run_config.signal_power_map is DEFAULT_SIGNAL_POWER_MAP
    assert run_config.channels() == DEFAULT_SIGNAL_POWER_MAP.channels


@pytest.mark.parametrize(
    "data, field",
    [
        ({"experiment": "csqpt", "colour": 1}, "colour"),
        ({"experiment": "csqpt", "detection": {"efficiency": 1.5}}, "detection.efficiency"),
        ({"experiment": "csqpt", "detection": {"sampels": 10}}, "detection.sampels"),
        ({"experiment": "csqpt", "process_mle": {"trace_mode": "loose"}}, "process_mle.trace_mode"),
        ({"experiment": "csqpt", "process_mle": {"start": "random"}}, "process_mle.start"),
        ({"experiment": "csqpt", "channel": {"phase_shift": 1.0}}, "channel.transmission"),
        ({"experiment": "csqpt", "channel": "kerr"}, "channel"),
        ({"experiment": "tomography"}, "experiment"),
        ({"seed": 1}, "experiment"),
        ({"experiment": "csqpt", "seed": -1}, "seed"),
        ({"experiment": "csqpt", "threads": True}, "threads"),
        ({"experiment": "squeezed-predict", "squeezed": {"source": "file"}}, "squeezed.tensor_paths"),
    ],
)
def test_invalid_fields_are_named(data, field):
    with pytest.raises(ConfigError) as excinfo:
        run_config_from_dict(data)
    assert excinfo.value.field == field
    assert str(excinfo.value).startswith(field)


def test_named_channel():
    run_config = run_config_from_dict({"experiment": "state-demo", "seed": 3, "channel": "eit"})
    assert run_config.channel == EIT_CHANNEL
    assert run_config.channels() == [EIT_CHANNEL]


def test_inline_power_map():
    entries = [
        {"signal_power_mw": 0.5, "phase_shift": 1.4, "transmission": 0.3},
        {"signal_power_mw": 1.0, "phase_shift": 1.0, "transmission": 0.1},
    ]
    run_config = run_config_from_dict({"experiment": "csqpt", "seed": 1, "signal_power_map": entries})
    assert run_config.signal_power_map.powers == [0.5, 1.0]


def test_power_map_must_increase():
    entries = [
        {"signal_power_mw": 1.0, "phase_shift": 1.4, "transmission": 0.3},
        {"signal_power_mw": 0.5, "phase_shift": 1.0, "transmission": 0.1},
    ]
    with pytest.raises(ConfigError) as excinfo:
        run_config_from_dict({"experiment": "csqpt", "signal_power_map": entries})
    assert excinfo.value.field == "signal_power_map"


def test_power_map_file_resolves_next_to_config(tmp_path, write_config):
    entries = [{"signal_power_mw": 0.7, "phase_shift": 1.2, "transmission": 0.2}]
    (tmp_path / "powers.json").write_text(json.dumps(entries), encoding="utf-8")
    path = write_config({"experiment": "sweep-signal-power", "seed": 5, "signal_power_map": "powers.json"})
    run_config = load_run_config(path)
    assert run_config.signal_power_map.channels == [ChannelParams(1.2, 0.2)]

    missing = write_config({"experiment": "csqpt", "signal_power_map": "nope.json"}, name="missing.json")
    with pytest.raises(ConfigError, match="signal_power_map"):
        load_run_config(missing)


def test_missing_seed_is_a_config_error():
    run_config = run_config_from_dict({"experiment": "csqpt"})
    with pytest.raises(ConfigError) as excinfo:
        run_config.require_seed()
    assert excinfo.value.field == "seed"


def test_overrides():
    run_config = run_config_from_dict({"experiment": "csqpt", "seed": 1})
    changed = apply_overrides(run_config, seed=2**64 - 1, output_dir="elsewhere", threads=4)
    assert (changed.seed, changed.output_dir, changed.threads) == (2**64 - 1, "elsewhere", 4)
    assert apply_overrides(run_config) is run_config
    with pytest.raises(ConfigError, match="--seed"):
        apply_overrides(run_config, seed=2**64)


def test_manifest_feeds_back_as_config(write_config):
    original = run_config_from_dict(
        {"experiment": "squeezed-predict", "seed": 11, "channel": "n-type", "squeezed": {"phase": 0.3}}
    )
    manifest = {"toolkit_version": config.TOOLKIT_VERSION, "config": original.to_dict(), "artifacts": []}
    restored = load_run_config(write_config(manifest, name="manifest.json"))
    assert restored.to_dict() == original.to_dict()


@pytest.mark.parametrize("experiment", EXPERIMENTS)
def test_round_trip_through_dict(experiment):
    original = RunConfig(experiment=experiment, seed=9)
    assert run_config_from_dict(original.to_dict()).to_dict() == original.to_dict()


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="--config"):
        load_run_config(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_run_config(broken)


def test_ramp_must_cover_the_period():
    with pytest.raises(ConfigError) as excinfo:
        run_config_from_dict({"experiment": "csqpt", "detection": {"phase_ramp_points": 6}})
    assert excinfo.value.field == "detection.phase_ramp_points"


def test_process_start_reaches_mle_config():
    run_config = run_config_from_dict({"experiment": "csqpt", "process_mle": {"start": "maximally-mixed"}})
    assert run_config.process_mle.mle_config().start == "maximally-mixed"
    assert run_config_from_dict({"experiment": "csqpt"}).process_mle.mle_config().start == "fitted-channel"
