import json

import pytest

from edgedfr.config import CONFIG_SCHEMA, DEFAULTS, build_dataset, build_run, load, resolve
from edgedfr.errors import InvalidConfigurationError
from edgedfr.nonlinearity import Variant
from edgedfr.reservoir import UpdateMode


def test_defaults_fully_expanded():
    cfg = resolve({})
    assert cfg["schema"] == 1
    assert cfg["reservoir"]["n_virtual"] == 100 and cfg["trainer"]["kind"] == "rls"
    assert (cfg["task"]["washout"], cfg["task"]["train_end"]) == (200, 3200)
    assert json.loads(json.dumps(cfg)) == cfg


def test_resolved_config_resolves_to_itself():
    cfg = resolve({"reservoir": {"nonlinearity": {"variant": "pwl"}}, "mode": "quantized"})
    assert resolve(cfg) == cfg


def test_pwl_defaults_and_table():
    cfg = resolve({"reservoir": {"nonlinearity": {"variant": "pwl", "segments": 16}}})
    nl = cfg["reservoir"]["nonlinearity"]
    assert nl["base"] == "tanh" and nl["segments"] == 16 and (nl["lo"], nl["hi"]) == (-4.0, 4.0)
    run = build_run(cfg)
    assert run.params.nonlinearity.variant is Variant.PIECEWISE_LINEAR
    assert run.params.nonlinearity.pwl.segments == 16
    explicit = resolve({"reservoir": {"nonlinearity": {"variant": "pwl", "pwl": {
        "breakpoints": [-1, 0, 1], "values": [-0.5, 0, 0.5]}}}})
    assert build_run(explicit).params.nonlinearity.pwl.values.tolist() == [-0.5, 0.0, 0.5]


@pytest.mark.parametrize("raw", [
    {"schema": 2},
    {"unknown": 1},
    {"reservoir": {"n_virtual": 0}},
    {"reservoir": {"feedback_gain": 1.0}},
    {"reservoir": {"nonlinearity": {"variant": "relu"}}},
    {"trainer": {"kind": "sgd"}},
    {"trainer": {"forgetting": 0.0}},
    {"mode": "quantized"},
    {"mode": "quantized", "reservoir": {"nonlinearity": {"variant": "mackey-glass"}}},
    {"task": {"name": "imagenet"}},
    {"formats": {"state": {"total_bits": 8, "frac_bits": 9}}},
    {"formats": {"accum": {"total_bits": 16, "frac_bits": 4}}},
    {"sweep": {"frac_bits": [8, 12]}},
    {"sweep": {"n_virtual": []}},
])
def test_invalid_configs(raw):
    with pytest.raises(InvalidConfigurationError):
        resolve(raw)


def test_load_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(InvalidConfigurationError):
        load(p)
    p.write_text("[1, 2]")
    with pytest.raises(InvalidConfigurationError):
        load(p)
    with pytest.raises(OSError):
        load(tmp_path / "missing.json")


def test_build_run_and_dataset():
    cfg = resolve({"reservoir": {"n_virtual": 12, "update_mode": "ideal-delay",
                                 "mask": {"kind": "uniform", "seed": 3}},
                   "task": {"length": 500, "seed": 7}})
    run = build_run(cfg)
    assert run.params.n_virtual == 12 and run.params.update_mode is UpdateMode.IDEAL_DELAY
    assert run.mask.kind.value == "uniform" and len(run.mask) == 12
    ds = build_dataset(cfg)
    assert len(ds) == 500 and ds.seed == 7 and ds.washout == run.params.washout == 25


def test_csv_task_takes_length_from_file(tmp_path):
    from edgedfr.bench import gen_narma10, write_csv

    path = tmp_path / "d.csv"
    write_csv(gen_narma10(300, 2), path)
    cfg = resolve({"task": {"name": f"csv:{path}"}})
    assert cfg["task"]["length"] == 300 and len(build_dataset(cfg)) == 300


def test_mackey_glass_task():
    cfg = resolve({"task": {"name": "mackey-glass", "length": 400, "horizon": 2}})
    ds = build_dataset(cfg)
    assert len(ds) == 400 and ds.targets[0] == ds.inputs[2]


def test_schema_lists_every_default_section():
    assert set(DEFAULTS) <= set(CONFIG_SCHEMA["properties"])
