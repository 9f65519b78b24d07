import pytest

from ergodic_lab.errors import ConfigError
from ergodic_lab.systems import CircleRotation, FiniteCycle, Product, TensorProduct, TrigPoly
from ergodic_lab.utils import config as config_module
from ergodic_lab.utils.config import (
    ScheduleConfig,
    build_experiments,
    config_hash,
    load_config,
    load_settings,
    parse_config,
)
from ergodic_lab.utils.validation import ValidationError

pytestmark = pytest.mark.unit


MINIMAL = {
    "command": "average",
    "runs": 2,
    "budget": 5000,
    "systems": [{"type": "rotation", "p": 1, "q": 3}],
    "observables": [{"type": "trig", "coefficients": {"1": 1.0}}],
    "iterates": [{"type": "linear", "p": 3, "q": 2}],
    "starts": [[0.0], [0.5]],
}


# ============================================================================
# Process settings
# ============================================================================

def test_load_settings_defaults():
    s = load_settings()
    assert s.workers == 1
    assert s.out_dir == "results"
    assert s.verbose is False


def test_load_settings_env(monkeypatch):
    monkeypatch.setenv("EAL_WORKERS", "4")
    monkeypatch.setenv("EAL_BUDGET", "123")
    monkeypatch.setenv("EAL_OUT_DIR", "/tmp/runs")
    monkeypatch.setenv("EAL_VERBOSE", "yes")
    monkeypatch.setenv("EAL_QUIET", "maybe")

    s = load_settings()
    assert s.workers == 4
    assert s.budget == 123
    assert s.out_dir == "/tmp/runs"
    assert s.verbose is True
    assert s.quiet is False


def test_env_overrides_config_file(tmp_path, monkeypatch):
    settings_file = tmp_path / "config.json"
    settings_file.write_text('{"workers": 3, "out_dir": "from-file"}')
    monkeypatch.setattr(config_module, "CONFIG_FILE", settings_file)
    monkeypatch.setenv("EAL_WORKERS", "6")

    s = load_settings()
    assert s.workers == 6
    assert s.out_dir == "from-file"


def test_bad_worker_env_falls_back(monkeypatch):
    monkeypatch.setenv("EAL_WORKERS", "many")
    assert load_settings().workers == 1


# ============================================================================
# Run config files
# ============================================================================

def test_toml_config(write_toml, average_toml):
    config = load_config(write_toml(average_toml))
    assert config.command == "average"
    assert config.d == 2
    assert config.schedule.resolve(config.budget) == [1000, 5000, 20000]


def test_json_and_yaml_agree(write_json, write_yaml):
    a = load_config(write_json(MINIMAL))
    b = load_config(write_yaml(MINIMAL))
    assert a == b
    assert config_hash(a) == config_hash(b)


def test_unsupported_extension(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[run]\n")
    with pytest.raises(ConfigError, match="unsupported config format"):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.toml")


def test_malformed_toml(write_toml):
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(write_toml("command = \n"))


def test_top_level_must_be_a_table(tmp_path):
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match="top level"):
        load_config(path)


@pytest.mark.parametrize("patch,message", [
    ({"command": "plot"}, "command"),
    ({"systems": [{"type": "rotation", "angle": "sqrt2", "p": 1, "q": 2}]}, "rotation needs"),
    ({"observables": [{"type": "trig", "coefficients": {"one": 1.0}}]}, "integer"),
    ({"iterates": [{"type": "linear"}]}, "linear iterate needs"),
    ({"starts": [[0.0]]}, "runs"),
    ({"starts": [[0.0, 0.1], [0.2, 0.3]]}, "one value per system"),
    ({"classes": ["T", "Q"]}, "unknown class"),
    ({"colour": "blue"}, "colour"),
])
def test_invalid_configs(patch, message):
    with pytest.raises(ConfigError, match=message):
        parse_config({**MINIMAL, **patch})


def test_misaligned_lengths():
    data = {**MINIMAL, "observables": []}
    with pytest.raises(ConfigError, match="same length"):
        parse_config(data)


# ============================================================================
# Hashing
# ============================================================================

def test_hash_ignores_workers():
    assert config_hash(parse_config(MINIMAL)) == config_hash(parse_config({**MINIMAL, "workers": 8}))


def test_hash_tracks_content():
    assert config_hash(parse_config(MINIMAL)) != config_hash(parse_config({**MINIMAL, "seed": 1}))


def test_hash_is_hex_sha256():
    digest = config_hash(parse_config(MINIMAL))
    assert len(digest) == 64
    int(digest, 16)


# ============================================================================
# Schedules and experiments
# ============================================================================

def test_geometric_schedule():
    assert ScheduleConfig(first=10, last=10_000, ratio=10).resolve() == [10, 100, 1000, 10_000]


@pytest.mark.parametrize("checkpoints", [[], [5, 5], [10, 3]])
def test_bad_checkpoints(checkpoints):
    with pytest.raises(ValidationError):
        ScheduleConfig(checkpoints=checkpoints).resolve()


def test_schedule_over_budget():
    with pytest.raises(ValidationError, match="budget"):
        ScheduleConfig(checkpoints=[100, 10_000]).resolve(budget=5_000)


def test_build_experiments_with_explicit_starts():
    config = parse_config(MINIMAL)
    specs = build_experiments(config, config.budget)
    assert len(specs) == 2
    assert specs[1].starts == [0.5]
    assert specs[0].iterates is specs[1].iterates
    assert "starts=explicit" in specs[0].decisions


def test_build_experiments_with_seeded_starts():
    data = {k: v for k, v in MINIMAL.items() if k != "starts"}
    config = parse_config({**data, "seed": 5})
    first = build_experiments(config, 5000)
    again = build_experiments(config, 5000)
    assert [s.starts for s in first] == [s.starts for s in again]
    assert first[0].starts != first[1].starts
    assert first[0].seed == 5


def test_nested_systems_and_observables_build():
    config = parse_config({
        "systems": [{
            "type": "product",
            "factors": [{"type": "rotation", "angle": "golden"}, {"type": "cycle", "q": 5, "step": 2}],
        }],
        "observables": [{
            "type": "tensor",
            "factors": [
                {"type": "trig", "coefficients": {"0": 1.0, "2": [0.0, 1.0]}},
                {"type": "tabulated", "values": [1, 0, 0, 0, 0]},
            ],
        }],
        "iterates": [{"type": "sublinear", "catalog": "sqrt"}],
        "starts": [[[0.1, 3]]],
    })
    (spec,) = build_experiments(config, 1000)
    system = spec.systems[0]
    assert isinstance(system, Product)
    assert isinstance(system.factors[0], CircleRotation)
    assert isinstance(system.factors[1], FiniteCycle)
    observable = spec.observables[0]
    assert isinstance(observable, TensorProduct)
    assert observable.factors[0] == TrigPoly.from_dict({0: 1.0, 2: 1j})


def test_nonpositive_slope_is_rejected():
    data = {**MINIMAL, "iterates": [{"type": "linear", "slope": "-1.5"}]}
    with pytest.raises(ConfigError, match="positive"):
        build_experiments(parse_config(data), 1000)
