import pytest

from sphere_bubbling.config import DEFAULTS, RunConfig, describe_defaults, load_config
from sphere_bubbling.errors import ConfigError


def write(tmp_path, text):
    p = tmp_path / "run.ini"
    p.write_text(text, encoding="utf-8")
    return p


def test_defaults():
    cfg = load_config()
    assert cfg["problem"] == {"n": 4, "gamma": 0.5}
    assert cfg["flow"]["sample_interval"] == 50.0
    assert cfg.params.n == 4
    assert set(cfg.to_dict()) == set(DEFAULTS)


def test_file_values_and_types(tmp_path):
    p = write(tmp_path, "[problem]\nn = 5\ngamma = 0.25\n[curvature]\nK = 1+0.2*x6  # tilted\n"
                        "n_starts = 1e3\n[flow]\nensemble = 4\n")
    cfg = load_config(p)
    assert cfg["problem"]["n"] == 5 and isinstance(cfg["problem"]["n"], int)
    assert cfg["problem"]["gamma"] == 0.25
    assert cfg["curvature"]["K"] == "1+0.2*x6"  # key case kept, inline comment dropped
    assert cfg["curvature"]["n_starts"] == 1000
    assert cfg.source == str(p)


def test_overrides_win_over_file(tmp_path):
    p = write(tmp_path, "[flow]\nlambda0 = 12\np = 2\n")
    cfg = load_config(p, {("flow", "lambda0"): "15"})
    assert cfg["flow"]["lambda0"] == 15.0 and cfg["flow"]["p"] == 2
    assert load_config(p, {("flow", "lambda0"): None})["flow"]["lambda0"] == 12.0


@pytest.mark.parametrize("text,needle", [
    ("[nosuch]\nx = 1\n", "unknown section"),
    ("[flow]\nlambda_zero = 1\n", "unknown key"),
    ("[problem]\nn = four\n", "cannot read"),
    ("[problem]\nn = 4.5\n", "cannot read"),
    ("[problem]\ngamma = 1.5\n", "gamma"),
    ("[problem]\nn = 1\n", ""),
    ("[flow]\np = 0\n", "p must be"),
    ("[flow]\nensemble = 0\n", "ensemble"),
    ("[flow]\nplacement = anywhere\n", "placement"),
    ("[flow]\nplacement = explicit\n", "centers"),
    ("[flow]\nlambda0 = -3\n", "lambda0"),
    ("[run]\nthreads = 0\n", "threads"),
    ("[criterion]\np_max = -1\n", "p_max"),
    ("no section header\n", "cannot read config"),
])
def test_config_errors(tmp_path, text, needle):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, text))
    assert needle in str(info.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


def test_set_rejects_unknown():
    cfg = RunConfig()
    with pytest.raises(ConfigError):
        cfg.set("flow", "nope", 1)
    cfg.set("flow", "seed", 9)
    assert cfg["flow"]["seed"] == 9


def test_describe_defaults_round_trips(tmp_path):
    text = describe_defaults()
    assert text.count("[") >= len(DEFAULTS)
    cfg = load_config(write(tmp_path, text))
    assert cfg.to_dict() == RunConfig().to_dict()
