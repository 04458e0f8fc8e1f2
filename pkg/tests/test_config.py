import logging

import pytest

from distill_equiv.equivalence import DEFAULT_T_GRID
from distill_equiv.errors import ConfigError
from distill_equiv.experiments.config import load_config, read_config_file


def test_minimal_flags_take_defaults():
    cfg = load_config("sweep", flags={"k": "3", "seed": "7"})
    assert cfg.K == 3 and cfg.seed == 7
    assert cfg.T_grid == DEFAULT_T_GRID
    assert cfg.tol == 1e-9 and cfg.reg_sign == -1
    assert cfg.output_path == "sweep-seed7.csv"


def test_command_defaults():
    cfg = load_config("init-stats")
    assert cfg.runs == 1000 and cfg.K == 100
    assert cfg.layer_dims == (16, 64, 64, 100)
    cfg = load_config("train-compare", flags={"layers": "4,8,5"})
    assert cfg.K == 5


def test_flag_beats_file_and_is_logged(tmp_path, caplog):
    path = tmp_path / "run.yaml"
    path.write_text("k: 10\nseed: 1\nt-grid: [1e2, 1e3]\n")
    with caplog.at_level(logging.INFO):
        cfg = load_config("sweep", str(path), {"seed": "9"})
    assert cfg.seed == 9 and cfg.K == 10 and cfg.T_grid == (100.0, 1000.0)
    assert cfg.provenance["seed"] == "flag"
    assert cfg.provenance["K"].startswith("file:")
    assert "overrides" in caplog.text


def test_command_from_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("command: gradcheck\nruns: 3\n")
    assert load_config(config_path=str(path)).command == "gradcheck"


@pytest.mark.parametrize(
    "flags,needle",
    [
        ({"t-grid": "1e3,1e2"}, "ascending"),
        ({"t-grid": "0,1"}, "t-grid"),
        ({"k": "1"}, "k"),
        ({"k": "3", "layers": "4,5"}, "layers"),
        ({"runs": "50"}, "100 runs"),
        ({"reg-sign": "0"}, "reg-sign"),
        ({"format": "xml"}, "format"),
        ({"seed": "-3"}, "seed"),
        ({"lr": "abc"}, "lr"),
        ({"k": "2.5"}, "k"),
    ],
)
def test_range_errors_name_the_field(flags, needle):
    with pytest.raises(ConfigError, match=needle):
        load_config("init-stats", flags=flags)


def test_reg_sign_accepts_explicit_plus():
    assert load_config("sweep", flags={"reg-sign": "+1"}).reg_sign == 1


def test_unknown_field_reports_line(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("k: 3\ntemperature: 5\n")
    with pytest.raises(ConfigError, match="line 2.*temperature"):
        read_config_file(str(path))


def test_parse_error_reports_line(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("k: 3\nseed: [1, 2\n")
    with pytest.raises(ConfigError, match="line"):
        read_config_file(str(path))


def test_bad_value_in_file_reports_line(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("seed: 1\nruns: many\n")
    with pytest.raises(ConfigError, match="line 2"):
        read_config_file(str(path))


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("sweep", "/nonexistent/run.yaml")


def test_unknown_command():
    with pytest.raises(ConfigError, match="command"):
        load_config("plot")
