import importlib
import logging
import re

import pytest

from app_config import AppConfig, LocalTimeFormatter, load_run_config, parse_value, read_environment, setup_logging
from components.lifted_lasso import ConfigError


def test_every_command_has_a_handler():
    for name, config in AppConfig.COMMANDS.items():
        module = importlib.import_module(config["module"])
        assert name in module.HANDLERS
        assert callable(module.run)
    assert len(AppConfig.get_command_menu()) == len(AppConfig.COMMANDS)


def test_defaults_without_sources():
    config = load_run_config(environ={})
    assert config["seed"] == 0
    assert config["format"] == "csv"
    assert config["timezone"] == "America/Santiago"
    assert config["support_threshold"] is None
    assert config["dump_failures"] is None


def test_precedence_environment_file_flags(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# corrida de prueba\nN=50\nx_values=1,2,3\nsigma=0.2\n", encoding="utf-8")
    environ = {"LIFTLASSO_N": "40", "LIFTLASSO_seed": "9", "LIFTLASSO_M": "12"}
    config = load_run_config(str(path), {"seed": 3}, environ=environ)
    assert config["N"] == 50
    assert config["M"] == 12
    assert config["seed"] == 3
    assert config["sigma"] == 0.2
    assert config["x_values"] == [1.0, 2.0, 3.0]


def test_environment_names_keep_key_case():
    assert read_environment({"LIFTLASSO_n": "40", "LIFTLASSO_k": "2.5"}) == {"k": 2.5}


def test_parse_value():
    assert parse_value("trials", " 12 ") == 12
    assert parse_value("alpha", "1.5, 2") == [1.5, 2.0]
    assert parse_value("sharp", "sí") is True
    assert parse_value("log_level", "debug") == "DEBUG"
    assert parse_value("sigma", "") is None
    assert parse_value("workers", 4) == 4


@pytest.mark.parametrize("key,raw", [("trials", "many"), ("sharp", "maybe"), ("sigma", "0.1.2")])
def test_bad_values(key, raw):
    with pytest.raises(ConfigError) as exc:
        parse_value(key, raw)
    assert exc.value.key == key


def test_unknown_key_in_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("nope=1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(str(path), environ={})


def test_missing_file():
    with pytest.raises(ConfigError):
        load_run_config("/no/such/file.cfg", environ={})


@pytest.mark.parametrize("overrides", [
    {"format": "pdf"},
    {"step_mode": "newton"},
    {"timezone": "Mars/Olympus"},
    {"trials": 0},
    {"lambda": 0.1, "ratio": 0.2},
    {"merge_radius": -1},
    {"sigma": 0.1, "snr_db": 20.0},
])
def test_invalid_configuration(overrides):
    with pytest.raises(ConfigError):
        load_run_config(overrides=overrides, environ={})


def test_all_workers_allowed():
    assert load_run_config(overrides={"workers": -1}, environ={})["workers"] == -1


def test_setup_logging_installs_one_handler():
    root = logging.getLogger()
    before = len(root.handlers)
    setup_logging("INFO", "UTC")
    setup_logging("DEBUG", "UTC")
    ours = [h for h in root.handlers if getattr(h, "_liftlasso", False)]
    assert len(ours) == 1
    assert len(root.handlers) <= before + 1
    assert root.level == logging.DEBUG
    root.removeHandler(ours[0])


def test_log_line_format():
    record = logging.LogRecord("x", logging.INFO, __file__, 1, "✅ listo", None, None)
    line = LocalTimeFormatter("UTC").format(record)
    assert re.fullmatch(r"\[\d{2}:\d{2}:\d{2}\] ✅ listo", line)
