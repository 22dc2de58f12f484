"""Tests for the configuration file, logger setup and helpers."""
import json
import logging
import os

import pytest

from heisenberg_vqe.config.settings import Config
from heisenberg_vqe.core.runner import optimizer_defaults
from heisenberg_vqe.logging.handlers import LOGGER_NAME, Logger, get_module_logger
from heisenberg_vqe.utils.helpers import (format_duration, monotonic_violations, parse_int_list,
                                          relative_energy_error)


def _ensure_parent(path):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    return path


class TestConfig:
    def test_defaults(self, config):
        assert config.rounds == Config.DEFAULT_ROUNDS
        assert config.chain_rounds == 32
        assert config.ed_max_sites == 24
        assert config.LOG_LEVEL == "WARNING"

    def test_setters_persist(self, config):
        assert config.set_rounds("12") == (True, "Rounds set to 12")
        assert config.set_threads(4)[0]
        assert config.set_penalty_weight(0.5)[0]
        assert config.set_log_level("debug")[0]
        reloaded = Config()
        assert (reloaded.rounds, reloaded.threads, reloaded.penalty_weight) == (12, 4, 0.5)
        assert reloaded.LOG_LEVEL == "DEBUG"

    @pytest.mark.parametrize("setter,value", [
        ("set_rounds", 0), ("set_rounds", "many"), ("set_threads", 1000),
        ("set_penalty_weight", -1), ("set_penalty_weight", "x"), ("set_log_level", "LOUD"),
    ])
    def test_setters_reject(self, config, setter, value):
        ok, message = getattr(config, setter)(value)
        assert not ok
        assert message

    def test_invalid_values_are_ignored(self, config):
        with open(_ensure_parent(Config.CONFIG_FILE), "w", encoding="utf-8") as f:
            json.dump({"rounds": 0, "threads": "two", "seed": 5, "init_halfwidth": -1,
                       "ed_max_sites": 18, "log_level": "chatty"}, f)
        loaded = Config()
        assert loaded.rounds == Config.DEFAULT_ROUNDS
        assert loaded.threads == 1
        assert loaded.seed == 5
        assert loaded.init_halfwidth == Config.INIT_HALFWIDTH
        assert loaded.ed_max_sites == 18
        assert loaded.LOG_LEVEL == "WARNING"

    def test_dense_cap_loaded_and_bounded(self, config):
        assert config.dense_max_sites == Config.DENSE_MAX_SITES
        with open(_ensure_parent(Config.CONFIG_FILE), "w", encoding="utf-8") as f:
            json.dump({"dense_max_sites": 8}, f)
        assert Config().dense_max_sites == 8
        with open(Config.CONFIG_FILE, "w", encoding="utf-8") as f:
            json.dump({"dense_max_sites": 40}, f)
        assert Config().dense_max_sites == Config.DENSE_MAX_SITES

    def test_corrupt_file_falls_back(self, config, capsys):
        with open(_ensure_parent(Config.CONFIG_FILE), "w", encoding="utf-8") as f:
            f.write("{broken")
        loaded = Config()
        assert loaded.rounds == Config.DEFAULT_ROUNDS
        assert "Error loading configuration" in capsys.readouterr().out

    def test_optimizer_defaults(self, config):
        config.seed = 42
        config.gradient_tolerance = 1e-8
        settings = optimizer_defaults(config)
        assert (settings.seed, settings.gradient_tolerance, settings.rounds) == (42, 1e-8, 10)


class TestLogger:
    def test_file_and_console(self, config, capsys):
        config.LOG_LEVEL = "INFO"
        logger = Logger(config)
        logger.info("sweep started")
        logger.debug("hidden detail")
        for handler in logger.logger.handlers:
            handler.flush()
        with open(config.LOG_FILE, encoding="utf-8") as f:
            text = f.read()
        assert "INFO" in text and "sweep started" in text
        assert "hidden detail" not in text
        assert "INFO: sweep started" in capsys.readouterr().out

    def test_handlers_are_not_duplicated(self, config):
        Logger(config)
        logger = Logger(config)
        assert len(logger.logger.handlers) == 2

    def test_module_loggers_propagate(self, config):
        child = get_module_logger("heisenberg_vqe.core.spectra")
        assert child.name == f"{LOGGER_NAME}.spectra"
        assert child.parent is logging.getLogger(LOGGER_NAME)

    def test_run_context_tags_lines(self, config, capsys):
        config.LOG_LEVEL = "INFO"
        logger = Logger(config)
        with logger.context(graph="ab12cd34"):
            with logger.context(p=3):
                logger.info("round 2 converged")
                get_module_logger("heisenberg_vqe.core.optimizer").info("round 5 converged")
            logger.info("sweep finished")
        logger.info("outside")
        for handler in logger.logger.handlers:
            handler.flush()
        out = capsys.readouterr().out
        assert "INFO: [graph=ab12cd34 p=3] round 2 converged" in out
        assert "INFO: [graph=ab12cd34] sweep finished" in out
        assert "INFO: outside" in out
        with open(config.LOG_FILE, encoding="utf-8") as f:
            text = f.read()
        assert f"{LOGGER_NAME}.optimizer - [graph=ab12cd34 p=3] round 5 converged" in text

    def test_context_restored_after_error(self, config):
        logger = Logger(config)
        with pytest.raises(RuntimeError):
            with logger.context(p=7):
                raise RuntimeError("boom")
        assert logger.run_context.fields == {}


class TestHelpers:
    @pytest.mark.parametrize("seconds,text", [(0, "0:00"), (59.9, "0:59"), (61, "1:01"),
                                              (3725, "1:02:05"), (-3, "0:00")])
    def test_format_duration(self, seconds, text):
        assert format_duration(seconds) == text

    def test_relative_energy_error(self):
        assert relative_energy_error(-1.9, -2.0) == pytest.approx(0.05)
        assert relative_energy_error(-1.9, None) is None
        assert relative_energy_error(float("nan"), -2.0) is None
        assert relative_energy_error(1.0, 0.0) is None

    def test_parse_int_list(self):
        assert parse_int_list("1,2,5-8") == [1, 2, 5, 6, 7, 8]
        assert parse_int_list(" 3 , ") == [3]
        with pytest.raises(ValueError):
            parse_int_list("4-2")
        with pytest.raises(ValueError):
            parse_int_list("a")

    def test_monotonic_violations(self):
        assert monotonic_violations([-1.0, -1.5, -1.4, -1.4 + 1e-13, float("nan"), -2.0]) == [2]
