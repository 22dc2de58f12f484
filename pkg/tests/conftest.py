"""Shared fixtures: isolated configuration, logger, runner and small graphs."""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from heisenberg_vqe.config.settings import Config  # noqa: E402
from heisenberg_vqe.core.ansatz import build_hva  # noqa: E402
from heisenberg_vqe.core.lattice import (SpinGraph, build_chain, build_kagome_open,  # noqa: E402
                                         dimer_covering, edge_coloring)
from heisenberg_vqe.core.records import SpectrumCache  # noqa: E402
from heisenberg_vqe.core.runner import ExperimentRunner  # noqa: E402
from heisenberg_vqe.logging.handlers import Logger  # noqa: E402


@pytest.fixture
def config(tmp_path, monkeypatch):
    """Config whose files all live under tmp_path."""
    monkeypatch.setattr(Config, "CONFIG_FILE", str(tmp_path / "config" / "config.json"))
    monkeypatch.setattr(Config, "LOG_FILE", str(tmp_path / "logs" / "heisenberg_vqe.log"))
    monkeypatch.setattr(Config, "OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setattr(Config, "CACHE_DIR", str(tmp_path / "cache"))
    cfg = Config()
    return cfg


@pytest.fixture
def logger(config):
    return Logger(config)


@pytest.fixture
def runner(config, logger):
    return ExperimentRunner(config, logger, SpectrumCache(config.cache_dir))


@pytest.fixture
def chain4():
    return build_chain(4, periodic=True)


@pytest.fixture
def chain6():
    return build_chain(6, periodic=True)


@pytest.fixture
def kagome12():
    return build_kagome_open(2, 3, phase=1)


@pytest.fixture
def triangle():
    return SpinGraph(n_sites=3, edges=((0, 1), (0, 2), (1, 2)))


def hva(graph, p, mode="OPG", embedding=None):
    """Ansatz with the default coloring and covering of ``graph``."""
    return build_hva(graph, edge_coloring(graph), dimer_covering(graph), p, mode=mode,
                     embedding=embedding)


def random_theta(circuit, rng, scale=np.pi):
    return rng.uniform(-scale, scale, circuit.M)
