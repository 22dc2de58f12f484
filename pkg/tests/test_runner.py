"""Tests for experiment configuration, the p-sweep runner, verification and summaries."""
import json
import os

import numpy as np
import pytest

from heisenberg_vqe.core.errors import ConfigError, RecordError
from heisenberg_vqe.core.lattice import build_chain
from heisenberg_vqe.core.optimizer import OptimizerConfig
from heisenberg_vqe.core.records import (FORMAT_VERSION, RecordWriter, SummaryRow, read_csv,
                                          write_csv)
from heisenberg_vqe.core.runner import (ExperimentConfig, ExperimentRunner, SummaryReport,
                                        load_experiment_config)
from heisenberg_vqe.core.simulator import dump_state, load_state, zero_state
from heisenberg_vqe.utils.helpers import relative_energy_error


def ring4_experiment(tmp_path, **overrides):
    data = {
        "system": {"kind": "chain-periodic", "shape": [4]},
        "p_values": [1, 2],
        "optimizer": {"rounds": 4, "seed": 11, "init_halfwidth": 0.5},
        "output_path": str(tmp_path / "ring4"),
    }
    data.update(overrides)
    return ExperimentConfig.from_dict(data)


@pytest.fixture
def finished(runner, tmp_path):
    exp = ring4_experiment(tmp_path)
    return exp, runner.run_experiment(exp)


class TestExperimentConfig:
    @pytest.mark.parametrize("overrides", [
        {"p_values": []},
        {"p_values": [1, 1]},
        {"p_values": [-1]},
        {"p_values": [0, 1]},
        {"embedding": "ladder"},
        {"param_mode": "ALL"},
        {"cost": "variance"},
        {"cost": "infidelity", "reference": False},
        {"k": 0},
        {"format_version": 2},
        {"system": {"kind": "honeycomb", "shape": [2]}},
        {"system": {"kind": "chain-periodic", "shape": [2]}},
        {"optimizer": {"rounds": 0}},
    ])
    def test_invalid(self, tmp_path, overrides):
        with pytest.raises(ConfigError):
            ring4_experiment(tmp_path, **overrides)

    def test_missing_system(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"p_values": [1]})

    def test_round_trip(self, tmp_path):
        exp = ring4_experiment(tmp_path, cost="energy+penalty", param_mode="OPS")
        assert ExperimentConfig.from_dict(exp.to_dict()) == exp
        assert exp.optimizer_settings().cost == "energy+penalty"
        assert exp.optimizer.cost == "energy"

    def test_defaults_fill_optimizer(self, tmp_path):
        defaults = OptimizerConfig(rounds=7, seed=3, gradient_tolerance=1e-7)
        exp = ExperimentConfig.from_dict({"system": {"kind": "chain-open", "shape": [6]},
                                          "p_values": [1, 2], "optimizer": {"seed": 8}},
                                         defaults=defaults)
        assert (exp.optimizer.rounds, exp.optimizer.seed) == (7, 8)
        assert exp.optimizer.gradient_tolerance == 1e-7


class TestPresets:
    def test_reference_string(self, config):
        exp = load_experiment_config("preset:chain-20:1-3,8", config)
        assert exp.p_values == [1, 2, 3, 8]
        assert exp.system == {"kind": "chain-periodic", "shape": [20]}
        assert exp.optimizer.rounds == config.chain_rounds

    def test_kagome_presets(self):
        grid = ExperimentConfig.preset("kagome-grid-20", [16])
        assert grid.embedding == "grid"
        assert grid.optimizer.rounds == 10
        torus = ExperimentConfig.preset("kagome-periodic-18", [37])
        assert torus.system["shape"] == [2, 3]

    def test_preset_file_with_overrides(self, config, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text(json.dumps({"preset": "kagome-periodic-18", "p_values": [1, 2],
                                    "optimizer": {"rounds": 2}}), encoding="utf-8")
        exp = load_experiment_config(str(path), config)
        assert exp.p_values == [1, 2]
        assert exp.optimizer.rounds == 2

    @pytest.mark.parametrize("reference", ["preset:chain-20", "preset:square-16:1",
                                           "preset:chain-20:1-x"])
    def test_bad_references(self, config, reference):
        with pytest.raises(ConfigError):
            load_experiment_config(reference, config)

    def test_unreadable_file(self, config, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_experiment_config(str(bad), config)

    def test_outputs_default_to_configured_dir(self, config, tmp_path):
        exp = load_experiment_config("preset:chain-20:1", config)
        assert exp.output_path == os.path.join(config.output_dir, "chain-20")
        path = tmp_path / "small_ring.json"
        path.write_text(json.dumps({"system": {"kind": "chain-periodic", "shape": [4]},
                                    "p_values": [1]}), encoding="utf-8")
        assert load_experiment_config(str(path), config).output_path == \
            os.path.join(config.output_dir, "small_ring")
        path.write_text(json.dumps({"system": {"kind": "chain-periodic", "shape": [4]},
                                    "p_values": [1], "output_path": "elsewhere"}),
                        encoding="utf-8")
        assert load_experiment_config(str(path), config).output_path == "elsewhere"


class TestRunExperiment:
    def test_records_and_rows(self, finished):
        exp, result = finished
        parsed_rows = read_csv(result.summary_path)
        assert [int(r["p"]) for r in parsed_rows] == [1, 2]
        assert [row.rounds for row in result.rows] == [4, 4]
        assert result.failures == []
        with open(result.records_path, encoding="utf-8") as f:
            lines = [json.loads(line) for line in f]
        assert lines[0]["type"] == "header"
        assert len(lines) == 1 + 8
        for line in lines[1:]:
            assert line["energy"] >= -2.0 - 1e-9
            assert line["e0"] == pytest.approx(-2.0, abs=1e-12)

    def test_best_energy_improves_with_depth(self, finished):
        _, result = finished
        assert result.rows[1].best_energy <= result.rows[0].best_energy + 1e-9
        assert result.rows[1].relative_energy_error < 1e-6
        assert result.rows[1].below_first_excited

    def test_reference_is_cached(self, runner, finished, config):
        assert any(name.endswith(".npy") for name in os.listdir(config.cache_dir))
        cached = runner.reference_spectrum(build_chain(4, periodic=True), 4)
        assert cached.e0 == pytest.approx(-2.0, abs=1e-12)

    def test_without_reference(self, runner, tmp_path):
        result = runner.run_experiment(ring4_experiment(tmp_path, reference=False, p_values=[1]))
        assert result.rows[0].relative_energy_error is None
        assert result.rows[0].e0 is None


class TestReferenceSpectrum:
    def test_infidelity_refused_without_reference(self, runner, chain4):
        with pytest.raises(ConfigError):
            runner.reference_spectrum(chain4, 4, cost="infidelity", enabled=False)
        assert runner.reference_spectrum(chain4, 4, enabled=False) is None

    def test_cap(self, runner, chain6):
        runner.config.ed_max_sites = 4
        assert runner.reference_spectrum(chain6, 4) is None
        with pytest.raises(ConfigError):
            runner.reference_spectrum(chain6, 4, cost="infidelity")


class TestVerify:
    def test_clean_records(self, runner, finished, chain4):
        report = runner.verify(finished[1].records_path, chain4)
        assert report.passed, report.failures
        assert report.checked == 8

    def test_tampered_energy(self, runner, finished, chain4):
        path = finished[1].records_path
        with open(path, encoding="utf-8") as f:
            lines = [json.loads(line) for line in f]
        lines[3]["energy"] += 1e-6
        with open(path, "w", encoding="utf-8") as f:
            f.writelines(json.dumps(line) + "\n" for line in lines)
        report = runner.verify(path, chain4)
        assert not report.passed
        assert any("stored energy" in failure for failure in report.failures)

    def test_tampered_summary(self, runner, finished, chain4):
        summary = finished[1].summary_path
        rows = read_csv(summary)
        rows[0]["best_energy"] = float(rows[0]["best_energy"]) + 1e-3
        write_csv(summary, list(rows[0]), rows)
        report = runner.verify(finished[1].records_path, chain4)
        assert any(failure.startswith("summary: p=1") for failure in report.failures)

    def test_saved_states(self, runner, tmp_path, chain4):
        exp = ring4_experiment(tmp_path, output_path=str(tmp_path / "with_states"))
        result = runner.run_experiment(exp, save_states=True)
        for p in exp.p_values:
            state = load_state(ExperimentRunner.state_path(result.records_path, p))
            assert state.shape == (16,)
            assert abs(np.vdot(state, state) - 1.0) < 1e-12
        assert runner.verify(result.records_path, chain4).passed

        dump_state(zero_state(4), ExperimentRunner.state_path(result.records_path, 2))
        report = runner.verify(result.records_path, chain4)
        assert any(failure.startswith("p=2 state dump") for failure in report.failures)

    def test_dimension_mismatch(self, runner, finished, chain6):
        report = runner.verify(finished[1].records_path, chain6)
        assert any("dimension mismatch" in failure for failure in report.failures)

    def test_graph_mismatch(self, runner, finished):
        report = runner.verify(finished[1].records_path, build_chain(4))
        assert any("graph mismatch" in failure for failure in report.failures)

    def test_unreadable(self, runner, tmp_path, chain4):
        report = runner.verify(str(tmp_path / "nothing.jsonl"), chain4)
        assert not report.passed


class TestSummarize:
    def test_tables(self, runner, finished, tmp_path):
        plots = tmp_path / "plots"
        report = runner.summarize(finished[1].records_path, plot_dir=str(plots))
        assert [row.p for row in report.rows] == [1, 2]
        assert len(report.scatter) == 8
        assert set(report.paths) == {"summary", "trace_energy", "trace_infidelity", "scatter"}
        assert sorted(os.listdir(plots)) == ["scatter.csv", "trace_energy.csv",
                                             "trace_infidelity.csv"]
        for row in report.rows:
            assert row.relative_energy_error == relative_energy_error(row.best_energy, row.e0)
        assert report.rows == finished[1].rows

    def test_no_records(self, runner, tmp_path):
        path = str(tmp_path / "empty.jsonl")
        with RecordWriter(path, {"e0": None}):
            pass
        with pytest.raises(RecordError):
            runner.summarize(path)

    def test_error_slope(self):
        rows = [SummaryRow(p=p, best_energy=-1.0, relative_energy_error=err, best_infidelity=None,
                           e0=-1.0, e1=None, total_function_calls=0, below_first_excited=None,
                           rounds_ok=1, rounds=1)
                for p, err in ((1, 1e-2), (2, 1e-4), (3, 1e-6))]
        report = SummaryReport(rows=rows, scatter=[], violations=[], paths={})
        assert report.log_error_slope() == pytest.approx(-2.0)
        assert SummaryReport(rows=rows[:1], scatter=[], violations=[], paths={}) \
            .log_error_slope() is None


def test_exact_spin_gap(runner, tmp_path):
    report = runner.spin_gap(ring4_experiment(tmp_path), 1)
    assert report.exact_gap == pytest.approx(1.0, abs=1e-10)
    assert report.estimate.e_s1 >= -1.0 - 1e-10


def test_format_version_is_recorded(finished):
    with open(finished[1].records_path, encoding="utf-8") as f:
        assert all(json.loads(line)["format_version"] == FORMAT_VERSION for line in f)
