"""
Experiment orchestration for Heisenberg VQE.

This module contains the experiment configuration, the named presets of the
three standard protocols and the runner that sweeps the cycle count, writes
one record per local minimum, summarizes records into figure-ready tables and
verifies stored results against the simulator.
"""
import json
import math
import os
import time
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional

import numpy as np

from heisenberg_vqe.config.settings import Config
from heisenberg_vqe.logging.handlers import Logger
from heisenberg_vqe.utils.helpers import (format_duration, monotonic_violations, parse_int_list,
                                          relative_energy_error)
from .ansatz import PARAM_MODES, AnsatzCircuit, build_hva
from .errors import ConfigError, HeisenbergVQEError, LatticeError, RecordError
from .lattice import (DimerCovering, EdgeColoring, GridEmbedding, SpinGraph, build_from_kind,
                      dimer_covering, edge_coloring, embed_on_grid)
from .optimizer import (OptimizerConfig, RunRecord, SpinGapResult, multistart_vqe,
                        select_best, spin_gap)
from .records import (FORMAT_VERSION, SCATTER_FIELDS, SUMMARY_FIELDS, RecordWriter,
                      SpectrumCache, SummaryRow, read_csv, read_records, write_csv)
from .simulator import COSTS, dump_state, energy, load_state, run
from .spectra import SpectrumResult, low_spectrum

EMBEDDINGS = ("none", "grid")

PRESETS: Dict[str, Dict[str, Any]] = {
    "chain-20": {"system": {"kind": "chain-periodic", "shape": [20]},
                 "embedding": "none", "rounds": 32},
    "kagome-grid-20": {"system": {"kind": "kagome-open", "shape": [2, 5]},
                       "embedding": "grid", "rounds": 10},
    "kagome-periodic-18": {"system": {"kind": "kagome-periodic", "shape": [2, 3]},
                           "embedding": "none", "rounds": 10},
}

ENERGY_TOLERANCE = 1e-9
ED_TOLERANCE = 1e-10


def optimizer_defaults(config: Config) -> OptimizerConfig:
    """Optimizer settings taken from the user configuration."""
    return OptimizerConfig(
        rounds=config.rounds,
        seed=config.seed,
        init_halfwidth=config.init_halfwidth,
        gradient_tolerance=config.gradient_tolerance,
        max_iterations=config.max_iterations,
        penalty_weight=config.penalty_weight,
        threads=config.threads,
    )


@dataclass
class ExperimentConfig:
    """One p-sweep.

    Args:
        system: {"kind": graph kind, "shape": size parameters}
        p_values: Cycle counts to sweep, in order
        embedding: "none" (all-to-all) or "grid"
        param_mode: "OPG" or "OPS"
        cost: Cost minimized by the optimizer
        optimizer: Multistart settings; its cost is overridden by ``cost``
        output_path: Directory receiving records and summary; None means a
            directory under the configured output_dir
        reference: Compute the exact-diagonalization reference
        k: Eigenvalues requested from the reference
    """
    system: Dict[str, Any]
    p_values: List[int]
    embedding: str = "none"
    param_mode: str = "OPG"
    cost: str = "energy"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    output_path: Optional[str] = None
    reference: bool = True
    k: int = 4
    format_version: int = FORMAT_VERSION

    def validate(self) -> None:
        """Check every field and that the graph can be built.

        Raises:
            ConfigError: Describing the first problem found
        """
        if self.format_version != FORMAT_VERSION:
            raise ConfigError(f"unsupported format_version {self.format_version}")
        if not self.p_values:
            raise ConfigError("p_values must not be empty")
        for p in self.p_values:
            if not isinstance(p, int) or isinstance(p, bool) or p < 1:
                raise ConfigError(f"p values must be positive integers, got {p!r}")
        if len(set(self.p_values)) != len(self.p_values):
            raise ConfigError(f"p_values contain duplicates: {self.p_values}")
        if self.embedding not in EMBEDDINGS:
            raise ConfigError(f"unknown embedding '{self.embedding}'")
        if self.param_mode not in PARAM_MODES:
            raise ConfigError(f"unknown parameter mode '{self.param_mode}'")
        if self.cost not in COSTS:
            raise ConfigError(f"unknown cost '{self.cost}'")
        if self.cost == "infidelity" and not self.reference:
            raise ConfigError("infidelity cost needs the exact-diagonalization reference")
        if self.k < 1:
            raise ConfigError(f"k must be positive, got {self.k}")
        if "kind" not in self.system:
            raise ConfigError("system needs a graph kind")
        self.optimizer_settings().validate()
        try:
            build_from_kind(self.system["kind"], self.system.get("shape", ()))
        except (LatticeError, TypeError, ValueError) as e:
            raise ConfigError(f"cannot build system {self.system}: {e}") from e

    def optimizer_settings(self) -> OptimizerConfig:
        return replace(self.optimizer, cost=self.cost)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format_version": self.format_version,
            "system": {"kind": self.system["kind"], "shape": list(self.system.get("shape", ()))},
            "embedding": self.embedding,
            "p_values": list(self.p_values),
            "param_mode": self.param_mode,
            "cost": self.cost,
            "optimizer": self.optimizer.to_dict(),
            "output_path": self.output_path,
            "reference": self.reference,
            "k": self.k,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any],
                  defaults: Optional[OptimizerConfig] = None) -> "ExperimentConfig":
        """Build and validate a config; optimizer keys override ``defaults``.

        Raises:
            ConfigError: Missing or invalid fields
        """
        try:
            base = (defaults or OptimizerConfig()).to_dict()
            optimizer = OptimizerConfig.from_dict({**base, **data.get("optimizer", {})})
            config = cls(
                system=dict(data["system"]),
                p_values=[int(p) for p in data["p_values"]],
                embedding=data.get("embedding", "none"),
                param_mode=data.get("param_mode", "OPG"),
                cost=data.get("cost", "energy"),
                optimizer=optimizer,
                output_path=data.get("output_path"),
                reference=bool(data.get("reference", True)),
                k=int(data.get("k", 4)),
                format_version=int(data.get("format_version", FORMAT_VERSION)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"malformed experiment config: {e}") from e
        config.validate()
        return config

    @classmethod
    def preset(cls, name: str, p_values: List[int], output_path: Optional[str] = None,
               defaults: Optional[OptimizerConfig] = None,
               rounds: Optional[int] = None) -> "ExperimentConfig":
        """Ready config for one of the standard protocols in PRESETS.

        ``rounds`` replaces the round count of the preset.
        """
        if name not in PRESETS:
            raise ConfigError(f"unknown preset '{name}', expected one of {sorted(PRESETS)}")
        preset = PRESETS[name]
        optimizer = replace(defaults or OptimizerConfig(), rounds=rounds or preset["rounds"])
        config = cls(system=dict(preset["system"]), p_values=list(p_values),
                     embedding=preset["embedding"], optimizer=optimizer,
                     output_path=output_path)
        config.validate()
        return config


def load_experiment_config(path: str, config: Optional[Config] = None) -> ExperimentConfig:
    """Read an experiment file, or a preset given as ``preset:<name>:<p list>``.

    Raises:
        ConfigError: Unreadable or invalid file
    """
    defaults = optimizer_defaults(config) if config is not None else None

    def preset_rounds(name: str) -> Optional[int]:
        # Chains use the separate chain round count of the user configuration.
        kind = PRESETS.get(name, {}).get("system", {}).get("kind", "")
        return config.chain_rounds if config is not None and kind.startswith("chain") else None

    def located(exp: ExperimentConfig, name: str) -> ExperimentConfig:
        if exp.output_path is not None or config is None:
            return exp
        return replace(exp, output_path=os.path.join(config.output_dir, name))

    if path.startswith("preset:"):
        try:
            _, name, p_text = path.split(":", 2)
            p_values = parse_int_list(p_text)
        except ValueError as e:
            raise ConfigError(f"preset reference must be preset:<name>:<p values>: {e}") from e
        return located(ExperimentConfig.preset(name, p_values, defaults=defaults,
                                               rounds=preset_rounds(name)), name)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read experiment config {path}: {e}") from e
    stem = os.path.splitext(os.path.basename(path))[0]
    if "preset" in data:
        exp = ExperimentConfig.preset(data["preset"], data.get("p_values", [1]),
                                      data.get("output_path"), defaults=defaults,
                                      rounds=preset_rounds(data["preset"]))
        exp = replace(exp, optimizer=OptimizerConfig.from_dict(
            {**exp.optimizer.to_dict(), **data.get("optimizer", {})}))
        return located(exp, stem)
    return located(ExperimentConfig.from_dict(data, defaults=defaults), stem)


@dataclass
class System:
    graph: SpinGraph
    coloring: EdgeColoring
    covering: DimerCovering
    embedding: Optional[GridEmbedding] = None

    def circuit(self, p: int, mode: str = "OPG") -> AnsatzCircuit:
        return build_hva(self.graph, self.coloring, self.covering, p, mode=mode,
                         embedding=self.embedding)


def build_system(exp: ExperimentConfig, graph: Optional[SpinGraph] = None) -> System:
    """Graph, coloring, covering and optional embedding of an experiment."""
    if graph is None:
        graph = build_from_kind(exp.system["kind"], exp.system.get("shape", ()))
    embedding = embed_on_grid(graph) if exp.embedding == "grid" else None
    return System(graph=graph, coloring=edge_coloring(graph), covering=dimer_covering(graph),
                  embedding=embedding)


def summary_row(p: int, records: List[RunRecord], e0: Optional[float],
                e1: Optional[float]) -> SummaryRow:
    """Best-energy minimum of one cycle count."""
    best = select_best(records)
    ok = [r for r in records if not r.failed]
    best_energy = best.energy if best is not None else float("nan")
    return SummaryRow(
        p=p,
        best_energy=best_energy,
        relative_energy_error=relative_energy_error(best_energy, e0),
        best_infidelity=best.infidelity if best is not None else None,
        e0=e0,
        e1=e1,
        total_function_calls=sum(r.n_function_calls for r in records),
        below_first_excited=(best_energy < e1) if (best is not None and e1 is not None
                                                   and math.isfinite(e1)) else None,
        rounds_ok=len(ok),
        rounds=len(records),
    )


@dataclass
class ExperimentResult:
    rows: List[SummaryRow]
    records_path: str
    summary_path: str
    failures: List[str] = field(default_factory=list)


@dataclass
class VerificationReport:
    checked: int = 0
    skipped: int = 0
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


@dataclass
class SummaryReport:
    rows: List[SummaryRow]
    scatter: List[Dict[str, Any]]
    violations: List[str]
    paths: Dict[str, str]

    def log_error_slope(self) -> Optional[float]:
        """Slope of log10 of the best relative error against p, when defined."""
        points = [(r.p, math.log10(r.relative_energy_error)) for r in self.rows
                  if r.relative_energy_error is not None and r.relative_energy_error > 0]
        if len(points) < 2:
            return None
        ps, logs = zip(*points)
        return float(np.polyfit(ps, logs, 1)[0])


@dataclass
class GapReport:
    estimate: SpinGapResult
    exact_gap: Optional[float] = None


class ExperimentRunner:
    """Runs, summarizes and verifies experiments.

    Optimizer rounds may run on several threads; all file writes happen on
    the calling thread through one RecordWriter.
    """

    RECORDS_FILE = "records.jsonl"
    SUMMARY_FILE = "summary.csv"
    STATES_DIR = "states"

    def __init__(self, config: Config, logger: Logger,
                 cache: Optional[SpectrumCache] = None) -> None:
        """Initialize the runner with its dependencies.

        Args:
            config: Configuration settings manager
            logger: Logging service for run progress
            cache: Exact-diagonalization cache; defaults to config.cache_dir
        """
        self.config = config
        self.logger = logger
        self.cache = cache if cache is not None else SpectrumCache(config.cache_dir)

    @classmethod
    def state_path(cls, records_path: str, p: int) -> str:
        directory = os.path.dirname(os.path.abspath(records_path))
        return os.path.join(directory, cls.STATES_DIR, f"p{p}.bin")

    def reference_spectrum(self, graph: SpinGraph, k: int, cost: str = "energy",
                           enabled: bool = True) -> Optional[SpectrumResult]:
        """Exact low spectrum through the cache, or None when disabled or too large.

        Raises:
            ConfigError: The infidelity cost was requested without a feasible reference
        """
        if not enabled:
            if cost == "infidelity":
                raise ConfigError("infidelity cost needs the exact-diagonalization reference")
            return None
        if graph.n_sites > self.config.ed_max_sites:
            if cost == "infidelity":
                raise ConfigError(f"exact diagonalization of {graph.n_sites} sites exceeds the "
                                  f"configured cap of {self.config.ed_max_sites}")
            self.logger.warning(f"no reference: {graph.n_sites} sites exceed the ED cap "
                                f"of {self.config.ed_max_sites}")
            return None
        cached = self.cache.load(graph, k, ED_TOLERANCE)
        if cached is not None:
            self.logger.info(f"using cached reference for graph {graph.graph_hash()}")
            return cached
        result = low_spectrum(graph, k=k, tol=ED_TOLERANCE, max_sites=self.config.ed_max_sites)
        self.cache.store(graph, k, ED_TOLERANCE, result)
        return result

    def run_experiment(self, exp: ExperimentConfig, save_states: bool = False) -> ExperimentResult:
        """Sweep p, writing one record per local minimum and one summary row per p.

        With ``save_states`` the best state of each p is dumped to
        ``states/p<p>.bin`` next to the records.

        Returns:
            ExperimentResult with the summary rows and output paths
        """
        exp.validate()
        system = build_system(exp)
        graph = system.graph
        reference = self.reference_spectrum(graph, exp.k, exp.cost, exp.reference)
        e0 = reference.e0 if reference is not None else None
        e1 = reference.e1 if reference is not None else None
        if e0 is not None:
            self.logger.info(f"reference E0 = {e0:.12f}, E1 = {e1:.12f}")

        out_dir = exp.output_path or os.path.join(self.config.output_dir, "experiment")
        os.makedirs(out_dir, exist_ok=True)
        records_path = os.path.join(out_dir, self.RECORDS_FILE)
        summary_path = os.path.join(out_dir, self.SUMMARY_FILE)
        header = {
            "experiment": exp.to_dict(),
            "graph": graph.to_dict(),
            "graph_hash": graph.graph_hash(),
            "e0": e0,
            "e1": e1,
        }

        rows: List[SummaryRow] = []
        failures: List[str] = []
        with self.logger.context(graph=graph.graph_hash()[:8]), \
                RecordWriter(records_path, header) as writer:
            for p in exp.p_values:
                with self.logger.context(p=p):
                    row = self._run_cycle_count(system, exp, p, reference, writer, failures,
                                                records_path if save_states else None)
                rows.append(row)

        write_csv(summary_path, SUMMARY_FIELDS, [row.to_dict() for row in rows])
        self.logger.info(f"wrote {records_path} and {summary_path}")
        return ExperimentResult(rows=rows, records_path=records_path, summary_path=summary_path,
                                failures=failures)

    def _run_cycle_count(self, system: System, exp: ExperimentConfig, p: int,
                         reference: Optional[SpectrumResult], writer: RecordWriter,
                         failures: List[str],
                         records_path: Optional[str]) -> SummaryRow:
        graph = system.graph
        settings = exp.optimizer_settings()
        e0 = reference.e0 if reference is not None else None
        e1 = reference.e1 if reference is not None else None
        circuit = system.circuit(p, exp.param_mode)
        self.logger.info(f"{circuit.M} parameters, {settings.rounds} rounds")
        start = time.monotonic()
        result = multistart_vqe(circuit, graph, settings, reference)
        for record in result.records:
            writer.write(record, e0=e0, e1=e1,
                         relative_energy_error=relative_energy_error(record.energy, e0))
            if e0 is not None and not record.failed and record.energy < e0 - ENERGY_TOLERANCE:
                self.logger.error(f"round {record.round}: energy {record.energy!r} "
                                  f"below the ground energy {e0!r}")
        failures.extend(f"p={p} {f}" for f in result.failures)
        row = summary_row(p, result.records, e0, e1)
        best = select_best(result.records)
        if records_path is not None and best is not None:
            dump_state(run(circuit, np.asarray(best.theta_final)), self.state_path(records_path, p))
        self.logger.info(f"done in {format_duration(time.monotonic() - start)}: "
                         f"best energy {row.best_energy:.12f}")
        return row

    def verify(self, records_path: str, graph: SpinGraph) -> VerificationReport:
        """Recompute every stored energy from its final parameters.

        Checks agreement to 1e-9, the variational floor and the stored relative
        error. Unreadable lines and a graph that does not match the records
        are reported as failures.
        """
        report = VerificationReport()
        try:
            data = read_records(records_path)
        except RecordError as e:
            report.failures.append(str(e))
            report.failures.extend(e.failures or [])
            return report
        report.failures.extend(data.failures)

        header = data.header
        n_records = int(header.get("graph", {}).get("n_sites", -1))
        if n_records != graph.n_sites:
            report.failures.append(
                f"dimension mismatch: records describe {n_records} sites, graph has {graph.n_sites}")
            return report
        if header.get("graph_hash") != graph.graph_hash():
            report.failures.append(f"graph mismatch: records were written for graph "
                                   f"{header.get('graph_hash')}, not {graph.graph_hash()}")
            return report

        try:
            exp = ExperimentConfig.from_dict(header["experiment"])
            system = build_system(exp, graph=graph)
        except (HeisenbergVQEError, KeyError) as e:
            report.failures.append(f"cannot rebuild the experiment: {e}")
            return report

        e0 = header.get("e0")
        circuits: Dict[int, AnsatzCircuit] = {}
        for record, extra in zip(data.records, data.extras):
            label = f"p={record.p} round {record.round}"
            if record.failed:
                report.skipped += 1
                continue
            if record.p not in circuits:
                circuits[record.p] = system.circuit(record.p, exp.param_mode)
            circuit = circuits[record.p]
            theta = np.asarray(record.theta_final, dtype=np.float64)
            if theta.size != circuit.M:
                report.failures.append(f"{label}: {theta.size} parameters, circuit has {circuit.M}")
                continue
            try:
                recomputed = energy(run(circuit, theta), graph, circuit.site_to_qubit)
            except HeisenbergVQEError as e:
                report.failures.append(f"{label}: simulation failed: {e}")
                continue
            report.checked += 1
            if abs(recomputed - record.energy) > ENERGY_TOLERANCE:
                report.failures.append(f"{label}: stored energy {record.energy!r}, "
                                       f"recomputed {recomputed!r}")
            if e0 is not None and record.energy < e0 - ENERGY_TOLERANCE:
                report.failures.append(f"{label}: energy {record.energy!r} below E0 {e0!r}")
            stored = extra.get("relative_energy_error")
            if stored is not None:
                expected = relative_energy_error(record.energy, e0)
                if expected is None or abs(stored - expected) > 1e-12:
                    report.failures.append(f"{label}: stored relative error {stored!r}, "
                                           f"expected {expected!r}")

        by_p: Dict[int, List[RunRecord]] = {}
        for record in data.records:
            by_p.setdefault(record.p, []).append(record)
        self._verify_summary(records_path, by_p, report)
        for p, records in sorted(by_p.items()):
            best = select_best(records)
            path = self.state_path(records_path, p)
            if best is None or not os.path.exists(path):
                continue
            circuit = circuits.get(p) or system.circuit(p, exp.param_mode)
            try:
                stored_energy = energy(load_state(path), graph, circuit.site_to_qubit)
            except HeisenbergVQEError as e:
                report.failures.append(f"p={p} state dump: {e}")
                continue
            if abs(stored_energy - best.energy) > ENERGY_TOLERANCE:
                report.failures.append(f"p={p} state dump: energy {stored_energy!r}, "
                                       f"best record {best.energy!r}")

        if report.passed:
            self.logger.info(f"verified {report.checked} records in {records_path}")
        else:
            self.logger.warning(f"{len(report.failures)} verification failures in {records_path}")
        return report

    def _verify_summary(self, records_path: str, by_p: Dict[int, List[RunRecord]],
                        report: VerificationReport) -> None:
        """Compare the summary table next to the records with the best records."""
        path = os.path.join(os.path.dirname(os.path.abspath(records_path)), self.SUMMARY_FILE)
        if not os.path.exists(path):
            return
        try:
            rows = read_csv(path)
        except RecordError as e:
            report.failures.append(str(e))
            return
        for row in rows:
            try:
                p, tabulated = int(row["p"]), float(row["best_energy"])
            except (KeyError, ValueError):
                report.failures.append(f"summary: malformed row {row}")
                continue
            best = select_best(by_p.get(p, []))
            if best is None:
                if math.isfinite(tabulated):
                    report.failures.append(f"summary: p={p} has no successful record")
            elif abs(tabulated - best.energy) > ENERGY_TOLERANCE:
                report.failures.append(f"summary: p={p} best energy {tabulated!r}, "
                                       f"records give {best.energy!r}")

    def summarize(self, records_path: str, output: Optional[str] = None,
                  plot_dir: Optional[str] = None) -> SummaryReport:
        """Per-p best-energy trace plus every minimum as a scatter row.

        Raises:
            RecordError: The file holds no records
        """
        data = read_records(records_path)
        if not data.records:
            raise RecordError(f"no records in {records_path}", failures=data.failures)
        e0, e1 = data.header.get("e0"), data.header.get("e1")

        by_p: Dict[int, List[RunRecord]] = {}
        for record in data.records:
            by_p.setdefault(record.p, []).append(record)
        rows = [summary_row(p, by_p[p], e0, e1) for p in sorted(by_p)]

        scatter = [{
            "format_version": FORMAT_VERSION,
            "p": r.p,
            "round": r.round,
            "energy": r.energy,
            "relative_energy_error": relative_energy_error(r.energy, e0),
            "infidelity": r.infidelity,
            "n_function_calls": r.n_function_calls,
            "converged": r.converged,
        } for r in data.records]

        violations = [f"best energy rises from p={rows[i - 1].p} to p={rows[i].p}"
                      for i in monotonic_violations([r.best_energy for r in rows])]
        for message in violations:
            self.logger.warning(message)

        output = output or os.path.join(os.path.dirname(os.path.abspath(records_path)),
                                        self.SUMMARY_FILE)
        paths = {"summary": write_csv(output, SUMMARY_FIELDS, [r.to_dict() for r in rows])}
        if plot_dir is not None:
            trace = [r.to_dict() for r in rows]
            paths["trace_energy"] = write_csv(
                os.path.join(plot_dir, "trace_energy.csv"),
                ["format_version", "p", "best_energy", "relative_energy_error", "e0", "e1"], trace)
            paths["trace_infidelity"] = write_csv(
                os.path.join(plot_dir, "trace_infidelity.csv"),
                ["format_version", "p", "best_infidelity"], trace)
            paths["scatter"] = write_csv(os.path.join(plot_dir, "scatter.csv"),
                                         SCATTER_FIELDS, scatter)
        self.logger.info(f"summarized {len(data.records)} minima over {len(rows)} cycle counts")
        return SummaryReport(rows=rows, scatter=scatter, violations=violations, paths=paths)

    def spin_gap(self, exp: ExperimentConfig, p: int) -> GapReport:
        """Singlet-triplet gap estimate at one p, with the sector-resolved exact gap."""
        exp.validate()
        system = build_system(exp)
        estimate = spin_gap(system.graph, system.coloring, system.covering, p,
                            exp.optimizer_settings(), mode=exp.param_mode,
                            embedding=system.embedding)
        exact = None
        if exp.reference and system.graph.n_sites <= self.config.ed_max_sites:
            lowest = 0.5 * (system.graph.n_sites % 2)
            singlet = low_spectrum(system.graph, k=1, magnetization=lowest,
                                   max_sites=self.config.ed_max_sites)
            triplet = low_spectrum(system.graph, k=1, magnetization=lowest + 1.0,
                                   max_sites=self.config.ed_max_sites)
            exact = triplet.e0 - singlet.e0
            self.logger.info(f"exact spin gap {exact:.10f}, estimate {estimate.gap_estimate:.10f}")
        return GapReport(estimate=estimate, exact_gap=exact)
