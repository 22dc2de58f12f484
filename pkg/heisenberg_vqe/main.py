#!/usr/bin/env python3
"""
Heisenberg VQE - variational ground states of the Heisenberg antiferromagnet
Package entry point

This module provides the command-line interface used by both the installed
'heisenberg-vqe' command and the repository's main.py script.
"""
import argparse
import json
import os
import sys
from dataclasses import replace
from typing import Any, List, Optional

import numpy as np

from heisenberg_vqe.config.settings import Config
from heisenberg_vqe.logging.handlers import Logger
from heisenberg_vqe.core.ansatz import PARAM_MODES, AnsatzCircuit, build_hva, circuit_stats
from heisenberg_vqe.core.compiler import compilation_error, compile_circuit
from heisenberg_vqe.core.errors import ConfigError, HeisenbergVQEError
from heisenberg_vqe.core.lattice import (GRAPH_KINDS, SpinGraph, build_from_kind, dimer_covering,
                                         edge_coloring, embed_on_grid)
from heisenberg_vqe.core.runner import ExperimentRunner, load_experiment_config
from heisenberg_vqe.core.spectra import dense_spectrum, low_spectrum, sector_dimension

COMPILE_TOLERANCE = 1e-9


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per workflow."""
    parser = argparse.ArgumentParser(
        description='Heisenberg VQE - variational ground states of the Heisenberg antiferromagnet')
    parser.add_argument('--verbose', '-v', action='store_true', help='Enable verbose logging (INFO level)')
    parser.add_argument('--debug', '-d', action='store_true', help='Enable debug logging (DEBUG level)')
    parser.add_argument('--config', type=str, help='Path to custom config file')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Sweep p for one experiment')
    run.add_argument('experiment', help='Experiment JSON file or preset:<name>:<p values>')
    run.add_argument('--seed', type=int, help='Root seed of the optimizer rounds')
    run.add_argument('--rounds', type=int, help='Local minimizations per p')
    run.add_argument('--threads', type=int, help='Rounds run concurrently')
    run.add_argument('--no-reference', action='store_true', help='Skip exact diagonalization')
    run.add_argument('--output', type=str, help='Output directory')
    run.add_argument('--save-states', action='store_true', help='Dump the best state of every p')

    verify = sub.add_parser('verify', help='Recompute stored energies')
    verify.add_argument('records', help='Records file (JSON lines)')
    verify.add_argument('graph', help='Graph JSON file')

    summarize = sub.add_parser('summarize', help='Tabulate the best minimum per p')
    summarize.add_argument('records', help='Records file (JSON lines)')
    summarize.add_argument('--output', type=str, help='Summary CSV path')
    summarize.add_argument('--plot-data', type=str, help='Directory for trace and scatter CSV files')

    ed = sub.add_parser('ed', help='Exact low spectrum of a graph')
    ed.add_argument('graph', help='Graph JSON file')
    ed.add_argument('--k', type=int, default=4, help='Number of eigenvalues')
    ed.add_argument('--magnetization', type=float, help='Restrict to one S_z sector')
    ed.add_argument('--dense', action='store_true', help='Full dense spectrum instead of Lanczos')

    compile_ = sub.add_parser('compile', help='Compile a bound ansatz to fSim and RZ gates')
    compile_.add_argument('circuit', help='Circuit JSON file')
    compile_.add_argument('--theta', type=str, help='JSON file holding the parameter list')
    compile_.add_argument('--include-prep', action='store_true', help='Compile the singlet preparation too')
    compile_.add_argument('--prep-variant', default='fsim', help='abstract, quantum-dot or fsim')
    compile_.add_argument('--output', type=str, help='Native circuit path (JSON lines)')
    compile_.add_argument('--check', action='store_true', help='Simulate both circuits and compare')

    graph = sub.add_parser('graph', help='Write a graph, or an ansatz on it')
    graph.add_argument('kind', choices=[k for k in GRAPH_KINDS if k != 'custom'])
    graph.add_argument('size', type=int, nargs='*', help='Size parameters of the lattice')
    graph.add_argument('--ansatz', type=int, metavar='P', help='Write the ansatz with P cycles instead')
    graph.add_argument('--grid', action='store_true', help='Place the ansatz on the qubit grid')
    graph.add_argument('--mode', default='OPG', choices=PARAM_MODES, help='Parameter sharing')
    graph.add_argument('--output', type=str, help='Output path')

    gap = sub.add_parser('gap', help='Singlet-triplet gap estimate')
    gap.add_argument('experiment', help='Experiment JSON file or preset:<name>:<p values>')
    gap.add_argument('--p', type=int, required=True, help='Cycle count')
    gap.add_argument('--seed', type=int, help='Root seed of the optimizer rounds')
    gap.add_argument('--rounds', type=int, help='Local minimizations per run')

    settings = sub.add_parser('config', help='Show or change the saved settings')
    settings.add_argument('--rounds', help='Default rounds per p (1-1000)')
    settings.add_argument('--threads', help='Rounds run concurrently (1-256)')
    settings.add_argument('--penalty-weight', help='Weight of the magnetization penalty')
    settings.add_argument('--log-level', help='DEBUG, INFO, WARNING, ERROR or CRITICAL')
    return parser


def _read_json(path: str) -> Any:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read {path}: {e}") from e


def _write_text(text: str, path: Optional[str]) -> None:
    if path is None:
        print(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(text if text.endswith('\n') else text + '\n')
    print(f" ┃ 💾 Wrote {path}")


def _load_graph(path: str) -> SpinGraph:
    return SpinGraph.from_dict(_read_json(path))


def _with_overrides(experiment, args: argparse.Namespace):
    optimizer = experiment.optimizer
    for name in ('seed', 'rounds', 'threads'):
        value = getattr(args, name, None)
        if value is not None:
            optimizer = replace(optimizer, **{name: value})
    experiment = replace(experiment, optimizer=optimizer)
    if getattr(args, 'no_reference', False):
        experiment = replace(experiment, reference=False)
    if getattr(args, 'output', None):
        experiment = replace(experiment, output_path=args.output)
    experiment.validate()
    return experiment


def _fmt(value: Optional[float], spec: str = '.3e') -> str:
    return '-' if value is None else format(value, spec)


def cmd_run(args: argparse.Namespace, config: Config, logger: Logger) -> int:
    experiment = _with_overrides(load_experiment_config(args.experiment, config), args)
    result = ExperimentRunner(config, logger).run_experiment(experiment, save_states=args.save_states)
    print(f" ┃ 📈 {len(result.rows)} cycle counts, records in {result.records_path}")
    for row in result.rows:
        print(f" ┃   p={row.p:<3d} E={row.best_energy:.12f}  rel.err={_fmt(row.relative_energy_error)}"
              f"  infid={_fmt(row.best_infidelity)}  ok={row.rounds_ok}/{row.rounds}")
    for failure in result.failures:
        print(f" ┃ ⚠️ {failure}")
    return 0


def cmd_verify(args: argparse.Namespace, config: Config, logger: Logger) -> int:
    report = ExperimentRunner(config, logger).verify(args.records, _load_graph(args.graph))
    if report.passed:
        print(f" ┃ ✅ {report.checked} records verified ({report.skipped} failed rounds skipped)")
        return 0
    for failure in report.failures:
        print(f" ┃ ❌ {failure}")
    return 1


def cmd_summarize(args: argparse.Namespace, config: Config, logger: Logger) -> int:
    report = ExperimentRunner(config, logger).summarize(args.records, args.output, args.plot_data)
    for row in report.rows:
        print(f" ┃   p={row.p:<3d} E={row.best_energy:.12f}  rel.err={_fmt(row.relative_energy_error)}"
              f"  infid={_fmt(row.best_infidelity)}")
    slope = report.log_error_slope()
    if slope is not None:
        print(f" ┃ 📉 log10 relative error falls by {-slope:.3f} per cycle")
    for message in report.violations:
        print(f" ┃ ⚠️ {message}")
    for name, path in report.paths.items():
        print(f" ┃ 💾 {name}: {path}")
    return 0


def cmd_ed(args: argparse.Namespace, config: Config, logger: Logger) -> int:
    graph = _load_graph(args.graph)
    if args.dense:
        values = dense_spectrum(graph, args.magnetization, max_sites=config.dense_max_sites)
        print(f" ┃ 🧮 {graph.n_sites} sites, {values.size} states (dense)")
        eigenvalues = values[:args.k]
    else:
        result = low_spectrum(graph, k=args.k, magnetization=args.magnetization,
                              max_sites=config.ed_max_sites)
        print(f" ┃ 🧮 {graph.n_sites} sites, ground degeneracy {result.degeneracy}, "
              f"gap {result.gap_01:.12f}")
        eigenvalues = result.eigenvalues
    if args.magnetization is not None:
        print(f" ┃   S_z = {args.magnetization:g} sector of dimension "
              f"{sector_dimension(graph.n_sites, args.magnetization)}")
    for i, value in enumerate(eigenvalues):
        print(f" ┃   E{i} = {value:.12f}")
    return 0


def cmd_compile(args: argparse.Namespace, config: Config, logger: Logger) -> int:
    circuit = AnsatzCircuit.from_dict(_read_json(args.circuit))
    if args.theta:
        theta = np.asarray(_read_json(args.theta), dtype=np.float64)
    elif circuit.M == 0:
        theta = np.zeros(0)
    else:
        raise ConfigError(f"circuit has {circuit.M} parameters; pass them with --theta")
    native = compile_circuit(circuit, theta, include_prep=args.include_prep,
                             prep_variant=args.prep_variant)
    logger.info(f"native circuit: depth {native.depth}, gates {native.gate_counts()}")
    if args.check:
        deviation = compilation_error(circuit, theta, native, include_prep=args.include_prep)
        print(f" ┃ 🔍 deviation from the source circuit {deviation:.3e}")
        if deviation > COMPILE_TOLERANCE:
            print(" ┃ ❌ compiled circuit differs from its source")
            return 1
    _write_text(native.dumps(), args.output)
    return 0


def cmd_graph(args: argparse.Namespace, config: Config, logger: Logger) -> int:
    graph = build_from_kind(args.kind, args.size)
    if args.ansatz is None:
        _write_text(json.dumps(graph.to_dict(), indent=2), args.output)
        return 0
    embedding = embed_on_grid(graph) if args.grid else None
    circuit = build_hva(graph, edge_coloring(graph), dimer_covering(graph), args.ansatz,
                        mode=args.mode, embedding=embedding)
    stats = circuit_stats(circuit)
    logger.info(f"ansatz: {stats.total_gates} gates, {stats.parameters} parameters, depth {stats.depth}")
    _write_text(circuit.dumps(), args.output)
    return 0


def cmd_gap(args: argparse.Namespace, config: Config, logger: Logger) -> int:
    experiment = _with_overrides(load_experiment_config(args.experiment, config), args)
    report = ExperimentRunner(config, logger).spin_gap(experiment, args.p)
    estimate = report.estimate
    print(f" ┃ 🧮 E(S=0) = {estimate.e_s0:.12f}, E(S=1) = {estimate.e_s1:.12f}")
    print(f" ┃   gap estimate {estimate.gap_estimate:.12f}, exact {_fmt(report.exact_gap, '.12f')}")
    return 0


def cmd_config(args: argparse.Namespace, config: Config, logger: Logger) -> int:
    """Apply each requested setting through its validating setter, or list them all."""
    changes = [
        (config.set_rounds, args.rounds),
        (config.set_threads, args.threads),
        (config.set_penalty_weight, args.penalty_weight),
        (config.set_log_level, args.log_level),
    ]
    requested = [(setter, value) for setter, value in changes if value is not None]
    if not requested:
        for key, value in config.to_dict().items():
            print(f" ┃   {key} = {value}")
        return 0
    status = 0
    for setter, value in requested:
        success, message = setter(value)
        if success:
            logger.info(message)
            print(f" ┃ ✅ {message}")
        else:
            print(f" ┃ ❌ {message}")
            status = 1
    return status


COMMANDS = {
    'run': cmd_run,
    'verify': cmd_verify,
    'summarize': cmd_summarize,
    'ed': cmd_ed,
    'compile': cmd_compile,
    'graph': cmd_graph,
    'gap': cmd_gap,
    'config': cmd_config,
}


def run_command(args: argparse.Namespace, config: Config, logger: Logger) -> int:
    """Dispatch a parsed command line; library errors become exit status 1."""
    try:
        return COMMANDS[args.command](args, config, logger)
    except HeisenbergVQEError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f" ┃ ❌ {e}")
        return 1


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the application.

    Builds the configuration and logger, then runs one subcommand. It's used
    as the entry point when the package is installed and run via the
    'heisenberg-vqe' command.
    """
    args = build_parser().parse_args(argv)

    # Initialize configuration
    config = Config()
    if args.config:
        config.CONFIG_FILE = args.config
        config.load_config()

    # Set log level based on command line arguments
    if args.debug:
        config.LOG_LEVEL = "DEBUG"
    elif args.verbose:
        config.LOG_LEVEL = "INFO"

    # Initialize logger
    logger = Logger(config)
    logger.info("Heisenberg VQE v{} starting".format(config.VERSION))

    return run_command(args, config, logger)


if __name__ == "__main__":
    sys.exit(main())
