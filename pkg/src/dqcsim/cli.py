"""Command-line experiment runner.

    dqcsim compile <circuit> <network> [--placement FILE] [--out FILE]
    dqcsim run <config> [--seed N] [--rounds N] [--mode M] [--jobs N] [--out-dir DIR]
    dqcsim report <results.csv> [--out-dir DIR]

Exit codes: 0 success, 2 config error, 3 compile error, 4 simulation error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .analytics import AnalyticsError, FidelityReport, parse_csv_rows
from .circuit import CircuitError, parse_circuit
from .compiler import (
    CompileError,
    build_interaction_graph,
    compile_circuit,
    format_program,
    placement_cut_weight,
)
from .density import StateError
from .executor import SimulationError
from .experiment import (
    ConfigError,
    load_experiment_config,
    parse_placement_file,
    run_experiment,
)
from .network import NetworkConfigError, RouteError, load_network
from .partition import PartitionError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COMPILE = 3
EXIT_RUNTIME = 4

_COMPILE_ERRORS = (CircuitError, CompileError, NetworkConfigError, PartitionError, OSError)
_RUNTIME_ERRORS = (SimulationError, StateError, RouteError, AnalyticsError)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dqcsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_compile = sub.add_parser("compile", help="partition and compile a circuit onto a network")
    p_compile.add_argument("circuit", type=Path)
    p_compile.add_argument("network", type=Path)
    p_compile.add_argument("--placement", type=Path, help="placement override file")
    p_compile.add_argument("--out", type=Path, help="write the program dump here instead of stdout")

    p_run = sub.add_parser("run", help="run the sweep described by an experiment config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--rounds", type=int)
    p_run.add_argument("--mode", choices=("exact", "trajectory"))
    p_run.add_argument("--jobs", type=int, help="worker processes (default: available parallelism)")
    p_run.add_argument("--out-dir", type=Path)

    p_report = sub.add_parser("report", help="summarize a results.csv sweep")
    p_report.add_argument("results", type=Path)
    p_report.add_argument("--out-dir", type=Path, help="where to write matrix files (default: alongside the CSV)")
    return parser


def cmd_compile(args) -> int:
    circuit = parse_circuit(args.circuit.read_text())
    net = load_network(args.network)
    placement = None
    if args.placement is not None:
        placement = parse_placement_file(args.placement.read_text(), net.qpus)
    program = compile_circuit(circuit, net.qpus, placement)
    dump = format_program(program)
    if args.out is not None:
        args.out.write_text(dump)
    else:
        sys.stdout.write(dump)
    cut = placement_cut_weight(build_interaction_graph(circuit), program.placement)
    print(f"remote_gate_count: {program.remote_gate_count}")
    print(f"cut_weight: {cut}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = load_experiment_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.rounds is not None:
        overrides["rounds"] = args.rounds
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    config = replace(config, **overrides)
    rows = run_experiment(config)
    print(f"wrote {len(rows)} grid point(s) to {Path(config.out_dir) / 'results.csv'}")
    return EXIT_OK


def _matrix_lines(rows: list[FidelityReport], metric: str) -> list[str]:
    gates = sorted({r.gate_fidelity for r in rows}, reverse=True)
    links = sorted({r.link_fidelity for r in rows}, reverse=True)
    cell = {(r.gate_fidelity, r.link_fidelity): getattr(r, metric) for r in rows}
    lines = ["gate\\link\t" + "\t".join(f"{l:g}" for l in links)]
    for g in gates:
        values = []
        for l in links:
            v = cell.get((g, l))
            values.append("" if v is None else f"{v:.9g}")
        lines.append(f"{g:g}\t" + "\t".join(values))
    return lines


def _dominance(rows: list[FidelityReport], metric: str) -> bool | None:
    """True when reducing gate fidelity hurts at least as much as the same
    reduction in link fidelity, at every shared off-anchor sweep value."""
    gates = {r.gate_fidelity for r in rows}
    links = {r.link_fidelity for r in rows}
    shared = sorted(gates & links, reverse=True)
    if len(shared) < 2:
        return None
    anchor = shared[0]
    cell = {(r.gate_fidelity, r.link_fidelity): getattr(r, metric) for r in rows}
    for v in shared[1:]:
        gate_down = cell.get((v, anchor))
        link_down = cell.get((anchor, v))
        if gate_down is None or link_down is None:
            return None
        if gate_down > link_down:
            return False
    return True


def cmd_report(args) -> int:
    rows = parse_csv_rows(args.results.read_text())
    out_dir = args.out_dir if args.out_dir is not None else args.results.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    for metric in ("hellinger", "quantum"):
        lines = _matrix_lines(rows, metric)
        (out_dir / f"{metric}_matrix.txt").write_text("\n".join(lines) + "\n")
        print(f"{metric} (rows: gate fidelity, cols: link fidelity)")
        print("\n".join(lines))
        print()
    verdicts = [_dominance(rows, "hellinger"), _dominance(rows, "quantum")]
    if any(v is None for v in verdicts):
        print("gate>link impact: n/a (sweep axes share no off-anchor values)")
    else:
        print(f"gate>link impact: {'PASS' if all(verdicts) else 'FAIL'}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "compile":
            return cmd_compile(args)
        if args.command == "run":
            return cmd_run(args)
        return cmd_report(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _COMPILE_ERRORS as exc:
        print(f"compile error: {exc}", file=sys.stderr)
        return EXIT_COMPILE
    except _RUNTIME_ERRORS as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
