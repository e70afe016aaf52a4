"""Experiment orchestration: configs, sweep grids, and result files.

A run compiles one circuit onto one network, then executes it at every
(gate fidelity, link fidelity) grid point. Each point yields one CSV row
comparing the noisy output against the ideal monolithic result: Hellinger
fidelity of the output distribution and quantum fidelity of the
pre-measurement state (global and per QPU). Grid points are independent, so
they dispatch to a process pool; rows merge in grid order regardless of
completion order, and every sampled round derives its seed from the base
seed and its grid position, making the whole output tree reproducible.
"""
from __future__ import annotations

import concurrent.futures
import os
from dataclasses import dataclass, replace
from pathlib import Path

from .analytics import (
    CSV_HEADER,
    FidelityReport,
    estimate_pmf,
    exact_pmf,
    hellinger_fidelity,
    partial_trace,
    quantum_fidelity,
)
from .circuit import AbstractCircuit, GateKind, parse_circuit
from .compiler import DistributedProgram, Placement, QpuSpec, allocate_placement, compile_circuit
from .density import NoiseSpec, simulate_ideal
from .executor import execute, reduced_state, run_rounds
from .network import NetworkModel, load_network


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    circuit: Path
    network: Path
    placement: Path | None = None
    mode: str = "exact"
    rounds: int = 100
    gate_fidelities: tuple[float, ...] = (1.0,)
    link_fidelities: tuple[float, ...] = (1.0,)
    seed: int = 0
    out_dir: Path = Path("out")
    jobs: int | None = None  # None: use available parallelism
    noisy_single_qubit_gates: bool = True

    def __post_init__(self):
        if self.mode not in ("exact", "trajectory"):
            raise ConfigError(f"mode must be 'exact' or 'trajectory', got {self.mode!r}")
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        for v in self.gate_fidelities:
            if not 0.0 < v <= 1.0:
                raise ConfigError(f"gate fidelity {v} outside (0, 1]")
        for v in self.link_fidelities:
            if not 0.25 < v <= 1.0:
                raise ConfigError(f"link fidelity {v} outside (1/4, 1]")
        if not self.gate_fidelities or not self.link_fidelities:
            raise ConfigError("sweep axes must be non-empty")


_BOOL = {"on": True, "true": True, "1": True, "off": False, "false": False, "0": False}


def parse_experiment_config(text: str, base_dir: Path) -> ExperimentConfig:
    """Parse the key/value experiment file; paths resolve against base_dir."""
    fields: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *values = line.split()
        if not values:
            raise ConfigError(f"line {lineno}: key {key!r} has no value")
        try:
            if key in ("circuit", "network", "placement", "out_dir"):
                fields[key] = base_dir / values[0] if key != "out_dir" else Path(values[0])
            elif key in ("rounds", "seed", "jobs"):
                fields[key] = int(values[0])
            elif key == "mode":
                fields[key] = values[0]
            elif key in ("gate_fidelity", "link_fidelity"):
                fields[key.replace("fidelity", "fidelities")] = tuple(float(v) for v in values)
            elif key == "single_qubit_noise":
                fields["noisy_single_qubit_gates"] = _BOOL[values[0].lower()]
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except (ValueError, KeyError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {' '.join(values)}") from None
    for required in ("circuit", "network"):
        if required not in fields:
            raise ConfigError(f"config is missing required key {required!r}")
    return ExperimentConfig(**fields)


def load_experiment_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_experiment_config(path.read_text(), path.parent)


def parse_placement_file(text: str, qpus: list[QpuSpec] | tuple[QpuSpec, ...]) -> Placement:
    """Placement override file: one `<logical> <qpu> [phys]` entry per line.

    Entries without an explicit physical index get the lowest free data
    qubit on their device, in ascending logical order.
    """
    explicit: dict[int, tuple[str, int]] = {}
    auto: dict[int, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) not in (2, 3):
            raise ConfigError(f"line {lineno}: expected '<logical> <qpu> [phys]', got {line!r}")
        try:
            logical = int(tokens[0].lstrip("q"))
        except ValueError:
            raise ConfigError(f"line {lineno}: bad logical qubit {tokens[0]!r}") from None
        if logical in explicit or logical in auto:
            raise ConfigError(f"line {lineno}: logical qubit {logical} placed twice")
        if len(tokens) == 3:
            explicit[logical] = (tokens[1], int(tokens[2]))
        else:
            auto[logical] = tokens[1]
    if not explicit and not auto:
        raise ConfigError("placement file is empty")
    if explicit and auto:
        raise ConfigError("placement file mixes explicit and automatic physical indices")
    if explicit:
        return Placement(explicit)
    return allocate_placement(auto, qpus)


# --- one sweep grid point -----------------------------------------------------


def _measure_map(circuit: AbstractCircuit) -> list[tuple[int, int]]:
    """(clbit, logical qubit) pairs of the circuit's measurements, by clbit."""
    return sorted(
        (g.clbit, g.qubits[0]) for g in circuit.gates if g.kind is GateKind.MEASURE
    )


def _output_pmf(result, circuit: AbstractCircuit) -> dict[str, float]:
    """Exact output distribution of an exact-mode run, in clbit order."""
    pairs = _measure_map(circuit)
    logicals = [q for _, q in pairs]
    errors = {clbit: err for clbit, _, err in result.measured}
    reduced = reduced_state(result.pre_measurement_state, logicals)
    return exact_pmf(reduced.rho, [errors.get(clbit, 0.0) for clbit, _ in pairs])


@dataclass(frozen=True)
class _IdealReference:
    rho: object  # density matrix over logical qubits, logical order
    pmf: dict


def ideal_reference(circuit: AbstractCircuit) -> _IdealReference:
    """Noiseless monolithic result: the desired state and distribution."""
    state = simulate_ideal(circuit)
    pairs = _measure_map(circuit)
    pmf: dict = {}
    if pairs:
        reduced = reduced_state(state, [q for _, q in pairs])
        pmf = exact_pmf(reduced.rho, 0.0)
    return _IdealReference(state.rho, pmf)


def _per_qpu_fidelity(rho_run, rho_ideal, placement: Placement, qpu_name: str) -> float | None:
    logicals = placement.logical_on(qpu_name)
    if not logicals:
        return None
    return quantum_fidelity(partial_trace(rho_run, logicals), partial_trace(rho_ideal, logicals))


def grid_point_report(
    program: DistributedProgram,
    net: NetworkModel,
    circuit: AbstractCircuit,
    ideal: _IdealReference,
    gate_fidelity: float,
    link_fidelity: float,
    mode: str,
    rounds: int,
    point_seed: int,
    noisy_single_qubit_gates: bool = True,
) -> tuple[FidelityReport, list[tuple[str, str]]]:
    """Evaluate one grid point; returns the CSV row plus (run id, log text)
    pairs for every run it performed."""
    noise = NoiseSpec(gate_fidelity, link_fidelity)
    tag = f"g{gate_fidelity:g}-l{link_fidelity:g}"
    logs: list[tuple[str, str]] = []

    exact_result = execute(
        program,
        net,
        mode="exact",
        seed=point_seed,
        noise=noise,
        noisy_single_qubit_gates=noisy_single_qubit_gates,
        run_id=tag,
    )
    rho_run = exact_result.pre_measurement_state.rho
    quantum = quantum_fidelity(rho_run, ideal.rho)
    hosts = [q.name for q in net.qpus if q.name in program.streams]
    qpu_fids = [
        _per_qpu_fidelity(rho_run, ideal.rho, program.placement, name) for name in hosts[:2]
    ]
    qpu_fids += [None] * (2 - len(qpu_fids))

    if mode == "exact":
        hellinger = hellinger_fidelity(_output_pmf(exact_result, circuit), ideal.pmf)
        logs.append((tag, exact_result.log.to_text()))
        effective_rounds = 1
    else:
        round_logs = run_rounds(
            program,
            net,
            rounds,
            point_seed,
            noise=noise,
            noisy_single_qubit_gates=noisy_single_qubit_gates,
        )
        outcomes = [log.final_outcome for log in round_logs]
        hellinger = hellinger_fidelity(estimate_pmf(outcomes), ideal.pmf)
        logs.extend((log.run_id, log.to_text()) for log in round_logs)
        effective_rounds = rounds

    report = FidelityReport(
        gate_fidelity=gate_fidelity,
        link_fidelity=link_fidelity,
        rounds=effective_rounds,
        hellinger=hellinger,
        quantum=quantum,
        quantum_qpu0=qpu_fids[0],
        quantum_qpu1=qpu_fids[1],
    )
    return report, logs


def _job(args):
    index, kwargs = args
    return index, grid_point_report(**kwargs)


def run_experiment(config: ExperimentConfig) -> list[FidelityReport]:
    """Execute the full sweep and write results.csv plus per-run logs."""
    circuit = parse_circuit(Path(config.circuit).read_text())
    if not _measure_map(circuit):
        raise ConfigError("circuit has no measurements; nothing to sample or score")
    net = load_network(config.network)
    placement = None
    if config.placement is not None:
        placement = parse_placement_file(Path(config.placement).read_text(), net.qpus)
    program = compile_circuit(circuit, net.qpus, placement)
    ideal = ideal_reference(circuit)

    grid = [(g, l) for g in config.gate_fidelities for l in config.link_fidelities]
    stride = config.rounds if config.mode == "trajectory" else 1
    jobs = []
    for index, (g, l) in enumerate(grid):
        jobs.append(
            (
                index,
                dict(
                    program=program,
                    net=net,
                    circuit=circuit,
                    ideal=ideal,
                    gate_fidelity=g,
                    link_fidelity=l,
                    mode=config.mode,
                    rounds=config.rounds,
                    point_seed=config.seed + index * stride,
                    noisy_single_qubit_gates=config.noisy_single_qubit_gates,
                ),
            )
        )

    workers = config.jobs if config.jobs is not None else default_jobs()
    results: dict[int, tuple[FidelityReport, list[tuple[str, str]]]] = {}
    if workers > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            for index, payload in pool.map(_job, jobs):
                results[index] = payload
    else:
        for job in jobs:
            index, payload = _job(job)
            results[index] = payload

    out_dir = Path(config.out_dir)
    runs_dir = out_dir / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    with open(out_dir / "results.csv", "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for index in range(len(grid)):
            report, logs = results[index]
            rows.append(report)
            fh.write(report.to_csv_row() + "\n")
            for run_id, text in logs:
                (runs_dir / f"{run_id}.log").write_text(text)
    return rows


def default_jobs() -> int:
    return os.cpu_count() or 1
