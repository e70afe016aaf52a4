"""dqcsim: full-stack simulation of distributed quantum computing.

Compile a monolithic circuit onto networked QPUs, execute it under gate- and
link-level noise, and score the output with classical (Hellinger) and
quantum fidelity.
"""
from pathlib import Path

from .analytics import (
    FidelityReport,
    estimate_pmf,
    exact_pmf,
    fidelity_to_pure,
    hellinger_fidelity,
    partial_trace,
    quantum_fidelity,
)
from .circuit import AbstractCircuit, CircuitError, Gate, GateKind, ghz_circuit, parse_circuit, serialize_circuit
from .compiler import (
    CompileError,
    DistributedProgram,
    Placement,
    QpuSpec,
    build_interaction_graph,
    compile_circuit,
    format_program,
    partition,
)
from .density import GlobalQuantumState, NoiseSpec, QubitMap, init_state
from .executor import DeadlockError, ExecutionLog, RunResult, SimulationError, execute, run_rounds
from .network import NetworkModel, compose_werner, load_network, parse_network, resolve_route

__version__ = "0.1.0"


def example_dir(name: str) -> Path:
    """Path of a packaged example experiment (e.g. "ghz5-2qpu")."""
    path = Path(__file__).parent / "examples" / name
    if not path.is_dir():
        raise FileNotFoundError(f"no packaged example named {name!r}")
    return path
