"""Distributes a monolithic circuit across QPUs.

Local gates are mapped onto each device's physical qubits; every two-qubit
gate whose operands land on different devices expands into a telegate: one
shared EPR pair, a cat-entangler on the control side, the gate on the target
side, and two classical correction bits. Communication qubits are measured
and reset between consecutive remote gates, so each link carries one pair at
a time. Compilation is a pure function of its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .circuit import AbstractCircuit, Gate, GateKind
from .partition import InteractionGraph, assign_qubits, cut_weight


class CompileError(ValueError):
    pass


@dataclass(frozen=True)
class QpuSpec:
    """Static description of one simulated device.

    Physical qubits 0..data_qubits-1 hold computation; the next comm_qubits
    indices are entanglement endpoints. `coupling` lists connected physical
    qubit pairs; None means all-to-all.
    """

    name: str
    data_qubits: int
    comm_qubits: int = 1
    coupling: tuple[tuple[int, int], ...] | None = None
    gate_fidelity: float = 1.0
    measurement_error: float = 0.0

    def __post_init__(self):
        if not self.name:
            raise CompileError("QPU needs a name")
        if self.data_qubits < 1:
            raise CompileError(f"{self.name}: needs at least one data qubit")
        if self.comm_qubits < 0:
            raise CompileError(f"{self.name}: negative comm qubit count")
        if not 0.0 < self.gate_fidelity <= 1.0:
            raise CompileError(f"{self.name}: gate fidelity {self.gate_fidelity} outside (0, 1]")
        if not 0.0 <= self.measurement_error < 1.0:
            raise CompileError(
                f"{self.name}: measurement error {self.measurement_error} outside [0, 1)"
            )
        if self.coupling is not None:
            norm = []
            for a, b in self.coupling:
                if a == b or not (0 <= a < self.total_qubits and 0 <= b < self.total_qubits):
                    raise CompileError(f"{self.name}: bad coupling pair ({a}, {b})")
                norm.append((min(a, b), max(a, b)))
            object.__setattr__(self, "coupling", tuple(sorted(set(norm))))

    @property
    def total_qubits(self) -> int:
        return self.data_qubits + self.comm_qubits

    @property
    def comm_indices(self) -> tuple[int, ...]:
        return tuple(range(self.data_qubits, self.total_qubits))

    def connected(self, a: int, b: int) -> bool:
        if self.coupling is None:
            return a != b
        return (min(a, b), max(a, b)) in self.coupling


@dataclass(frozen=True)
class Placement:
    """Mapping logical qubit -> (qpu name, physical data-qubit index)."""

    assignment: Mapping[int, tuple[str, int]]

    def __post_init__(self):
        object.__setattr__(self, "assignment", dict(self.assignment))
        per_qpu: dict[str, set[int]] = {}
        for q, (name, phys) in self.assignment.items():
            slots = per_qpu.setdefault(name, set())
            if phys in slots:
                raise CompileError(f"physical qubit {name}[{phys}] assigned twice")
            slots.add(phys)

    def qpu_of(self, logical: int) -> str:
        return self.assignment[logical][0]

    def phys_of(self, logical: int) -> int:
        return self.assignment[logical][1]

    def logical_on(self, qpu: str) -> list[int]:
        return sorted(q for q, (name, _) in self.assignment.items() if name == qpu)


# --- distributed instruction set ---------------------------------------------


@dataclass(frozen=True)
class LocalGate:
    qpu: str
    gate: Gate

    def format(self) -> str:
        g = self.gate
        if g.kind is GateKind.MEASURE:
            return f"apply measure {g.qubits[0]} -> c{g.clbit}"
        return f"apply {g.kind.value} {' '.join(str(q) for q in g.qubits)}"


@dataclass(frozen=True)
class EprRequest:
    qpu: str
    link: tuple[str, str]
    local_comm: int
    remote_qpu: str
    remote_comm: int
    pair_id: int

    def format(self) -> str:
        return (
            f"epr pair={self.pair_id} link={self.link[0]}-{self.link[1]} "
            f"local={self.local_comm} remote={self.remote_qpu}[{self.remote_comm}]"
        )


@dataclass(frozen=True)
class MeasureCommQubit:
    qpu: str
    comm: int
    message_id: int

    def format(self) -> str:
        return f"measure_comm {self.comm} -> m{self.message_id}"


@dataclass(frozen=True)
class SendBit:
    qpu: str
    to_qpu: str
    message_id: int

    def format(self) -> str:
        return f"send m{self.message_id} -> {self.to_qpu}"


@dataclass(frozen=True)
class RecvBit:
    qpu: str
    message_id: int

    def format(self) -> str:
        return f"recv m{self.message_id}"


@dataclass(frozen=True)
class ConditionalGate:
    qpu: str
    gate: Gate
    condition: int  # message id; gate applies when the received bit is 1

    def format(self) -> str:
        return f"cond m{self.condition}: apply {self.gate.kind.value} " + " ".join(
            str(q) for q in self.gate.qubits
        )


@dataclass(frozen=True)
class ResetComm:
    qpu: str
    comm: int

    def format(self) -> str:
        return f"reset_comm {self.comm}"


DistributedInstruction = (
    LocalGate | EprRequest | MeasureCommQubit | SendBit | RecvBit | ConditionalGate | ResetComm
)


@dataclass(frozen=True)
class DistributedProgram:
    placement: Placement
    streams: Mapping[str, tuple[DistributedInstruction, ...]]
    remote_gate_count: int
    num_logical: int
    num_clbits: int

    def __post_init__(self):
        object.__setattr__(
            self, "streams", {name: tuple(instrs) for name, instrs in self.streams.items()}
        )
        for name, instrs in self.streams.items():
            for ins in instrs:
                if ins.qpu != name:
                    raise CompileError(f"instruction {ins.format()!r} filed under wrong stream {name}")


def build_interaction_graph(circuit: AbstractCircuit) -> InteractionGraph:
    """Edge (a, b) weight = number of two-qubit gates between a and b."""
    weights: dict[tuple[int, int], int] = {}
    for g in circuit.two_qubit_gates:
        a, b = sorted(g.qubits)
        weights[(a, b)] = weights.get((a, b), 0) + 1
    return InteractionGraph(circuit.num_qubits, weights)


def allocate_placement(device_of: Mapping[int, str], qpus: Sequence[QpuSpec]) -> Placement:
    """Turn a qubit->device-name map into a Placement, handing out physical
    data qubits in ascending logical order."""
    by_name = {q.name: q for q in qpus}
    next_slot: dict[str, int] = {q.name: 0 for q in qpus}
    assignment: dict[int, tuple[str, int]] = {}
    for logical in sorted(device_of):
        name = device_of[logical]
        if name not in by_name:
            raise CompileError(f"placement references unknown QPU {name!r}")
        slot = next_slot[name]
        if slot >= by_name[name].data_qubits:
            raise CompileError(f"QPU {name} over capacity ({by_name[name].data_qubits} data qubits)")
        assignment[logical] = (name, slot)
        next_slot[name] = slot + 1
    return Placement(assignment)


def partition(graph: InteractionGraph, qpus: Sequence[QpuSpec], method: str = "auto") -> Placement:
    """Capacity-respecting qubit placement minimizing remote-gate count."""
    if not qpus:
        raise CompileError("need at least one QPU")
    capacities = [q.data_qubits for q in qpus]
    try:
        assign = assign_qubits(graph, capacities, method)
    except Exception as exc:
        raise CompileError(str(exc)) from exc
    return allocate_placement({q: qpus[d].name for q, d in enumerate(assign)}, qpus)


def placement_cut_weight(graph: InteractionGraph, placement: Placement) -> int:
    assign = [placement.qpu_of(q) for q in range(graph.num_qubits)]
    return cut_weight(graph, assign)


def _validate_placement(placement: Placement, circuit: AbstractCircuit, qpus: Sequence[QpuSpec]):
    by_name = {q.name: q for q in qpus}
    loads: dict[str, int] = {}
    for logical in range(circuit.num_qubits):
        if logical not in placement.assignment:
            raise CompileError(f"logical qubit {logical} missing from placement")
        name, phys = placement.assignment[logical]
        spec = by_name.get(name)
        if spec is None:
            raise CompileError(f"placement references unknown QPU {name!r}")
        if not 0 <= phys < spec.data_qubits:
            raise CompileError(f"{name}[{phys}] is not a data qubit (0..{spec.data_qubits - 1})")
        loads[name] = loads.get(name, 0) + 1
    for name, load in loads.items():
        if load > by_name[name].data_qubits:
            raise CompileError(f"QPU {name} over capacity: {load} > {by_name[name].data_qubits}")


def compile_circuit(
    circuit: AbstractCircuit,
    qpus: Sequence[QpuSpec],
    placement: Placement | None = None,
    partition_method: str = "auto",
) -> DistributedProgram:
    """Compile an abstract circuit into per-QPU instruction streams.

    Uses the given placement when supplied (e.g. to pin a specific layout),
    otherwise partitions the interaction graph. Raises CompileError for
    infeasible placements, missing comm qubits, or local two-qubit gates on
    uncoupled physical qubits (no SWAP routing is performed).
    """
    graph = build_interaction_graph(circuit)
    if placement is None:
        placement = partition(graph, qpus, partition_method)
    else:
        _validate_placement(placement, circuit, qpus)

    by_name = {q.name: q for q in qpus}
    hosts = sorted({placement.qpu_of(q) for q in range(circuit.num_qubits)},
                   key=[q.name for q in qpus].index)
    streams: dict[str, list[DistributedInstruction]] = {name: [] for name in hosts}
    next_message = 0
    next_pair = 0
    remote_gates = 0

    def local(name: str, gate: Gate):
        spec = by_name[name]
        if len(gate.qubits) == 2 and not spec.connected(*gate.qubits):
            raise CompileError(
                f"{name}: physical qubits {gate.qubits} are not coupled "
                f"(no SWAP routing; adjust the placement or coupling map)"
            )
        streams[name].append(LocalGate(name, gate))

    for g in circuit.gates:
        host_qubits = [placement.assignment[q] for q in g.qubits]
        names = [name for name, _ in host_qubits]
        if len(g.qubits) == 1:
            name, phys = host_qubits[0]
            local(name, Gate(g.kind, (phys,), clbit=g.clbit))
            continue
        if names[0] == names[1]:
            name = names[0]
            local(name, Gate(g.kind, (host_qubits[0][1], host_qubits[1][1])))
            continue

        # Remote two-qubit gate: cat-entangle the control across the link.
        remote_gates += 1
        (name_a, ctrl), (name_b, tgt) = host_qubits
        spec_a, spec_b = by_name[name_a], by_name[name_b]
        for spec in (spec_a, spec_b):
            if spec.comm_qubits < 1:
                raise CompileError(f"QPU {spec.name} has no comm qubit for remote {g.kind.value}")
        comm_a = spec_a.comm_indices[0]
        comm_b = spec_b.comm_indices[0]
        link = tuple(sorted((name_a, name_b)))
        pair_id, next_pair = next_pair, next_pair + 1
        m1, m2 = next_message, next_message + 1
        next_message += 2

        streams[name_a].append(
            EprRequest(name_a, link, comm_a, name_b, comm_b, pair_id)
        )
        local(name_a, Gate(GateKind.CNOT, (ctrl, comm_a)))
        streams[name_a].append(MeasureCommQubit(name_a, comm_a, m1))
        streams[name_a].append(SendBit(name_a, name_b, m1))

        streams[name_b].append(RecvBit(name_b, m1))
        streams[name_b].append(ConditionalGate(name_b, Gate(GateKind.X, (comm_b,)), m1))
        local(name_b, Gate(g.kind, (comm_b, tgt)))
        local(name_b, Gate(GateKind.H, (comm_b,)))
        streams[name_b].append(MeasureCommQubit(name_b, comm_b, m2))
        streams[name_b].append(SendBit(name_b, name_a, m2))
        streams[name_b].append(ResetComm(name_b, comm_b))

        streams[name_a].append(RecvBit(name_a, m2))
        streams[name_a].append(ConditionalGate(name_a, Gate(GateKind.Z, (ctrl,)), m2))
        streams[name_a].append(ResetComm(name_a, comm_a))

    return DistributedProgram(
        placement=placement,
        streams={name: tuple(instrs) for name, instrs in streams.items()},
        remote_gate_count=remote_gates,
        num_logical=circuit.num_qubits,
        num_clbits=circuit.num_clbits,
    )


def format_program(program: DistributedProgram) -> str:
    """Stable text dump of a compiled program (one instruction per line)."""
    lines = ["placement:"]
    for logical in sorted(program.placement.assignment):
        name, phys = program.placement.assignment[logical]
        lines.append(f"  q{logical} -> {name}[{phys}]")
    lines.append(f"remote_gates: {program.remote_gate_count}")
    for name, instrs in program.streams.items():
        lines.append(f"stream {name}:")
        for ins in instrs:
            lines.append(f"  {ins.format()}")
    return "\n".join(lines) + "\n"
