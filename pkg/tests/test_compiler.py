import numpy as np
import pytest

from dqcsim.analytics import fidelity_to_pure
from dqcsim.circuit import AbstractCircuit, Gate, GateKind, ghz_circuit, parse_circuit
from dqcsim.compiler import (
    CompileError,
    ConditionalGate,
    EprRequest,
    LocalGate,
    MeasureCommQubit,
    Placement,
    QpuSpec,
    RecvBit,
    ResetComm,
    SendBit,
    allocate_placement,
    build_interaction_graph,
    compile_circuit,
    format_program,
    placement_cut_weight,
)
from dqcsim.executor import execute
from dqcsim.network import ClassicalLink, NetworkModel, QuantumLink

from helpers import sv_from_circuit

TWO_QPUS = (QpuSpec("qpu0", 3), QpuSpec("qpu1", 3))


def two_qpu_net(qpus=TWO_QPUS):
    return NetworkModel(
        qpus=tuple(qpus),
        quantum_links=(QuantumLink(qpus[0].name, qpus[1].name),),
        classical_links=(ClassicalLink(qpus[0].name, qpus[1].name),),
    )


def count_instr(program, cls):
    return sum(1 for instrs in program.streams.values() for i in instrs if isinstance(i, cls))


def test_ghz5_auto_placement_one_telegate():
    program = compile_circuit(ghz_circuit(5), TWO_QPUS)
    assert program.remote_gate_count == 1
    assert count_instr(program, EprRequest) == 1


def test_ghz5_paper_placement_two_telegates(paper_placement):
    program = compile_circuit(ghz_circuit(5), TWO_QPUS, paper_placement)
    assert program.remote_gate_count == 2
    assert count_instr(program, EprRequest) == 2


def test_single_qpu_program_is_all_local():
    program = compile_circuit(ghz_circuit(5), (QpuSpec("solo", 5),))
    assert program.remote_gate_count == 0
    (stream,) = program.streams.values()
    assert all(isinstance(i, LocalGate) for i in stream)


def test_remote_gate_count_equals_cut_weight(paper_placement):
    circuit = ghz_circuit(5)
    graph = build_interaction_graph(circuit)
    program = compile_circuit(circuit, TWO_QPUS, paper_placement)
    assert program.remote_gate_count == placement_cut_weight(graph, paper_placement)


def test_telegate_uses_one_pair_two_bits_two_corrections():
    circuit = parse_circuit("qubits 2; clbits 0; cz 0 1;")
    placement = Placement({0: ("qpu0", 0), 1: ("qpu1", 0)})
    program = compile_circuit(circuit, TWO_QPUS, placement)
    assert count_instr(program, EprRequest) == 1
    assert count_instr(program, MeasureCommQubit) == 2
    assert count_instr(program, SendBit) == 2
    assert count_instr(program, RecvBit) == 2
    assert count_instr(program, ConditionalGate) == 2
    assert count_instr(program, ResetComm) == 2
    kinds = sorted(
        i.gate.kind.value
        for instrs in program.streams.values()
        for i in instrs
        if isinstance(i, ConditionalGate)
    )
    assert kinds == ["x", "z"]  # at most two Pauli corrections


def test_remote_cnot_expansion_keeps_control_side():
    circuit = parse_circuit("qubits 2; clbits 0; cnot 1 0;")
    placement = Placement({0: ("qpu0", 0), 1: ("qpu1", 0)})
    program = compile_circuit(circuit, TWO_QPUS, placement)
    # control lives on qpu1, so qpu1 requests the pair and measures first
    assert isinstance(program.streams["qpu1"][0], EprRequest)
    local_kinds = [i.gate.kind for i in program.streams["qpu0"] if isinstance(i, LocalGate)]
    assert GateKind.CNOT in local_kinds  # target side applies the gate


def test_streams_touch_only_their_own_qubits(paper_placement):
    program = compile_circuit(ghz_circuit(5), TWO_QPUS, paper_placement)
    for name, instrs in program.streams.items():
        for ins in instrs:
            assert ins.qpu == name


def test_missing_comm_qubit_rejected():
    qpus = (QpuSpec("a", 3, comm_qubits=0), QpuSpec("b", 3))
    placement = Placement({0: ("a", 0), 1: ("b", 0)})
    with pytest.raises(CompileError, match="comm"):
        compile_circuit(parse_circuit("qubits 2; clbits 0; cz 0 1;"), qpus, placement)


def test_uncoupled_local_gate_rejected():
    # line coupling 0-1, 1-2: a CZ on (0, 2) cannot be routed
    qpus = (QpuSpec("a", 3, coupling=((0, 1), (1, 2))),)
    circuit = parse_circuit("qubits 3; clbits 0; cz 0 2;")
    with pytest.raises(CompileError, match="not coupled"):
        compile_circuit(circuit, qpus)


def test_placement_validation_errors():
    circuit = parse_circuit("qubits 2; clbits 0; cz 0 1;")
    with pytest.raises(CompileError, match="unknown QPU"):
        compile_circuit(circuit, TWO_QPUS, Placement({0: ("nope", 0), 1: ("qpu1", 0)}))
    with pytest.raises(CompileError, match="missing"):
        compile_circuit(circuit, TWO_QPUS, Placement({0: ("qpu0", 0)}))
    with pytest.raises(CompileError, match="not a data qubit"):
        compile_circuit(circuit, TWO_QPUS, Placement({0: ("qpu0", 3), 1: ("qpu1", 0)}))
    with pytest.raises(CompileError, match="assigned twice"):
        Placement({0: ("qpu0", 0), 1: ("qpu0", 0)})


def test_allocate_placement_capacity():
    with pytest.raises(CompileError, match="capacity"):
        allocate_placement({0: "a", 1: "a", 2: "a"}, (QpuSpec("a", 2),))


def test_compile_is_deterministic():
    a = compile_circuit(ghz_circuit(5), TWO_QPUS)
    b = compile_circuit(ghz_circuit(5), TWO_QPUS)
    assert a == b
    assert format_program(a) == format_program(b)


GOLDEN_DUMP = """\
placement:
  q0 -> qpu0[0]
  q1 -> qpu1[0]
  q2 -> qpu1[1]
  q3 -> qpu0[1]
  q4 -> qpu0[2]
remote_gates: 2
stream qpu0:
  apply h 0
  epr pair=0 link=qpu0-qpu1 local=3 remote=qpu1[3]
  apply cnot 0 3
  measure_comm 3 -> m0
  send m0 -> qpu1
  recv m1
  cond m1: apply z 0
  reset_comm 3
  apply h 1
  recv m2
  cond m2: apply x 3
  apply cz 3 1
  apply h 3
  measure_comm 3 -> m3
  send m3 -> qpu1
  reset_comm 3
  apply h 1
  apply h 2
  apply cz 1 2
  apply h 2
  apply measure 0 -> c0
  apply measure 1 -> c3
  apply measure 2 -> c4
stream qpu1:
  apply h 0
  recv m0
  cond m0: apply x 3
  apply cz 3 0
  apply h 3
  measure_comm 3 -> m1
  send m1 -> qpu0
  reset_comm 3
  apply h 0
  apply h 1
  apply cz 0 1
  apply h 1
  epr pair=1 link=qpu0-qpu1 local=3 remote=qpu0[3]
  apply cnot 1 3
  measure_comm 3 -> m2
  send m2 -> qpu0
  recv m3
  cond m3: apply z 1
  reset_comm 3
  apply measure 0 -> c1
  apply measure 1 -> c2
"""


def test_golden_program_dump(paper_placement):
    program = compile_circuit(ghz_circuit(5), TWO_QPUS, paper_placement)
    assert format_program(program) == GOLDEN_DUMP


def random_circuit(rng, n, num_gates):
    kinds = [GateKind.H, GateKind.X, GateKind.Z, GateKind.CZ, GateKind.CNOT]
    gates = []
    for _ in range(num_gates):
        kind = kinds[rng.integers(0, len(kinds))]
        if kind in (GateKind.CZ, GateKind.CNOT):
            a, b = rng.choice(n, size=2, replace=False)
            gates.append(Gate(kind, (int(a), int(b))))
        else:
            gates.append(Gate(kind, (int(rng.integers(0, n)),)))
    return AbstractCircuit(n, 0, tuple(gates))


def random_placement(rng, n, qpus):
    while True:
        names = [qpus[int(rng.integers(0, len(qpus)))].name for _ in range(n)]
        loads = {q.name: names.count(q.name) for q in qpus}
        if all(loads[q.name] <= q.data_qubits for q in qpus):
            return allocate_placement(dict(enumerate(names)), qpus)


@pytest.mark.parametrize("trial", range(12))
def test_semantic_preservation_on_ideal_hardware(trial):
    # compiled execution must reproduce the monolithic pure state
    rng = np.random.default_rng(1000 + trial)
    n = int(rng.integers(2, 7))
    circuit = random_circuit(rng, n, int(rng.integers(6, 18)))
    placement = random_placement(rng, n, TWO_QPUS)
    program = compile_circuit(circuit, TWO_QPUS, placement)
    result = execute(program, two_qpu_net(), mode="exact", seed=trial)
    psi = sv_from_circuit(circuit)
    assert fidelity_to_pure(result.pre_measurement_state.rho, psi) >= 1 - 1e-9


def test_qpu_spec_validation():
    with pytest.raises(CompileError):
        QpuSpec("bad", 0)
    with pytest.raises(CompileError):
        QpuSpec("bad", 2, gate_fidelity=1.5)
    with pytest.raises(CompileError):
        QpuSpec("bad", 2, coupling=((0, 9),))
    spec = QpuSpec("ok", 2, comm_qubits=2, coupling=((0, 1), (1, 2), (2, 3), (0, 3)))
    assert spec.comm_indices == (2, 3)
    assert spec.connected(0, 1) and not spec.connected(0, 2)
