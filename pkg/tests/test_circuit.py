import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dqcsim.circuit import (
    AbstractCircuit,
    CircuitError,
    Gate,
    GateKind,
    ghz_circuit,
    parse_circuit,
    serialize_circuit,
)
from dqcsim.density import simulate_ideal

from helpers import sv_from_circuit

GHZ5_SOURCE = """\
qubits 5; clbits 5;
h 0
h 1; cz 0 1; h 1
h 2; cz 1 2; h 2
h 3; cz 2 3; h 3
h 4; cz 3 4; h 4
measure 0 -> 0
measure 1 -> 1
measure 2 -> 2
measure 3 -> 3
measure 4 -> 4
"""


def test_parse_ghz5_source():
    c = parse_circuit(GHZ5_SOURCE)
    assert c.num_qubits == 5 and c.num_clbits == 5
    assert sum(1 for g in c.gates if g.kind is not GateKind.MEASURE) == 13
    assert c == ghz_circuit(5)


def test_parse_empty_circuit():
    c = parse_circuit("qubits 1; clbits 0;")
    assert c == AbstractCircuit(1, 0, ())


def test_parse_rejects_duplicate_operands():
    with pytest.raises(CircuitError, match="distinct"):
        parse_circuit("qubits 2; clbits 0; cz 0 0;")


def test_parse_comments_and_whitespace():
    c = parse_circuit("# header\nqubits  2 ; clbits 0\n  h   1  # trailing\n\ncz 0 1")
    assert c.gates == (Gate(GateKind.H, (1,)), Gate(GateKind.CZ, (0, 1)))


def test_parse_error_carries_line_number():
    with pytest.raises(CircuitError, match="line 3"):
        parse_circuit("qubits 2; clbits 0;\nh 0\nfrobnicate 1\n")
    with pytest.raises(CircuitError, match="line 2"):
        parse_circuit("qubits 2; clbits 1;\nmeasure 0 1\n")


def test_parse_requires_headers():
    with pytest.raises(CircuitError, match="qubits"):
        parse_circuit("h 0")
    with pytest.raises(CircuitError, match="clbits"):
        parse_circuit("qubits 3;")


def test_index_validation():
    with pytest.raises(CircuitError, match="out of range"):
        parse_circuit("qubits 2; clbits 0; h 2;")
    with pytest.raises(CircuitError, match="out of range"):
        parse_circuit("qubits 2; clbits 1; measure 0 -> 1;")


def test_use_after_measure_rules():
    with pytest.raises(CircuitError, match="after measure"):
        parse_circuit("qubits 1; clbits 1; measure 0 -> 0; h 0;")
    # reset re-opens the qubit
    parse_circuit("qubits 1; clbits 1; measure 0 -> 0; reset 0; h 0;")


def test_clbit_write_once_per_reset_epoch():
    with pytest.raises(CircuitError, match="written twice"):
        parse_circuit("qubits 2; clbits 1; measure 0 -> 0; measure 1 -> 0;")
    # the reset of the writing qubit opens a new epoch
    parse_circuit("qubits 1; clbits 1; measure 0 -> 0; reset 0; measure 0 -> 0;")


def test_serialize_empty_is_header_only():
    assert serialize_circuit(AbstractCircuit(1, 0, ())) == "qubits 1; clbits 0;\n"


def test_serialize_preserves_measure_lines():
    c = parse_circuit("qubits 2; clbits 2; h 0; measure 0 -> 1; measure 1 -> 0;")
    lines = serialize_circuit(c).splitlines()
    assert lines[2:] == ["measure 0 -> 1", "measure 1 -> 0"]


def test_ghz5_round_trips():
    c = ghz_circuit(5)
    assert parse_circuit(serialize_circuit(c)) == c


_gate_strategy = st.one_of(
    st.tuples(st.sampled_from([GateKind.H, GateKind.X, GateKind.Z]), st.integers(0, 3)),
    st.tuples(st.sampled_from([GateKind.CZ, GateKind.CNOT]), st.integers(0, 3), st.integers(0, 3)),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(_gate_strategy, max_size=25))
def test_round_trip_random_circuits(specs):
    gates = []
    for spec in specs:
        if len(spec) == 2:
            gates.append(Gate(spec[0], (spec[1],)))
        elif spec[1] != spec[2]:
            gates.append(Gate(spec[0], (spec[1], spec[2])))
    for q in range(4):
        gates.append(Gate(GateKind.MEASURE, (q,), clbit=q))
    c = AbstractCircuit(4, 4, tuple(gates))
    assert parse_circuit(serialize_circuit(c)) == c


def test_gate_arity_validation():
    with pytest.raises(CircuitError):
        Gate(GateKind.H, (0, 1))
    with pytest.raises(CircuitError):
        Gate(GateKind.CZ, (1,))
    with pytest.raises(CircuitError):
        Gate(GateKind.MEASURE, (0,))  # no classical target
    with pytest.raises(CircuitError):
        Gate(GateKind.H, (0,), clbit=0)


def test_ghz_rejects_zero():
    with pytest.raises(CircuitError):
        ghz_circuit(0)


def test_ghz_one_qubit():
    c = ghz_circuit(1)
    assert c.gates == (Gate(GateKind.H, (0,)), Gate(GateKind.MEASURE, (0,), clbit=0))


@pytest.mark.parametrize("n", range(1, 7))
def test_ghz_state_matches_target(n):
    # circuit-level invariant: ideal simulation hits (|0...0> + |1...1>)/sqrt(2)
    state = simulate_ideal(ghz_circuit(n))
    target = np.zeros(2**n, dtype=complex)
    target[0] = target[-1] = 1 / np.sqrt(2)
    fidelity = float(np.real(target.conj() @ state.rho @ target))
    assert fidelity >= 1 - 1e-9


def test_ghz2_matches_bell_via_statevector_oracle():
    psi = sv_from_circuit(ghz_circuit(2))
    bell = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    assert abs(abs(psi.conj() @ bell) ** 2 - 1.0) < 1e-12
