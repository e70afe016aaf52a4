"""Pure-state engine for trajectory (Monte Carlo) execution.

Noise is sampled per operation (quantum-trajectory unraveling) instead of
applied as a channel, so a single run stays a statevector and the ensemble
average over seeds reproduces the density-matrix channels exactly:

* gate noise: with probability 1 - fidelity, measure each operand qubit
  (discarding the outcome) and re-randomize it uniformly, which averages to
  the replace-with-maximally-mixed channel;
* link noise: a Werner pair is a Bell mixture, so one of the four Bell
  states is drawn with the Werner weights;
* readout error: the reported bit flips with the given probability.

The RNG draw order is fixed, making runs reproducible from their seed.
"""
from __future__ import annotations

import numpy as np

from .circuit import Gate, GateKind
from .density import MAX_QUBITS, StateError, _UNITARIES


class TrajectoryState:
    """Statevector over the same global qubit indexing as the density backend."""

    __slots__ = ("num_qubits", "amps")

    def __init__(self, num_qubits: int):
        if not 1 <= num_qubits <= MAX_QUBITS:
            raise StateError(f"qubit count {num_qubits} outside 1..{MAX_QUBITS}")
        self.num_qubits = num_qubits
        self.amps = np.zeros(1 << num_qubits, dtype=complex)
        self.amps[0] = 1.0


def _bit_shift(n: int, qubit: int) -> int:
    return n - 1 - qubit


def _apply_unitary(state: TrajectoryState, kind: GateKind, qubits: tuple[int, ...]) -> None:
    n = state.num_qubits
    idx = np.arange(1 << n)
    bits = [(idx >> _bit_shift(n, q)) & 1 for q in qubits]
    if kind is GateKind.Z:
        state.amps *= 1.0 - 2.0 * bits[0]
    elif kind is GateKind.CZ:
        state.amps *= 1.0 - 2.0 * (bits[0] & bits[1])
    elif kind is GateKind.X:
        state.amps = state.amps[idx ^ (1 << _bit_shift(n, qubits[0]))]
    elif kind is GateKind.CNOT:
        state.amps = state.amps[idx ^ (bits[0] << _bit_shift(n, qubits[1]))]
    elif kind is GateKind.H:
        q = qubits[0]
        left = 1 << q
        right = 1 << (n - q - 1)
        t = state.amps.reshape(left, 2, right)
        state.amps = np.einsum("ab,lbr->lar", _UNITARIES[GateKind.H], t).reshape(-1)
    else:
        raise StateError(f"{kind.value} is not a unitary gate")


def _prob_one(state: TrajectoryState, qubit: int) -> float:
    shift = _bit_shift(state.num_qubits, qubit)
    idx = np.arange(state.amps.size)
    p1 = float(np.sum(np.abs(state.amps[(idx >> shift) & 1 == 1]) ** 2))
    return min(max(p1, 0.0), 1.0)


def _collapse(state: TrajectoryState, qubit: int, outcome: int, prob: float) -> None:
    shift = _bit_shift(state.num_qubits, qubit)
    idx = np.arange(state.amps.size)
    state.amps[(idx >> shift) & 1 != outcome] = 0.0
    state.amps /= np.sqrt(prob)


def measure(
    state: TrajectoryState, qubit: int, error: float = 0.0, rng: np.random.Generator | None = None
) -> int:
    """Sample a computational-basis measurement; collapse follows the true
    outcome while the reported bit flips with probability `error`."""
    if not 0.0 <= error < 1.0:
        raise StateError(f"measurement error {error} outside [0, 1)")
    if rng is None:
        rng = np.random.default_rng()
    p1 = _prob_one(state, qubit)
    outcome = 1 if rng.random() < p1 else 0
    _collapse(state, qubit, outcome, p1 if outcome else 1.0 - p1)
    reported = outcome
    if error and rng.random() < error:
        reported ^= 1
    return reported


def apply_gate(
    state: TrajectoryState, gate: Gate, fidelity: float = 1.0, rng: np.random.Generator | None = None
) -> TrajectoryState:
    """Apply a unitary; with probability 1 - fidelity scramble the operands
    (measure, discard, re-randomize), sampling the depolarizing channel."""
    if not 0.0 < fidelity <= 1.0:
        raise StateError(f"gate fidelity {fidelity} outside (0, 1]")
    _apply_unitary(state, gate.kind, gate.qubits)
    if fidelity < 1.0:
        if rng is None:
            rng = np.random.default_rng()
        if rng.random() < 1.0 - fidelity:
            for q in gate.qubits:
                measure(state, q, 0.0, rng)
                if rng.random() < 0.5:
                    _apply_unitary(state, GateKind.X, (q,))
    return state


def reset(state: TrajectoryState, qubit: int, rng: np.random.Generator | None = None) -> TrajectoryState:
    """Measure, discard the outcome, and flip to |0> if needed."""
    if rng is None:
        rng = np.random.default_rng()
    p1 = _prob_one(state, qubit)
    outcome = 1 if rng.random() < p1 else 0
    _collapse(state, qubit, outcome, p1 if outcome else 1.0 - p1)
    if outcome:
        _apply_unitary(state, GateKind.X, (qubit,))
    return state


def inject_epr(
    state: TrajectoryState,
    qubit_a: int,
    qubit_b: int,
    link_fidelity: float,
    rng: np.random.Generator | None = None,
) -> TrajectoryState:
    """Sample one Bell state from the Werner mixture with fidelity F to
    |Phi+>: weight F on |Phi+>, (1-F)/3 on each of the other three."""
    if not 0.25 < link_fidelity <= 1.0:
        raise StateError(f"link fidelity {link_fidelity} outside (1/4, 1]")
    for q in (qubit_a, qubit_b):
        if _prob_one(state, q) > 1e-9:
            raise StateError(f"qubit {q} is not fresh (|0>) before EPR injection")
    if rng is None:
        rng = np.random.default_rng()
    _apply_unitary(state, GateKind.H, (qubit_a,))
    _apply_unitary(state, GateKind.CNOT, (qubit_a, qubit_b))
    draw = rng.random()
    other = (1.0 - link_fidelity) / 3.0
    if draw < link_fidelity:
        pass  # |Phi+>
    elif draw < link_fidelity + other:
        _apply_unitary(state, GateKind.Z, (qubit_a,))  # |Phi->
    elif draw < link_fidelity + 2.0 * other:
        _apply_unitary(state, GateKind.X, (qubit_b,))  # |Psi+>
    else:
        _apply_unitary(state, GateKind.Z, (qubit_a,))
        _apply_unitary(state, GateKind.X, (qubit_b,))  # |Psi->
    return state
