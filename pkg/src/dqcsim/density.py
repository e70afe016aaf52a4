"""Exact density-matrix backend over the union of all device qubits.

One global density matrix spans every physical qubit of every simulated QPU,
so cross-device entanglement is represented exactly. Qubit 0 is the most
significant bit of basis-state labels. States are confined to a single run
and mutated in place; operations return the state for chaining.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .circuit import AbstractCircuit, Gate, GateKind

MAX_QUBITS = 12

_SQ2 = 1.0 / math.sqrt(2.0)
_UNITARIES = {
    GateKind.H: np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.Z: np.array([[1, 0], [0, -1]], dtype=complex),
    GateKind.CZ: np.diag([1, 1, 1, -1]).astype(complex),
    GateKind.CNOT: np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
}


class StateError(ValueError):
    pass


class GlobalQuantumState:
    """Density matrix over num_qubits qubits (2^n x 2^n complex)."""

    __slots__ = ("num_qubits", "rho")

    def __init__(self, num_qubits: int, rho: np.ndarray):
        self.num_qubits = num_qubits
        self.rho = rho

    def copy(self) -> "GlobalQuantumState":
        return GlobalQuantumState(self.num_qubits, self.rho.copy())

    def validate(self, atol: float = 1e-8) -> None:
        tr = np.trace(self.rho)
        if abs(tr - 1.0) > atol:
            raise StateError(f"trace drifted to {tr}")
        if np.abs(self.rho - self.rho.conj().T).max() > atol:
            raise StateError("state is not Hermitian")
        min_ev = np.linalg.eigvalsh(self.rho).min()
        if min_ev < -1e-7:
            raise StateError(f"state has negative eigenvalue {min_ev}")


def init_state(num_qubits: int) -> GlobalQuantumState:
    """All-zeros pure state |0...0><0...0|."""
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise StateError(f"qubit count {num_qubits} outside 1..{MAX_QUBITS}")
    dim = 2**num_qubits
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    return GlobalQuantumState(num_qubits, rho)


def _axis_split(n: int, qubits: Sequence[int]) -> tuple[int, ...]:
    """Row-major shape isolating each qubit axis: (left, 2, mid, 2, ..., right)."""
    dims = []
    prev = -1
    for q in qubits:
        dims.append(1 << (q - prev - 1))
        dims.append(2)
        prev = q
    dims.append(1 << (n - prev - 1))
    return tuple(dims)


def _sorted_gate_tensor(u: np.ndarray, qubits: Sequence[int]) -> tuple[np.ndarray, list[int]]:
    """Reorder a k-qubit unitary so it acts on sorted(qubits)."""
    k = len(qubits)
    order = sorted(range(k), key=lambda i: qubits[i])
    ut = u.reshape((2,) * (2 * k))
    if order != list(range(k)):
        ut = ut.transpose(order + [k + i for i in order])
    return ut, sorted(qubits)


def _apply_unitary_generic(state: GlobalQuantumState, u: np.ndarray, qubits: Sequence[int]) -> None:
    """rho <- U rho U^dag for an arbitrary 1- or 2-qubit unitary."""
    n = state.num_qubits
    dim = 1 << n
    ut, qs = _sorted_gate_tensor(u, qubits)
    split = _axis_split(n, qs)
    if len(qs) == 1:
        t = np.einsum("ab,lbrx->larx", ut, state.rho.reshape(split + (dim,)))
        t = np.einsum("ab,xlbr->xlar", ut.conj(), t.reshape((dim,) + split))
    elif len(qs) == 2:
        t = np.einsum("abcd,lcmdrx->lambrx", ut, state.rho.reshape(split + (dim,)))
        t = np.einsum("abcd,xlcmdr->xlambr", ut.conj(), t.reshape((dim,) + split))
    else:
        raise StateError(f"gates act on 1 or 2 qubits, got {len(qs)}")
    state.rho = t.reshape(dim, dim)


# Per-gate application plans, keyed by (num_qubits, kind, operands). Diagonal
# gates become sign masks, X/CNOT become basis permutations (both are their
# own inverse), and H uses BLAS matmul with a layout picked by qubit position.
_PLAN_CACHE: dict[tuple[int, GateKind, tuple[int, ...]], dict] = {}
_COL_KRON_LIMIT = 16


def _gate_plan(n: int, kind: GateKind, qubits: tuple[int, ...]) -> dict:
    key = (n, kind, qubits)
    plan = _PLAN_CACHE.get(key)
    if plan is not None:
        return plan
    dim = 1 << n
    idx = np.arange(dim)
    bits = [(idx >> (n - 1 - q)) & 1 for q in qubits]
    if kind in (GateKind.Z, GateKind.CZ):
        affected = bits[0] if kind is GateKind.Z else bits[0] & bits[1]
        plan = {"signs": 1.0 - 2.0 * affected}
    elif kind is GateKind.X:
        plan = {"perm": idx ^ (1 << (n - 1 - qubits[0]))}
    elif kind is GateKind.CNOT:
        control, target = qubits
        plan = {"perm": idx ^ (bits[0] << (n - 1 - target))}
    elif kind is GateKind.H and len(qubits) == 1:
        q = qubits[0]
        left = 1 << q
        right = dim >> (q + 1)
        u = _UNITARIES[GateKind.H]
        plan = {"u": u, "left": left, "right": right, "dim": dim}
        if right <= _COL_KRON_LIMIT:
            plan["col_op"] = np.kron(u.conj(), np.eye(right, dtype=complex)).T
    else:
        plan = {"generic": _UNITARIES[kind]}
    _PLAN_CACHE[key] = plan
    return plan


def _apply_unitary(state: GlobalQuantumState, kind: GateKind, qubits: tuple[int, ...]) -> None:
    plan = _gate_plan(state.num_qubits, kind, qubits)
    if "signs" in plan:
        signs = plan["signs"]
        state.rho *= signs[:, None]
        state.rho *= signs[None, :]
    elif "perm" in plan:
        perm = plan["perm"]
        state.rho = state.rho[perm][:, perm]
    elif "u" in plan:
        u, left, right, dim = plan["u"], plan["left"], plan["right"], plan["dim"]
        t = np.matmul(u, state.rho.reshape(left, 2, right * dim))
        if "col_op" in plan:
            t = np.matmul(t.reshape(dim * left, 2 * right), plan["col_op"])
        else:
            t = np.matmul(u.conj(), t.reshape(dim * left, 2, right))
        state.rho = t.reshape(dim, dim)
    else:
        _apply_unitary_generic(state, plan["generic"], qubits)


def depolarize(state: GlobalQuantumState, qubits: Sequence[int], p: float) -> GlobalQuantumState:
    """rho <- (1-p) rho + p (tr_qubits(rho) x I/2^k): replace the operand
    qubits with the maximally mixed state with probability p."""
    if not 0.0 <= p <= 1.0:
        raise StateError(f"depolarizing probability {p} outside [0, 1]")
    if p == 0.0:
        return state
    n = state.num_qubits
    qs = sorted(qubits)
    split = _axis_split(n, qs)
    view = state.rho.reshape(split + split)
    if len(qs) == 1:
        rest = view[:, 0, :, :, 0, :] + view[:, 1, :, :, 1, :]
        state.rho *= 1.0 - p
        share = (p / 2.0) * rest
        view[:, 0, :, :, 0, :] += share
        view[:, 1, :, :, 1, :] += share
    elif len(qs) == 2:
        rest = sum(view[:, a, :, b, :, :, a, :, b, :] for a in (0, 1) for b in (0, 1))
        state.rho *= 1.0 - p
        share = (p / 4.0) * rest
        for a in (0, 1):
            for b in (0, 1):
                view[:, a, :, b, :, :, a, :, b, :] += share
    else:
        raise StateError(f"depolarizing supports 1 or 2 qubits, got {len(qs)}")
    return state


def apply_gate(state: GlobalQuantumState, gate: Gate, fidelity: float = 1.0) -> GlobalQuantumState:
    """Apply a unitary gate, then depolarize its operands with p = 1 - fidelity."""
    if not gate.kind.is_unitary:
        raise StateError(f"{gate.kind.value} is not a unitary gate")
    if not 0.0 < fidelity <= 1.0:
        raise StateError(f"gate fidelity {fidelity} outside (0, 1]")
    for q in gate.qubits:
        if not 0 <= q < state.num_qubits:
            raise StateError(f"qubit {q} out of range")
    _apply_unitary(state, gate.kind, gate.qubits)
    if fidelity < 1.0:
        depolarize(state, gate.qubits, 1.0 - fidelity)
    return state


def _prob_one(state: GlobalQuantumState, qubit: int) -> float:
    diag = np.real(np.diagonal(state.rho)).reshape(_axis_split(state.num_qubits, [qubit]))
    p1 = float(diag[:, 1, :].sum())
    if not -1e-9 <= p1 <= 1.0 + 1e-9:
        raise StateError(f"marginal probability {p1} outside [0, 1]")
    return min(max(p1, 0.0), 1.0)


def _project(rho: np.ndarray, qubit: int, outcome: int, n: int) -> np.ndarray:
    """Unnormalized P_m rho P_m for the computational-basis projector."""
    split = _axis_split(n, [qubit])
    out = np.zeros_like(rho)
    out.reshape(split + split)[:, outcome, :, :, outcome, :] = rho.reshape(split + split)[
        :, outcome, :, :, outcome, :
    ]
    return out


def measure(
    state: GlobalQuantumState, qubit: int, error: float = 0.0, rng: np.random.Generator | None = None
) -> tuple[int, GlobalQuantumState]:
    """Sample a computational-basis measurement and collapse the state.

    With probability `error` the *reported* bit is flipped; the
    post-measurement state always follows the true outcome.
    """
    if not 0.0 <= error < 1.0:
        raise StateError(f"measurement error {error} outside [0, 1)")
    if rng is None:
        rng = np.random.default_rng()
    p1 = _prob_one(state, qubit)
    outcome = 1 if rng.random() < p1 else 0
    prob = p1 if outcome else 1.0 - p1
    state.rho = _project(state.rho, qubit, outcome, state.num_qubits) / prob
    reported = outcome
    if error and rng.random() < error:
        reported ^= 1
    return reported, state


def apply_measure_channel(
    state: GlobalQuantumState,
    qubit: int,
    corrections: Mapping[int, Sequence[Gate]],
    *,
    readout_error: float = 0.0,
    gate_fidelity: float = 1.0,
) -> GlobalQuantumState:
    """Fold measure-and-correct into one deterministic channel:
    rho <- sum_m C_m P_m rho P_m C_m^dag, with the corrections for the
    reported bit applied as (optionally noisy) gates. Equals the ensemble
    average of sampled `measure` plus conditional corrections.
    """
    if not 0.0 <= readout_error < 1.0:
        raise StateError(f"readout error {readout_error} outside [0, 1)")
    n = state.num_qubits
    total = np.zeros_like(state.rho)
    for m in (0, 1):
        branch = _project(state.rho, qubit, m, n)
        for reported in (0, 1):
            weight = 1.0 - readout_error if reported == m else readout_error
            if weight == 0.0:
                continue
            piece = GlobalQuantumState(n, weight * branch.copy())
            for g in corrections.get(reported, ()):
                apply_gate(piece, g, gate_fidelity)
            total += piece.rho
    state.rho = total
    return state


def reset(state: GlobalQuantumState, qubit: int) -> GlobalQuantumState:
    """Re-initialize one qubit to |0>: measure, discard the outcome, and flip
    on 1, i.e. rho <- P0 rho P0 + X P1 rho P1 X."""
    n = state.num_qubits
    split = _axis_split(n, [qubit])
    view = state.rho.reshape(split + split)
    rest = view[:, 0, :, :, 0, :] + view[:, 1, :, :, 1, :]
    new = np.zeros_like(state.rho)
    new.reshape(split + split)[:, 0, :, :, 0, :] = rest
    state.rho = new
    return state


def inject_epr(
    state: GlobalQuantumState, qubit_a: int, qubit_b: int, link_fidelity: float
) -> GlobalQuantumState:
    """Place two fresh qubits in a Werner pair with the given fidelity to
    |Phi+> = (|00>+|11>)/sqrt(2).

    Built as an ideal Bell pair followed by two-qubit depolarizing with
    p = 1 - w, w = (4F - 1)/3, which yields F|Phi+><Phi+| plus (1-F)/3 on
    each of the other three Bell projectors.
    """
    if not 0.25 < link_fidelity <= 1.0:
        raise StateError(f"link fidelity {link_fidelity} outside (1/4, 1]")
    if qubit_a == qubit_b:
        raise StateError("EPR endpoints must be distinct qubits")
    for q in (qubit_a, qubit_b):
        if _prob_one(state, q) > 1e-9:
            raise StateError(f"qubit {q} is not fresh (|0>) before EPR injection")
    apply_gate(state, Gate(GateKind.H, (qubit_a,)))
    apply_gate(state, Gate(GateKind.CNOT, (qubit_a, qubit_b)))
    w = (4.0 * link_fidelity - 1.0) / 3.0
    depolarize(state, (qubit_a, qubit_b), 1.0 - w)
    return state


def simulate_ideal(circuit: AbstractCircuit) -> GlobalQuantumState:
    """Noiseless reference evolution of a monolithic circuit.

    MEASURE instructions are skipped (the returned state is the
    pre-measurement state); RESET is applied as the reset channel.
    """
    state = init_state(circuit.num_qubits)
    for g in circuit.gates:
        if g.kind is GateKind.MEASURE:
            continue
        if g.kind is GateKind.RESET:
            reset(state, g.qubits[0])
        else:
            apply_gate(state, g)
    return state


def dump_state(state: GlobalQuantumState) -> str:
    """Debug dump: row-major matrix, entries as 're,im' pairs."""
    rows = []
    for row in state.rho:
        rows.append(" ".join(f"{z.real:.12g},{z.imag:.12g}" for z in row))
    return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class NoiseSpec:
    """Sweep-point noise override: gate and link fidelity, plus an optional
    readout error that replaces the per-QPU setting when given."""

    gate_fidelity: float = 1.0
    link_fidelity: float = 1.0
    measurement_error: float | None = None

    def __post_init__(self):
        if not 0.0 < self.gate_fidelity <= 1.0:
            raise StateError(f"gate fidelity {self.gate_fidelity} outside (0, 1]")
        if not 0.25 < self.link_fidelity <= 1.0:
            raise StateError(f"link fidelity {self.link_fidelity} outside (1/4, 1]")
        if self.measurement_error is not None and not 0.0 <= self.measurement_error < 1.0:
            raise StateError(f"measurement error {self.measurement_error} outside [0, 1)")


@dataclass(frozen=True)
class QubitMap:
    """Bijection from (qpu name, physical qubit index) to global qubit index."""

    entries: Mapping[tuple[str, int], int] = field(default_factory=dict)

    def __post_init__(self):
        values = sorted(self.entries.values())
        if values != list(range(len(values))):
            raise StateError("qubit map is not a bijection onto 0..n-1")

    def __getitem__(self, key: tuple[str, int]) -> int:
        return self.entries[key]

    @property
    def num_qubits(self) -> int:
        return len(self.entries)
