"""Gate-level IR for monolithic circuits, plus the line-oriented text format.

A circuit is a flat, ordered list of gates over logical qubits. The gate set
is deliberately small: H/X/Z/CZ/CNOT cover the supported algorithms, and
MEASURE/RESET are needed for communication-qubit reuse and classical output.
All types are immutable after construction and safe to share between runs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class CircuitError(ValueError):
    """Syntax or semantic error in a circuit (carries a line number when parsed)."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class GateKind(Enum):
    H = "h"
    X = "x"
    Z = "z"
    CZ = "cz"
    CNOT = "cnot"
    MEASURE = "measure"
    RESET = "reset"

    @property
    def num_operands(self) -> int:
        return 2 if self in (GateKind.CZ, GateKind.CNOT) else 1

    @property
    def is_unitary(self) -> bool:
        return self not in (GateKind.MEASURE, GateKind.RESET)


@dataclass(frozen=True)
class Gate:
    """One instruction: a gate kind, its qubit operands, and for MEASURE the
    classical bit receiving the outcome."""

    kind: GateKind
    qubits: tuple[int, ...]
    clbit: int | None = None

    def __post_init__(self):
        if len(self.qubits) != self.kind.num_operands:
            raise CircuitError(
                f"{self.kind.value} takes {self.kind.num_operands} operand(s), "
                f"got {len(self.qubits)}"
            )
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"{self.kind.value} operands must be distinct: {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise CircuitError(f"negative qubit index in {self.kind.value} {self.qubits}")
        if self.kind is GateKind.MEASURE:
            if self.clbit is None or self.clbit < 0:
                raise CircuitError("measure requires a classical target bit")
        elif self.clbit is not None:
            raise CircuitError(f"{self.kind.value} does not take a classical target")


@dataclass(frozen=True)
class AbstractCircuit:
    """A validated, platform-independent circuit over logical qubits.

    Invariants enforced at construction: operand/classical indices in range,
    no gate on a measured qubit without an intervening RESET, and classical
    bits written at most once per RESET epoch.
    """

    num_qubits: int
    num_clbits: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.num_qubits < 1:
            raise CircuitError("circuit needs at least one qubit")
        if self.num_clbits < 0:
            raise CircuitError("negative classical bit count")
        object.__setattr__(self, "gates", tuple(self.gates))
        measured: set[int] = set()
        clbit_writer: dict[int, int] = {}  # clbit -> qubit that wrote it
        for g in self.gates:
            for q in g.qubits:
                if q >= self.num_qubits:
                    raise CircuitError(f"qubit index {q} out of range (num_qubits={self.num_qubits})")
                if q in measured and g.kind is not GateKind.RESET:
                    raise CircuitError(f"qubit {q} used after measure without reset")
            if g.kind is GateKind.MEASURE:
                if g.clbit >= self.num_clbits:
                    raise CircuitError(f"classical bit {g.clbit} out of range (num_clbits={self.num_clbits})")
                if g.clbit in clbit_writer:
                    raise CircuitError(f"classical bit {g.clbit} written twice without reset")
                clbit_writer[g.clbit] = g.qubits[0]
                measured.add(g.qubits[0])
            elif g.kind is GateKind.RESET:
                measured.discard(g.qubits[0])
                for c, writer in list(clbit_writer.items()):
                    if writer == g.qubits[0]:
                        del clbit_writer[c]

    @property
    def two_qubit_gates(self) -> tuple[Gate, ...]:
        return tuple(g for g in self.gates if len(g.qubits) == 2)


_MNEMONICS = {k.value: k for k in GateKind}


def parse_circuit(text: str) -> AbstractCircuit:
    """Parse the circuit file format into a validated AbstractCircuit.

    Format: `qubits N` and `clbits M` headers, then one instruction per
    statement (statements end at `;` or end of line). `#` starts a comment.
    """
    statements: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        for stmt in line.split(";"):
            tokens = stmt.split()
            if tokens:
                statements.append((lineno, tokens))

    if not statements:
        raise CircuitError("empty circuit file")

    def expect_header(idx: int, keyword: str) -> tuple[int, int]:
        if idx >= len(statements):
            raise CircuitError(f"missing '{keyword} N' header")
        lineno, tokens = statements[idx]
        if tokens[0] != keyword or len(tokens) != 2:
            raise CircuitError(f"expected '{keyword} N', got {' '.join(tokens)!r}", lineno)
        try:
            return int(tokens[1]), lineno
        except ValueError:
            raise CircuitError(f"bad {keyword} count {tokens[1]!r}", lineno) from None

    num_qubits, _ = expect_header(0, "qubits")
    num_clbits, _ = expect_header(1, "clbits")

    gates: list[Gate] = []
    for lineno, tokens in statements[2:]:
        name = tokens[0].lower()
        kind = _MNEMONICS.get(name)
        if kind is None:
            raise CircuitError(f"unknown instruction {name!r}", lineno)
        try:
            if kind is GateKind.MEASURE:
                if len(tokens) != 4 or tokens[2] != "->":
                    raise CircuitError("expected 'measure q -> c'", lineno)
                gates.append(Gate(kind, (int(tokens[1]),), clbit=int(tokens[3])))
            else:
                operands = tuple(int(t) for t in tokens[1:])
                gates.append(Gate(kind, operands))
        except CircuitError as exc:
            raise CircuitError(str(exc), line=lineno) if exc.line is None else exc from None
        except ValueError:
            raise CircuitError(f"bad operand in {' '.join(tokens)!r}", lineno) from None

    try:
        return AbstractCircuit(num_qubits, num_clbits, tuple(gates))
    except CircuitError as exc:
        raise CircuitError(f"invalid circuit: {exc}") from None


def serialize_circuit(circuit: AbstractCircuit) -> str:
    """Canonical text form; parse_circuit(serialize_circuit(c)) == c."""
    lines = [f"qubits {circuit.num_qubits}; clbits {circuit.num_clbits};"]
    for g in circuit.gates:
        if g.kind is GateKind.MEASURE:
            lines.append(f"measure {g.qubits[0]} -> {g.clbit}")
        else:
            lines.append(f"{g.kind.value} {' '.join(str(q) for q in g.qubits)}")
    return "\n".join(lines) + "\n"


def ghz_circuit(n: int) -> AbstractCircuit:
    """n-qubit GHZ preparation using only CZ and H, with terminal measurement.

    H on qubit 0, then each link i->i+1 is CZ conjugated by H on the target,
    which equals a CNOT chain. Ideal output is (|0...0> + |1...1>)/sqrt(2).
    """
    if n < 1:
        raise CircuitError("GHZ circuit needs n >= 1")
    gates: list[Gate] = [Gate(GateKind.H, (0,))]
    for i in range(n - 1):
        gates.append(Gate(GateKind.H, (i + 1,)))
        gates.append(Gate(GateKind.CZ, (i, i + 1)))
        gates.append(Gate(GateKind.H, (i + 1,)))
    for q in range(n):
        gates.append(Gate(GateKind.MEASURE, (q,), clbit=q))
    return AbstractCircuit(n, n, tuple(gates))
