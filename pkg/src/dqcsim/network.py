"""Quantum network model: QPUs, repeaters, and quantum/classical links.

Quantum links deliver Werner pairs; repeater chains compose pair quality by
multiplying Werner parameters (entanglement swapping), so a route's
effective fidelity never exceeds its weakest hop. The model is immutable
after loading and route resolution is a pure function.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .compiler import QpuSpec
from .density import GlobalQuantumState, inject_epr

DEFAULT_EPR_LATENCY = 10.0
DEFAULT_CLASSICAL_LATENCY = 1.0


class NetworkConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class RouteError(ValueError):
    pass


@dataclass(frozen=True)
class RepeaterSpec:
    name: str
    swap_fidelity: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.swap_fidelity <= 1.0:
            raise NetworkConfigError(f"{self.name}: swap fidelity {self.swap_fidelity} outside (0, 1]")


@dataclass(frozen=True)
class QuantumLink:
    a: str
    b: str
    fidelity: float = 1.0
    epr_latency: float = DEFAULT_EPR_LATENCY

    def __post_init__(self):
        if not 0.25 < self.fidelity <= 1.0:
            raise NetworkConfigError(f"link {self.a}-{self.b}: fidelity {self.fidelity} outside (1/4, 1]")
        if self.epr_latency < 0:
            raise NetworkConfigError(f"link {self.a}-{self.b}: negative latency")


@dataclass(frozen=True)
class ClassicalLink:
    a: str
    b: str
    latency: float = DEFAULT_CLASSICAL_LATENCY

    def __post_init__(self):
        if self.latency < 0:
            raise NetworkConfigError(f"classical link {self.a}-{self.b}: negative latency")


@dataclass(frozen=True)
class NetworkModel:
    qpus: tuple[QpuSpec, ...]
    repeaters: tuple[RepeaterSpec, ...] = ()
    quantum_links: tuple[QuantumLink, ...] = ()
    classical_links: tuple[ClassicalLink, ...] = ()

    def __post_init__(self):
        names = [q.name for q in self.qpus] + [r.name for r in self.repeaters]
        if len(set(names)) != len(names):
            raise NetworkConfigError("duplicate node name in network")
        if not self.qpus:
            raise NetworkConfigError("network declares no QPUs")
        declared = set(names)
        classical_pairs = {frozenset((l.a, l.b)) for l in self.classical_links}
        for link in list(self.quantum_links) + list(self.classical_links):
            for end in (link.a, link.b):
                if end not in declared:
                    raise NetworkConfigError(f"link endpoint {end!r} is not a declared node")
            if link.a == link.b:
                raise NetworkConfigError(f"link {link.a}-{link.b} is a self-loop")
        for link in self.quantum_links:
            if frozenset((link.a, link.b)) not in classical_pairs:
                raise NetworkConfigError(
                    f"quantum link {link.a}-{link.b} has no classical link between the same endpoints"
                )

    def qpu(self, name: str) -> QpuSpec:
        for q in self.qpus:
            if q.name == name:
                return q
        raise KeyError(name)

    def is_qpu(self, name: str) -> bool:
        return any(q.name == name for q in self.qpus)

    def swap_fidelity(self, name: str) -> float:
        for r in self.repeaters:
            if r.name == name:
                return r.swap_fidelity
        raise KeyError(name)


@dataclass(frozen=True)
class EprRoute:
    path: tuple[str, ...]
    effective_fidelity: float
    total_latency: float


def werner_parameter(fidelity: float) -> float:
    return (4.0 * fidelity - 1.0) / 3.0


def fidelity_from_parameter(w: float) -> float:
    return (1.0 + 3.0 * w) / 4.0


def compose_werner(f1: float, f2: float) -> float:
    """Fidelity of the pair produced by swapping two Werner pairs: the
    Werner parameters multiply, F = (1 + 3 w1 w2)/4."""
    for f in (f1, f2):
        if not 0.25 < f <= 1.0:
            raise RouteError(f"fidelity {f} outside (1/4, 1]")
    return fidelity_from_parameter(werner_parameter(f1) * werner_parameter(f2))


def _quantum_adjacency(net: NetworkModel) -> dict[str, dict[str, QuantumLink]]:
    adj: dict[str, dict[str, QuantumLink]] = {}
    for link in net.quantum_links:
        adj.setdefault(link.a, {})[link.b] = link
        adj.setdefault(link.b, {})[link.a] = link
    return adj


def resolve_route(
    net: NetworkModel, a: str, b: str, link_fidelity_override: float | None = None
) -> EprRoute:
    """Shortest quantum path (by hop count, lexicographic tie-break) from QPU
    a to QPU b through repeaters, with the composed Werner fidelity and the
    summed pair-generation latency."""
    if a == b:
        raise RouteError(f"EPR route endpoints must differ, got {a!r} twice")
    for end in (a, b):
        if not net.is_qpu(end):
            raise RouteError(f"{end!r} is not a QPU")
    adj = _quantum_adjacency(net)

    # BFS from b so the path can be rebuilt greedily from a; only repeaters relay.
    dist = {b: 0}
    frontier = [b]
    while frontier:
        nxt = []
        for node in frontier:
            if node != b and net.is_qpu(node):
                continue  # QPUs terminate paths, they do not relay
            for neigh in sorted(adj.get(node, {})):
                if neigh not in dist:
                    dist[neigh] = dist[node] + 1
                    nxt.append(neigh)
        frontier = nxt
    if a not in dist:
        raise RouteError(f"no quantum path between {a} and {b}")

    path = [a]
    node = a
    while node != b:
        node = min(
            n
            for n in adj[node]
            if dist.get(n, -1) == dist[node] - 1 and (n == b or not net.is_qpu(n))
        )
        path.append(node)

    w = 1.0
    latency = 0.0
    for here, there in zip(path, path[1:]):
        link = adj[here][there]
        fid = link.fidelity if link_fidelity_override is None else link_fidelity_override
        w *= werner_parameter(fid)
        latency += link.epr_latency
    for interior in path[1:-1]:
        w *= werner_parameter(net.swap_fidelity(interior))
    fidelity = fidelity_from_parameter(w)
    if not 0.25 < fidelity <= 1.0 + 1e-12:
        raise RouteError(f"route {'-'.join(path)} composes to unusable fidelity {fidelity}")
    return EprRoute(tuple(path), min(fidelity, 1.0), latency)


def classical_latency(net: NetworkModel, a: str, b: str) -> float:
    """Latency of the shortest classical path (hops, then lexicographic)."""
    adj: dict[str, dict[str, float]] = {}
    for link in net.classical_links:
        adj.setdefault(link.a, {})[link.b] = link.latency
        adj.setdefault(link.b, {})[link.a] = link.latency
    if a == b:
        return 0.0
    dist = {b: (0, 0.0)}
    frontier = [b]
    while frontier:
        nxt = []
        for node in frontier:
            for neigh in sorted(adj.get(node, {})):
                if neigh not in dist:
                    hops, lat = dist[node]
                    dist[neigh] = (hops + 1, lat + adj[node][neigh])
                    nxt.append(neigh)
        frontier = nxt
    if a not in dist:
        raise RouteError(f"no classical path between {a} and {b}")
    return dist[a][1]


def deliver_epr(
    net: NetworkModel,
    route: EprRoute,
    state: GlobalQuantumState,
    qubit_a: int,
    qubit_b: int,
) -> GlobalQuantumState:
    """Materialize the route's pair on two fresh comm qubits."""
    return inject_epr(state, qubit_a, qubit_b, route.effective_fidelity)


# --- network config file ------------------------------------------------------
#
# Block-structured text:
#
#   qpu <name> {           repeater <name> {     qlink <a> <b> {   clink <a> <b> {
#     data_qubits N          swap_fidelity F       fidelity F        latency T
#     comm_qubits N        }                       latency T       }
#     coupling all|a-b...                        }
#     gate_fidelity F
#     measurement_error E
#   }


def parse_network(text: str) -> NetworkModel:
    qpus: list[QpuSpec] = []
    repeaters: list[RepeaterSpec] = []
    qlinks: list[QuantumLink] = []
    clinks: list[ClassicalLink] = []

    block_kind: str | None = None
    block_args: list[str] = []
    block_fields: dict[str, list[str]] = {}
    block_line = 0

    def close_block(lineno: int):
        nonlocal block_kind
        try:
            if block_kind == "qpu":
                qpus.append(_build_qpu(block_args, block_fields))
            elif block_kind == "repeater":
                repeaters.append(
                    RepeaterSpec(block_args[0], float(block_fields.get("swap_fidelity", ["1.0"])[0]))
                )
            elif block_kind == "qlink":
                qlinks.append(
                    QuantumLink(
                        block_args[0],
                        block_args[1],
                        fidelity=float(block_fields.get("fidelity", ["1.0"])[0]),
                        epr_latency=float(block_fields.get("latency", [str(DEFAULT_EPR_LATENCY)])[0]),
                    )
                )
            elif block_kind == "clink":
                clinks.append(
                    ClassicalLink(
                        block_args[0],
                        block_args[1],
                        latency=float(block_fields.get("latency", [str(DEFAULT_CLASSICAL_LATENCY)])[0]),
                    )
                )
        except NetworkConfigError:
            raise
        except (ValueError, IndexError) as exc:
            raise NetworkConfigError(f"bad {block_kind} block: {exc}", block_line) from None
        block_kind = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if block_kind is None:
            tokens = line.split()
            if tokens[-1] != "{":
                raise NetworkConfigError(f"expected a block header ending in '{{', got {line!r}", lineno)
            kind = tokens[0]
            if kind not in ("qpu", "repeater", "qlink", "clink"):
                raise NetworkConfigError(f"unknown block kind {kind!r}", lineno)
            expected_args = 1 if kind in ("qpu", "repeater") else 2
            if len(tokens) != expected_args + 2:
                raise NetworkConfigError(f"{kind} block takes {expected_args} name(s)", lineno)
            block_kind, block_args, block_fields, block_line = kind, tokens[1:-1], {}, lineno
        elif line == "}":
            close_block(lineno)
        else:
            tokens = line.split()
            block_fields[tokens[0]] = tokens[1:]
    if block_kind is not None:
        raise NetworkConfigError(f"unterminated {block_kind} block", block_line)
    return NetworkModel(tuple(qpus), tuple(repeaters), tuple(qlinks), tuple(clinks))


def _build_qpu(args: list[str], fields: dict[str, list[str]]) -> QpuSpec:
    name = args[0]
    data = int(fields["data_qubits"][0])
    comm = int(fields.get("comm_qubits", ["1"])[0])
    coupling: tuple[tuple[int, int], ...] | None = None
    if "coupling" in fields:
        spec = fields["coupling"]
        if spec != ["all"]:
            pairs = []
            for token in spec:
                a, _, b = token.partition("-")
                pairs.append((int(a), int(b)))
            coupling = tuple(pairs)
    return QpuSpec(
        name=name,
        data_qubits=data,
        comm_qubits=comm,
        coupling=coupling,
        gate_fidelity=float(fields.get("gate_fidelity", ["1.0"])[0]),
        measurement_error=float(fields.get("measurement_error", ["0.0"])[0]),
    )


def load_network(path) -> NetworkModel:
    from pathlib import Path

    return parse_network(Path(path).read_text())
