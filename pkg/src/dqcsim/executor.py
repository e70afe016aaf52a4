"""Discrete-event execution of a distributed program on a simulated network.

One run owns one global quantum state and one event clock. Instruction
streams interleave under a deterministic scheduling policy; EPR requests and
classical messages become timed events whose latencies come from the network
model. Two modes:

* trajectory: every measurement is sampled with the run's RNG (Monte Carlo).
* exact: measure-and-correct groups on comm qubits fold into deterministic
  channels and terminal measurements stay unsampled, so the full output
  distribution can be read off the final density matrix.

Identical (program, network, mode, seed) always reproduces the identical
event log.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analytics import partial_trace, permute_qubits
from .circuit import Gate, GateKind
from .compiler import (
    ConditionalGate,
    DistributedProgram,
    EprRequest,
    LocalGate,
    MeasureCommQubit,
    RecvBit,
    ResetComm,
    SendBit,
)
from . import trajectory
from .density import (
    GlobalQuantumState,
    NoiseSpec,
    QubitMap,
    apply_gate,
    apply_measure_channel,
    init_state,
    measure,
    reset,
)
from .network import NetworkModel, classical_latency, deliver_epr, resolve_route

RUN_START = "RUN_START"
RUN_END = "RUN_END"
GATE_APPLIED = "GATE_APPLIED"
EPR_REQUESTED = "EPR_REQUESTED"
EPR_DELIVERED = "EPR_DELIVERED"
MEASUREMENT = "MEASUREMENT"
CLASSICAL_SENT = "CLASSICAL_SENT"
CLASSICAL_RECEIVED = "CLASSICAL_RECEIVED"
COMM_RESET = "COMM_RESET"

MODES = ("trajectory", "exact")
POLICIES = ("round_robin", "greedy")


class SimulationError(RuntimeError):
    pass


class DeadlockError(SimulationError):
    pass


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    qpu: str | None
    payload: dict

    def format(self) -> str:
        fields = " ".join(f"{k}={_fmt(v)}" for k, v in self.payload.items())
        line = f"{self.time:g} {self.kind} {self.qpu or '-'}"
        return f"{line} {fields}" if fields else line


@dataclass
class ExecutionLog:
    run_id: str
    seed: int
    mode: str
    events: list[Event] = field(default_factory=list)
    final_outcome: str | None = None
    final_state: GlobalQuantumState | None = None

    def to_text(self) -> str:
        return "\n".join(e.format() for e in self.events) + "\n"

    def count(self, kind: str) -> int:
        return sum(1 for e in self.events if e.kind == kind)


@dataclass
class RunResult:
    """Outcome of one run. Exact mode carries the pre-measurement state over
    the logical qubits (axis i = logical qubit i); trajectory mode carries
    the sampled classical outcome."""

    log: ExecutionLog
    pre_measurement_state: GlobalQuantumState | None = None
    outcome: str | None = None
    qubit_map: QubitMap | None = None
    logical_globals: tuple[int, ...] = ()
    # (classical bit, global qubit, readout error) for deferred terminal measures
    measured: tuple[tuple[int, int, float], ...] = ()


@dataclass
class _Stream:
    name: str
    instructions: tuple
    pc: int = 0
    wait_pair: int | None = None

    @property
    def done(self) -> bool:
        return self.pc >= len(self.instructions)

    @property
    def current(self):
        return self.instructions[self.pc]


class _Run:
    def __init__(self, program, net, mode, seed, noise, noisy_single_qubit_gates, run_id):
        self.program = program
        self.net = net
        self.mode = mode
        self.noise = noise
        self.noisy_1q = noisy_single_qubit_gates
        self.rng = np.random.default_rng(seed)
        self.log = ExecutionLog(run_id, seed, mode)

        order = [q.name for q in net.qpus if q.name in program.streams]
        missing = set(program.streams) - set(order)
        if missing:
            raise SimulationError(f"program references QPUs not in the network: {sorted(missing)}")
        self.specs = {name: net.qpu(name) for name in order}
        entries: dict[tuple[str, int], int] = {}
        for name in order:
            for phys in range(self.specs[name].total_qubits):
                entries[(name, phys)] = len(entries)
        self.qmap = QubitMap(entries)
        if mode == "exact":
            self.state = init_state(len(entries))
        else:
            self.state = trajectory.TrajectoryState(len(entries))
        self.streams = [_Stream(name, program.streams[name]) for name in order]

        self.clock = 0.0
        self._seq = 0
        self.pending: list[tuple[float, int, str, tuple]] = []
        self.received: dict[tuple[str, int], int | None] = {}
        self.sent_values: dict[int, int | None] = {}
        self.delivered_pairs: set[int] = set()
        self.busy_links: set[tuple[str, str]] = set()
        self.folded_mids: set[int] = set()
        self.fold_guard: dict[int, int] = {}  # global qubit -> folded message id
        self.measured_globals: set[int] = set()
        self.measured: list[tuple[int, int, float]] = []
        self.outcome_bits = ["0"] * program.num_clbits
        self.route_cache: dict[tuple[str, str], object] = {}
        self.clat_cache: dict[tuple[str, str], float] = {}

    # --- effective noise -------------------------------------------------

    def gate_fidelity(self, qpu: str, num_operands: int) -> float:
        if num_operands == 1 and not self.noisy_1q:
            return 1.0
        return self.noise.gate_fidelity if self.noise else self.specs[qpu].gate_fidelity

    def measurement_error(self, qpu: str) -> float:
        if self.noise is not None and self.noise.measurement_error is not None:
            return self.noise.measurement_error
        return self.specs[qpu].measurement_error

    # --- quantum operations (dispatch on execution mode) --------------------

    def do_gate(self, gate: Gate, fidelity: float):
        if self.mode == "exact":
            apply_gate(self.state, gate, fidelity)
        else:
            trajectory.apply_gate(self.state, gate, fidelity, self.rng)

    def do_measure(self, qubit: int, error: float) -> int:
        return trajectory.measure(self.state, qubit, error, self.rng)

    def do_reset(self, qubit: int):
        if self.mode == "exact":
            reset(self.state, qubit)
        else:
            trajectory.reset(self.state, qubit, self.rng)

    # --- bookkeeping ------------------------------------------------------

    def emit(self, kind: str, qpu: str | None, **payload):
        self.log.events.append(Event(self.clock, kind, qpu, payload))

    def to_global(self, qpu: str, phys: int) -> int:
        try:
            return self.qmap[(qpu, phys)]
        except KeyError:
            raise SimulationError(f"instruction touches unknown qubit {qpu}[{phys}]") from None

    def guard_touch(self, qubits: Sequence[int], allow_mid: int | None = None):
        for g in qubits:
            if g in self.measured_globals:
                raise SimulationError(
                    f"global qubit {g} used after its terminal measurement (exact mode)"
                )
            mid = self.fold_guard.get(g)
            if mid is not None and mid != allow_mid:
                raise SimulationError(
                    f"global qubit {g} touched between a folded measurement (m{mid}) "
                    f"and its pending correction"
                )

    def schedule(self, delay: float, kind: str, payload: tuple):
        heapq.heappush(self.pending, (self.clock + delay, self._seq, kind, payload))
        self._seq += 1

    def route_for(self, req: EprRequest):
        key = (req.qpu, req.remote_qpu)
        if key not in self.route_cache:
            override = self.noise.link_fidelity if self.noise else None
            self.route_cache[key] = resolve_route(self.net, req.qpu, req.remote_qpu, override)
        return self.route_cache[key]

    def classical_delay(self, a: str, b: str) -> float:
        if (a, b) not in self.clat_cache:
            self.clat_cache[(a, b)] = classical_latency(self.net, a, b)
        return self.clat_cache[(a, b)]

    # --- readiness --------------------------------------------------------

    def ready(self, stream: _Stream) -> bool:
        if stream.wait_pair is not None:
            if stream.wait_pair not in self.delivered_pairs:
                return False
            stream.wait_pair = None
        if stream.done:
            return False
        ins = stream.current
        if isinstance(ins, RecvBit):
            return (ins.qpu, ins.message_id) in self.received
        if isinstance(ins, ConditionalGate):
            return ins.condition in self.folded_mids or (ins.qpu, ins.condition) in self.received
        if isinstance(ins, SendBit):
            return ins.message_id in self.sent_values
        if isinstance(ins, EprRequest):
            return ins.link not in self.busy_links
        return True

    def block_reason(self, stream: _Stream) -> str:
        if stream.wait_pair is not None:
            return f"waiting for EPR pair {stream.wait_pair}"
        ins = stream.current
        return f"blocked at {ins.format()!r}"

    # --- instruction execution --------------------------------------------

    def step(self, stream: _Stream):
        ins = stream.current
        stream.pc += 1
        if isinstance(ins, LocalGate):
            self.exec_local(ins)
        elif isinstance(ins, EprRequest):
            route = self.route_for(ins)
            self.busy_links.add(ins.link)
            self.emit(
                EPR_REQUESTED, ins.qpu, pair=ins.pair_id, link=f"{ins.link[0]}-{ins.link[1]}"
            )
            self.schedule(route.total_latency, "epr", (ins, route))
            stream.wait_pair = ins.pair_id
        elif isinstance(ins, MeasureCommQubit):
            self.exec_measure_comm(ins)
        elif isinstance(ins, SendBit):
            value = self.sent_values[ins.message_id]
            payload = {"mid": ins.message_id, "to": ins.to_qpu}
            if value is not None:
                payload["value"] = value
            self.log.events.append(Event(self.clock, CLASSICAL_SENT, ins.qpu, payload))
            self.schedule(self.classical_delay(ins.qpu, ins.to_qpu), "msg", (ins.to_qpu, ins.message_id, value))
        elif isinstance(ins, RecvBit):
            pass  # arrival was already logged; the wait is the whole semantics
        elif isinstance(ins, ConditionalGate):
            self.exec_conditional(ins)
        elif isinstance(ins, ResetComm):
            gq = self.to_global(ins.qpu, ins.comm)
            self.guard_touch([gq])
            self.do_reset(gq)
            self.emit(COMM_RESET, ins.qpu, qubit=gq)
        else:
            raise SimulationError(f"unknown instruction {ins!r}")

    def exec_local(self, ins: LocalGate):
        gate = ins.gate
        gq = tuple(self.to_global(ins.qpu, q) for q in gate.qubits)
        self.guard_touch(gq)
        if gate.kind is GateKind.MEASURE:
            err = self.measurement_error(ins.qpu)
            if self.mode == "exact":
                self.measured_globals.add(gq[0])
                self.measured.append((gate.clbit, gq[0], err))
                self.emit(MEASUREMENT, ins.qpu, qubit=gq[0], clbit=gate.clbit, deferred=1)
            else:
                bit = self.do_measure(gq[0], err)
                self.outcome_bits[gate.clbit] = str(bit)
                self.emit(MEASUREMENT, ins.qpu, qubit=gq[0], clbit=gate.clbit, outcome=bit)
        elif gate.kind is GateKind.RESET:
            self.do_reset(gq[0])
            self.emit(GATE_APPLIED, ins.qpu, gate="reset", qubits=_qlist(gq))
        else:
            fid = self.gate_fidelity(ins.qpu, len(gq))
            self.do_gate(Gate(gate.kind, gq), fid)
            self.emit(GATE_APPLIED, ins.qpu, gate=gate.kind.value, qubits=_qlist(gq))

    def exec_measure_comm(self, ins: MeasureCommQubit):
        gq = self.to_global(ins.qpu, ins.comm)
        self.guard_touch([gq])
        err = self.measurement_error(ins.qpu)
        if self.mode == "trajectory":
            bit = self.do_measure(gq, err)
            self.sent_values[ins.message_id] = bit
            self.emit(MEASUREMENT, ins.qpu, qubit=gq, mid=ins.message_id, outcome=bit)
            return
        # exact mode: fold this measurement together with every conditional
        # correction keyed to its message into one deterministic channel
        conds = [
            c
            for instrs in self.program.streams.values()
            for c in instrs
            if isinstance(c, ConditionalGate) and c.condition == ins.message_id
        ]
        fidelities = {self.gate_fidelity(c.qpu, len(c.gate.qubits)) for c in conds}
        if len(fidelities) > 1:
            raise SimulationError(
                f"corrections for m{ins.message_id} span devices with different gate "
                f"fidelities; cannot fold into one channel"
            )
        correction_gates = []
        for c in conds:
            cq = tuple(self.to_global(c.qpu, q) for q in c.gate.qubits)
            self.guard_touch(cq)
            correction_gates.append(Gate(c.gate.kind, cq))
        apply_measure_channel(
            self.state,
            gq,
            {0: (), 1: tuple(correction_gates)},
            readout_error=err,
            gate_fidelity=fidelities.pop() if fidelities else 1.0,
        )
        for g in correction_gates:
            for q in g.qubits:
                self.fold_guard[q] = ins.message_id
        self.folded_mids.add(ins.message_id)
        self.sent_values[ins.message_id] = None
        self.emit(MEASUREMENT, ins.qpu, qubit=gq, mid=ins.message_id, deferred=1)

    def exec_conditional(self, ins: ConditionalGate):
        gq = tuple(self.to_global(ins.qpu, q) for q in ins.gate.qubits)
        if ins.condition in self.folded_mids:
            # correction already applied by the folded measurement channel
            self.guard_touch(gq, allow_mid=ins.condition)
            for q in gq:
                if self.fold_guard.get(q) == ins.condition:
                    del self.fold_guard[q]
            return
        self.guard_touch(gq)
        value = self.received[(ins.qpu, ins.condition)]
        if value:
            fid = self.gate_fidelity(ins.qpu, len(gq))
            self.do_gate(Gate(ins.gate.kind, gq), fid)
            self.emit(
                GATE_APPLIED,
                ins.qpu,
                gate=ins.gate.kind.value,
                qubits=_qlist(gq),
                cond=ins.condition,
                value=value,
            )

    # --- timed events -----------------------------------------------------

    def fire(self, time: float, kind: str, payload: tuple):
        self.clock = time
        if kind == "msg":
            to_qpu, mid, value = payload
            self.received[(to_qpu, mid)] = value
            fields = {"mid": mid}
            if value is not None:
                fields["value"] = value
            self.log.events.append(Event(self.clock, CLASSICAL_RECEIVED, to_qpu, fields))
        elif kind == "epr":
            req, route = payload
            ga = self.to_global(req.qpu, req.local_comm)
            gb = self.to_global(req.remote_qpu, req.remote_comm)
            try:
                if self.mode == "exact":
                    deliver_epr(self.net, route, self.state, ga, gb)
                else:
                    trajectory.inject_epr(self.state, ga, gb, route.effective_fidelity, self.rng)
            except ValueError as exc:
                raise SimulationError(f"EPR delivery for pair {req.pair_id} failed: {exc}") from exc
            self.delivered_pairs.add(req.pair_id)
            self.busy_links.discard(req.link)
            self.emit(
                EPR_DELIVERED,
                req.qpu,
                pair=req.pair_id,
                qubits=_qlist((ga, gb)),
                fidelity=route.effective_fidelity,
            )
        else:
            raise SimulationError(f"unknown pending event {kind!r}")

    # --- main loop ----------------------------------------------------------

    def blocked_on_pair(self, stream: _Stream) -> bool:
        return stream.wait_pair is not None and stream.wait_pair not in self.delivered_pairs

    def run(self, scheduling: str) -> None:
        self.emit(RUN_START, None, seed=self.log.seed, mode=self.mode)
        while True:
            if all(s.done and not self.blocked_on_pair(s) for s in self.streams):
                break
            progressed = False
            for stream in self.streams:
                if scheduling == "round_robin":
                    if self.ready(stream):
                        self.step(stream)
                        progressed = True
                else:
                    while self.ready(stream):
                        self.step(stream)
                        progressed = True
            if progressed:
                continue
            if self.pending:
                time, _, kind, payload = heapq.heappop(self.pending)
                self.fire(time, kind, payload)
                continue
            blocked = [
                f"{s.name}: {self.block_reason(s)}"
                for s in self.streams
                if not s.done or self.blocked_on_pair(s)
            ]
            raise DeadlockError("no runnable instruction; " + "; ".join(blocked))
        # drain remaining deliveries so every request has its delivery event
        while self.pending:
            time, _, kind, payload = heapq.heappop(self.pending)
            self.fire(time, kind, payload)
        self.emit(RUN_END, None)


def _qlist(qubits) -> str:
    return ",".join(str(q) for q in qubits)


def execute(
    program: DistributedProgram,
    net: NetworkModel,
    mode: str = "exact",
    seed: int = 0,
    *,
    noise: NoiseSpec | None = None,
    scheduling: str = "round_robin",
    noisy_single_qubit_gates: bool = True,
    run_id: str | None = None,
) -> RunResult:
    """Run one compiled program to completion and return its result."""
    if mode not in MODES:
        raise SimulationError(f"mode must be one of {MODES}, got {mode!r}")
    if scheduling not in POLICIES:
        raise SimulationError(f"scheduling must be one of {POLICIES}, got {scheduling!r}")
    run = _Run(program, net, mode, seed, noise, noisy_single_qubit_gates, run_id or f"run-{seed}")
    run.run(scheduling)

    placement = program.placement
    logical_globals = tuple(
        run.qmap[(placement.qpu_of(q), placement.phys_of(q))] for q in range(program.num_logical)
    )
    result = RunResult(
        log=run.log,
        qubit_map=run.qmap,
        logical_globals=logical_globals,
        measured=tuple(sorted(run.measured)),
    )
    if mode == "exact":
        run.log.final_state = run.state
        result.pre_measurement_state = reduced_state(run.state, logical_globals)
    else:
        run.log.final_outcome = "".join(run.outcome_bits)
        result.outcome = run.log.final_outcome
    return result


def reduced_state(state: GlobalQuantumState, qubit_order: Sequence[int]) -> GlobalQuantumState:
    """Reduced state over the given global qubits, with output axis i holding
    input qubit qubit_order[i]."""
    keep_sorted = sorted(qubit_order)
    rho = partial_trace(state.rho, keep_sorted)
    order = [keep_sorted.index(q) for q in qubit_order]
    if order != list(range(len(order))):
        rho = permute_qubits(rho, order)
    return GlobalQuantumState(len(qubit_order), rho)


def run_rounds(
    program: DistributedProgram,
    net: NetworkModel,
    rounds: int,
    base_seed: int,
    *,
    noise: NoiseSpec | None = None,
    noisy_single_qubit_gates: bool = True,
) -> list[ExecutionLog]:
    """Independent trajectory runs with seeds base_seed, base_seed+1, ..."""
    if rounds < 1:
        raise SimulationError(f"rounds must be >= 1, got {rounds}")
    logs = []
    for i in range(rounds):
        result = execute(
            program,
            net,
            mode="trajectory",
            seed=base_seed + i,
            noise=noise,
            noisy_single_qubit_gates=noisy_single_qubit_gates,
            run_id=f"round-{base_seed + i}",
        )
        logs.append(result.log)
    return logs
