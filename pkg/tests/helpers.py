"""Independent oracles used by the tests.

Everything here is implemented from first principles with plain index
arithmetic and explicit matrix constructions, deliberately sharing no code
with the package's optimized kernels.
"""
import itertools
import math

import numpy as np

from dqcsim.circuit import GateKind

# --- reference statevector simulator (basis-index loops) ----------------------


def sv_simulate(num_qubits, gates):
    """Statevector after applying (kind, qubits) pairs to |0...0>.

    Qubit 0 is the most significant bit of the basis index.
    """
    dim = 1 << num_qubits
    amps = [0j] * dim
    amps[0] = 1 + 0j
    inv_sqrt2 = 1 / math.sqrt(2)
    for kind, qubits in gates:
        bit = [1 << (num_qubits - 1 - q) for q in qubits]
        new = list(amps)
        if kind is GateKind.H:
            for i in range(dim):
                if not i & bit[0]:
                    a, b = amps[i], amps[i | bit[0]]
                    new[i] = inv_sqrt2 * (a + b)
                    new[i | bit[0]] = inv_sqrt2 * (a - b)
        elif kind is GateKind.X:
            for i in range(dim):
                new[i] = amps[i ^ bit[0]]
        elif kind is GateKind.Z:
            for i in range(dim):
                new[i] = -amps[i] if i & bit[0] else amps[i]
        elif kind is GateKind.CZ:
            for i in range(dim):
                new[i] = -amps[i] if (i & bit[0]) and (i & bit[1]) else amps[i]
        elif kind is GateKind.CNOT:
            for i in range(dim):
                new[i] = amps[i ^ bit[1]] if i & bit[0] else amps[i]
        else:
            raise ValueError(f"oracle cannot apply {kind}")
        amps = new
    return np.array(amps, dtype=complex)


def sv_from_circuit(circuit):
    """Statevector of a circuit's unitary part (measurements skipped)."""
    gates = [(g.kind, g.qubits) for g in circuit.gates if g.kind.is_unitary]
    return sv_simulate(circuit.num_qubits, gates)


# --- brute-force minimum cut (2 devices) ---------------------------------------


def brute_force_min_cut(graph, cap0, cap1):
    """Optimal bipartition cut weight by enumerating device-0 subsets."""
    n = graph.num_qubits
    best = None
    for size in range(n + 1):
        if size > cap0 or n - size > cap1:
            continue
        for side0 in itertools.combinations(range(n), size):
            chosen = set(side0)
            cut = sum(
                w for (a, b), w in graph.weights.items() if (a in chosen) != (b in chosen)
            )
            if best is None or cut < best:
                best = cut
    return best


# --- explicit partial trace -----------------------------------------------------


def direct_partial_trace(rho, keep, num_qubits):
    """Reduced density matrix via an explicit double sum over basis labels."""
    keep = sorted(keep)
    drop = [q for q in range(num_qubits) if q not in keep]
    k = len(keep)
    out = np.zeros((1 << k, 1 << k), dtype=complex)

    def bits_of(index):
        return [(index >> (num_qubits - 1 - q)) & 1 for q in range(num_qubits)]

    for i in range(1 << num_qubits):
        for j in range(1 << num_qubits):
            bi, bj = bits_of(i), bits_of(j)
            if any(bi[q] != bj[q] for q in drop):
                continue
            r = sum(bi[q] << (k - 1 - pos) for pos, q in enumerate(keep))
            c = sum(bj[q] << (k - 1 - pos) for pos, q in enumerate(keep))
            out[r, c] += rho[i, j]
    return out


# --- Werner states and entanglement swapping ------------------------------------


_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def bell_vector(which):
    """|Phi+>, |Phi->, |Psi+>, |Psi-> as 4-vectors (first qubit = MSB)."""
    s = 1 / math.sqrt(2)
    return {
        "phi+": np.array([s, 0, 0, s]),
        "phi-": np.array([s, 0, 0, -s]),
        "psi+": np.array([0, s, s, 0]),
        "psi-": np.array([0, s, -s, 0]),
    }[which].astype(complex)


def werner_matrix(fidelity):
    """F |Phi+><Phi+| + (1-F)/3 (other three Bell projectors)."""
    out = np.zeros((4, 4), dtype=complex)
    for name in ("phi+", "phi-", "psi+", "psi-"):
        v = bell_vector(name)
        weight = fidelity if name == "phi+" else (1.0 - fidelity) / 3.0
        out += weight * np.outer(v, v.conj())
    return out


def swap_oracle(f1, f2):
    """Fidelity to |Phi+> of the pair left on (A, B) after an ideal Bell
    measurement on the middle qubits of two Werner pairs (A,e1), (e2,B),
    with the matching Pauli correction applied to B per outcome."""
    rho = np.kron(werner_matrix(f1), werner_matrix(f2))  # qubit order A,e1,e2,B
    corrections = {"phi+": "I", "phi-": "Z", "psi+": "X", "psi-": "ZX"}
    out = np.zeros((4, 4), dtype=complex)
    for name, pauli in corrections.items():
        v = bell_vector(name)
        proj_mid = np.kron(np.kron(_PAULI["I"], np.outer(v, v.conj())), _PAULI["I"])
        branch = proj_mid @ rho @ proj_mid.conj().T
        correction = _PAULI["I"]
        for p in pauli:
            correction = _PAULI[p] @ correction
        c_full = np.kron(np.eye(8, dtype=complex), correction)
        branch = c_full @ branch @ c_full.conj().T
        out += direct_partial_trace(branch, [0, 3], 4)
    target = bell_vector("phi+")
    return float(np.real(target.conj() @ out @ target))
