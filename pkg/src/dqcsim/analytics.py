"""Performance indicators: output distributions, Hellinger and quantum
fidelity, and reduced density operators.

All functions here are pure and operate on plain numpy arrays / dicts, so
they can be evaluated concurrently across runs and sweep grid points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

PSD_CLAMP = 1e-10  # eigenvalues above -PSD_CLAMP are clamped to 0
_PSD_TOL = 1e-7


class AnalyticsError(ValueError):
    pass


def _check_pmf(p: Mapping[str, float]) -> None:
    if not p:
        raise AnalyticsError("empty distribution")
    if any(v < -1e-12 for v in p.values()):
        raise AnalyticsError("negative probability in distribution")
    total = math.fsum(p.values())
    if abs(total - 1.0) > 1e-9:
        raise AnalyticsError(f"probabilities sum to {total}, expected 1")


def estimate_pmf(outcomes: Sequence[str]) -> dict[str, float]:
    """Empirical probability mass function of a list of outcome bitstrings."""
    if not outcomes:
        raise AnalyticsError("cannot estimate a distribution from zero outcomes")
    counts: dict[str, int] = {}
    for bits in outcomes:
        counts[bits] = counts.get(bits, 0) + 1
    n = len(outcomes)
    return {bits: c / n for bits, c in sorted(counts.items())}


def hellinger_fidelity(p: Mapping[str, float], q: Mapping[str, float]) -> float:
    """Squared Bhattacharyya coefficient (sum_x sqrt(p(x) q(x)))^2.

    1 iff the distributions are identical, 0 for disjoint supports. Missing
    keys count as probability 0. Computed as the expanded quadratic form so
    that perfect-overlap terms stay exact (p*q carries no sqrt round-trip).
    """
    _check_pmf(p)
    _check_pmf(q)
    keys = sorted(set(p) | set(q))
    g = [max(p.get(k, 0.0), 0.0) * max(q.get(k, 0.0), 0.0) for k in keys]
    terms = [gi for gi in g]
    for i in range(len(g)):
        for j in range(i + 1, len(g)):
            terms.append(2.0 * math.sqrt(g[i] * g[j]))
    return min(1.0, math.fsum(terms))


def _check_density(rho: np.ndarray, name: str = "rho") -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise AnalyticsError(f"{name} is not a square matrix")
    if rho.shape[0] & (rho.shape[0] - 1):
        raise AnalyticsError(f"{name} dimension {rho.shape[0]} is not a power of two")
    return rho


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(m)
    if vals.min() < -_PSD_TOL:
        raise AnalyticsError(f"matrix is not positive semidefinite (min eigenvalue {vals.min():.3g})")
    vals = np.where(vals < PSD_CLAMP, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def quantum_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 of two states."""
    rho = _check_density(rho)
    sigma = _check_density(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise AnalyticsError(f"dimension mismatch: {rho.shape[0]} vs {sigma.shape[0]}")
    root = _psd_sqrt(rho)
    inner = root @ sigma @ root
    vals = np.linalg.eigvalsh(inner)
    vals = np.where(vals < PSD_CLAMP, 0.0, vals)
    f = float(np.sum(np.sqrt(vals)) ** 2)
    return min(1.0, f)


def fidelity_to_pure(rho: np.ndarray, psi: np.ndarray) -> float:
    """Fast path <psi|rho|psi> for a pure comparison state given as a vector."""
    rho = _check_density(rho)
    psi = np.asarray(psi, dtype=complex).ravel()
    if psi.shape[0] != rho.shape[0]:
        raise AnalyticsError("state vector dimension does not match rho")
    return float(np.real(psi.conj() @ rho @ psi))


def partial_trace(rho: np.ndarray, keep: Iterable[int]) -> np.ndarray:
    """Reduced density operator over `keep`, in ascending qubit-index order."""
    rho = _check_density(rho)
    n = rho.shape[0].bit_length() - 1
    keep_sorted = sorted(set(keep))
    if not keep_sorted:
        raise AnalyticsError("keep set must be non-empty")
    if keep_sorted[0] < 0 or keep_sorted[-1] >= n:
        raise AnalyticsError(f"keep set {keep_sorted} out of range for {n} qubits")
    t = rho.reshape((2,) * (2 * n))
    removed = 0
    for q in reversed(range(n)):
        if q in keep_sorted:
            continue
        # trace out qubit q: contract row axis q with column axis (n-removed)+q
        t = np.trace(t, axis1=q, axis2=(n - removed) + q)
        removed += 1
    k = len(keep_sorted)
    return t.reshape(2**k, 2**k)


def permute_qubits(rho: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Reorder qubit axes so that output qubit i is input qubit order[i]."""
    rho = _check_density(rho)
    n = rho.shape[0].bit_length() - 1
    if sorted(order) != list(range(n)):
        raise AnalyticsError(f"order {order} is not a permutation of 0..{n - 1}")
    perm = list(order) + [n + q for q in order]
    t = rho.reshape((2,) * (2 * n)).transpose(perm)
    return np.ascontiguousarray(t.reshape(2**n, 2**n))


def exact_pmf(rho: np.ndarray, measurement_error: float | Sequence[float] = 0.0) -> dict[str, float]:
    """Computational-basis distribution of rho, with independent per-bit
    readout flips of the given probability folded in.

    Bitstring index 0 is qubit 0 (the most significant basis-label bit).
    """
    rho = _check_density(rho)
    n = rho.shape[0].bit_length() - 1
    probs = np.real(np.diagonal(rho)).copy()
    probs[probs < 0.0] = 0.0
    errors = [measurement_error] * n if np.isscalar(measurement_error) else list(measurement_error)
    if len(errors) != n:
        raise AnalyticsError(f"need one readout error per qubit, got {len(errors)} for {n}")
    shaped = probs.reshape((2,) * n)
    for q, e in enumerate(errors):
        if not 0.0 <= e < 1.0:
            raise AnalyticsError(f"readout error {e} outside [0, 1)")
        if e:
            shaped = (1.0 - e) * shaped + e * np.flip(shaped, axis=q)
    flat = shaped.reshape(-1)
    return {format(i, f"0{n}b"): float(flat[i]) for i in range(2**n)}


CSV_HEADER = "gate_fidelity,link_fidelity,rounds,hellinger,quantum,quantum_qpu0,quantum_qpu1"


@dataclass(frozen=True)
class FidelityReport:
    """One sweep grid point: both fidelity metrics plus per-QPU reductions."""

    gate_fidelity: float
    link_fidelity: float
    rounds: int
    hellinger: float
    quantum: float | None = None
    quantum_qpu0: float | None = None
    quantum_qpu1: float | None = None

    def to_csv_row(self) -> str:
        def fmt(x: float | None) -> str:
            return "" if x is None else f"{x:.9g}"

        return ",".join(
            [
                f"{self.gate_fidelity:.9g}",
                f"{self.link_fidelity:.9g}",
                str(self.rounds),
                fmt(self.hellinger),
                fmt(self.quantum),
                fmt(self.quantum_qpu0),
                fmt(self.quantum_qpu1),
            ]
        )


def parse_csv_rows(text: str) -> list[FidelityReport]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise AnalyticsError("missing or unexpected results header")
    if len(lines) == 1:
        raise AnalyticsError("results file has no data rows")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 7:
            raise AnalyticsError(f"malformed results row: {ln!r}")
        opt = lambda s: None if s == "" else float(s)
        rows.append(
            FidelityReport(
                gate_fidelity=float(parts[0]),
                link_fidelity=float(parts[1]),
                rounds=int(parts[2]),
                hellinger=float(parts[3]),
                quantum=opt(parts[4]),
                quantum_qpu0=opt(parts[5]),
                quantum_qpu1=opt(parts[6]),
            )
        )
    return rows
