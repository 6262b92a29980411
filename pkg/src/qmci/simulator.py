"""Exact dense state-vector simulation.

The basis-state index convention follows the register convention of the
IR: qubit 0 is the most significant bit of the global index, so
``state.reshape([2] * n)`` puts qubit q on axis q directly.

All operations are deterministic; measurement never happens in-simulation.
Sampling is a separate classical draw from an exactly computed marginal.
"""
from __future__ import annotations

import numpy as np

from .circuit import QuantumCircuit
from .gates import Gate, single_qubit_matrix

MAX_SIM_QUBITS = 30  # guard against accidental huge allocations


def zero_state(n_qubits: int) -> np.ndarray:
    state = np.zeros(2**n_qubits, dtype=complex)
    state[0] = 1.0
    return state


def _apply_1q(state: np.ndarray, m: np.ndarray, q: int, n: int) -> None:
    view = state.reshape([2] * n)
    idx0 = [slice(None)] * n
    idx1 = [slice(None)] * n
    idx0[q], idx1[q] = 0, 1
    a = view[tuple(idx0)].copy()
    b = view[tuple(idx1)].copy()
    view[tuple(idx0)] = m[0, 0] * a + m[0, 1] * b
    view[tuple(idx1)] = m[1, 0] * a + m[1, 1] * b


def _apply_controlled_1q(state, m, controls, target, n) -> None:
    view = state.reshape([2] * n)
    idx0 = [slice(None)] * n
    for c in controls:
        idx0[c] = 1
    idx1 = list(idx0)
    idx0[target], idx1[target] = 0, 1
    a = view[tuple(idx0)].copy()
    b = view[tuple(idx1)].copy()
    view[tuple(idx0)] = m[0, 0] * a + m[0, 1] * b
    view[tuple(idx1)] = m[1, 0] * a + m[1, 1] * b


def _apply_controlled_x(state, controls, target, n) -> None:
    view = state.reshape([2] * n)
    idx0 = [slice(None)] * n
    for c in controls:
        idx0[c] = 1
    idx1 = list(idx0)
    idx0[target], idx1[target] = 0, 1
    tmp = view[tuple(idx0)].copy()
    view[tuple(idx0)] = view[tuple(idx1)]
    view[tuple(idx1)] = tmp


def apply_gate(state: np.ndarray, g: Gate, n: int) -> None:
    k = g.kind
    if k in ("CNOT", "Toffoli", "MultiControlledX"):
        _apply_controlled_x(state, g.controls, g.target, n)
    elif k in ("CRy", "CRx", "CRz"):
        _apply_controlled_1q(state, single_qubit_matrix(g), g.controls, g.target, n)
    else:
        _apply_1q(state, single_qubit_matrix(g), g.qubits[0], n)


def simulate(circuit: QuantumCircuit, initial: np.ndarray | None = None) -> np.ndarray:
    """Exact final amplitudes of ``circuit`` applied to ``initial`` (default all-zero).

    Raises on dimension mismatch, on circuits containing resource boxes,
    and if the norm ever drifts beyond 1e-12 (it cannot for unitary gates
    at these sizes; the check enforces the exactness contract).
    """
    if circuit.boxes:
        raise ValueError("cannot simulate a circuit containing resource boxes")
    n = circuit.n_qubits
    if n > MAX_SIM_QUBITS:
        raise ValueError(f"{n} qubits exceeds simulator limit {MAX_SIM_QUBITS}")
    if initial is None:
        state = zero_state(n)
    else:
        initial = np.asarray(initial, dtype=complex)
        if initial.shape != (2**n,):
            raise ValueError(
                f"initial state has dimension {initial.shape}, circuit needs {2**n}"
            )
        state = initial.copy()
    for g in circuit.gates:
        apply_gate(state, g, n)
        norm2 = float(np.vdot(state, state).real)
        if abs(norm2 - 1.0) > 1e-12:
            raise AssertionError(f"state norm drifted: |psi|^2 = {norm2}")
    return state


def marginal_pmf(state: np.ndarray, qubits) -> np.ndarray:
    """Probability vector of reading the listed qubits, MSB-first.

    Entry j is the total probability of observing bit pattern j on the
    listed qubits (first listed = most significant), marginalising over
    every other qubit implicitly.
    """
    qubits = list(qubits)
    dim = state.shape[0]
    n = dim.bit_length() - 1
    if 2**n != dim:
        raise ValueError("state length is not a power of two")
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"duplicate qubit index in {qubits}")
    if any(q < 0 or q >= n for q in qubits):
        raise ValueError(f"qubit index out of range in {qubits}")
    probs = np.abs(state) ** 2
    view = probs.reshape([2] * n)
    keep = set(qubits)
    other = tuple(q for q in range(n) if q not in keep)
    if other:
        view = view.sum(axis=other)
    # remaining axes are the kept qubits in increasing index order;
    # transpose so qubits[0] becomes the most significant output bit
    sorted_pos = {q: i for i, q in enumerate(sorted(qubits))}
    perm = [sorted_pos[q] for q in qubits]
    pmf = view.transpose(perm).reshape(-1)
    s = float(pmf.sum())
    assert abs(s - 1.0) < 1e-12, f"marginal pmf sums to {s}"
    return pmf


def sample(state: np.ndarray, qubits, n: int, seed: int) -> np.ndarray:
    """n i.i.d. outcome draws (integers, MSB-first decode) from the marginal."""
    if n < 1:
        raise ValueError("need n >= 1 samples")
    pmf = marginal_pmf(state, qubits)
    rng = np.random.default_rng(seed)
    # guard the tiny negative/rounding drift for rng.choice
    p = np.clip(pmf, 0.0, None)
    p = p / p.sum()
    return rng.choice(len(pmf), size=n, p=p)


def states_equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-10) -> bool:
    if a.shape != b.shape:
        return False
    return bool(abs(abs(np.vdot(a, b)) - 1.0) <= tol)


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(np.vdot(a, b)) ** 2)
