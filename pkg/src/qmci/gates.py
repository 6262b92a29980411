"""Gate alphabet of the engine.

Every circuit in the engine is a list of gates drawn from a fixed alphabet:
Cliffords and T, Toffoli / multi-controlled X, single-qubit rotations and
their singly-controlled versions, and the generic single-qubit TK1 gate
``Rz(a) Rx(b) Rz(c)``.  Qubit operands are listed controls first, target
last.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import cos, sin, pi

import numpy as np

# kind -> number of angle parameters
GATE_PARAM_COUNTS = {
    "X": 0,
    "H": 0,
    "S": 0,
    "T": 0,
    "Tdg": 0,
    "CNOT": 0,
    "Toffoli": 0,
    "MultiControlledX": 0,
    "Ry": 1,
    "Rx": 1,
    "Rz": 1,
    "CRy": 1,
    "CRx": 1,
    "CRz": 1,
    "TK1": 3,
}

# kind -> total number of qubit operands (None = variable, >= 4)
GATE_QUBIT_COUNTS = {
    "X": 1,
    "H": 1,
    "S": 1,
    "T": 1,
    "Tdg": 1,
    "Ry": 1,
    "Rx": 1,
    "Rz": 1,
    "TK1": 1,
    "CNOT": 2,
    "CRy": 2,
    "CRx": 2,
    "CRz": 2,
    "Toffoli": 3,
    "MultiControlledX": None,
}

@dataclass(frozen=True)
class Gate:
    """One gate application: kind, angle parameters, qubit operands.

    ``qubits`` lists controls first and the target last.  Parameters are
    angles in radians; their number is fixed by the kind (0 for the
    discrete gates, 1 for rotations, 3 for TK1).
    """

    kind: str
    params: tuple[float, ...]
    qubits: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in GATE_PARAM_COUNTS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.params) != GATE_PARAM_COUNTS[self.kind]:
            raise ValueError(
                f"{self.kind} takes {GATE_PARAM_COUNTS[self.kind]} params, "
                f"got {len(self.params)}"
            )
        expected = GATE_QUBIT_COUNTS[self.kind]
        if expected is None:
            if len(self.qubits) < 4:
                raise ValueError(
                    "MultiControlledX needs >= 3 controls; use CNOT/Toffoli below that"
                )
        elif len(self.qubits) != expected:
            raise ValueError(
                f"{self.kind} acts on {expected} qubits, got {len(self.qubits)}"
            )
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"duplicate qubit operand in {self.kind}: {self.qubits}")

    @property
    def controls(self) -> tuple[int, ...]:
        return self.qubits[:-1]

    @property
    def target(self) -> int:
        return self.qubits[-1]

    def inverse_gates(self) -> list["Gate"]:
        """Gate sequence implementing the inverse, within the same alphabet."""
        k = self.kind
        if k in ("X", "H", "CNOT", "Toffoli", "MultiControlledX"):
            return [self]
        if k == "S":
            # S^dagger = Tdg Tdg
            return [Gate("Tdg", (), self.qubits), Gate("Tdg", (), self.qubits)]
        if k == "T":
            return [Gate("Tdg", (), self.qubits)]
        if k == "Tdg":
            return [Gate("T", (), self.qubits)]
        if k in ("Ry", "Rx", "Rz", "CRy", "CRx", "CRz"):
            return [Gate(k, (-self.params[0],), self.qubits)]
        if k == "TK1":
            a, b, c = self.params
            return [Gate("TK1", (-c, -b, -a), self.qubits)]
        raise ValueError(f"no inverse for {k}")


def gate(kind: str, qubits, *params) -> Gate:
    """Convenience constructor: ``gate("Ry", 0, theta)``."""
    if isinstance(qubits, int):
        qubits = (qubits,)
    return Gate(kind, tuple(float(p) for p in params), tuple(qubits))


_SQ2 = 1.0 / np.sqrt(2.0)
_FIXED_1Q = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * pi / 4)]], dtype=complex),
    "Tdg": np.array([[1, 0], [0, np.exp(-1j * pi / 4)]], dtype=complex),
}


def rx_matrix(theta: float) -> np.ndarray:
    c, s = cos(theta / 2), sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = cos(theta / 2), sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.array(
        [[np.exp(-1j * theta / 2), 0], [0, np.exp(1j * theta / 2)]], dtype=complex
    )


def tk1_matrix(a: float, b: float, c: float) -> np.ndarray:
    return rz_matrix(a) @ rx_matrix(b) @ rz_matrix(c)


def single_qubit_matrix(g: Gate) -> np.ndarray:
    """2x2 unitary of a single-qubit gate, or of the target action of a
    controlled rotation."""
    k = g.kind
    if k in _FIXED_1Q:
        return _FIXED_1Q[k]
    if k == "Rx" or k == "CRx":
        return rx_matrix(g.params[0])
    if k == "Ry" or k == "CRy":
        return ry_matrix(g.params[0])
    if k == "Rz" or k == "CRz":
        return rz_matrix(g.params[0])
    if k == "TK1":
        return tk1_matrix(*g.params)
    raise ValueError(f"{k} is not a single-qubit action")


def zxz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """Euler angles (a, b, c) with ``Rz(a) Rx(b) Rz(c) ~ u`` up to global phase.

    Works for any 2x2 unitary; used by the TK1 rebase pass.
    """
    det = np.linalg.det(u)
    su = u / np.sqrt(det)  # special unitary up to sign
    # su = Rz(a) Rx(b) Rz(c):
    #  su[0,0] = cos(b/2) e^{-i(a+c)/2},  su[0,1] = -i sin(b/2) e^{-i(a-c)/2}
    cos_b2 = abs(su[0, 0])
    sin_b2 = abs(su[0, 1])
    b = 2.0 * np.arctan2(sin_b2, cos_b2)
    if cos_b2 >= sin_b2:
        phase_sum = -2.0 * np.angle(su[0, 0])  # a + c
    else:
        phase_sum = 0.0
    if sin_b2 > 1e-14:
        phase_diff = -2.0 * np.angle(su[0, 1] / (-1j))  # a - c
    else:
        phase_diff = 0.0
    if cos_b2 < sin_b2 and cos_b2 > 1e-14:
        phase_sum = -2.0 * np.angle(su[0, 0])
    a = (phase_sum + phase_diff) / 2.0
    c = (phase_sum - phase_diff) / 2.0
    return float(a), float(b), float(c)
