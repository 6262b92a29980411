"""Gate-level circuit IR shared by every module of the engine.

Conventions fixed here and relied on everywhere else:

* Qubits are indexed 0..n-1.  Within any register the *first* listed qubit
  is the most significant bit, so a register's content read in listing
  order is an ordinary binary number.
* A circuit is an ordered gate list; composition is concatenation.
* Circuits are treated as immutable values once built.  ``add`` returns
  ``self`` purely for chaining while a builder constructs the object.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .gates import Gate, gate


@dataclass
class ResourceBox:
    """Opaque stand-in for a sub-circuit: counts only, no gates.

    ``gate_counts`` maps gate kind to count (rebased kinds for NISQ use).
    Depth fields default to the corresponding counts (fully sequential).
    """

    n_qubits: int = 0
    gate_counts: dict = field(default_factory=dict)
    placement: int = 0  # gate position in the host circuit
    total_depth: int | None = None
    cnot_depth: int | None = None
    tk1_depth: int | None = None
    t_count: int | None = None
    t_depth: int | None = None

    def __post_init__(self):
        if any(v < 0 for v in self.gate_counts.values()):
            raise ValueError("negative count in resource box")

    @property
    def total_gates(self) -> int:
        return sum(self.gate_counts.values())


class QuantumCircuit:
    """Ordered gate list over ``n_qubits`` named qubits."""

    def __init__(self, n_qubits: int, name: str = ""):
        if n_qubits < 0:
            raise ValueError("n_qubits must be >= 0")
        self.n_qubits = n_qubits
        self.name = name
        self.gates: list[Gate] = []
        self.boxes: list[ResourceBox] = []

    def add(self, g: Gate) -> "QuantumCircuit":
        if any(q >= self.n_qubits or q < 0 for q in g.qubits):
            raise ValueError(
                f"gate {g.kind} on {g.qubits} out of range for {self.n_qubits} qubits"
            )
        self.gates.append(g)
        return self

    def append(self, kind: str, qubits, *params) -> "QuantumCircuit":
        return self.add(gate(kind, qubits, *params))

    def extend(self, gates) -> "QuantumCircuit":
        for g in gates:
            self.add(g)
        return self

    def compose(self, other: "QuantumCircuit", offset: int = 0) -> "QuantumCircuit":
        """New circuit: self then other, other's qubits shifted by ``offset``."""
        n = max(self.n_qubits, offset + other.n_qubits)
        out = QuantumCircuit(n, self.name)
        out.gates = list(self.gates)
        out.boxes = list(self.boxes)
        for g in other.gates:
            out.add(Gate(g.kind, g.params, tuple(q + offset for q in g.qubits)))
        for b in other.boxes:
            nb = ResourceBox(**{**b.__dict__})
            nb.placement = len(self.gates) + b.placement
            out.boxes.append(nb)
        return out

    def widened(self, n_qubits: int) -> "QuantumCircuit":
        """Same gates on a wider register."""
        if n_qubits < self.n_qubits:
            raise ValueError("cannot shrink a circuit")
        out = QuantumCircuit(n_qubits, self.name)
        out.gates = list(self.gates)
        out.boxes = list(self.boxes)
        return out

    def copy(self) -> "QuantumCircuit":
        out = QuantumCircuit(self.n_qubits, self.name)
        out.gates = list(self.gates)
        out.boxes = list(self.boxes)
        return out

    def inverse(self) -> "QuantumCircuit":
        if self.boxes:
            raise ValueError("cannot invert a circuit containing resource boxes")
        out = QuantumCircuit(self.n_qubits, self.name)
        for g in reversed(self.gates):
            out.extend(g.inverse_gates())
        return out

    def n_gates(self) -> int:
        return len(self.gates) + sum(b.total_gates for b in self.boxes)

    def key(self):
        """Hashable identity used for memoising exact simulations."""
        return (
            self.n_qubits,
            tuple((g.kind, g.params, g.qubits) for g in self.gates),
            len(self.boxes),
        )

    def __repr__(self):
        return f"QuantumCircuit(n_qubits={self.n_qubits}, gates={len(self.gates)}, name={self.name!r})"

    # JSON wire format: {"n_qubits": int, "gates": [{kind, params, qubits}...]}
    def to_dict(self) -> dict:
        d = {
            "n_qubits": self.n_qubits,
            "gates": [
                {"kind": g.kind, "params": list(g.params), "qubits": list(g.qubits)}
                for g in self.gates
            ],
        }
        if self.name:
            d["name"] = self.name
        if self.boxes:
            d["boxes"] = [
                {
                    "n_qubits": b.n_qubits,
                    "gate_counts": b.gate_counts,
                    "placement": b.placement,
                }
                for b in self.boxes
            ]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "QuantumCircuit":
        qc = cls(int(d["n_qubits"]), d.get("name", ""))
        for g in d["gates"]:
            qc.append(g["kind"], g["qubits"], *g.get("params", []))
        for b in d.get("boxes", []):
            qc.boxes.append(
                ResourceBox(
                    n_qubits=b.get("n_qubits", 0),
                    gate_counts=dict(b.get("gate_counts", {})),
                    placement=b.get("placement", 0),
                )
            )
        return qc

    @classmethod
    def from_json(cls, s: str) -> "QuantumCircuit":
        return cls.from_dict(json.loads(s))


def controlled_x(controls, target) -> Gate:
    """X / CNOT / Toffoli / MultiControlledX depending on the control count."""
    controls = tuple(controls)
    if len(controls) == 0:
        return gate("X", target)
    if len(controls) == 1:
        return gate("CNOT", (*controls, target))
    if len(controls) == 2:
        return gate("Toffoli", (*controls, target))
    return gate("MultiControlledX", (*controls, target))
