"""Payoff construction: reversible arithmetic and indicator logic over
distribution circuits, plus Brownian-motion and instrument builders.

All arithmetic works on the integer codes behind each dimension register
(value = x_l + code * delta) and appends new registers out-of-place, so
the original dimensions are untouched.  Grid compatibility rules:

* Sum / Product / Max / Min require every delta to be an integer power of
  two, which guarantees closure (the result grid spacing is again a power
  of two).  Operand grids align by left-shifting to the finer spacing.
* Max / Min additionally need the two offsets to sit on a common grid.
* Compare and thresholds work on decoded real values (offsets included).
* Threshold constants snap to the nearest grid point, ties toward +inf;
  the snapped value is recorded on the returned indicator.

Scratch carries and comparison registers are drawn from a reusable
ancilla pool, uncomputed inside each operation; the arithmetic blocks use
only X / CNOT / Toffoli / MultiControlledX gates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import QuantumCircuit
from .distributions import Dimension, DistributionCircuit
from .gates import Gate, gate

# a "bit" in the generic adder: ("q", index), ("nq", index) for a negated
# qubit, or ("c", 0 | 1) for a constant
Bit = tuple


def _is_power_of_two(x: float) -> bool:
    if x <= 0:
        return False
    m, _ = math.frexp(x)
    return m == 0.5


def _check_pow2_delta(d: Dimension, what: str):
    if not _is_power_of_two(d.delta):
        raise ValueError(
            f"{what} needs delta = 2^alpha for an integer alpha, got {d.delta}"
        )


def _int_ratio_log2(num: float, den: float) -> int:
    r = num / den
    k = round(math.log2(r))
    if abs(r - 2.0**k) > 1e-9 * r or k < 0:
        raise ValueError(f"delta ratio {r} is not a non-negative power of two")
    return k


@dataclass(frozen=True)
class BinaryOpSpec:
    op: str  # Sum | Product | Max | Min
    left: int
    right: int | None = None
    constant: float | None = None

    def __post_init__(self):
        if self.op not in ("Sum", "Product", "Max", "Min"):
            raise ValueError(f"unsupported op {self.op!r}")
        if (self.right is None) == (self.constant is None):
            raise ValueError("exactly one of right / constant must be given")


@dataclass(frozen=True)
class IndicatorSpec:
    kind: str  # Compare | ThresholdLower | ThresholdUpper | Esop
    dim: int | None = None
    other: int | None = None
    value: float | None = None
    products: tuple = ()  # ESOP: tuple of tuples of (indicator index, polarity)

    def __post_init__(self):
        if self.kind not in ("Compare", "ThresholdLower", "ThresholdUpper", "Esop"):
            raise ValueError(f"unsupported indicator kind {self.kind!r}")


@dataclass
class PayoffConfig:
    """One QMCI run produced by an instrument build: which dimension to
    integrate, the conditioning indicator, the quantity, and the classical
    affine combination (payoff contribution = scale * estimate + offset)."""

    quantity: str
    dimension: int | None
    condition: int | None
    x_star: float | None = None
    support_window: tuple[float, float] | None = None
    scale: float = 1.0
    offset: float = 0.0
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "dimension": self.dimension,
            "condition": self.condition,
            "x_star": self.x_star,
            "support_window": list(self.support_window) if self.support_window else None,
            "scale": self.scale,
            "offset": self.offset,
            "label": self.label,
        }


@dataclass
class InstrumentSpec:
    instrument: str  # Barrier | Lookback | Autocallable
    space: str = "return"  # return | price
    n_slices: int = 4
    total_volatility: float = 0.1
    call_or_put: str = "call"
    strike_ratio: float = 1.05
    barrier_ratio: float | None = None
    barrier_kind: str | None = None  # knock_in | knock_out
    autocall_schedule: list = field(default_factory=list)  # (slice, level, payout)
    payoff_kind: str = "value"  # value | binary
    binary_payout: float = 1.0
    target_rmse: float | None = None
    q_budget: int | None = None

    def __post_init__(self):
        if self.instrument not in ("Barrier", "Lookback", "Autocallable"):
            raise ValueError(f"unsupported instrument {self.instrument!r}")
        if self.space not in ("return", "price"):
            raise ValueError("space must be 'return' or 'price'")
        if self.n_slices < 1:
            raise ValueError("need n_slices >= 1")
        if self.total_volatility <= 0:
            raise ValueError("volatility must be positive")
        if self.payoff_kind not in ("value", "binary"):
            raise ValueError("payoff_kind must be 'value' or 'binary'")
        ts = [t for (t, _, _) in self.autocall_schedule]
        if ts != sorted(set(ts)):
            raise ValueError("autocall schedule slices must be strictly increasing")

    @classmethod
    def from_dict(cls, d: dict) -> "InstrumentSpec":
        d = dict(d)
        if "autocall_schedule" in d:
            d["autocall_schedule"] = [tuple(x) for x in d["autocall_schedule"]]
        return cls(**d)


# --------------------------------------------------------------------------
# builder plumbing


class _Builder:
    """Accumulates gates, dimensions, indicators and a reusable pool of
    scratch qubits.  Scratch is borrowed inside a frame and must be left
    clean; frames may nest."""

    def __init__(self, dc: DistributionCircuit):
        self.circuit = dc.circuit.copy()
        self.dims = list(dc.dims)
        self.indicators = list(dc.indicators)
        self.pool = list(dc.ancillas)  # clean ancillas available for reuse
        self._scratch_sp = 0

    def result(self) -> DistributionCircuit:
        return DistributionCircuit(self.circuit, self.dims, self.indicators, self.pool)

    def new_qubits(self, k: int) -> list[int]:
        start = self.circuit.n_qubits
        self.circuit = self.circuit.widened(start + k)
        return list(range(start, start + k))

    def new_scratch(self, k: int) -> list[int]:
        need = self._scratch_sp + k
        if len(self.pool) < need:
            self.pool += self.new_qubits(need - len(self.pool))
        out = self.pool[self._scratch_sp : need]
        self._scratch_sp = need
        return out

    def scratch_frame(self):
        builder = self

        class _Frame:
            def __enter__(self):
                self.saved = builder._scratch_sp
                return self

            def __exit__(self, *exc):
                builder._scratch_sp = self.saved
                return False

        return _Frame()

    def emit(self, gates):
        for g in gates:
            self.circuit.add(g)


def _lsb_bits(d: Dimension) -> list[int]:
    return list(reversed(d.qubits))


def _aligned_bits(d: Dimension, delta: float) -> list[Bit]:
    """Register bits as an LSB-first list on the common grid ``delta``
    (left shift pads constant zeros)."""
    shift = _int_ratio_log2(d.delta, delta)
    return [("c", 0)] * shift + [("q", q) for q in _lsb_bits(d)]


def _const_bits(value: int, width: int) -> list[Bit]:
    return [("c", (value >> p) & 1) for p in range(width)]


def _pad(bits: list[Bit], width: int) -> list[Bit]:
    return bits + [("c", 0)] * (width - len(bits))


def _negate(bits: list[Bit]) -> list[Bit]:
    out = []
    for kind, v in bits:
        if kind == "c":
            out.append(("c", 1 - v))
        elif kind == "q":
            out.append(("nq", v))
        else:
            out.append(("q", v))
    return out


def _pair_product_gates(u: Bit, v: Bit, target: int) -> list[Gate]:
    """target ^= u * v for generic bits (constants and negations folded)."""
    (ku, iu), (kv, iv) = u, v
    if ku == "c" and kv == "c":
        return [gate("X", target)] if iu and iv else []
    if ku == "c":
        u, v = v, u
        (ku, iu), (kv, iv) = u, v
    if kv == "c":
        if iv == 0:
            return []
        # target ^= u
        if ku == "q":
            return [gate("CNOT", (iu, target))]
        return [gate("X", target), gate("CNOT", (iu, target))]
    # both are (possibly negated) qubits
    gates = []
    neg_u, neg_v = ku == "nq", kv == "nq"
    if neg_u and neg_v:
        gates.append(gate("X", target))
        gates.append(gate("CNOT", (iu, target)))
        gates.append(gate("CNOT", (iv, target)))
    elif neg_u:
        gates.append(gate("CNOT", (iv, target)))
    elif neg_v:
        gates.append(gate("CNOT", (iu, target)))
    if iu == iv:
        raise ValueError("degenerate pair in adder")
    gates.append(gate("Toffoli", (iu, iv, target)))
    return gates


def _xor_gates(b: Bit, target: int, control: int | None = None) -> list[Gate]:
    """target ^= b, optionally only when ``control`` is 1."""
    kind, v = b
    if kind == "c":
        if v == 0:
            return []
        if control is None:
            return [gate("X", target)]
        return [gate("CNOT", (control, target))]
    pre = [gate("X", v)] if kind == "nq" else []
    post = [gate("X", v)] if kind == "nq" else []
    if control is None:
        return pre + [gate("CNOT", (v, target))] + post
    return pre + [gate("Toffoli", (control, v, target))] + post


def _carry_chain(xs: list[Bit], ys: list[Bit], carry_qubits: list[int], carry_in: int):
    """Gates computing carries of x + y + carry_in into fresh zeroed
    ``carry_qubits`` (carry_qubits[p] receives the carry out of position p).

    carry = maj(x_p, y_p, c_p) = x y ^ x c ^ y c, computed per pair.
    Returns the gate list; running it in reverse uncomputes the carries.
    """
    n = len(xs)
    assert len(ys) == n and len(carry_qubits) == n
    gates: list[Gate] = []
    c: Bit = ("c", carry_in)
    for p in range(n):
        t = carry_qubits[p]
        gates += _pair_product_gates(xs[p], ys[p], t)
        gates += _pair_product_gates(xs[p], c, t)
        gates += _pair_product_gates(ys[p], c, t)
        c = ("q", t)
    return gates


def _sum_write_gates(xs, ys, carry_qubits, carry_in, targets, control=None):
    """targets[p] ^= x_p ^ y_p ^ c_p (optionally controlled)."""
    gates: list[Gate] = []
    c: Bit = ("c", carry_in)
    for p, t in enumerate(targets):
        for b in (xs[p], ys[p], c):
            gates += _xor_gates(b, t, control)
        c = ("q", carry_qubits[p])
    return gates


# Cuccaro ripple adder pieces (in-place accumulate)


def _maj(c: int, b: int, a: int) -> list[Gate]:
    return [gate("CNOT", (a, b)), gate("CNOT", (a, c)), gate("Toffoli", (c, b, a))]


def _uma(c: int, b: int, a: int) -> list[Gate]:
    return [gate("Toffoli", (c, b, a)), gate("CNOT", (a, c)), gate("CNOT", (c, b))]


def _cuccaro_add(addend: list[int], accum: list[int], carry_out: int, c0: int):
    """accum += addend (equal lengths), carry into ``carry_out``; the
    addend, c0 and any padding return to their input state."""
    n = len(addend)
    assert len(accum) == n
    gates: list[Gate] = []
    chain = [c0] + addend
    for p in range(n):
        gates += _maj(chain[p], accum[p], addend[p])
    gates.append(gate("CNOT", (addend[n - 1], carry_out)))
    for p in reversed(range(n)):
        gates += _uma(chain[p], accum[p], addend[p])
    return gates


# --------------------------------------------------------------------------
# arithmetic operations


def _copy_register(b: _Builder, src: Dimension, x_l: float, delta: float, name=""):
    out = b.new_qubits(src.n)
    for s, t in zip(src.qubits, out):
        b.emit([gate("CNOT", (s, t))])
    b.dims.append(Dimension(tuple(out), x_l, delta))
    return len(b.dims) - 1


def _apply_sum(b: _Builder, i: int, j: int) -> None:
    di, dj = b.dims[i], b.dims[j]
    _check_pow2_delta(di, "Sum")
    _check_pow2_delta(dj, "Sum")
    delta = min(di.delta, dj.delta)
    ti = _int_ratio_log2(di.delta, delta)
    tj = _int_ratio_log2(dj.delta, delta)
    w = max(di.n + ti, dj.n + tj) + 1
    out = b.new_qubits(w)  # out[p] is bit p (LSB first)
    # copy the i operand at its offset
    for p, q in enumerate(_lsb_bits(di)):
        b.emit([gate("CNOT", (q, out[ti + p]))])
    # Cuccaro-add the j operand into out[tj .. w-2], carry into out[w-1]
    length = w - 1 - tj
    pad = length - dj.n
    with b.scratch_frame():
        anc = b.new_scratch(1 + max(pad, 0))
        c0 = anc[0]
        addend = _lsb_bits(dj) + anc[1 : 1 + pad]
        accum = out[tj : w - 1]
        b.emit(_cuccaro_add(addend, accum, out[w - 1], c0))
    b.dims.append(Dimension(tuple(reversed(out)), di.x_l + dj.x_l, delta))


def _apply_sum_const(b: _Builder, i: int, c: float) -> None:
    d = b.dims[i]
    _copy_register(b, d, d.x_l + c, d.delta)


def _offset_code(d: Dimension) -> int:
    o = d.x_l / d.delta
    oi = round(o)
    if abs(o - oi) > 1e-9 or oi < 0:
        raise ValueError(
            f"Product needs x_l a non-negative integer multiple of delta, got x_l/delta = {o}"
        )
    return oi


def _apply_product(b: _Builder, i: int, j: int) -> None:
    di, dj = b.dims[i], b.dims[j]
    _check_pow2_delta(di, "Product")
    _check_pow2_delta(dj, "Product")
    oi, oj = _offset_code(di), _offset_code(dj)
    wi = max((oi + 2**di.n - 1).bit_length(), 1)
    wj = max((oj + 2**dj.n - 1).bit_length(), 1)
    w = wi + wj
    out = b.new_qubits(w)

    with b.scratch_frame():
        undo: list[Gate] = []

        def operand(d: Dimension, o: int, width: int):
            bits = [("q", q) for q in _lsb_bits(d)]
            if o == 0:
                return bits  # width == d.n exactly when o == 0
            xs = _pad(bits, width)
            ys = _const_bits(o, width)
            reg = b.new_scratch(width)
            with b.scratch_frame():
                carries = b.new_scratch(width)
                chain = _carry_chain(xs, ys, carries, 0)
                writes = _sum_write_gates(xs, ys, carries, 0, reg)
                gates = chain + writes + [g for g in reversed(chain)]
            b.emit(gates)
            undo.extend(gates)
            return [("q", q) for q in reg]

        u_bits = operand(di, oi, wi)
        v_bits = operand(dj, oj, wj)
        v_q = [q for (_, q) in v_bits]
        c0 = b.new_scratch(1)[0]
        # schoolbook: controlled-add (v << p) into out for every bit p of u
        for p, (_, uq) in enumerate(u_bits):
            accum = out[p : p + wj]
            b.emit(_controlled_cuccaro(v_q, accum, out[p + wj], c0, uq))
        b.emit([g for g in reversed(undo)])
    b.dims.append(Dimension(tuple(reversed(out)), 0.0, di.delta * dj.delta))


def _controlled_cuccaro(addend, accum, carry_out, c0, control):
    """accum += addend when ``control`` = 1 (every gate gains the control)."""
    def ctl(g: Gate) -> Gate:
        if g.kind == "CNOT":
            return gate("Toffoli", (control, *g.qubits))
        if g.kind == "Toffoli":
            return Gate("MultiControlledX", (), (control, *g.qubits))
        raise ValueError(g.kind)

    n = len(addend)
    gates: list[Gate] = []
    chain = [c0] + list(addend)
    for p in range(n):
        gates += [ctl(g) for g in _maj(chain[p], accum[p], addend[p])]
    if carry_out is not None:
        gates.append(ctl(gate("CNOT", (addend[n - 1], carry_out))))
    for p in reversed(range(n)):
        gates += [ctl(g) for g in _uma(chain[p], accum[p], addend[p])]
    return gates


def _comparator_gates(b: _Builder, di: Dimension, dj: Dimension, target: int):
    """target ^= [decoded(di) >= decoded(dj)]; scratch fully uncomputed."""
    delta = min(di.delta, dj.delta)
    ki = _aligned_bits(di, delta)
    kj = _aligned_bits(dj, delta)
    d_real = (dj.x_l - di.x_l) / delta
    d_int = math.ceil(d_real - 1e-9)
    dm, dp = max(-d_int, 0), max(d_int, 0)
    max_u = 2 ** len(ki) - 1 + dm
    max_v = 2 ** len(kj) - 1 + dp
    # constant outcomes
    if dm > max_v:  # u always >= v
        b.emit([gate("X", target)])
        return
    if dp > max_u:  # v always > u
        return
    width = max(max_u.bit_length(), max_v.bit_length())

    with b.scratch_frame():
        undo: list[Gate] = []

        def plus_const(bits, const):
            if const == 0:
                return _pad(bits, width)
            xs = _pad(bits, width)
            ys = _const_bits(const, width)
            reg = b.new_scratch(width)
            with b.scratch_frame():
                carries = b.new_scratch(width)
                chain = _carry_chain(xs, ys, carries, 0)
                writes = _sum_write_gates(xs, ys, carries, 0, reg)
                gates = chain + writes + [g for g in reversed(chain)]
            b.emit(gates)
            undo.extend(gates)
            return [("q", q) for q in reg]

        u = plus_const(ki, dm)
        v = plus_const(kj, dp)
        with b.scratch_frame():
            carries = b.new_scratch(width)
            chain = _carry_chain(u, _negate(v), carries, 1)
            b.emit(chain)
            b.emit([gate("CNOT", (carries[-1], target))])
            b.emit([g for g in reversed(chain)])
        b.emit([g for g in reversed(undo)])


def _threshold_gates(b: _Builder, d: Dimension, code_c: int, target: int):
    """target ^= [register code >= code_c]."""
    if code_c <= 0:
        b.emit([gate("X", target)])
        return
    if code_c > 2**d.n - 1:
        return
    bits = [("q", q) for q in _lsb_bits(d)]
    comp = _const_bits(2**d.n - code_c, d.n)
    with b.scratch_frame():
        carries = b.new_scratch(d.n)
        chain = _carry_chain(bits, comp, carries, 0)
        b.emit(chain)
        b.emit([gate("CNOT", (carries[-1], target))])
        b.emit([g for g in reversed(chain)])


def snap_to_grid(d: Dimension, value: float) -> tuple[int, float]:
    """Nearest grid code for ``value`` (ties toward +inf) and its value."""
    code = math.floor((value - d.x_l) / d.delta + 0.5)
    return code, d.x_l + code * d.delta


def _apply_max_min(b: _Builder, i: int, j: int, take_max: bool) -> None:
    di, dj = b.dims[i], b.dims[j]
    _check_pow2_delta(di, "Max/Min")
    _check_pow2_delta(dj, "Max/Min")
    delta = min(di.delta, dj.delta)
    off = (di.x_l - dj.x_l) / delta
    if abs(off - round(off)) > 1e-9:
        raise ValueError("Max/Min operands must share a grid (offset misaligned)")
    if take_max:
        lo_new = max(di.x_l, dj.x_l)
        hi_new = max(di.x_u, dj.x_u)
    else:
        lo_new = min(di.x_l, dj.x_l)
        hi_new = min(di.x_u, dj.x_u)
    n_codes = round((hi_new - lo_new) / delta) + 1
    w = max((n_codes - 1).bit_length(), 1)
    out = b.new_qubits(w)

    with b.scratch_frame():
        ind = b.new_scratch(1)[0]
        _comparator_gates(b, di, dj, ind)  # ind = [x_i >= x_j]

        def write_branch(d: Dimension, when_one: bool):
            # out ^= (aligned code + const) when ind == when_one; the sum
            # always fits w bits when the branch fires, so only the low w
            # positions are written (carries run over the full width)
            const = round((d.x_l - lo_new) / delta)
            aligned = _aligned_bits(d, delta)
            full = max(len(aligned), w)
            xs = _pad(aligned, full)
            ys = _const_bits(const % (2**full), full)
            with b.scratch_frame():
                carries = b.new_scratch(full)
                pre = [] if when_one else [gate("X", ind)]
                b.emit(pre)
                chain = _carry_chain(xs, ys, carries, 0)
                b.emit(chain)
                b.emit(_sum_write_gates(xs, ys, carries, 0, out, control=ind))
                b.emit([g for g in reversed(chain)])
                b.emit(pre)

        write_branch(di, take_max)       # max: copy i when x_i >= x_j
        write_branch(dj, not take_max)   # max: copy j when x_i < x_j
        _comparator_gates(b, di, dj, ind)  # uncompute the compare bit
    b.dims.append(Dimension(tuple(reversed(out)), lo_new, delta))


def _apply_max_min_const(b: _Builder, i: int, c: float, take_max: bool) -> None:
    d = b.dims[i]
    _check_pow2_delta(d, "Max/Min")
    code_c, c_snap = snap_to_grid(d, c)
    code_c = min(max(code_c, 0), 2**d.n - 1)
    c_snap = d.x_l + code_c * d.delta
    if take_max:
        lo_new, hi_new = max(d.x_l, c_snap), max(d.x_u, c_snap)
    else:
        lo_new, hi_new = min(d.x_l, c_snap), min(d.x_u, c_snap)
    n_codes = round((hi_new - lo_new) / d.delta) + 1
    w = max((n_codes - 1).bit_length(), 1)
    out = b.new_qubits(w)
    with b.scratch_frame():
        ind = b.new_scratch(1)[0]
        _threshold_gates(b, d, code_c, ind)  # ind = [x >= c]
        reg_const = round((d.x_l - lo_new) / d.delta)
        full = max(d.n, w)
        xs = _pad([("q", q) for q in _lsb_bits(d)], full)
        ys = _const_bits(reg_const % (2**full), full)
        with b.scratch_frame():
            carries = b.new_scratch(full)
            pre = [] if take_max else [gate("X", ind)]
            b.emit(pre)
            chain = _carry_chain(xs, ys, carries, 0)
            b.emit(chain)
            b.emit(_sum_write_gates(xs, ys, carries, 0, out, control=ind))
            b.emit([g for g in reversed(chain)])
            b.emit(pre)
        # other branch: write the snapped constant's code
        cc = round((c_snap - lo_new) / d.delta)
        flip = [gate("X", ind)] if take_max else []
        b.emit(flip)
        for p in range(w):
            if (cc >> p) & 1:
                b.emit([gate("CNOT", (ind, out[p]))])
        b.emit(flip)
        _threshold_gates(b, d, code_c, ind)
    b.dims.append(Dimension(tuple(reversed(out)), lo_new, d.delta))


# --------------------------------------------------------------------------
# public operations


def apply_binary_op(dc: DistributionCircuit, spec: BinaryOpSpec) -> DistributionCircuit:
    """Append a new dimension holding the op result; originals unchanged."""
    b = _Builder(dc)
    n_dims = len(b.dims)
    if spec.left < 0 or spec.left >= n_dims:
        raise ValueError(f"no dimension {spec.left}")
    if spec.right is not None and (spec.right < 0 or spec.right >= n_dims):
        raise ValueError(f"no dimension {spec.right}")
    if spec.op == "Sum":
        if spec.right is not None:
            _apply_sum(b, spec.left, spec.right)
        else:
            _apply_sum_const(b, spec.left, spec.constant)
    elif spec.op == "Product":
        if spec.right is not None:
            _apply_product(b, spec.left, spec.right)
        else:
            if spec.constant <= 0:
                raise ValueError("constant product needs a positive constant")
            d = b.dims[spec.left]
            _copy_register(b, d, d.x_l * spec.constant, d.delta * spec.constant)
    else:
        take_max = spec.op == "Max"
        if spec.right is not None:
            _apply_max_min(b, spec.left, spec.right, take_max)
        else:
            _apply_max_min_const(b, spec.left, spec.constant, take_max)
    return b.result()


def add_indicator(dc: DistributionCircuit, spec: IndicatorSpec) -> DistributionCircuit:
    """Append one indicator qubit encoding the Boolean for every basis state."""
    if spec.kind == "Esop":
        return add_esop(dc, spec.products)
    b = _Builder(dc)
    if spec.dim is None or spec.dim < 0 or spec.dim >= len(b.dims):
        raise ValueError(f"no dimension {spec.dim}")
    target = b.new_qubits(1)[0]
    if spec.kind == "Compare":
        if spec.other is None:
            raise ValueError("Compare needs a second dimension")
        di, dj = b.dims[spec.dim], b.dims[spec.other]
        _int_ratio_log2(max(di.delta, dj.delta), min(di.delta, dj.delta))
        _comparator_gates(b, di, dj, target)
    else:
        if spec.value is None:
            raise ValueError("Threshold needs a constant value")
        d = b.dims[spec.dim]
        code_c, _ = snap_to_grid(d, spec.value)
        _threshold_gates(b, d, code_c, target)
        if spec.kind == "ThresholdUpper":  # IF(x < c)
            b.emit([gate("X", target)])
    b.indicators.append(target)
    return b.result()


def add_esop(dc: DistributionCircuit, products) -> DistributionCircuit:
    """New indicator = XOR over product terms of (possibly negated)
    existing indicators, one multi-controlled X per term."""
    products = [list(term) for term in products]
    if not products:
        raise ValueError("ESOP needs at least one product term")
    b = _Builder(dc)
    target = b.new_qubits(1)[0]
    for term in products:
        if not term:
            raise ValueError("empty ESOP product term")
        literals: dict[int, bool] = {}
        contradictory = False
        for ind_idx, polarity in term:
            if ind_idx < 0 or ind_idx >= len(b.indicators):
                raise ValueError(f"no indicator {ind_idx}")
            if ind_idx in literals and literals[ind_idx] != bool(polarity):
                contradictory = True  # A AND NOT A: term is constant false
            literals[ind_idx] = bool(polarity)
        if contradictory:
            continue
        controls, flips = [], []
        for ind_idx, polarity in literals.items():
            q = b.indicators[ind_idx]
            controls.append(q)
            if not polarity:
                flips.append(gate("X", q))
        b.emit(flips)
        if len(controls) == 0:
            b.emit([gate("X", target)])
        elif len(controls) == 1:
            b.emit([gate("CNOT", (controls[0], target))])
        elif len(controls) == 2:
            b.emit([gate("Toffoli", (*controls, target))])
        else:
            b.emit([Gate("MultiControlledX", (), (*controls, target))])
        b.emit(flips)
    b.indicators.append(target)
    return b.result()


def apply_script(
    dc: DistributionCircuit,
    operations=(),
    thresholds=(),
    esop=None,
) -> DistributionCircuit:
    """Apply a pseudocode-style enhancement script.

    Dimension indices here are 1-based, matching the conventional printed
    form ``operations = [Max(1, 2), Max(3, 4), Max(5, 6)]``; indicator
    indices in the ESOP are 0-based in creation order.  Operations are
    (op, i, j) or (op, i, constant); thresholds are dicts with keys
    ``dimension``, ``value`` and ``type`` ("lower" | "upper").
    """
    out = dc
    for entry in operations:
        op, left, right = entry
        if op in ("Sum", "Product", "Max", "Min") and isinstance(right, int):
            out = apply_binary_op(out, BinaryOpSpec(op, left - 1, right - 1))
        else:
            out = apply_binary_op(out, BinaryOpSpec(op, left - 1, constant=float(right)))
    for th in thresholds:
        kind = "ThresholdLower" if th["type"].lower() == "lower" else "ThresholdUpper"
        out = add_indicator(
            out, IndicatorSpec(kind, dim=th["dimension"] - 1, value=float(th["value"]))
        )
    if esop is not None:
        out = add_esop(out, esop["products"] if isinstance(esop, dict) else esop)
    return out


def build_brownian(dc: DistributionCircuit, geometric: bool = False) -> DistributionCircuit:
    """Append d path dimensions forming the running sum (or product) of the
    d input dimensions; new dimension d+k holds the path after k+1 steps."""
    d = len(dc.dims)
    if d < 1:
        raise ValueError("need at least one input dimension")
    op = "Product" if geometric else "Sum"
    ident = 1.0 if geometric else 0.0
    out = apply_binary_op(dc, BinaryOpSpec(op, d - 1, constant=ident))
    for k in range(1, d):
        out = apply_binary_op(out, BinaryOpSpec(op, d + k - 1, k - 1))
    return out


# --------------------------------------------------------------------------
# instruments


def _snap_pow2(x: float) -> float:
    return 2.0 ** round(math.log2(x))


def _compose_slices(unit: DistributionCircuit, n_slices: int, sigma_slice: float | None):
    """n_slices independent copies of a one-dimensional loader; in return
    space the unit circuit is rescaled so the slice spacing is an exact
    power of two (the realised volatility moves by at most ~2%)."""
    if len(unit.dims) != 1:
        raise ValueError("instrument input must be one-dimensional")
    base_dim = unit.dims[0]
    if sigma_slice is None:
        delta = _snap_pow2(base_dim.delta)
    else:
        delta = _snap_pow2(sigma_slice * base_dim.delta)
        sigma_real = delta / base_dim.delta
    # x_l snaps onto the delta grid so running sums stay mutually aligned
    # (required by Max/Min); this shifts the support by at most delta / 2
    raw_x_l = base_dim.x_l if sigma_slice is None else base_dim.x_l * sigma_real
    x_l = round(raw_x_l / delta) * delta
    n = unit.circuit.n_qubits
    qc = QuantumCircuit(n * n_slices, f"{unit.circuit.name}_x{n_slices}")
    dims = []
    for s in range(n_slices):
        for g in unit.circuit.gates:
            qc.add(Gate(g.kind, g.params, tuple(q + s * n for q in g.qubits)))
        dims.append(Dimension(tuple(q + s * n for q in base_dim.qubits), x_l, delta))
    return DistributionCircuit(qc, dims)


def build_instrument(
    unit: DistributionCircuit, spec: InstrumentSpec
) -> tuple[DistributionCircuit, list[PayoffConfig]]:
    """Enhance a one-dimensional loader into the instrument's full circuit.

    Returns the enhanced circuit plus one payoff config per required QMCI
    run (a single config for barrier / look-back; one per autocall leg
    plus the knock-out put leg for autocallables).  The caller combines
    the runs classically as sum(scale * estimate + offset).
    """
    ret_space = spec.space == "return"
    sigma_slice = (
        spec.total_volatility / math.sqrt(spec.n_slices) if ret_space else None
    )
    dc = _compose_slices(unit, spec.n_slices, sigma_slice)
    dc = build_brownian(dc, geometric=not ret_space)
    path = list(range(spec.n_slices, 2 * spec.n_slices))

    def window_for(dim_idx: int):
        # apply the function only to the +-5 sigma part of the support
        # (in return space the path value is N(0, total_volatility^2))
        if not ret_space:
            return None
        d = nonlocal_dc[0].dims[dim_idx]
        wide = 5.0 * spec.total_volatility
        lo, hi = max(d.x_l, -wide), min(d.x_u, wide)
        return (lo, hi) if lo < hi else None

    def level(x: float) -> float:
        return math.log(x) if ret_space else x

    quantity = "ConditionalExponential" if ret_space else "ConditionalExpectation"

    thresholds: dict[tuple, int] = {}  # (dim, kind, code) -> indicator index

    def threshold(dim: int, value: float, lower: bool) -> int:
        kind = "ThresholdLower" if lower else "ThresholdUpper"
        code, _ = snap_to_grid(nonlocal_dc[0].dims[dim], value)
        key = (dim, kind, code)
        if key not in thresholds:
            nonlocal_dc[0] = add_indicator(
                nonlocal_dc[0], IndicatorSpec(kind, dim=dim, value=value)
            )
            thresholds[key] = len(nonlocal_dc[0].indicators) - 1
        return thresholds[key]

    nonlocal_dc = [dc]
    configs: list[PayoffConfig] = []

    if spec.instrument in ("Barrier", "Lookback"):
        strike = level(spec.strike_ratio)
        if spec.instrument == "Barrier":
            if spec.barrier_ratio is None:
                raise ValueError("barrier option needs barrier_ratio")
            if spec.barrier_kind not in (None, "knock_out"):
                raise ValueError("only knock_out barriers are built in")
            barrier = level(spec.barrier_ratio)
            inds = [threshold(p, barrier, lower=False) for p in path]
            pay_dim = path[-1]
        else:
            cur = path
            while len(cur) > 1:
                nxt = []
                for k in range(0, len(cur) - 1, 2):
                    nonlocal_dc[0] = apply_binary_op(
                        nonlocal_dc[0], BinaryOpSpec("Max", cur[k], cur[k + 1])
                    )
                    nxt.append(len(nonlocal_dc[0].dims) - 1)
                if len(cur) % 2:
                    nxt.append(cur[-1])
                cur = nxt
            pay_dim = cur[0]
            inds = []
        inds.append(threshold(pay_dim, strike, lower=True))
        nonlocal_dc[0] = add_esop(nonlocal_dc[0], [[(i, True) for i in inds]])
        cond = len(nonlocal_dc[0].indicators) - 1
        d = nonlocal_dc[0].dims[pay_dim]
        _, strike_snap = snap_to_grid(d, strike)
        sign = 1.0 if spec.call_or_put == "call" else -1.0
        if spec.payoff_kind == "binary":
            configs.append(
                PayoffConfig("BernoulliQubit", None, cond,
                             scale=spec.binary_payout, label="binary payoff")
            )
        else:
            k_price = math.exp(strike_snap) if ret_space else strike_snap
            configs.append(
                PayoffConfig(quantity, pay_dim, cond, x_star=strike_snap,
                             support_window=window_for(pay_dim),
                             scale=sign, offset=-sign * k_price, label="value payoff")
            )
        return nonlocal_dc[0], configs

    # autocallable: binary call legs plus a knock-out put leg
    if not spec.autocall_schedule:
        raise ValueError("autocallable needs a schedule")
    sched = list(spec.autocall_schedule)
    for idx, (t_i, k_i, b_i) in enumerate(sched):
        if not 1 <= t_i <= spec.n_slices:
            raise ValueError(f"schedule slice {t_i} outside 1..{spec.n_slices}")
        term = []
        for t_j, k_j, _ in sched[:idx]:
            term.append((threshold(path[t_j - 1], level(k_j), lower=False), True))
        term.append((threshold(path[t_i - 1], level(k_i), lower=True), True))
        nonlocal_dc[0] = add_esop(nonlocal_dc[0], [term])
        cond = len(nonlocal_dc[0].indicators) - 1
        configs.append(
            PayoffConfig("BernoulliQubit", None, cond, scale=b_i,
                         label=f"autocall leg {idx + 1} (slice {t_i})")
        )
    # short knock-out put leg: all calls fail, barrier never breached,
    # final price below the put strike
    put_barrier = spec.barrier_ratio if spec.barrier_ratio is not None else 0.9
    put_strike = spec.strike_ratio
    term = []
    for t_j, k_j, _ in sched:
        term.append((threshold(path[t_j - 1], level(k_j), lower=False), True))
    for p in path:
        term.append((threshold(p, level(put_barrier), lower=True), True))
    term.append((threshold(path[-1], level(put_strike), lower=False), True))
    nonlocal_dc[0] = add_esop(nonlocal_dc[0], [term])
    cond = len(nonlocal_dc[0].indicators) - 1
    d = nonlocal_dc[0].dims[path[-1]]
    _, strike_snap = snap_to_grid(d, level(put_strike))
    k_price = math.exp(strike_snap) if ret_space else strike_snap
    if spec.payoff_kind == "binary":
        configs.append(
            PayoffConfig("BernoulliQubit", None, cond, scale=-spec.binary_payout,
                         label="knock-out put leg (binary)")
        )
    else:
        configs.append(
            PayoffConfig(quantity, path[-1], cond, x_star=strike_snap,
                         support_window=window_for(path[-1]),
                         scale=1.0, offset=-k_price, label="knock-out put leg")
        )
    return nonlocal_dc[0], configs
