"""Quantum amplitude estimation subroutines.

Four estimators share one problem shape: a state-preparation circuit A
whose final measurement of a designated "good" qubit reads 1 with
probability a = sin^2(theta).

* PAM: prepare-and-measure, the classical baseline (lambda = 1).
* MLQAE: exponentially increasing sequence of Grover powers, grid MLE.
* IQAE: iterative interval refinement, wrapped so it accepts a use budget.
* LCU QAE: MLQAE's schedule with non-deterministic initial-state rotation
  via a linear combination of unitaries, MMSE estimate from a grid
  posterior.

Use accounting is uniform: one shot at Grover power m costs 2m+1 uses of A
(one initial A, two per Q).  Every algorithm consumes its stated budget
exactly, except IQAE which may leave a small remainder (>= 90% consumed).

Shots are simulated without re-running circuits per shot: the amplitude of
A is computed once by exact state-vector simulation, after which outcome
draws follow the closed-form likelihoods (the test suite verifies those
likelihoods against direct simulation of the composed circuits).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit import QuantumCircuit, controlled_x
from .simulator import marginal_pmf, simulate

C_QAE_REFERENCE = {"PAM": 0.5, "MLQAE": 8.02, "IQAE": 14.4, "LCU": 7.82}

DEFAULT_SHOTS_M0 = 66
DEFAULT_SHOTS_OTHER = 44
DEFAULT_POSTERIOR_GRID = 100_001


@dataclass(frozen=True)
class QaeProblem:
    a_circuit: QuantumCircuit
    good_qubit: int

    def __post_init__(self):
        if not 0 <= self.good_qubit < self.a_circuit.n_qubits:
            raise ValueError("good_qubit out of range")


@dataclass
class QaeConfig:
    kind: str = "MLQAE"  # PAM | MLQAE | IQAE | LCU
    q: int = 1000
    seed: int = 0
    p_max_fail: float = 0.5
    shots_m0: int = DEFAULT_SHOTS_M0
    shots_other: int = DEFAULT_SHOTS_OTHER
    posterior_grid_size: int = DEFAULT_POSTERIOR_GRID

    def __post_init__(self):
        if self.kind not in C_QAE_REFERENCE:
            raise ValueError(f"unknown QAE kind {self.kind!r}")
        if self.q < 1:
            raise ValueError("use budget must be >= 1")
        if not 0.0 < self.p_max_fail < 1.0:
            raise ValueError("p_max_fail must lie in (0, 1)")


@dataclass
class QaeResult:
    a_hat: float
    uses_successful: int
    lam: int
    c_qae_reference: float
    uses_expected_total: float | None = None  # LCU only: includes failed preps
    fallback: bool = False  # IQAE only: budget too small, ran PAM

    def __post_init__(self):
        if not 0.0 <= self.a_hat <= 1.0:
            raise ValueError("estimate outside [0, 1]")


# --------------------------------------------------------------------------
# amplitudes and the Grover operator

_AMP_CACHE: dict = {}


def amplitude(problem: QaeProblem) -> float:
    """Exact a = P(good qubit = 1) of A|0>, memoised by circuit identity."""
    key = (problem.a_circuit.key(), problem.good_qubit)
    if key not in _AMP_CACHE:
        if len(_AMP_CACHE) > 4096:
            _AMP_CACHE.clear()
        state = simulate(problem.a_circuit)
        _AMP_CACHE[key] = float(marginal_pmf(state, [problem.good_qubit])[1])
    return _AMP_CACHE[key]


def grover_operator(problem: QaeProblem) -> QuantumCircuit:
    """Q = -A S0 A^dagger S_chi (global sign dropped).

    S_chi is Z on the good qubit (two S gates); S0 reflects about the
    all-zero state via X-conjugated multi-controlled Z.  Simulating
    Q^m A|0> yields P(good = 1) = sin^2((2m+1) theta).
    """
    a = problem.a_circuit
    n = a.n_qubits
    good = problem.good_qubit
    q = QuantumCircuit(n, "grover")
    q.append("S", good).append("S", good)  # S_chi = Z on good
    q.extend(a.inverse().gates)
    for w in range(n):
        q.append("X", w)
    if n == 1:
        q.append("S", 0).append("S", 0)
    else:
        t = n - 1
        q.append("H", t)
        q.add(controlled_x(range(n - 1), t))
        q.append("H", t)
    for w in range(n):
        q.append("X", w)
    q.extend(a.gates)
    return q


def benchmark_circuit(theta: float) -> QaeProblem:
    """The two-qubit amplitude-benchmark circuit: Ry(2 theta) then CNOT;
    the second qubit reads 1 with probability sin^2(theta)."""
    qc = QuantumCircuit(2, "benchmark")
    qc.append("Ry", 0, 2.0 * theta).append("CNOT", (0, 1))
    return QaeProblem(qc, 1)


# --------------------------------------------------------------------------
# shot scheduling shared by MLQAE / LCU QAE (and resource mode)


def eis_schedule(
    q: int, shots_m0: int = DEFAULT_SHOTS_M0, shots_other: int = DEFAULT_SHOTS_OTHER
) -> list[tuple[int, int]]:
    """Spread ``q`` uses over the exponentially increasing sequence of
    Grover powers m in {0, 1, 2, 4, 8, ...}.

    Full rounds run while they fit.  After the last full EIS level m*, the
    greatest m' > m* whose full round still fits is run; any remaining uses
    go one shot at a time to existing levels, largest m first (a shot at
    level m costs 2m+1, so m = 0 absorbs the tail and the budget is
    consumed exactly).  Returns [(m, shots)] sorted by m.
    """
    if q < 1:
        raise ValueError("budget must be >= 1")
    shots: dict[int, int] = {}
    rem = q
    first = min(shots_m0, rem)
    shots[0] = first
    rem -= first
    m_star = 0
    m = 1
    while rem >= shots_other * (2 * m + 1):
        shots[m] = shots_other
        rem -= shots_other * (2 * m + 1)
        m_star = m
        m *= 2
    if rem >= shots_other:
        m_prime = (rem // shots_other - 1) // 2
        if m_prime > m_star:
            shots[m_prime] = shots_other
            rem -= shots_other * (2 * m_prime + 1)
    for level in sorted(shots, reverse=True):
        take = rem // (2 * level + 1)
        if take:
            shots[level] += take
            rem -= take * (2 * level + 1)
    assert rem == 0, "schedule failed to exhaust the budget"
    return sorted(shots.items())


def schedule_uses(schedule: list[tuple[int, int]]) -> int:
    return sum(s * (2 * m + 1) for m, s in schedule)


# --------------------------------------------------------------------------
# PAM


def pam_from_amplitude(a: float, q: int, seed: int = 0) -> QaeResult:
    if q < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    a_hat = float(rng.binomial(q, a)) / q
    return QaeResult(a_hat, q, 1, C_QAE_REFERENCE["PAM"])


def pam(problem: QaeProblem, q: int, seed: int = 0) -> QaeResult:
    """Prepare-and-measure: a_hat is the fraction of ones over q shots."""
    return pam_from_amplitude(amplitude(problem), q, seed)


# --------------------------------------------------------------------------
# MLQAE


def _theta_grid(grid_size: int) -> np.ndarray:
    return np.linspace(0.0, math.pi / 2.0, grid_size)


def _mlqae_loglik(grid, levels, hits, shots):
    ll = np.zeros_like(grid)
    with np.errstate(divide="ignore"):
        for (m, n), h in zip(zip(levels, shots), hits):
            x = (2 * m + 1) * grid
            if h:
                ll += 2.0 * h * np.log(np.abs(np.sin(x)))
            if n - h:
                ll += 2.0 * (n - h) * np.log(np.abs(np.cos(x)))
    return ll


def _mle_refine(levels, hits, shots, lo, hi, points=2001):
    grid = np.linspace(lo, hi, points)
    ll = _mlqae_loglik(grid, levels, hits, shots)
    return float(grid[int(np.argmax(ll))])


def mlqae_from_amplitude(
    a: float,
    q: int,
    seed: int = 0,
    grid_size: int = 20_001,
    shots_m0: int = DEFAULT_SHOTS_M0,
    shots_other: int = DEFAULT_SHOTS_OTHER,
) -> QaeResult:
    theta = math.asin(math.sqrt(a))
    schedule = eis_schedule(q, shots_m0, shots_other)
    rng = np.random.default_rng(seed)
    levels = [m for m, _ in schedule]
    shots = [s for _, s in schedule]
    hits = [
        int(rng.binomial(s, math.sin((2 * m + 1) * theta) ** 2))
        for (m, s) in schedule
    ]
    grid = _theta_grid(grid_size)
    ll = _mlqae_loglik(grid, levels, hits, shots)
    i = int(np.argmax(ll))
    step = grid[1] - grid[0]
    lo = max(0.0, grid[i] - step)
    hi = min(math.pi / 2.0, grid[i] + step)
    theta_hat = _mle_refine(levels, hits, shots, lo, hi)
    return QaeResult(
        math.sin(theta_hat) ** 2, q, 2, C_QAE_REFERENCE["MLQAE"]
    )


def mlqae(
    problem: QaeProblem,
    q: int,
    seed: int = 0,
    grid_size: int = 20_001,
    shots_m0: int = DEFAULT_SHOTS_M0,
    shots_other: int = DEFAULT_SHOTS_OTHER,
) -> QaeResult:
    """Maximum-likelihood QAE over the EIS schedule.

    Outcome counts at level m are binomial with success probability
    sin^2((2m+1) theta); the discrete posterior over theta is maximised on
    a coarse grid and refined locally, and a_hat = sin^2(theta_mle).
    """
    return mlqae_from_amplitude(
        amplitude(problem), q, seed, grid_size, shots_m0, shots_other
    )


def _mlqae_batch(a: float, q: int, n_rep: int, seed: int, grid_size: int = 20_001):
    """Vectorised MLQAE repeats at one true amplitude (for sweeps)."""
    theta = math.asin(math.sqrt(a))
    schedule = eis_schedule(q)
    rng = np.random.default_rng(seed)
    levels = np.array([m for m, _ in schedule])
    shots = np.array([s for _, s in schedule])
    probs = np.sin((2 * levels + 1) * theta) ** 2
    hits = rng.binomial(shots[None, :], probs[None, :], size=(n_rep, len(levels)))
    grid = _theta_grid(grid_size)
    with np.errstate(divide="ignore"):
        log_s = 2.0 * np.log(np.abs(np.sin(np.outer(2 * levels + 1, grid))))
        log_c = 2.0 * np.log(np.abs(np.cos(np.outer(2 * levels + 1, grid))))
    # finite floor: 0 hits times -inf would poison the matmul with NaNs
    np.maximum(log_s, -1e6, out=log_s)
    np.maximum(log_c, -1e6, out=log_c)
    ll = hits.astype(np.float64) @ log_s + (shots - hits).astype(np.float64) @ log_c
    best = np.argmax(ll, axis=1)
    step = grid[1] - grid[0]
    out = np.empty(n_rep)
    for r in range(n_rep):
        lo = max(0.0, grid[best[r]] - step)
        hi = min(math.pi / 2.0, grid[best[r]] + step)
        th = _mle_refine(levels, hits[r], shots, lo, hi, points=801)
        out[r] = math.sin(th) ** 2
    return out


# --------------------------------------------------------------------------
# IQAE


_IQAE_CONST = 32.0 / (1.0 - 2.0 * math.sin(math.pi / 14.0)) ** 2


def iqae_query_bound(epsilon: float, alpha: float) -> float:
    """Worst-case uses of A for the iterative algorithm at (epsilon, alpha)."""
    return (100.0 / epsilon + _IQAE_CONST) * math.log(
        (2.0 / alpha) * math.log2(math.pi / (4.0 * epsilon))
    )


def iqae_risk(alpha: float, epsilon: float) -> float:
    return (1.0 - alpha) * epsilon**2 + alpha * (math.pi / 2.0) ** 2


def opt_ae(q: int) -> tuple[float, float] | None:
    """(epsilon, alpha) minimising the risk subject to the query bound
    matching q; None when no feasible pair exists (budget too small).

    epsilon is capped at pi/8 (half the angular domain); past that the
    inverted query bound stops being meaningful and the caller falls back
    to prepare-and-measure."""
    best = None
    for eps in np.logspace(-8, np.log10(math.pi / 8.0), 4000):
        c = 100.0 / eps + _IQAE_CONST
        big_l = math.log2(math.pi / (4.0 * eps))
        if big_l <= 0:
            continue
        alpha = 2.0 * big_l * math.exp(-q / c)
        if not 0.0 < alpha < 1.0:
            continue
        r = iqae_risk(alpha, eps)
        if best is None or r < best[0]:
            best = (r, eps, alpha)
    if best is None:
        return None
    return best[1], best[2]


def _find_next_k(k: int, upper_half: bool, frac_interval, min_ratio: float = 2.0):
    """Largest Grover power whose scaled interval fits one half-circle."""
    f_lo, f_hi = frac_interval
    old_scale = 4 * k + 2
    width = f_hi - f_lo
    if width <= 0:
        return k, upper_half
    scale_max = int(1.0 / (2.0 * width))
    scale = scale_max - (scale_max - 2) % 4
    while scale >= min_ratio * old_scale:
        lo = scale * f_lo - math.floor(scale * f_lo)
        hi = scale * f_hi - math.floor(scale * f_lo)
        if hi <= 0.5:
            return (scale - 2) // 4, True
        if lo >= 0.5 and hi <= 1.0:
            return (scale - 2) // 4, False
        scale -= 4
    return k, upper_half


def iqae(
    problem: QaeProblem,
    q: int,
    seed: int = 0,
    shots_per_round: int = 100,
    max_rounds: int = 100_000,
) -> QaeResult:
    """Iterative QAE wrapped to take a use budget.

    opt_ae picks the (epsilon, alpha) whose worst-case query count matches
    the budget; the interval iterations then continue past the nominal
    stopping point until (almost) all uses are exhausted; the estimate is
    the midpoint of the final amplitude interval.  Falls back to PAM when
    the budget admits no feasible (epsilon, alpha).
    """
    return iqae_from_amplitude(amplitude(problem), q, seed, shots_per_round, max_rounds)


def iqae_from_amplitude(
    a: float,
    q: int,
    seed: int = 0,
    shots_per_round: int = 100,
    max_rounds: int = 100_000,
) -> QaeResult:
    pair = opt_ae(q)
    if pair is None:
        res = pam_from_amplitude(a, q, seed)
        return QaeResult(res.a_hat, q, 1, C_QAE_REFERENCE["IQAE"], fallback=True)
    eps_theta, alpha = pair
    theta = math.asin(math.sqrt(a))
    frac = theta / (2.0 * math.pi)  # true value, as fraction of the circle
    rng = np.random.default_rng(seed)
    rounds_budget = max(1, math.ceil(math.log2(math.pi / (8.0 * eps_theta))))
    alpha_i = alpha / rounds_budget
    f_lo, f_hi = 0.0, 0.25
    k, upper_half = 0, True
    rem = q
    n_acc = h_acc = 0  # shots accumulated at the current k
    rounds = 0
    while rem > 0 and rounds < max_rounds:
        rounds += 1
        cost = 2 * k + 1
        if rem < cost:
            k, upper_half = 0, True
            n_acc = h_acc = 0
            cost = 1
        n_shots = min(shots_per_round, rem // cost)
        if n_shots == 0:
            break
        rem -= n_shots * cost
        p1 = math.sin((2 * k + 1) * theta) ** 2
        h = int(rng.binomial(n_shots, p1))
        n_acc += n_shots
        h_acc += h
        # Chernoff-Hoeffding interval on the one-probability
        eps_a = math.sqrt(math.log(2.0 / alpha_i) / (2.0 * n_acc))
        p_lo = max(0.0, h_acc / n_acc - eps_a)
        p_hi = min(1.0, h_acc / n_acc + eps_a)
        # convert to the scaled-angle interval: p = (1 - cos(2 pi K f)) / 2
        c_lo, c_hi = 1.0 - 2.0 * p_hi, 1.0 - 2.0 * p_lo
        scale = 4 * k + 2
        base = math.floor(scale * f_lo + 1e-12)
        if upper_half:
            r_lo = math.acos(min(1.0, max(-1.0, c_hi))) / (2.0 * math.pi)
            r_hi = math.acos(min(1.0, max(-1.0, c_lo))) / (2.0 * math.pi)
        else:
            r_lo = 1.0 - math.acos(min(1.0, max(-1.0, c_lo))) / (2.0 * math.pi)
            r_hi = 1.0 - math.acos(min(1.0, max(-1.0, c_hi))) / (2.0 * math.pi)
        new_lo = (base + r_lo) / scale
        new_hi = (base + r_hi) / scale
        # intersect with the running interval (robust to CI misses)
        if new_lo <= f_hi and new_hi >= f_lo:
            f_lo, f_hi = max(f_lo, new_lo), min(f_hi, new_hi)
            if f_lo > f_hi:
                f_lo = f_hi = 0.5 * (f_lo + f_hi)
        k_new, upper_new = _find_next_k(k, upper_half, (f_lo, f_hi))
        if k_new != k:
            k, upper_half = k_new, upper_new
            n_acc = h_acc = 0
    a_lo = math.sin(2.0 * math.pi * f_lo) ** 2
    a_hi = math.sin(2.0 * math.pi * f_hi) ** 2
    a_hat = min(1.0, max(0.0, 0.5 * (a_lo + a_hi)))
    return QaeResult(a_hat, q - rem, 2, C_QAE_REFERENCE["IQAE"])


# --------------------------------------------------------------------------
# LCU QAE


def lcu_fail_probability(beta: float) -> float:
    """Nominal preparation-failure probability sin^2(beta) (the operator
    norm bound used for budgeting; the state-dependent value is lower)."""
    return math.sin(beta) ** 2


def lcu_prepare(problem: QaeProblem, category: int, beta: float):
    """LCU state-preparation circuit for one of the four categories.

    Returns (circuit, flag_qubit); the desired state is obtained when the
    flag qubit is post-selected to 0.  Both branches share the same A, so
    the circuit is Ry(beta) on the flag, A (plus X on the good qubit for
    the tilde categories 3-4), a controlled Z from the flag onto the good
    qubit (anti-controlled for categories 2 and 4), then Ry(-beta).
    """
    if category not in (1, 2, 3, 4):
        raise ValueError("category must be 1..4")
    if not 0.0 <= beta <= math.pi / 2.0:
        raise ValueError("beta out of range")
    a = problem.a_circuit
    n = a.n_qubits
    good = problem.good_qubit
    flag = n
    qc = QuantumCircuit(n + 1, f"lcu{category}")
    qc.append("Ry", flag, beta)
    qc.extend(a.gates)
    if category in (3, 4):
        qc.append("X", good)
    anti = category in (2, 4)
    if anti:
        qc.append("X", flag)
    # controlled Z = H . CNOT . H on the good qubit
    qc.append("H", good).append("CNOT", (flag, good)).append("H", good)
    if anti:
        qc.append("X", flag)
    qc.append("Ry", flag, -beta)
    return qc, flag


def grover_operator_tilde(problem: QaeProblem) -> QuantumCircuit:
    """Grover operator of the complemented problem: built from
    A~ = (I (x) X) A, whose good-outcome angle is pi/2 - theta.

    Categories 3-4 of LCU QAE prepare states in the invariant plane of
    A~; amplitude amplification for those shots uses this operator (the
    plain Q acts on that plane by phases only and would rotate nothing).
    """
    a_tilde = problem.a_circuit.copy()
    a_tilde.append("X", problem.good_qubit)
    return grover_operator(QaeProblem(a_tilde, problem.good_qubit))


def lcu_likelihood(category: int, beta: float, m: int, theta: float) -> float:
    """P(good qubit = 1) after m amplification steps on a post-selected
    LCU preparation.

    Categories 1-2 live in the invariant plane of A and are amplified with
    Q (rotation by 2 theta per step); categories 3-4 live in the invariant
    plane of A~ and are amplified with the tilde operator (rotation by
    2 theta~ per step, theta~ = pi/2 - theta).  Closed forms are pinned to
    state-vector simulation of the composed circuits (the defining oracle).
    """
    if category not in (1, 2, 3, 4):
        raise ValueError("category must be 1..4")
    if m < 0:
        raise ValueError("m must be >= 0")
    f = math.cos(beta)
    if category in (1, 2):
        sign = 1.0 if category == 1 else -1.0
        c = math.cos(theta)
        s = sign * f * math.sin(theta)
        rot = 2.0 * m * theta
    else:
        sign = 1.0 if category == 3 else -1.0
        theta_t = math.pi / 2.0 - theta
        c = math.cos(theta_t)
        s = sign * f * math.sin(theta_t)
        rot = 2.0 * m * theta_t
    n2 = c * c + s * s
    rot_s = s * math.cos(rot) + c * math.sin(rot)
    return float(rot_s * rot_s / n2)


def _lcu_shot_plan(
    q: int,
    p_max_fail: float,
    shots_m0: int = DEFAULT_SHOTS_M0,
    shots_other: int = DEFAULT_SHOTS_OTHER,
):
    """Deterministic (m, category, beta, count) groups for a budget.

    m = 0 shots are plain A preparations.  For m >= 1 the shots cycle
    through the four categories and, within each category, through eleven
    equally spaced beta values in [0, asin(sqrt(p_max_fail))].
    """
    beta_grid = np.linspace(0.0, math.asin(math.sqrt(p_max_fail)), 11)
    groups: dict[tuple, int] = {}
    for m, shots in eis_schedule(q, shots_m0, shots_other):
        if m == 0:
            groups[(0, 0, 0.0)] = groups.get((0, 0, 0.0), 0) + shots
            continue
        for i in range(shots):
            cat = i % 4 + 1
            beta = float(beta_grid[(i // 4) % 11])
            key = (m, cat, beta)
            groups[key] = groups.get(key, 0) + 1
    return sorted(groups.items())


def _lcu_group_probs(groups, theta: float) -> np.ndarray:
    out = np.empty(len(groups))
    for i, ((m, cat, beta), _) in enumerate(groups):
        if cat == 0:
            out[i] = math.sin(theta) ** 2
        else:
            out[i] = lcu_likelihood(cat, beta, m, theta)
    return np.clip(out, 0.0, 1.0)


def _lcu_posterior_matrices(groups, grid: np.ndarray):
    """log P(1) and log P(0) for every group across the theta grid."""
    n_g = len(groups)
    p = np.empty((n_g, grid.size))
    c2m = {}
    for i, ((m, cat, beta), _) in enumerate(groups):
        if cat == 0:
            p[i] = np.sin(grid) ** 2
            continue
        f = math.cos(beta)
        if cat in (1, 2):
            sign = 1.0 if cat == 1 else -1.0
            c = np.cos(grid)
            s = sign * f * np.sin(grid)
            key = (m, False)
        else:
            sign = 1.0 if cat == 3 else -1.0
            c = np.sin(grid)  # cos(pi/2 - grid)
            s = sign * f * np.cos(grid)
            key = (m, True)
        if key not in c2m:
            arg = 2 * m * ((math.pi / 2.0 - grid) if key[1] else grid)
            c2m[key] = (np.cos(arg), np.sin(arg))
        cm, sm = c2m[key]
        rot = s * cm + c * sm
        p[i] = rot * rot / (c * c + s * s)
    np.clip(p, 0.0, 1.0, out=p)
    eps = 1e-300
    return np.log(p + eps), np.log(1.0 - p + eps)


def _lcu_batch(
    a: float,
    q: int,
    n_rep: int,
    seed: int,
    p_max_fail: float = 0.5,
    grid_size: int = 10_001,
    with_uses: bool = False,
):
    """Vectorised LCU QAE repeats at one true amplitude."""
    theta = math.asin(math.sqrt(a))
    groups = _lcu_shot_plan(q, p_max_fail)
    counts = np.array([n for _, n in groups])
    probs = _lcu_group_probs(groups, theta)
    rng = np.random.default_rng(seed)
    hits = rng.binomial(counts[None, :], probs[None, :], size=(n_rep, len(groups)))
    grid = _theta_grid(grid_size)
    log1, log0 = _lcu_posterior_matrices(groups, grid)
    sin2 = np.sin(grid) ** 2
    estimates = np.empty(n_rep)
    chunk = max(1, int(2e8 // (grid.size * 8)))
    for start in range(0, n_rep, chunk):
        stop = min(n_rep, start + chunk)
        h = hits[start:stop].astype(np.float64)
        ll = h @ log1 + (counts - hits[start:stop]).astype(np.float64) @ log0
        ll -= ll.max(axis=1, keepdims=True)
        w = np.exp(ll)
        estimates[start:stop] = (w @ sin2) / w.sum(axis=1)
    if not with_uses:
        return estimates
    fail_p = np.array([math.sin(beta) ** 2 for (_, _, beta), _ in groups])
    totals = np.full(n_rep, float(q))
    for i, ((_, cat, beta), n) in enumerate(groups):
        if cat == 0 or fail_p[i] == 0.0:
            continue
        totals += rng.negative_binomial(n, 1.0 - fail_p[i], size=n_rep)
    return estimates, totals


def lcu_qae(
    problem: QaeProblem,
    q: int,
    p_max_fail: float = 0.5,
    seed: int = 0,
    grid_size: int = DEFAULT_POSTERIOR_GRID,
    shots_m0: int = DEFAULT_SHOTS_M0,
    shots_other: int = DEFAULT_SHOTS_OTHER,
) -> QaeResult:
    """LCU QAE: EIS schedule with per-shot category/beta variation, MMSE
    estimate from a dense grid posterior over theta.

    The budget counts uses inside successfully post-selected circuits;
    preparation failures are Bernoulli(sin^2 beta) draws costing one A use
    each (fail-fast), reported via ``uses_expected_total``.
    """
    return lcu_from_amplitude(
        amplitude(problem), q, p_max_fail, seed, grid_size, shots_m0, shots_other
    )


def lcu_from_amplitude(
    a: float,
    q: int,
    p_max_fail: float = 0.5,
    seed: int = 0,
    grid_size: int = DEFAULT_POSTERIOR_GRID,
    shots_m0: int = DEFAULT_SHOTS_M0,
    shots_other: int = DEFAULT_SHOTS_OTHER,
) -> QaeResult:
    if q < shots_m0:
        raise ValueError(f"budget {q} below one m=0 round ({shots_m0} shots)")
    theta = math.asin(math.sqrt(a))
    groups = _lcu_shot_plan(q, p_max_fail, shots_m0, shots_other)
    counts = np.array([n for _, n in groups])
    probs = _lcu_group_probs(groups, theta)
    rng = np.random.default_rng(seed)
    hits = rng.binomial(counts, probs)
    grid = _theta_grid(grid_size)
    log1, log0 = _lcu_posterior_matrices(groups, grid)
    ll = hits.astype(np.float64) @ log1 + (counts - hits).astype(np.float64) @ log0
    ll -= ll.max()
    w = np.exp(ll)
    a_hat = float((w @ (np.sin(grid) ** 2)) / w.sum())
    failures = 0
    for (m, cat, beta), n in groups:
        pf = math.sin(beta) ** 2
        if cat == 0 or pf == 0.0:
            continue
        failures += int(rng.negative_binomial(n, 1.0 - pf))
    return QaeResult(
        min(1.0, max(0.0, a_hat)),
        q,
        2,
        C_QAE_REFERENCE["LCU"],
        uses_expected_total=float(q + failures),
    )


# --------------------------------------------------------------------------
# dispatch


def run_qae(problem: QaeProblem, config: QaeConfig) -> QaeResult:
    if config.kind == "PAM":
        return pam(problem, config.q, config.seed)
    if config.kind == "MLQAE":
        return mlqae(
            problem,
            config.q,
            config.seed,
            grid_size=min(config.posterior_grid_size, 20_001),
            shots_m0=config.shots_m0,
            shots_other=config.shots_other,
        )
    if config.kind == "IQAE":
        return iqae(problem, config.q, config.seed)
    return lcu_qae(
        problem,
        config.q,
        config.p_max_fail,
        config.seed,
        grid_size=config.posterior_grid_size,
        shots_m0=config.shots_m0,
        shots_other=config.shots_other,
    )
