import math

import numpy as np
import pytest

from qmci.circuit import QuantumCircuit, ResourceBox
from qmci.distributions import discretize_pdf, exact_pmf_loader, gaussian_pdf, rescale
from qmci.fourier import quantity_series
from qmci.pbuilder import InstrumentSpec, build_instrument
from qmci.rebase import count_nisq, rebase_tk1_cnot
from qmci.resources import (
    FtSolution,
    QmciPlan,
    build_plan,
    ft_constraint,
    ft_optimize,
    ft_report,
    insert_resource_box,
    nisq_report,
)


def tiny_plan(schedules=None, n_toffoli=2, n_rot=4):
    a = QuantumCircuit(3, "a")
    g = QuantumCircuit(3, "q")
    for i in range(n_rot):
        a.append("Ry", i % 3, 0.1 * (i + 1))
        g.append("Ry", i % 3, 0.2 * (i + 1))
    for _ in range(n_toffoli):
        g.append("Toffoli", (0, 1, 2))
    g.append("CNOT", (0, 1))
    return QmciPlan(
        a_circuit=a,
        grover=g,
        schedules=schedules or [[(0, 10), (1, 5)]],
        q_total=sum(s * (2 * m + 1) for sched in (schedules or [[(0, 10), (1, 5)]]) for m, s in sched),
        quantity="Mean",
        c_f=1.68,
        c_qae=8.02,
        quantity_range=1.0,
    )


def test_empty_plan_reports_zero():
    plan = QmciPlan(QuantumCircuit(1), QuantumCircuit(1), [[(0, 1)]], 1,
                    "Mean", 1.0, 1.0, 1.0)
    rep = nisq_report(plan)
    assert all(v == 0 for v in rep.totals.values())


def test_two_copies_double_totals():
    sched = [[(0, 10), (2, 4)]]
    single = nisq_report(tiny_plan(schedules=sched))
    double = nisq_report(tiny_plan(schedules=sched * 2))
    for k in single.totals:
        assert double.totals[k] == 2 * single.totals[k]
    assert double.largest == single.largest


def test_nisq_totals_match_hand_count():
    plan = tiny_plan(schedules=[[(0, 3), (2, 1)]])
    a_counts = count_nisq(rebase_tk1_cnot(plan.a_circuit))
    q_counts = count_nisq(rebase_tk1_cnot(plan.grover))
    rep = nisq_report(plan)
    expect = 3 * a_counts.total_gates + 1 * (a_counts.total_gates + 2 * q_counts.total_gates)
    assert rep.totals["total_gates"] == expect
    assert rep.largest["total_gates"] == a_counts.total_gates + 2 * q_counts.total_gates


def test_ft_optimize_eps_to_zero_limit():
    # with a tiny synthesis budget term the optimal q approaches the pure
    # QAE expression c_f c_qae range / rmse
    plan = tiny_plan(n_rot=1)
    mse = 1e-4
    sol = ft_optimize(plan, mse)
    q_pure = plan.c_f * plan.c_qae * plan.quantity_range / math.sqrt(mse)
    assert sol.q >= q_pure
    assert sol.q <= q_pure * 1.2


def test_ft_optimize_constraint_satisfied():
    plan = tiny_plan()
    mse = 1e-4
    sol = ft_optimize(plan, mse)
    got = ft_constraint(plan, sol.q, sol.epsilon, mse)
    assert got <= mse * (1 + 1e-6)


def test_ft_objective_linear_in_exact_t():
    # doubling the exact-T content adds q/2 * n_T to the objective
    from qmci.rebase import count_ft_content, lower_to_rotations_clifford_t
    from qmci.resources import ft_objective

    p1 = tiny_plan(n_toffoli=2)
    p2 = tiny_plan(n_toffoli=4)
    n_t1 = count_ft_content(lower_to_rotations_clifford_t(p1.grover)).t_count_exact
    n_t2 = count_ft_content(lower_to_rotations_clifford_t(p2.grover)).t_count_exact
    q, eps = 100.0, 1e-6
    assert ft_objective(p2, q, eps) - ft_objective(p1, q, eps) == pytest.approx(
        q / 2.0 * (n_t2 - n_t1)
    )


def test_ft_optimize_matches_grid_search():
    rng = np.random.default_rng(3)
    for _ in range(5):
        plan = tiny_plan(
            n_toffoli=int(rng.integers(1, 5)), n_rot=int(rng.integers(2, 8))
        )
        plan.c_f = float(rng.uniform(1.0, 3.0))
        plan.c_qae = float(rng.uniform(5.0, 15.0))
        plan.quantity_range = float(rng.uniform(0.5, 2.0))
        mse = float(10.0 ** rng.uniform(-6, -3))
        sol = ft_optimize(plan, mse)
        from qmci.resources import ft_objective

        mine = ft_objective(plan, sol.q, sol.epsilon)
        qs = np.logspace(
            math.log10(plan.c_f * plan.c_qae * plan.quantity_range / math.sqrt(mse)),
            math.log10(plan.c_f * plan.c_qae * plan.quantity_range / math.sqrt(mse)) + 4,
            200,
        )
        eps = np.logspace(-16, math.log10(0.5), 200)
        best = None
        for qv in qs:
            for ev in eps:
                if ft_constraint(plan, qv, ev, mse) <= mse:
                    obj = ft_objective(plan, qv, ev)
                    if best is None or obj < best:
                        best = obj
        assert best is not None
        assert mine <= best * 1.01


def test_ft_tight_never_larger():
    plan = tiny_plan()
    mse = 1e-4
    loose = ft_optimize(plan, mse, tight=False)
    tight = ft_optimize(plan, mse, tight=True)
    rep_l = ft_report(plan, loose)
    rep_t = ft_report(plan, tight)
    assert rep_t.totals["t_count"] <= rep_l.totals["t_count"]


def test_ft_monotone_in_target():
    plan = tiny_plan()
    s1 = ft_optimize(plan, 1e-3)
    s2 = ft_optimize(plan, 1e-5)
    from qmci.resources import ft_objective

    assert ft_objective(plan, s2.q, s2.epsilon) >= ft_objective(plan, s1.q, s1.epsilon)


def test_ft_report_zero_rotation_circuit_independent_of_eps():
    a = QuantumCircuit(3)
    g = QuantumCircuit(3).append("Toffoli", (0, 1, 2))
    plan = QmciPlan(a, g, [[(1, 2)]], 6, "Mean", 1.0, 1.0, 1.0)
    r1 = ft_report(plan, FtSolution(q=6, epsilon=1e-3))
    r2 = ft_report(plan, FtSolution(q=6, epsilon=1e-9))
    assert r1.totals["t_count"] == r2.totals["t_count"] == 2 * 7


def test_ft_report_halving_eps_adds_three_per_rotation():
    a = QuantumCircuit(1).append("Ry", 0, 0.3)
    g = QuantumCircuit(1).append("Ry", 0, 0.6)
    plan = QmciPlan(a, g, [[(1, 1)]], 3, "Mean", 1.0, 1.0, 1.0)
    eps = 2.0**-20
    t1 = ft_report(plan, FtSolution(q=3, epsilon=eps)).totals["t_count"]
    t2 = ft_report(plan, FtSolution(q=3, epsilon=eps / 2)).totals["t_count"]
    assert t2 - t1 == 3 * 2  # two rotations in the A + Q circuit at m = 1


def test_ft_solution_totals_sum_per_circuit():
    plan = tiny_plan(schedules=[[(0, 4), (1, 2)], [(0, 3)]])
    rep = ft_report(plan, FtSolution(q=plan.q_total, epsilon=1e-4))
    total = sum(tc * shots for (tc, td, nq, shots) in rep.solution.per_circuit)
    assert rep.solution.t_count_total == total == rep.totals["t_count"]


def test_resource_box_empty_no_change():
    qc = QuantumCircuit(2).append("CNOT", (0, 1)).append("TK1", 0, 1, 2, 3)
    boxed = insert_resource_box(qc, ResourceBox())
    assert count_nisq(boxed) == count_nisq(qc)


def test_resource_box_adds_cnots():
    qc = QuantumCircuit(2).append("CNOT", (0, 1))
    boxed = insert_resource_box(qc, ResourceBox(n_qubits=2, gate_counts={"CNOT": 100}))
    assert count_nisq(boxed).cnot_count == 101


def test_resource_box_replaces_explicit_adder():
    from qmci.pbuilder import BinaryOpSpec, apply_binary_op
    from conftest import uniform_dc

    dc = uniform_dc([2, 2], [(0, 1.0), (0, 1.0)])
    out = apply_binary_op(dc, BinaryOpSpec("Sum", 0, 1))
    adder = QuantumCircuit(out.circuit.n_qubits)
    adder.gates = out.circuit.gates[len(dc.circuit.gates):]
    counts = count_nisq(rebase_tk1_cnot(adder))
    box = ResourceBox(
        n_qubits=adder.n_qubits,
        gate_counts={"CNOT": counts.cnot_count, "TK1": counts.tk1_count},
        total_depth=counts.total_depth,
        cnot_depth=counts.cnot_depth,
        tk1_depth=counts.tk1_depth,
    )
    base = rebase_tk1_cnot(dc.circuit.widened(out.circuit.n_qubits))
    boxed = insert_resource_box(base, box)
    full = count_nisq(rebase_tk1_cnot(out.circuit))
    got = count_nisq(boxed)
    assert got.cnot_count == full.cnot_count
    assert got.tk1_count == full.tk1_count
    assert got.total_gates == full.total_gates


def test_boxed_circuit_refuses_simulation():
    from qmci.simulator import simulate

    qc = insert_resource_box(QuantumCircuit(1), ResourceBox(gate_counts={"CNOT": 1}))
    with pytest.raises(ValueError):
        simulate(qc)


def test_plan_from_real_estimate_matches_allocation():
    delta = 1.0 / 31
    target = discretize_pdf(lambda x: gaussian_pdf(x, 0, 0.1), 5, -0.5, delta)
    dc = rescale(exact_pmf_loader(target), 0, -0.5, delta)
    spec = quantity_series("Mean", (dc.dims[0].x_l, dc.dims[0].x_u))
    plan = build_plan(dc, spec, 0, "MLQAE", q_total=2000)
    assert plan.q_total == 2000
    uses = sum(s * (2 * m + 1) for sched in plan.schedules for m, s in sched)
    assert uses == 2000
    assert plan.a_circuit.n_qubits == dc.circuit.n_qubits + 1


def test_plan_rejects_iqae():
    delta = 1.0 / 7
    target = discretize_pdf(lambda x: gaussian_pdf(x, 0, 0.3), 3, -0.5, delta)
    dc = rescale(exact_pmf_loader(target), 0, -0.5, delta)
    spec = quantity_series("Mean", (dc.dims[0].x_l, dc.dims[0].x_u))
    with pytest.raises(ValueError):
        build_plan(dc, spec, 0, "IQAE", q_total=100)


def test_benchmark_shape_monotonicity():
    unit_target = discretize_pdf(gaussian_pdf, 3, -5, 10.0 / 7)
    unit = rescale(exact_pmf_loader(unit_target), 0, -5.0, 10.0 / 7)

    def report(n_slices, payoff):
        spec = InstrumentSpec(
            "Barrier", space="return", n_slices=n_slices, total_volatility=0.1,
            strike_ratio=1.05, barrier_ratio=1.1, payoff_kind=payoff,
        )
        dc, cfgs = build_instrument(unit, spec)
        cfg = cfgs[0]
        if cfg.quantity == "BernoulliQubit":
            qs = quantity_series("BernoulliQubit", (0.0, 1.0))
            dim = 0
        else:
            pay = dc.dims[cfg.dimension]
            qs = quantity_series(cfg.quantity, cfg.support_window or (pay.x_l, pay.x_u))
            qs.support_window = cfg.support_window
            qs.x_star = cfg.x_star
            dim = cfg.dimension
        plan = build_plan(dc, qs, dim, "MLQAE", target_rmse=1e-2, condition=cfg.condition)
        return nisq_report(plan)

    r4v = report(4, "value")
    r4b = report(4, "binary")
    r8b = report(8, "binary")
    assert r8b.totals["total_gates"] > r4b.totals["total_gates"]
    assert r8b.n_qubits > r4b.n_qubits
    assert r4v.totals["total_gates"] > r4b.totals["total_gates"]
