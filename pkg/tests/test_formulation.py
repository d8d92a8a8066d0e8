import math
from dataclasses import replace

import highspy
import numpy as np
import pytest

from conftest import disjunction_violations
from topoflex.engine import fix_binaries, primal_residual, solve_lp
from topoflex.formulation import (
    BigMConfig,
    CostConfig,
    OpfVariant,
    add_action_cap,
    add_connectivity,
    build_problem,
    compute_big_m,
    plain_angle_distances,
    write_lp,
)
from topoflex.grid import BREAKER, Branch, expand_topology, with_breakers

KNOWN_COLS = {"theta", "gen", "flow", "shed", "breaker", "branch_status", "conn_flow"}
KNOWN_ROWS = {"balance", "flowdef", "switch_flowdef", "switch_limit", "breaker_angle", "breaker_flow",
              "conn_balance", "conn_limit", "action_cap"}


def test_big_m_angle_default(three_bus):
    ex = expand_topology(with_breakers(three_bus, [1], ["AB"]))
    bm = compute_big_m(ex, math.pi)
    assert bm.breaker_angle == (2 * math.pi,)
    assert bm.violations(ex) == []


def test_big_m_breaker_flow_sums_attached(three_bus):
    branches = (
        three_bus.branches[0],
        replace(three_bus.branches[1], capacity=100.0),
        three_bus.branches[2],
        Branch(id="AC2", from_bus=1, to_bus=3, susceptance=1.0, capacity=100.0),
    )
    net = with_breakers(replace(three_bus, branches=branches), [1])
    ex = expand_topology(net)
    assert compute_big_m(ex).breaker_flow == (250.0,)


def test_big_m_switchable_formula(three_bus_expanded):
    bm = compute_big_m(three_bus_expanded, math.pi)
    assert bm.branch == pytest.approx((2 * math.pi * 100,))


def test_big_m_path_tightening_is_valid(rts_wide):
    ex = expand_topology(rts_wide)
    loose = compute_big_m(ex, math.pi)
    tight = compute_big_m(ex, math.pi, path_margin=0.05)
    assert tight.violations(ex) == []
    assert all(t <= l for t, l in zip(tight.breaker_angle, loose.breaker_angle))
    assert all(t <= l for t, l in zip(tight.branch, loose.branch))
    # without the path declaration the tightened constants fail the plain-theta check
    assert replace(tight, path_margin=None).violations(ex)


def test_plain_distance_three_bus(three_bus_expanded):
    d = plain_angle_distances(three_bus_expanded)
    # A-B is switchable; A-C-B costs 1.5 + 1.5 rad at rating
    assert d[0, 1] == pytest.approx(3.0)


def test_big_m_rejects_bad_theta(three_bus_expanded):
    with pytest.raises(ValueError):
        compute_big_m(three_bus_expanded, 0.0)


def test_copper_plate_shape(rts):
    p = build_problem(expand_topology(rts), 0, OpfVariant.COPPER_PLATE)
    assert p.rows("balance").size == 1
    assert p.cols("theta").size == 0 and p.cols("flow").size == 0
    assert p.binary_cols.size == 0


def test_otc_rts_has_30_binaries(rts_wide):
    p = build_problem(expand_topology(rts_wide), 100, OpfVariant.OTC)
    assert p.binary_cols.size == 30
    assert p.cols("breaker").size == 18 and p.cols("branch_status").size == 12


def test_fixed_three_bus_counts(three_bus_fixed):
    p = build_problem(expand_topology(three_bus_fixed), 0, "fixed")
    assert p.rows("balance").size == 3
    assert p.rows("flowdef").size == 3
    assert p.binary_cols.size == 0


def test_fixed_from_switchable_network_merges_rows(three_bus_expanded):
    p = build_problem(three_bus_expanded, 0, "fixed")
    assert p.rows("balance").size == 3
    assert p.rows("flowdef").size + p.rows("switch_flowdef").size == 3
    assert p.binary_cols.size == 0
    assert solve_lp(p).objective == pytest.approx(3000.0)


def test_fixed_equals_otc_all_closed(rts_wide):
    ex = expand_topology(rts_wide)
    otc = build_problem(ex, 4000, "otc")
    fixed = build_problem(ex, 4000, "fixed")
    sub = fix_binaries(otc, np.ones(30))
    assert (sub.A != fixed.A).nnz == 0
    for a in ("row_lo", "row_hi", "col_lo", "col_hi", "cost"):
        assert np.array_equal(getattr(sub, a), getattr(fixed, a))
    assert sub.offset == fixed.offset == 0.0


def test_objective_terms(three_bus_expanded):
    otc = build_problem(three_bus_expanded, 0, "otc", CostConfig(wear_and_tear=7.0))
    assert otc.offset == 7.0
    assert otc.cost[otc.binary_cols].tolist() == [-7.0]
    gens = otc.cols("gen")
    assert otc.cost[gens].tolist() == [1000.0, 5000.0]  # $/MWh * base
    assert np.all(otc.cost[otc.cols("shed")] == 10_000 * 100)


def test_renewable_cost_zero(rts):
    p = build_problem(expand_topology(rts), 10, "otc")
    for (kind, g), c in zip(p.col_meta, p.cost):
        if kind == "gen" and rts.generators[g].is_renewable:
            assert c == 0


def test_no_orphans(rts_wide):
    ex = expand_topology(rts_wide)
    p = add_connectivity(build_problem(ex, 10, "otc"), ex)
    assert {k for k, _ in p.col_meta} <= KNOWN_COLS
    assert {k for k, _ in p.row_meta} <= KNOWN_ROWS
    assert p.rows("balance").size == ex.n_nodes
    assert sorted(r for k, r in p.row_meta if k == "balance") == list(range(ex.n_nodes))
    assert [p.col_meta[j][1] for j in p.binary_cols] == list(range(30))
    assert np.all(np.diff(p.A.tocsc().indptr) > 0)  # every column appears in some row


def test_reference_angle_and_bounds(three_bus_expanded):
    p = build_problem(three_bus_expanded, 0, "otc")
    th = p.cols("theta")
    assert p.col_lo[th[0]] == p.col_hi[th[0]] == 0
    assert np.all(p.col_hi[th[1:]] == math.pi)
    shed = p.cols("shed")
    assert p.col_hi[shed].tolist() == [0.0, 1.0, 0.0]


def test_bad_hour(three_bus_expanded):
    with pytest.raises(ValueError, match="hour 5"):
        build_problem(three_bus_expanded, 5, "fixed")


def test_bad_big_m(three_bus_expanded):
    bm = BigMConfig(theta_bound=math.pi, breaker_angle=(), breaker_flow=(), branch=(1.0,))
    with pytest.raises(ValueError, match="M_K"):
        build_problem(three_bus_expanded, 0, "otc", bigm_config=bm)


def test_connectivity_warns_on_fixed(three_bus_expanded):
    p = build_problem(three_bus_expanded, 0, "fixed")
    with pytest.warns(UserWarning):
        assert add_connectivity(p, three_bus_expanded) is p


def test_connectivity_all_closed_feasible(rts_wide):
    ex = expand_topology(rts_wide)
    p = add_connectivity(build_problem(ex, 50, "otc"), ex)
    assert solve_lp(fix_binaries(p, np.ones(30))).optimal


def test_connectivity_rejects_isolated_half(three_bus):
    # split bus 2 and open both the breaker and AB: half B of bus 2 would be cut off
    net = with_breakers(three_bus, [2], ["AB", "CB"])
    ex = expand_topology(net)
    p = add_connectivity(build_problem(ex, 0, "otc"), ex)
    half_b_edges = [i for i, e in enumerate(ex.edges) if e.kind != BREAKER and ex.n_nodes - 1 in (e.from_node, e.to_node)]
    assert len(half_b_edges) == 1
    status = np.ones(p.binary_cols.size)
    status[0] = 0  # breaker
    status[1 + [ex.edges[i].element for i in ex.action_edges[1:]].index(ex.edges[half_b_edges[0]].element)] = 0
    assert solve_lp(fix_binaries(p, status)).status == "infeasible"


def test_connectivity_fixture_open_ab(three_bus_expanded):
    p = add_connectivity(build_problem(three_bus_expanded, 0, "otc"), three_bus_expanded)
    assert solve_lp(fix_binaries(p, [0])).optimal


def test_open_ab_forces_zero_flow(three_bus_expanded):
    p = fix_binaries(build_problem(three_bus_expanded, 0, "otc"), [0])
    ab = next(j for j, m in enumerate(p.col_meta) if m == ("flow", 0))
    rows = [i for i, m in enumerate(p.row_meta) if m == ("switch_limit", 0)]
    assert rows
    for r in rows:
        row = p.A.getrow(r)
        assert row.indices.tolist() == [ab]
        assert p.row_lo[r] == 0.0 and p.row_hi[r] == 0.0
    assert solve_lp(p).x[ab] == 0.0


def test_action_cap(three_bus_expanded):
    p = add_action_cap(build_problem(three_bus_expanded, 0, "otc"), 0)
    assert solve_lp(fix_binaries(p, [0])).status == "infeasible"
    assert solve_lp(fix_binaries(p, [1])).optimal


@pytest.mark.parametrize("seed", range(8))
def test_disjunctions_on_random_topologies(rts_wide, seed):
    ex = expand_topology(rts_wide)
    rng = np.random.default_rng(seed)
    bm = compute_big_m(ex, math.pi, path_margin=0.05)
    hour = int(rng.integers(0, 8760))
    p = build_problem(ex, hour, "otc", bigm_config=bm)
    status = (rng.random(30) > 0.3).astype(float)
    lp = fix_binaries(p, status)
    sol = solve_lp(lp)
    assert sol.optimal
    assert primal_residual(lp, sol.x) <= 1e-6
    assert disjunction_violations(ex, lp, sol.x, bm) == []


def test_write_lp_round_trip(tmp_path, three_bus_expanded, rts):
    for ex, hour in ((three_bus_expanded, 0), (expand_topology(rts), 4321)):
        p = add_connectivity(build_problem(ex, hour, "otc"), ex)
        lp = fix_binaries(p, np.ones(p.binary_cols.size))
        path = tmp_path / "p.lp"
        write_lp(lp, path)
        text = path.read_text()
        assert text.startswith("\\ variant=otc") and "Subject To" in text and text.rstrip().endswith("End")
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        assert h.readModel(str(path)) == highspy.HighsStatus.kOk
        h.run()
        assert h.getModelStatus() == highspy.HighsModelStatus.kOptimal
        # the file's objective omits the constant, which travels in the header comment
        assert h.getInfo().objective_function_value + lp.offset == pytest.approx(solve_lp(lp).objective, rel=1e-9)


def test_write_lp_declares_binaries(tmp_path, three_bus_expanded):
    p = build_problem(three_bus_expanded, 0, "otc")
    write_lp(p, tmp_path / "m.lp")
    text = (tmp_path / "m.lp").read_text()
    assert "Binaries\n branch_status_0_" in text
