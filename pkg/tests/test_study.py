import json
import math

import numpy as np
import pytest
from pydantic import ValidationError

from conftest import RTS_CONFIG, THREE_BUS
from topoflex.grid import Branch, Bus, Generator, Network, expand_topology, scale_wind
from topoflex.study import (
    DEFAULT_SCALES,
    StudyConfig,
    emit_plot_data,
    generate_scenarios,
    load_config,
    load_report,
    parse_hours,
    records_equal,
    run_study,
    select_controllable_buses,
    solve_hour,
)


@pytest.fixture
def fixture_config(tmp_path):
    return load_config(THREE_BUS / "study.yaml", {"out": str(tmp_path / "out")})


def rts_small(tmp_path, **over):
    base = {"out": str(tmp_path / "rts"), "hours": "4000..4001", "scales": [1.0, 3.0]}
    base.update(over)
    return load_config(RTS_CONFIG, base)


# -- config ------------------------------------------------------------------


def test_parse_hours():
    assert parse_hours("3..5") == [3, 4, 5]
    assert parse_hours("0..1,10..11") == [0, 1, 10, 11]
    assert parse_hours([4, "1..2"]) == [1, 2, 4]
    with pytest.raises(ValueError):
        parse_hours("5..3")
    with pytest.raises(ValueError):
        parse_hours("a..b")


def test_config_defaults():
    cfg = StudyConfig(dataset="x")
    assert cfg.hours == list(range(8760))
    assert cfg.scales == list(DEFAULT_SCALES)
    assert cfg.selection_threshold == 0.15
    assert cfg.relative_gap == 1e-4


@pytest.mark.parametrize("bad", [
    {"bogus": 1},
    {"scales": [-1.0]},
    {"selection_threshold": 1.5},
    {"hours": "9000..9001"},
    {"selection_months": [13]},
    {"variants": ["ac_opf"]},
])
def test_config_rejects(bad):
    with pytest.raises(ValidationError):
        StudyConfig.model_validate({"dataset": "x", **bad})


def test_config_relative_dataset(fixture_config):
    assert fixture_config.dataset == str(THREE_BUS.resolve())


def test_config_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "none.yaml")


# -- scenarios -----------------------------------------------------------------


def test_default_scenarios():
    sc = generate_scenarios()
    assert len(sc) == 12
    assert max(s for _, s in sc) == 3.0
    names = {n for n, _ in sc}
    assert {"50%", "75%", "100%", "150%", "200%", "300%"} <= names


def test_single_scenario(rts):
    cfg = StudyConfig(dataset="x", scales=[1.0])
    assert generate_scenarios(cfg) == [("100%", 1.0)]
    same = scale_wind(rts, 1.0)
    assert all(np.array_equal(a.capacity_profile, b.capacity_profile) for a, b in zip(rts.generators, same.generators))


# -- selection -----------------------------------------------------------------


def _selection_net():
    """Three buses where splitting bus 1 (half B keeps only L2's end) removes the congested 1-2 line.

    Loads of 100 MW congest L2, so the split pays off; at 40 MW nothing binds.
    """
    load = np.array([100.0, 40.0, 100.0, 100.0])
    months = np.array([1, 1, 7, 2])
    buses = (Bus(1, "1", True, np.zeros(4)), Bus(2, "1", False, load), Bus(3, "1", False, np.zeros(4)))
    branches = (Branch("L1", 1, 3, 1.0, 150.0), Branch("L2", 1, 2, 1.0, 50.0), Branch("L3", 3, 2, 1.0, 150.0))
    gens = (Generator("GA", 1, "thermal", 10.0, np.full(4, 100.0)), Generator("GC", 3, "thermal", 50.0, np.full(4, 100.0)))
    return Network(buses=buses, branches=branches, generators=gens, months=months)


@pytest.mark.parametrize("threshold, expected", [(0.0, [1]), (0.5, [1]), (2 / 3, []), (0.9, []), (1.0, [])])
def test_selection_thresholds(threshold, expected):
    cfg = StudyConfig(dataset="x", horizon=4, hours="0..3", selection_threshold=threshold)
    result = select_controllable_buses(cfg, _selection_net())
    assert result.hours == [0, 1, 2]  # January and July only
    assert result.open_share == pytest.approx({1: 2 / 3, 2: 0.0, 3: 0.0})
    assert result.buses == expected


def test_selection_threshold_zero_is_every_split_bus():
    cfg = StudyConfig(dataset="x", horizon=4, hours="0..3", selection_threshold=0.0)
    result = select_controllable_buses(cfg, _selection_net())
    assert set(result.buses) == {b for b, s in result.open_share.items() if s > 0}


def test_selection_order_invariant():
    cfg = StudyConfig(dataset="x", horizon=4, hours="0..3", selection_threshold=0.0)
    a = select_controllable_buses(cfg, _selection_net(), hours=[0, 1, 2])
    b = select_controllable_buses(cfg, _selection_net(), hours=[2, 0, 1])
    assert a == b


# -- the sweep -------------------------------------------------------------------


def test_fixture_study(fixture_config):
    report = run_study(fixture_config)
    totals = report.aggregates["scenarios"][0]["cost_totals"]
    assert totals["copper_plate"] <= totals["otc"] <= totals["fixed"]
    assert totals == pytest.approx({"fixed": 3000.0, "otc": 1000.0, "copper_plate": 1000.0})


def test_empty_variants(tmp_path):
    cfg = load_config(THREE_BUS / "study.yaml", {"out": str(tmp_path / "e"), "variants": []})
    report = run_study(cfg)
    assert report.records == []
    assert report.aggregates == {"scenarios": []}
    assert (tmp_path / "e" / "fig4_costs.csv").read_text().count("\n") == 1


def test_deterministic_reports(tmp_path):
    a = run_study(rts_small(tmp_path, out=str(tmp_path / "a")))
    b = run_study(rts_small(tmp_path, out=str(tmp_path / "b")))
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    for f in ("hours/scale_1.0.jsonl", "hours/scale_3.0.jsonl", "fig4_costs.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert records_equal(a.records, b.records)


def test_hour_independence(tmp_path):
    both = run_study(rts_small(tmp_path, out=str(tmp_path / "ab")))
    first = run_study(rts_small(tmp_path, out=str(tmp_path / "a"), hours="4000..4000"))
    second = run_study(rts_small(tmp_path, out=str(tmp_path / "b"), hours="4001..4001"))
    merged = sorted(first.records + second.records, key=lambda r: (r.scale, r.hour, r.variant))
    assert records_equal(both.records, merged)


def test_parallel_width_irrelevant(tmp_path):
    serial = run_study(rts_small(tmp_path, out=str(tmp_path / "s"), scales=[2.0], hours="4000..4003"))
    parallel = run_study(rts_small(tmp_path, out=str(tmp_path / "p"), scales=[2.0], hours="4000..4003", workers=2))
    assert records_equal(serial.records, parallel.records)


def test_checkpoint_resume(tmp_path, fixture_config):
    run_study(fixture_config)
    path = tmp_path / "out" / "hours" / "scale_1.0.jsonl"
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:2]) + "\n" + lines[2][:20])  # torn last line
    resumed = run_study(fixture_config)
    assert len(resumed.records) == 3
    assert {r.variant for r in resumed.records} == {"fixed", "otc", "copper_plate"}


def test_load_report_round_trip(tmp_path, fixture_config):
    report = run_study(fixture_config)
    again = load_report(fixture_config.out)
    assert records_equal(report.records, again.records)
    stored = json.loads((tmp_path / "out" / "report.json").read_text())
    assert json.loads(json.dumps(again.to_dict())) == stored


def test_emit_plot_data_counts(tmp_path):
    report = run_study(rts_small(tmp_path, hours="4000..4000"))
    paths = emit_plot_data(report, tmp_path / "figs")
    assert len(paths) == 5
    for p in paths:
        rows = p.read_text().splitlines()
        if p.name == "fig2_changes.csv":
            assert rows[0].count(",") == 2  # hour + one column per scenario
        else:
            assert len(rows) == 3


def test_failed_hours_recorded(fixture_config, monkeypatch):
    import topoflex.study as study

    def broken(problem, topology=None):
        raise study.PricingError("pricing LP for hour 0 is numerical_error")

    monkeypatch.setattr(study, "compute_lmps", broken)
    report = run_study(fixture_config)
    assert {r.status for r in report.records} == {"pricing_failed"}
    d = report.to_dict()
    assert d["failed_hours"] == 3
    assert d["aggregates"]["scenarios"][0]["variants"]["fixed"]["failed_hours"] == 1


def test_monotone_wind_value(rts):
    cfg = StudyConfig(dataset="x", variants=["copper_plate"])
    for hour in (30, 4000, 7000):
        costs = [solve_hour(expand_topology(scale_wind(rts, s)), hour, s, cfg)[0].production_cost
                 for s in (0.5, 1.0, 2.0, 3.0)]
        assert all(b <= a + 1e-9 for a, b in zip(costs, costs[1:]))


def test_wear_not_in_production_cost(fixture_config):
    report = run_study(fixture_config)
    otc = next(r for r in report.records if r.variant == "otc")
    assert otc.objective - otc.production_cost == pytest.approx(10.0 * otc.n_open)
    assert math.isclose(otc.production_cost, 1000.0)


def test_otc_prices_ignore_connectivity_block(rts, rts_config):
    from topoflex.engine import fix_binaries
    from topoflex.formulation import add_connectivity, build_problem, compute_big_m
    from topoflex.metrics import compute_lmps

    ex = expand_topology(scale_wind(rts, 3.0))
    otc = next(r for r in solve_hour(ex, 4600, 3.0, rts_config) if r.variant == "otc")
    bm = compute_big_m(ex, rts_config.theta_bound, rts_config.big_m_path_margin)
    base = build_problem(ex, 4600, "otc", rts_config.cost, bm)
    vec = [int(c) for c in otc.topology.replace("|", "")]
    with_conn = compute_lmps(fix_binaries(add_connectivity(base, ex), vec))
    assert otc.lmp == pytest.approx(with_conn.prices[list(ex.demand_node)].tolist(), abs=1e-9)
    assert with_conn.degenerate and not otc.lmp_degenerate
