"""Nodal prices, per-hour records and the study-level aggregates behind the figures."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .engine import LpSolution, TopologyState, fix_binaries, solve_lp
from .formulation import OpfProblem, OpfVariant
from .grid import CATEGORIES, ExpandedNetwork

THERMAL_THRESHOLD_MWH = 1e-3
DISPATCH_SNAP_MW = 1e-7
VARIANT_ORDER = (OpfVariant.FIXED.value, OpfVariant.OTC.value, OpfVariant.COPPER_PLATE.value)


class PricingError(RuntimeError):
    """The fixed-topology LP used for pricing did not solve to optimality."""


@dataclass
class NodalPrices:
    prices: np.ndarray  # $/MWh, one per balance row (node)
    degenerate: bool
    solution: LpSolution


def _fixed(problem: OpfProblem, topology: TopologyState | Sequence[float] | None) -> OpfProblem:
    if problem.free_binary_cols.size:
        if topology is None:
            raise ValueError("problem has free binaries; a topology is required to price it")
        return fix_binaries(problem, topology)
    return problem


def compute_lmps(problem: OpfProblem, topology: TopologyState | Sequence[float] | None = None) -> NodalPrices:
    """Balance-row duals of the fixed-topology LP, in $/MWh.

    A positive price means serving one more MWh at that node raises cost.
    """
    lp = _fixed(problem, topology)
    sol = solve_lp(lp)
    if not sol.optimal:
        raise PricingError(f"pricing LP for hour {problem.hour} is {sol.status}")
    rows = lp.rows("balance")
    return NodalPrices(prices=sol.row_dual[rows] / lp.base_mva, degenerate=sol.degenerate, solution=sol)


def finite_difference_lmps(
    problem: OpfProblem,
    topology: TopologyState | Sequence[float] | None = None,
    eps_mw: float = 0.1,
    direction: int = 1,
) -> np.ndarray:
    """Price oracle that perturbs each node's demand by ``eps_mw`` and re-solves.

    ``direction=+1`` is the forward difference, ``-1`` the backward one; the
    two differ exactly when the dual is not unique.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    lp = _fixed(problem, topology)
    base = solve_lp(lp)
    if not base.optimal:
        raise PricingError(f"pricing LP for hour {problem.hour} is {base.status}")
    delta = direction * eps_mw / lp.base_mva
    shed_col = {ref: j for j, (kind, ref) in enumerate(lp.col_meta) if kind == "shed"}
    out = []
    for r in lp.rows("balance"):
        lo, hi = lp.row_lo.copy(), lp.row_hi.copy()
        lo[r] += delta
        hi[r] += delta
        # the node's shed bound tracks its demand; the single copper-plate row uses the first node's
        node = lp.row_meta[r][1]
        col_hi = lp.col_hi.copy()
        j = shed_col.get(node if node >= 0 else 0)
        if j is not None:
            col_hi[j] = max(col_hi[j] + delta, 0.0)
        sol = solve_lp(replace(lp, row_lo=lo, row_hi=hi, col_hi=col_hi))
        if not sol.optimal:
            raise PricingError(f"perturbed pricing LP for hour {problem.hour} is {sol.status}")
        out.append((sol.objective - base.objective) / (direction * eps_mw))
    return np.array(out)


def price_variance(lmp: Sequence[float], kind: str = "population") -> float:
    """Spread of nodal prices within one hour (``population`` or ``sample``)."""
    v = np.asarray(lmp, dtype=float)
    if v.size == 0:
        raise ValueError("price vector is empty")
    if kind == "population":
        return float(np.var(v))
    if kind == "sample":
        return float(np.var(v, ddof=1)) if v.size > 1 else 0.0
    raise ValueError(f"unknown variance kind {kind!r}")


# ---------------------------------------------------------------------------
# per-hour records


@dataclass
class HourRecord:
    hour: int
    scale: float
    variant: str
    status: str
    objective: float = math.nan  # $, including wear-and-tear
    production_cost: float = math.nan  # $, generation plus load shedding
    shed_mwh: float = 0.0
    topology: str | None = None  # TopologyState.key(); None when the variant has no actions
    n_open: int = 0
    dispatch_mwh: dict[str, float] = field(default_factory=dict)
    wind_available_mwh: float = 0.0
    wind_dispatched_mwh: float = 0.0
    lmp: list[float] | None = None
    lmp_degenerate: bool = False
    thermal_active: bool = False
    explored_nodes: int = 0
    relative_gap: float = 0.0
    milp_status: str | None = None

    @property
    def solved(self) -> bool:
        return self.status == "optimal"

    @property
    def curtailment_mwh(self) -> float:
        return max(self.wind_available_mwh - self.wind_dispatched_mwh, 0.0)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "HourRecord":
        return cls(**data)


def dispatch_summary(expanded: ExpandedNetwork, problem: OpfProblem, x: np.ndarray) -> dict:
    """MWh per generator category, shed, and wind availability for one solved hour."""
    net = expanded.network
    base = problem.base_mva
    gen_cols = problem.cols("gen")
    gen_mw = x[gen_cols] * base
    by_cat = {c: 0.0 for c in CATEGORIES}
    for g, mw in zip(net.generators, gen_mw):
        by_cat[g.category] = by_cat.get(g.category, 0.0) + float(mw)
    wind_available = wind_dispatched = 0.0
    for g, mw in zip(net.generators, gen_mw):
        if g.category == "wind":
            cap = g.capacity_at(problem.hour)
            wind_available += cap
            # snap per-unit round-off so a unit at its limit shows no curtailment
            wind_dispatched += cap if abs(cap - mw) <= DISPATCH_SNAP_MW else min(float(mw), cap)
    return {
        "dispatch_mwh": by_cat,
        "shed_mwh": float(x[problem.cols("shed")].sum() * base),
        "wind_available_mwh": float(wind_available),
        "wind_dispatched_mwh": float(wind_dispatched),
        "production_cost": float(problem.cost[gen_cols] @ x[gen_cols] + problem.cost[problem.cols("shed")] @ x[problem.cols("shed")]),
    }


def make_record(
    expanded: ExpandedNetwork,
    problem: OpfProblem,
    solution: LpSolution,
    *,
    scale: float,
    variant: str,
    topology: TopologyState | None = None,
    prices: NodalPrices | None = None,
    explored_nodes: int = 0,
    relative_gap: float = 0.0,
    milp_status: str | None = None,
) -> HourRecord:
    """HourRecord for a solved fixed-topology LP (``problem`` is that LP)."""
    if not solution.optimal:
        return HourRecord(hour=problem.hour, scale=scale, variant=variant, status=solution.status,
                          explored_nodes=explored_nodes, milp_status=milp_status)
    s = dispatch_summary(expanded, problem, solution.x)
    prod = s.pop("production_cost")
    return HourRecord(
        hour=problem.hour,
        scale=scale,
        variant=variant,
        status=solution.status,
        objective=float(solution.objective),
        production_cost=max(prod, 0.0),
        topology=topology.key() if topology is not None and topology.vector.size else None,
        n_open=topology.n_open if topology is not None else 0,
        lmp=None if prices is None else [float(p) for p in prices.prices],
        lmp_degenerate=bool(prices.degenerate) if prices is not None else False,
        thermal_active=s["dispatch_mwh"]["thermal"] > THERMAL_THRESHOLD_MWH,
        explored_nodes=explored_nodes,
        relative_gap=float(relative_gap),
        milp_status=milp_status,
        **s,
    )


# ---------------------------------------------------------------------------
# aggregates


def curtailment_on_thermal_hours(records: Iterable[HourRecord]) -> float:
    """Wind curtailment summed over solved hours that also dispatch thermal units."""
    return float(sum(r.curtailment_mwh for r in records if r.solved and r.thermal_active))


def hamming(a: str, b: str) -> int:
    return sum(x != y for x, y in zip(a, b) if x != "|")


@dataclass
class TopologyStatistics:
    changes: list[tuple[int, int]]  # (hour, Hamming distance to the previous solved hour)
    unique_count: int
    base_share: float

    @property
    def max_change(self) -> int:
        return max((c for _, c in self.changes), default=0)


def topology_statistics(records: Sequence[HourRecord]) -> TopologyStatistics:
    """Hour-to-hour switching, distinct topologies and the all-closed share.

    Records must be sorted by hour; unsolved hours are skipped.
    """
    solved = [r for r in records if r.solved]
    hours = [r.hour for r in solved]
    if hours != sorted(hours):
        raise ValueError("records must be sorted by hour")
    keys = [r.topology or "" for r in solved]
    changes = [(solved[i].hour, hamming(keys[i - 1], keys[i])) for i in range(1, len(solved))]
    base = sum(1 for r in solved if r.n_open == 0)
    return TopologyStatistics(
        changes=changes,
        unique_count=len(set(keys)),
        base_share=base / len(solved) if solved else math.nan,
    )


def cost_gaps(totals: Mapping[str, float]) -> dict[str, float]:
    """Network and topology-control gains relative to the fixed-topology total."""
    fixed = totals[OpfVariant.FIXED.value]
    otc = totals[OpfVariant.OTC.value]
    cp = totals[OpfVariant.COPPER_PLATE.value]
    gap_network = fixed - cp
    gap_otc = fixed - otc
    share = (lambda g: g / fixed) if fixed else (lambda g: 0.0)
    return {
        "gap_network": gap_network,
        "gap_otc": gap_otc,
        "gap_network_share": share(gap_network),
        "gap_otc_share": share(gap_otc),
    }


def mean_price_variance(records: Iterable[HourRecord], kind: str = "population") -> float:
    vals = [price_variance(r.lmp, kind) for r in records if r.solved and r.lmp]
    return float(np.mean(vals)) if vals else math.nan


def summarize_variant(records: Sequence[HourRecord], variance_kind: str = "population") -> dict:
    solved = [r for r in records if r.solved]
    out = {
        "hours": len(records),
        "failed_hours": len(records) - len(solved),
        "production_cost": float(sum(r.production_cost for r in solved)),
        "objective": float(sum(r.objective for r in solved)),
        "shed_mwh": float(sum(r.shed_mwh for r in solved)),
        "curtailment_thermal_hours_mwh": curtailment_on_thermal_hours(solved),
        "mean_price_variance": mean_price_variance(solved, variance_kind),
        "degenerate_price_hours": sum(1 for r in solved if r.lmp_degenerate),
        "node_limited_hours": sum(1 for r in solved if r.milp_status == "node_limit"),
        "max_relative_gap": float(max((r.relative_gap for r in solved), default=0.0)),
    }
    if any(r.topology is not None for r in solved):
        stats = topology_statistics(solved)
        out.update(
            unique_topologies=stats.unique_count,
            base_topology_share=stats.base_share,
            max_topology_change=stats.max_change,
            topology_changes=[list(c) for c in stats.changes],
        )
    return out


def aggregate(records: Sequence[HourRecord], variance_kind: str = "population") -> dict:
    """Per-scenario aggregates; a pure function of ``records``."""
    by_scale: dict[float, dict[str, list[HourRecord]]] = {}
    for r in sorted(records, key=lambda r: (r.scale, VARIANT_ORDER.index(r.variant), r.hour)):
        by_scale.setdefault(r.scale, {}).setdefault(r.variant, []).append(r)
    scenarios = []
    for scale, variants in by_scale.items():
        entry = {"scale": scale, "variants": {v: summarize_variant(rs, variance_kind) for v, rs in variants.items()}}
        # gaps need every variant over the same hours, counting only hours all of them solved
        if all(v in variants for v in VARIANT_ORDER):
            common = set.intersection(*({r.hour for r in variants[v] if r.solved} for v in VARIANT_ORDER))
            totals = {v: float(sum(r.production_cost for r in variants[v] if r.hour in common)) for v in VARIANT_ORDER}
            entry["cost_totals"] = totals
            entry["cost_gaps"] = cost_gaps(totals)
        scenarios.append(entry)
    return {"scenarios": scenarios}


@dataclass
class StudyReport:
    config: dict
    records: list[HourRecord]
    variance_kind: str = "population"

    @property
    def aggregates(self) -> dict:
        return aggregate(self.records, self.variance_kind)

    def to_dict(self) -> dict:
        failed = sum(1 for r in self.records if not r.solved)
        return {
            "config": self.config,
            "hour_records": len(self.records),
            "failed_hours": failed,
            "aggregates": self.aggregates,
        }


# ---------------------------------------------------------------------------
# figure tables

FIGURE_HEADERS = {
    "fig3_unique": ["scale", "unique_topologies", "base_topology_share", "max_topology_change", "hours"],
    "fig4_costs": ["scale", "fixed_cost", "otc_cost", "copper_plate_cost", "gap_network", "gap_otc",
                   "gap_network_share", "gap_otc_share"],
    "fig5_curtailment": ["scale", "fixed_mwh", "otc_mwh", "copper_plate_mwh"],
    "fig6_variance": ["scale", "fixed", "otc", "copper_plate"],
}


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def figure_tables(aggregates: Mapping) -> dict[str, list[list[str]]]:
    """Rows (header first) of the five figure tables, keyed by file stem.

    ``fig2_changes`` is wide: one row per hour, one column of hour-to-hour
    topology changes per scenario.  The others have one row per scenario.
    """
    scen = aggregates["scenarios"]
    scales = [s["scale"] for s in scen]
    otc = [s["variants"].get(OpfVariant.OTC.value, {}) for s in scen]

    changes: dict[int, dict[float, int]] = {}
    for scale, o in zip(scales, otc):
        for hour, c in o.get("topology_changes", []):
            changes.setdefault(hour, {})[scale] = c
    fig2 = [["hour"] + [f"scale_{s!r}" for s in scales]]
    for hour in sorted(changes):
        fig2.append([str(hour)] + [_fmt(changes[hour].get(s)) for s in scales])

    tables = {"fig2_changes": fig2}
    tables["fig3_unique"] = [FIGURE_HEADERS["fig3_unique"]] + [
        [_fmt(s), _fmt(o.get("unique_topologies")), _fmt(o.get("base_topology_share")),
         _fmt(o.get("max_topology_change")), _fmt(o.get("hours"))]
        for s, o in zip(scales, otc)
    ]
    rows4 = [FIGURE_HEADERS["fig4_costs"]]
    for s in scen:
        t, g = s.get("cost_totals", {}), s.get("cost_gaps", {})
        rows4.append([_fmt(s["scale"])] + [_fmt(t.get(v)) for v in VARIANT_ORDER]
                     + [_fmt(g.get(k)) for k in ("gap_network", "gap_otc", "gap_network_share", "gap_otc_share")])
    tables["fig4_costs"] = rows4

    def per_variant(key: str) -> list[list[str]]:
        return [[_fmt(s["scale"])] + [_fmt(s["variants"].get(v, {}).get(key)) for v in VARIANT_ORDER] for s in scen]

    tables["fig5_curtailment"] = [FIGURE_HEADERS["fig5_curtailment"]] + per_variant("curtailment_thermal_hours_mwh")
    tables["fig6_variance"] = [FIGURE_HEADERS["fig6_variance"]] + per_variant("mean_price_variance")
    return tables


def write_figure_tables(aggregates: Mapping, directory: str | Path) -> list[Path]:
    out_dir = Path(directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for stem, rows in figure_tables(aggregates).items():
        path = out_dir / f"{stem}.csv"
        with open(path, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
        paths.append(path)
    return paths
