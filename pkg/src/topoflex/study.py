"""Scenario sweep: action selection, the hourly solve loop and persistence.

Output directory layout::

    <out>/hours/scale_<s>.jsonl   one HourRecord per line (checkpoint; resumable)
    <out>/report.json             config echo plus every aggregate
    <out>/fig*.csv                figure tables (see metrics.figure_tables)
"""

from __future__ import annotations

import json
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Literal, Sequence

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .engine import OPTIMAL, BnbOptions, TopologyState, branch_and_bound, fix_binaries
from .formulation import CostConfig, OpfVariant, add_connectivity, build_problem, compute_big_m
from .grid import DataError, ExpandedNetwork, Network, ParseConfig, expand_topology, parse_network, scale_wind, with_breakers
from .metrics import HourRecord, PricingError, StudyReport, compute_lmps, make_record, write_figure_tables

log = logging.getLogger(__name__)

DEFAULT_SCALES = tuple(round(0.25 * k, 2) for k in range(1, 13))
_RANGE = re.compile(r"^\s*(\d+)\s*\.\.\s*(\d+)\s*$")


def parse_hours(spec: str | int | Sequence[int | str]) -> list[int]:
    """``"A..B"`` (inclusive), comma-separated ranges, or a list of hours."""
    if isinstance(spec, int):
        return [spec]
    if isinstance(spec, str):
        out: list[int] = []
        for part in spec.split(","):
            m = _RANGE.match(part)
            if m:
                a, b = int(m.group(1)), int(m.group(2))
                if b < a:
                    raise ValueError(f"empty hour range {part.strip()!r}")
                out.extend(range(a, b + 1))
            elif part.strip().isdigit():
                out.append(int(part))
            else:
                raise ValueError(f"bad hour spec {part.strip()!r}; use A..B")
        return sorted(set(out))
    return sorted({h for item in spec for h in parse_hours(item)})


class StudyConfig(BaseModel):
    """Every study parameter; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    dataset: str = Field(description="dataset directory (bus/branch/gen/timeseries CSVs)")
    horizon: int = Field(8760, gt=0, description="rows expected in timeseries.csv")
    base_mva: float = Field(100.0, gt=0, description="per-unit base")
    scales: list[float] = Field(list(DEFAULT_SCALES), description="wind scaling factors, one scenario each")
    hours: list[int] = Field("0..8759", validate_default=True, description="hours to solve: 'A..B', 'A..B,C..D' or a list")
    variants: list[OpfVariant] = Field(list(OpfVariant), description="fixed, otc, copper_plate")
    split_buses: list[int] | Literal["auto"] = Field("auto", description="buses with a breaker, or 'auto' to select")
    switchable_branches: list[str] = Field([], description="branch UIDs that may be switched out")
    wear_and_tear: float = Field(10.0, gt=0, description="$ per open action")
    load_shed_cost: float = Field(10_000.0, gt=0, description="$/MWh of unserved demand")
    theta_bound: float = Field(math.pi, gt=0, description="|angle| bound in rad")
    big_m_path_margin: float | None = Field(0.05, ge=0, description="tighten big-M by always-closed path bounds (null: off)")
    relative_gap: float = Field(1e-4, ge=0, description="branch-and-bound relative gap")
    node_limit: int = Field(100_000, gt=0, description="branch-and-bound node limit per hour (safety cap)")
    local_search: bool = Field(True, description="seed the incumbent with single-flip descent")
    warm_start: bool = Field(False, description="seed each hour with the previous hour's topology")
    max_open_actions: int | None = Field(None, ge=0, description="cap on simultaneous open actions (null: none)")
    selection_threshold: float = Field(0.15, ge=0, le=1, description="select buses split in > this share of hours")
    selection_months: list[int] = Field([1, 7], description="months forming the selection window")
    selection_scale: float = Field(1.0, ge=0, description="wind scale during selection")
    selection_node_limit: int = Field(50, gt=0, description="node limit per hour during selection")
    selection_stride: int = Field(1, gt=0, description="solve every k-th hour of the selection window")
    variance: Literal["population", "sample"] = Field("population", description="nodal price variance kind")
    workers: int = Field(1, ge=1, description="worker processes")
    out: str = Field("study_out", description="output directory")
    seed: int = Field(0, description="reserved; the pipeline is deterministic")

    @field_validator("hours", mode="before")
    @classmethod
    def _hours(cls, v: Any) -> list[int]:
        hours = parse_hours(v)
        if not hours:
            raise ValueError("hour range is empty")
        return hours

    @field_validator("scales")
    @classmethod
    def _scales(cls, v: list[float]) -> list[float]:
        if any(not (s >= 0 and math.isfinite(s)) for s in v):
            raise ValueError("scales must be finite and >= 0")
        return sorted(set(float(s) for s in v))

    @field_validator("selection_months")
    @classmethod
    def _months(cls, v: list[int]) -> list[int]:
        if not v or any(not 1 <= m <= 12 for m in v):
            raise ValueError("selection_months must be a non-empty subset of 1..12")
        return sorted(set(v))

    @model_validator(mode="after")
    def _hours_in_horizon(self) -> "StudyConfig":
        if self.hours[-1] >= self.horizon:
            raise ValueError(f"hour {self.hours[-1]} outside horizon 0..{self.horizon - 1}")
        return self

    # -- derived helpers

    @property
    def cost(self) -> CostConfig:
        return CostConfig(wear_and_tear=self.wear_and_tear, load_shed_cost=self.load_shed_cost)

    def bnb_options(self, node_limit: int | None = None) -> BnbOptions:
        return BnbOptions(relative_gap=self.relative_gap, node_limit=node_limit or self.node_limit,
                          max_open_actions=self.max_open_actions, local_search=self.local_search)

    def echo(self) -> dict:
        return json.loads(self.model_dump_json())


def load_config(path: str | Path, overrides: dict[str, Any] | None = None) -> StudyConfig:
    """Read a YAML config; a relative ``dataset`` is resolved against the file's directory."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    data = yaml.safe_load(path.read_text()) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a mapping")
    data.update(overrides or {})
    if "dataset" in data and not Path(str(data["dataset"])).is_absolute():
        data["dataset"] = str((path.parent / str(data["dataset"])).resolve())
    return StudyConfig.model_validate(data)


def config_help() -> str:
    lines = []
    for name, f in StudyConfig.model_fields.items():
        default = "(required)" if f.is_required() else json.dumps(_jsonable(f.default))
        lines.append(f"  {name:<22} {default:<22} {f.description or ''}")
    return "\n".join(lines)


def _jsonable(v: Any) -> Any:
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, OpfVariant):
        return v.value
    return v


def generate_scenarios(config: StudyConfig | None = None) -> list[tuple[str, float]]:
    scales = config.scales if config is not None else list(DEFAULT_SCALES)
    return [(f"{round(s * 100):d}%", float(s)) for s in scales]


def load_network(config: StudyConfig, split_buses: Sequence[int] | None = None) -> Network:
    """Parse the dataset with the config's action lists (``split_buses`` overrides)."""
    buses = split_buses if split_buses is not None else ([] if config.split_buses == "auto" else config.split_buses)
    return parse_network(
        config.dataset,
        ParseConfig(switchable_branches=config.switchable_branches, split_buses=list(buses),
                    horizon=config.horizon, base_mva=config.base_mva),
    )


# ---------------------------------------------------------------------------
# per-hour solves


def solve_hour(
    expanded: ExpandedNetwork,
    hour: int,
    scale: float,
    config: StudyConfig,
    warm: TopologyState | None = None,
) -> list[HourRecord]:
    """Records for every configured variant at one hour (failures recorded, never raised)."""
    bigm = compute_big_m(expanded, config.theta_bound, config.big_m_path_margin)
    records = []
    for variant in config.variants:
        v = variant.value
        try:
            if variant is OpfVariant.OTC:
                network_part = build_problem(expanded, hour, v, config.cost, bigm)
                problem = add_connectivity(network_part, expanded)
                opts = config.bnb_options()
                opts.warm_start = warm
                res = branch_and_bound(problem, opts)
                if res.lp.status != OPTIMAL:
                    records.append(HourRecord(hour=hour, scale=scale, variant=v, status=res.lp.status,
                                              explored_nodes=res.explored_node_count, milp_status=res.status))
                    continue
                # once the topology is fixed the zero-cost connectivity flow is a separate
                # block: it cannot move the balance duals but would flag every hour degenerate
                lp = fix_binaries(network_part, res.topology)
                prices = compute_lmps(lp)
                records.append(make_record(expanded, lp, prices.solution, scale=scale, variant=v,
                                           topology=res.topology, prices=_bus_prices(expanded, prices),
                                           explored_nodes=res.explored_node_count,
                                           relative_gap=res.relative_gap, milp_status=res.status))
            else:
                lp = build_problem(expanded, hour, v, config.cost, bigm)
                prices = compute_lmps(lp)
                topo = None
                if variant is OpfVariant.FIXED:
                    topo = TopologyState.closed(expanded.network.n_breakers, expanded.network.n_switchable)
                    prices = _bus_prices(expanded, prices)
                records.append(make_record(expanded, lp, prices.solution, scale=scale, variant=v,
                                           topology=topo, prices=prices))
        except PricingError as exc:
            log.warning("scale %s hour %d %s: %s", scale, hour, v, exc)
            records.append(HourRecord(hour=hour, scale=scale, variant=v, status="pricing_failed"))
    return records


def _bus_prices(expanded: ExpandedNetwork, prices):
    """Restrict node prices to one per original bus: the node serving its demand."""
    prices.prices = prices.prices[list(expanded.demand_node)]
    return prices


# Worker processes parse the dataset once and keep one expanded network per scale.
_WORKER: dict[str, Any] = {}


def _init_worker(config_json: str, split_buses: list[int]) -> None:
    config = StudyConfig.model_validate_json(config_json)
    _WORKER.clear()
    _WORKER.update(config=config, network=load_network(config, split_buses), expanded={})


def _expanded(scale: float) -> ExpandedNetwork:
    cache = _WORKER["expanded"]
    if scale not in cache:
        cache[scale] = expand_topology(scale_wind(_WORKER["network"], scale))
    return cache[scale]


def _solve_chunk(task: tuple[float, list[int]]) -> list[dict]:
    scale, hours = task
    config: StudyConfig = _WORKER["config"]
    ex = _expanded(scale)
    out: list[dict] = []
    warm = None
    for h in hours:
        recs = solve_hour(ex, h, scale, config, warm if config.warm_start else None)
        for r in recs:
            if r.variant == OpfVariant.OTC.value and r.solved and r.topology is not None:
                warm = TopologyState.from_vector([int(c) for c in r.topology.replace("|", "")],
                                                 ex.network.n_breakers)
        out.extend(r.to_dict() for r in recs)
    return out


def _run_tasks(config: StudyConfig, split_buses: list[int], tasks: list[tuple[float, list[int]]]) -> Iterable[list[dict]]:
    if config.workers == 1 or len(tasks) <= 1:
        _init_worker(config.model_dump_json(), split_buses)
        for t in tasks:
            yield _solve_chunk(t)
        return
    with ProcessPoolExecutor(config.workers, initializer=_init_worker,
                             initargs=(config.model_dump_json(), split_buses)) as pool:
        yield from pool.map(_solve_chunk, tasks)


def _chunks(config: StudyConfig, scale: float, hours: list[int]) -> list[tuple[float, list[int]]]:
    if config.warm_start:
        return [(scale, hours)]  # the previous-hour topology couples hours within a scenario
    size = max(1, min(24, math.ceil(len(hours) / (4 * config.workers))))
    return [(scale, hours[i:i + size]) for i in range(0, len(hours), size)]


# ---------------------------------------------------------------------------
# selection


@dataclass
class SelectionResult:
    buses: list[int]
    open_share: dict[int, float]
    hours: list[int]
    switchable_branches: list[str]


def select_controllable_buses(
    config: StudyConfig,
    network: Network | None = None,
    hours: Sequence[int] | None = None,
) -> SelectionResult:
    """Buses whose breaker is open in strictly more than the threshold share of window hours.

    Every bus is made splittable with the default assignment rule and the OTC
    variant is solved for each hour of the selection months.
    """
    net = network if network is not None else load_network(config, [])
    if hours is None:
        if net.months is None:
            raise DataError("timeseries has no Month column; cannot form the selection window")
        hours = [h for h in range(net.horizon) if int(net.months[h]) in config.selection_months]
        hours = hours[::config.selection_stride]
    hours = sorted(hours)
    all_buses = net.bus_ids()
    sel_cfg = config.model_copy(update={
        "variants": [OpfVariant.OTC], "node_limit": config.selection_node_limit, "warm_start": False,
        "scales": [config.selection_scale], "split_buses": all_buses,
    })
    full = with_breakers(net, all_buses, config.switchable_branches)
    ex = expand_topology(scale_wind(full, config.selection_scale))
    open_count = dict.fromkeys(all_buses, 0)
    for h in hours:
        rec = solve_hour(ex, h, config.selection_scale, sel_cfg)[0]
        if not rec.solved:
            raise RuntimeError(f"selection solve failed at hour {h}: {rec.status}")
        breakers = rec.topology.split("|")[0]
        for bus, s in zip(all_buses, breakers):
            open_count[bus] += s == "0"
    share = {b: open_count[b] / len(hours) for b in all_buses}
    chosen = [b for b in all_buses if share[b] > config.selection_threshold]
    return SelectionResult(buses=chosen, open_share=share, hours=list(hours),
                           switchable_branches=list(config.switchable_branches))


# ---------------------------------------------------------------------------
# the sweep


def _scale_file(out: Path, scale: float) -> Path:
    return out / "hours" / f"scale_{scale!r}.jsonl"


def _read_checkpoint(path: Path) -> list[HourRecord]:
    if not path.exists():
        return []
    records = []
    for line in path.read_text().splitlines():
        if line.strip():
            try:
                records.append(HourRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, TypeError):
                break  # a torn final line from an interrupted run
    return records


def run_study(config: StudyConfig, split_buses: Sequence[int] | None = None) -> StudyReport:
    """Solve every scenario x hour x variant, checkpointing per scenario, and write the outputs.

    ``split_buses`` overrides the config (required when it says ``auto``).
    Records already present in the output directory are reused.
    """
    if split_buses is None:
        if config.split_buses == "auto":
            raise ValueError("split_buses is 'auto': run select-actions first or pass split_buses")
        split_buses = config.split_buses
    split_buses = list(split_buses)
    net = load_network(config, split_buses)  # dataset errors abort here, before any solve
    if config.hours[-1] >= net.horizon:
        raise DataError(f"hour {config.hours[-1]} outside dataset horizon {net.horizon}")
    out = Path(config.out)
    (out / "hours").mkdir(parents=True, exist_ok=True)

    variants = {v.value for v in config.variants}
    wanted = set(config.hours)
    all_records: list[HourRecord] = []
    for scale in config.scales:
        path = _scale_file(out, scale)
        done = {(r.hour, r.variant): r for r in _read_checkpoint(path)
                if r.hour in wanted and r.variant in variants}
        todo = [h for h in config.hours if any((h, v) not in done for v in variants)]
        if todo:
            with open(path, "a") as fh:
                for chunk in _run_tasks(config, split_buses, _chunks(config, scale, todo)):
                    for d in chunk:
                        rec = HourRecord.from_dict(d)
                        if (rec.hour, rec.variant) not in done:
                            done[(rec.hour, rec.variant)] = rec
                            fh.write(json.dumps(d, sort_keys=True) + "\n")
                    fh.flush()
        all_records.extend(done.values())

    all_records.sort(key=lambda r: (r.scale, r.hour, r.variant))
    report = StudyReport(config=_report_config(config, split_buses), records=all_records,
                         variance_kind=config.variance)
    write_report(report, out)
    return report


def _report_config(config: StudyConfig, split_buses: list[int]) -> dict:
    echo = config.echo()
    echo["split_buses"] = split_buses
    for key in ("out", "workers"):  # do not change results
        echo.pop(key)
    return echo


def write_report(report: StudyReport, out: str | Path) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")
    emit_plot_data(report, out)


def emit_plot_data(report: StudyReport, directory: str | Path) -> list[Path]:
    return write_figure_tables(report.aggregates, directory)


def load_report(directory: str | Path) -> StudyReport:
    """Rebuild a report from ``report.json`` and the per-scenario record files."""
    directory = Path(directory)
    meta_path = directory / "report.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"no report.json in {directory}")
    meta = json.loads(meta_path.read_text())
    config = meta["config"]
    records = []
    wanted = set(config["hours"])
    for scale in config.get("scales", []):
        records.extend(r for r in _read_checkpoint(_scale_file(directory, scale))
                       if r.hour in wanted and r.variant in config["variants"])
    records.sort(key=lambda r: (r.scale, r.hour, r.variant))
    return StudyReport(config=config, records=records, variance_kind=config.get("variance", "population"))


def records_equal(a: Sequence[HourRecord], b: Sequence[HourRecord]) -> bool:
    return [r.to_dict() for r in a] == [r.to_dict() for r in b]
