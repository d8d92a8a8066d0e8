"""Grid data model: parsing, validation, wind scaling and bus-split expansion.

Input directory layout (comma separated, header row)::

    bus.csv         Bus ID, Bus Type (PQ|PV|Ref), MW Load, Area
    branch.csv      UID, From Bus, To Bus, X (p.u.), Cont Rating (MW)
    gen.csv         GEN UID, Bus ID, Unit Type, PMax MW, PMin MW,
                    Curve MW 0..3, Curve Cost 0..3   (piecewise $/h points)
    timeseries.csv  Hour, [Month], load_area:<area> | load_bus:<bus>, <GEN UID> ...
    breaker_assignment.csv   (optional) Bus ID, Element, Half

Extra columns are ignored.  Renewable generators (wind, pv, hydro, other
renewables) take their hourly availability from the time-series column named
after their UID; thermal units are available at ``PMax MW`` every hour.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

RENEWABLE = ("wind", "pv", "hydro", "other-renewable")
CATEGORIES = ("thermal",) + RENEWABLE

UNIT_TYPE_CATEGORY = {
    "WIND": "wind",
    "PV": "pv",
    "RTPV": "pv",
    "HYDRO": "hydro",
    "ROR": "hydro",
    "CSP": "other-renewable",
}
DROPPED_UNIT_TYPES = ("STORAGE", "SYNC_COND")

HALF_A = "A"
HALF_B = "B"


class DataError(ValueError):
    """Raised for malformed input tables; the message names file and row."""


@dataclass(frozen=True, eq=False)
class Bus:
    id: int
    area: str
    is_reference: bool
    demand_profile: np.ndarray


@dataclass(frozen=True)
class Branch:
    id: str
    from_bus: int
    to_bus: int
    susceptance: float  # p.u., 1/x
    capacity: float  # MW
    is_switchable: bool = False


@dataclass(frozen=True, eq=False)
class Generator:
    id: str
    bus: int
    category: str
    marginal_cost: float  # $/MWh
    profile: np.ndarray  # MW availability before scaling
    scale: float = 1.0

    @property
    def capacity_profile(self) -> np.ndarray:
        return self.profile * self.scale

    def capacity_at(self, hour: int) -> float:
        return float(self.profile[hour] * self.scale)

    @property
    def is_renewable(self) -> bool:
        return self.category in RENEWABLE


def branch_end(branch_id: str, end: str) -> str:
    return f"branch:{branch_id}:{end}"


def gen_key(gen_id: str) -> str:
    return f"gen:{gen_id}"


DEMAND_KEY = "demand"


@dataclass(frozen=True)
class BreakerSpec:
    """A splittable bus and the side (A or B) each incident element lands on."""

    bus: int
    assignment: Mapping[str, str]


@dataclass(frozen=True, eq=False)
class Network:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    breaker_specs: tuple[BreakerSpec, ...] = ()
    base_mva: float = 100.0
    declared_action_count: int | None = None
    months: np.ndarray | None = None
    name: str = ""

    @property
    def horizon(self) -> int:
        return len(self.buses[0].demand_profile) if self.buses else 0

    @property
    def n_breakers(self) -> int:
        return len(self.breaker_specs)

    @property
    def n_switchable(self) -> int:
        return sum(b.is_switchable for b in self.branches)

    @property
    def reference_bus(self) -> Bus:
        return next(b for b in self.buses if b.is_reference)

    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    def incident_elements(self, bus_id: int) -> list[str]:
        """Element keys touching ``bus_id``: branch ends, generators, demand."""
        keys = []
        for br in self.branches:
            if br.from_bus == bus_id:
                keys.append(branch_end(br.id, "from"))
            if br.to_bus == bus_id:
                keys.append(branch_end(br.id, "to"))
        keys += [gen_key(g.id) for g in self.generators if g.bus == bus_id]
        keys.append(DEMAND_KEY)
        return keys

    def total_capacity(self, category: str, hour: int | None = None) -> float:
        gens = [g for g in self.generators if g.category == category]
        if hour is None:
            return float(sum(g.capacity_profile.max() for g in gens)) if gens else 0.0
        return float(sum(g.capacity_at(hour) for g in gens))


@dataclass
class ParseConfig:
    switchable_branches: Sequence[str] = ()
    split_buses: Sequence[int] = ()
    horizon: int = 8760
    base_mva: float = 100.0
    declared_action_count: int | None = None


def default_assignment(network: Network, bus_id: int) -> dict[str, str]:
    """Branch ends sorted by branch id alternate A/B; generators and demand go to A."""
    ends = []
    for br in network.branches:
        if br.from_bus == bus_id:
            ends.append((br.id, "from"))
        if br.to_bus == bus_id:
            ends.append((br.id, "to"))
    ends.sort()
    assignment = {branch_end(bid, end): (HALF_A if i % 2 == 0 else HALF_B) for i, (bid, end) in enumerate(ends)}
    for g in network.generators:
        if g.bus == bus_id:
            assignment[gen_key(g.id)] = HALF_A
    assignment[DEMAND_KEY] = HALF_A
    return assignment


# ---------------------------------------------------------------------------
# parsing


def _read_table(path: Path, required: Sequence[str]) -> list[tuple[int, dict[str, str]]]:
    if not path.exists():
        raise DataError(f"{path}: missing table")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{path}: schema mismatch, missing column(s) {missing}")
        reader.fieldnames = header
        # row numbers count the header as line 1
        return [(i + 2, {k: (v or "").strip() for k, v in row.items() if k is not None}) for i, row in enumerate(reader)]


def _num(path: Path, row: int, rec: Mapping[str, str], col: str) -> float:
    try:
        return float(rec[col])
    except ValueError:
        raise DataError(f"{path}:{row}: column {col!r} is not a number: {rec[col]!r}") from None


def flatten_cost_curve(mw: Sequence[float], cost: Sequence[float]) -> float:
    """Capacity-weighted average incremental cost of a piecewise $/h curve.

    Segments are the pieces between consecutive breakpoints; each segment's
    slope is weighted by its MW width, which reduces to the chord slope from the
    first to the last breakpoint.  A single breakpoint falls back to average cost.
    """
    pts = [(m, c) for m, c in zip(mw, cost)]
    if not pts:
        return 0.0
    if len(pts) == 1:
        m, c = pts[0]
        return c / m if m > 0 else 0.0
    widths = np.diff([p[0] for p in pts])
    slopes = np.diff([p[1] for p in pts]) / np.where(widths > 0, widths, 1.0)
    if widths.sum() <= 0:
        return 0.0
    return float(np.dot(widths, slopes) / widths.sum())


def parse_network(data_location: str | Path, parse_config: ParseConfig | None = None) -> Network:
    """Read a dataset directory into a validated :class:`Network`.

    Piecewise cost curves are flattened to one marginal price, minimum outputs
    are dropped (every unit may run down to zero), and storage and synchronous
    condenser records are skipped.
    """
    cfg = parse_config or ParseConfig()
    root = Path(data_location)
    if not root.is_dir():
        raise DataError(f"{root}: dataset directory not found")

    bus_path = root / "bus.csv"
    branch_path = root / "branch.csv"
    gen_path = root / "gen.csv"
    ts_path = root / "timeseries.csv"

    bus_rows = _read_table(bus_path, ["Bus ID", "Bus Type", "MW Load", "Area"])
    branch_rows = _read_table(branch_path, ["UID", "From Bus", "To Bus", "X", "Cont Rating"])
    gen_rows = _read_table(gen_path, ["GEN UID", "Bus ID", "Unit Type", "PMax MW"])
    ts_rows = _read_table(ts_path, ["Hour"])

    bus_ids: list[int] = []
    bus_area: dict[int, str] = {}
    bus_load: dict[int, float] = {}
    ref_ids: list[int] = []
    for row, rec in bus_rows:
        bid = int(_num(bus_path, row, rec, "Bus ID"))
        bus_ids.append(bid)
        bus_area[bid] = rec["Area"]
        bus_load[bid] = _num(bus_path, row, rec, "MW Load")
        if rec["Bus Type"].lower() in ("ref", "slack", "3"):
            ref_ids.append(bid)
    known = set(bus_ids)

    # time series
    if len(ts_rows) != cfg.horizon:
        raise DataError(f"{ts_path}: expected {cfg.horizon} rows, found {len(ts_rows)}")
    ts_columns = list(ts_rows[0][1].keys()) if ts_rows else []
    series: dict[str, np.ndarray] = {}
    for col in ts_columns:
        if col in ("Hour", "Month"):
            continue
        vals = np.empty(len(ts_rows))
        for i, (row, rec) in enumerate(ts_rows):
            vals[i] = _num(ts_path, row, rec, col)
        series[col] = vals
    months = None
    if "Month" in ts_columns:
        months = np.array([int(_num(ts_path, row, rec, "Month")) for row, rec in ts_rows], dtype=int)

    demand: dict[int, np.ndarray] = {}
    for col, vals in series.items():
        if col.startswith("load_bus:"):
            bid = int(col.split(":", 1)[1])
            if bid not in known:
                raise DataError(f"{ts_path}:1: column {col!r} references unknown bus {bid}")
            demand[bid] = vals.copy()
    for col, vals in series.items():
        if not col.startswith("load_area:"):
            continue
        area = col.split(":", 1)[1]
        members = [b for b in bus_ids if bus_area[b] == area and b not in demand]
        total = sum(bus_load[b] for b in members)
        if not members:
            raise DataError(f"{ts_path}:1: column {col!r} references unknown area {area!r}")
        for b in members:
            share = bus_load[b] / total if total > 0 else 0.0
            demand[b] = vals * share
    if not demand:
        # no load columns: hold the static MW Load flat over the horizon
        demand = {b: np.full(cfg.horizon, bus_load[b]) for b in bus_ids}

    buses = tuple(
        Bus(id=b, area=bus_area[b], is_reference=b in ref_ids, demand_profile=demand.get(b, np.zeros(cfg.horizon)))
        for b in bus_ids
    )

    switchable = set(cfg.switchable_branches)
    branches = []
    for row, rec in branch_rows:
        fb = int(_num(branch_path, row, rec, "From Bus"))
        tb = int(_num(branch_path, row, rec, "To Bus"))
        for b in (fb, tb):
            if b not in known:
                raise DataError(f"{branch_path}:{row}: branch {rec['UID']!r} references unknown bus {b}")
        x = _num(branch_path, row, rec, "X")
        branches.append(
            Branch(
                id=rec["UID"],
                from_bus=fb,
                to_bus=tb,
                susceptance=1.0 / x if x != 0 else math.inf,
                capacity=_num(branch_path, row, rec, "Cont Rating"),
                is_switchable=rec["UID"] in switchable,
            )
        )
    unknown_switch = switchable - {b.id for b in branches}
    if unknown_switch:
        raise DataError(f"switchable branch id(s) not in {branch_path}: {sorted(unknown_switch)}")

    generators = []
    dropped: Counter = Counter()
    for row, rec in gen_rows:
        utype = rec["Unit Type"].upper()
        if utype in DROPPED_UNIT_TYPES:
            dropped[utype] += 1
            continue
        bid = int(_num(gen_path, row, rec, "Bus ID"))
        if bid not in known:
            raise DataError(f"{gen_path}:{row}: generator {rec['GEN UID']!r} references unknown bus {bid}")
        category = UNIT_TYPE_CATEGORY.get(utype, "thermal")
        pmax = _num(gen_path, row, rec, "PMax MW")
        if category == "thermal":
            mw, cost = [], []
            for k in range(4):
                m, c = rec.get(f"Curve MW {k}", ""), rec.get(f"Curve Cost {k}", "")
                if m and c:
                    mw.append(_num(gen_path, row, rec, f"Curve MW {k}"))
                    cost.append(_num(gen_path, row, rec, f"Curve Cost {k}"))
            price = flatten_cost_curve(mw, cost)
            profile = np.full(cfg.horizon, pmax)
        else:
            price = 0.0
            if rec["GEN UID"] not in series:
                raise DataError(f"{gen_path}:{row}: renewable {rec['GEN UID']!r} has no column in {ts_path}")
            profile = series[rec["GEN UID"]].copy()
        generators.append(Generator(id=rec["GEN UID"], bus=bid, category=category, marginal_cost=price, profile=profile))
    for utype, n in sorted(dropped.items()):
        log.info("dropped %d %s record(s): not modelled", n, utype)

    network = Network(
        buses=buses,
        branches=tuple(branches),
        generators=tuple(generators),
        base_mva=cfg.base_mva,
        declared_action_count=cfg.declared_action_count,
        months=months,
        name=root.name,
    )

    sidecar = root / "breaker_assignment.csv"
    explicit: dict[int, dict[str, str]] = defaultdict(dict)
    if sidecar.exists():
        for row, rec in _read_table(sidecar, ["Bus ID", "Element", "Half"]):
            explicit[int(_num(sidecar, row, rec, "Bus ID"))][rec["Element"]] = rec["Half"].upper()
    specs = []
    for bid in cfg.split_buses:
        if bid not in known:
            raise DataError(f"split bus {bid} is not in {bus_path}")
        specs.append(BreakerSpec(bus=bid, assignment=explicit.get(bid) or default_assignment(network, bid)))
    return replace(network, breaker_specs=tuple(specs))


def with_breakers(network: Network, split_buses: Iterable[int], switchable: Iterable[str] | None = None) -> Network:
    """Copy of ``network`` with default-rule breakers on ``split_buses``."""
    specs = tuple(BreakerSpec(bus=b, assignment=default_assignment(network, b)) for b in split_buses)
    branches = network.branches
    if switchable is not None:
        sw = set(switchable)
        branches = tuple(replace(br, is_switchable=br.id in sw) for br in branches)
    return replace(network, breaker_specs=specs, branches=branches, declared_action_count=None)


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self, network: Network) -> str:
        lines = [
            f"{len(network.buses)} buses, {len(network.branches)} branches, {len(network.generators)} generators",
            f"{network.n_breakers} breaker{'' if network.n_breakers == 1 else 's'}, "
            f"{network.n_switchable} switchable branch{'' if network.n_switchable == 1 else 'es'}",
        ]
        lines += [f"VIOLATION: {v}" for v in self.violations] or ["valid"]
        return "\n".join(lines)


def _connected(nodes: Iterable, edges: Iterable[tuple]) -> bool:
    nodes = list(nodes)
    if not nodes:
        return True
    adj: dict = defaultdict(list)
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = {nodes[0]}
    queue = deque([nodes[0]])
    while queue:
        n = queue.popleft()
        for m in adj[n]:
            if m not in seen:
                seen.add(m)
                queue.append(m)
    return len(seen) == len(set(nodes))


def validate(network: Network) -> ValidationReport:
    report = ValidationReport()
    v = report.violations

    for label, ids in (
        ("bus", [b.id for b in network.buses]),
        ("branch", [b.id for b in network.branches]),
        ("generator", [g.id for g in network.generators]),
    ):
        dup = sorted(str(k) for k, n in Counter(ids).items() if n > 1)
        if dup:
            v.append(f"duplicate {label} id(s): {', '.join(dup)}")

    refs = [b.id for b in network.buses if b.is_reference]
    if len(refs) != 1:
        v.append(f"expected exactly one reference bus, found {len(refs)}: {refs}")

    horizon = network.horizon
    for b in network.buses:
        if len(b.demand_profile) != horizon:
            v.append(f"bus {b.id}: demand profile length {len(b.demand_profile)} != {horizon}")
        if np.any(b.demand_profile < 0):
            v.append(f"bus {b.id}: negative demand")

    known = set(network.bus_ids())
    for br in network.branches:
        if not (br.susceptance > 0 and math.isfinite(br.susceptance)):
            v.append(f"branch {br.id}: susceptance must be positive and finite")
        if not br.capacity > 0:
            v.append(f"branch {br.id}: capacity must be positive")
        if br.from_bus == br.to_bus:
            v.append(f"branch {br.id}: from_bus equals to_bus")
        for end in (br.from_bus, br.to_bus):
            if end not in known:
                v.append(f"branch {br.id}: unknown bus {end}")

    for g in network.generators:
        if g.bus not in known:
            v.append(f"generator {g.id}: unknown bus {g.bus}")
        if g.category not in CATEGORIES:
            v.append(f"generator {g.id}: unknown category {g.category!r}")
        if g.marginal_cost < 0:
            v.append(f"generator {g.id}: negative marginal cost")
        if g.is_renewable and g.marginal_cost != 0:
            v.append(f"generator {g.id}: renewable with nonzero cost {g.marginal_cost}")
        if len(g.profile) != horizon:
            v.append(f"generator {g.id}: profile length {len(g.profile)} != {horizon}")
        if np.any(g.capacity_profile < 0):
            v.append(f"generator {g.id}: negative capacity")

    seen_split = Counter(s.bus for s in network.breaker_specs)
    for bid, n in seen_split.items():
        if n > 1:
            v.append(f"bus {bid}: {n} breaker specs")
    for spec in network.breaker_specs:
        if spec.bus not in known:
            v.append(f"breaker spec: unknown bus {spec.bus}")
            continue
        incident = network.incident_elements(spec.bus)
        missing = [k for k in incident if k not in spec.assignment]
        extra = [k for k in spec.assignment if k not in incident]
        bad = [k for k, h in spec.assignment.items() if h not in (HALF_A, HALF_B)]
        if missing:
            v.append(f"bus {spec.bus}: unassigned element(s) {missing}")
        if extra:
            v.append(f"bus {spec.bus}: assignment names non-incident element(s) {extra}")
        if bad:
            v.append(f"bus {spec.bus}: invalid half for {bad}")
        for half in (HALF_A, HALF_B):
            ends = [k for k, h in spec.assignment.items() if h == half and k.startswith("branch:") and k in incident]
            if not ends:
                v.append(f"bus {spec.bus}: half {half} receives no branch end")

    if not _connected(known, [(br.from_bus, br.to_bus) for br in network.branches]):
        v.append("branch graph (all closed) is not connected")

    if network.declared_action_count is not None:
        actual = network.n_breakers + network.n_switchable
        if actual != network.declared_action_count:
            v.append(f"action count {actual} != declared {network.declared_action_count}")
    return report


# ---------------------------------------------------------------------------
# wind scaling


def scale_wind(network: Network, factor: float) -> Network:
    """Multiply every wind generator's availability by ``factor``."""
    if not (math.isfinite(factor) and factor >= 0):
        raise ValueError(f"wind scale factor must be finite and >= 0, got {factor!r}")
    gens = tuple(replace(g, scale=g.scale * factor) if g.category == "wind" else g for g in network.generators)
    return replace(network, generators=gens)


# ---------------------------------------------------------------------------
# topology expansion

PLAIN, SWITCHABLE, BREAKER = "plain", "switchable", "breaker"


@dataclass(frozen=True)
class Edge:
    kind: str
    element: str  # branch id, or bus id for breakers
    from_node: int
    to_node: int
    susceptance: float  # p.u.; 0 for breakers
    capacity: float  # MW; inf for breakers


@dataclass(frozen=True, eq=False)
class ExpandedNetwork:
    """Node/edge view with every splittable bus replaced by two half-nodes.

    Half A keeps the original bus position; half B nodes are appended after
    all original buses, in breaker-spec order.
    """

    network: Network
    nodes: tuple[str, ...]
    node_bus: tuple[int, ...]
    edges: tuple[Edge, ...]
    gen_node: tuple[int, ...]
    demand_node: tuple[int, ...]  # per original bus
    reference_node: int

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def action_edges(self) -> list[int]:
        """Edge indices carrying a binary: breakers first, then switchable branches."""
        brk = [i for i, e in enumerate(self.edges) if e.kind == BREAKER]
        sw = [i for i, e in enumerate(self.edges) if e.kind == SWITCHABLE]
        return brk + sw

    @property
    def n_actions(self) -> int:
        return len(self.action_edges)

    def action_labels(self) -> list[str]:
        return [f"{self.edges[i].kind}:{self.edges[i].element}" for i in self.action_edges]

    def demand(self, hour: int) -> np.ndarray:
        d = np.zeros(self.n_nodes)
        for bus, node in zip(self.network.buses, self.demand_node):
            d[node] += bus.demand_profile[hour]
        return d


def expand_topology(network: Network) -> ExpandedNetwork:
    bus_pos = {b.id: i for i, b in enumerate(network.buses)}
    nodes = [str(b.id) for b in network.buses]
    node_bus = [b.id for b in network.buses]
    half_b: dict[int, int] = {}
    specs = {s.bus: s for s in network.breaker_specs}
    for spec in network.breaker_specs:
        half_b[spec.bus] = len(nodes)
        nodes.append(f"{spec.bus}#B")
        node_bus.append(spec.bus)

    def attach(bus_id: int, key: str) -> int:
        spec = specs.get(bus_id)
        if spec is not None and spec.assignment.get(key) == HALF_B:
            return half_b[bus_id]
        return bus_pos[bus_id]

    edges = []
    for br in network.branches:
        edges.append(
            Edge(
                kind=SWITCHABLE if br.is_switchable else PLAIN,
                element=br.id,
                from_node=attach(br.from_bus, branch_end(br.id, "from")),
                to_node=attach(br.to_bus, branch_end(br.id, "to")),
                susceptance=br.susceptance,
                capacity=br.capacity,
            )
        )
    for spec in network.breaker_specs:
        edges.append(
            Edge(kind=BREAKER, element=str(spec.bus), from_node=bus_pos[spec.bus], to_node=half_b[spec.bus],
                 susceptance=0.0, capacity=math.inf)
        )
    gen_node = tuple(attach(g.bus, gen_key(g.id)) for g in network.generators)
    demand_node = tuple(attach(b.id, DEMAND_KEY) for b in network.buses)
    return ExpandedNetwork(
        network=network,
        nodes=tuple(nodes),
        node_bus=tuple(node_bus),
        edges=tuple(edges),
        gen_node=gen_node,
        demand_node=demand_node,
        reference_node=bus_pos[network.reference_bus.id],
    )


def closed_graph_connected(expanded: ExpandedNetwork, status: Sequence[int]) -> bool:
    """Breadth-first check that the closed-edge graph spans every node.

    ``status`` is ordered like :attr:`ExpandedNetwork.action_edges`.
    """
    open_edges = {e for e, s in zip(expanded.action_edges, status) if round(s) == 0}
    edges = [(e.from_node, e.to_node) for i, e in enumerate(expanded.edges) if i not in open_edges]
    return _connected(range(expanded.n_nodes), edges)


# ---------------------------------------------------------------------------
# canonical serialisation


def network_to_dict(network: Network) -> dict:
    return {
        "name": network.name,
        "base_mva": network.base_mva,
        "declared_action_count": network.declared_action_count,
        "months": None if network.months is None else network.months.tolist(),
        "buses": [
            {"id": b.id, "area": b.area, "is_reference": b.is_reference, "demand_profile": b.demand_profile.tolist()}
            for b in network.buses
        ],
        "branches": [
            {"id": br.id, "from_bus": br.from_bus, "to_bus": br.to_bus, "susceptance": br.susceptance,
             "capacity": br.capacity, "is_switchable": br.is_switchable}
            for br in network.branches
        ],
        "generators": [
            {"id": g.id, "bus": g.bus, "category": g.category, "marginal_cost": g.marginal_cost,
             "capacity_profile": g.capacity_profile.tolist()}
            for g in network.generators
        ],
        "breaker_specs": [{"bus": s.bus, "assignment": dict(sorted(s.assignment.items()))} for s in network.breaker_specs],
    }


def network_from_dict(data: Mapping) -> Network:
    return Network(
        buses=tuple(Bus(id=b["id"], area=b["area"], is_reference=b["is_reference"],
                        demand_profile=np.asarray(b["demand_profile"], dtype=float)) for b in data["buses"]),
        branches=tuple(Branch(**br) for br in data["branches"]),
        generators=tuple(Generator(id=g["id"], bus=g["bus"], category=g["category"], marginal_cost=g["marginal_cost"],
                                   profile=np.asarray(g["capacity_profile"], dtype=float)) for g in data["generators"]),
        breaker_specs=tuple(BreakerSpec(bus=s["bus"], assignment=dict(s["assignment"])) for s in data["breaker_specs"]),
        base_mva=data["base_mva"],
        declared_action_count=data["declared_action_count"],
        months=None if data["months"] is None else np.asarray(data["months"], dtype=int),
        name=data.get("name", ""),
    )


def dump_network(network: Network) -> str:
    return json.dumps(network_to_dict(network), indent=1, sort_keys=True)
