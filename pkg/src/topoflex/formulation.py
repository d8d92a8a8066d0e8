"""Hourly DC-OPF problems in matrix form for the three study variants.

Internally every power quantity (generation, flows, shed, demand) is in per
unit on ``base_mva`` and angles are in radians, so flow definitions read
``P = B (theta_f - theta_t)`` with ``B`` the per-unit susceptance.  Objective
coefficients are therefore ``$/h per p.u.`` (``c * base_mva``) and the
objective value itself is in $/h.  Big-M values are supplied in MW and
converted on assembly.

Columns, in order: ``theta`` (node), ``gen`` (generator), ``flow`` (edge),
``shed`` (node), ``breaker`` / ``branch_status`` (action), and the optional
``conn_flow`` (edge) block added by :func:`add_connectivity`.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from .grid import BREAKER, PLAIN, SWITCHABLE, ExpandedNetwork

INF = math.inf


class OpfVariant(str, enum.Enum):
    FIXED = "fixed"
    OTC = "otc"
    COPPER_PLATE = "copper_plate"


@dataclass(frozen=True)
class CostConfig:
    wear_and_tear: float = 10.0  # $ per open action
    load_shed_cost: float = 10_000.0  # $/MWh

    def violations(self, network=None) -> list[str]:
        out = []
        if not self.wear_and_tear > 0:
            out.append("wear_and_tear must be > 0")
        if network is not None:
            worst = max((g.marginal_cost for g in network.generators), default=0.0)
            if not self.load_shed_cost > worst:
                out.append(f"load_shed_cost {self.load_shed_cost} must exceed every marginal cost (max {worst})")
        return out


@dataclass(frozen=True)
class BigMConfig:
    theta_bound: float  # rad, |theta_n| <= theta_bound
    breaker_angle: tuple[float, ...]  # rad, one per breaker edge (action order)
    breaker_flow: tuple[float, ...]  # MW, one per breaker edge (action order)
    branch: tuple[float, ...]  # MW, one per switchable edge (action order)
    path_margin: float | None = None

    def violations(self, expanded: ExpandedNetwork) -> list[str]:
        """Constants too small to be valid.

        Angle-based constants must reach ``2 * theta_bound``, or, when
        ``path_margin`` is set, the shortest always-closed path bound.
        """
        out = []
        if not self.theta_bound > 0:
            out.append("theta_bound must be > 0")
        brk = [i for i in expanded.action_edges if expanded.edges[i].kind == BREAKER]
        sw = [i for i in expanded.action_edges if expanded.edges[i].kind == SWITCHABLE]
        if len(brk) != len(self.breaker_flow) or len(brk) != len(self.breaker_angle) or len(sw) != len(self.branch):
            return out + ["big-M vector lengths do not match the network's actions"]
        base = expanded.network.base_mva
        dist = plain_angle_distances(expanded) if self.path_margin is not None else None
        slack = 1 - 1e-12

        def need_angle(i: int) -> float:
            bound = 2 * self.theta_bound
            if dist is not None:
                bound = min(bound, dist[expanded.edges[i].from_node, expanded.edges[i].to_node])
            return bound

        for i, ma, mf in zip(brk, self.breaker_angle, self.breaker_flow):
            name = expanded.edges[i].element
            if ma < need_angle(i) * slack:
                out.append(f"breaker {name}: M_B_angle {ma} < {need_angle(i)}")
            need = _attached_capacity(expanded, i)
            if mf < need * slack:
                out.append(f"breaker {name}: M_B_flow {mf} < {need}")
        for i, m in zip(sw, self.branch):
            need = expanded.edges[i].susceptance * need_angle(i) * base
            if m < need * slack:
                out.append(f"branch {expanded.edges[i].element}: M_K {m} < {need}")
        return out


def _attached_capacity(expanded: ExpandedNetwork, edge_index: int) -> float:
    e = expanded.edges[edge_index]
    ends = {e.from_node, e.to_node}
    return float(sum(x.capacity for x in expanded.edges if x.kind != BREAKER and ({x.from_node, x.to_node} & ends)))


def plain_angle_distances(expanded: ExpandedNetwork) -> np.ndarray:
    """All-pairs bound on |theta_i - theta_j| along always-closed branches.

    A plain branch at its rating spans ``capacity / (B * base)`` radians, so the
    shortest such path bounds the angle difference between its endpoints in
    every topology.  Unreachable pairs are ``inf``.
    """
    base = expanded.network.base_mva
    plain = [e for e in expanded.edges if e.kind == PLAIN]
    n = expanded.n_nodes
    if not plain:
        return np.where(np.eye(n, dtype=bool), 0.0, np.inf)
    w = sp.coo_matrix(
        ([e.capacity / (e.susceptance * base) for e in plain],
         ([e.from_node for e in plain], [e.to_node for e in plain])),
        shape=(n, n),
    ).tocsr()
    return shortest_path(w, directed=False)


def compute_big_m(expanded: ExpandedNetwork, theta_bound: float = math.pi, path_margin: float | None = None) -> BigMConfig:
    """Big-M constants for the breaker and switchable-branch disjunctions.

    By default the angle-based constants come from ``theta_bound``.  With
    ``path_margin`` set, each is replaced by the smaller shortest-path angle
    bound (see :func:`plain_angle_distances`) scaled by ``1 + path_margin``
    wherever one exists; the margin keeps open actions strictly inside M.
    """
    if not theta_bound > 0:
        raise ValueError("theta_bound must be positive")
    base = expanded.network.base_mva
    brk = [i for i in expanded.action_edges if expanded.edges[i].kind == BREAKER]
    sw = [i for i in expanded.action_edges if expanded.edges[i].kind == SWITCHABLE]
    angle = [2 * theta_bound] * len(brk)
    span = [2 * theta_bound] * len(sw)
    if path_margin is not None:
        dist = plain_angle_distances(expanded) * (1.0 + path_margin)
        angle = [min(a, dist[expanded.edges[i].from_node, expanded.edges[i].to_node]) for a, i in zip(angle, brk)]
        span = [min(a, dist[expanded.edges[i].from_node, expanded.edges[i].to_node]) for a, i in zip(span, sw)]
    return BigMConfig(
        theta_bound=theta_bound,
        breaker_angle=tuple(angle),
        breaker_flow=tuple(_attached_capacity(expanded, i) for i in brk),
        branch=tuple(expanded.edges[i].susceptance * a * base for i, a in zip(sw, span)),
        path_margin=path_margin,
    )


@dataclass(eq=False)
class OpfProblem:
    """A linear or mixed-binary program ``min c'x + offset`` over row/column ranges."""

    variant: OpfVariant
    hour: int
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    col_lo: np.ndarray
    col_hi: np.ndarray
    cost: np.ndarray
    offset: float
    integrality: np.ndarray  # bool per column
    col_meta: list[tuple[str, int]]
    row_meta: list[tuple[str, int]]
    base_mva: float
    n_nodes: int
    action_labels: list[str] = field(default_factory=list)
    fixed_status: np.ndarray | None = None
    has_connectivity: bool = False

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @cached_property
    def _col_index(self) -> dict[str, np.ndarray]:
        groups: dict[str, list[int]] = defaultdict(list)
        for j, (kind, _) in enumerate(self.col_meta):
            groups[kind].append(j)
        return {k: np.array(v, dtype=int) for k, v in groups.items()}

    @cached_property
    def _row_index(self) -> dict[str, np.ndarray]:
        groups: dict[str, list[int]] = defaultdict(list)
        for i, (kind, _) in enumerate(self.row_meta):
            groups[kind].append(i)
        return {k: np.array(v, dtype=int) for k, v in groups.items()}

    def cols(self, kind: str) -> np.ndarray:
        return self._col_index.get(kind, np.zeros(0, dtype=int))

    def rows(self, kind: str) -> np.ndarray:
        return self._row_index.get(kind, np.zeros(0, dtype=int))

    @property
    def binary_cols(self) -> np.ndarray:
        return np.flatnonzero(self.integrality)

    @property
    def free_binary_cols(self) -> np.ndarray:
        b = self.binary_cols
        return b[self.col_lo[b] < self.col_hi[b]]

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.cost @ x + self.offset)


class _Builder:
    def __init__(self) -> None:
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []
        self.row_lo: list[float] = []
        self.row_hi: list[float] = []
        self.row_meta: list[tuple[str, int]] = []

    def add(self, meta: tuple[str, int], entries: Sequence[tuple[int, float]], lo: float, hi: float) -> int:
        r = len(self.row_lo)
        for c, v in entries:
            if v != 0:
                self.rows.append(r)
                self.cols.append(c)
                self.vals.append(v)
        self.row_lo.append(lo)
        self.row_hi.append(hi)
        self.row_meta.append(meta)
        return r

    def matrix(self, n_cols: int) -> sp.csr_matrix:
        A = sp.coo_matrix((self.vals, (self.rows, self.cols)), shape=(len(self.row_lo), n_cols)).tocsr()
        A.sum_duplicates()
        return A


def _check_hour(expanded: ExpandedNetwork, hour: int) -> None:
    if not 0 <= hour < expanded.network.horizon:
        raise ValueError(f"hour {hour} outside horizon 0..{expanded.network.horizon - 1}")


def _copper_plate(expanded: ExpandedNetwork, hour: int, cost: CostConfig) -> OpfProblem:
    net = expanded.network
    base = net.base_mva
    gens = net.generators
    demand = expanded.demand(hour) / base
    n_g, n_n = len(gens), expanded.n_nodes
    col_meta = [("gen", g) for g in range(n_g)] + [("shed", n) for n in range(n_n)]
    col_lo = np.zeros(n_g + n_n)
    col_hi = np.concatenate([[g.capacity_at(hour) / base for g in gens], demand])
    c = np.concatenate([[g.marginal_cost * base for g in gens], np.full(n_n, cost.load_shed_cost * base)])
    b = _Builder()
    total = float(demand.sum())
    b.add(("balance", -1), [(j, 1.0) for j in range(n_g + n_n)], total, total)
    return OpfProblem(
        variant=OpfVariant.COPPER_PLATE, hour=hour, A=b.matrix(n_g + n_n), row_lo=np.array(b.row_lo),
        row_hi=np.array(b.row_hi), col_lo=col_lo, col_hi=col_hi, cost=c, offset=0.0,
        integrality=np.zeros(n_g + n_n, dtype=bool), col_meta=col_meta, row_meta=b.row_meta, base_mva=base,
        n_nodes=1,
    )


def build_problem(
    expanded: ExpandedNetwork,
    hour: int,
    variant: OpfVariant | str,
    cost_config: CostConfig | None = None,
    bigm_config: BigMConfig | None = None,
) -> OpfProblem:
    """Assemble the hourly DC-OPF for ``variant``.

    ``OTC`` carries one binary per action (breakers first, then switchable
    branches) and the wear-and-tear terms; ``FIXED`` is ``OTC`` with every
    binary substituted by 1; ``COPPER_PLATE`` keeps only the system balance,
    generator bounds and load shedding.
    """
    variant = OpfVariant(variant)
    cost = cost_config or CostConfig()
    _check_hour(expanded, hour)
    if variant is OpfVariant.COPPER_PLATE:
        return _copper_plate(expanded, hour, cost)

    bigm = bigm_config or compute_big_m(expanded)
    bad = bigm.violations(expanded)
    if bad:
        raise ValueError("invalid big-M configuration: " + "; ".join(bad))

    net = expanded.network
    base = net.base_mva
    gens = net.generators
    edges = expanded.edges
    n_n, n_g, n_e = expanded.n_nodes, len(gens), len(edges)
    actions = expanded.action_edges
    n_a = len(actions)

    th0, g0, f0, s0, a0 = 0, n_n, n_n + n_g, n_n + n_g + n_e, n_n + n_g + n_e + n_n
    n_cols = a0 + n_a
    col_meta = (
        [("theta", n) for n in range(n_n)]
        + [("gen", g) for g in range(n_g)]
        + [("flow", e) for e in range(n_e)]
        + [("shed", n) for n in range(n_n)]
        + [("breaker" if edges[e].kind == BREAKER else "branch_status", k) for k, e in enumerate(actions)]
    )
    demand = expanded.demand(hour) / base

    col_lo = np.empty(n_cols)
    col_hi = np.empty(n_cols)
    col_lo[th0:g0], col_hi[th0:g0] = -bigm.theta_bound, bigm.theta_bound
    col_lo[expanded.reference_node] = col_hi[expanded.reference_node] = 0.0
    col_lo[g0:f0] = 0.0
    col_hi[g0:f0] = [g.capacity_at(hour) / base for g in gens]
    breaker_m = iter(bigm.breaker_flow)
    branch_m = iter(bigm.branch)
    angle_m = iter(bigm.breaker_angle)
    breaker_angle_m = {e: next(angle_m) for e in actions if edges[e].kind == BREAKER}
    action_m: dict[int, float] = {}
    for e in actions:
        action_m[e] = next(breaker_m) / base if edges[e].kind == BREAKER else next(branch_m) / base
    for k, e in enumerate(edges):
        # switchable and breaker flows are bounded by their disjunctive rows only
        cap = e.capacity / base if e.kind == PLAIN else INF
        col_lo[f0 + k], col_hi[f0 + k] = -cap, cap
    col_lo[s0:a0], col_hi[s0:a0] = 0.0, demand
    col_lo[a0:], col_hi[a0:] = 0.0, 1.0

    c = np.zeros(n_cols)
    c[g0:f0] = [g.marginal_cost * base for g in gens]
    c[s0:a0] = cost.load_shed_cost * base
    c[a0:] = -cost.wear_and_tear
    offset = cost.wear_and_tear * n_a

    b = _Builder()
    incidence: dict[int, list[tuple[int, float]]] = defaultdict(list)
    for gi, node in enumerate(expanded.gen_node):
        incidence[node].append((g0 + gi, 1.0))
    for k, e in enumerate(edges):
        incidence[e.to_node].append((f0 + k, 1.0))
        incidence[e.from_node].append((f0 + k, -1.0))
    for n in range(n_n):
        b.add(("balance", n), incidence[n] + [(s0 + n, 1.0)], demand[n], demand[n])

    action_col = {e: a0 + k for k, e in enumerate(actions)}
    for k, e in enumerate(edges):
        fcol, tf, tt = f0 + k, th0 + e.from_node, th0 + e.to_node
        if e.kind == PLAIN:
            b.add(("flowdef", k), [(fcol, 1.0), (tf, -e.susceptance), (tt, e.susceptance)], 0.0, 0.0)
        elif e.kind == SWITCHABLE:
            z, m, cap = action_col[k], action_m[k], e.capacity / base
            law = [(fcol, -1.0), (tf, e.susceptance), (tt, -e.susceptance)]
            b.add(("switch_flowdef", k), law + [(z, -m)], -m, INF)
            b.add(("switch_flowdef", k), law + [(z, m)], -INF, m)
            b.add(("switch_limit", k), [(fcol, 1.0), (z, -cap)], -INF, 0.0)
            b.add(("switch_limit", k), [(fcol, 1.0), (z, cap)], 0.0, INF)
        else:
            d, ma, mf = action_col[k], breaker_angle_m[k], action_m[k]
            diff = [(tf, 1.0), (tt, -1.0)]
            b.add(("breaker_angle", k), diff + [(d, -ma)], -ma, INF)
            b.add(("breaker_angle", k), diff + [(d, ma)], -INF, ma)
            b.add(("breaker_flow", k), [(fcol, 1.0), (d, -mf)], -INF, 0.0)
            b.add(("breaker_flow", k), [(fcol, 1.0), (d, mf)], 0.0, INF)

    problem = OpfProblem(
        variant=OpfVariant.OTC, hour=hour, A=b.matrix(n_cols), row_lo=np.array(b.row_lo),
        row_hi=np.array(b.row_hi), col_lo=col_lo, col_hi=col_hi, cost=c, offset=offset,
        integrality=np.arange(n_cols) >= a0, col_meta=col_meta, row_meta=b.row_meta, base_mva=base,
        n_nodes=n_n, action_labels=expanded.action_labels(),
    )
    if variant is OpfVariant.FIXED:
        problem = substitute_binaries(problem, np.ones(n_a))
        problem.variant = OpfVariant.FIXED
    return problem


def add_connectivity(problem: OpfProblem, expanded: ExpandedNetwork) -> OpfProblem:
    """Append a single-commodity artificial flow that forces a connected topology.

    The reference node supplies ``N - 1`` units and every other node absorbs
    one; an edge may carry at most ``N`` units, and only while closed.
    """
    if problem.variant is not OpfVariant.OTC:
        import warnings

        warnings.warn(f"add_connectivity on {problem.variant.value} problem: nothing to do", stacklevel=2)
        return problem
    if problem.has_connectivity:
        return problem
    edges = expanded.edges
    n_n, n_e = expanded.n_nodes, len(edges)
    big = float(n_n)
    c0 = problem.n_cols
    status_col = {e: problem.binary_cols[k] for k, e in enumerate(expanded.action_edges)}

    b = _Builder()
    incidence: dict[int, list[tuple[int, float]]] = defaultdict(list)
    for k, e in enumerate(edges):
        incidence[e.to_node].append((c0 + k, 1.0))
        incidence[e.from_node].append((c0 + k, -1.0))
    for n in range(n_n):
        rhs = -(n_n - 1.0) if n == expanded.reference_node else 1.0
        b.add(("conn_balance", n), incidence[n], rhs, rhs)
    for k, e in enumerate(edges):
        if e.kind == PLAIN:
            continue
        s = status_col[k]
        b.add(("conn_limit", k), [(c0 + k, 1.0), (s, -big)], -INF, 0.0)
        b.add(("conn_limit", k), [(c0 + k, 1.0), (s, big)], 0.0, INF)

    n_cols = c0 + n_e
    A_old = sp.hstack([problem.A, sp.csr_matrix((problem.n_rows, n_e))])
    A = sp.vstack([A_old, b.matrix(n_cols)]).tocsr()
    return replace(
        problem,
        A=A,
        row_lo=np.concatenate([problem.row_lo, b.row_lo]),
        row_hi=np.concatenate([problem.row_hi, b.row_hi]),
        col_lo=np.concatenate([problem.col_lo, np.full(n_e, -big)]),
        col_hi=np.concatenate([problem.col_hi, np.full(n_e, big)]),
        cost=np.concatenate([problem.cost, np.zeros(n_e)]),
        integrality=np.concatenate([problem.integrality, np.zeros(n_e, dtype=bool)]),
        col_meta=problem.col_meta + [("conn_flow", k) for k in range(n_e)],
        row_meta=problem.row_meta + b.row_meta,
        has_connectivity=True,
    )


def add_action_cap(problem: OpfProblem, max_open: int) -> OpfProblem:
    """Limit the number of simultaneously open actions: sum(1 - s_k) <= max_open, i.e. sum(s_k) >= n - max_open."""
    bins = problem.binary_cols
    if bins.size == 0:
        return problem
    row = sp.csr_matrix((np.ones(bins.size), (np.zeros(bins.size, dtype=int), bins)), shape=(1, problem.n_cols))
    return replace(
        problem,
        A=sp.vstack([problem.A, row]).tocsr(),
        row_lo=np.append(problem.row_lo, float(bins.size - max_open)),
        row_hi=np.append(problem.row_hi, INF),
        row_meta=problem.row_meta + [("action_cap", -1)],
    )


_MERGEABLE = {"switch_flowdef", "switch_limit", "breaker_angle", "breaker_flow", "conn_limit"}


def substitute_binaries(problem: OpfProblem, values: Sequence[float]) -> OpfProblem:
    """Replace every binary column by a constant and drop it.

    Row pairs of one disjunction that become identical after substitution are
    merged into a single ranged row, so an all-closed substitution yields
    plain flow-definition equalities.
    """
    bins = problem.binary_cols
    values = np.asarray(values, dtype=float)
    if values.shape != bins.shape:
        raise ValueError(f"topology has {values.size} entries, problem has {bins.size} binaries")
    if bins.size == 0:
        return replace(problem)
    A = problem.A.tocsc()
    shift = A[:, bins] @ values
    keep = np.setdiff1d(np.arange(problem.n_cols), bins)
    A = A[:, keep].tocsr()
    row_lo = problem.row_lo - shift
    row_hi = problem.row_hi - shift

    groups: dict[tuple[str, int], list[int]] = defaultdict(list)
    for i, meta in enumerate(problem.row_meta):
        if meta[0] in _MERGEABLE:
            groups[meta].append(i)
    drop: set[int] = set()
    for rows in groups.values():
        if len(rows) < 2:
            continue
        first = rows[0]
        pattern = A.getrow(first)
        if all((A.getrow(r) != pattern).nnz == 0 for r in rows[1:]):
            row_lo[first] = max(row_lo[r] for r in rows)
            row_hi[first] = min(row_hi[r] for r in rows)
            drop.update(rows[1:])
    live = np.array([i for i in range(problem.n_rows) if i not in drop], dtype=int)

    return replace(
        problem,
        A=A[live],
        row_lo=row_lo[live],
        row_hi=row_hi[live],
        col_lo=problem.col_lo[keep],
        col_hi=problem.col_hi[keep],
        cost=problem.cost[keep],
        offset=problem.offset + float(problem.cost[bins] @ values),
        integrality=np.zeros(keep.size, dtype=bool),
        col_meta=[problem.col_meta[j] for j in keep],
        row_meta=[problem.row_meta[i] for i in live],
        fixed_status=values.copy(),
    )


# ---------------------------------------------------------------------------
# LP-file export


def _fmt(v: float) -> str:
    return repr(float(v))


def _name(meta: tuple[str, int], i: int) -> str:
    kind, ref = meta
    return f"{kind}_{ref if ref >= 0 else 'sys'}_{i}"


def write_lp(problem: OpfProblem, path: str | Path) -> None:
    """Write ``problem`` in CPLEX LP text format (ranged rows split in two)."""
    names = [_name(m, j) for j, m in enumerate(problem.col_meta)]

    def expr(coefs) -> str:
        terms = [f"{'+' if v >= 0 else '-'} {_fmt(abs(v))} {names[j]}" for j, v in coefs]
        return " ".join(terms) if terms else "0 " + names[0]

    lines = [f"\\ variant={problem.variant.value} hour={problem.hour} objective_constant={_fmt(problem.offset)}"]
    lines.append("Minimize")
    lines.append(" obj: " + expr([(j, v) for j, v in enumerate(problem.cost) if v != 0]))
    lines.append("Subject To")
    A = problem.A.tocsr()
    for i in range(problem.n_rows):
        start, end = A.indptr[i], A.indptr[i + 1]
        e = expr(zip(A.indices[start:end], A.data[start:end]))
        nm = _name(problem.row_meta[i], i)
        lo, hi = problem.row_lo[i], problem.row_hi[i]
        if lo == hi:
            lines.append(f" {nm}: {e} = {_fmt(lo)}")
            continue
        if math.isfinite(lo):
            lines.append(f" {nm}_lo: {e} >= {_fmt(lo)}")
        if math.isfinite(hi):
            lines.append(f" {nm}_hi: {e} <= {_fmt(hi)}")
    lines.append("Bounds")
    for j, nm in enumerate(names):
        lo, hi = problem.col_lo[j], problem.col_hi[j]
        if lo == hi:
            lines.append(f" {nm} = {_fmt(lo)}")
        elif not math.isfinite(lo) and not math.isfinite(hi):
            lines.append(f" {nm} free")
        else:
            lo_s = _fmt(lo) if math.isfinite(lo) else "-inf"
            hi_s = _fmt(hi) if math.isfinite(hi) else "+inf"
            lines.append(f" {lo_s} <= {nm} <= {hi_s}")
    bins = [names[j] for j in problem.binary_cols]
    if bins:
        lines.append("Binaries")
        lines.extend(f" {nm}" for nm in bins)
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n")
