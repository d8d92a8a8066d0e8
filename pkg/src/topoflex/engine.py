"""LP oracle (HiGHS) and a best-first branch-and-bound over topology binaries."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import highspy
import numpy as np

from .formulation import OpfProblem, add_action_cap, substitute_binaries

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL = "numerical_error"
NODE_LIMIT = "node_limit"

FEAS_TOL = 1e-6


@dataclass(frozen=True)
class TopologyState:
    """Closed (1) / open (0) status of each breaker and switchable branch."""

    breaker_status: tuple[int, ...] = ()
    branch_status: tuple[int, ...] = ()

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.breaker_status + self.branch_status, dtype=float)

    @property
    def n_open(self) -> int:
        return sum(1 - s for s in self.breaker_status + self.branch_status)

    @property
    def is_base(self) -> bool:
        return self.n_open == 0

    @classmethod
    def from_vector(cls, vec: Sequence[float], n_breakers: int) -> "TopologyState":
        v = tuple(int(round(x)) for x in vec)
        return cls(breaker_status=v[:n_breakers], branch_status=v[n_breakers:])

    @classmethod
    def closed(cls, n_breakers: int, n_branches: int) -> "TopologyState":
        return cls((1,) * n_breakers, (1,) * n_branches)

    def key(self) -> str:
        return "".join(str(s) for s in self.breaker_status) + "|" + "".join(str(s) for s in self.branch_status)


@dataclass
class LpSolution:
    status: str
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    row_dual: np.ndarray = field(default_factory=lambda: np.zeros(0))
    col_dual: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective: float = math.nan
    degenerate: bool = False

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class MilpResult:
    topology: TopologyState
    lp: LpSolution
    objective: float
    explored_node_count: int
    relative_gap: float
    status: str = OPTIMAL
    root_bound: float = math.nan
    heuristic_lp_count: int = 0


def _n_breakers(problem: OpfProblem) -> int:
    return sum(1 for kind, _ in problem.col_meta if kind == "breaker")


class _HighsModel:
    """One HiGHS instance holding ``problem`` with binaries relaxed to their bounds."""

    def __init__(self, problem: OpfProblem) -> None:
        self.problem = problem
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", 1)
        h.setOptionValue("random_seed", 0)
        h.setOptionValue("primal_feasibility_tolerance", 1e-9)
        h.setOptionValue("dual_feasibility_tolerance", 1e-9)
        lp = highspy.HighsLp()
        A = problem.A.tocsc()
        A.sort_indices()
        lp.num_col_ = problem.n_cols
        lp.num_row_ = problem.n_rows
        lp.col_cost_ = problem.cost.astype(float)
        lp.col_lower_ = _inf(problem.col_lo)
        lp.col_upper_ = _inf(problem.col_hi)
        lp.row_lower_ = _inf(problem.row_lo)
        lp.row_upper_ = _inf(problem.row_hi)
        lp.offset_ = float(problem.offset)
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr.astype(np.int32)
        lp.a_matrix_.index_ = A.indices.astype(np.int32)
        lp.a_matrix_.value_ = A.data.astype(float)
        lp.a_matrix_.num_col_ = problem.n_cols
        lp.a_matrix_.num_row_ = problem.n_rows
        h.passModel(lp)
        self.h = h

    def set_bounds(self, cols: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> None:
        if cols.size:
            self.h.changeColsBounds(cols.size, cols.astype(np.int32), lo.astype(float), hi.astype(float))

    def solve(self, full: bool = True) -> LpSolution:
        """Run the simplex; ``full=False`` skips duals and the degeneracy test (node LPs)."""
        h = self.h
        h.run()
        status = h.getModelStatus()
        if status == highspy.HighsModelStatus.kOptimal:
            sol = h.getSolution()
            x = np.array(sol.col_value)
            if not full:
                return LpSolution(status=OPTIMAL, x=x, objective=float(h.getInfo().objective_function_value))
            out = LpSolution(
                status=OPTIMAL,
                x=x,
                row_dual=np.array(sol.row_dual),
                col_dual=np.array(sol.col_dual),
                objective=float(h.getInfo().objective_function_value),
            )
            out.degenerate = self._degenerate(x, np.array(sol.row_value))
            return out
        if status == highspy.HighsModelStatus.kInfeasible:
            return LpSolution(status=INFEASIBLE)
        if status in (highspy.HighsModelStatus.kUnbounded, highspy.HighsModelStatus.kUnboundedOrInfeasible):
            return LpSolution(status=UNBOUNDED)
        return LpSolution(status=NUMERICAL)

    def _degenerate(self, x: np.ndarray, activity: np.ndarray) -> bool:
        """True when a basic variable sits on a bound, i.e. the duals may not be unique."""
        basis = self.h.getBasis()
        if not basis.valid:
            return False
        basic = highspy.HighsBasisStatus.kBasic
        p = self.problem
        col_lo, col_hi = self.h.getLp().col_lower_, self.h.getLp().col_upper_
        col_basic = np.array([s == basic for s in basis.col_status]) & (np.asarray(col_lo) < np.asarray(col_hi))
        row_basic = np.array([s == basic for s in basis.row_status])
        tol = 1e-9
        at_col = (np.abs(x - np.asarray(col_lo)) <= tol) | (np.abs(x - np.asarray(col_hi)) <= tol)
        at_row = (np.abs(activity - p.row_lo) <= tol) | (np.abs(activity - p.row_hi) <= tol)
        return bool(np.any(col_basic & at_col) or np.any(row_basic & at_row))


def _inf(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=float).copy()
    out[np.isposinf(out)] = highspy.kHighsInf
    out[np.isneginf(out)] = -highspy.kHighsInf
    return out


def solve_lp(problem: OpfProblem, relax: bool = False) -> LpSolution:
    """Solve an LP; binary columns must be absent, fixed, or ``relax`` set."""
    if problem.free_binary_cols.size and not relax:
        raise ValueError("problem has free binary columns; fix them or pass relax=True")
    return _HighsModel(problem).solve()


def fix_binaries(problem: OpfProblem, topology: TopologyState | Sequence[float]) -> OpfProblem:
    vec = topology.vector if isinstance(topology, TopologyState) else np.asarray(topology, dtype=float)
    if vec.size != problem.binary_cols.size:
        raise ValueError(f"topology has {vec.size} entries, problem has {problem.binary_cols.size} binaries")
    if vec.size == 0:
        return problem
    return substitute_binaries(problem, vec)


def primal_residual(problem: OpfProblem, x: np.ndarray) -> float:
    """Largest violation of row or column bounds by ``x``."""
    act = problem.A @ x
    viol = np.concatenate([
        problem.row_lo - act, act - problem.row_hi, problem.col_lo - x, x - problem.col_hi,
    ])
    viol = viol[np.isfinite(viol)]
    return float(max(viol.max(initial=0.0), 0.0))


def complementarity_residual(problem: OpfProblem, sol: LpSolution) -> float:
    """Largest |dual * slack| over rows and columns (product of the dual and the distance to the active bound)."""
    act = problem.A @ sol.x
    worst = 0.0
    for dual, val, lo, hi in ((sol.row_dual, act, problem.row_lo, problem.row_hi),
                              (sol.col_dual, sol.x, problem.col_lo, problem.col_hi)):
        slack_lo = np.where(np.isfinite(lo), val - lo, np.inf)
        slack_hi = np.where(np.isfinite(hi), hi - val, np.inf)
        slack = np.where(dual > 0, slack_lo, np.where(dual < 0, slack_hi, 0.0))
        worst = max(worst, float(np.max(np.abs(dual * np.where(np.isfinite(slack), slack, 1e300)), initial=0.0)))
    return worst


# ---------------------------------------------------------------------------
# branch and bound


@dataclass
class BnbOptions:
    relative_gap: float = 1e-6
    node_limit: int = 100_000
    integrality_tolerance: float = 1e-6
    warm_start: TopologyState | None = None
    max_open_actions: int | None = None
    heuristic_interval: int = 10
    local_search: bool = True
    local_search_passes: int = 50


def _better(obj: float, vec: tuple[int, ...], inc_obj: float, inc_vec: tuple[int, ...] | None) -> bool:
    """Lower objective wins; equal objectives prefer more closed actions, then the larger vector."""
    if inc_vec is None:
        return True
    tol = 1e-9 * max(1.0, abs(inc_obj))
    if obj < inc_obj - tol:
        return True
    if obj > inc_obj + tol:
        return False
    return (sum(vec), vec) > (sum(inc_vec), inc_vec)


def branch_and_bound(problem: OpfProblem, options: BnbOptions | None = None) -> MilpResult:
    """Minimise over the binary columns of ``problem``.

    Nodes are explored best-first on their LP-relaxation bound (insertion
    order breaks ties); the branching variable is the most fractional binary,
    lowest index first.  The all-closed topology and, if given, the warm-start
    topology seed the incumbent, which is then improved by a single-flip
    best-improvement descent (``options.local_search``) before the tree search
    starts.  The descent only affects which incumbent prunes the tree; with a
    zero gap and no node limit the result is the same exact optimum.
    """
    opts = options or BnbOptions()
    if opts.max_open_actions is not None:
        problem = add_action_cap(problem, opts.max_open_actions)
    bins = problem.binary_cols
    nb = _n_breakers(problem)
    if bins.size == 0:
        lp = solve_lp(problem)
        return MilpResult(TopologyState(), lp, lp.objective, 1, 0.0, lp.status if not lp.optimal else OPTIMAL,
                          lp.objective)

    model = _HighsModel(problem)
    base_lo = problem.col_lo[bins].copy()
    base_hi = problem.col_hi[bins].copy()
    tol_int = opts.integrality_tolerance
    inc_obj, inc_vec = math.inf, None
    nodes = 0
    heuristic_lps = 0

    def evaluate(lo: np.ndarray, hi: np.ndarray) -> LpSolution:
        model.set_bounds(bins, lo, hi)
        return model.solve(full=False)

    def offer(vec: tuple[int, ...], obj: float) -> None:
        nonlocal inc_obj, inc_vec
        if _better(obj, vec, inc_obj, inc_vec):
            inc_obj, inc_vec = obj, vec

    def try_integer(vec: np.ndarray) -> float:
        nonlocal heuristic_lps
        if np.any(vec < base_lo) or np.any(vec > base_hi):
            return math.inf
        sol = evaluate(vec, vec)
        heuristic_lps += 1
        if not sol.optimal:
            return math.inf
        offer(tuple(int(v) for v in vec), sol.objective)
        return sol.objective

    def descend() -> None:
        # Flip one action at a time, always taking the best strictly improving flip.
        if inc_vec is None:
            return
        current = np.array(inc_vec, dtype=float)
        current_obj = inc_obj
        for _ in range(opts.local_search_passes):
            best_obj, best_k = current_obj, -1
            for k in range(bins.size):
                trial = current.copy()
                trial[k] = 1.0 - trial[k]
                obj = try_integer(trial)
                if obj < best_obj - 1e-9 * max(1.0, abs(best_obj)):
                    best_obj, best_k = obj, k
            if best_k < 0:
                return
            current[best_k] = 1.0 - current[best_k]
            current_obj = best_obj

    try_integer(np.ones(bins.size))
    if opts.warm_start is not None:
        try_integer(opts.warm_start.vector)
    if opts.local_search:
        descend()

    counter = itertools.count()
    heap: list = []

    def push(lo: np.ndarray, hi: np.ndarray) -> None:
        nonlocal nodes
        sol = evaluate(lo, hi)
        nodes += 1
        if sol.status == OPTIMAL:
            heapq.heappush(heap, (sol.objective, next(counter), lo, hi, sol.x[bins]))
        elif sol.status not in (INFEASIBLE,):
            # treat numerically troubled nodes as pruned but keep searching
            pass

    push(base_lo, base_hi)
    root_bound = heap[0][0] if heap else math.inf
    status = OPTIMAL
    lower = root_bound
    while heap:
        bound, _, lo, hi, xb = heap[0]
        lower = bound
        if inc_vec is not None:
            cutoff = inc_obj - max(opts.relative_gap * abs(inc_obj), 1e-9 * max(1.0, abs(inc_obj)))
            if bound >= cutoff:
                break
        if nodes >= opts.node_limit:
            status = NODE_LIMIT
            break
        heapq.heappop(heap)
        frac = np.minimum(xb - np.floor(xb), np.ceil(xb) - xb)
        if frac.max(initial=0.0) <= tol_int:
            offer(tuple(int(round(v)) for v in xb), bound)
            continue
        k = int(np.argmax(frac))  # first index among ties
        if opts.heuristic_interval and nodes % opts.heuristic_interval in (0, 1):
            try_integer(np.where(frac > tol_int, 1.0, np.round(xb)))
        for value in (1.0, 0.0):
            clo, chi = lo.copy(), hi.copy()
            clo[k] = chi[k] = value
            push(clo, chi)
    else:
        lower = inc_obj

    if inc_vec is None:
        return MilpResult(TopologyState(), LpSolution(status=INFEASIBLE), math.inf, nodes, math.inf,
                          INFEASIBLE if status == OPTIMAL else status, root_bound, heuristic_lps)
    lower = min(lower, inc_obj)
    gap = (inc_obj - lower) / max(abs(inc_obj), 1e-9)
    topology = TopologyState.from_vector(inc_vec, nb)
    lp = solve_lp(fix_binaries(problem, topology))
    return MilpResult(topology, lp, lp.objective, nodes, max(gap, 0.0), status, root_bound, heuristic_lps)


def enumerate_topologies(problem: OpfProblem) -> Iterator[tuple[TopologyState, LpSolution]]:
    """Every 0/1 assignment of the binaries, each solved as a fixed LP."""
    bins = problem.binary_cols
    nb = _n_breakers(problem)
    for bits in itertools.product((1, 0), repeat=bins.size):
        topo = TopologyState.from_vector(bits, nb)
        yield topo, solve_lp(fix_binaries(problem, topo))


def exhaustive_search(problem: OpfProblem) -> tuple[TopologyState | None, float]:
    """Brute-force optimum with the same tie-breaking rule as branch-and-bound."""
    best_obj, best_vec = math.inf, None
    for topo, sol in enumerate_topologies(problem):
        if sol.optimal:
            vec = tuple(int(v) for v in topo.vector)
            if _better(sol.objective, vec, best_obj, best_vec):
                best_obj, best_vec = sol.objective, vec
    if best_vec is None:
        return None, math.inf
    return TopologyState.from_vector(best_vec, _n_breakers(problem)), best_obj
