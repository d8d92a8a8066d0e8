from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from topoflex.grid import BREAKER, PLAIN, Branch, Bus, Generator, Network, ParseConfig, expand_topology, parse_network, with_breakers
from topoflex.study import load_config, load_network

ROOT = Path(__file__).resolve().parents[1]
THREE_BUS = ROOT / "data" / "fixtures" / "three_bus"
RTS = ROOT / "data" / "rts_gmlc"
RTS_CONFIG = RTS / "study.yaml"

# (criterion, verdict, detail) lines collected by the acceptance suite
ACCEPTANCE: list[tuple[str, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict, detail in sorted(ACCEPTANCE, key=lambda t: int(t[0][1:])):
        terminalreporter.write_line(f"{name} {verdict}: {detail}")


@pytest.fixture(scope="session")
def three_bus_dir() -> Path:
    return THREE_BUS


@pytest.fixture(scope="session")
def three_bus():
    """Fixture network with line AB switchable (1 action)."""
    return parse_network(THREE_BUS, ParseConfig(switchable_branches=["AB"], horizon=1))


@pytest.fixture(scope="session")
def three_bus_fixed():
    return parse_network(THREE_BUS, ParseConfig(horizon=1))


@pytest.fixture(scope="session")
def three_bus_expanded(three_bus):
    return expand_topology(three_bus)


@pytest.fixture(scope="session")
def rts_config():
    return load_config(RTS_CONFIG)


@pytest.fixture(scope="session")
def rts_plain():
    """RTS network without any actions."""
    return parse_network(RTS)


@pytest.fixture(scope="session")
def rts(rts_config):
    """RTS network with the frozen study action set."""
    return load_network(rts_config)


# the 18 highest-degree buses: a wide action set for structural checks
WIDE_SPLIT = [109, 110, 111, 112, 113, 115, 116, 121, 123, 209, 210, 215, 221, 223, 309, 310, 321, 323]


@pytest.fixture(scope="session")
def rts_wide(rts_config):
    """RTS network with 18 breakers and the study's 12 switchable lines (30 actions)."""
    return load_network(rts_config, WIDE_SPLIT)


def random_network(seed: int, n_bus: int | None = None, max_actions: int = 12) -> Network:
    """Connected 4-6 bus single-hour network with random breakers and switchable lines."""
    rng = np.random.default_rng(seed)
    n = n_bus or int(rng.integers(4, 7))
    ids = list(range(1, n + 1))
    edges = set()
    for k in range(1, n):  # random spanning tree
        edges.add((int(rng.integers(0, k)), k))
    for _ in range(int(rng.integers(1, n + 1))):
        a, b = sorted(rng.choice(n, 2, replace=False).tolist())
        edges.add((a, b))
    edges = sorted(edges)
    # a parallel copy of a random edge makes some splits (and switchable lines) harmless
    edges.append(edges[int(rng.integers(0, len(edges)))])
    branches = []
    for i, (a, b) in enumerate(edges):
        branches.append(Branch(id=f"L{i:02d}", from_bus=ids[a], to_bus=ids[b],
                               susceptance=float(rng.uniform(2, 20)), capacity=float(rng.uniform(20, 120))))
    demand = rng.uniform(0, 80, n)
    buses = tuple(Bus(id=ids[i], area="1", is_reference=i == 0, demand_profile=np.array([demand[i]])) for i in range(n))
    gens = []
    for i in range(n):
        if i == 0 or rng.random() < 0.6:
            gens.append(Generator(id=f"G{i}", bus=ids[i], category="thermal",
                                  marginal_cost=float(rng.integers(5, 80)),
                                  profile=np.array([float(rng.uniform(30, 150))])))
        if rng.random() < 0.4:
            gens.append(Generator(id=f"W{i}", bus=ids[i], category="wind", marginal_cost=0.0,
                                  profile=np.array([float(rng.uniform(0, 100))])))
    net = Network(buses=buses, branches=tuple(branches), generators=tuple(gens), name=f"random{seed}")
    degree = {b: 0 for b in ids}
    for br in branches:
        degree[br.from_bus] += 1
        degree[br.to_bus] += 1
    splittable = [b for b in ids if degree[b] >= 2]
    n_split = int(rng.integers(0, min(len(splittable), 4) + 1))
    split = sorted(rng.choice(splittable, n_split, replace=False).tolist()) if n_split else []
    n_sw = int(rng.integers(1, min(len(branches), max_actions - n_split) + 1))
    switchable = sorted(rng.choice([b.id for b in branches], n_sw, replace=False).tolist())
    return with_breakers(net, split, switchable)


def disjunction_violations(ex, problem, x, bigm, tol: float = 1e-6) -> list[str]:
    """Check the switched rows of a fixed-topology solution against their intended meaning.

    Closed elements must obey the flow law (breakers: equal angles); open ones
    must carry no flow while their big-M rows keep strict slack.
    """
    base = problem.base_mva
    th, fl = problem.cols("theta"), problem.cols("flow")
    status = dict(zip(ex.action_edges, problem.fixed_status))
    breakers = [i for i in ex.action_edges if ex.edges[i].kind == BREAKER]
    branches = [i for i in ex.action_edges if ex.edges[i].kind != BREAKER]
    m_angle, m_branch = dict(zip(breakers, bigm.breaker_angle)), dict(zip(branches, bigm.branch))
    bad = []
    for k, e in enumerate(ex.edges):
        if e.kind == PLAIN:
            continue
        diff = x[th[e.from_node]] - x[th[e.to_node]]
        flow = x[fl[k]]
        closed = status[k] == 1
        if e.kind == BREAKER:
            ok = abs(diff) <= tol if closed else abs(flow) <= tol and abs(diff) < m_angle[k]
        else:
            ok = (abs(flow - e.susceptance * diff) <= tol if closed
                  else abs(flow) <= tol and abs(e.susceptance * diff) * base < m_branch[k])
        if not ok:
            bad.append(f"{e.kind} {e.element} ({'closed' if closed else 'open'}): diff={diff:.3g} flow={flow:.3g}")
    return bad
