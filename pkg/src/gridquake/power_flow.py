"""Instantaneous system functionality: islanding, DC optimal power flow, shedding.

Damage removes failed buses and edges from the graph; surviving connected
components are screened for viability (at least one generator with residual
capacity and one load with residual demand). Each viable island is dispatched
by a DC optimal power flow at its residual demands; when no feasible dispatch
exists, the smallest non-zero load is shed and the dispatch retried. System
functionality is the total served load across islands.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field as dc_field
from typing import Mapping

import numpy as np

from .fragility import DamageScenario, FunctionalityMap
from .network import Component, NetworkCase, adjacency
from .simplex import solve_lp

#: Number of linear segments used for quadratic generation-cost curves.
COST_SEGMENTS = 4


@dataclass(frozen=True)
class Island:
    """A connected post-damage subnetwork and its dispatchable members."""

    buses: tuple[int, ...]
    generators: tuple[str, ...]
    loads: tuple[str, ...]
    edges: tuple[str, ...]
    viable: bool


@dataclass
class DispatchResult:
    """Outcome of one island dispatch (infeasible is a normal outcome)."""

    feasible: bool
    pg: dict[str, float] = dc_field(default_factory=dict)          # MW per generator
    theta: dict[int, float] = dc_field(default_factory=dict)       # rad per bus
    served: dict[str, float] = dc_field(default_factory=dict)      # MW per load
    flows: dict[str, float] = dc_field(default_factory=dict)       # MW per edge
    shed_loads: list[str] = dc_field(default_factory=list)

    @property
    def total_served(self) -> float:
        return sum(self.served.values())


def find_islands(adj: np.ndarray) -> list[tuple[int, ...]]:
    """Breadth-first partition of matrix indices into connected components.

    Returns index groups ordered by smallest member; isolated indices come
    back as singletons (viability screening happens downstream).
    """
    n = len(adj)
    unseen = set(range(n))
    groups: list[tuple[int, ...]] = []
    for start in range(n):
        if start not in unseen:
            continue
        unseen.discard(start)
        queue = deque([start])
        members = [start]
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(adj[u]):
                v = int(v)
                if v in unseen:
                    unseen.discard(v)
                    queue.append(v)
                    members.append(v)
        groups.append(tuple(sorted(members)))
    return groups


def component_ratios(case: NetworkCase, damage: DamageScenario, func_map: FunctionalityMap) -> dict[str, float]:
    """Residual functionality ratio for every component under a scenario."""
    return {c.id: damage.ratio(c.kind, c.id, func_map) for c in case.components}


def classify_islands(
    case: NetworkCase, damage: DamageScenario, func_map: FunctionalityMap
) -> list[Island]:
    """Island partition of the damage-filtered network with member components."""
    ratios = component_ratios(case, damage, func_map)
    adj = adjacency(case, damage, func_map)
    bus_ids = [b.attached_bus for b in case.buses]
    bus_ok = {b.attached_bus: ratios[b.id] > 0.0 for b in case.buses}
    islands = []
    for group in find_islands(adj):
        members = tuple(bus_ids[i] for i in group)
        if not all(bus_ok[b] for b in members):
            # A failed bus only ever appears as a singleton: inviable.
            islands.append(Island(members, (), (), (), viable=False))
            continue
        in_group = set(members)
        gens = tuple(
            g.id for g in case.generators if g.attached_bus in in_group and ratios[g.id] * g.pg_max > 0.0
        )
        loads = tuple(
            l.id for l in case.loads if l.attached_bus in in_group and ratios[l.id] * l.pd > 0.0
        )
        edges = tuple(
            e.id
            for e in case.edges
            if e.from_bus in in_group and e.to_bus in in_group and ratios[e.id] > 0.0
        )
        islands.append(Island(members, gens, loads, edges, viable=bool(gens) and bool(loads)))
    return islands


def _segment_costs(comp: Component, lo: float, hi: float, segments: int) -> list[tuple[float, float]]:
    """(width, marginal cost) pairs linearizing a convex quadratic cost curve."""
    c2, c1, _ = comp.cost_coeffs or (0.0, 0.0, 0.0)
    width = (hi - lo) / segments
    out = []
    for k in range(segments):
        mid = lo + (k + 0.5) * width
        out.append((width, 2.0 * c2 * mid + c1))
    return out


def _island_topology(case: NetworkCase, island: Island):
    """Angle-elimination data for an island, cached on the case by topology.

    For a connected island the bus angles are a linear function of the
    injections at non-reference buses (through the reduced susceptance
    matrix), so the per-bus balance equalities collapse into one total-power
    equality plus dense flow sensitivities. Damage never alters susceptance,
    only ratings, so the cache key is membership alone.
    """
    cache = getattr(case, "_topology_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(case, "_topology_cache", cache)
    key = (island.buses, island.edges)
    hit = cache.get(key)
    if hit is not None:
        return hit

    buses = sorted(island.buses)
    ref = buses[0]
    others = [b for b in buses if b != ref]
    pos = {b: i for i, b in enumerate(others)}
    n = len(others)
    edges = [case.component(e) for e in island.edges]
    b_red = np.zeros((n, n))
    m_rows = np.zeros((len(edges), n))
    for ei, e in enumerate(edges):
        f, t, b = e.from_bus, e.to_bus, e.susceptance
        if f != ref:
            i = pos[f]
            b_red[i, i] += b
            m_rows[ei, i] += b
        if t != ref:
            j = pos[t]
            b_red[j, j] += b
            m_rows[ei, j] -= b
        if f != ref and t != ref:
            b_red[pos[f], pos[t]] -= b
            b_red[pos[t], pos[f]] -= b
    if n:
        # flows = ptdf @ (net injections at non-reference buses)
        ptdf = np.linalg.solve(b_red.T, m_rows.T).T
    else:
        ptdf = m_rows
    entry = (ref, others, pos, b_red, ptdf)
    cache[key] = entry
    return entry


def dcopf(
    island: Island,
    ratios: Mapping[str, float],
    case: NetworkCase,
    shed: frozenset[str] = frozenset(),
    segments: int = COST_SEGMENTS,
) -> DispatchResult:
    """Minimum-cost dispatch of one viable island at its residual demands.

    Bus angles are referenced to the island's smallest bus id and eliminated
    exactly through the flow sensitivities of :func:`_island_topology`.
    Quadratic generation costs are linearized into ``segments`` pieces so the
    problem stays a pure LP. Returns an infeasible result when no dispatch
    can cover the (non-shed) residual demands within line and generator
    limits.
    """
    base = case.base_mva
    gens = [case.component(g) for g in island.generators]
    loads = [case.component(l) for l in island.loads]
    edges = [case.component(e) for e in island.edges]
    ref, others, pos, b_red, ptdf = _island_topology(case, island)

    seg_meta: list[tuple[int, float]] = []  # (gen index, marginal cost)
    bounds: list[tuple[float, float]] = []
    gen_lo = []
    for gi, g in enumerate(gens):
        alpha = ratios[g.id]
        lo, hi = alpha * g.pg_min / base, alpha * g.pg_max / base
        gen_lo.append(lo)
        for width, slope in _segment_costs(g, lo * base, hi * base, segments):
            seg_meta.append((gi, slope * base))
            bounds.append((0.0, width / base))
    n_seg = len(seg_meta)

    # Fixed per-bus injections (generator minimums less residual demand), p.u.
    fixed = dict.fromkeys(island.buses, 0.0)
    for gi, g in enumerate(gens):
        fixed[g.attached_bus] += gen_lo[gi]
    total_demand = 0.0
    for l in loads:
        if l.id not in shed:
            d = ratios[l.id] * l.pd / base
            fixed[l.attached_bus] -= d
            total_demand += d

    seg_bus = np.zeros((len(others), n_seg)) if others else np.zeros((0, n_seg))
    for j, (gi, _) in enumerate(seg_meta):
        b = gens[gi].attached_bus
        if b != ref:
            seg_bus[pos[b], j] = 1.0

    fixed_red = np.array([fixed[b] for b in others])
    caps = np.array([ratios[e.id] * e.rate / base for e in edges])
    flow_fixed = ptdf @ fixed_red if len(edges) else np.zeros(0)
    flow_gen = ptdf @ seg_bus if len(edges) else np.zeros((0, n_seg))
    a_ub = np.vstack([flow_gen, -flow_gen])
    b_ub = np.concatenate([caps - flow_fixed, caps + flow_fixed])
    a_eq = np.ones((1, n_seg))
    b_eq = np.array([total_demand - sum(gen_lo)])
    c = np.array([slope for _, slope in seg_meta])

    res = solve_lp(c, a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=b_eq, bounds=bounds)
    if not res.optimal:
        return DispatchResult(feasible=False, shed_loads=sorted(shed, key=lambda s: case.component(s).attached_bus))

    x = res.x
    pg_pu = np.array(gen_lo)
    for j, (gi, _) in enumerate(seg_meta):
        pg_pu[gi] += x[j]
    pg = {g.id: float(pg_pu[gi] * base) for gi, g in enumerate(gens)}

    theta = {ref: 0.0}
    if others:
        inj = fixed_red + seg_bus @ x
        ang = np.linalg.solve(b_red, inj)
        for b, v in zip(others, ang):
            theta[b] = float(v)
    flows = {
        e.id: float(base * e.susceptance * (theta[e.from_bus] - theta[e.to_bus]))
        for e in edges
    }
    served = {l.id: (0.0 if l.id in shed else ratios[l.id] * l.pd) for l in loads}
    return DispatchResult(
        feasible=True,
        pg=pg,
        theta=theta,
        served=served,
        flows=flows,
        shed_loads=sorted(shed, key=lambda s: case.component(s).attached_bus),
    )


def shed_and_solve(
    island: Island,
    ratios: Mapping[str, float],
    case: NetworkCase,
    segments: int = COST_SEGMENTS,
) -> DispatchResult:
    """Dispatch with sequential shedding of the smallest non-zero residual load.

    Retries until a feasible dispatch exists or every load in the island has
    been shed; a fully-shed island contributes nothing. Dispatch attempts that
    provably violate the aggregate power balance (demand above total residual
    capacity, or below total minimum generation) are skipped without an LP
    solve; the shed sequence is unaffected.
    """
    residual = {l: ratios[l] * case.component(l).pd for l in island.loads}
    cap_hi = sum(ratios[g] * case.component(g).pg_max for g in island.generators)
    cap_lo = sum(ratios[g] * case.component(g).pg_min for g in island.generators)
    shed: set[str] = set()
    for _ in range(len(island.loads) + 1):
        demand = sum(residual[l] for l in island.loads if l not in shed)
        if cap_lo - 1e-9 <= demand <= cap_hi + 1e-9:
            result = dcopf(island, ratios, case, shed=frozenset(shed), segments=segments)
            if result.feasible:
                return result
        candidates = [l for l in island.loads if l not in shed and residual[l] > 0.0]
        if not candidates:
            break
        # Smallest residual load first; ties broken by lowest bus id.
        victim = min(candidates, key=lambda l: (residual[l], case.component(l).attached_bus))
        shed.add(victim)
    return DispatchResult(
        feasible=False,
        served={l: 0.0 for l in island.loads},
        shed_loads=sorted(shed, key=lambda s: case.component(s).attached_bus),
    )


def _island_key(island: Island, ratios: Mapping[str, float]) -> tuple:
    """Cache key capturing everything the island dispatch depends on."""
    return (
        island.buses,
        tuple((cid, ratios[cid]) for cid in island.generators),
        tuple((cid, ratios[cid]) for cid in island.loads),
        tuple((cid, ratios[cid]) for cid in island.edges),
    )


def evaluate_system(
    case: NetworkCase,
    damage: DamageScenario,
    func_map: FunctionalityMap | None = None,
    cache: dict[tuple, DispatchResult] | None = None,
) -> tuple[float, list[tuple[Island, DispatchResult]]]:
    """Serve every viable island; returns (total served MW, per-island detail).

    ``cache`` memoizes island dispatches across calls (keyed on membership and
    residual ratios), which makes the repeated evaluations of a recovery
    simulation cheap: a repair only re-dispatches the island it touched.
    """
    func_map = func_map or FunctionalityMap()
    ratios = component_ratios(case, damage, func_map)
    detail = []
    total = 0.0
    for island in classify_islands(case, damage, func_map):
        if not island.viable:
            continue
        if cache is None:
            result = shed_and_solve(island, ratios, case)
        else:
            key = _island_key(island, ratios)
            result = cache.get(key)
            if result is None:
                result = shed_and_solve(island, ratios, case)
                cache[key] = result
        total += result.total_served
        detail.append((island, result))
    return total, detail


def system_functionality(
    case: NetworkCase,
    damage: DamageScenario,
    func_map: FunctionalityMap | None = None,
    cache: dict[tuple, DispatchResult] | None = None,
) -> float:
    """Aggregate served load (MW) across all viable islands."""
    total, _ = evaluate_system(case, damage, func_map, cache)
    return total


def check_dispatch(
    case: NetworkCase,
    island: Island,
    ratios: Mapping[str, float],
    result: DispatchResult,
    tol: float = 1e-6,
) -> list[str]:
    """Independent post-hoc audit of a feasible dispatch against all constraints.

    Recomputes nodal balance, line loadings and generator bounds from the
    returned angles and outputs (never from solver internals); returns a list
    of human-readable violations, empty when the dispatch is clean.
    """
    problems: list[str] = []
    if not result.feasible:
        return problems
    inj = {b: 0.0 for b in island.buses}
    for g in island.generators:
        comp = case.component(g)
        alpha = ratios[g]
        pg = result.pg[g]
        if pg < alpha * comp.pg_min - tol or pg > alpha * comp.pg_max + tol:
            problems.append(f"{g}: output {pg:.6f} outside [{alpha * comp.pg_min:.6f}, {alpha * comp.pg_max:.6f}]")
        inj[comp.attached_bus] += pg
    for l in island.loads:
        inj[case.component(l).attached_bus] -= result.served[l]
    for e in island.edges:
        comp = case.component(e)
        flow = case.base_mva * comp.susceptance * (result.theta[comp.from_bus] - result.theta[comp.to_bus])
        if abs(flow) > ratios[e] * comp.rate + tol:
            problems.append(f"{e}: flow {flow:.6f} exceeds limit {ratios[e] * comp.rate:.6f}")
        inj[comp.from_bus] -= flow
        inj[comp.to_bus] += flow
    for b, residual in inj.items():
        if abs(residual) > tol:
            problems.append(f"bus {b}: nodal balance residual {residual:.3e}")
    return problems
