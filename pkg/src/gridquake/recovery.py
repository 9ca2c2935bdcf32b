"""Event-driven repair simulation under a fixed crew pool and priority rule.

Crews work a queue built from *perceived* damage (information available to the
operator), while repair effort and functionality depend on *true* damage.
Components the assessment missed are discovered only after the initial queue
is worked off, and cost extra repair time. System functionality is re-evaluated
after every completed repair, yielding a piecewise-constant recovery curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .fragility import DamageScenario, DamageState, FunctionalityMap
from .network import ComponentKind, NetworkCase, natural_key
from .perception import PerceivedScenario
from .power_flow import system_functionality

#: Shortest possible repair (days); also the on-site cost of verifying a
#: falsely-reported component.
MIN_REPAIR_DAYS = 0.2

# Repair duration normal(mu, sigma) in days per kind and damage state DS1..DS4.
DEFAULT_REPAIR: dict[ComponentKind, tuple[tuple[float, float], ...]] = {
    ComponentKind.BUS_NODE: ((0.8, 0.4), (2.5, 1.0), (5.5, 2.0), (7.0, 3.0)),
    ComponentKind.GENERATION_PLANT: ((0.5, 0.1), (3.6, 3.6), (22.0, 21.0), (65.0, 30.0)),
    ComponentKind.LOAD_UNIT: ((0.3, 0.2), (1.0, 0.5), (3.0, 1.5), (7.0, 3.0)),
    ComponentKind.SUBSTATION: ((1.0, 0.6), (3.0, 1.5), (7.0, 3.5), (30.0, 15.0)),
}

_TYPE_PRIORITY = {
    ComponentKind.BUS_NODE: 0,
    ComponentKind.GENERATION_PLANT: 1,
    ComponentKind.LOAD_UNIT: 2,
    ComponentKind.SUBSTATION: 3,
}


@dataclass(frozen=True)
class RepairParams:
    """Normal repair-duration parameters per (kind, damage state DS1..DS4)."""

    params: Mapping[ComponentKind, tuple[tuple[float, float], ...]] = field(
        default_factory=lambda: dict(DEFAULT_REPAIR)
    )

    def for_state(self, kind: ComponentKind, ds: DamageState) -> tuple[float, float]:
        return self.params[kind][int(ds) - 1]


@dataclass(frozen=True)
class CrewPool:
    """Available repair teams and the fixed site-to-site transfer time."""

    n_crews: int = 3
    transfer_days: float = 0.25

    def __post_init__(self) -> None:
        if self.n_crews < 1:
            raise ValueError("need at least one crew")
        if self.transfer_days < 0:
            raise ValueError("transfer time must be >= 0")


@dataclass
class RepairTask:
    component_id: str
    kind: ComponentKind
    perceived_ds: DamageState
    true_ds: DamageState
    duration: float = 0.0
    start: float = 0.0
    end: float = 0.0
    crew: int = -1
    is_rediscovery: bool = False


@dataclass
class RecoveryTrajectory:
    """Piecewise-constant system functionality with repair-event annotations."""

    breakpoints: list[tuple[float, float]]       # (days, MW), strictly increasing t
    gantt: list[RepairTask]                      # completed tasks only
    full_recovery_time: float | None
    horizon: float
    truncated: bool = False

    def value_at(self, t: float) -> float:
        """F(t): value of the last breakpoint at or before t."""
        f = self.breakpoints[0][1]
        for bt, bf in self.breakpoints:
            if bt > t:
                break
            f = bf
        return f


def _priority_key(case: NetworkCase, component_id: str):
    comp = case.component(component_id)
    if comp.kind is ComponentKind.GENERATION_PLANT:
        capacity = comp.pg_max
    elif comp.kind is ComponentKind.LOAD_UNIT:
        capacity = comp.pd
    elif comp.kind is ComponentKind.SUBSTATION:
        capacity = comp.rate
    else:
        capacity = float(case.bus_degree(comp.attached_bus))
    return (_TYPE_PRIORITY[comp.kind], -capacity, natural_key(component_id))


def build_queue(perceived: PerceivedScenario, case: NetworkCase) -> list[str]:
    """Repair order for all components assessed as damaged.

    Buses first, then plants, loads and substations; within a type, larger
    capacity first (line count for buses), ids breaking ties.
    """
    damaged = [cid for cid, ds in perceived.perceived.items() if ds >= DamageState.SLIGHT]
    return sorted(damaged, key=lambda cid: _priority_key(case, cid))


def sample_duration(
    kind: ComponentKind,
    ds: DamageState,
    rng: np.random.Generator,
    params: RepairParams | None = None,
) -> float:
    """Draw a repair duration (days), floored at the minimum plausible job."""
    if ds < DamageState.SLIGHT:
        raise ValueError("no repair duration for an undamaged component")
    mu, sigma = (params or RepairParams()).for_state(kind, ds)
    return max(MIN_REPAIR_DAYS, float(rng.normal(mu, sigma)))


def missed_components(
    case: NetworkCase,
    true_state: Mapping[str, DamageState],
    queued_ever: set[str],
    func_map: FunctionalityMap,
) -> list[str]:
    """Components the assessment never queued although they impair functionality."""
    out = []
    for comp in case.damageable_components():
        if comp.id in queued_ever:
            continue
        if func_map.ratio(comp.kind, true_state[comp.id]) < 1.0:
            out.append(comp.id)
    return sorted(out, key=lambda cid: _priority_key(case, cid))


def simulate(
    case: NetworkCase,
    true: DamageScenario,
    perceived: PerceivedScenario,
    crews: CrewPool,
    rng: np.random.Generator,
    repair_params: RepairParams | None = None,
    func_map: FunctionalityMap | None = None,
    horizon_days: float = 200.0,
    rediscovery_penalty: float = 1.3,
) -> RecoveryTrajectory:
    """Run one recovery to completion (or the horizon). Deterministic per seed.

    Completing a repair restores the component's true state to undamaged and
    triggers a functionality re-evaluation. A falsely-reported component costs
    a crew the minimum on-site time and changes nothing. After the initial
    queue is fully worked off, any damaged-but-never-queued components are
    appended with their durations inflated by ``rediscovery_penalty``.
    """
    repair_params = repair_params or RepairParams()
    func_map = func_map or FunctionalityMap()

    state: dict[str, DamageState] = dict(true.state)
    dispatch_cache: dict[tuple, object] = {}
    f_now = system_functionality(case, DamageScenario(state=state), func_map, dispatch_cache)
    breakpoints: list[tuple[float, float]] = [(0.0, f_now)]
    full_recovery: float | None = 0.0 if f_now >= case.f0 - 1e-9 else None

    queue: list[RepairTask] = [
        RepairTask(
            component_id=cid,
            kind=case.component(cid).kind,
            perceived_ds=perceived.perceived[cid],
            true_ds=state[cid],
        )
        for cid in build_queue(perceived, case)
    ]
    availability = dict(perceived.available_at)
    queued_ever = {task.component_id for task in queue}

    crew_free = [0.0] * crews.n_crews
    active: list[RepairTask] = []
    discovery_done = False
    truncated = False
    t = 0.0

    def dispatch(now: float) -> None:
        for crew_id in range(crews.n_crews):
            if crew_free[crew_id] > now:
                continue
            idx = next(
                (i for i, task in enumerate(queue) if availability.get(task.component_id, 0.0) <= now),
                None,
            )
            if idx is None:
                return  # nothing dispatchable for any crew
            task = queue.pop(idx)
            true_ds = state[task.component_id]
            if true_ds >= DamageState.SLIGHT:
                duration = sample_duration(task.kind, true_ds, rng, repair_params)
            else:
                duration = MIN_REPAIR_DAYS  # false positive: verify on site
            if task.is_rediscovery:
                duration *= rediscovery_penalty
            task.duration = duration
            task.start = now + crews.transfer_days
            task.end = task.start + duration
            task.crew = crew_id
            active.append(task)
            crew_free[crew_id] = task.end

    gantt: list[RepairTask] = []
    while True:
        dispatch(t)
        if not active:
            pending = [availability.get(task.component_id, 0.0) for task in queue]
            if pending:
                t_next = min(pending)
                if t_next >= horizon_days:
                    truncated = True
                    break
                t = t_next
                continue
            if not discovery_done:
                discovery_done = True
                extra = missed_components(case, state, queued_ever, func_map)
                for cid in extra:
                    queue.append(
                        RepairTask(
                            component_id=cid,
                            kind=case.component(cid).kind,
                            perceived_ds=perceived.perceived.get(cid, DamageState.NONE),
                            true_ds=state[cid],
                            is_rediscovery=True,
                        )
                    )
                    availability[cid] = t
                    queued_ever.add(cid)
                if extra:
                    continue
            break

        t_next = min(task.end for task in active)
        idle = [availability.get(task.component_id, 0.0) for task in queue] if any(
            cf <= t for cf in crew_free
        ) else []
        waiting = [a for a in idle if a > t]
        if waiting:
            t_next = min(t_next, min(waiting))
        if t_next > horizon_days:
            truncated = True
            break
        t = t_next

        due = sorted((task for task in active if task.end <= t + 1e-12), key=lambda k: (k.end, k.crew))
        for task in due:
            active.remove(task)
            state[task.component_id] = DamageState.NONE
            gantt.append(task)
            f_now = system_functionality(case, DamageScenario(state=state), func_map, dispatch_cache)
            if breakpoints[-1][0] == t:
                breakpoints[-1] = (t, f_now)
            else:
                breakpoints.append((t, f_now))
            if full_recovery is None and f_now >= case.f0 - 1e-9:
                full_recovery = t

    if queue or active:
        truncated = True
    return RecoveryTrajectory(
        breakpoints=breakpoints,
        gantt=gantt,
        full_recovery_time=full_recovery,
        horizon=horizon_days,
        truncated=truncated,
    )
