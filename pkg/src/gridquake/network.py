"""Electric power network model: typed components, case files, damage-filtered graph.

The canonical case representation is a single JSON document (buses, generators,
loads, branches, coordinates). A converter for MATPOWER ``.m`` case files lives
in :mod:`gridquake.matpower`. Generators are aggregated into one plant per bus;
branch rows flagged in the metadata are substation edges (damageable), all
remaining branches are transmission lines (assumed seismically robust).
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping

import numpy as np

if TYPE_CHECKING:
    from .fragility import DamageScenario, FunctionalityMap


class CaseParseError(ValueError):
    """Malformed case file content (carries a line number where known)."""


class CaseValidationError(ValueError):
    """Structurally valid input that violates a network invariant."""


class ComponentKind(enum.Enum):
    BUS_NODE = "bus_node"
    GENERATION_PLANT = "generation_plant"
    LOAD_UNIT = "load_unit"
    SUBSTATION = "substation"
    TRANSMISSION_LINE = "transmission_line"


#: Kinds that can take earthquake damage; transmission lines are excluded.
DAMAGEABLE_KINDS = (
    ComponentKind.BUS_NODE,
    ComponentKind.GENERATION_PLANT,
    ComponentKind.LOAD_UNIT,
    ComponentKind.SUBSTATION,
)

_ID_SPLIT = re.compile(r"(\d+)")


def natural_key(component_id: str) -> tuple:
    """Sort key treating embedded integers numerically (bus2 < bus10)."""
    return tuple(int(tok) if tok.isdigit() else tok for tok in _ID_SPLIT.split(component_id))


@dataclass(frozen=True)
class Component:
    """One network element. Fields not relevant to the kind stay None."""

    id: str
    kind: ComponentKind
    location: tuple[float, float] | None = None
    attached_bus: int | None = None          # generators and loads
    from_bus: int | None = None              # edges
    to_bus: int | None = None
    pg_min: float | None = None              # generators, MW
    pg_max: float | None = None
    cost_coeffs: tuple[float, float, float] | None = None  # (quadratic, linear, constant)
    pd: float | None = None                  # loads, MW
    rate: float | None = None                # edges, MW
    susceptance: float | None = None         # edges, per-unit (1/x)

    @property
    def is_edge(self) -> bool:
        return self.kind in (ComponentKind.SUBSTATION, ComponentKind.TRANSMISSION_LINE)


@dataclass(frozen=True)
class NetworkCase:
    """Immutable validated network; shareable across simulation workers."""

    components: tuple[Component, ...]
    base_mva: float
    f0: float = field(init=False)

    def __post_init__(self) -> None:
        _validate(self.components, self.base_mva)
        object.__setattr__(self, "f0", sum(c.pd for c in self.components if c.kind is ComponentKind.LOAD_UNIT))
        object.__setattr__(self, "_by_id", {c.id: c for c in self.components})
        buses = tuple(c for c in self.components if c.kind is ComponentKind.BUS_NODE)
        object.__setattr__(self, "_buses", buses)
        object.__setattr__(self, "_bus_index", {b.attached_bus: i for i, b in enumerate(buses)})

    # -- accessors -----------------------------------------------------------

    def component(self, component_id: str) -> Component:
        return self._by_id[component_id]

    @property
    def buses(self) -> tuple[Component, ...]:
        return self._buses

    @property
    def generators(self) -> tuple[Component, ...]:
        return tuple(c for c in self.components if c.kind is ComponentKind.GENERATION_PLANT)

    @property
    def loads(self) -> tuple[Component, ...]:
        return tuple(c for c in self.components if c.kind is ComponentKind.LOAD_UNIT)

    @property
    def edges(self) -> tuple[Component, ...]:
        return tuple(c for c in self.components if c.is_edge)

    def damageable_components(self) -> tuple[Component, ...]:
        return tuple(c for c in self.components if c.kind in DAMAGEABLE_KINDS)

    def bus_index(self, bus_id: int) -> int:
        """Position of a bus id in the adjacency-matrix ordering."""
        return self._bus_index[bus_id]

    def bus_degree(self, bus_id: int) -> int:
        """Number of branch rows (lines and substations) incident to a bus."""
        return sum(1 for e in self.edges if bus_id in (e.from_bus, e.to_bus))


def _validate(components: Iterable[Component], base_mva: float) -> None:
    if base_mva <= 0:
        raise CaseValidationError(f"base_mva must be positive, got {base_mva}")
    seen: set[str] = set()
    bus_ids: set[int] = set()
    for c in components:
        if c.id in seen:
            raise CaseValidationError(f"duplicate component id {c.id!r}")
        seen.add(c.id)
        if c.kind is ComponentKind.BUS_NODE:
            if c.attached_bus is None:
                raise CaseValidationError(f"{c.id}: bus node missing numeric bus id")
            if c.location is None:
                raise CaseValidationError(f"{c.id}: missing coordinate")
            bus_ids.add(c.attached_bus)
    for c in components:
        if c.kind is ComponentKind.GENERATION_PLANT:
            if c.attached_bus not in bus_ids:
                raise CaseValidationError(f"{c.id}: dangling bus reference {c.attached_bus}")
            if c.pg_min is None or c.pg_max is None or c.pg_min > c.pg_max:
                raise CaseValidationError(f"{c.id}: requires pg_min <= pg_max")
        elif c.kind is ComponentKind.LOAD_UNIT:
            if c.attached_bus not in bus_ids:
                raise CaseValidationError(f"{c.id}: dangling bus reference {c.attached_bus}")
            if c.pd is None or c.pd < 0:
                raise CaseValidationError(f"{c.id}: demand must be >= 0")
        elif c.is_edge:
            if c.from_bus not in bus_ids or c.to_bus not in bus_ids:
                raise CaseValidationError(f"{c.id}: edge endpoint not a known bus")
            if c.rate is None or c.rate <= 0:
                raise CaseValidationError(f"{c.id}: edge rating must be positive")
            if c.susceptance is None or c.susceptance <= 0:
                raise CaseValidationError(f"{c.id}: edge susceptance must be positive")


# -- native JSON case format --------------------------------------------------


def parse_case(text: str) -> NetworkCase:
    """Parse the native JSON case format into a validated NetworkCase.

    The document carries ``buses[]``, ``generators[]``, ``loads[]``,
    ``branches[]`` (with ``is_substation`` flags) and ``coordinates{}``.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    try:
        coords = {int(k): (float(v[0]), float(v[1])) for k, v in doc["coordinates"].items()}
        components: list[Component] = []
        for row in doc["buses"]:
            bus_id = int(row["id"])
            if bus_id not in coords:
                raise CaseValidationError(f"bus {bus_id}: missing coordinate")
            components.append(
                Component(
                    id=f"bus{bus_id}",
                    kind=ComponentKind.BUS_NODE,
                    attached_bus=bus_id,
                    location=coords[bus_id],
                )
            )
        for row in doc["generators"]:
            bus_id = int(row["bus"])
            cost = row.get("cost", [0.0, 0.0, 0.0])
            components.append(
                Component(
                    id=f"gen{bus_id}",
                    kind=ComponentKind.GENERATION_PLANT,
                    attached_bus=bus_id,
                    location=coords.get(bus_id),
                    pg_min=float(row["pg_min"]),
                    pg_max=float(row["pg_max"]),
                    cost_coeffs=(float(cost[0]), float(cost[1]), float(cost[2])),
                )
            )
        for row in doc["loads"]:
            bus_id = int(row["bus"])
            components.append(
                Component(
                    id=f"load{bus_id}",
                    kind=ComponentKind.LOAD_UNIT,
                    attached_bus=bus_id,
                    location=coords.get(bus_id),
                    pd=float(row["pd"]),
                )
            )
        for i, row in enumerate(doc["branches"], start=1):
            f, t = int(row["from"]), int(row["to"])
            kind = ComponentKind.SUBSTATION if row.get("is_substation") else ComponentKind.TRANSMISSION_LINE
            loc = None
            if f in coords and t in coords:
                loc = ((coords[f][0] + coords[t][0]) / 2.0, (coords[f][1] + coords[t][1]) / 2.0)
            components.append(
                Component(
                    id=f"branch{i}",
                    kind=kind,
                    from_bus=f,
                    to_bus=t,
                    location=loc,
                    rate=float(row["rate"]),
                    susceptance=float(row["susceptance"]),
                )
            )
        base_mva = float(doc["base_mva"])
    except KeyError as exc:
        raise CaseParseError(f"case document missing field {exc.args[0]!r}") from exc
    return NetworkCase(components=tuple(components), base_mva=base_mva)


def serialize_case(case: NetworkCase) -> str:
    """Serialize to the native JSON format (stable ordering, round-trip safe)."""
    doc = {
        "base_mva": case.base_mva,
        "buses": [{"id": b.attached_bus} for b in case.buses],
        "generators": [
            {
                "bus": g.attached_bus,
                "pg_min": g.pg_min,
                "pg_max": g.pg_max,
                "cost": list(g.cost_coeffs or (0.0, 0.0, 0.0)),
            }
            for g in case.generators
        ],
        "loads": [{"bus": l.attached_bus, "pd": l.pd} for l in case.loads],
        "branches": [
            {
                "from": e.from_bus,
                "to": e.to_bus,
                "rate": e.rate,
                "susceptance": e.susceptance,
                "is_substation": e.kind is ComponentKind.SUBSTATION,
            }
            for e in case.edges
        ],
        "coordinates": {str(b.attached_bus): list(b.location) for b in case.buses},
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def load_case(path) -> NetworkCase:
    with open(path, encoding="utf-8") as fh:
        return parse_case(fh.read())


# -- damage-filtered graph view ------------------------------------------------


def adjacency(
    case: NetworkCase,
    damage: "DamageScenario",
    func_map: "FunctionalityMap" | None = None,
) -> np.ndarray:
    """Binary bus adjacency under a damage scenario.

    An entry (i, j) is 1 iff both endpoint buses are functional (ratio > 0)
    and at least one connecting edge is functional. Symmetric, zero diagonal.
    """
    if func_map is None:
        from .fragility import FunctionalityMap

        func_map = FunctionalityMap()
    n = len(case.buses)
    a = np.zeros((n, n), dtype=np.int8)
    bus_ok = {
        b.attached_bus: damage.ratio(b.kind, b.id, func_map) > 0.0 for b in case.buses
    }
    for e in case.edges:
        if not (bus_ok[e.from_bus] and bus_ok[e.to_bus]):
            continue
        if damage.ratio(e.kind, e.id, func_map) <= 0.0:
            continue
        i, j = case.bus_index(e.from_bus), case.bus_index(e.to_bus)
        a[i, j] = 1
        a[j, i] = 1
    return a


def component_sites(case: NetworkCase) -> dict[str, tuple[float, float]]:
    """Locations of all damageable components, in case order.

    Generators and loads sit at their bus; substation edges at the midpoint
    of their endpoints (the layout used for intensity-field sampling).
    """
    sites: dict[str, tuple[float, float]] = {}
    coords: Mapping[int, tuple[float, float]] = {b.attached_bus: b.location for b in case.buses}
    for comp in case.damageable_components():
        if comp.is_edge:
            (x1, y1), (x2, y2) = coords[comp.from_bus], coords[comp.to_bus]
            sites[comp.id] = ((x1 + x2) / 2.0, (y1 + y2) / 2.0)
        else:
            sites[comp.id] = coords[comp.attached_bus]
    return sites
