"""MATPOWER ``.m`` case ingestion (restricted to the standard data matrices).

Reads ``mpc.baseMVA`` and the ``mpc.bus`` / ``mpc.gen`` / ``mpc.branch`` /
``mpc.gencost`` tables, then builds a :class:`~gridquake.network.NetworkCase`:

* one load unit per bus with positive demand (bus-table PD column),
* generating units aggregated into one plant per bus (out-of-service and
  zero-capacity units such as synchronous condensers are dropped),
* branch susceptance taken as 1/x; branch rows listed in the coordinate
  metadata become substation edges, everything else a transmission line.

Plant cost curves assume units share output in proportion to capacity, which
collapses each bus's polynomial unit costs into a single quadratic.
"""

from __future__ import annotations

import json
import re

from .network import CaseParseError, CaseValidationError, Component, ComponentKind, NetworkCase

_MATRIX_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[", re.MULTILINE)
_SCALAR_RE = re.compile(r"mpc\.baseMVA\s*=\s*([0-9eE+.\-]+)\s*;")

REQUIRED_TABLES = ("bus", "gen", "branch", "gencost")

# MATPOWER column positions used here.
_BUS_ID, _BUS_PD = 0, 2
_GEN_BUS, _GEN_STATUS, _GEN_PMAX, _GEN_PMIN = 0, 7, 8, 9
_BR_FROM, _BR_TO, _BR_X, _BR_RATE_A = 0, 1, 3, 5
_COST_MODEL, _COST_NCOST = 0, 3


def _parse_matrix(text: str, name: str) -> list[tuple[int, list[float]]]:
    """Extract one mpc.<name> matrix as (line_number, row_values) tuples."""
    match = re.search(rf"mpc\.{name}\s*=\s*\[", text)
    if match is None:
        raise CaseParseError(f"missing table mpc.{name}")
    start = match.end()
    end = text.find("];", start)
    if end < 0:
        raise CaseParseError(f"unterminated table mpc.{name}")
    body = text[start:end]
    first_line = text.count("\n", 0, start) + 1
    rows: list[tuple[int, list[float]]] = []
    for offset, raw in enumerate(body.split("\n")):
        line_no = first_line + offset
        stripped = raw.split("%", 1)[0].strip().rstrip(";").strip()
        if not stripped:
            continue
        try:
            rows.append((line_no, [float(tok) for tok in stripped.split()]))
        except ValueError as exc:
            raise CaseParseError(f"mpc.{name} line {line_no}: malformed row {stripped!r}") from exc
    return rows


def _unit_quadratic(cost_row: list[float], line_no: int) -> tuple[float, float, float]:
    """Polynomial gencost row -> (c2, c1, c0); linear cost padded with c2 = 0."""
    model = int(cost_row[_COST_MODEL])
    if model != 2:
        raise CaseParseError(f"mpc.gencost line {line_no}: only polynomial model 2 supported")
    ncost = int(cost_row[_COST_NCOST])
    coeffs = cost_row[4 : 4 + ncost]
    if len(coeffs) != ncost:
        raise CaseParseError(f"mpc.gencost line {line_no}: expected {ncost} coefficients")
    padded = [0.0] * (3 - ncost) + coeffs if ncost < 3 else coeffs[-3:]
    return (padded[0], padded[1], padded[2])


def parse_matpower(text: str, coords_doc: dict) -> NetworkCase:
    """Convert MATPOWER case text plus a coordinate/metadata document.

    ``coords_doc`` format::

        {"coordinates": {"<bus_id>": [x_km, y_km], ...},
         "substation_branches": [<1-based branch row>, ...]}
    """
    scalar = _SCALAR_RE.search(text)
    if scalar is None:
        raise CaseParseError("missing scalar mpc.baseMVA")
    base_mva = float(scalar.group(1))

    tables = {name: _parse_matrix(text, name) for name in REQUIRED_TABLES}
    try:
        coords = {int(k): (float(v[0]), float(v[1])) for k, v in coords_doc["coordinates"].items()}
        substation_rows = {int(r) for r in coords_doc.get("substation_branches", [])}
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseParseError(f"invalid coordinate metadata: {exc}") from exc

    # Canonical component order (matching the native format): buses,
    # generators, loads, branches.
    bus_comps: list[Component] = []
    load_comps: list[Component] = []
    for line_no, row in tables["bus"]:
        bus_id = int(row[_BUS_ID])
        if bus_id not in coords:
            raise CaseValidationError(f"mpc.bus line {line_no}: no coordinate for bus {bus_id}")
        bus_comps.append(
            Component(id=f"bus{bus_id}", kind=ComponentKind.BUS_NODE, attached_bus=bus_id, location=coords[bus_id])
        )
        pd = float(row[_BUS_PD])
        if pd > 0:
            load_comps.append(
                Component(id=f"load{bus_id}", kind=ComponentKind.LOAD_UNIT, attached_bus=bus_id, location=coords[bus_id], pd=pd)
            )

    gen_rows, cost_rows = tables["gen"], tables["gencost"]
    if len(cost_rows) != len(gen_rows):
        raise CaseValidationError(
            f"mpc.gencost has {len(cost_rows)} rows for {len(gen_rows)} generators"
        )
    plants: dict[int, list[tuple[float, float, tuple[float, float, float]]]] = {}
    for (line_no, grow), (cline, crow) in zip(gen_rows, cost_rows):
        if int(grow[_GEN_STATUS]) <= 0 or float(grow[_GEN_PMAX]) <= 0:
            continue  # out of service, or a synchronous condenser
        bus_id = int(grow[_GEN_BUS])
        plants.setdefault(bus_id, []).append(
            (float(grow[_GEN_PMIN]), float(grow[_GEN_PMAX]), _unit_quadratic(crow, cline))
        )
    gen_comps: list[Component] = []
    for bus_id in sorted(plants):
        units = plants[bus_id]
        pmax = sum(u[1] for u in units)
        pmin = sum(u[0] for u in units)
        # Proportional output split: unit u supplies share s_u = pmax_u / pmax,
        # so plant cost = sum(c2_u s_u^2) P^2 + sum(c1_u s_u) P + sum(c0_u).
        c2 = sum(u[2][0] * (u[1] / pmax) ** 2 for u in units)
        c1 = sum(u[2][1] * (u[1] / pmax) for u in units)
        c0 = sum(u[2][2] for u in units)
        gen_comps.append(
            Component(
                id=f"gen{bus_id}",
                kind=ComponentKind.GENERATION_PLANT,
                attached_bus=bus_id,
                location=coords.get(bus_id),
                pg_min=pmin,
                pg_max=pmax,
                cost_coeffs=(c2, c1, c0),
            )
        )

    branch_comps: list[Component] = []
    for branch_no, (line_no, row) in enumerate(tables["branch"], start=1):
        f, t = int(row[_BR_FROM]), int(row[_BR_TO])
        x = float(row[_BR_X])
        if x <= 0:
            raise CaseValidationError(f"mpc.branch line {line_no}: reactance must be positive")
        kind = ComponentKind.SUBSTATION if branch_no in substation_rows else ComponentKind.TRANSMISSION_LINE
        loc = None
        if f in coords and t in coords:
            loc = ((coords[f][0] + coords[t][0]) / 2.0, (coords[f][1] + coords[t][1]) / 2.0)
        branch_comps.append(
            Component(
                id=f"branch{branch_no}",
                kind=kind,
                from_bus=f,
                to_bus=t,
                location=loc,
                rate=float(row[_BR_RATE_A]),
                susceptance=1.0 / x,
            )
        )

    missing = substation_rows - set(range(1, len(tables["branch"]) + 1))
    if missing:
        raise CaseValidationError(f"substation metadata names unknown branch rows {sorted(missing)}")
    components = bus_comps + gen_comps + load_comps + branch_comps
    return NetworkCase(components=tuple(components), base_mva=base_mva)


def load_matpower(case_path, coords_path) -> NetworkCase:
    with open(case_path, encoding="utf-8") as fh:
        text = fh.read()
    with open(coords_path, encoding="utf-8") as fh:
        coords_doc = json.load(fh)
    return parse_matpower(text, coords_doc)
