"""Run configuration: one versioned JSON document driving every CLI command.

The document selects the network case, hazard scenario, parameter tables,
monitoring arms, crew resources, study sizes and the master seed. Anything
omitted falls back to the bundled defaults (24-bus test system, the default
fragility/functionality/repair tables, and the two standard monitoring arms).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .fragility import FragilitySet, FunctionalityMap
from .hazard import CorrelationModel, FaultScenario, GmpeCoefficients
from .network import ComponentKind, NetworkCase, load_case
from .perception import MonitoringConfig
from .recovery import CrewPool, RepairParams
from .resilience import CostModel

SCHEMA_VERSION = 1

ENV_SEED = "GRIDQUAKE_SEED"

_KIND_KEYS = {
    "bus_node": ComponentKind.BUS_NODE,
    "generation_plant": ComponentKind.GENERATION_PLANT,
    "load_unit": ComponentKind.LOAD_UNIT,
    "substation": ComponentKind.SUBSTATION,
    "transmission_line": ComponentKind.TRANSMISSION_LINE,
}


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def default_arms() -> dict[str, MonitoringConfig]:
    """Full monitoring versus inspection-only, at the standard accuracies."""
    return {
        "sshm": MonitoringConfig(coverage=1.0, a_monitored=0.9, delay_monitored=0.0),
        "nosshm": MonitoringConfig(coverage=0.0, a_inspect=0.7, delay_inspect=2.0),
    }


@dataclass(frozen=True)
class RunConfig:
    case: NetworkCase
    case_path: str
    fault: FaultScenario
    correlation: CorrelationModel
    fragility: FragilitySet
    func_map: FunctionalityMap
    repair: RepairParams
    crews: CrewPool
    arms: dict[str, MonitoringConfig]
    cost: CostModel
    horizon_days: float
    n_scenarios: int
    n_perceptions: int
    master_seed: int
    output_dir: str
    config_hash: str
    raw: dict = field(repr=False, default_factory=dict)


def _bundled_case_path() -> str:
    from importlib import resources

    return str(resources.files("gridquake.data") / "rts24.json")


def _parse_tables(block: dict, n_cols: int, what: str) -> dict:
    out = {}
    for key, rows in block.items():
        kind = _KIND_KEYS.get(key)
        if kind is None:
            raise ConfigError(f"{what}: unknown component kind {key!r}")
        out[kind] = tuple(tuple(float(v) for v in row) for row in rows) if n_cols == 2 else tuple(
            float(v) for v in rows
        )
    return out


def _monitoring_from(block: dict, name: str) -> MonitoringConfig:
    known = {
        "p", "coverage", "a_sshm", "a_monitored", "a_inspect", "delay_sshm_days",
        "delay_monitored_days", "delay_inspect_days", "rediscovery_penalty", "instrumented",
    }
    unknown = set(block) - known
    if unknown:
        raise ConfigError(f"monitoring arm {name!r}: unknown keys {sorted(unknown)}")
    try:
        return MonitoringConfig(
            coverage=float(block.get("p", block.get("coverage", 0.0))),
            a_monitored=float(block.get("a_sshm", block.get("a_monitored", 0.9))),
            a_inspect=float(block.get("a_inspect", 0.7)),
            delay_monitored=float(block.get("delay_sshm_days", block.get("delay_monitored_days", 0.0))),
            delay_inspect=(
                float(block["delay_inspect_days"]) if "delay_inspect_days" in block else None
            ),
            rediscovery_penalty=float(block.get("rediscovery_penalty", 1.3)),
            instrumented=tuple(block["instrumented"]) if "instrumented" in block else None,
        )
    except ValueError as exc:
        raise ConfigError(f"monitoring arm {name!r}: {exc}") from exc


def load_config(path: str | Path | None, seed_override: int | None = None) -> RunConfig:
    """Load and validate a run configuration document.

    ``path`` of None yields the all-defaults configuration. The master seed
    resolves in order: --seed override, document value, GRIDQUAKE_SEED.
    """
    doc: dict = {}
    base_dir = Path.cwd()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
        base_dir = p.parent
    version = int(doc.get("version", SCHEMA_VERSION))
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config version {version} (expected {SCHEMA_VERSION})")

    case_path = doc.get("case")
    if case_path is None:
        case_path = _bundled_case_path()
    else:
        case_path = str((base_dir / case_path).resolve()) if not os.path.isabs(case_path) else case_path
        if not os.path.exists(case_path):
            raise ConfigError(f"case file not found: {case_path}")
    try:
        case = load_case(case_path)
    except ValueError as exc:
        raise ConfigError(f"case {case_path}: {exc}") from exc

    hz = doc.get("hazard", {})
    gmpe_block = hz.get("gmpe", {})
    try:
        gmpe = GmpeCoefficients(**{k: float(v) for k, v in gmpe_block.items()})
    except TypeError as exc:
        raise ConfigError(f"hazard.gmpe: {exc}") from exc
    trace = hz.get("fault_trace", [[0.0, 50.0], [40.0, 60.0]])
    try:
        fault = FaultScenario(
            trace=((float(trace[0][0]), float(trace[0][1])), (float(trace[1][0]), float(trace[1][1]))),
            magnitude=float(hz.get("magnitude", 8.0)),
            vs30=float(hz.get("vs30", 760.0)),
            sigma_ln=float(hz.get("sigma_ln", 0.6)),
            gmpe=gmpe,
        )
        correlation = CorrelationModel(range_b=float(hz.get("correlation_range_km", 40.0)))
    except (ValueError, IndexError, TypeError) as exc:
        raise ConfigError(f"hazard block: {exc}") from exc

    try:
        fragility = FragilitySet()
        if "fragility" in doc:
            merged = dict(fragility.params)
            merged.update(_parse_tables(doc["fragility"], 2, "fragility"))
            fragility = FragilitySet(params=merged)
        func_map = FunctionalityMap()
        if "functionality" in doc:
            merged = dict(func_map.ratios)
            merged.update(_parse_tables(doc["functionality"], 1, "functionality"))
            func_map = FunctionalityMap(ratios=merged)
        repair = RepairParams()
        if "repair" in doc:
            merged = dict(repair.params)
            merged.update(_parse_tables(doc["repair"], 2, "repair"))
            repair = RepairParams(params=merged)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    crews_block = doc.get("crews", {})
    try:
        crews = CrewPool(
            n_crews=int(crews_block.get("n_crews", 3)),
            transfer_days=float(crews_block.get("transfer_days", 0.25)),
        )
    except ValueError as exc:
        raise ConfigError(f"crews block: {exc}") from exc

    arms_block = doc.get("monitoring", {}).get("arms")
    arms = (
        {name: _monitoring_from(block, name) for name, block in arms_block.items()}
        if arms_block
        else default_arms()
    )

    cost_block = doc.get("cost", {})
    try:
        cost = CostModel(
            full_cost=float(cost_block.get("full_cost_usd", 1.0e7)),
            voll=float(cost_block.get("voll_usd_per_mwh", 10_000.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"cost block: {exc}") from exc

    study = doc.get("study", {})
    n_scenarios = int(study.get("n_scenarios", 25))
    n_perceptions = int(study.get("n_perceptions", 20))
    if n_scenarios < 1 or n_perceptions < 1:
        raise ConfigError("study sizes must be >= 1")

    horizon = float(doc.get("recovery", {}).get("horizon_days", 200.0))
    if horizon <= 0:
        raise ConfigError("recovery horizon must be positive")

    seed = seed_override
    if seed is None:
        seed = doc.get("master_seed")
    if seed is None and os.environ.get(ENV_SEED):
        try:
            seed = int(os.environ[ENV_SEED])
        except ValueError as exc:
            raise ConfigError(f"{ENV_SEED} must be an integer") from exc
    if seed is None:
        seed = 0
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ConfigError("master_seed must fit in 64 bits")

    resolved = dict(doc)
    resolved["master_seed"] = seed
    config_hash = hashlib.sha256(
        json.dumps(resolved, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()[:16]

    return RunConfig(
        case=case,
        case_path=str(case_path),
        fault=fault,
        correlation=correlation,
        fragility=fragility,
        func_map=func_map,
        repair=repair,
        crews=crews,
        arms=arms,
        cost=cost,
        horizon_days=horizon,
        n_scenarios=n_scenarios,
        n_perceptions=n_perceptions,
        master_seed=seed,
        output_dir=str(doc.get("output_dir", "gridquake-out")),
        config_hash=config_hash,
        raw=resolved,
    )
