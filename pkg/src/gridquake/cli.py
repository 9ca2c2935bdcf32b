"""Command-line front end.

Subcommands::

    simulate   one damage scenario with one recovery simulation
    study      paired Monte Carlo study over the configured monitoring arms
    sweep      coverage/accuracy grid with LoR, VoI and cost-effectiveness
    convert    MATPOWER case + coordinate metadata -> native JSON case
    validate   check a config document (and its case) without running

Standard output carries machine-readable JSON summaries; progress goes to
standard error. Every artifact embeds the config hash and master seed, and
repeated runs with the same inputs are byte-identical. Exit codes: 0 on
success, 1 for usage/config problems, 2 for runtime/numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .fragility import DamageScenario, DamageState, sample_scenario
from .hazard import sample_field
from .matpower import load_matpower
from .network import component_sites, serialize_case
from .perception import MonitoringConfig, assess_scenario
from .power_flow import component_ratios, evaluate_system
from .recovery import simulate
from .resilience import (
    StudyReport,
    convergence_check,
    first_convergence,
    lor,
    run_study,
    vcr,
)
from .simplex import NumericalError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _meta(cfg: RunConfig) -> dict:
    return {"generator": f"gridquake {__version__}", "config_hash": cfg.config_hash, "seed": cfg.master_seed}


def _csv_header(cfg: RunConfig) -> str:
    return f"# gridquake {__version__} config_hash={cfg.config_hash} seed={cfg.master_seed}"


def _write_csv(path: Path, cfg: RunConfig, columns: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_csv_header(cfg) + "\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=key))


def _load_scenario_file(path: str, cfg: RunConfig) -> DamageScenario:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    states = doc.get("damage_states", doc)
    state = {c.id: DamageState.NONE for c in cfg.case.damageable_components()}
    unknown = set(states) - set(state)
    if unknown:
        raise ConfigError(f"scenario file names unknown components: {sorted(unknown)[:5]}")
    for cid, ds in states.items():
        state[cid] = DamageState(int(ds))
    return DamageScenario(state=state)


def _select_arm(cfg: RunConfig, name: str | None):
    if name is None:
        name = next(iter(cfg.arms))
    if name not in cfg.arms:
        raise ConfigError(f"unknown monitoring arm {name!r}; have {sorted(cfg.arms)}")
    return name, cfg.arms[name]


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    out = Path(args.output or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    arm_name, arm = _select_arm(cfg, args.arm)

    field = None
    if args.scenario:
        true = _load_scenario_file(args.scenario, cfg)
    else:
        rng_hazard = _rng(cfg.master_seed, 0, 0)
        field = sample_field(cfg.fault, component_sites(cfg.case), cfg.correlation, rng_hazard)
        true = sample_scenario(field, cfg.case, cfg.fragility, rng_hazard)

    _log(f"simulate: arm={arm_name} case={Path(cfg.case_path).name}")
    perceived = assess_scenario(true, arm, _rng(cfg.master_seed, 1, 0, 0, 0))
    traj = simulate(
        cfg.case,
        true,
        perceived,
        cfg.crews,
        _rng(cfg.master_seed, 2, 0, 0, 0),
        repair_params=cfg.repair,
        func_map=cfg.func_map,
        horizon_days=cfg.horizon_days,
        rediscovery_penalty=arm.rediscovery_penalty,
    )
    total0, detail = evaluate_system(cfg.case, true, cfg.func_map)

    if field is not None:
        _write_csv(
            out / "intensity.csv", cfg, ["component_id", "pga_g"],
            [(cid, repr(v)) for cid, v in field.pga.items()],
        )
    scenario_doc = {
        "meta": _meta(cfg),
        "damage_states": {cid: int(ds) for cid, ds in sorted(true.state.items()) if ds > 0},
    }
    _write_json(out / "scenario.json", scenario_doc)
    if args.scenario_dump:
        _write_json(Path(args.scenario_dump), scenario_doc)

    ratios = component_ratios(cfg.case, true, cfg.func_map)
    _write_json(
        out / "islands.json",
        {
            "meta": _meta(cfg),
            "functionality_mw": total0,
            "islands": [
                {
                    "buses": list(isl.buses),
                    "served_mw": res.total_served,
                    "generation_mw": {k: v for k, v in sorted(res.pg.items())},
                    "flows_mw": {k: v for k, v in sorted(res.flows.items())},
                    "served_per_load_mw": {k: v for k, v in sorted(res.served.items())},
                    "shed_loads": res.shed_loads,
                }
                for isl, res in detail
            ],
        },
    )
    _write_csv(
        out / "trajectory.csv", cfg, ["t_days", "f_mw"],
        [(repr(t), repr(f)) for t, f in traj.breakpoints],
    )
    _write_csv(
        out / "gantt.csv", cfg,
        ["component_id", "kind", "true_ds", "perceived_ds", "crew", "start_days", "end_days", "is_rediscovery"],
        [
            (t.component_id, t.kind.value, int(t.true_ds), int(t.perceived_ds), t.crew,
             repr(t.start), repr(t.end), int(t.is_rediscovery))
            for t in traj.gantt
        ],
    )
    summary = {
        "meta": _meta(cfg),
        "arm": arm_name,
        "f0_mw": cfg.case.f0,
        "functionality_t0_mw": total0,
        "lor_mw_day": lor(traj, cfg.case.f0, cfg.horizon_days),
        "full_recovery_days": traj.full_recovery_time,
        "repairs": len(traj.gantt),
        "truncated": traj.truncated,
        "output_dir": str(out),
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _report_payload(cfg: RunConfig, report: StudyReport) -> dict:
    arms_doc = {}
    for name, arm in report.arms.items():
        arms_doc[name] = {
            "mean_lor_mw_day": arm.mean,
            "std_lor_mw_day": arm.std,
            "n_samples": len(arm.samples),
            "n_failed": arm.n_failed,
            "converged": arm.convergence.converged,
            "converged_at": arm.converged_at,
            "samples": [
                {"scenario": s.scenario_id, "replicate": s.replicate_id, "lor_mw_day": s.lor}
                for s in arm.samples
            ],
        }
    voi_doc = None
    if report.voi is not None:
        v = report.voi
        voi_doc = {
            "voi_mw_day": v.voi,
            "relative_reduction": v.rel_reduction,
            "mean_without": v.mean_without,
            "mean_with": v.mean_with,
            "std_without": v.std_without,
            "std_with": v.std_with,
            "paired_ci95": list(v.paired_ci) if v.paired_ci else None,
            "n_pairs": v.n_pairs,
        }
    return {
        "meta": _meta(cfg),
        "n_scenarios": report.n_scenarios,
        "n_perceptions": report.n_perceptions,
        "horizon_days": report.horizon,
        "arms": arms_doc,
        "voi": voi_doc,
    }


def _write_study_outputs(cfg: RunConfig, report: StudyReport, out: Path) -> None:
    _write_json(out / "report.json", _report_payload(cfg, report))
    for name, arm in report.arms.items():
        _write_csv(
            out / f"band_{name}.csv", cfg, ["t_days", "mean_mw", "lo_mw", "hi_mw"],
            [
                (repr(float(t)), repr(float(m)), repr(float(lo)), repr(float(hi)))
                for t, m, lo, hi in zip(arm.band_t, arm.band_mean, arm.band_lo, arm.band_hi)
            ],
        )
        values = [s.lor for s in arm.samples]
        rows = []
        for n in range(1, len(values) + 1):
            c = convergence_check(values[:n])
            rows.append((n, repr(c.mean), repr(c.ci_half_width), repr(c.max_window_change), int(c.converged)))
        _write_csv(
            out / f"convergence_{name}.csv", cfg,
            ["n", "running_mean", "ci_half_width", "max_window_change", "converged"], rows,
        )


def cmd_study(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    out = Path(args.output or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _log(
        f"study: {cfg.n_scenarios} scenarios x {cfg.n_perceptions} perceptions, "
        f"arms={list(cfg.arms)}, seed={cfg.master_seed}"
    )
    report = run_study(
        cfg.case,
        cfg.fault,
        cfg.correlation,
        cfg.arms,
        cfg.n_scenarios,
        cfg.n_perceptions,
        cfg.master_seed,
        crews=cfg.crews,
        fragility=cfg.fragility,
        func_map=cfg.func_map,
        repair=cfg.repair,
        horizon=cfg.horizon_days,
        workers=args.workers,
    )
    _write_study_outputs(cfg, report, out)
    summary = {
        "meta": _meta(cfg),
        "arms": {n: {"mean_lor_mw_day": a.mean, "std_lor_mw_day": a.std} for n, a in report.arms.items()},
        "voi_mw_day": report.voi.voi if report.voi else None,
        "output_dir": str(out),
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    if not args.p_values or not args.a_values:
        _log("sweep: empty grid (need --p-values and --a-values)")
        return EXIT_USAGE
    out = Path(args.output or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    baseline = cfg.arms.get("nosshm")
    if baseline is None:
        baseline = MonitoringConfig(coverage=0.0, a_inspect=0.7, delay_inspect=2.0)

    rows = []
    base_report = None
    for p in args.p_values:
        for a in args.a_values:
            arm = MonitoringConfig(
                coverage=p, a_monitored=a,
                a_inspect=baseline.a_inspect,
                rediscovery_penalty=baseline.rediscovery_penalty,
            )
            _log(f"sweep: cell p={p} a={a}")
            report = run_study(
                cfg.case,
                cfg.fault,
                cfg.correlation,
                {"nosshm": baseline, "sshm": arm},
                cfg.n_scenarios,
                cfg.n_perceptions,
                cfg.master_seed,
                crews=cfg.crews,
                fragility=cfg.fragility,
                func_map=cfg.func_map,
                repair=cfg.repair,
                horizon=cfg.horizon_days,
                workers=args.workers,
            )
            base_report = base_report or report
            treated = report.arms["sshm"]
            cell_voi = report.voi.voi
            cell_vcr = vcr(cell_voi, p, a, cfg.cost) if p > 0 else math.nan
            rows.append((p, a, treated.mean, treated.std, cell_voi, cell_vcr))

    _write_csv(
        out / "sweep.csv", cfg, ["p", "a", "mean_lor", "std_lor", "voi", "vcr"],
        [(repr(float(p)), repr(float(a)), repr(m), repr(s), repr(v), repr(c)) for p, a, m, s, v, c in rows],
    )
    summary = {
        "meta": _meta(cfg),
        "baseline_mean_lor_mw_day": base_report.arms["nosshm"].mean if base_report else None,
        "cells": len(rows),
        "output_dir": str(out),
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_convert(args) -> int:
    case = load_matpower(args.case_m, args.coords)
    text = serialize_case(case)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
        _log(f"convert: wrote {args.output}")
    else:
        print(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    n = len(cfg.case.components)
    summary = {
        "meta": _meta(cfg),
        "case": cfg.case_path,
        "components": n,
        "buses": len(cfg.case.buses),
        "f0_mw": cfg.case.f0,
        "arms": sorted(cfg.arms),
        "valid": True,
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gridquake", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"gridquake {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", nargs="?", default=None, help="run configuration JSON (optional)")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--output", default=None, help="output directory override")

    p = sub.add_parser("simulate", help="one damage scenario, one recovery simulation")
    common(p)
    p.add_argument("--arm", default=None, help="monitoring arm name (default: first configured)")
    p.add_argument("--scenario", default=None, help="damage scenario JSON to replay instead of sampling")
    p.add_argument("--scenario-dump", default=None, help="also dump the damage scenario to this path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("study", help="paired Monte Carlo study over the configured arms")
    common(p)
    p.add_argument("--workers", type=int, default=None, help="scenario worker processes")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("sweep", help="coverage/accuracy sensitivity grid")
    common(p)
    p.add_argument("--p-values", type=float, nargs="+", default=None, help="coverage grid")
    p.add_argument("--a-values", type=float, nargs="+", default=None, help="accuracy grid")
    p.add_argument("--workers", type=int, default=None, help="scenario worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("convert", help="convert a MATPOWER case to the native format")
    p.add_argument("case_m", help="MATPOWER .m case file")
    p.add_argument("coords", help="coordinate/substation metadata JSON")
    p.add_argument("--output", "-o", default=None, help="output path (default: stdout)")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("validate", help="validate a configuration and its case")
    common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except (NumericalError, ValueError, OSError) as exc:
        _log(f"runtime error: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
