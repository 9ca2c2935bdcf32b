"""Resilience metrics and the paired Monte Carlo study harness.

Lack of resilience (LoR) is the area between pre-event functionality and the
recovery curve. The value of information (VoI) is the expected LoR reduction
between two monitoring arms evaluated under identical hazard realizations;
the value-to-cost ratio (VCR) monetizes it against deployment cost.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .fragility import FragilitySet, FunctionalityMap, sample_scenario
from .hazard import CorrelationModel, FaultScenario, sample_field
from .network import NetworkCase, component_sites
from .perception import MonitoringConfig, assess_scenario
from .recovery import CrewPool, RecoveryTrajectory, RepairParams, simulate

Z_95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class LoRSample:
    lor: float                 # MW*day
    replicate_id: int
    scenario_id: int
    arm: str


@dataclass(frozen=True)
class CostModel:
    """Monitoring deployment cost and the value of lost load.

    Deployment cost scales linearly with coverage from the full-coverage
    reference price, adjusted by a sensing-accuracy factor interpolated
    between the tabulated points (clamped outside, with a warning).
    """

    full_cost: float = 1.0e7                      # USD at coverage 1.0, reference accuracy
    accuracy_points: tuple[tuple[float, float], ...] = ((0.75, 0.8), (0.85, 1.0), (0.95, 1.2))
    voll: float = 10_000.0                        # USD per MWh

    def __post_init__(self) -> None:
        if self.full_cost <= 0 or self.voll <= 0:
            raise ValueError("cost model values must be positive")

    @property
    def voll_per_mw_day(self) -> float:
        return self.voll * 24.0

    def accuracy_factor(self, a: float) -> float:
        pts = self.accuracy_points
        if a < pts[0][0] or a > pts[-1][0]:
            warnings.warn(
                f"accuracy {a} outside the tabulated range [{pts[0][0]}, {pts[-1][0]}]; clamping",
                stacklevel=2,
            )
            a = min(max(a, pts[0][0]), pts[-1][0])
        for (a0, f0), (a1, f1) in zip(pts, pts[1:]):
            if a0 <= a <= a1:
                return f0 + (f1 - f0) * (a - a0) / (a1 - a0)
        return pts[-1][1]

    def cost(self, p: float, a: float) -> float:
        if p <= 0:
            raise ValueError("deployment cost undefined for zero coverage")
        return self.full_cost * p * self.accuracy_factor(a)


def lor(traj: RecoveryTrajectory, f0: float, horizon: float) -> float:
    """Integral of the functionality deficit over [0, horizon] (MW*day).

    The trajectory is piecewise constant, so the integral is an exact sum of
    rectangles; the final level extends to the horizon.
    """
    total = 0.0
    points = traj.breakpoints
    for (t0, v0), (t1, _) in zip(points, points[1:]):
        if t0 >= horizon:
            break
        total += (f0 - v0) * (min(t1, horizon) - t0)
    last_t, last_v = points[-1]
    if last_t < horizon:
        total += (f0 - last_v) * (horizon - last_t)
    return total


@dataclass(frozen=True)
class VoiResult:
    voi: float
    mean_without: float
    mean_with: float
    std_without: float
    std_with: float
    rel_reduction: float                       # fraction of the baseline mean
    paired_ci: tuple[float, float] | None      # 95% CI of the scenario-paired difference
    n_pairs: int


def voi(nosshm: Sequence[LoRSample], sshm: Sequence[LoRSample]) -> VoiResult:
    """Expected LoR reduction between a baseline arm and a monitored arm.

    When both arms cover the same scenario ids, the confidence interval is
    computed on per-scenario mean differences (a paired design under shared
    hazard realizations); otherwise no CI is reported.
    """
    if not nosshm or not sshm:
        raise ValueError("both arms need at least one sample")
    a = np.array([s.lor for s in nosshm])
    b = np.array([s.lor for s in sshm])
    mean_a, mean_b = float(a.mean()), float(b.mean())
    value = mean_a - mean_b

    by_scenario_a: dict[int, list[float]] = {}
    by_scenario_b: dict[int, list[float]] = {}
    for s in nosshm:
        by_scenario_a.setdefault(s.scenario_id, []).append(s.lor)
    for s in sshm:
        by_scenario_b.setdefault(s.scenario_id, []).append(s.lor)
    ci = None
    n_pairs = 0
    if set(by_scenario_a) == set(by_scenario_b):
        diffs = np.array(
            [np.mean(by_scenario_a[k]) - np.mean(by_scenario_b[k]) for k in sorted(by_scenario_a)]
        )
        n_pairs = len(diffs)
        if n_pairs > 1:
            half = Z_95 * diffs.std(ddof=1) / math.sqrt(n_pairs)
            ci = (float(diffs.mean() - half), float(diffs.mean() + half))
    return VoiResult(
        voi=value,
        mean_without=mean_a,
        mean_with=mean_b,
        std_without=float(a.std(ddof=1)) if len(a) > 1 else 0.0,
        std_with=float(b.std(ddof=1)) if len(b) > 1 else 0.0,
        rel_reduction=value / mean_a if mean_a != 0 else 0.0,
        paired_ci=ci,
        n_pairs=n_pairs,
    )


def vcr(voi_mwday: float, p: float, a: float, cost_model: CostModel) -> float:
    """Monetized resilience gain per dollar of monitoring investment."""
    if voi_mwday < 0:
        warnings.warn("negative value of information; ratio will be negative", stacklevel=2)
    return voi_mwday * cost_model.voll_per_mw_day / cost_model.cost(p, a)


@dataclass(frozen=True)
class ConvergenceResult:
    converged: bool
    n: int
    mean: float
    ci_half_width: float
    max_window_change: float   # max relative running-mean change over the window


#: Trailing window length and thresholds of the running-mean stability rule.
CONV_WINDOW = 20
CONV_MEAN_TOL = 0.01
CONV_CI_TOL = 0.02


def convergence_check(samples: Sequence[float]) -> ConvergenceResult:
    """Stability of the running mean: window drift < 1% and CI within 2%.

    Requires at least ``CONV_WINDOW + 1`` samples before it can report
    convergence. The criterion is met when the running mean moved less than
    1% (relative) over the trailing window and the 95% normal CI half-width
    is under 2% of the current mean.
    """
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n == 0:
        return ConvergenceResult(False, 0, math.nan, math.inf, math.inf)
    mean = float(x.mean())
    ci_half = Z_95 * float(x.std(ddof=1)) / math.sqrt(n) if n > 1 else math.inf
    if n < CONV_WINDOW + 1:
        return ConvergenceResult(False, n, mean, ci_half, math.inf)
    running = np.cumsum(x) / np.arange(1, n + 1)
    window = running[-(CONV_WINDOW + 1):]
    denom = abs(mean) if mean != 0 else 1.0
    drift = float(np.max(np.abs(window - mean)) / denom)
    ok = drift < CONV_MEAN_TOL and (ci_half < CONV_CI_TOL * abs(mean))
    return ConvergenceResult(ok, n, mean, ci_half, drift)


def first_convergence(samples: Sequence[float]) -> int | None:
    """Smallest sample count at which the convergence criterion first holds."""
    for n in range(CONV_WINDOW + 1, len(samples) + 1):
        if convergence_check(samples[:n]).converged:
            return n
    return None


# -- paired study harness -----------------------------------------------------


@dataclass(frozen=True)
class ArmSummary:
    name: str
    samples: tuple[LoRSample, ...]
    mean: float
    std: float
    n_failed: int
    band_t: np.ndarray          # uniform grid (days)
    band_mean: np.ndarray       # mean F(t) across replicates (MW)
    band_lo: np.ndarray         # 95% CI of the mean
    band_hi: np.ndarray
    convergence: ConvergenceResult
    converged_at: int | None


@dataclass(frozen=True)
class StudyReport:
    arms: dict[str, ArmSummary]
    voi: VoiResult | None
    master_seed: int
    n_scenarios: int
    n_perceptions: int
    horizon: float


@dataclass(frozen=True)
class StudySetup:
    """Everything a worker needs to evaluate one hazard scenario block."""

    case: NetworkCase
    fault: FaultScenario
    correlation: CorrelationModel
    arms: tuple[tuple[str, MonitoringConfig], ...]
    crews: CrewPool
    fragility: FragilitySet
    func_map: FunctionalityMap
    repair: RepairParams
    horizon: float
    band_dt: float
    n_perceptions: int
    master_seed: int


def _rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=key))


def _sample_on_grid(traj: RecoveryTrajectory, grid: np.ndarray) -> np.ndarray:
    ts = np.array([p[0] for p in traj.breakpoints])
    vs = np.array([p[1] for p in traj.breakpoints])
    idx = np.searchsorted(ts, grid, side="right") - 1
    return vs[np.clip(idx, 0, len(vs) - 1)]


def _scenario_block(setup: StudySetup, scenario_id: int):
    """All replicates of one hazard scenario: shared field and true damage."""
    grid = np.arange(0.0, setup.horizon + setup.band_dt / 2, setup.band_dt)
    rng_hazard = _rng(setup.master_seed, 0, scenario_id)
    sites = component_sites(setup.case)
    field = sample_field(setup.fault, sites, setup.correlation, rng_hazard)
    true = sample_scenario(field, setup.case, setup.fragility, rng_hazard)

    out = {}
    for arm_idx, (arm_name, mcfg) in enumerate(setup.arms):
        lors: list[float] = []
        band_sum = np.zeros_like(grid)
        band_sq = np.zeros_like(grid)
        failed = 0
        for rep in range(setup.n_perceptions):
            try:
                rng_perc = _rng(setup.master_seed, 1, scenario_id, arm_idx, rep)
                rng_rep = _rng(setup.master_seed, 2, scenario_id, arm_idx, rep)
                perceived = assess_scenario(true, mcfg, rng_perc)
                traj = simulate(
                    setup.case,
                    true,
                    perceived,
                    setup.crews,
                    rng_rep,
                    repair_params=setup.repair,
                    func_map=setup.func_map,
                    horizon_days=setup.horizon,
                    rediscovery_penalty=mcfg.rediscovery_penalty,
                )
            except Exception:  # a failed replicate is recorded, not fatal
                failed += 1
                lors.append(math.nan)
                continue
            lors.append(lor(traj, setup.case.f0, setup.horizon))
            vals = _sample_on_grid(traj, grid)
            band_sum += vals
            band_sq += vals * vals
        out[arm_name] = (lors, band_sum, band_sq, failed)
    return scenario_id, out


def run_study(
    case: NetworkCase,
    fault: FaultScenario,
    correlation: CorrelationModel,
    arms: Mapping[str, MonitoringConfig],
    n_scenarios: int,
    n_perceptions: int,
    master_seed: int,
    crews: CrewPool | None = None,
    fragility: FragilitySet | None = None,
    func_map: FunctionalityMap | None = None,
    repair: RepairParams | None = None,
    horizon: float = 200.0,
    band_dt: float = 0.1,
    workers: int | None = None,
) -> StudyReport:
    """Paired Monte Carlo study over hazard scenarios and perception replicates.

    Every arm sees the same intensity field and true damage per scenario
    (common random numbers on hazard); perception and repair use independent
    substreams per (scenario, arm, replicate). Results are reproducible from
    ``master_seed`` and independent of the worker count.
    """
    if not arms:
        raise ValueError("need at least one monitoring arm")
    if n_scenarios < 1 or n_perceptions < 1:
        raise ValueError("study sizes must be >= 1")
    setup = StudySetup(
        case=case,
        fault=fault,
        correlation=correlation,
        arms=tuple(arms.items()),
        crews=crews or CrewPool(),
        fragility=fragility or FragilitySet(),
        func_map=func_map or FunctionalityMap(),
        repair=repair or RepairParams(),
        horizon=horizon,
        band_dt=band_dt,
        n_perceptions=n_perceptions,
        master_seed=master_seed,
    )

    blocks: dict[int, dict] = {}
    if workers is not None and workers <= 1:
        for sid in range(n_scenarios):
            blocks[sid] = _scenario_block(setup, sid)[1]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for sid, out in pool.map(_scenario_block, [setup] * n_scenarios, range(n_scenarios)):
                blocks[sid] = out

    grid = np.arange(0.0, horizon + band_dt / 2, band_dt)
    summaries: dict[str, ArmSummary] = {}
    for arm_name, _ in setup.arms:
        samples: list[LoRSample] = []
        band_sum = np.zeros_like(grid)
        band_sq = np.zeros_like(grid)
        failed = 0
        for sid in sorted(blocks):
            lors, bsum, bsq, bfail = blocks[sid][arm_name]
            failed += bfail
            for rep, value in enumerate(lors):
                if not math.isnan(value):
                    samples.append(LoRSample(lor=value, replicate_id=rep, scenario_id=sid, arm=arm_name))
            band_sum += bsum
            band_sq += bsq
        values = np.array([s.lor for s in samples])
        n = len(values)
        band_mean = band_sum / n
        var = np.maximum(band_sq / n - band_mean**2, 0.0)
        half = Z_95 * np.sqrt(var / n)
        conv = convergence_check(values)
        summaries[arm_name] = ArmSummary(
            name=arm_name,
            samples=tuple(samples),
            mean=float(values.mean()) if n else math.nan,
            std=float(values.std(ddof=1)) if n > 1 else 0.0,
            n_failed=failed,
            band_t=grid,
            band_mean=band_mean,
            band_lo=band_mean - half,
            band_hi=band_mean + half,
            convergence=conv,
            converged_at=first_convergence(values.tolist()),
        )

    voi_result = None
    names = [name for name, _ in setup.arms]
    if len(names) >= 2:
        baseline = "nosshm" if "nosshm" in summaries else names[0]
        treated = "sshm" if "sshm" in summaries and baseline != "sshm" else next(
            n for n in names if n != baseline
        )
        voi_result = voi(summaries[baseline].samples, summaries[treated].samples)

    return StudyReport(
        arms=summaries,
        voi=voi_result,
        master_seed=master_seed,
        n_scenarios=n_scenarios,
        n_perceptions=n_perceptions,
        horizon=horizon,
    )
