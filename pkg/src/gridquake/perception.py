"""Imperfect damage assessment: confusion matrices, coverage, and information delay.

True damage states are observed through a row-stochastic confusion matrix
whose accuracy parameter controls the probability of misreading a state by
one level. Monitored components report (near-)immediately; the rest wait for
a field inspection campaign whose duration shrinks as monitoring coverage
grows (fewer components left to walk down).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fragility import DamageScenario, DamageState
from .network import natural_key

_ROW_SUM_TOL = 1e-12

#: Field-inspection duration (days) for the components left uninstrumented,
#: tabulated against monitoring coverage and interpolated linearly between
#: the listed points (clamped outside). Full inspection (no monitoring at
#: all) takes DEFAULT_INSPECTION_DELAY_DAYS.
INSPECTION_DELAY_TABLE: tuple[tuple[float, float], ...] = (
    (0.1, 1.8),
    (0.3, 1.4),
    (0.5, 1.0),
    (0.7, 0.6),
)
DEFAULT_INSPECTION_DELAY_DAYS = 2.0


@dataclass(frozen=True)
class ConfusionMatrix:
    """5x5 row-stochastic matrix; entry (m, n) = P(perceive n | true m)."""

    rows: tuple[tuple[float, float, float, float, float], ...]

    def __post_init__(self) -> None:
        if len(self.rows) != 5 or any(len(r) != 5 for r in self.rows):
            raise ValueError("confusion matrix must be 5x5")
        for i, row in enumerate(self.rows):
            if any(p < 0.0 or p > 1.0 for p in row):
                raise ValueError(f"row {i}: entries outside [0, 1]")
            if abs(sum(row) - 1.0) > _ROW_SUM_TOL:
                raise ValueError(f"row {i}: sums to {sum(row)!r}, not 1")

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float)


def tridiagonal_confusion(a: float) -> ConfusionMatrix:
    """Accuracy-parameterized tridiagonal confusion matrix.

    Diagonal entries equal the accuracy ``a`` (boundary states get (1+a)/2);
    misreads spill only into adjacent damage states, each with mass (1-a)/2.
    """
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"accuracy must lie in [0, 1], got {a}")
    off = (1.0 - a) / 2.0
    edge = (1.0 + a) / 2.0
    rows = (
        (edge, off, 0.0, 0.0, 0.0),
        (off, a, off, 0.0, 0.0),
        (0.0, off, a, off, 0.0),
        (0.0, 0.0, off, a, off),
        (0.0, 0.0, 0.0, off, edge),
    )
    return ConfusionMatrix(rows=rows)


@dataclass(frozen=True)
class MonitoringConfig:
    """A monitoring deployment: coverage, accuracies, and reporting delays.

    ``coverage`` is the fraction of damageable components instrumented; the
    instrumented subset is drawn uniformly at random per assessment unless
    ``instrumented`` pins an explicit component list. ``delay_inspect`` of
    None resolves automatically from the coverage table.
    """

    coverage: float = 0.0
    a_monitored: float = 0.9
    a_inspect: float = 0.7
    delay_monitored: float = 0.0
    delay_inspect: float | None = None
    rediscovery_penalty: float = 1.3
    instrumented: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError("coverage must lie in [0, 1]")
        for name in ("a_monitored", "a_inspect"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.delay_monitored < 0 or (self.delay_inspect is not None and self.delay_inspect < 0):
            raise ValueError("delays must be >= 0")
        if self.rediscovery_penalty < 1.0:
            raise ValueError("rediscovery penalty must be >= 1")

    def effective_inspection_delay(self) -> float:
        if self.delay_inspect is not None:
            return self.delay_inspect
        if self.coverage <= 0.0:
            return DEFAULT_INSPECTION_DELAY_DAYS
        return inspection_delay_for_coverage(self.coverage)


def inspection_delay_for_coverage(p: float) -> float:
    """Interpolated inspection duration for the uninstrumented remainder."""
    pts = INSPECTION_DELAY_TABLE
    if p <= pts[0][0]:
        return pts[0][1]
    if p >= pts[-1][0]:
        return pts[-1][1]
    for (p0, d0), (p1, d1) in zip(pts, pts[1:]):
        if p0 <= p <= p1:
            return d0 + (d1 - d0) * (p - p0) / (p1 - p0)
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class PerceivedScenario:
    """Assessed damage state and information-availability time per component."""

    perceived: dict[str, DamageState]
    available_at: dict[str, float]


def perceive(true_ds: DamageState, matrix: ConfusionMatrix, rng: np.random.Generator) -> DamageState:
    """Draw the perceived state from the confusion-matrix row of the true state."""
    row = matrix.rows[int(true_ds)]
    return DamageState(int(rng.choice(5, p=np.asarray(row) / sum(row))))


def assess_scenario(
    true: DamageScenario,
    cfg: MonitoringConfig,
    rng: np.random.Generator,
) -> PerceivedScenario:
    """Assess every damageable component once, honoring coverage and delays.

    Components are processed in natural id order so results depend only on
    the rng stream, not on dictionary construction order.
    """
    ids = sorted(true.state, key=natural_key)
    if cfg.instrumented is not None:
        monitored = set(cfg.instrumented)
    elif cfg.coverage >= 1.0:
        monitored = set(ids)
    elif cfg.coverage <= 0.0:
        monitored = set()
    else:
        k = int(round(cfg.coverage * len(ids)))
        picks = rng.choice(len(ids), size=k, replace=False)
        monitored = {ids[i] for i in sorted(int(p) for p in picks)}

    m_monitored = tridiagonal_confusion(cfg.a_monitored)
    m_inspect = tridiagonal_confusion(cfg.a_inspect)
    delay_inspect = cfg.effective_inspection_delay()

    perceived: dict[str, DamageState] = {}
    available: dict[str, float] = {}
    for cid in ids:
        if cid in monitored:
            perceived[cid] = perceive(true.state[cid], m_monitored, rng)
            available[cid] = cfg.delay_monitored
        else:
            perceived[cid] = perceive(true.state[cid], m_inspect, rng)
            available[cid] = delay_inspect
    return PerceivedScenario(perceived=perceived, available_at=available)


def perfect_assessment(true: DamageScenario) -> PerceivedScenario:
    """The perfect-knowledge reference: perceived == true, available immediately."""
    return PerceivedScenario(
        perceived=dict(true.state),
        available_at={cid: 0.0 for cid in true.state},
    )
