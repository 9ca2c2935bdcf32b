"""Lognormal fragility curves, discrete damage states, and damage-functionality maps.

Components are assigned one of five ordered damage states by inverse-transform
sampling of exceedance probabilities, then mapped to residual functionality
ratios (binary for bus nodes, stepped for plants, loads and substations).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping

import numpy as np
from scipy.stats import norm

from .network import ComponentKind

if TYPE_CHECKING:
    from .hazard import IntensityField
    from .network import NetworkCase


class ContractError(ValueError):
    """Raised when a caller violates a documented precondition."""


class DamageState(enum.IntEnum):
    """Ordered component damage states (none through complete)."""

    NONE = 0
    SLIGHT = 1
    MODERATE = 2
    EXTENSIVE = 3
    COMPLETE = 4


# Median PGA (g) and lognormal dispersion per damage state DS1..DS4,
# for substation-class electrical equipment (FEMA Hazus conventions).
DEFAULT_FRAGILITY: dict[ComponentKind, tuple[tuple[float, float], ...]] = {
    ComponentKind.BUS_NODE: ((0.13, 0.65), (0.26, 0.50), (0.34, 0.40), (0.74, 0.40)),
    ComponentKind.GENERATION_PLANT: ((0.10, 0.60), (0.22, 0.55), (0.49, 0.50), (0.79, 0.50)),
    ComponentKind.LOAD_UNIT: ((0.24, 0.25), (0.32, 0.23), (0.58, 0.15), (0.89, 0.15)),
    ComponentKind.SUBSTATION: ((0.10, 0.60), (0.20, 0.50), (0.30, 0.40), (0.50, 0.40)),
}

# Residual functionality ratio per damage state DS0..DS4. Bus nodes are
# binary (fail outright beyond slight damage); the rest degrade in steps.
# Transmission lines are assumed seismically robust and never degrade.
DEFAULT_FUNCTIONALITY: dict[ComponentKind, tuple[float, ...]] = {
    ComponentKind.BUS_NODE: (1.0, 1.0, 0.0, 0.0, 0.0),
    ComponentKind.GENERATION_PLANT: (1.0, 0.75, 0.50, 0.25, 0.0),
    ComponentKind.LOAD_UNIT: (1.0, 0.75, 0.50, 0.25, 0.0),
    ComponentKind.SUBSTATION: (1.0, 0.75, 0.50, 0.25, 0.0),
    ComponentKind.TRANSMISSION_LINE: (1.0, 1.0, 1.0, 1.0, 1.0),
}


@dataclass(frozen=True)
class FragilitySet:
    """Per-kind (median, dispersion) pairs for damage states DS1..DS4."""

    params: Mapping[ComponentKind, tuple[tuple[float, float], ...]] = field(
        default_factory=lambda: dict(DEFAULT_FRAGILITY)
    )

    def __post_init__(self) -> None:
        for kind, rows in self.params.items():
            if len(rows) != 4:
                raise ValueError(f"{kind.value}: expected 4 fragility rows, got {len(rows)}")
            thetas = [theta for theta, _ in rows]
            if any(b <= 0 for _, b in rows):
                raise ValueError(f"{kind.value}: dispersions must be positive")
            if any(t2 <= t1 for t1, t2 in zip(thetas, thetas[1:])):
                raise ValueError(f"{kind.value}: medians must increase with damage state")

    def for_kind(self, kind: ComponentKind) -> tuple[tuple[float, float], ...]:
        return self.params[kind]


@dataclass(frozen=True)
class FunctionalityMap:
    """Residual functionality ratio per (component kind, damage state)."""

    ratios: Mapping[ComponentKind, tuple[float, ...]] = field(
        default_factory=lambda: dict(DEFAULT_FUNCTIONALITY)
    )

    def __post_init__(self) -> None:
        for kind, row in self.ratios.items():
            if len(row) != 5:
                raise ValueError(f"{kind.value}: expected 5 functionality ratios")
            if row[0] != 1.0:
                raise ValueError(f"{kind.value}: undamaged ratio must be 1.0")
            if any(not 0.0 <= r <= 1.0 for r in row):
                raise ValueError(f"{kind.value}: ratios must lie in [0, 1]")
            if any(row[i + 1] > row[i] for i in range(4)):
                raise ValueError(f"{kind.value}: ratios must not increase with damage state")

    def ratio(self, kind: ComponentKind, ds: DamageState) -> float:
        return self.ratios[kind][int(ds)]


@dataclass(frozen=True)
class DamageScenario:
    """True discrete damage state for every damageable component."""

    state: Mapping[str, DamageState]

    def ratio(self, kind: ComponentKind, component_id: str, func_map: FunctionalityMap) -> float:
        ds = self.state.get(component_id, DamageState.NONE)
        return func_map.ratio(kind, ds)


def exceedance_probs(kind: ComponentKind, pga: float, frag: FragilitySet) -> tuple[float, ...]:
    """P(DS >= ds_i | pga) for DS1..DS4: Phi((ln pga - ln theta_i) / beta_i).

    Curves with unequal dispersions cross at extreme intensities, where the
    raw values would violate P(>=ds_{i+1}) <= P(>=ds_i); a running minimum
    restores the ordering (the tightest bound consistent with the axioms).
    """
    if pga <= 0:
        raise ContractError(f"pga must be positive, got {pga}")
    ln_pga = math.log(pga)
    out: list[float] = []
    bound = 1.0
    for theta, beta in frag.for_kind(kind):
        bound = min(bound, float(norm.cdf((ln_pga - math.log(theta)) / beta)))
        out.append(bound)
    return tuple(out)


def sample_damage(probs: tuple[float, ...], u: float) -> DamageState:
    """Inverse-transform a uniform draw through exceedance probabilities.

    Returns the most severe state whose exceedance probability exceeds u,
    walking the interval partition (p4, p3-p4, p2-p3, p1-p2, 1-p1).
    """
    if len(probs) != 4:
        raise ContractError("expected four exceedance probabilities")
    if any(not 0.0 <= p <= 1.0 for p in probs):
        raise ContractError(f"probabilities outside [0, 1]: {probs}")
    if any(probs[i] < probs[i + 1] for i in range(3)):
        raise ContractError(f"exceedance probabilities must be non-increasing: {probs}")
    for ds in (DamageState.COMPLETE, DamageState.EXTENSIVE, DamageState.MODERATE, DamageState.SLIGHT):
        if u < probs[int(ds) - 1]:
            return ds
    return DamageState.NONE


def functionality_ratio(kind: ComponentKind, ds: DamageState, func_map: FunctionalityMap) -> float:
    """Residual functionality ratio for a component in the given damage state."""
    return func_map.ratio(kind, ds)


def sample_scenario(
    field: "IntensityField",
    case: "NetworkCase",
    frag: FragilitySet,
    rng: np.random.Generator,
) -> DamageScenario:
    """Draw one damage state per damageable component, conditionally independent
    given the intensity field. Transmission lines never take damage."""
    state: dict[str, DamageState] = {}
    for comp in case.damageable_components():
        pga = field.pga[comp.id]
        probs = exceedance_probs(comp.kind, pga, frag)
        state[comp.id] = sample_damage(probs, float(rng.uniform()))
    return DamageScenario(state=state)
