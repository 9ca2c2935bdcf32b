"""Seeded Monte Carlo framework for valuing seismic structural health monitoring
in post-earthquake recovery of electric power networks.

The pipeline couples correlated ground-motion sampling, fragility-based damage
generation, imperfect damage perception, crew-constrained repair simulation and
DC optimal power flow into recovery trajectories and the resilience metrics
built on them (lack of resilience, value of information, value-to-cost ratio).
"""

from importlib import resources

from .fragility import (
    DamageScenario,
    DamageState,
    FragilitySet,
    FunctionalityMap,
    exceedance_probs,
    functionality_ratio,
    sample_damage,
    sample_scenario,
)
from .hazard import CorrelationModel, FaultScenario, IntensityField, sample_field
from .network import Component, ComponentKind, NetworkCase, adjacency, load_case, parse_case
from .perception import ConfusionMatrix, MonitoringConfig, PerceivedScenario, assess_scenario
from .power_flow import dcopf, find_islands, shed_and_solve, system_functionality
from .recovery import CrewPool, RecoveryTrajectory, RepairParams, simulate
from .resilience import CostModel, convergence_check, lor, run_study, vcr, voi

__version__ = "0.1.0"


def bundled_case_path() -> str:
    """Path of the bundled 24-bus reliability test system (native format)."""
    return str(resources.files("gridquake.data") / "rts24.json")


def load_bundled_case() -> NetworkCase:
    """Load the bundled 24-bus reliability test system."""
    return load_case(bundled_case_path())
