"""Seeded multi-agent economy simulator: one frozen task/shock trajectory
replayed under four monetary regimes over the in-process protocol stack."""

from .config import (
    REGIMES,
    AdversarySpec,
    AgentSpec,
    MarketSpec,
    NoiseSpec,
    RedemptionBurst,
    ScenarioConfig,
    ShockSpec,
    StaleWindow,
    VendorBias,
    load_scenario,
    scenario_from_dict,
    validate_scenario_dict,
)
from .trajectory import Trajectory, generate_trajectory
from .agents import AgentState, execution_capacity, step_treasury
from .world import RegimeWorld, run_scenario
from .metrics import MetricsReport
from .experiments import (
    mev_sandwich_probe,
    run_regime_comparison,
    run_sanity_checks,
    run_workflow_experiment,
)

__all__ = [
    "REGIMES",
    "AdversarySpec",
    "AgentSpec",
    "AgentState",
    "MarketSpec",
    "MetricsReport",
    "NoiseSpec",
    "RedemptionBurst",
    "RegimeWorld",
    "ScenarioConfig",
    "ShockSpec",
    "StaleWindow",
    "Trajectory",
    "VendorBias",
    "execution_capacity",
    "generate_trajectory",
    "load_scenario",
    "mev_sandwich_probe",
    "run_regime_comparison",
    "run_sanity_checks",
    "run_scenario",
    "run_workflow_experiment",
    "scenario_from_dict",
    "step_treasury",
    "validate_scenario_dict",
]
