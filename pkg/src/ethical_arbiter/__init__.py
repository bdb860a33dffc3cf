"""Declarative ethical arbitration over heterogeneous evidential reasoners."""

from .arbiter import (
    ConstraintSet,
    Decision,
    EthicalPolicy,
    Preference,
    Principle,
    Region,
    StrategyConfig,
    Verdict,
    Weights,
    arbitrate,
    collateral_select,
    policy_rank,
    principle_compare,
    principle_select,
    veto_filter,
    weighted_select,
)
from .core import (
    EthicalFeature,
    EthOption,
    EvidenceSet,
    FeatureRegistry,
    FeatureScores,
    Proposition,
    ValidationError,
    Violation,
    delta_vector,
    merge_evidence,
)
from .trace import BlackBoxLog, DecisionRecord, explain, replay
from .world import Action, GridWorld, Move, load_scenario, simulate

__all__ = [
    "Action", "BlackBoxLog", "ConstraintSet", "Decision", "DecisionRecord", "EthOption",
    "EthicalFeature", "EthicalPolicy", "EvidenceSet", "FeatureRegistry", "FeatureScores",
    "GridWorld", "Move", "Preference", "Principle", "Proposition", "Region", "StrategyConfig",
    "ValidationError", "Verdict", "Violation", "Weights", "arbitrate", "collateral_select",
    "delta_vector", "explain", "load_scenario", "merge_evidence", "policy_rank",
    "principle_compare", "principle_select", "replay", "simulate", "veto_filter", "weighted_select",
]
