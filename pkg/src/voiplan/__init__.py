"""Exact inference and budgeted observation planning for probabilistic
logic programs."""

from .model import (
    Atom,
    Clause,
    Compound,
    Const,
    EvidenceFact,
    InconsistentScenarioError,
    ObservableDecl,
    ProbClause,
    ProgramError,
    ResourceLimitError,
    Theory,
    Var,
    match,
    theory_source,
)
from .parser import parse_atom, parse_atom_list, parse_theory
from .ground import GroundProgram, ground
from .validate import Violation, validate_theory
from .worlds import (
    Distribution,
    InferenceEngine,
    Realization,
    Scenario,
    World,
    engine_for,
    entropy,
    joint_distribution,
    least_model,
    success_probability,
    world_probability,
    worlds,
)
from .voi import (
    ActionTable,
    Reality,
    UtilitySpec,
    enumerate_realities,
    observe,
    plan_voi_by_reality,
    realizations,
    utility,
    validate_observable,
    voi_set,
)
from .plan import (
    DecisionTree,
    PlanNode,
    anytime_plan,
    best_single,
    classify_leaf,
    greedy_plan,
    optimal_plan,
    plan_from_json,
    plan_to_json,
    tree_voi,
)

__version__ = "0.1.0"
