"""Budgeted conditional observation plans.

The greedy builder keeps a worklist of unexpanded nodes.  Each node holds a
scenario and a remaining budget; expansion picks the affordable, not yet
observed declared observable with the highest single-observation VoI, adds
one child per positive-probability realization with the budget reduced by
the observation cost, and stops at a node when one of three leaf conditions
holds: no candidates remain, none is affordable, or none gains utility.

The worklist order is FIFO for the plain greedy build and a priority queue
for the anytime variant (default priority: reach probability, descending),
which can be stopped after a number of expansions or a time limit and still
returns a valid partial plan.  Every expansion raises the tree's VoI by
exactly reach x chosen VoI, so logged VoI values increase strictly.

An exhaustive lookahead planner doubles as a small-instance oracle.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .model import Atom, ProgramError, ResourceLimitError, Theory, atom_is_ground
from .parser import parse_atom
from .voi import UtilitySpec, realizations, utility, voi_set
from .worlds import InferenceEngine, Realization, Scenario, engine_for

VOI_EPS = 1e-9
CHILD_PROB_EPS = 1e-12
TIE_EPS = 1e-12  # argmax margin: symmetric programs tie up to float noise

LEAF_NO_OBSERVABLES = "no-observables"
LEAF_INSUFFICIENT_BUDGET = "insufficient-budget"
LEAF_NO_GAIN = "no-gain"


@dataclass
class PlanNode:
    scenario: Scenario
    budget: float
    utility: float
    reach: float
    choice: Optional[Atom] = None
    children: dict[str, "PlanNode"] = field(default_factory=dict)
    child_probs: dict[str, float] = field(default_factory=dict)
    leaf_reason: Optional[str] = None  # None while pending in an anytime build

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self) -> list["PlanNode"]:
        if self.is_leaf:
            return [self]
        out: list[PlanNode] = []
        for child in self.children.values():
            out.extend(child.leaves())
        return out


@dataclass
class Expansion:
    index: int
    choice: Atom
    voi: float
    reach: float
    tree_voi: float  # running tree VoI after this expansion


@dataclass
class DecisionTree:
    root: PlanNode
    query: Atom
    spec: UtilitySpec
    budget: float
    expansions: list[Expansion] = field(default_factory=list)

    def nodes(self) -> list[PlanNode]:
        out, stack = [], [self.root]
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(n.children.values())
        return out


def tree_voi(tree: DecisionTree) -> float:
    """Expected leaf utility minus root utility (pending nodes count as leaves)."""
    return math.fsum(n.reach * n.utility for n in tree.root.leaves()) - tree.root.utility


def _candidates(theory: Theory, scenario: Scenario) -> list[tuple[Atom, float]]:
    observed = scenario.observed_templates
    return [
        (d.template, d.cost) for d in theory.observables if d.template not in observed
    ]


def best_single(
    scenario: Scenario,
    query: Atom,
    budget: float,
    spec: UtilitySpec,
    engine: Optional[InferenceEngine] = None,
) -> Optional[tuple[Atom, float]]:
    """Affordable unobserved observable with maximal single-observation VoI.

    Ties (up to float noise) go to the earliest declaration; returns None
    when nothing fits the budget.
    """
    eng = engine or engine_for(scenario.theory)
    best: Optional[tuple[Atom, float]] = None
    for template, cost in _candidates(scenario.theory, scenario):
        if cost > budget:
            continue
        v = voi_set((template,), query, scenario, spec, eng)
        if best is None or v > best[1] + TIE_EPS:
            best = (template, v)
    return best


def classify_leaf(
    node: PlanNode, query: Atom, spec: UtilitySpec, engine: Optional[InferenceEngine] = None
) -> str:
    """Which of the three stopping conditions holds at a childless node."""
    cands = _candidates(node.scenario.theory, node.scenario)
    if not cands:
        return LEAF_NO_OBSERVABLES
    if all(cost > node.budget for _, cost in cands):
        return LEAF_INSUFFICIENT_BUDGET
    return LEAF_NO_GAIN


def _build(
    s0: Scenario,
    query: Atom,
    budget: float,
    spec: UtilitySpec,
    engine: InferenceEngine,
    *,
    priority: Optional[Callable[[PlanNode], float]],
    max_expansions: Optional[int] = None,
    time_limit_ms: Optional[float] = None,
) -> DecisionTree:
    root = PlanNode(s0, budget, utility(query, s0, spec, engine), 1.0)
    tree = DecisionTree(root, query, spec, budget)
    seq = itertools.count()
    if priority is None:
        fifo: deque[PlanNode] = deque([root])
        pop, push, pending = fifo.popleft, fifo.append, lambda: bool(fifo)
    else:
        heap: list[tuple[float, int, PlanNode]] = [(-priority(root), next(seq), root)]

        def pop() -> PlanNode:
            return heapq.heappop(heap)[2]

        def push(n: PlanNode) -> None:
            heapq.heappush(heap, (-priority(n), next(seq), n))

        def pending() -> bool:
            return bool(heap)

    started = time.monotonic()
    running_voi = 0.0
    while pending():
        if max_expansions is not None and len(tree.expansions) >= max_expansions:
            break
        if time_limit_ms is not None and (time.monotonic() - started) * 1000.0 > time_limit_ms:
            break
        node = pop()
        cands = _candidates(node.scenario.theory, node.scenario)
        affordable = [(t, c) for t, c in cands if c <= node.budget]
        if not cands:
            node.leaf_reason = LEAF_NO_OBSERVABLES
            continue
        if not affordable:
            node.leaf_reason = LEAF_INSUFFICIENT_BUDGET
            continue
        chosen = best_single(node.scenario, query, node.budget, spec, engine)
        assert chosen is not None
        template, gain = chosen
        if gain <= VOI_EPS:
            node.leaf_reason = LEAF_NO_GAIN
            continue
        cost = dict(cands)[template]
        node.choice = template
        outcomes = realizations(template, node.scenario, engine)
        mass = math.fsum(p for _, p in outcomes)
        if abs(mass - 1.0) > 1e-9:
            raise AssertionError(f"realization probabilities of {template} sum to {mass}")
        for r, p in outcomes:
            if p <= CHILD_PROB_EPS:
                continue
            child_scenario = node.scenario.observe(r)
            child = PlanNode(
                scenario=child_scenario,
                budget=node.budget - cost,
                utility=utility(query, child_scenario, spec, engine),
                reach=node.reach * p,
            )
            node.children[r.label] = child
            node.child_probs[r.label] = p
            push(child)
        running_voi += node.reach * gain
        tree.expansions.append(
            Expansion(len(tree.expansions) + 1, template, gain, node.reach, running_voi)
        )
    return tree


def greedy_plan(
    s0: Scenario,
    query: Atom,
    budget: float,
    spec: UtilitySpec,
    engine: Optional[InferenceEngine] = None,
) -> DecisionTree:
    """Breadth-first greedy decision tree within the budget."""
    eng = engine or engine_for(s0.theory)
    return _build(s0, query, budget, spec, eng, priority=None)


PRIORITIES: dict[str, Optional[Callable[[PlanNode], float]]] = {
    "fifo": None,
    "reach": lambda n: n.reach,
}


def anytime_plan(
    s0: Scenario,
    query: Atom,
    budget: float,
    spec: UtilitySpec,
    engine: Optional[InferenceEngine] = None,
    *,
    priority: str | Callable[[PlanNode], float] = "reach",
    max_expansions: Optional[int] = None,
    time_limit_ms: Optional[float] = None,
) -> DecisionTree:
    """Greedy expansion in priority order, stoppable at any point.

    Unexpanded nodes of a stopped build stay unclassified (leaf_reason None)
    but the partial tree is a valid plan; the expansion log carries the tree
    VoI after every step.
    """
    eng = engine or engine_for(s0.theory)
    key = PRIORITIES[priority] if isinstance(priority, str) else priority
    if key is None and not isinstance(priority, str):
        raise ValueError("priority callable must not be None")
    return _build(
        s0,
        query,
        budget,
        spec,
        eng,
        priority=key,
        max_expansions=max_expansions,
        time_limit_ms=time_limit_ms,
    )


def optimal_plan(
    s0: Scenario,
    query: Atom,
    budget: float,
    spec: UtilitySpec,
    engine: Optional[InferenceEngine] = None,
    *,
    max_observables: int = 5,
    max_realizations: int = 3,
) -> DecisionTree:
    """Exhaustive-lookahead optimal plan; a small-instance oracle.

    Recurses over every (candidate, realization) pair with budget
    bookkeeping, memoized on the set of accumulated realizations (which
    determines both the scenario and the spent budget).
    """
    eng = engine or engine_for(s0.theory)
    theory = s0.theory
    if len(theory.observables) > max_observables:
        raise ResourceLimitError(
            f"{len(theory.observables)} observables exceed the exhaustive limit {max_observables}"
        )
    for d in theory.observables:
        if len(realizations(d.template, s0, eng)) > max_realizations:
            raise ResourceLimitError(
                f"{d.template} has more than {max_realizations} realizations"
            )

    memo: dict[frozenset, tuple[float, Optional[Atom]]] = {}

    def value(scenario: Scenario, remaining: float) -> tuple[float, Optional[Atom]]:
        key = frozenset((str(r.template), r.label) for r in scenario.observations)
        hit = memo.get(key)
        if hit is not None:
            return hit
        u_stop = utility(query, scenario, spec, eng)
        best_e, best_c = -math.inf, None
        for template, cost in _candidates(theory, scenario):
            if cost > remaining:
                continue
            e = 0.0
            for r, p in realizations(template, scenario, eng):
                if p <= CHILD_PROB_EPS:
                    continue
                e += p * value(scenario.observe(r), remaining - cost)[0]
            if e > best_e + TIE_EPS:
                best_e, best_c = e, template
        if best_c is None or best_e - u_stop <= VOI_EPS:
            result = (u_stop, None)
        else:
            result = (best_e, best_c)
        memo[key] = result
        return result

    def build(scenario: Scenario, remaining: float, reach: float) -> PlanNode:
        node = PlanNode(scenario, remaining, utility(query, scenario, spec, eng), reach)
        _, choice = value(scenario, remaining)
        if choice is None:
            node.leaf_reason = classify_leaf(node, query, spec, eng)
            return node
        cost = dict(_candidates(theory, scenario))[choice]
        node.choice = choice
        for r, p in realizations(choice, scenario, eng):
            if p <= CHILD_PROB_EPS:
                continue
            child = build(scenario.observe(r), remaining - cost, reach * p)
            node.children[r.label] = child
            node.child_probs[r.label] = p
        return node

    root = build(s0, budget, 1.0)
    return DecisionTree(root, query, spec, budget)


# ---------------------------------------------------------------------------
# Plan serialization
# ---------------------------------------------------------------------------


def _node_to_json(node: PlanNode) -> dict:
    return {
        "evidence": [[str(r.atom), r.value] for r in node.scenario.observations],
        "budget": node.budget,
        "utility": node.utility,
        "reach": node.reach,
        "choice": str(node.choice) if node.choice is not None else None,
        "leaf_reason": node.leaf_reason,
        "children": {label: _node_to_json(child) for label, child in node.children.items()},
    }


def plan_to_json(tree: DecisionTree) -> dict:
    return {
        "query": str(tree.query),
        "utility": tree.spec.to_json(),
        "budget": tree.budget,
        "root": _node_to_json(tree.root),
    }


def _realization_from_label(template: Atom, label: str) -> Realization:
    if atom_is_ground(template):
        if label not in ("true", "false"):
            raise ProgramError(f"realization of ground observable must be true/false: {label}")
        return Realization(template, template, label == "true")
    return Realization(template, parse_atom(label), True)


def plan_from_json(
    obj: dict, theory: Theory, engine: Optional[InferenceEngine] = None
) -> DecisionTree:
    """Rebuild a plan; utilities, reaches and child probabilities are
    recomputed from the program rather than trusted from the file."""
    try:
        query = parse_atom(obj["query"])
        spec = UtilitySpec.from_json(obj["utility"])
        budget = float(obj["budget"])
        root_obj = obj["root"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ProgramError(f"malformed plan file: {exc}") from exc
    eng = engine or engine_for(theory)

    def build(node_obj: dict, scenario: Scenario, reach: float) -> PlanNode:
        node = PlanNode(
            scenario=scenario,
            budget=float(node_obj["budget"]),
            utility=utility(query, scenario, spec, eng),
            reach=reach,
        )
        node.leaf_reason = node_obj.get("leaf_reason")
        choice_text = node_obj.get("choice")
        children = node_obj.get("children") or {}
        if choice_text is None:
            if children:
                raise ProgramError("plan node has children but no choice")
            return node
        template = parse_atom(choice_text)
        node.choice = template
        probs = {r.label: p for r, p in realizations(template, scenario, eng)}
        for label, child_obj in children.items():
            r = _realization_from_label(template, label)
            p = probs.get(label, 0.0)
            if p <= 0.0:
                raise ProgramError(
                    f"plan child {label!r} of {template} has zero probability"
                )
            node.child_probs[label] = p
            node.children[label] = build(child_obj, scenario.observe(r), reach * p)
        return node

    tree = DecisionTree(build(root_obj, Scenario(theory), 1.0), query, spec, budget)
    return tree


def plan_dumps(tree: DecisionTree) -> str:
    return json.dumps(plan_to_json(tree), indent=2)
