"""Value of information over scenarios.

An atom template qualifies as observable in a scenario when, over the
models of the consistent worlds: no single ground instance holds in all of
them, some instance holds in at least one, no model carries two distinct
instances, and (a deliberate strengthening) every model carries exactly
one, so that realization probabilities always sum to 1.  Ground templates
realize as a truth value instead and are exempt from the last two checks.

The VoI of a set of observables for a query is the expected utility of the
query's posterior after jointly observing them, minus the current utility.
Utilities come in two forms: negated binary entropy of the posterior, and
maximum expected action utility against an action table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import Atom, InconsistentScenarioError, atom_is_ground
from .worlds import (
    InferenceEngine,
    MULTIPLE_INSTANCES,
    NO_INSTANCE,
    Realization,
    Scenario,
    engine_for,
)


class MalformedPlanError(Exception):
    """A reality reaches a plan node with no matching child."""


# ---------------------------------------------------------------------------
# Utility functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActionTable:
    """Actions with utilities per query truth value."""

    actions: tuple[str, ...]
    utility: tuple[tuple[float, float], ...]  # (u_when_true, u_when_false) per action

    def __post_init__(self):
        if not self.actions:
            raise ValueError("action table needs at least one action")
        if len(self.actions) != len(self.utility):
            raise ValueError("utility rows must match actions")

    @classmethod
    def from_json(cls, obj: dict) -> "ActionTable":
        actions = tuple(obj["actions"])
        table = obj["utility"]
        rows = []
        for a in actions:
            row = table[a]
            rows.append((float(row["true"]), float(row["false"])))
        return cls(actions, tuple(rows))

    def to_json(self) -> dict:
        return {
            "actions": list(self.actions),
            "utility": {
                a: {"true": ut, "false": uf}
                for a, (ut, uf) in zip(self.actions, self.utility)
            },
        }


@dataclass(frozen=True)
class UtilitySpec:
    kind: str  # "entropy" | "meu"
    actions: Optional[ActionTable] = None

    def __post_init__(self):
        if self.kind not in ("entropy", "meu"):
            raise ValueError(f"unknown utility kind {self.kind!r}")
        if self.kind == "meu" and self.actions is None:
            raise ValueError("meu utility needs an action table")

    @classmethod
    def entropy(cls) -> "UtilitySpec":
        return cls("entropy")

    @classmethod
    def meu(cls, table: ActionTable) -> "UtilitySpec":
        return cls("meu", table)

    def of_posterior(self, p: float) -> float:
        if self.kind == "entropy":
            u = 0.0
            if p > 0.0:
                u += p * math.log2(p)
            if p < 1.0:
                u += (1.0 - p) * math.log2(1.0 - p)
            return u
        assert self.actions is not None
        return max(p * ut + (1.0 - p) * uf for ut, uf in self.actions.utility)

    def to_json(self) -> dict:
        if self.kind == "entropy":
            return {"kind": "entropy"}
        assert self.actions is not None
        return {"kind": "meu", **self.actions.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "UtilitySpec":
        if obj.get("kind") == "meu":
            return cls.meu(ActionTable.from_json(obj))
        return cls.entropy()


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObservableCheck:
    template: Atom
    ok: bool
    condition: Optional[str] = None  # failed condition: "i" | "ii" | "iii" | "iv"
    detail: str = ""


def validate_observable(
    template: Atom, scenario: Scenario, engine: Optional[InferenceEngine] = None
) -> ObservableCheck:
    """Check the observability conditions over consistent worlds' models."""
    eng = engine or engine_for(scenario.theory)
    instances = eng.instances_of(template)
    if not instances:
        return ObservableCheck(template, False, "ii", f"{template} holds in no model")
    dims, reduced = eng.masses(scenario, tuple(instances))
    total = float(reduced.sum())

    flat = reduced.reshape(-1)
    k = len(instances)
    present = [0.0] * k
    none_mass = 0.0
    multi_mass = 0.0
    for i in range(flat.shape[0]):
        p = float(flat[i])
        if p == 0.0:
            continue
        bits = [(i >> (k - 1 - j)) & 1 for j in range(k)]
        cnt = sum(bits)
        for j, b in enumerate(bits):
            if b:
                present[j] += p
        if cnt == 0:
            none_mass += p
        elif cnt > 1:
            multi_mass += p

    for a, m in zip(instances, present):
        if m == total:
            return ObservableCheck(template, False, "i", f"{a} holds in every model")
    if all(m == 0.0 for m in present):
        return ObservableCheck(template, False, "ii", f"{template} holds in no model")
    if not atom_is_ground(template):
        if multi_mass > 0.0:
            return ObservableCheck(
                template, False, "iii", f"some model holds two instances of {template}"
            )
        if none_mass > 0.0:
            return ObservableCheck(
                template, False, "iv", f"some model holds no instance of {template}"
            )
    return ObservableCheck(template, True)


def realizations(
    template: Atom, scenario: Scenario, engine: Optional[InferenceEngine] = None
) -> list[tuple[Realization, float]]:
    """Positive-posterior realizations of a template with probabilities."""
    eng = engine or engine_for(scenario.theory)
    dist = eng.joint(scenario, (template,))
    out: list[tuple[Realization, float]] = []
    for (value,), p in dist.items():
        if value is NO_INSTANCE or value is MULTIPLE_INSTANCES:
            raise ValueError(f"{template} is not a valid observable: outcome {value}")
        if isinstance(value, bool):
            out.append((Realization(template, template, value), p))
        else:
            out.append((Realization(template, value, True), p))
    out.sort(key=lambda rp: rp[0].label)
    return out


def observe(
    scenario: Scenario, realization: Realization, engine: Optional[InferenceEngine] = None
) -> Scenario:
    """Append a realization as evidence; rejects probability-zero outcomes."""
    eng = engine or engine_for(scenario.theory)
    dist = eng.joint(scenario, (realization.template,))
    key = (realization.value,) if atom_is_ground(realization.template) else (realization.atom,)
    if dist[key] <= 0.0:
        raise InconsistentScenarioError(
            f"realization {realization} has probability zero in this scenario"
        )
    return scenario.observe(realization)


# ---------------------------------------------------------------------------
# Utility and VoI
# ---------------------------------------------------------------------------


def utility(
    query: Atom,
    scenario: Scenario,
    spec: UtilitySpec,
    engine: Optional[InferenceEngine] = None,
) -> float:
    eng = engine or engine_for(scenario.theory)
    return spec.of_posterior(eng.posterior(scenario, query))


def voi_set(
    templates: Sequence[Atom],
    query: Atom,
    scenario: Scenario,
    spec: UtilitySpec,
    engine: Optional[InferenceEngine] = None,
) -> float:
    """Expected utility gain from jointly observing the templates.

    The query may itself be among the observed templates, in which case
    every joint realization pins its truth value and the post-observation
    posterior is degenerate.
    """
    templates = tuple(templates)
    if not templates:
        return 0.0
    eng = engine or engine_for(scenario.theory)
    if query in templates:
        request = templates
        q_axis = templates.index(query)
        group_axes = tuple(range(len(templates)))
    else:
        request = templates + (query,)
        q_axis = len(templates)
        group_axes = tuple(range(len(templates)))
    dims, reduced = eng.masses(scenario, request)
    total = float(reduced.sum())
    groups: dict[tuple, list[float]] = {}
    now_true = 0.0
    for idx in np.ndindex(*reduced.shape):
        m = float(reduced[idx])
        if m <= 0.0:
            continue
        q_true = bool(dims[q_axis].values[idx[q_axis]])
        if q_true:
            now_true += m
        key = tuple(idx[a] for a in group_axes)
        acc = groups.setdefault(key, [0.0, 0.0])
        acc[1 if q_true else 0] += m
    u_now = spec.of_posterior(now_true / total)
    expected = 0.0
    for m_false, m_true in groups.values():
        m = m_false + m_true
        expected += (m / total) * spec.of_posterior(m_true / m)
    return expected - u_now


# ---------------------------------------------------------------------------
# Realities and plan evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Reality:
    """One realization for every declared observable."""

    assignments: tuple[Realization, ...]

    def realization_for(self, template: Atom) -> Realization:
        for r in self.assignments:
            if r.template == template:
                return r
        raise KeyError(f"reality has no realization for {template}")


def enumerate_realities(
    scenario: Scenario, engine: Optional[InferenceEngine] = None
) -> list[tuple[Reality, float]]:
    """Jointly consistent total realization assignments with probabilities."""
    eng = engine or engine_for(scenario.theory)
    declared = eng.declared_templates
    if not declared:
        return [(Reality(()), 1.0)]
    dist = eng.joint(scenario, declared)
    out: list[tuple[Reality, float]] = []
    for outcome, p in dist.items():
        if p <= 0.0:
            continue
        assignments = []
        for template, value in zip(declared, outcome):
            if value is NO_INSTANCE or value is MULTIPLE_INSTANCES:
                raise ValueError(f"{template} is not a valid observable: outcome {value}")
            if isinstance(value, bool):
                assignments.append(Realization(template, template, value))
            else:
                assignments.append(Realization(template, value, True))
        out.append((Reality(tuple(assignments)), p))
    return out


def plan_voi_by_reality(
    plan,
    query: Atom,
    spec: UtilitySpec,
    engine: Optional[InferenceEngine] = None,
) -> float:
    """VoI of a decision tree by enumerating realities and walking the tree.

    For each reality, follows the plan from the root, at every internal
    node descending into the child matching the reality's realization of
    the node's choice; the collected realizations define the final
    scenario whose utility is weighted by the reality's probability.
    """
    root = plan.root
    eng = engine or engine_for(root.scenario.theory)
    base = utility(query, root.scenario, spec, eng)
    total = 0.0
    for reality, p in enumerate_realities(root.scenario, eng):
        node = root
        while node.choice is not None:
            r = reality.realization_for(node.choice)
            child = node.children.get(r.label)
            if child is None:
                raise MalformedPlanError(
                    f"reality with {r} reaches a node whose choice {node.choice} "
                    f"has no matching child"
                )
            node = child
        total += p * utility(query, node.scenario, spec, eng)
    return total - base
