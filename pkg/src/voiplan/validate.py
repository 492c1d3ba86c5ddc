"""Whole-theory validation.

Produces a report of violations rather than raising: range restriction of
every clause, ground-level stratification, disjointness of probabilistic
and derived ground atoms, and well-formedness of observable declarations
(every template matches some program atom, no ground atom is an instance
of two declared templates).  An empty report means the theory is ready for
grounding and inference.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

from .ground import FullGround
from .model import (
    Atom,
    AtomLiteral,
    Comparison,
    Findall,
    Length,
    Literal,
    ProgramError,
    Theory,
    Var,
    atom_vars,
    term_vars,
)


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


KIND_RANGE = "range-restriction"
KIND_STRATIFICATION = "non-stratified"
KIND_PROB_OVERLAP = "prob-head-overlap"
KIND_OBS_OVERLAP = "observable-overlap"
KIND_OBS_UNMATCHED = "observable-unmatched"
KIND_GROUNDING = "grounding"
KIND_BOUNDS = "bounds"


def _range_violations(head: Atom, body: tuple[Literal, ...], label: str) -> Iterable[Violation]:
    bound: set[str] = set()  # bound by positive atom literals
    list_vars: set[str] = set()  # findall outputs
    count_vars: set[str] = set()  # length outputs
    for lit in body:
        if isinstance(lit, AtomLiteral):
            names = {v.name for v in atom_vars(lit.atom)}
            if lit.negated:
                loose = names - bound
                if loose:
                    yield Violation(
                        KIND_RANGE,
                        f"{label}: negated {lit.atom} uses unbound variables"
                        f" {_names(lit.atom, loose)}",
                    )
            else:
                bound |= names
        elif isinstance(lit, Findall):
            goal_names = {v.name for v in atom_vars(lit.goal)} - {lit.item.name}
            loose = goal_names - bound
            if loose:
                yield Violation(
                    KIND_RANGE,
                    f"{label}: findall goal {lit.goal} uses unbound variables"
                    f" {_names(lit.goal, loose)}",
                )
            list_vars.add(lit.out.name)
        elif isinstance(lit, Length):
            if lit.source.name not in list_vars:
                yield Violation(
                    KIND_RANGE, f"{label}: length source {lit.source} is not a findall result"
                )
            count_vars.add(lit.out.name)
        elif isinstance(lit, Comparison):
            names = {v.name for t in (lit.left, lit.right) for v in term_vars(t)}
            loose = names - bound - count_vars
            if loose:
                yield Violation(
                    KIND_RANGE, f"{label}: comparison {lit} uses unbound variables"
                )
    head_loose = {v.name for v in atom_vars(head)} - bound
    if head_loose:
        yield Violation(
            KIND_RANGE, f"{label}: head variables {_names(head, head_loose)} not bound by the body"
        )


def _names(atom: Atom | object, names: set[str]) -> str:
    shown = sorted("_" if n.startswith("_#") else n for n in names)
    return ", ".join(shown)


def validate_theory(theory: Theory) -> list[Violation]:
    """All violations found in the theory; empty list means valid."""
    violations: list[Violation] = []
    for pc in theory.prob_clauses:
        if not 0.0 <= pc.prob <= 1.0:
            violations.append(Violation(KIND_BOUNDS, f"probability {pc.prob} outside [0,1]"))
        violations.extend(_range_violations(pc.head, pc.body, str(pc.head)))
    for c in theory.bk_clauses:
        violations.extend(_range_violations(c.head, c.body, str(c.head)))
    for decl in theory.observables:
        if decl.cost <= 0:
            violations.append(Violation(KIND_BOUNDS, f"cost of {decl.template} must be positive"))
        for arg in decl.template.args:
            if isinstance(arg, Var) and not arg.anonymous:
                violations.append(
                    Violation(
                        KIND_BOUNDS,
                        f"observable template {decl.template} must use ground terms or '_'",
                    )
                )
    if any(v.kind == KIND_RANGE for v in violations):
        return violations

    try:
        full = FullGround(theory)
    except ProgramError as exc:
        violations.append(Violation(KIND_GROUNDING, str(exc)))
        return violations

    gp = full.full_program()
    for sv in gp.violations:
        violations.append(Violation(KIND_STRATIFICATION, str(sv)))

    for idx in sorted(full.prob_heads & full.bk_heads):
        violations.append(
            Violation(
                KIND_PROB_OVERLAP,
                f"{full.atoms[idx]} is both a probabilistic fact and a derived atom",
            )
        )

    instance_sets = []
    for decl in theory.observables:
        instances = full.instances_of(decl.template)
        if not instances:
            violations.append(
                Violation(KIND_OBS_UNMATCHED, f"{decl.template} matches no program atom")
            )
        instance_sets.append((decl.template, set(instances)))
    for (t1, s1), (t2, s2) in combinations(instance_sets, 2):
        shared = s1 & s2
        if shared:
            example = sorted(shared, key=str)[0]
            violations.append(
                Violation(
                    KIND_OBS_OVERLAP,
                    f"templates {t1} and {t2} overlap on {example}",
                )
            )
    return violations
