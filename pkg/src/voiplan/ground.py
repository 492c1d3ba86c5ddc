"""Grounding: from a Theory to a finite propositional program.

The grounder works bottom-up in two phases.  Phase one computes the set of
*possible* ground atoms (an over-approximation of everything that can be
true in some world) together with the set of *certain* atoms (true in every
world, derived from background clauses alone).  Phase two re-enumerates all
clause instantiations against the finished closure and emits:

  - probabilistic facts: ground probabilistic clauses whose residual body
    is empty become facts under their own head atom; clauses with an
    uncertain residual body get a fresh choice atom ``$choiceK`` carrying
    the probability, plus a rule ``head :- $choiceK, body``.
  - ground background rules with positive, negative and count conditions
    (``findall`` + ``length`` + integer comparison compile to a count over
    the collected candidate atoms).

Stratification is checked at the ground level: strongly connected
components of the atom dependency graph must not contain a negative or
count edge.  This admits programs where one argument position separates a
predicate's recursive and negated uses, while rejecting genuine cycles
through negation.  Relevance restriction keeps only facts and rules on
which a goal atom transitively depends.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .model import (
    Atom,
    AtomLiteral,
    Comparison,
    Const,
    Findall,
    Length,
    Literal,
    ProgramError,
    ResourceLimitError,
    Term,
    Theory,
    atom_is_ground,
    match,
    subst_atom,
    subst_term,
)

_CMP = {
    ">": lambda a, b: a > b,
    "<": lambda a, b: a < b,
    ">=": lambda a, b: a >= b,
    "=<": lambda a, b: a <= b,
}
_CMP_SWAP = {">": "<", "<": ">", ">=": "=<", "=<": ">="}


@dataclass(frozen=True)
class CountCond:
    """Holds iff |true candidates| op value in the current model."""

    candidates: tuple[int, ...]
    op: str
    value: int


@dataclass(frozen=True)
class GroundRule:
    head: int
    pos: tuple[int, ...] = ()
    neg: tuple[int, ...] = ()
    counts: tuple[CountCond, ...] = ()


@dataclass(frozen=True)
class StratificationViolation:
    atom: Atom
    through: Atom
    kind: str  # "negation" | "aggregate"

    def __str__(self) -> str:
        via = "negation" if self.kind == "negation" else "aggregation"
        return f"cycle through {via}: {self.atom} depends on {self.through}"


@dataclass
class GroundProgram:
    """Relevance-restricted propositional program over an atom table."""

    atoms: list[Atom]
    atom_index: dict[Atom, int]
    facts: tuple[tuple[int, float], ...]
    rules: tuple[GroundRule, ...]
    strata: tuple[tuple[int, ...], ...]
    violations: tuple[StratificationViolation, ...] = ()

    @property
    def fact_atoms(self) -> list[Atom]:
        return [self.atoms[i] for i, _ in self.facts]

    @property
    def world_count(self) -> int:
        return 1 << len(self.facts)

    def id_of(self, atom: Atom) -> Optional[int]:
        return self.atom_index.get(atom)


class _CountRef:
    """Placeholder bound to a length/2 output during instantiation."""

    __slots__ = ("source",)

    def __init__(self, source: str):
        self.source = source


class FullGround:
    """Complete closure of a theory; restrict() carves out goal-relevant parts."""

    def __init__(self, theory: Theory, max_rules: int = 1_000_000):
        self.theory = theory
        self.max_rules = max_rules
        self.atoms: list[Atom] = []
        self.atom_index: dict[Atom, int] = {}
        self.by_pred: dict[tuple[str, int], list[int]] = {}
        self.certain: set[int] = set()
        self.facts: list[tuple[int, float]] = []
        self.rules: list[GroundRule] = []
        self.prob_heads: set[int] = set()
        self.bk_heads: set[int] = set()
        self._fact_heads: set[int] = set()
        self._rule_seen: set[tuple] = set()
        self._choice_count = 0
        self._instance_count = 0
        self._build()

    # -- atom table ----------------------------------------------------

    def _add_atom(self, atom: Atom) -> int:
        idx = self.atom_index.get(atom)
        if idx is None:
            idx = len(self.atoms)
            self.atoms.append(atom)
            self.atom_index[atom] = idx
            self.by_pred.setdefault(atom.indicator, []).append(idx)
        return idx

    def _candidates(self, pattern: Atom) -> list[int]:
        return self.by_pred.get(pattern.indicator, [])

    # -- instantiation over the possible-atom closure --------------------

    def _instantiate(
        self, body: tuple[Literal, ...], theta: dict[str, Term], certain_only: bool
    ) -> Iterator[dict[str, Term]]:
        """Yield substitutions grounding all positive atom literals."""
        if not body:
            yield theta
            return
        lit, rest = body[0], body[1:]
        if isinstance(lit, AtomLiteral) and not lit.negated:
            pattern = subst_atom(lit.atom, theta)
            for idx in list(self._candidates(pattern)):
                if certain_only and idx not in self.certain:
                    continue
                binding = match(pattern, self.atoms[idx])
                if binding is None:
                    continue
                new_theta = {**theta, **binding}
                yield from self._instantiate(rest, new_theta, certain_only)
            return
        if isinstance(lit, Comparison):
            left = subst_term(lit.left, theta)
            right = subst_term(lit.right, theta)
            if isinstance(left, _CountRef) or isinstance(right, _CountRef):
                # count condition; defer to emission, see _compile_body
                yield from self._instantiate(rest, theta, certain_only)
                return
            yield from self._eval_comparison(left, lit.op, right, rest, theta, certain_only)
            return
        if isinstance(lit, Findall):
            yield from self._instantiate(rest, theta, certain_only)
            return
        if isinstance(lit, Length):
            new_theta = dict(theta)
            new_theta[lit.out.name] = _CountRef(lit.source.name)  # type: ignore[assignment]
            yield from self._instantiate(rest, new_theta, certain_only)
            return
        # negated literal: no bindings, possibility unaffected
        yield from self._instantiate(rest, theta, certain_only)

    def _eval_comparison(self, left, op, right, rest, theta, certain_only):
        if not isinstance(left, Const) or not isinstance(right, Const):
            raise ProgramError(f"comparison on unbound terms: {left}{op}{right}")
        if not isinstance(left.value, int) or not isinstance(right.value, int):
            raise ProgramError(f"comparison needs integers: {left}{op}{right}")
        if _CMP[op](left.value, right.value):
            yield from self._instantiate(rest, theta, certain_only)

    # -- phase one: possible and certain closures ------------------------

    def _clauses(self) -> list[tuple[Optional[float], Atom, tuple[Literal, ...]]]:
        out: list[tuple[Optional[float], Atom, tuple[Literal, ...]]] = []
        for pc in self.theory.prob_clauses:
            out.append((pc.prob, pc.head, pc.body))
        for c in self.theory.bk_clauses:
            out.append((None, c.head, c.body))
        return out

    def _build(self) -> None:
        clauses = self._clauses()
        changed = True
        while changed:
            changed = False
            for _, head, body in clauses:
                for theta in self._instantiate(body, {}, certain_only=False):
                    ground_head = subst_atom(head, theta)
                    if not atom_is_ground(ground_head):
                        raise ProgramError(f"head not grounded by body: {head}")
                    if ground_head not in self.atom_index:
                        self._add_atom(ground_head)
                        changed = True
        self._close_certain(clauses)
        self._emit(clauses)

    def _close_certain(self, clauses) -> None:
        changed = True
        while changed:
            changed = False
            for prob, head, body in clauses:
                if prob is not None:
                    continue
                if any(isinstance(l, (Findall, Length)) for l in body):
                    continue
                for theta in self._instantiate(body, {}, certain_only=True):
                    if not self._negs_certainly_true(body, theta):
                        continue
                    idx = self.atom_index[subst_atom(head, theta)]
                    if idx not in self.certain:
                        self.certain.add(idx)
                        changed = True

    def _negs_certainly_true(self, body: tuple[Literal, ...], theta) -> bool:
        for lit in body:
            if isinstance(lit, AtomLiteral) and lit.negated:
                target = subst_atom(lit.atom, theta)
                if target in self.atom_index:  # possibly true somewhere
                    return False
        return True

    # -- phase two: emission ---------------------------------------------

    def _compile_body(
        self, body: tuple[Literal, ...], theta: dict[str, Term]
    ) -> Optional[tuple[tuple[int, ...], tuple[int, ...], tuple[CountCond, ...]]]:
        """Simplify one instantiated body; None when it can never hold."""
        pos: list[int] = []
        neg: list[int] = []
        counts: list[CountCond] = []
        findall_sets: dict[str, tuple[int, ...]] = {}
        for lit in body:
            if isinstance(lit, AtomLiteral):
                target = subst_atom(lit.atom, theta)
                idx = self.atom_index.get(target)
                if lit.negated:
                    if idx is None:
                        continue  # never true anywhere: negation holds
                    if idx in self.certain:
                        return None
                    neg.append(idx)
                else:
                    assert idx is not None
                    if idx in self.certain:
                        continue
                    pos.append(idx)
            elif isinstance(lit, Findall):
                pattern = subst_atom(lit.goal, theta)
                cands = tuple(
                    idx
                    for idx in self._candidates(pattern)
                    if match(pattern, self.atoms[idx]) is not None
                )
                findall_sets[lit.out.name] = cands
            elif isinstance(lit, Length):
                ref = theta.get(lit.out.name)
                if not isinstance(ref, _CountRef):
                    raise ProgramError(f"length source must come from findall: {lit}")
                if ref.source not in findall_sets:
                    raise ProgramError(f"length source must come from findall: {lit}")
            elif isinstance(lit, Comparison):
                left = subst_term(lit.left, theta)
                right = subst_term(lit.right, theta)
                l_ref = isinstance(left, _CountRef)
                r_ref = isinstance(right, _CountRef)
                if not l_ref and not r_ref:
                    continue  # already checked during instantiation
                if l_ref and r_ref:
                    raise ProgramError(f"cannot compare two counts: {lit}")
                if r_ref:
                    left, right = right, left
                    op = _CMP_SWAP[lit.op]
                else:
                    op = lit.op
                assert isinstance(left, _CountRef)
                if not isinstance(right, Const) or not isinstance(right.value, int):
                    raise ProgramError(f"count compared against non-integer: {lit}")
                cands = findall_sets[left.source]
                counts.append(CountCond(cands, op, right.value))
        return tuple(pos), tuple(neg), tuple(counts)

    def _emit(self, clauses) -> None:
        for i in sorted(self.certain):
            self._add_rule(GroundRule(i))
        for prob, head, body in clauses:
            for theta in self._instantiate(body, {}, certain_only=False):
                head_idx = self.atom_index[subst_atom(head, theta)]
                compiled = self._compile_body(body, theta)
                if compiled is None:
                    continue
                pos, neg, counts = compiled
                if prob is None:
                    self.bk_heads.add(head_idx)
                    if head_idx in self.certain:
                        continue
                    self._add_rule(GroundRule(head_idx, pos, neg, counts))
                else:
                    self.prob_heads.add(head_idx)
                    self._emit_prob(head_idx, prob, pos, neg, counts)

    def _emit_prob(self, head_idx, prob, pos, neg, counts) -> None:
        if not pos and not neg and not counts and head_idx not in self._fact_heads:
            key = ("fact", head_idx, prob)
            if key in self._rule_seen:
                return
            self._rule_seen.add(key)
            self._fact_heads.add(head_idx)
            self.facts.append((head_idx, prob))
            self._count_instance()
            return
        choice = self._add_atom(Atom(f"$choice{self._choice_count}"))
        self._choice_count += 1
        self.facts.append((choice, prob))
        self._add_rule(GroundRule(head_idx, (choice,) + pos, neg, counts))

    def _add_rule(self, rule: GroundRule) -> None:
        key = ("rule", rule.head, rule.pos, rule.neg, rule.counts)
        if key in self._rule_seen:
            return
        self._rule_seen.add(key)
        self.rules.append(rule)
        self._count_instance()

    def _count_instance(self) -> None:
        self._instance_count += 1
        if self._instance_count > self.max_rules:
            raise ResourceLimitError(
                f"grounding exceeds {self.max_rules} rules; instance too large for exact enumeration"
            )

    # -- stratification ----------------------------------------------------

    def stratify(
        self, rules: Iterable[GroundRule]
    ) -> tuple[tuple[tuple[int, ...], ...], tuple[StratificationViolation, ...]]:
        """Tarjan SCCs in dependency order plus negation/aggregate cycle report."""
        rules = list(rules)
        deps: dict[int, list[int]] = {}
        strict: set[tuple[int, int]] = set()  # (head, dep) must be strictly lower
        strict_kind: dict[tuple[int, int], str] = {}
        for r in rules:
            lst = deps.setdefault(r.head, [])
            lst.extend(r.pos)
            for n in r.neg:
                lst.append(n)
                strict.add((r.head, n))
                strict_kind.setdefault((r.head, n), "negation")
            for c in r.counts:
                for a in c.candidates:
                    lst.append(a)
                    strict.add((r.head, a))
                    strict_kind.setdefault((r.head, a), "aggregate")

        index: dict[int, int] = {}
        low: dict[int, int] = {}
        on_stack: set[int] = set()
        stack: list[int] = []
        sccs: list[tuple[int, ...]] = []
        counter = [0]

        def strongconnect(v0: int) -> None:
            work = [(v0, iter(deps.get(v0, ())))]
            index[v0] = low[v0] = counter[0]
            counter[0] += 1
            stack.append(v0)
            on_stack.add(v0)
            while work:
                v, it = work[-1]
                advanced = False
                for w in it:
                    if w not in index:
                        index[w] = low[w] = counter[0]
                        counter[0] += 1
                        stack.append(w)
                        on_stack.add(w)
                        work.append((w, iter(deps.get(w, ()))))
                        advanced = True
                        break
                    if w in on_stack:
                        low[v] = min(low[v], index[w])
                if advanced:
                    continue
                work.pop()
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        comp.append(w)
                        if w == v:
                            break
                    sccs.append(tuple(sorted(comp)))

        nodes = sorted(set(deps) | {a for lst in deps.values() for a in lst})
        for v in nodes:
            if v not in index:
                strongconnect(v)

        violations: list[StratificationViolation] = []
        comp_of = {a: i for i, comp in enumerate(sccs) for a in comp}
        for (h, d) in sorted(strict):
            if comp_of.get(h) == comp_of.get(d):
                violations.append(
                    StratificationViolation(self.atoms[h], self.atoms[d], strict_kind[(h, d)])
                )
        return tuple(sccs), tuple(violations)

    # -- relevance restriction ----------------------------------------------

    def restrict(self, goal_atoms: Iterable[Atom]) -> GroundProgram:
        rules_by_head: dict[int, list[GroundRule]] = {}
        for r in self.rules:
            rules_by_head.setdefault(r.head, []).append(r)
        needed: set[int] = set()
        frontier: list[int] = []
        for g in goal_atoms:
            idx = self.atom_index.get(g)
            if idx is not None and idx not in needed:
                needed.add(idx)
                frontier.append(idx)
        while frontier:
            a = frontier.pop()
            for r in rules_by_head.get(a, ()):
                for dep in list(r.pos) + list(r.neg) + [
                    c for cond in r.counts for c in cond.candidates
                ]:
                    if dep not in needed:
                        needed.add(dep)
                        frontier.append(dep)
        facts = tuple((i, p) for i, p in self.facts if i in needed)
        rules = tuple(r for r in self.rules if r.head in needed)
        strata, violations = self.stratify(rules)
        return GroundProgram(
            atoms=self.atoms,
            atom_index=self.atom_index,
            facts=facts,
            rules=rules,
            strata=strata,
            violations=violations,
        )

    def full_program(self) -> GroundProgram:
        strata, violations = self.stratify(self.rules)
        return GroundProgram(
            atoms=self.atoms,
            atom_index=self.atom_index,
            facts=tuple(self.facts),
            rules=tuple(self.rules),
            strata=strata,
            violations=violations,
        )

    def instances_of(self, template: Atom) -> list[Atom]:
        """Ground closure atoms the template matches, in table order."""
        if atom_is_ground(template):
            return [template] if template in self.atom_index else []
        return [
            self.atoms[idx]
            for idx in self._candidates(template)
            if match(template, self.atoms[idx]) is not None
        ]


def ground(theory: Theory, goal_atoms: Iterable[Atom], max_rules: int = 1_000_000) -> GroundProgram:
    """Ground a theory, keeping only parts some goal atom depends on."""
    return FullGround(theory, max_rules=max_rules).restrict(goal_atoms)
