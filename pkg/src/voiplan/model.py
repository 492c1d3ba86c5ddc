"""Core program representation: terms, atoms, clauses, and theories.

A theory is the parsed form of a program in the ProbLog-style input
language: probabilistic clauses ``p::head :- body``, definite background
clauses with stratified negation, ``observable(Template, Cost)``
declarations and ``evidence(Atom, Bool)`` facts.  All values here are
immutable; theories can be shared freely across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Union


class ProgramError(Exception):
    """Malformed program text or declarations (CLI exit code 2)."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = f" at line {line}:{column}" if line is not None else ""
        super().__init__(message + where)


class InconsistentScenarioError(Exception):
    """Evidence with probability zero (CLI exit code 3)."""


class ResourceLimitError(Exception):
    """Grounding or world enumeration exceeds configured limits (exit code 4)."""


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

_IDENT_RE = re.compile(r"[a-z][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class Const:
    """Constant symbol: identifier or integer (numeric literals allowed in
    declaration positions such as observation costs)."""

    value: Union[str, int, float]

    def __str__(self) -> str:
        v = self.value
        if isinstance(v, bool) or not isinstance(v, (int, float, str)):
            return str(v)
        if isinstance(v, (int, float)):
            return format_number(v)
        if _IDENT_RE.match(v):
            return v
        return "'" + v.replace("'", "\\'") + "'"


@dataclass(frozen=True)
class Var:
    """Named variable; anonymous ones get unique generated names."""

    name: str
    anonymous: bool = False

    def __str__(self) -> str:
        return "_" if self.anonymous else self.name


@dataclass(frozen=True)
class Compound:
    functor: str
    args: tuple["Term", ...]

    def __str__(self) -> str:
        return f"{self.functor}({','.join(map(str, self.args))})"


Term = Union[Const, Var, Compound]


@dataclass(frozen=True)
class Atom:
    """Predicate applied to argument terms."""

    pred: str
    args: tuple[Term, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def indicator(self) -> tuple[str, int]:
        return (self.pred, len(self.args))

    def __str__(self) -> str:
        if not self.args:
            return self.pred
        return f"{self.pred}({','.join(map(str, self.args))})"


def term_vars(t: Term) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Compound):
        for a in t.args:
            yield from term_vars(a)


def atom_vars(a: Atom) -> Iterator[Var]:
    for t in a.args:
        yield from term_vars(t)


def term_is_ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, Compound):
        return all(term_is_ground(a) for a in t.args)
    return True


def atom_is_ground(a: Atom) -> bool:
    return all(term_is_ground(t) for t in a.args)


Subst = Mapping[str, Term]


def subst_term(t: Term, s: Subst) -> Term:
    if isinstance(t, Var):
        return s.get(t.name, t)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(subst_term(a, s) for a in t.args))
    return t


def subst_atom(a: Atom, s: Subst) -> Atom:
    return Atom(a.pred, tuple(subst_term(t, s) for t in a.args))


def _match_term(pattern: Term, ground: Term, out: dict[str, Term]) -> bool:
    if isinstance(pattern, Var):
        bound = out.get(pattern.name)
        if bound is None:
            out[pattern.name] = ground
            return True
        return bound == ground
    if isinstance(pattern, Const):
        return pattern == ground
    if isinstance(pattern, Compound):
        if (
            not isinstance(ground, Compound)
            or pattern.functor != ground.functor
            or len(pattern.args) != len(ground.args)
        ):
            return False
        return all(_match_term(p, g, out) for p, g in zip(pattern.args, ground.args))
    return False


def match(template: Atom, ground_atom: Atom) -> Optional[dict[str, Term]]:
    """One-way matching of a template against a ground atom.

    Returns the substitution mapping the template's variables (anonymous
    slots included, under their generated names) onto the ground atom's
    subterms, or None when the atom is not an instance of the template.
    """
    if template.indicator != ground_atom.indicator:
        return None
    out: dict[str, Term] = {}
    for p, g in zip(template.args, ground_atom.args):
        if not _match_term(p, g, out):
            return None
    return out


# ---------------------------------------------------------------------------
# Literals and clauses
# ---------------------------------------------------------------------------

COMPARISON_OPS = (">", "<", ">=", "=<")


@dataclass(frozen=True)
class AtomLiteral:
    atom: Atom
    negated: bool = False

    def __str__(self) -> str:
        return f"not({self.atom})" if self.negated else str(self.atom)


@dataclass(frozen=True)
class Comparison:
    """Integer comparison between two terms, e.g. ``N > 2``."""

    left: Term
    op: str
    right: Term

    def __str__(self) -> str:
        return f"{self.left}{self.op}{self.right}"


@dataclass(frozen=True)
class Findall:
    """``findall(Item, Goal, Out)``: collect provable instances of Goal."""

    item: Var
    goal: Atom
    out: Var

    def __str__(self) -> str:
        return f"findall({self.item},{self.goal},{self.out})"


@dataclass(frozen=True)
class Length:
    """``length(ListVar, N)``: bind N to the size of a findall result."""

    source: Var
    out: Var

    def __str__(self) -> str:
        return f"length({self.source},{self.out})"


Literal = Union[AtomLiteral, Comparison, Findall, Length]


@dataclass(frozen=True)
class Clause:
    head: Atom
    body: tuple[Literal, ...] = ()

    def __str__(self) -> str:
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(map(str, self.body))}."


@dataclass(frozen=True)
class ProbClause:
    prob: float
    head: Atom
    body: tuple[Literal, ...] = ()

    def __str__(self) -> str:
        if not self.body:
            return f"{format_number(self.prob)}::{self.head}."
        return f"{format_number(self.prob)}::{self.head} :- {', '.join(map(str, self.body))}."


@dataclass(frozen=True)
class ObservableDecl:
    """``observable(Template, Cost)``: template args ground or anonymous."""

    template: Atom
    cost: float

    def __str__(self) -> str:
        return f"observable({self.template}, {format_number(self.cost)})."


@dataclass(frozen=True)
class EvidenceFact:
    atom: Atom
    value: bool

    def __str__(self) -> str:
        return f"evidence({self.atom}, {'true' if self.value else 'false'})."


@dataclass(frozen=True)
class Theory:
    prob_clauses: tuple[ProbClause, ...] = ()
    bk_clauses: tuple[Clause, ...] = ()
    observables: tuple[ObservableDecl, ...] = ()
    evidence: tuple[EvidenceFact, ...] = ()

    def observable_for(self, template: Atom) -> Optional[ObservableDecl]:
        for decl in self.observables:
            if decl.template == template:
                return decl
        return None

    def with_evidence(self, extra: Iterable[EvidenceFact]) -> "Theory":
        return Theory(
            self.prob_clauses,
            self.bk_clauses,
            self.observables,
            self.evidence + tuple(extra),
        )


def format_number(x: float) -> str:
    """Canonical numeric text: integral floats print without a decimal part."""
    if x == float("inf"):
        return "inf"
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def theory_source(t: Theory) -> str:
    """Serialize back to program text; reparsing yields an equal Theory."""
    lines: list[str] = []
    for pc in t.prob_clauses:
        lines.append(str(pc))
    for c in t.bk_clauses:
        lines.append(str(c))
    for o in t.observables:
        lines.append(str(o))
    for e in t.evidence:
        lines.append(str(e))
    return "\n".join(lines) + ("\n" if lines else "")
