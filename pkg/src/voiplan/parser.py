"""Tokenizer and recursive-descent parser for the program input language.

Grammar (terminated clauses, ``%`` comments to end of line)::

    clause  := [prob "::"] atom [":-" body] "."
    body    := disjunct (";" disjunct)*          ; ";" sugars extra clauses
    disjunct:= literal ("," literal)*
    literal := "not" ["("] atom [")"] | atom | term cmp term
    term    := var | "_" | int | ident ["(" term ("," term)* ")"]
    cmp     := ">" | "<" | ">=" | "=<"

Reserved predicates: ``observable/2``, ``evidence/2``, ``findall/3``,
``length/2``.  Probabilities must lie in [0,1], observation costs must be
positive, evidence atoms must be ground.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .model import (
    Atom,
    AtomLiteral,
    Clause,
    Comparison,
    Compound,
    Const,
    EvidenceFact,
    Findall,
    Length,
    Literal,
    ObservableDecl,
    ProbClause,
    ProgramError,
    Term,
    Theory,
    Var,
    atom_is_ground,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>%[^\n]*)
  | (?P<float>\d+\.\d+)
  | (?P<int>\d+)
  | (?P<label>::)
  | (?P<neck>:-)
  | (?P<op>>=|=<|>|<)
  | (?P<punct>[(),;.])
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<ident>[a-z][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(src: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ProgramError(f"unexpected character {src[pos]!r}", line, col)
        kind = m.lastgroup or ""
        text = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.anon_count = 0  # reset per clause so round-trips compare equal

    # -- token plumbing ----------------------------------------------------

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else None
            raise ProgramError(
                "unexpected end of input",
                last.line if last else 1,
                last.column if last else 1,
            )
        self.pos += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text:
            raise ProgramError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.column)
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.text == text

    # -- terms and atoms ---------------------------------------------------

    def parse_term(self) -> Term:
        tok = self.next()
        if tok.kind == "int":
            return Const(int(tok.text))
        if tok.kind == "float":
            return Const(float(tok.text))
        if tok.kind == "var":
            if tok.text == "_":
                name = f"_#{self.anon_count}"
                self.anon_count += 1
                return Var(name, anonymous=True)
            return Var(tok.text)
        if tok.kind == "ident":
            if self.at("("):
                self.next()
                args = [self.parse_term()]
                while self.at(","):
                    self.next()
                    args.append(self.parse_term())
                self.expect(")")
                return Compound(tok.text, tuple(args))
            return Const(tok.text)
        raise ProgramError(f"expected a term, found {tok.text!r}", tok.line, tok.column)

    def term_to_atom(self, t: Term, tok: Token) -> Atom:
        if isinstance(t, Compound):
            return Atom(t.functor, t.args)
        if isinstance(t, Const) and isinstance(t.value, str):
            return Atom(t.value)
        raise ProgramError(f"expected an atom, found {t}", tok.line, tok.column)

    def parse_atom(self) -> Atom:
        tok = self.peek()
        if tok is None or tok.kind != "ident":
            bad = tok.text if tok else "end of input"
            raise ProgramError(
                f"expected an atom, found {bad!r}",
                tok.line if tok else 1,
                tok.column if tok else 1,
            )
        return self.term_to_atom(self.parse_term(), tok)

    # -- literals ----------------------------------------------------------

    def parse_literal(self) -> Literal:
        tok = self.peek()
        if tok is not None and tok.text == "not":
            self.next()
            if self.at("("):
                self.next()
                atom = self.parse_atom()
                self.expect(")")
            else:
                atom = self.parse_atom()
            return AtomLiteral(atom, negated=True)
        start = self.next()
        self.pos -= 1
        left = self.parse_term()
        nxt = self.peek()
        if nxt is not None and nxt.kind == "op":
            self.next()
            right = self.parse_term()
            return Comparison(left, nxt.text, right)
        atom = self.term_to_atom(left, start)
        if atom.indicator == ("findall", 3):
            item, goal, out = atom.args
            if not isinstance(item, Var) or not isinstance(out, Var):
                raise ProgramError("findall needs variable item and output", start.line, start.column)
            if not isinstance(goal, Compound):
                raise ProgramError("findall goal must be an atom", start.line, start.column)
            return Findall(item, Atom(goal.functor, goal.args), out)
        if atom.indicator == ("length", 2):
            src, out = atom.args
            if not isinstance(src, Var) or not isinstance(out, Var):
                raise ProgramError("length needs variable arguments", start.line, start.column)
            return Length(src, out)
        return AtomLiteral(atom)

    def parse_body(self) -> list[tuple[Literal, ...]]:
        """Returns one conjunction per ';'-separated disjunct."""
        disjuncts: list[tuple[Literal, ...]] = []
        current: list[Literal] = [self.parse_literal()]
        while True:
            if self.at(","):
                self.next()
                current.append(self.parse_literal())
            elif self.at(";"):
                self.next()
                disjuncts.append(tuple(current))
                current = [self.parse_literal()]
            else:
                break
        disjuncts.append(tuple(current))
        return disjuncts

    # -- clauses -----------------------------------------------------------

    def parse_program(self) -> Theory:
        prob_clauses: list[ProbClause] = []
        bk_clauses: list[Clause] = []
        observables: list[ObservableDecl] = []
        evidence: list[EvidenceFact] = []
        while self.peek() is not None:
            self.anon_count = 0
            tok = self.peek()
            assert tok is not None
            prob: float | None = None
            if tok.kind in ("float", "int") and self._label_follows():
                self.next()
                prob = float(tok.text)
                if not 0.0 <= prob <= 1.0:
                    raise ProgramError(f"probability {tok.text} outside [0,1]", tok.line, tok.column)
                self.expect("::")
            head_tok = self.peek()
            head = self.parse_atom()
            bodies: list[tuple[Literal, ...]] = [()]
            if self.at(":-"):
                self.next()
                bodies = self.parse_body()
            self.expect(".")
            for body in bodies:
                if prob is not None:
                    prob_clauses.append(ProbClause(prob, head, body))
                elif head.indicator == ("observable", 2) and not body:
                    observables.append(self._observable(head, head_tok))
                elif head.indicator == ("evidence", 2) and not body:
                    evidence.append(self._evidence(head, head_tok))
                else:
                    bk_clauses.append(Clause(head, body))
        return Theory(tuple(prob_clauses), tuple(bk_clauses), tuple(observables), tuple(evidence))

    def _label_follows(self) -> bool:
        nxt = self.tokens[self.pos + 1] if self.pos + 1 < len(self.tokens) else None
        return nxt is not None and nxt.kind == "label"

    def _observable(self, head: Atom, tok: Token | None) -> ObservableDecl:
        template_term, cost_term = head.args
        line = tok.line if tok else None
        col = tok.column if tok else None
        template = self.term_to_atom(template_term, tok or Token("ident", "?", 1, 1))
        if not isinstance(cost_term, Const) or not isinstance(cost_term.value, (int, float)):
            raise ProgramError("observable cost must be a number", line, col)
        cost = float(cost_term.value)
        if cost <= 0:
            raise ProgramError(f"observable cost must be positive, got {cost_term}", line, col)
        for arg in template.args:
            if isinstance(arg, Var) and not arg.anonymous:
                raise ProgramError(
                    f"observable template arguments must be ground or '_': {template}", line, col
                )
        return ObservableDecl(template, cost)

    def _evidence(self, head: Atom, tok: Token | None) -> EvidenceFact:
        atom_term, value_term = head.args
        line = tok.line if tok else None
        col = tok.column if tok else None
        atom = self.term_to_atom(atom_term, tok or Token("ident", "?", 1, 1))
        if not atom_is_ground(atom):
            raise ProgramError(f"evidence atom must be ground: {atom}", line, col)
        if value_term == Const("true"):
            return EvidenceFact(atom, True)
        if value_term == Const("false"):
            return EvidenceFact(atom, False)
        raise ProgramError(f"evidence truth value must be true or false: {value_term}", line, col)


def parse_theory(source_text: str) -> Theory:
    """Parse program text into a Theory; raises ProgramError with position."""
    return _Parser(tokenize(source_text)).parse_program()


def parse_atom(text: str) -> Atom:
    """Parse a single atom or template, e.g. a query or ``room(1,_)``."""
    parser = _Parser(tokenize(text))
    atom = parser.parse_atom()
    if parser.peek() is not None:
        tok = parser.peek()
        assert tok is not None
        raise ProgramError(f"unexpected trailing input {tok.text!r}", tok.line, tok.column)
    return atom


def parse_atom_list(text: str) -> list[Atom]:
    """Parse a comma-separated atom list; empty text yields an empty list.

    Anonymous slots are numbered per atom, so each template compares equal
    to the same template written in a program.
    """
    parser = _Parser(tokenize(text))
    if parser.peek() is None:
        return []
    atoms = [parser.parse_atom()]
    while parser.at(","):
        parser.next()
        parser.anon_count = 0
        atoms.append(parser.parse_atom())
    if parser.peek() is not None:
        tok = parser.peek()
        assert tok is not None
        raise ProgramError(f"unexpected trailing input {tok.text!r}", tok.line, tok.column)
    return atoms
