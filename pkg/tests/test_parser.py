from __future__ import annotations

import pytest

from voiplan import ProgramError, parse_atom, parse_theory
from voiplan.parser import parse_atom_list


def test_fig1_fragment_splits_disjunction():
    theory = parse_theory(
        "heat_on :- room(1,lo); room(2,lo); room(3,lo).\n"
        "0.5::room(1,lo).\n"
        "room(1,hi) :- not room(1,lo).\n"
    )
    assert len(theory.prob_clauses) == 1
    assert theory.prob_clauses[0].prob == 0.5
    assert str(theory.prob_clauses[0].head) == "room(1,lo)"
    assert len(theory.bk_clauses) == 4  # three heat_on disjuncts plus the hi rule
    heat_heads = [c for c in theory.bk_clauses if c.head.pred == "heat_on"]
    assert len(heat_heads) == 3
    assert all(len(c.body) == 1 for c in heat_heads)


def test_empty_program():
    theory = parse_theory("")
    assert theory.prob_clauses == ()
    assert theory.bk_clauses == ()
    assert theory.observables == ()
    assert theory.evidence == ()


def test_probability_out_of_range():
    with pytest.raises(ProgramError, match=r"outside \[0,1\]"):
        parse_theory("1.5::f.")


def test_nonpositive_cost():
    with pytest.raises(ProgramError, match="positive"):
        parse_theory("observable(f, 0).\nf.\n")


def test_nonground_evidence():
    with pytest.raises(ProgramError, match="ground"):
        parse_theory("evidence(f(X), true).\n")


def test_syntax_error_carries_position():
    with pytest.raises(ProgramError) as err:
        parse_theory("f :- g\nh.\n")
    assert err.value.line == 2


def test_comments_ignored():
    theory = parse_theory("% a comment\nf. % trailing\n")
    assert len(theory.bk_clauses) == 1


def test_negation_with_and_without_parens():
    a = parse_theory("p :- not q.\nq.\n")
    b = parse_theory("p :- not(q).\nq.\n")
    assert a.bk_clauses[0] == b.bk_clauses[0]


def test_builtin_literals():
    theory = parse_theory("e :- findall(X, t(X,1), E), length(E, N), N > 2.\n")
    body = theory.bk_clauses[0].body
    kinds = [type(lit).__name__ for lit in body]
    assert kinds == ["Findall", "Length", "Comparison"]


def test_parse_atom_list_handles_nested_commas():
    atoms = parse_atom_list("room(1,_),room(3,_)")
    assert [str(a) for a in atoms] == ["room(1,_)", "room(3,_)"]
    assert parse_atom_list("") == []


def test_parse_atom_rejects_trailing():
    with pytest.raises(ProgramError):
        parse_atom("f g")


def test_integer_probability_allowed():
    theory = parse_theory("1::f.\n0::g.\n")
    assert [pc.prob for pc in theory.prob_clauses] == [1.0, 0.0]


def test_evidence_and_observable_parsed(fig1_theory):
    assert len(fig1_theory.observables) == 3
    assert fig1_theory.observables[0].cost == 1.0
    assert str(fig1_theory.observables[0].template) == "room(1,_)"
