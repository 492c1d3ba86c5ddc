from __future__ import annotations

import pytest

from voiplan import ResourceLimitError, ground, parse_atom, parse_theory
from voiplan.ground import FullGround


def test_fig2_relevant_facts(fig2_theory):
    goals = {parse_atom("epidemic")}
    goals.update(parse_atom(f"diagnosis({i})") for i in range(1, 5))
    gp = ground(fig2_theory, goals)
    facts = [str(a) for a in gp.fact_atoms]
    assert len(facts) == 18
    assert sum(a.startswith("tb_prior") for a in facts) == 4
    assert sum(a.startswith("tr") for a in facts) == 6
    assert sum(a.startswith("x_ray") for a in facts) == 8
    assert gp.world_count == 2**18


def test_fig2_full_grounding_has_more_tr_facts(fig2_theory):
    full = FullGround(fig2_theory).full_program()
    # all 16 person pairs ground the transmission clause; relevance keeps 6
    assert sum(str(a).startswith("tr") for a in full.fact_atoms) == 16


def test_fig1_switch_facts(fig1_theory):
    gp = ground(fig1_theory, {parse_atom("heat_on")})
    assert len(gp.facts) == 5
    probs = sorted(p for _, p in gp.facts)
    assert probs == [0.3, 0.3, 0.5, 0.7, 0.7]


def test_deterministic_theory_has_one_world():
    theory = parse_theory("f :- g.\ng.\n")
    gp = ground(theory, {parse_atom("f")})
    assert len(gp.facts) == 0
    assert gp.world_count == 1


def test_goal_outside_program_is_unknown():
    theory = parse_theory("0.5::f.\n")
    gp = ground(theory, {parse_atom("missing")})
    assert gp.id_of(parse_atom("missing")) is None


def test_grounding_limit():
    domain = "\n".join(f"num({i})." for i in range(40))
    theory = parse_theory(f"pair(X,Y) :- num(X), num(Y).\n{domain}\n")
    with pytest.raises(ResourceLimitError):
        ground(theory, {parse_atom("pair(1,1)")}, max_rules=100)


def test_relevance_drops_unreachable_branch():
    theory = parse_theory(
        "0.5::a.\n0.5::b.\nleft :- a.\nright :- b.\n"
    )
    gp = ground(theory, {parse_atom("left")})
    assert [str(x) for x in gp.fact_atoms] == ["a"]


def test_strata_order_negation_last(fig1_theory):
    gp = ground(fig1_theory, {parse_atom("heat_on")})
    pos = {a: i for i, scc in enumerate(gp.strata) for a in scc}
    lo = gp.id_of(parse_atom("room(1,lo)"))
    hi = gp.id_of(parse_atom("room(1,hi)"))
    assert pos[lo] < pos[hi]
