from __future__ import annotations

import math

import numpy as np
import pytest

from voiplan import (
    InconsistentScenarioError,
    InferenceEngine,
    Scenario,
    entropy,
    ground,
    joint_distribution,
    least_model,
    parse_atom,
    parse_theory,
    success_probability,
    world_probability,
    worlds,
)
from voiplan.model import EvidenceFact
from voiplan.worlds import World

from oracles import entropy_of

# Frozen from tests/oracles.py (hand-rolled models, plain-Python enumeration).
CHAIN_P_HEAT = 0.7549999999999999
CHAIN_H_HEAT = 0.8032566997760644
CHAIN_COND_H = {"12": 0.30845181473074224, "13": 0.18056395171386597, "23": 0.30845181473074224}
INFECT_P = 0.09390160000000247
INFECT_H = 0.4493604832911884


def test_world_probability_all_false(fig1_theory):
    gp = ground(fig1_theory, {parse_atom("heat_on")})
    first = next(worlds(gp))  # bitmask 0: every fact excluded
    assert first.probability == pytest.approx(0.02205, abs=1e-15)
    assert world_probability(first) == first.probability


def test_world_probability_trivial_cases():
    gp = ground(parse_theory("0.5::f.\n"), {parse_atom("f")})
    ws = list(worlds(gp))
    assert [w.probability for w in ws] == [0.5, 0.5]
    empty = ground(parse_theory("g.\n"), {parse_atom("g")})
    (only,) = worlds(empty)
    assert only.probability == 1.0


def test_world_probabilities_sum_to_one(fig1_theory):
    gp = ground(fig1_theory, {parse_atom("heat_on")})
    assert math.fsum(w.probability for w in worlds(gp)) == pytest.approx(1.0, abs=1e-9)


def test_least_model_heat_on(fig1_theory):
    gp = ground(fig1_theory, {parse_atom("heat_on")})
    for w in worlds(gp):
        model = least_model(w, gp)
        room1_lo = parse_atom("room(1,lo)") in model
        assert room1_lo == (parse_atom("room(1,lo)") in w.true_facts)
        assert (parse_atom("room(1,hi)") in model) == (not room1_lo)
        if room1_lo:
            assert parse_atom("heat_on") in model


def test_least_model_epidemic(fig2_theory):
    goals = {parse_atom("epidemic")} | {parse_atom(f"diagnosis({i})") for i in range(1, 5)}
    gp = ground(fig2_theory, goals)
    facts = tuple((gp.atoms[i], p) for i, p in gp.facts)
    # all priors on, everything else off: all four infected, epidemic holds
    included = tuple(a.pred == "tb_prior" for a, _ in facts)
    model = least_model(World(facts, included), gp)
    assert parse_atom("epidemic") in model
    assert all(parse_atom(f"tb({i},1)") in model for i in range(1, 5))
    # nothing on: everyone healthy, no epidemic
    model0 = least_model(World(facts, tuple(False for _ in facts)), gp)
    assert parse_atom("epidemic") not in model0
    assert all(parse_atom(f"tb({i},0)") in model0 for i in range(1, 5))


def test_success_probability_heat_on(fig1_scenario, fig1_engine):
    p = success_probability(parse_atom("heat_on"), fig1_scenario, fig1_engine)
    assert p == pytest.approx(CHAIN_P_HEAT, abs=1e-9)


def test_success_probability_bare_fact(fig1_scenario, fig1_engine):
    p = success_probability(parse_atom("room(1,lo)"), fig1_scenario, fig1_engine)
    assert p == pytest.approx(0.5, abs=1e-12)


def test_success_probability_epidemic(fig2_scenario, fig2_engine):
    p = success_probability(parse_atom("epidemic"), fig2_scenario, fig2_engine)
    assert p == pytest.approx(INFECT_P, abs=1e-9)
    assert entropy({True: p, False: 1 - p}.items()) == pytest.approx(INFECT_H, abs=1e-9)


def test_joint_over_single_room(fig1_scenario, fig1_engine):
    dist = fig1_engine.joint(fig1_scenario, (parse_atom("room(1,_)"),))
    assert dist[(parse_atom("room(1,lo)"),)] == pytest.approx(0.5, abs=1e-12)
    assert dist[(parse_atom("room(1,hi)"),)] == pytest.approx(0.5, abs=1e-12)


def test_joint_eight_outcomes(fig1_scenario, fig1_engine):
    dist = joint_distribution(
        [parse_atom("room(1,_)"), parse_atom("room(3,_)")],
        fig1_scenario,
        parse_atom("heat_on"),
        fig1_engine,
    )
    assert len(dist) == 8
    assert math.fsum(p for _, p in dist.items()) == pytest.approx(1.0, abs=1e-9)


def test_joint_matches_oracle(fig1_scenario, fig1_engine, oracle_chain):
    dist = joint_distribution(
        [parse_atom("room(1,_)"), parse_atom("room(2,_)"), parse_atom("room(3,_)")],
        fig1_scenario,
        parse_atom("heat_on"),
        fig1_engine,
    )
    for (t1, t2, t3, heat), p in oracle_chain.items():
        key = (
            parse_atom(f"room(1,{t1})"),
            parse_atom(f"room(2,{t2})"),
            parse_atom(f"room(3,{t3})"),
            heat,
        )
        assert dist[key] == pytest.approx(p, abs=1e-12)


def test_entropy_basics():
    assert entropy({"a": 1.0}.items()) == 0.0
    assert entropy({"a": 0.5, "b": 0.5}.items()) == pytest.approx(1.0)
    assert entropy({True: CHAIN_P_HEAT, False: 1 - CHAIN_P_HEAT}.items()) == pytest.approx(
        CHAIN_H_HEAT, abs=1e-12
    )


def test_success_probability_equals_joint_true(fig2_scenario, fig2_engine):
    q = parse_atom("epidemic")
    p = success_probability(q, fig2_scenario, fig2_engine)
    dist = joint_distribution([], fig2_scenario, q, fig2_engine)
    assert p == dist[(True,)]


def test_conditional_entropy_chain_rule(fig1_scenario, fig1_engine, oracle_chain):
    q = parse_atom("heat_on")
    for pair, key in ((("1", "2"), "12"), (("1", "3"), "13"), (("2", "3"), "23")):
        ts = [parse_atom(f"room({i},_)") for i in pair]
        joint_all = joint_distribution(ts, fig1_scenario, q, fig1_engine)
        joint_obs = joint_distribution(ts, fig1_scenario, None, fig1_engine)
        by_difference = joint_all.entropy() - joint_obs.entropy()
        # weighted per-outcome entropies must agree with the difference form
        by_expectation = 0.0
        for outcome, p_o in joint_obs.items():
            p_true = joint_all[outcome + (True,)] / p_o
            by_expectation += p_o * entropy_of((p_true, 1 - p_true))
        assert by_expectation == pytest.approx(by_difference, abs=1e-9)
        assert by_difference == pytest.approx(CHAIN_COND_H[key], abs=1e-9)


def test_evidence_conditions_distribution(fig1_theory):
    conditioned = fig1_theory.with_evidence([EvidenceFact(parse_atom("room(1,lo)"), True)])
    engine = InferenceEngine(conditioned)
    p = success_probability(parse_atom("heat_on"), Scenario(conditioned), engine)
    assert p == pytest.approx(1.0, abs=1e-12)
    p2 = success_probability(parse_atom("room(2,lo)"), Scenario(conditioned), engine)
    assert p2 == pytest.approx(0.7, abs=1e-12)


def test_entailed_evidence_is_a_noop(fig2_theory, fig2_engine, fig2_scenario):
    entailed = fig2_theory.with_evidence([EvidenceFact(parse_atom("person(1)"), True)])
    engine = InferenceEngine(entailed)
    q = parse_atom("epidemic")
    before = success_probability(q, fig2_scenario, fig2_engine)
    after = success_probability(q, Scenario(entailed), engine)
    assert after == pytest.approx(before, abs=1e-9)


def test_impossible_evidence_raises(fig1_theory):
    impossible = fig1_theory.with_evidence(
        [
            EvidenceFact(parse_atom("room(1,lo)"), True),
            EvidenceFact(parse_atom("room(1,hi)"), True),
        ]
    )
    engine = InferenceEngine(impossible)
    with pytest.raises(InconsistentScenarioError):
        success_probability(parse_atom("heat_on"), Scenario(impossible), engine)


def test_absent_query_has_probability_zero(fig1_scenario, fig1_engine):
    assert success_probability(parse_atom("no_such_atom"), fig1_scenario, fig1_engine) == 0.0


def test_fact_count_guard():
    from voiplan import ResourceLimitError

    lines = [f"0.5::f({i})." for i in range(30)]
    lines.append("any :- f(0).")
    lines.extend(f"any :- f({i})." for i in range(1, 30))
    theory = parse_theory("\n".join(lines) + "\n")
    engine = InferenceEngine(theory, max_fact_count=24)
    with pytest.raises(ResourceLimitError, match="enumeration limit"):
        engine.posterior(Scenario(theory), parse_atom("any"))


def test_million_world_sweep_is_fast():
    import time

    lines = [f"0.5::f({i})." for i in range(20)]
    clause = " , ".join(f"f({i})" for i in range(20))
    lines.append(f"all_on :- {clause}.")
    theory = parse_theory("\n".join(lines) + "\n")
    engine = InferenceEngine(theory)
    started = time.monotonic()
    p = engine.posterior(Scenario(theory), parse_atom("all_on"))
    elapsed = time.monotonic() - started
    assert p == pytest.approx(0.5**20, rel=1e-9)
    assert elapsed < 10.0


def test_worker_count_is_bit_for_bit_irrelevant(fig2_theory):
    q = parse_atom("epidemic")
    templates = frozenset({q})
    serial = InferenceEngine(fig2_theory, workers=1, chunk_bits=12)
    threaded = InferenceEngine(fig2_theory, workers=4, chunk_bits=12)
    t1 = serial.table(templates)
    t2 = threaded.table(templates)
    assert np.array_equal(t1.mass, t2.mass)
    assert t1.all_world_mass == t2.all_world_mass


def test_model_monotone_in_facts_without_negation():
    theory = parse_theory(
        "0.5::a.\n0.5::b.\n0.5::c.\np :- a, b.\nq :- p.\nq :- c.\nr :- q, a.\n"
    )
    gp = ground(theory, {parse_atom("q"), parse_atom("r")})
    all_worlds = list(worlds(gp))
    n = len(gp.facts)
    for w in all_worlds:
        base = least_model(w, gp)
        for i in range(n):
            if w.included[i]:
                continue
            grown = all_worlds[
                sum((1 << j) * int(inc or j == i) for j, inc in enumerate(w.included))
            ]
            assert base <= least_model(grown, gp)
