"""Randomized cross-checks against an independent interpreter.

Programs are layered boolean networks over zero-arity atoms: probabilistic
facts first, then derived atoms defined over strictly earlier atoms (so
stratification holds by construction).  The oracle evaluates worlds by
direct substitution, with no code shared with the engine's grounder or
evaluator.
"""

from __future__ import annotations

import random
from itertools import product

import pytest

from voiplan import (
    InferenceEngine,
    Scenario,
    UtilitySpec,
    greedy_plan,
    optimal_plan,
    parse_atom,
    parse_theory,
    success_probability,
    tree_voi,
    validate_theory,
)

ENTROPY = UtilitySpec.entropy()
N_PROGRAMS = 50


def make_program(rng: random.Random):
    n_facts = rng.randint(2, 5)
    facts = [(f"f{i}", round(rng.uniform(0.1, 0.9), 3)) for i in range(n_facts)]
    lines = [f"{p}::{name}." for name, p in facts]
    available = [name for name, _ in facts]
    derived: dict[str, list[list[tuple[str, bool]]]] = {}
    for i in range(rng.randint(2, 5)):
        name = f"d{i}"
        clauses = []
        for _ in range(rng.randint(1, 2)):
            body = []
            for atom in rng.sample(available, rng.randint(1, min(3, len(available)))):
                body.append((atom, rng.random() < 0.3))
            clauses.append(body)
            text = ", ".join(f"not({a})" if neg else a for a, neg in body)
            lines.append(f"{name} :- {text}.")
        derived[name] = clauses
        available.append(name)
    query = available[-1]
    observables = rng.sample(available, rng.randint(1, min(4, len(available))))
    costs = {}
    for obs in observables:
        costs[obs] = rng.choice((1.0, 1.5, 2.0))
        lines.append(f"observable({obs}, {costs[obs]}).")

    def model_of(bits: dict[str, bool]) -> dict[str, bool]:
        env = dict(bits)
        for name, clauses in derived.items():
            env[name] = any(
                all((not env[a]) if neg else env[a] for a, neg in body) for body in clauses
            )
        return env

    def oracle_probability(atom: str) -> float:
        total = 0.0
        for assignment in product((False, True), repeat=len(facts)):
            w = 1.0
            bits = {}
            for (name, p), on in zip(facts, assignment):
                bits[name] = on
                w *= p if on else 1 - p
            if model_of(bits)[atom]:
                total += w
        return total

    return "\n".join(lines) + "\n", query, min(costs.values()), oracle_probability


@pytest.mark.parametrize("seed", range(N_PROGRAMS))
def test_random_program_oracle_equivalence(seed):
    rng = random.Random(20250811 + seed)
    text, query_name, min_cost, oracle_probability = make_program(rng)
    theory = parse_theory(text)
    assert validate_theory(theory) == []
    engine = InferenceEngine(theory)
    scenario = Scenario(theory)
    query = parse_atom(query_name)

    table = engine.table(frozenset({query}))
    assert table.all_world_mass == pytest.approx(1.0, abs=1e-9)

    engine_p = success_probability(query, scenario, engine)
    assert engine_p == pytest.approx(oracle_probability(query_name), abs=1e-9)

    greedy = greedy_plan(scenario, query, min_cost, ENTROPY, engine)
    optimal = optimal_plan(scenario, query, min_cost, ENTROPY, engine)
    assert greedy.root.choice == optimal.root.choice
    assert tree_voi(greedy) == pytest.approx(tree_voi(optimal), abs=1e-9)


def test_random_observable_posteriors_match_oracle():
    rng = random.Random(7)
    for _ in range(10):
        text, query_name, _, oracle_probability = make_program(rng)
        theory = parse_theory(text)
        engine = InferenceEngine(theory)
        scenario = Scenario(theory)
        for decl in theory.observables:
            dist = engine.joint(scenario, (decl.template,))
            assert dist[(True,)] == pytest.approx(
                oracle_probability(str(decl.template)), abs=1e-9
            )
