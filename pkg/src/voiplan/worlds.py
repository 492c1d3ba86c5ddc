"""Exact inference by world enumeration.

A world is one truth assignment to the relevant ground probabilistic
facts; its probability is the product of ``p`` over included facts and
``1-p`` over excluded ones.  Worlds are enumerated by integer bitmask
(bit i of the world index is fact i), split into fixed-size chunks.  Each
chunk is evaluated with vectorized boolean operations: ground rules are
applied stratum by stratum over column vectors holding one truth value per
world in the chunk.  Chunk results are reduced in chunk order with
compensated summation (``math.fsum``), so results are bit-identical
regardless of how many workers process the chunks.

One sweep produces a joint table over (observable realizations, query,
...); every posterior, entropy and VoI quantity for any scenario over
those observables is then read from the table by conditioning and
marginalizing, without touching the worlds again.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from .ground import FullGround, GroundProgram, GroundRule
from .model import (
    Atom,
    EvidenceFact,
    InconsistentScenarioError,
    ProgramError,
    ResourceLimitError,
    Theory,
    atom_is_ground,
)

# Sentinel realization values for worlds whose model carries no instance of
# a template, or more than one.  Valid observables never produce them with
# positive probability.
NO_INSTANCE = "<none>"
MULTIPLE_INSTANCES = "<multiple>"

PROB_SUM_TOL = 1e-9


def entropy(dist: Mapping | "Distribution") -> float:
    """Base-2 entropy with 0*log(0) taken as 0."""
    items = dist.items() if hasattr(dist, "items") else dist
    h = 0.0
    for _, p in items:
        if p > 0.0:
            h -= p * math.log2(p)
    return h


class Distribution:
    """Finite outcome-to-probability map summing to one."""

    def __init__(self, outcomes: Mapping):
        self._probs = dict(outcomes)
        total = math.fsum(self._probs.values())
        if any(p < -1e-15 for p in self._probs.values()):
            raise ValueError("negative probability in distribution")
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"distribution mass {total} is not 1")

    def __getitem__(self, outcome) -> float:
        return self._probs.get(outcome, 0.0)

    def __contains__(self, outcome) -> bool:
        return outcome in self._probs

    def __len__(self) -> int:
        return len(self._probs)

    def __iter__(self):
        return iter(self._probs)

    def items(self):
        return self._probs.items()

    def entropy(self) -> float:
        return entropy(self._probs)

    def __repr__(self) -> str:
        parts = ", ".join(f"{k}: {p:.6f}" for k, p in self._probs.items())
        return f"Distribution({parts})"


# ---------------------------------------------------------------------------
# Worlds and least models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class World:
    """Truth assignment over the ground probabilistic facts of a program."""

    facts: tuple[tuple[Atom, float], ...]
    included: tuple[bool, ...]

    @property
    def true_facts(self) -> tuple[Atom, ...]:
        return tuple(a for (a, _), on in zip(self.facts, self.included) if on)

    @property
    def probability(self) -> float:
        return world_probability(self)


def world_probability(w: World) -> float:
    p = 1.0
    for (_, prob), on in zip(w.facts, w.included):
        p *= prob if on else 1.0 - prob
    return p


def worlds(gp: GroundProgram) -> Iterator[World]:
    """All worlds of a ground program, in bitmask order (small programs only)."""
    facts = tuple((gp.atoms[i], p) for i, p in gp.facts)
    n = len(facts)
    for mask in range(1 << n):
        yield World(facts, tuple(bool(mask >> i & 1) for i in range(n)))


def _eval_columns(gp: GroundProgram, bits: np.ndarray) -> np.ndarray:
    """Truth columns for every atom over a batch of worlds.

    ``bits`` has one row per world and one column per probabilistic fact.
    Returns a boolean matrix of shape (len(gp.atoms), n_worlds).
    """
    if gp.violations:
        raise ProgramError(f"program is not stratified: {gp.violations[0]}")
    m = bits.shape[0]
    cols = np.zeros((len(gp.atoms), m), dtype=bool)
    for j, (aid, _) in enumerate(gp.facts):
        cols[aid] |= bits[:, j]

    rules_by_head: dict[int, list[GroundRule]] = {}
    for r in gp.rules:
        rules_by_head.setdefault(r.head, []).append(r)

    def apply(rule: GroundRule) -> np.ndarray:
        v = np.ones(m, dtype=bool)
        for p in rule.pos:
            v &= cols[p]
        for n in rule.neg:
            v &= ~cols[n]
        for cond in rule.counts:
            cnt = np.zeros(m, dtype=np.int16)
            for c in cond.candidates:
                cnt += cols[c]
            if cond.op == ">":
                v &= cnt > cond.value
            elif cond.op == "<":
                v &= cnt < cond.value
            elif cond.op == ">=":
                v &= cnt >= cond.value
            else:
                v &= cnt <= cond.value
        return v

    for scc in gp.strata:
        members = set(scc)
        scc_rules = [r for a in scc for r in rules_by_head.get(a, ())]
        recursive = any(p in members for r in scc_rules for p in r.pos)
        if not recursive:
            for r in scc_rules:
                cols[r.head] |= apply(r)
            continue
        while True:
            changed = False
            for r in scc_rules:
                v = apply(r)
                new = v & ~cols[r.head]
                if new.any():
                    cols[r.head] |= new
                    changed = True
            if not changed:
                break
    return cols


def least_model(w: World, gp: GroundProgram) -> frozenset[Atom]:
    """Atoms true in the unique stratified model of one world."""
    fact_ids = [aid for aid, _ in gp.facts]
    order = {aid: j for j, aid in enumerate(fact_ids)}
    bits = np.zeros((1, len(fact_ids)), dtype=bool)
    for (atom, _), on in zip(w.facts, w.included):
        aid = gp.atom_index.get(atom)
        if aid is not None and aid in order and on:
            bits[0, order[aid]] = True
    cols = _eval_columns(gp, bits)
    return frozenset(
        a for i, a in enumerate(gp.atoms) if cols[i, 0] and not a.pred.startswith("$")
    )


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Realization:
    """A measured outcome: a truth value for a ground observable, or the
    ground instance seen for a non-ground template."""

    template: Atom
    atom: Atom
    value: bool = True

    @property
    def label(self) -> str:
        if atom_is_ground(self.template):
            return "true" if self.value else "false"
        return str(self.atom)

    def evidence(self) -> EvidenceFact:
        return EvidenceFact(self.atom, self.value)

    def __str__(self) -> str:
        return f"{self.template}={self.label}"


@dataclass(frozen=True)
class Scenario:
    """Base theory plus the realizations accumulated by observations."""

    theory: Theory
    observations: tuple[Realization, ...] = ()

    def observe(self, r: Realization) -> "Scenario":
        return Scenario(self.theory, self.observations + (r,))

    @property
    def observed_templates(self) -> frozenset[Atom]:
        return frozenset(r.template for r in self.observations)


# ---------------------------------------------------------------------------
# Joint tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DimSpec:
    """One axis of a joint table: an observable template or a ground atom."""

    template: Atom
    is_ground: bool
    instance_ids: tuple[Optional[int], ...]
    values: tuple[object, ...]  # per-coordinate outcome values

    @property
    def size(self) -> int:
        return len(self.values)


@dataclass
class RawTable:
    """Unnormalized joint mass over dim coordinates, conditioned only on the
    base theory's evidence facts."""

    dims: tuple[DimSpec, ...]
    mass: np.ndarray  # shape = per-dim sizes
    all_world_mass: float

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def dim_position(self, template: Atom) -> int:
        for i, d in enumerate(self.dims):
            if d.template == template:
                return i
        raise KeyError(f"no table dimension for {template}")

    def condition(self, realizations: Iterable[Realization]) -> "RawTable":
        mass = self.mass
        for r in realizations:
            pos = self.dim_position(r.template)
            dim = self.dims[pos]
            keep = np.zeros(dim.size, dtype=bool)
            if dim.is_ground:
                for i, v in enumerate(dim.values):
                    if v is r.value or v == r.value:
                        keep[i] = True
            else:
                for i, v in enumerate(dim.values):
                    if r.value:
                        keep[i] = v == r.atom
                    else:
                        keep[i] = not (v == r.atom)
            shape = [1] * mass.ndim
            shape[pos] = dim.size
            mass = mass * keep.reshape(shape)
        return RawTable(self.dims, mass, self.all_world_mass)

    def marginal(self, templates: Sequence[Atom]) -> tuple[list[DimSpec], np.ndarray]:
        positions = [self.dim_position(t) for t in templates]
        other = [i for i in range(len(self.dims)) if i not in positions]
        reduced = self.mass.sum(axis=tuple(other)) if other else self.mass
        reduced = np.moveaxis(
            reduced, [sorted(positions).index(p) for p in positions], range(len(positions))
        )
        return [self.dims[p] for p in positions], reduced


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


class InferenceEngine:
    """Grounds a theory once and answers joint-distribution queries.

    Tables are cached by their dimension set; a request is served from any
    cached superset table by marginalization, so a planner issuing many VoI
    queries per scenario triggers a single world sweep.
    """

    def __init__(
        self,
        theory: Theory,
        *,
        max_rules: int = 1_000_000,
        max_fact_count: int = 24,
        chunk_bits: int = 16,
        workers: int = 1,
    ):
        self.theory = theory
        self.max_rules = max_rules
        self.max_fact_count = max_fact_count
        self.chunk_bits = chunk_bits
        self.workers = workers
        self._lock = threading.RLock()
        self._full: FullGround | None = None
        self._ground_cache: dict[frozenset[Atom], GroundProgram] = {}
        self._table_cache: dict[frozenset[Atom], RawTable] = {}

    # -- grounding --------------------------------------------------------

    @property
    def full(self) -> FullGround:
        with self._lock:
            if self._full is None:
                self._full = FullGround(self.theory, max_rules=self.max_rules)
            return self._full

    @property
    def declared_templates(self) -> tuple[Atom, ...]:
        return tuple(d.template for d in self.theory.observables)

    def instances_of(self, template: Atom) -> list[Atom]:
        return self.full.instances_of(template)

    def ground_for(self, goals: frozenset[Atom]) -> GroundProgram:
        with self._lock:
            gp = self._ground_cache.get(goals)
            if gp is None:
                gp = self.full.restrict(goals)
                self._ground_cache[goals] = gp
            return gp

    # -- sweeping ----------------------------------------------------------

    def _dim_spec(self, template: Atom, gp: GroundProgram) -> DimSpec:
        if atom_is_ground(template):
            return DimSpec(
                template=template,
                is_ground=True,
                instance_ids=(gp.id_of(template),),
                values=(False, True),
            )
        instances = self.full.instances_of(template)
        ids = tuple(gp.id_of(a) for a in instances)
        values: tuple[object, ...] = tuple(instances) + (NO_INSTANCE, MULTIPLE_INSTANCES)
        return DimSpec(template=template, is_ground=False, instance_ids=ids, values=values)

    def table(self, templates: frozenset[Atom]) -> RawTable:
        with self._lock:
            hit = self._table_cache.get(templates)
            if hit is not None:
                return hit
            for key, cached in self._table_cache.items():
                if templates <= key:
                    return cached
            full_dims = frozenset(templates) | frozenset(self.declared_templates)
            table = self._sweep(full_dims)
            self._table_cache[full_dims] = table
            return table

    def _sweep(self, templates: frozenset[Atom]) -> RawTable:
        ordered = sorted(templates, key=str)
        goals: set[Atom] = set()
        for t in ordered:
            if atom_is_ground(t):
                goals.add(t)
            else:
                goals.update(self.full.instances_of(t))
        for ev in self.theory.evidence:
            goals.add(ev.atom)
        gp = self.ground_for(frozenset(goals))
        if len(gp.facts) > self.max_fact_count:
            raise ResourceLimitError(
                f"{len(gp.facts)} probabilistic facts exceed the "
                f"2^{self.max_fact_count} world enumeration limit"
            )
        dims = tuple(self._dim_spec(t, gp) for t in ordered)
        sizes = [d.size for d in dims]
        n_outcomes = int(np.prod(sizes, dtype=np.int64)) if sizes else 1
        if n_outcomes > 4_000_000:
            raise ResourceLimitError(f"joint table with {n_outcomes} cells is too large")

        evidence_ids = [(gp.id_of(ev.atom), ev.value) for ev in self.theory.evidence]
        n_facts = len(gp.facts)
        probs = np.array([p for _, p in gp.facts], dtype=np.float64)
        total_worlds = 1 << n_facts
        chunk = min(total_worlds, 1 << self.chunk_bits)
        n_chunks = (total_worlds + chunk - 1) // chunk

        def run_chunk(k: int) -> tuple[np.ndarray, float]:
            start = k * chunk
            end = min(total_worlds, start + chunk)
            idx = np.arange(start, end, dtype=np.int64)
            bits = ((idx[:, None] >> np.arange(n_facts, dtype=np.int64)[None, :]) & 1).astype(bool)
            w = np.ones(end - start, dtype=np.float64)
            for j in range(n_facts):
                w *= np.where(bits[:, j], probs[j], 1.0 - probs[j])
            raw_total = float(w.sum())
            cols = _eval_columns(gp, bits)
            mask = np.ones(end - start, dtype=bool)
            for aid, val in evidence_ids:
                if aid is None:
                    if val:
                        mask[:] = False
                else:
                    mask &= cols[aid] if val else ~cols[aid]
            code = np.zeros(end - start, dtype=np.int64)
            for d in dims:
                code *= d.size
                code += self._dim_codes(d, cols)
            binned = np.bincount(code[mask], weights=w[mask], minlength=n_outcomes)
            return binned, raw_total

        if self.workers > 1 and n_chunks > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(run_chunk, range(n_chunks)))
        else:
            results = [run_chunk(k) for k in range(n_chunks)]

        # Deterministic reduction: chunk boundaries are fixed by chunk_bits,
        # so any worker count yields bit-identical sums.
        per_outcome = np.array(
            [math.fsum(r[0][i] for r in results) for i in range(n_outcomes)],
            dtype=np.float64,
        )
        all_mass = math.fsum(r[1] for r in results)
        if abs(all_mass - 1.0) > PROB_SUM_TOL:
            raise AssertionError(f"world probabilities sum to {all_mass}, not 1")
        return RawTable(dims=dims, mass=per_outcome.reshape(sizes or (1,)), all_world_mass=all_mass)

    @staticmethod
    def _dim_codes(d: DimSpec, cols: np.ndarray) -> np.ndarray:
        m = cols.shape[1]
        if d.is_ground:
            aid = d.instance_ids[0]
            if aid is None:
                return np.zeros(m, dtype=np.int64)
            return cols[aid].astype(np.int64)
        k = len(d.instance_ids)
        if k == 0:
            return np.zeros(m, dtype=np.int64)  # single NO_INSTANCE coordinate
        cnt = np.zeros(m, dtype=np.int16)
        pick = np.zeros(m, dtype=np.int64)
        for j, aid in enumerate(d.instance_ids):
            if aid is None:
                continue
            col = cols[aid]
            cnt += col
            pick = np.where(col, j, pick)
        code = np.where(cnt == 0, k, np.where(cnt > 1, k + 1, pick))
        return code.astype(np.int64)

    # -- scenario queries ----------------------------------------------------

    def joint(
        self,
        scenario: Scenario,
        templates: Sequence[Atom],
        query: Optional[Atom] = None,
    ) -> Distribution:
        """Normalized joint over template realizations and the query truth.

        The outcome space is the product of each dimension's support, so
        combinations that happen to carry zero mass are still listed; values
        a dimension never takes (including the no/multiple-instance
        sentinels of valid observables) are dropped.
        """
        dims, reduced = self.masses(scenario, templates, query)
        total = float(reduced.sum())
        outcomes: dict = {}
        if not dims:
            return Distribution({(): 1.0})
        supports = []
        for axis, d in enumerate(dims):
            other = tuple(i for i in range(len(dims)) if i != axis)
            marginal = reduced.sum(axis=other) if other else reduced
            supports.append([c for c in range(d.size) if float(marginal[c]) > 0.0])
        for key in np.ndindex(*[len(s) for s in supports]):
            coords = tuple(s[c] for s, c in zip(supports, key))
            outcome = tuple(d.values[c] for d, c in zip(dims, coords))
            outcomes[outcome] = float(reduced[coords]) / total
        return Distribution(outcomes)

    def masses(
        self,
        scenario: Scenario,
        templates: Sequence[Atom],
        query: Optional[Atom] = None,
    ) -> tuple[list[DimSpec], np.ndarray]:
        """Conditioned but unnormalized joint masses; raises when the
        scenario's evidence has probability zero."""
        if scenario.theory != self.theory:
            raise ValueError("scenario belongs to a different theory")
        request = list(templates) + ([query] if query is not None else [])
        if len(set(request)) != len(request):
            raise ValueError(f"duplicate templates in request: {request}")
        needed = frozenset(request) | scenario.observed_templates
        raw = self.table(needed)
        conditioned = raw.condition(scenario.observations)
        if conditioned.total <= 0.0:
            raise InconsistentScenarioError(
                "scenario evidence has probability zero under the theory"
            )
        return conditioned.marginal(request)

    def posterior(self, scenario: Scenario, query: Atom) -> float:
        dims, reduced = self.masses(scenario, (), query)
        total = float(reduced.sum())
        return float(reduced[1]) / total


_ENGINES: dict[Theory, InferenceEngine] = {}
_ENGINES_LOCK = threading.Lock()


def engine_for(theory: Theory) -> InferenceEngine:
    """Shared per-theory engine so scenario operations reuse joint tables."""
    with _ENGINES_LOCK:
        eng = _ENGINES.get(theory)
        if eng is None:
            eng = InferenceEngine(theory)
            _ENGINES[theory] = eng
        return eng


def success_probability(
    query: Atom, scenario: Scenario, engine: Optional[InferenceEngine] = None
) -> float:
    """Probability that the query holds, conditioned on all evidence."""
    if not atom_is_ground(query):
        raise ProgramError(f"query must be ground: {query}")
    eng = engine or engine_for(scenario.theory)
    return eng.posterior(scenario, query)


def joint_distribution(
    templates: Sequence[Atom],
    scenario: Scenario,
    query: Optional[Atom] = None,
    engine: Optional[InferenceEngine] = None,
) -> Distribution:
    eng = engine or engine_for(scenario.theory)
    return eng.joint(scenario, templates, query)
