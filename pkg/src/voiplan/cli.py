"""Command-line front end.

Commands: ``infer``, ``voi``, ``plan``, ``eval-plan``, ``walk``, ``serve``.
Output is deterministic for identical inputs; the trailing ``time_ms`` line
is suppressed by ``--no-timing``.  Exit codes: 0 ok, 2 input error,
3 inconsistent scenario, 4 resource limit.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from itertools import combinations
from pathlib import Path

from .model import (
    EvidenceFact,
    InconsistentScenarioError,
    ProgramError,
    ResourceLimitError,
    Theory,
    format_number,
)
from .parser import parse_atom, parse_atom_list, parse_theory
from .plan import anytime_plan, greedy_plan, plan_from_json, plan_to_json, tree_voi
from .validate import validate_theory
from .voi import ActionTable, UtilitySpec, plan_voi_by_reality, voi_set
from .worlds import InferenceEngine, Scenario, entropy, success_probability


def _binary_entropy(p: float) -> float:
    return entropy({True: p, False: 1.0 - p}.items())


def _add_shared(cmd: argparse.ArgumentParser, *, program=True, query=False) -> None:
    if program:
        cmd.add_argument("--program", required=True, help="program file")
    if query:
        cmd.add_argument("--query", required=True, help="ground query atom")
    cmd.add_argument(
        "--evidence",
        action="append",
        default=[],
        metavar="ATOM=BOOL",
        help="extra evidence, repeatable",
    )
    cmd.add_argument("--max-ground", default="10^6", help="grounding limit (N or 10^k)")
    cmd.add_argument("--no-timing", action="store_true", help="suppress timing output")


def _add_planning(cmd: argparse.ArgumentParser) -> None:
    cmd.add_argument("--budget", default="inf", help="total observation budget (number or inf)")
    cmd.add_argument("--utility", choices=["entropy", "meu"], default="entropy")
    cmd.add_argument("--actions", help="action table JSON (required for meu)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voiplan",
        description="Exact inference and observation planning for probabilistic logic programs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    infer = sub.add_parser("infer", help="query probability and entropy")
    _add_shared(infer, query=True)

    voi = sub.add_parser("voi", help="value of information of observable sets")
    _add_shared(voi, query=True)
    _add_planning(voi)
    voi.add_argument("--set", default="", help="comma-separated observable templates")
    voi.add_argument("--all-subsets", type=int, metavar="K", help="rank subsets up to size K")

    plan = sub.add_parser("plan", help="build a conditional observation plan")
    _add_shared(plan, query=True)
    _add_planning(plan)
    plan.add_argument("--out", help="write plan JSON here")
    plan.add_argument("--anytime", action="store_true", help="priority-queue expansion")
    plan.add_argument("--time-limit-ms", type=float)
    plan.add_argument("--max-expansions", type=int)
    plan.add_argument("--priority", choices=["reach", "fifo"], default="reach")

    ev = sub.add_parser("eval-plan", help="re-evaluate a plan file")
    _add_shared(ev)
    ev.add_argument("--plan", required=True, help="plan JSON file")

    walk = sub.add_parser("walk", help="execute a plan against live outcomes")
    _add_shared(walk)
    walk.add_argument("--plan", required=True, help="plan JSON file")

    serve = sub.add_parser("serve", help="run the observation session service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--state-dir", help="persist session snapshots here")
    serve.add_argument("--ui", help="static console directory to serve")
    return parser


def _parse_max_ground(text: str) -> int:
    if "^" in text:
        base, exp = text.split("^", 1)
        return int(base) ** int(exp)
    return int(text)


def _load_theory(args: argparse.Namespace) -> Theory:
    source = Path(args.program).read_text()
    theory = parse_theory(source)
    violations = validate_theory(theory)
    if violations:
        for v in violations:
            print(f"invalid program: {v}", file=sys.stderr)
        raise ProgramError(f"{len(violations)} validation violations")
    extra = []
    for item in args.evidence:
        if "=" not in item:
            raise ProgramError(f"evidence must look like atom=true|false: {item!r}")
        atom_text, value_text = item.rsplit("=", 1)
        if value_text not in ("true", "false"):
            raise ProgramError(f"evidence truth value must be true or false: {item!r}")
        extra.append(EvidenceFact(parse_atom(atom_text), value_text == "true"))
    if extra:
        theory = theory.with_evidence(extra)
    return theory


def _engine(args: argparse.Namespace, theory: Theory) -> InferenceEngine:
    return InferenceEngine(theory, max_rules=_parse_max_ground(args.max_ground))


def _utility_spec(args: argparse.Namespace) -> UtilitySpec:
    if args.utility == "entropy":
        if args.actions:
            raise ProgramError("--actions only applies to --utility meu")
        return UtilitySpec.entropy()
    if not args.actions:
        raise ProgramError("--utility meu requires --actions")
    table = ActionTable.from_json(json.loads(Path(args.actions).read_text()))
    return UtilitySpec.meu(table)


def _budget(args: argparse.Namespace) -> float:
    try:
        value = float(args.budget)
    except ValueError as exc:
        raise ProgramError(f"bad budget {args.budget!r}") from exc
    if value < 0:
        raise ProgramError("budget must be nonnegative")
    return value


def cmd_infer(args: argparse.Namespace) -> int:
    theory = _load_theory(args)
    engine = _engine(args, theory)
    p = success_probability(parse_atom(args.query), Scenario(theory), engine)
    print(f"{p:.6f}")
    print(f"entropy {_binary_entropy(p):.3f}")
    return 0


def cmd_voi(args: argparse.Namespace) -> int:
    theory = _load_theory(args)
    engine = _engine(args, theory)
    spec = _utility_spec(args)
    query = parse_atom(args.query)
    scenario = Scenario(theory)
    declared = [d.template for d in theory.observables]
    if args.all_subsets is not None:
        rows = []
        for size in range(1, args.all_subsets + 1):
            for subset in combinations(declared, size):
                rows.append((voi_set(subset, query, scenario, spec, engine), subset))
        rows.sort(key=lambda r: -round(r[0], 12))  # stable: ties keep declaration order
        for value, subset in rows:
            print(f"{value:.6f} {','.join(str(t) for t in subset)}")
        return 0
    templates = list(dict.fromkeys(parse_atom_list(args.set)))  # sets: dedupe
    for t in templates:
        if theory.observable_for(t) is None:
            raise ProgramError(f"template not declared observable: {t}")
    print(f"{voi_set(templates, query, scenario, spec, engine):.6f}")
    return 0


def cmd_plan(args: argparse.Namespace) -> int:
    theory = _load_theory(args)
    engine = _engine(args, theory)
    spec = _utility_spec(args)
    query = parse_atom(args.query)
    scenario = Scenario(theory)
    budget = _budget(args)
    if args.anytime:
        tree = anytime_plan(
            scenario,
            query,
            budget,
            spec,
            engine,
            priority=args.priority,
            max_expansions=args.max_expansions,
            time_limit_ms=args.time_limit_ms,
        )
    else:
        tree = greedy_plan(scenario, query, budget, spec, engine)
    payload = json.dumps(plan_to_json(tree), indent=2)
    if args.out:
        Path(args.out).write_text(payload + "\n")
    else:
        print(payload)
    print(f"voi {tree_voi(tree):.6f}")
    return 0


def _load_plan(args: argparse.Namespace, theory: Theory, engine: InferenceEngine):
    try:
        obj = json.loads(Path(args.plan).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ProgramError(f"cannot read plan file: {exc}") from exc
    return plan_from_json(obj, theory, engine)


def cmd_eval_plan(args: argparse.Namespace) -> int:
    theory = _load_theory(args)
    engine = _engine(args, theory)
    tree = _load_plan(args, theory, engine)
    by_leaves = tree_voi(tree)
    by_reality = plan_voi_by_reality(tree, tree.query, tree.spec, engine)
    print(f"tree_voi {by_leaves:.6f}")
    print(f"reality_voi {by_reality:.6f}")
    return 0


def cmd_walk(args: argparse.Namespace) -> int:
    theory = _load_theory(args)
    engine = _engine(args, theory)
    tree = _load_plan(args, theory, engine)
    node = tree.root
    spent = 0.0
    while node.choice is not None:
        options = "/".join(node.children)
        while True:
            print(f"observe {node.choice} [{options}]: ", end="", file=sys.stderr, flush=True)
            try:
                answer = input().strip()
            except EOFError:
                raise ProgramError("input ended before the walk reached a leaf")
            child = node.children.get(answer)
            if child is not None:
                break
            print(f"unknown realization {answer!r}, expected one of: {options}", file=sys.stderr)
        decl = theory.observable_for(node.choice)
        spent += decl.cost if decl is not None else node.budget - child.budget
        node = child
    p = engine.posterior(node.scenario, tree.query)
    print(f"posterior {p:.6f}")
    print(f"entropy {_binary_entropy(p):.6f}")
    print(f"utility {tree.spec.of_posterior(p):.6f}")
    print(f"spent {format_number(spent)}")
    print(f"leaf {node.leaf_reason or 'pending'}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(state_dir=args.state_dir, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "infer": cmd_infer,
    "voi": cmd_voi,
    "plan": cmd_plan,
    "eval-plan": cmd_eval_plan,
    "walk": cmd_walk,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    started = time.monotonic()
    try:
        code = _COMMANDS[args.command](args)
    except (ProgramError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InconsistentScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ResourceLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if code == 0 and args.command != "serve" and not getattr(args, "no_timing", True):
        print(f"time_ms {int((time.monotonic() - started) * 1000)}")
    return code


if __name__ == "__main__":
    sys.exit(main())
