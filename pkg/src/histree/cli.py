"""Command-line front end: simulate, oracle, export-dot, search-lower-bound, sweep.

Outputs are pure functions of the arguments and input files: traces are
JSON-lines, sweeps are CSV with deterministically sorted rows, structures
are DOT. Exit codes: 0 success, 1 assertion failure, 2 input error,
3 configuration error. HISTREE_SEED overrides --seed for reproducible CI.
"""

from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional

from .dot import ground_truth_dot, view_dot
from .engine import ExecutorConfig, run
from .errors import ConfigError, HistreeError, ScheduleError
from .model import (
    Awareness,
    DynamicSchedule,
    gen_random_connected,
    schedule_from_json,
    schedule_to_json,
)
from .nodes import LEADER_INPUT
from .protocols import available_protocols
from .truth import build_ground_truth
from .witness import search_lower_bound_witness

_MODELS = ("synchronous", "semi-synchronous", "asynchronous")


# ---------------------------------------------------------------------------
# Safe bound expressions


_ALLOWED = (
    ast.Expression,
    ast.BoolOp,
    ast.And,
    ast.Or,
    ast.UnaryOp,
    ast.Not,
    ast.USub,
    ast.UAdd,
    ast.BinOp,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Div,
    ast.FloorDiv,
    ast.Mod,
    ast.Pow,
    ast.Compare,
    ast.Eq,
    ast.NotEq,
    ast.Lt,
    ast.LtE,
    ast.Gt,
    ast.GtE,
    ast.Constant,
    ast.Name,
    ast.Load,
)


def parse_bound(expr: str, variables: frozenset[str]) -> tuple[ast.Expression, frozenset[str]]:
    """Compile a bound expression, allowing arithmetic and comparisons only."""
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ScheduleError(f"cannot parse expression {expr!r}: {exc.msg}") from exc
    used = set()
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ScheduleError(
                f"expression {expr!r} uses disallowed syntax: {type(node).__name__}"
            )
        if isinstance(node, ast.Name):
            if node.id not in variables:
                raise ScheduleError(
                    f"unknown variable {node.id!r}; available: {', '.join(sorted(variables))}"
                )
            used.add(node.id)
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float, bool)):
            raise ScheduleError("only numeric constants are allowed in expressions")
    return tree, frozenset(used)


def eval_bound(tree: ast.Expression, env: dict[str, Any]) -> Any:
    return eval(compile(tree, "<bound>", "eval"), {"__builtins__": {}}, dict(env))


# ---------------------------------------------------------------------------
# Shared plumbing


def _read_schedule(path: str) -> DynamicSchedule:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScheduleError(f"cannot read schedule file {path}: {exc}") from exc
    return schedule_from_json(text)


def _relabel_leaders(schedule: DynamicSchedule, k: int) -> DynamicSchedule:
    if k < 0 or k > schedule.n:
        raise ConfigError(f"--leaders {k} out of range for {schedule.n} agents")
    if k == 0:
        return schedule
    if schedule.varying_inputs:
        rows = tuple(
            tuple(LEADER_INPUT if a < k else row[a] for a in range(schedule.n))
            for row in schedule.inputs
        )
        return replace(schedule, inputs=rows)
    flat = tuple(
        LEADER_INPUT if a < k else schedule.inputs[a] for a in range(schedule.n)
    )
    return replace(schedule, inputs=flat)


def _infer_model(schedule: DynamicSchedule) -> str:
    if schedule.delays is not None:
        return "asynchronous"
    if schedule.activation is not None:
        return "semi-synchronous"
    return "synchronous"


def _seed(args: argparse.Namespace) -> Optional[int]:
    env = os.environ.get("HISTREE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ScheduleError(f"HISTREE_SEED must be an integer, got {env!r}") from None
    return args.seed


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_simulate(args: argparse.Namespace) -> int:
    schedule = _relabel_leaders(_read_schedule(args.schedule), args.leaders)
    model = _infer_model(schedule) if args.model == "auto" else args.model
    config = ExecutorConfig(
        model=model,
        max_steps=args.max_steps,
        seed=_seed(args),
        record_sizes=args.record_sizes,
    )
    trace, _result = run(schedule, args.protocol, config)
    _write(args.out, trace.to_jsonl())
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    schedule = _read_schedule(args.schedule)
    until = schedule.horizon if args.until is None else args.until
    gt = build_ground_truth(schedule, until)
    if args.dot is not None:
        _write(args.dot, ground_truth_dot(gt))
    sizes = gt.level_sizes()
    print(f"population: {schedule.n}")
    print(f"levels: {','.join(str(s) for s in sizes)}")
    violations = 0
    for t in range(gt.horizon):
        for code, kids in gt.children_at(t).items():
            if gt.anonymity[code] != sum(gt.anonymity[k] for k in kids):
                violations += 1
    print(f"anonymity conservation violations: {violations}")
    return 0 if violations == 0 else 1


def cmd_export_dot(args: argparse.Namespace) -> int:
    schedule = _read_schedule(args.schedule)
    until = schedule.horizon if args.until is None else args.until
    gt = build_ground_truth(schedule, until)
    if args.agent is None:
        _write(args.out, ground_truth_dot(gt))
    else:
        if not 0 <= args.agent < schedule.n:
            raise ConfigError(f"--agent {args.agent} out of range for {schedule.n} agents")
        _write(args.out, view_dot(gt.view_of(args.agent, until)))
    return 0


def cmd_search_lower_bound(args: argparse.Namespace) -> int:
    witness = search_lower_bound_witness(args.n)
    if witness is None:
        print(f"no witness pair found for n={args.n}", file=sys.stderr)
        return 1
    payload = {
        "n": args.n,
        "bound": 2 * args.n - 2,
        "equal_through": witness.equal_through,
        "diverges_at": witness.diverges_at,
        "recolored_equal_through": witness.recolored_equal_through,
        "small": json.loads(schedule_to_json(witness.small)),
        "large": json.loads(schedule_to_json(witness.large)),
    }
    _write(args.out, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return 0


_CORPUS_KEYS = {
    "n",
    "count",
    "t",
    "seed",
    "leaders",
    "directed",
    "awareness",
    "activation",
    "delays",
}


def _parse_corpus(spec: str) -> dict[str, Any]:
    out: dict[str, Any] = {
        "count": 1,
        "t": "4*n",
        "seed": 0,
        "leaders": 1,
        "directed": False,
        "awareness": "none",
        "activation": None,
        "delays": None,
    }
    if spec.strip():
        for part in spec.split(","):
            if "=" not in part:
                raise ScheduleError(f"corpus entry {part!r} is not key=value")
            key, _, value = part.partition("=")
            key = key.strip()
            if key not in _CORPUS_KEYS:
                raise ScheduleError(
                    f"unknown corpus key {key!r}; known: {', '.join(sorted(_CORPUS_KEYS))}"
                )
            out[key] = value.strip()
    if "n" not in out:
        raise ScheduleError("corpus spec needs n=<int> or n=<lo>..<hi>")
    n_spec = str(out["n"])
    if ".." in n_spec:
        lo_s, _, hi_s = n_spec.partition("..")
        lo, hi = int(lo_s), int(hi_s)
    else:
        lo = hi = int(n_spec)
    if lo < 1 or hi < lo:
        raise ScheduleError(f"bad population range {n_spec!r}")
    out["n_range"] = range(lo, hi + 1)
    out["count"] = int(out["count"])
    out["seed"] = int(out["seed"])
    out["leaders"] = int(out["leaders"])
    out["directed"] = str(out["directed"]).lower() in ("1", "true", "yes")
    try:
        out["awareness"] = Awareness(str(out["awareness"]))
    except ValueError:
        raise ScheduleError(f"unknown awareness mode: {out['awareness']!r}") from None
    out["activation"] = None if out["activation"] in (None, "") else float(out["activation"])
    out["delays"] = None if out["delays"] in (None, "") else int(out["delays"])
    return out


def cmd_sweep(args: argparse.Namespace) -> int:
    corpus = _parse_corpus(args.corpus)
    env_seed = os.environ.get("HISTREE_SEED")
    if env_seed is not None:
        corpus["seed"] = int(env_seed)
    t_tree, _ = parse_bound(str(corpus["t"]), frozenset({"n"}))
    bound = None
    bound_uses: frozenset[str] = frozenset()
    if args.bound is not None:
        bound, bound_uses = parse_bound(
            args.bound, frozenset({"n", "t", "seed", "stabilization", "termination"})
        )
    rows = []
    offending: list[tuple[int, int]] = []
    for n in corpus["n_range"]:
        t = int(eval_bound(t_tree, {"n": n}))
        for i in range(corpus["count"]):
            seed = corpus["seed"] + i
            schedule = gen_random_connected(
                n,
                t,
                seed,
                directed=corpus["directed"],
                awareness=corpus["awareness"],
                leaders=min(corpus["leaders"], n),
                activation_prob=corpus["activation"],
                delay_max=corpus["delays"],
            )
            trace, result = run(
                schedule, args.protocol, ExecutorConfig(model=_infer_model(schedule))
            )
            stab = trace.stabilized_at()
            terms = result.termination_step
            term = max(terms) if all(ts is not None for ts in terms) else None
            ok = True
            if bound is not None:
                env = {"n": n, "t": t, "seed": seed, "stabilization": stab, "termination": term}
                if term is None and "termination" in bound_uses:
                    ok = False
                else:
                    ok = bool(eval_bound(bound, env))
            if not ok:
                offending.append((n, seed))
            rows.append((n, t, seed, stab, term, ok))
    rows.sort()
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["n", "t", "seed", "stabilization", "termination", "ok"])
    for n, t, seed, stab, term, ok in rows:
        writer.writerow([n, t, seed, stab, "" if term is None else term, int(ok)])
    _write(args.out, buf.getvalue())
    if offending:
        listing = ", ".join(f"n={n} seed={seed}" for n, seed in offending)
        print(f"bound violated on {len(offending)} run(s): {listing}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="histree",
        description="History-tree construction, solving, and protocol simulation "
        "for anonymous dynamic networks.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sim = sub.add_parser("simulate", help="run a protocol over a schedule file")
    sim.add_argument("--schedule", required=True, help="schedule JSON file")
    sim.add_argument(
        "--protocol",
        required=True,
        help=f"one of: {', '.join(available_protocols())}, or a wrapped form "
        "such as self-stab:counting, finite-state:counting, tau:3:counting",
    )
    sim.add_argument("--leaders", type=int, default=0, help="relabel agents 0..K-1 as leaders")
    sim.add_argument("--max-steps", type=int, default=None)
    sim.add_argument("--model", choices=("auto",) + _MODELS, default="auto")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--record-sizes", action="store_true", help="record sent bytes per step")
    sim.add_argument("--out", default=None, help="trace output path (default stdout)")
    sim.set_defaults(func=cmd_simulate)

    orc = sub.add_parser("oracle", help="build the ground-truth tree and check it")
    orc.add_argument("--schedule", required=True)
    orc.add_argument("--until", type=int, default=None)
    orc.add_argument("--dot", default=None, help="write the annotated tree as DOT")
    orc.set_defaults(func=cmd_oracle)

    exp = sub.add_parser("export-dot", help="render a tree or one agent's view as DOT")
    exp.add_argument("--schedule", required=True)
    exp.add_argument("--until", type=int, default=None)
    exp.add_argument("--agent", type=int, default=None, help="render this agent's view")
    exp.add_argument("--out", default=None)
    exp.set_defaults(func=cmd_export_dot)

    slb = sub.add_parser(
        "search-lower-bound",
        help="search for two networks indistinguishable to their leaders",
    )
    slb.add_argument("--n", type=int, required=True)
    slb.add_argument("--out", default=None)
    slb.set_defaults(func=cmd_search_lower_bound)

    swp = sub.add_parser("sweep", help="run a random corpus and assert bounds")
    swp.add_argument(
        "--corpus",
        required=True,
        help="key=value list: n=2..8,count=50,t=4*n,seed=0,leaders=1,"
        "directed=0,awareness=none,activation=,delays=",
    )
    swp.add_argument("--protocol", required=True)
    swp.add_argument(
        "--assert",
        dest="bound",
        default=None,
        help="bound over n, t, seed, stabilization, termination, "
        'e.g. "stabilization <= 2*n-2"',
    )
    swp.add_argument("--out", default=None, help="CSV output path (default stdout)")
    swp.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScheduleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HistreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
