"""Executor: drive a protocol over a schedule, recording a full trace.

The engine owns everything the agents must not see: the schedule, message
routing, who is awake, and the global step counter. Agents get exactly their
inbox and their own per-step facts. Runs are deterministic byte for byte:
same schedule, protocol, and config give the same serialized trace.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any, Optional, Sequence, Union

from .errors import ConfigError
from .model import Awareness, DeliveryPlan, DynamicSchedule, plan_deliveries
from .nodes import NodeStore, Received, View
from .protocols import (
    ASYNCHRONOUS,
    SYNCHRONOUS,
    AgentState,
    Protocol,
    ProtocolParams,
    StepInfo,
    get_protocol,
    requirements_of,
)
from .truth import build_ground_truth

_DELIVERY_MODES = ("queue", "vanish")


@dataclass(frozen=True)
class ExecutorConfig:
    model: str = SYNCHRONOUS
    max_steps: Optional[int] = None  # default: the schedule horizon
    seed: Optional[int] = None  # metadata only, recorded in the trace
    record_sizes: bool = False
    inactive_delivery: str = "queue"  # what happens to messages sent to sleepers


@dataclass(frozen=True)
class StepRecord:
    step: int
    outputs: tuple  # JSON-rendered, one per agent
    digests: tuple[str, ...]
    sent_bytes: Optional[tuple[int, ...]] = None


@dataclass
class RunTrace:
    protocol: str
    model: str
    n: int
    horizon: int
    max_steps: int
    seed: Optional[int]
    leaders: tuple[int, ...]
    records: list[StepRecord]
    events: list[dict]
    termination_step: list[Optional[int]]
    rounds: tuple[tuple[int, int], ...]  # detected communication rounds, inclusive
    undelivered: int

    def prefix_rounds(self, step: int) -> int:
        """How many complete rounds fit in steps 1..step."""
        return sum(1 for _, end in self.rounds if end <= step)

    def stabilized_at(self) -> int:
        """First step from which the output vector never changed again."""
        final = self.records[-1].outputs
        bad = [rec.step for rec in self.records if rec.outputs != final]
        return bad[-1] + 1 if bad else 0

    def to_jsonl(self) -> str:
        def dumps(obj: Any) -> str:
            return json.dumps(obj, sort_keys=True, separators=(",", ":"))

        lines = [
            dumps(
                {
                    "meta": {
                        "protocol": self.protocol,
                        "model": self.model,
                        "n": self.n,
                        "horizon": self.horizon,
                        "max_steps": self.max_steps,
                        "seed": self.seed,
                        "leaders": list(self.leaders),
                    }
                }
            )
        ]
        for rec in self.records:
            obj: dict[str, Any] = {
                "step": rec.step,
                "outputs": list(rec.outputs),
                "digests": list(rec.digests),
            }
            if rec.sent_bytes is not None:
                obj["sent_bytes"] = list(rec.sent_bytes)
            lines.append(dumps(obj))
        lines.append(dumps({"events": self.events}))
        lines.append(
            dumps(
                {
                    "summary": {
                        "final_outputs": list(self.records[-1].outputs),
                        "stabilized_at": self.stabilized_at(),
                        "termination_step": self.termination_step,
                        "rounds": len(self.rounds),
                        "undelivered": self.undelivered,
                    }
                }
            )
        )
        return "\n".join(lines) + "\n"


@dataclass
class ProtocolResult:
    outputs: list  # raw final outputs, frozen at termination where it happened
    termination_step: list[Optional[int]]
    states: list[AgentState]
    store: NodeStore


def render_output(value: Any) -> Any:
    """JSON-compatible rendering: fractions as "p/q", tuples as arrays."""
    if value is None or isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return value.numerator
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, tuple):
        return [render_output(v) for v in value]
    return str(value)


def view_bytes(view: View) -> int:
    """Serialized size of a view as its sender would ship it."""
    store = view.store
    total = 0
    for c in sorted(view.nodes):
        n = store.node(c)
        total += len(
            json.dumps([n.level, n.input, n.parent, [list(r) for r in n.red_in], n.outdeg])
        )
    return total


def _check_setup(
    schedule: DynamicSchedule, req, config: ExecutorConfig, name: str
) -> None:
    if config.model not in req.models:
        raise ConfigError(
            f"{name} does not run under the {config.model} model; "
            f"supported: {', '.join(sorted(req.models))}"
        )
    if req.directed is True and not schedule.directed:
        raise ConfigError(f"{name} needs directed links")
    if req.directed is False and schedule.directed:
        raise ConfigError(f"{name} needs undirected links")
    if req.awareness is not None and schedule.awareness not in req.awareness:
        raise ConfigError(
            f"{name} needs awareness in "
            f"{{{', '.join(sorted(a.value for a in req.awareness))}}}, "
            f"schedule has {schedule.awareness.value}"
        )
    if req.unique_leader and len(schedule.leaders()) != 1:
        raise ConfigError(f"{name} needs exactly one leader-labeled agent")
    if config.model == ASYNCHRONOUS and schedule.delays is None:
        raise ConfigError("asynchronous runs need a schedule with message delays")
    if schedule.delays is not None and config.model != ASYNCHRONOUS:
        raise ConfigError("schedule has message delays; run it asynchronously")
    if schedule.activation is not None and config.model == SYNCHRONOUS:
        raise ConfigError("schedule has activation sets; run it semi-synchronously")
    if config.inactive_delivery not in _DELIVERY_MODES:
        raise ConfigError(
            f"inactive_delivery must be one of {_DELIVERY_MODES}, "
            f"not {config.inactive_delivery!r}"
        )


def _fill_params(
    schedule: DynamicSchedule, req, params: Optional[ProtocolParams]
) -> ProtocolParams:
    p = params or ProtocolParams()
    if req.needs_ell and p.ell is None:
        p = replace(p, ell=len(schedule.leaders()))
    if req.needs_n and p.n is None:
        p = replace(p, n=schedule.n)
    return p


def _detect_rounds(
    schedule: DynamicSchedule, plan: DeliveryPlan, upto: int
) -> tuple[tuple[int, int], ...]:
    """Greedy minimal intervals whose delivered traffic is strongly connected.

    A round [s, e] counts a message iff it was sent at step >= s and delivered
    at step <= e, so in-flight traffic never certifies a round.
    """
    n = schedule.n
    rounds: list[tuple[int, int]] = []
    start = 1
    while start <= upto:
        adj: list[set[int]] = [set() for _ in range(n)]
        radj: list[set[int]] = [set() for _ in range(n)]
        end = None
        for t in range(start, upto + 1):
            for v in range(n):
                for d in plan.step_inbox(t, v):
                    if d.send_step >= start and d.sender != v:
                        adj[d.sender].add(v)
                        radj[v].add(d.sender)
            if _strongly_connected(adj, radj, n):
                end = t
                break
        if end is None:
            break
        rounds.append((start, end))
        start = end + 1
    return tuple(rounds)


def _strongly_connected(adj: Sequence[set[int]], radj: Sequence[set[int]], n: int) -> bool:
    def reach(a: Sequence[set[int]]) -> int:
        seen = {0}
        stack = [0]
        while stack:
            for w in a[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen)

    return reach(adj) == n and reach(radj) == n


def run(
    schedule: DynamicSchedule,
    protocol: Union[str, Protocol],
    config: Optional[ExecutorConfig] = None,
    *,
    params: Optional[ProtocolParams] = None,
    initial_states: Optional[Sequence[AgentState]] = None,
) -> tuple[RunTrace, ProtocolResult]:
    config = config or ExecutorConfig()
    if isinstance(protocol, str):
        name = protocol
        req = requirements_of(name)
    else:
        name = protocol.name
        req = protocol.requirements
    _check_setup(schedule, req, config, name)
    if isinstance(protocol, str):
        proto = get_protocol(name, _fill_params(schedule, req, params))
    else:
        proto = protocol

    n = schedule.n
    max_steps = schedule.horizon if config.max_steps is None else config.max_steps
    if not 0 <= max_steps <= schedule.horizon:
        raise ConfigError(
            f"max_steps must lie in [0, horizon={schedule.horizon}], got {max_steps}"
        )
    plan = plan_deliveries(schedule, inactive_queue=config.inactive_delivery == "queue")

    if initial_states is not None:
        if len(initial_states) != n:
            raise ConfigError(f"initial_states must have one state per agent ({n})")
        states = list(initial_states)
        store = states[0].view.store
    else:
        store = NodeStore()
        states = [proto.start(store, schedule.input_at(0, a)) for a in range(n)]

    early = schedule.awareness is Awareness.EARLY
    aware = schedule.awareness is not Awareness.NONE
    sent_views: list[list[View]] = [[s.view] for s in states]
    termination: list[Optional[int]] = [None] * n
    frozen: list[Any] = [None] * n
    quiet = [False] * n
    events: list[dict] = []
    records: list[StepRecord] = []

    def out_of(a: int) -> Any:
        if termination[a] is not None:
            return frozen[a]
        return proto.output(states[a])

    def record(t: int, sizes: Optional[tuple[int, ...]]) -> None:
        records.append(
            StepRecord(
                step=t,
                outputs=tuple(render_output(out_of(a)) for a in range(n)),
                digests=tuple(states[a].view.digest for a in range(n)),
                sent_bytes=sizes,
            )
        )

    record(0, None)
    last = 0
    for t in range(1, max_steps + 1):
        active = frozenset(range(n)) if config.model == SYNCHRONOUS else plan.step_active(t)
        for a in range(n):
            if a not in active:
                continue
            inbox = tuple(
                Received(
                    view=sent_views[d.sender][d.send_step - 1],
                    mult=d.mult,
                    port=d.port,
                    srcdeg=plan.step_outdeg(d.send_step, d.sender) if early else None,
                )
                for d in plan.step_inbox(t, a)
            )
            info = StepInfo(
                step=t,
                input=schedule.input_at(t, a),
                outdeg=plan.step_outdeg(t, a) if aware else None,
                model=config.model,
            )
            new = proto.step(states[a], inbox, info)
            if new is states[a]:
                if not quiet[a]:
                    events.append({"step": t, "agent": a, "kind": "quiesced"})
                    quiet[a] = True
            else:
                if quiet[a]:
                    events.append({"step": t, "agent": a, "kind": "woke"})
                    quiet[a] = False
                if new.note is not None:
                    events.append({"step": t, "agent": a, "kind": new.note})
                    new.note = None
            states[a] = new
            if termination[a] is None and proto.terminated(new):
                termination[a] = t
                frozen[a] = proto.output(new)
        sizes = None
        if config.record_sizes:
            sizes = tuple(view_bytes(sent_views[a][t - 1]) for a in range(n))
        for a in range(n):
            sent_views[a].append(states[a].view)
        record(t, sizes)
        last = t
        if all(ts is not None for ts in termination):
            break

    trace = RunTrace(
        protocol=name,
        model=config.model,
        n=n,
        horizon=schedule.horizon,
        max_steps=max_steps,
        seed=config.seed,
        leaders=schedule.leaders(),
        records=records,
        events=events,
        termination_step=list(termination),
        rounds=_detect_rounds(schedule, plan, last),
        undelivered=plan.undelivered,
    )
    result = ProtocolResult(
        outputs=[out_of(a) for a in range(n)],
        termination_step=list(termination),
        states=states,
        store=store,
    )
    return trace, result


def measure_stabilization(trace: RunTrace, expected: Any) -> int:
    """First step from which every agent's output stays at the expected value.

    0 means the run was correct from the start; a value beyond the last
    recorded step means it never settled.
    """
    want = render_output(expected)
    last_bad: Optional[int] = None
    for rec in trace.records:
        if any(o != want for o in rec.outputs):
            last_bad = rec.step
    return 0 if last_bad is None else last_bad + 1


def differential_oracle(
    schedule: DynamicSchedule, t: int, *, inactive_queue: bool = True
) -> list[list[str]]:
    """Ground-truth view digests, indexed [time][agent], for times 0..t."""
    gt = build_ground_truth(schedule, t, inactive_queue=inactive_queue)
    return [
        [gt.view_of(a, s).digest for a in range(schedule.n)] for s in range(t + 1)
    ]


# ---------------------------------------------------------------------------
# Adversarial initial states


def corrupt_states(
    schedule: DynamicSchedule, seed: Any, *, store: Optional[NodeStore] = None
) -> tuple[NodeStore, list[AgentState]]:
    """Arbitrary agent states, some of them impossible, for recovery tests.

    Four flavors per agent: a plausible but fabricated history, a view with a
    missing ancestor, a view whose bottom is foreign to its node set, and a
    view with a level-skipping edge that no execution could have produced.
    """
    rng = random.Random(f"corrupt:{seed}")
    store = store or NodeStore()
    labels = sorted({schedule.input_at(0, a) for a in range(schedule.n)} | {"A"})
    states: list[AgentState] = []
    for a in range(schedule.n):
        depth = rng.randint(1, 5)
        frontier = [
            store.intern(0, rng.choice(labels), store.root, (), None) for _ in range(rng.randint(1, 3))
        ]
        levels = [frontier]
        for lv in range(1, depth + 1):
            width = max(1, min(len(levels[-1]) + rng.randint(-1, 1), 4))
            row = []
            for i in range(width):
                parent = rng.choice(levels[-1])
                red = []
                for src in rng.sample(levels[-1], k=min(len(levels[-1]), rng.randint(1, 2))):
                    red.append((src, rng.randint(1, 2), None, None))
                row.append(store.intern(lv, rng.choice(labels), parent, tuple(red), None))
            levels.append(row)
        bottom = levels[-1][0]
        nodes = store.closure(bottom)
        flavor = rng.randrange(4)
        if flavor == 1 and len(nodes) > 2:
            victims = sorted(c for c in nodes if c != bottom and c != store.root)
            nodes = frozenset(nodes - {rng.choice(victims)})
        elif flavor == 2:
            other = store.intern(0, rng.choice(labels), store.root, (), None)
            nodes = store.closure(other)  # bottom stays foreign to this set
        elif flavor == 3:
            skip = store.intern(
                depth + 2, rng.choice(labels), bottom, ((bottom, 1, None, None),), None
            )
            bottom = skip
            nodes = store.closure(skip)
        states.append(AgentState(view=View(store, bottom, nodes)))
    return store, states
