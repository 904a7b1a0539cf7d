"""Dynamic network schedules: types, JSON format, validation, generators.

A schedule fixes everything an adversary controls: the number of agents, their
input labels (optionally per step), the per-step communication multigraph,
optional activation sets (semi-synchronous runs) and optional per-edge message
delays (asynchronous runs). Agent identifiers exist only here, as schedule
bookkeeping; nothing an agent computes may depend on them.

The JSON format is a flat object with fields n, directed, awareness, inputs,
steps, and optional activation and delays. Each edge is [src, dst, mult] or
[src, dst, mult, port]. Unknown fields are rejected.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .errors import ScheduleError

RESERVED_PREFIX = "!"
LEADER_INPUT = "LEADER"


class Awareness(str, Enum):
    NONE = "none"
    LATE = "late-outdegree"
    EARLY = "early-outdegree"
    PORT = "output-port"


@dataclass(frozen=True, order=True)
class Edge:
    src: int
    dst: int
    mult: int = 1
    port: Optional[int] = None


Step = tuple[Edge, ...]


@dataclass(frozen=True)
class DynamicSchedule:
    n: int
    directed: bool
    awareness: Awareness
    inputs: tuple  # tuple[str, ...] or tuple[tuple[str, ...], ...] when varying
    steps: tuple[Step, ...]
    activation: Optional[tuple[frozenset[int], ...]] = None
    delays: Optional[tuple[tuple[int, ...], ...]] = None

    @property
    def horizon(self) -> int:
        return len(self.steps)

    @property
    def varying_inputs(self) -> bool:
        return bool(self.inputs) and isinstance(self.inputs[0], tuple)

    def input_at(self, time: int, agent: int) -> str:
        if self.varying_inputs:
            return self.inputs[time][agent]
        return self.inputs[agent]

    def active_at(self, step: int) -> frozenset[int]:
        """Active set for 1-indexed step number."""
        if self.activation is None:
            return frozenset(range(self.n))
        return self.activation[step - 1]

    def leaders(self) -> tuple[int, ...]:
        labels = self.inputs[0] if self.varying_inputs else self.inputs
        return tuple(i for i, lab in enumerate(labels) if lab == LEADER_INPUT)


# ---------------------------------------------------------------------------
# JSON serialization


def schedule_to_json(s: DynamicSchedule) -> str:
    obj = {
        "n": s.n,
        "directed": s.directed,
        "awareness": s.awareness.value,
        "inputs": [list(row) for row in s.inputs] if s.varying_inputs else list(s.inputs),
        "steps": [
            [
                [e.src, e.dst, e.mult] if e.port is None else [e.src, e.dst, e.mult, e.port]
                for e in step
            ]
            for step in s.steps
        ],
    }
    if s.activation is not None:
        obj["activation"] = [sorted(a) for a in s.activation]
    if s.delays is not None:
        obj["delays"] = [list(row) for row in s.delays]
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


_KNOWN_FIELDS = {"n", "directed", "awareness", "inputs", "steps", "activation", "delays"}


def schedule_from_json(text: str) -> DynamicSchedule:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScheduleError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(obj, dict):
        raise ScheduleError("schedule must be a JSON object")
    unknown = set(obj) - _KNOWN_FIELDS
    if unknown:
        raise ScheduleError(f"unknown field(s): {', '.join(sorted(unknown))}")
    for req in ("n", "directed", "awareness", "inputs", "steps"):
        if req not in obj:
            raise ScheduleError(f"missing field: {req}")
    try:
        awareness = Awareness(obj["awareness"])
    except ValueError:
        raise ScheduleError(f"unknown awareness mode: {obj['awareness']!r}") from None
    inputs = obj["inputs"]
    if not isinstance(inputs, list) or not inputs:
        raise ScheduleError("inputs must be a non-empty array")
    if isinstance(inputs[0], list):
        inputs = tuple(tuple(row) for row in inputs)
    else:
        inputs = tuple(inputs)
    steps = []
    for si, step in enumerate(obj["steps"]):
        edges = []
        for e in step:
            if not isinstance(e, list) or len(e) not in (3, 4):
                raise ScheduleError(f"steps[{si}]: edge must be [src,dst,mult] or [src,dst,mult,port]")
            edges.append(Edge(*e))
        steps.append(tuple(edges))
    activation = None
    if "activation" in obj:
        activation = tuple(frozenset(a) for a in obj["activation"])
    delays = None
    if "delays" in obj:
        delays = tuple(tuple(row) for row in obj["delays"])
    sched = DynamicSchedule(
        n=obj["n"],
        directed=obj["directed"],
        awareness=awareness,
        inputs=inputs,
        steps=tuple(steps),
        activation=activation,
        delays=delays,
    )
    check_wellformed(sched)
    return sched


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class ConnectivityReport:
    per_step_connected: tuple[bool, ...]
    tau: Optional[int]
    dynamic_diameter: Optional[int]
    horizon_limited: bool


def check_wellformed(s: DynamicSchedule) -> None:
    """Structural checks; raises ScheduleError naming the offending step."""
    if not isinstance(s.n, int) or s.n < 1:
        raise ScheduleError("n must be a positive integer")
    if s.varying_inputs:
        if len(s.inputs) != s.horizon + 1:
            raise ScheduleError(
                f"varying inputs need {s.horizon + 1} rows (times 0..{s.horizon}), got {len(s.inputs)}"
            )
        rows = s.inputs
    else:
        rows = (s.inputs,)
    for row in rows:
        if len(row) != s.n:
            raise ScheduleError(f"input row has {len(row)} labels, expected n={s.n}")
        for lab in row:
            if not isinstance(lab, str) or not lab:
                raise ScheduleError("input labels must be non-empty strings")
            if lab.startswith(RESERVED_PREFIX):
                raise ScheduleError(f"input label {lab!r} uses the reserved '!' prefix")
    for si, step in enumerate(s.steps):
        ports_per_src: dict[int, set[int]] = {}
        for e in step:
            if not (0 <= e.src < s.n and 0 <= e.dst < s.n):
                raise ScheduleError(f"steps[{si}]: agent out of range in edge {e}")
            if e.mult < 1:
                raise ScheduleError(f"steps[{si}]: multiplicity must be positive in edge {e}")
            if s.awareness is Awareness.PORT:
                if e.port is None:
                    raise ScheduleError(f"steps[{si}]: output-port mode requires a port on {e}")
                if e.mult != 1:
                    raise ScheduleError(
                        f"steps[{si}]: ported edges carry one copy each; split multiplicity {e.mult}"
                    )
                seen = ports_per_src.setdefault(e.src, set())
                if e.port in seen:
                    raise ScheduleError(
                        f"steps[{si}]: port {e.port} reused by sender {e.src}"
                    )
                seen.add(e.port)
            elif e.port is not None:
                raise ScheduleError(f"steps[{si}]: ports are only valid in output-port mode")
        if not s.directed:
            fwd: dict[tuple[int, int], int] = {}
            for e in step:
                fwd[(e.src, e.dst)] = fwd.get((e.src, e.dst), 0) + e.mult
            for (u, v), m in fwd.items():
                if fwd.get((v, u), 0) != m:
                    raise ScheduleError(
                        f"steps[{si}]: undirected schedule is asymmetric on link ({u},{v})"
                    )
    if s.awareness is Awareness.PORT and not s.directed:
        raise ScheduleError("output-port awareness requires a directed schedule")
    if s.activation is not None:
        if s.delays is not None:
            raise ScheduleError("activation and delays cannot be combined")
        if len(s.activation) != s.horizon:
            raise ScheduleError("activation must have one entry per step")
        for si, act in enumerate(s.activation):
            if not act <= frozenset(range(s.n)):
                raise ScheduleError(f"activation[{si}] contains out-of-range agents")
    if s.delays is not None:
        if not s.directed:
            raise ScheduleError("delays require a directed schedule")
        if len(s.delays) != s.horizon:
            raise ScheduleError("delays must have one row per step")
        for si, row in enumerate(s.delays):
            if len(row) != len(s.steps[si]):
                raise ScheduleError(f"delays[{si}] must parallel steps[{si}]")
            if any(d < 0 for d in row):
                raise ScheduleError(f"delays[{si}] contains a negative delay")


def _adjacency(step: Step, n: int, directed: bool) -> list[set[int]]:
    adj: list[set[int]] = [set() for _ in range(n)]
    for e in step:
        adj[e.src].add(e.dst)
        if not directed:
            adj[e.dst].add(e.src)
    return adj


def _connected(adj: list[set[int]], directed: bool) -> bool:
    n = len(adj)
    if n == 1:
        return True

    def reach(start: int, a: list[set[int]]) -> int:
        seen = {start}
        frontier = [start]
        while frontier:
            nxt = []
            for u in frontier:
                for v in a[u]:
                    if v not in seen:
                        seen.add(v)
                        nxt.append(v)
            frontier = nxt
        return len(seen)

    if reach(0, adj) != n:
        return False
    if directed:
        rev: list[set[int]] = [set() for _ in range(n)]
        for u in range(n):
            for v in adj[u]:
                rev[v].add(u)
        return reach(0, rev) == n
    return True


def _union_adj(steps: Sequence[Step], n: int, directed: bool) -> list[set[int]]:
    adj: list[set[int]] = [set() for _ in range(n)]
    for step in steps:
        for e in step:
            adj[e.src].add(e.dst)
            if not directed:
                adj[e.dst].add(e.src)
    return adj


def validate(s: DynamicSchedule) -> ConnectivityReport:
    """Well-formedness plus connectivity metrics over the finite horizon."""
    check_wellformed(s)
    per_step = tuple(
        _connected(_adjacency(step, s.n, s.directed), s.directed) for step in s.steps
    )
    tau = None
    for cand in range(1, s.horizon + 1):
        ok = all(
            _connected(_union_adj(s.steps[i : i + cand], s.n, s.directed), s.directed)
            for i in range(s.horizon - cand + 1)
        )
        if ok:
            tau = cand
            break
    diameter = None
    horizon_limited = False
    spreads = []
    for t0 in range(s.horizon):
        for a in range(s.n):
            known = {a}
            done_at = None
            if s.n == 1:
                done_at = t0
            for t in range(t0 + 1, s.horizon + 1):
                for e in s.steps[t - 1]:
                    if e.src in known:
                        known.add(e.dst)
                    if not s.directed and e.dst in known:
                        known.add(e.src)
                if len(known) == s.n:
                    done_at = t
                    break
            if done_at is None:
                horizon_limited = True
            else:
                spreads.append(done_at - t0)
    if spreads:
        diameter = max(spreads)
    if s.n == 1:
        diameter = 0
        horizon_limited = False
    return ConnectivityReport(per_step, tau, diameter, horizon_limited)


# ---------------------------------------------------------------------------
# Delivery semantics shared by the ground-truth builder and the executors


@dataclass(frozen=True)
class Delivery:
    sender: int
    send_step: int  # 1-indexed step at which the message left the sender
    mult: int
    port: Optional[int]


@dataclass
class DeliveryPlan:
    """Resolved per-step semantics of a schedule.

    active[t] is the set of agents that perform a state transition at step t
    (1-indexed). inbox[t][v] lists deliveries consumed by v at step t.
    outdeg[t][u] counts message copies sent by u at step t. undelivered holds
    messages still pending at the horizon (queued or in flight).
    """

    active: list[frozenset[int]]
    inbox: list[list[list[Delivery]]]
    outdeg: list[list[int]]
    undelivered: int

    def step_active(self, step: int) -> frozenset[int]:
        return self.active[step - 1]

    def step_inbox(self, step: int, agent: int) -> list[Delivery]:
        return self.inbox[step - 1][agent]

    def step_outdeg(self, step: int, agent: int) -> int:
        return self.outdeg[step - 1][agent]


def plan_deliveries(s: DynamicSchedule, *, inactive_queue: bool = True) -> DeliveryPlan:
    T, n = s.horizon, s.n
    inbox: list[list[list[Delivery]]] = [[[] for _ in range(n)] for _ in range(T)]
    outdeg = [[0] * n for _ in range(T)]
    undelivered = 0

    if s.delays is not None:
        # Asynchronous: every agent sends per the step graph; arrival after delay.
        sends = [[False] * n for _ in range(T)]
        for t in range(1, T + 1):
            for ei, e in enumerate(s.steps[t - 1]):
                outdeg[t - 1][e.src] += e.mult
                sends[t - 1][e.src] = True
                arrive = t + s.delays[t - 1][ei]
                if arrive <= T:
                    inbox[arrive - 1][e.dst].append(Delivery(e.src, t, e.mult, e.port))
                else:
                    undelivered += e.mult
        active = [
            frozenset(
                v for v in range(n) if sends[t][v] or inbox[t][v]
            )
            for t in range(T)
        ]
        return DeliveryPlan(active, inbox, outdeg, undelivered)

    if s.activation is None:
        # Plain synchronous.
        for t in range(1, T + 1):
            for e in s.steps[t - 1]:
                outdeg[t - 1][e.src] += e.mult
                inbox[t - 1][e.dst].append(Delivery(e.src, t, e.mult, e.port))
        active = [frozenset(range(n))] * T
        return DeliveryPlan(active, inbox, outdeg, undelivered)

    # Semi-synchronous: inactive agents neither send nor transition. Messages
    # to an inactive agent queue until it next activates (or vanish).
    pending: list[list[Delivery]] = [[] for _ in range(n)]
    for t in range(1, T + 1):
        act = s.active_at(t)
        for e in s.steps[t - 1]:
            if e.src not in act:
                continue
            outdeg[t - 1][e.src] += e.mult
            d = Delivery(e.src, t, e.mult, e.port)
            if e.dst in act:
                inbox[t - 1][e.dst].append(d)
            elif inactive_queue:
                pending[e.dst].append(d)
            else:
                undelivered += e.mult
        for v in act:
            if pending[v]:
                inbox[t - 1][v] = pending[v] + inbox[t - 1][v]
                pending[v] = []
    undelivered += sum(d.mult for q in pending for d in q)
    active = [s.active_at(t) for t in range(1, T + 1)]
    return DeliveryPlan(active, inbox, outdeg, undelivered)


# ---------------------------------------------------------------------------
# Random generators (deterministic in the seed)


def _rng(seed, *salt) -> random.Random:
    return random.Random(":".join(str(x) for x in (seed,) + salt))


def _random_connected_step(rng: random.Random, n: int, directed: bool, extra: float, multi: float) -> Step:
    edges: list[Edge] = []
    order = list(range(n))
    rng.shuffle(order)
    if n == 1:
        if rng.random() < extra:
            edges.append(Edge(0, 0, 1))
        return _close_step(edges, directed)
    if directed:
        # Hamiltonian cycle guarantees strong connectivity.
        for i in range(n):
            u, v = order[i], order[(i + 1) % n]
            edges.append(Edge(u, v, 2 if rng.random() < multi else 1))
        for u in range(n):
            for v in range(n):
                if u != v and rng.random() < extra / n:
                    edges.append(Edge(u, v, 2 if rng.random() < multi else 1))
    else:
        for i in range(1, n):
            u, v = order[i - 1], order[i]
            m = 2 if rng.random() < multi else 1
            edges.append(Edge(u, v, m))
            edges.append(Edge(v, u, m))
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < extra / n:
                    m = 2 if rng.random() < multi else 1
                    edges.append(Edge(u, v, m))
                    edges.append(Edge(v, u, m))
    return _close_step(edges, directed)


def _close_step(edges: list[Edge], directed: bool) -> Step:
    # Merge duplicate arcs into multiplicities so steps are canonical.
    acc: dict[tuple[int, int], int] = {}
    for e in edges:
        acc[(e.src, e.dst)] = acc.get((e.src, e.dst), 0) + e.mult
    return tuple(Edge(u, v, m) for (u, v), m in sorted(acc.items()))


def gen_random_connected(
    n: int,
    t: int,
    seed,
    *,
    directed: bool = False,
    awareness: Awareness = Awareness.NONE,
    leaders: int = 0,
    labels: Sequence[str] = ("A", "B"),
    extra: float = 0.8,
    multi: float = 0.15,
    activation_prob: Optional[float] = None,
    delay_max: Optional[int] = None,
) -> DynamicSchedule:
    """Random schedule whose every step is (strongly) connected.

    Inputs are drawn from a two-label alphabet; the first `leaders` agents are
    relabeled LEADER. activation_prob turns the schedule semi-synchronous,
    delay_max asynchronous.
    """
    rng = _rng(seed, n, t, directed, awareness.value, leaders, delay_max, activation_prob)
    steps = tuple(
        _random_connected_step(rng, n, directed, extra, multi) for _ in range(t)
    )
    inputs = [rng.choice(list(labels)) for _ in range(n)]
    for i in range(min(leaders, n)):
        inputs[i] = LEADER_INPUT
    if awareness is Awareness.PORT:
        steps = tuple(_assign_ports(step) for step in steps)
    activation = None
    if activation_prob is not None:
        activation = []
        for _ in range(t):
            act = frozenset(v for v in range(n) if rng.random() < activation_prob)
            activation.append(act)
        activation = tuple(activation)
    delays = None
    if delay_max is not None:
        delays = tuple(
            tuple(rng.randint(0, delay_max) for _ in step) for step in steps
        )
    sched = DynamicSchedule(
        n=n,
        directed=directed,
        awareness=awareness,
        inputs=tuple(inputs),
        steps=steps,
        activation=activation,
        delays=delays,
    )
    check_wellformed(sched)
    return sched


def _assign_ports(step: Step) -> Step:
    counters: dict[int, int] = {}
    out: list[Edge] = []
    for e in sorted(step):
        for _ in range(e.mult):
            p = counters.get(e.src, 0)
            counters[e.src] = p + 1
            out.append(Edge(e.src, e.dst, 1, p))
    return tuple(out)


def with_ports(s: DynamicSchedule) -> DynamicSchedule:
    """Re-tag a directed schedule with distinct output ports per sender."""
    if not s.directed:
        raise ScheduleError("ports require a directed schedule")
    return DynamicSchedule(
        n=s.n,
        directed=True,
        awareness=Awareness.PORT,
        inputs=s.inputs,
        steps=tuple(_assign_ports(step) for step in s.steps),
        activation=s.activation,
        delays=s.delays,
    )


def static_schedule(
    links: Sequence[tuple[int, int]],
    n: int,
    t: int,
    inputs: Sequence[str],
    *,
    directed: bool = False,
    awareness: Awareness = Awareness.NONE,
) -> DynamicSchedule:
    """Repeat one communication graph for t steps.

    A link (v, v) is a self-loop: the agent hears its own message once per
    step. Loops are not symmetrized, so they carry a single copy.
    """
    edges: list[Edge] = []
    for u, v in links:
        edges.append(Edge(u, v, 1))
        if not directed and u != v:
            edges.append(Edge(v, u, 1))
    step = _close_step(edges, directed)
    sched = DynamicSchedule(
        n=n,
        directed=directed,
        awareness=awareness,
        inputs=tuple(inputs),
        steps=tuple(step for _ in range(t)),
    )
    check_wellformed(sched)
    return sched
