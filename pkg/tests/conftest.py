"""Shared fixtures, corpus builders, and the independent oracles.

Everything in this file re-derives its answers from the schedule alone:
plain sets of agent ids, plain Fractions, no node store, no canonical
codes, no delivery plans. The library must agree with these on pain of a
test failure; sharing code with it would defeat the point.
"""

from __future__ import annotations

import random
from fractions import Fraction
from math import gcd

import pytest

from histree import DynamicSchedule, gen_random_connected
from histree.model import Awareness


# ---------------------------------------------------------------------------
# Oracle 1: partition refinement over raw agent sets (synchronous schedules)


def _compress(keys):
    ranks = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [ranks[k] for k in keys]


def _blocks(ids):
    acc: dict[int, set[int]] = {}
    for agent, cid in enumerate(ids):
        acc.setdefault(cid, set()).add(agent)
    return {frozenset(b) for b in acc.values()}


def refine_agents(schedule: DynamicSchedule, horizon=None):
    """Indistinguishability partitions per time, straight from the definition.

    Two agents stay together at time t iff they were together at t-1, hold
    the same input, received the same multiset of (sender class, port,
    sender outdegree if early) and, when the model exposes it, sent the
    same number of copies. Plain synchronous schedules only.
    """
    assert schedule.activation is None and schedule.delays is None
    T = schedule.horizon if horizon is None else horizon
    n = schedule.n
    early = schedule.awareness is Awareness.EARLY
    aware = schedule.awareness is not Awareness.NONE
    ids = _compress([schedule.input_at(0, i) for i in range(n)])
    parts = [_blocks(ids)]
    for t in range(1, T + 1):
        step = schedule.steps[t - 1]
        outdeg = [0] * n
        for e in step:
            outdeg[e.src] += e.mult
        inbox: list[dict] = [{} for _ in range(n)]
        for e in step:
            key = (ids[e.src], e.port, outdeg[e.src] if early else None)
            inbox[e.dst][key] = inbox[e.dst].get(key, 0) + e.mult
        sigs = [
            (
                ids[i],
                schedule.input_at(t, i),
                tuple(sorted(inbox[i].items())),
                outdeg[i] if aware else None,
            )
            for i in range(n)
        ]
        ids = _compress(sigs)
        parts.append(_blocks(ids))
    return parts


def gt_partitions(gt):
    """The library's per-time partitions, as raw agent sets, for comparison."""
    return [
        {frozenset(gt.node_agents[code]) for code in level} for level in gt.levels
    ]


# ---------------------------------------------------------------------------
# Oracle 2: textbook Gaussian elimination over Fractions


def gauss_nullspace(rows):
    """Normalized positive integer null vector of a nullity-1 system.

    Raises ValueError when the nullity is not 1 or the vector is not
    strictly one-signed. Row-reduces with Fractions; no Bareiss, no
    integer tricks.
    """
    m = [[Fraction(v) for v in row] for row in rows]
    if not m:
        raise ValueError("empty system")
    cols = len(m[0])
    pivots = []
    r = 0
    for c in range(cols):
        pivot = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        scale = m[r][c]
        m[r] = [v / scale for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    free = [c for c in range(cols) if c not in pivots]
    if len(free) != 1:
        raise ValueError(f"nullity {len(free)}")
    x = [Fraction(0)] * cols
    x[free[0]] = Fraction(1)
    for row, pc in zip(m, pivots):
        x[pc] = -row[free[0]]
    lcm = 1
    for v in x:
        lcm = lcm * v.denominator // gcd(lcm, v.denominator)
    ints = [int(v * lcm) for v in x]
    if all(v < 0 for v in ints):
        ints = [-v for v in ints]
    if any(v <= 0 for v in ints):
        raise ValueError("null vector is not strictly positive")
    g = 0
    for v in ints:
        g = gcd(g, v)
    return tuple(v // g for v in ints)


# ---------------------------------------------------------------------------
# Oracle 3: message-walk enumeration straight off the schedule


def walks_into(schedule: DynamicSchedule, agent: int, time: int, depth: int):
    """Number of message walks of each length 0..depth ending at an agent.

    A length-k walk uses the step graphs at times time, time-1, ...,
    time-k+1, one hop each, multiplicities multiplying along the way.
    """
    counts = [1]
    vec = {agent: 1}
    for k in range(1, depth + 1):
        step = schedule.steps[time - k]
        acc: dict[int, int] = {}
        for e in step:
            if e.dst in vec:
                acc[e.src] = acc.get(e.src, 0) + e.mult * vec[e.dst]
        vec = acc
        counts.append(sum(vec.values()))
    return counts


# ---------------------------------------------------------------------------
# Corpus builders


def undirected_corpus(count, *, seed0=0, nmax=8, tmax=20, leaders=0, labels=("A", "B")):
    rng = random.Random(f"undirected:{seed0}")
    out = []
    for i in range(count):
        n = rng.randint(2, nmax)
        t = rng.randint(2, tmax)
        out.append(
            gen_random_connected(
                n, t, seed0 + i, leaders=min(leaders, n), labels=labels
            )
        )
    return out


def directed_corpus(
    count, *, seed0=0, nmax=6, tmax=12, awareness=Awareness.LATE, leaders=0
):
    rng = random.Random(f"directed:{seed0}")
    out = []
    for i in range(count):
        n = rng.randint(2, nmax)
        t = rng.randint(2, tmax)
        out.append(
            gen_random_connected(
                n,
                t,
                seed0 + i,
                directed=True,
                awareness=awareness,
                leaders=min(leaders, n),
            )
        )
    return out


def permute_schedule(schedule: DynamicSchedule, perm):
    """Relabel agent ids; used to check nothing depends on the labeling."""
    from histree.model import Edge

    steps = tuple(
        tuple(Edge(perm[e.src], perm[e.dst], e.mult, e.port) for e in step)
        for step in schedule.steps
    )
    if schedule.varying_inputs:
        inputs = tuple(
            tuple(row[perm.index(a)] for a in range(schedule.n))
            for row in schedule.inputs
        )
    else:
        inputs = tuple(schedule.inputs[perm.index(a)] for a in range(schedule.n))
    activation = None
    if schedule.activation is not None:
        activation = tuple(
            frozenset(perm[v] for v in act) for act in schedule.activation
        )
    delays = schedule.delays  # parallel to steps, positions unchanged
    return DynamicSchedule(
        n=schedule.n,
        directed=schedule.directed,
        awareness=schedule.awareness,
        inputs=inputs,
        steps=steps,
        activation=activation,
        delays=delays,
    )


def tau_sparse_schedule(n, tau, t, seed, *, leaders=1, labels=("A", "B")):
    """Schedule whose links appear only in a tau-step rotation.

    One random connected graph's symmetric link set is split round-robin
    into tau groups; step s carries group s mod tau. Any tau consecutive
    steps union to the whole graph, single steps are typically disconnected.
    """
    from histree.model import LEADER_INPUT, Edge, check_wellformed

    rng = random.Random(f"sparse:{seed}:{n}:{tau}")
    order = list(range(n))
    rng.shuffle(order)
    links = [(order[i - 1], order[i]) for i in range(1, n)]
    for u in range(n):
        for v in range(u + 1, n):
            if (u, v) not in links and (v, u) not in links and rng.random() < 0.4:
                links.append((u, v))
    groups: list[list[Edge]] = [[] for _ in range(tau)]
    for i, (u, v) in enumerate(links):
        groups[i % tau].append(Edge(u, v, 1))
        groups[i % tau].append(Edge(v, u, 1))
    steps = tuple(tuple(sorted(groups[s % tau])) for s in range(t))
    inputs = [rng.choice(list(labels)) for _ in range(n)]
    for i in range(min(leaders, n)):
        inputs[i] = LEADER_INPUT
    sched = DynamicSchedule(
        n=n,
        directed=False,
        awareness=Awareness.NONE,
        inputs=tuple(inputs),
        steps=steps,
    )
    check_wellformed(sched)
    return sched


# ---------------------------------------------------------------------------
# Fixture ground truths, shared across files (building them is not free)


@pytest.fixture(scope="session")
def fig1_gt():
    from histree import build_ground_truth
    from histree.fixtures import fig1

    return build_ground_truth(fig1())


@pytest.fixture(scope="session")
def fig3_gt():
    from histree import build_ground_truth
    from histree.fixtures import fig3

    return build_ground_truth(fig3())


@pytest.fixture(scope="session")
def fig7_gt():
    from histree import build_ground_truth
    from histree.fixtures import fig7_level

    return build_ground_truth(fig7_level())
