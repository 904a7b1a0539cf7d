"""Exhaustive search for counting lower-bound witnesses.

A witness is a pair of connected static networks of sizes n and n+1, each
with one marked leader, whose leaders cannot be told apart for 2n-2 steps.
Any counting algorithm quoting an answer by then is wrong in one of the two
networks, since the correct answers differ. The search checks actual view
digests, so a returned pair is a machine-verified counterexample, not a
drawing.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Optional

from .errors import CapExceeded
from .model import DynamicSchedule, static_schedule
from .nodes import LEADER_INPUT
from .truth import build_ground_truth

SEARCH_CAP = 4  # sizes above this take the pair count out of desk scale


@dataclass(frozen=True)
class Witness:
    small: DynamicSchedule
    large: DynamicSchedule
    equal_through: int
    diverges_at: Optional[int]
    recolored_equal_through: int


def _connected_link_sets(m: int) -> Iterator[tuple[tuple[int, int], ...]]:
    """All connected graphs on m labeled vertices, with optional self-loops.

    Loops do not affect connectivity but do change what an agent hears, and
    the known witnesses need them: a loop at a path's far end makes that
    end sound like an interior vertex, which is what delays detection.
    """
    if m == 1:
        for loops in ((), ((0, 0),)):
            yield loops
        return
    all_links = list(combinations(range(m), 2))
    loop_links = [(v, v) for v in range(m)]
    for bits in range(1 << len(all_links)):
        links = tuple(all_links[i] for i in range(len(all_links)) if bits >> i & 1)
        adj = [[] for _ in range(m)]
        for u, v in links:
            adj[u].append(v)
            adj[v].append(u)
        seen = {0}
        stack = [0]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != m:
            continue
        for lbits in range(1 << m):
            loops = tuple(loop_links[i] for i in range(m) if lbits >> i & 1)
            yield links + loops


def _leader_schedule(m: int, links, steps: int, label: str) -> DynamicSchedule:
    inputs = [LEADER_INPUT] + [label] * (m - 1)
    return static_schedule(links, m, steps, inputs)


def _leader_digests(sched: DynamicSchedule) -> list[str]:
    gt = build_ground_truth(sched)
    return [gt.agent_node[t][0] for t in range(sched.horizon + 1)]


def recolor_leaders(sched: DynamicSchedule, label: str) -> DynamicSchedule:
    """Replace every marked leader's input with a common plain label."""
    inputs = tuple(label if x == LEADER_INPUT else x for x in sched.inputs)
    return DynamicSchedule(
        n=sched.n,
        directed=sched.directed,
        awareness=sched.awareness,
        inputs=inputs,
        steps=sched.steps,
        activation=sched.activation,
        delays=sched.delays,
    )


def _equal_through(a: list[str], b: list[str]) -> int:
    eq = -1
    for t in range(min(len(a), len(b))):
        if a[t] != b[t]:
            break
        eq = t
    return eq


def search_lower_bound_witness(n: int, *, label: str = "x") -> Optional[Witness]:
    """Find two networks of sizes n and n+1 with leader views equal through 2n-2.

    Exhaustive over labeled connected graphs with the leader at vertex 0.
    Among qualifying pairs, prefers one whose leader views split at exactly
    step 2n-1 and that stays equal one extra step when both leaders are
    recolored to the plain label; the first such pair in enumeration order
    wins, so results are stable run to run.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if n > SEARCH_CAP:
        raise CapExceeded(
            f"witness search at n={n} exceeds the n<={SEARCH_CAP} pair budget"
        )
    horizon = 2 * n
    deadline = 2 * n - 2

    def profiles(m: int, links) -> tuple[list[str], list[str]]:
        marked = _leader_schedule(m, links, horizon, label)
        return _leader_digests(marked), _leader_digests(recolor_leaders(marked, label))

    by_digest: dict[str, list[tuple[tuple, list[str], list[str]]]] = {}
    for links in _connected_link_sets(n + 1):
        digests, plain = profiles(n + 1, links)
        by_digest.setdefault(digests[deadline], []).append((links, digests, plain))
    best: Optional[Witness] = None
    best_score = -1
    for links in _connected_link_sets(n):
        digests, plain = profiles(n, links)
        for other_links, other_digests, other_plain in by_digest.get(digests[deadline], []):
            diverge = None
            for t in range(deadline + 1, horizon + 1):
                if digests[t] != other_digests[t]:
                    diverge = t
                    break
            recolored_eq = _equal_through(plain, other_plain)
            sharp = diverge == deadline + 1
            lingers = recolored_eq > deadline
            score = 2 * lingers + sharp
            if score == 3:
                return Witness(
                    small=_leader_schedule(n, links, horizon, label),
                    large=_leader_schedule(n + 1, other_links, horizon, label),
                    equal_through=deadline,
                    diverges_at=diverge,
                    recolored_equal_through=recolored_eq,
                )
            if score > best_score:
                best_score = score
                best = Witness(
                    small=_leader_schedule(n, links, horizon, label),
                    large=_leader_schedule(n + 1, other_links, horizon, label),
                    equal_through=deadline,
                    diverges_at=diverge,
                    recolored_equal_through=recolored_eq,
                )
    return best
