"""Bundled demonstration networks with hand-checked facts.

Each fixture is a small schedule whose indistinguishability structure was
worked out by hand and frozen here. Tests assert the stated facts; nothing
about these networks is randomized.
"""

from __future__ import annotations

from .model import Awareness, DynamicSchedule, Edge, static_schedule

__all__ = ["fig1", "fig3", "fig7_level", "figure_fixtures"]


def fig1(steps: int = 4) -> DynamicSchedule:
    """Six agents, two cyan (0, 1) and four yellow (2..5), connected each step.

    Facts this fixture pins down:
    - At time 1 there are three classes of two agents each: the cyan pair
      (three messages from yellows each), the yellows {2, 3} (two messages
      from cyans each), and the yellows {4, 5} (one message from a cyan
      each). Red multiplicities into those classes: 3, 2, 1.
    - From step 2 on the class structure is static: level sizes run 2, 3, 3,
      so the first level where every node has a unique child is level 1, and
      solving there gives equal anonymities, hence cyan:yellow = 1:2.
    - The cyan agents' own view at time 2 is missing the {4, 5} class node,
      so level 0 looks non-branching to them and they briefly deduce the
      wrong proportion 3:2. The full record refutes it.
    - With the cyan count (2) given, the yellow count is 4; mean of inputs
      cyan=0, yellow=3 is 2.
    """
    step1 = [(0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 5)]
    step2 = [(0, 1), (0, 2), (1, 3), (2, 4), (3, 5)]
    inputs = ("cyan", "cyan", "yellow", "yellow", "yellow", "yellow")

    def undirected(links):
        edges = []
        for u, v in links:
            edges.append(Edge(u, v, 1))
            edges.append(Edge(v, u, 1))
        return tuple(sorted(edges))

    plan = [undirected(step1)] + [undirected(step2)] * max(0, steps - 1)
    return DynamicSchedule(
        n=6,
        directed=False,
        awareness=Awareness.NONE,
        inputs=inputs,
        steps=tuple(plan[:steps]),
    )


FIG3_LINKS = (
    (0, 1), (0, 7), (1, 2), (1, 7), (2, 5), (2, 6),
    (3, 4), (3, 6), (4, 5), (4, 6), (5, 7),
)


def fig3(steps: int = 8) -> DynamicSchedule:
    """Static 8-agent network, agent 0 ("p", cyan) distinguished, rest yellow.

    Facts this fixture pins down:
    - The graph's diameter is 4; agent 3 is the unique agent at distance 4
      from p.
    - Level sizes run 2, 4, 5, 5, ...: the partition stabilizes at level 2
      into five classes {0}, {3}, {1,7}, {2,5}, {4,6}, so levels up to 3
      suffice for all anonymity computations.
    - Every class node of levels 0..3 is present in p's view at step 7 and
      one is still missing at step 6 (the distance-4 agent's class).
    - Solving ratios at the stabilized level gives yellow:cyan = 7; treating
      p as a known unique leader yields n = 8.
    - The contracted stabilized slice is a 5-node multigraph with fiber
      sizes 1, 1, 2, 2, 2.
    """
    inputs = ["cyan"] + ["yellow"] * 7
    return static_schedule(FIG3_LINKS, 8, steps, inputs)


FIG7_ARCS = (
    (0, 1, 1), (0, 2, 1), (0, 3, 1),
    (1, 2, 1), (2, 3, 1), (3, 1, 1),
    (1, 4, 1), (2, 5, 1),
    (1, 6, 1), (2, 7, 1), (3, 6, 1), (3, 7, 1),
    (4, 0, 1), (5, 0, 1),
    (4, 5, 2), (5, 4, 2),
    (6, 4, 1), (7, 5, 1),
    (6, 7, 2), (7, 6, 2),
)


def fig7_level(steps: int = 3) -> DynamicSchedule:
    """Static strongly-connected directed 8-agent network, outdegrees all 3.

    The classes are {0} (the leader), {1,2,3}, {4,5}, {6,7}, stationary from
    time 0 because each class has a distinct input. Facts pinned down:
    - Message balance at any slice, with classes ordered leader-first as
      above, yields exactly the system

          [[ 3, -1,  0,  0],
           [ 0,  2, -1, -2],
           [-2,  0,  1,  0],
           [ 0,  0, -1,  1]]

      whose null space is spanned by (1, 3, 2, 2).
    - With the leader known (ell=1), anonymities are 1, 3, 2, 2 and n = 8.
    """
    edges = tuple(Edge(u, v, m) for u, v, m in FIG7_ARCS)
    inputs = ("LEADER", "b", "b", "b", "c", "c", "d", "d")
    return DynamicSchedule(
        n=8,
        directed=True,
        awareness=Awareness.LATE,
        inputs=inputs,
        steps=tuple(edges for _ in range(steps)),
    )


def figure_fixtures() -> dict[str, DynamicSchedule]:
    return {"fig1": fig1(), "fig3": fig3(), "fig7-level": fig7_level()}
