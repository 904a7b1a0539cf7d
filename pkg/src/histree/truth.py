"""Ground-truth construction: the full indistinguishability record of a run.

Level t groups agents by everything they could possibly have observed through
step t: previous class, the multiset of (sender class, port, sender outdegree)
they received, their own outdegree when the model exposes it, and their
current input when inputs vary over time. Two agents share a node exactly
when no protocol whatsoever could tell them apart.

Agents that do not transition at a step (inactive, or no event in a delayed
run) are recorded under a reserved placeholder child so that every agent has
a node at every level; the placeholder refines nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .model import Awareness, DeliveryPlan, DynamicSchedule, plan_deliveries
from .nodes import DUMMY_INPUT, NodeStore, View, canonical_red


@dataclass
class GroundTruth:
    schedule: DynamicSchedule
    store: NodeStore
    horizon: int
    # levels[t] lists the class codes realized at time t, sorted.
    levels: list[list[str]]
    # agent_node[t][i] is agent i's class code at time t.
    agent_node: list[list[str]]
    anonymity: dict[str, int] = field(default_factory=dict)
    node_agents: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def level_sizes(self) -> list[int]:
        return [len(lv) for lv in self.levels]

    def children_at(self, t: int) -> dict[str, list[str]]:
        """Map each class at time t to its classes at time t+1."""
        out: dict[str, list[str]] = {c: [] for c in self.levels[t]}
        for child in self.levels[t + 1]:
            out[self.store.node(child).parent].append(child)
        return out

    def eq1_holds(self) -> bool:
        """Anonymities are conserved along refinement at every level."""
        for t in range(self.horizon):
            for code, kids in self.children_at(t).items():
                if self.anonymity[code] != sum(self.anonymity[k] for k in kids):
                    return False
        return True

    def view_of(self, agent: int, time: int) -> View:
        bottom = self.agent_node[time][agent]
        return View(self.store, bottom, self.store.closure(bottom))


def _annotate_outdeg(awareness: Awareness) -> bool:
    return awareness is not Awareness.NONE


def build_ground_truth(
    schedule: DynamicSchedule,
    t: Optional[int] = None,
    *,
    inactive_queue: bool = True,
    store: Optional[NodeStore] = None,
    plan: Optional[DeliveryPlan] = None,
) -> GroundTruth:
    """Run the refinement process for the first t steps (default: all)."""
    horizon = schedule.horizon if t is None else t
    if horizon > schedule.horizon:
        raise ValueError(f"schedule has {schedule.horizon} steps, asked for {horizon}")
    if store is None:
        store = NodeStore()
    if plan is None:
        plan = plan_deliveries(schedule, inactive_queue=inactive_queue)
    n = schedule.n
    early = schedule.awareness is Awareness.EARLY
    annotate = _annotate_outdeg(schedule.awareness)

    current = [
        store.intern(0, schedule.input_at(0, i), store.root, (), None)
        for i in range(n)
    ]
    agent_node = [list(current)]
    levels = [sorted(set(current))]

    for step in range(1, horizon + 1):
        active = plan.step_active(step)
        nxt: list[str] = []
        for v in range(n):
            prev = current[v]
            if v not in active:
                nxt.append(store.intern(step, DUMMY_INPUT, prev, (), None))
                continue
            profile: dict[tuple[str, Optional[int], Optional[int]], int] = {}
            for d in plan.step_inbox(step, v):
                src = agent_node[d.send_step - 1][d.sender]
                srcdeg = plan.step_outdeg(d.send_step, d.sender) if early else None
                key = (src, d.port, srcdeg)
                profile[key] = profile.get(key, 0) + d.mult
            red = canonical_red(
                (src, m, port, srcdeg) for (src, port, srcdeg), m in profile.items()
            )
            outdeg = plan.step_outdeg(step, v) if annotate else None
            # Non-dummy nodes carry the agent's input at this time. For static
            # inputs this repeats the level-0 label down the chain, which keeps
            # labels recoverable after old levels are forgotten.
            nxt.append(store.intern(step, schedule.input_at(step, v), prev, red, outdeg))
        current = nxt
        agent_node.append(list(current))
        levels.append(sorted(set(current)))

    anonymity: dict[str, int] = {}
    node_agents: dict[str, tuple[int, ...]] = {}
    grouped: dict[str, list[int]] = {}
    for row in agent_node:
        for i, code in enumerate(row):
            grouped.setdefault(code, []).append(i)
    for code, agents in grouped.items():
        anonymity[code] = len(agents)
        node_agents[code] = tuple(agents)
    anonymity[store.root] = n
    node_agents[store.root] = tuple(range(n))

    return GroundTruth(
        schedule=schedule,
        store=store,
        horizon=horizon,
        levels=levels,
        agent_node=agent_node,
        anonymity=anonymity,
        node_agents=node_agents,
    )
