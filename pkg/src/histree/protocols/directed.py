"""Protocols for directed networks with outdegree or port awareness.

Without symmetric links, ratios come from per-chain balance equations: copies
sent by a class equal copies received from it, with the outdegree annotations
supplying the send side. A single slice suffices when every step's graph is
strongly connected; sparse or asynchronous traffic is solved over aggregated
intervals instead.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

from ..errors import ContractViolation, NullityFault, SolverFault
from ..nodes import LEADER_INPUT, NodeStore, View, initial_view, merge_views
from ..ratios import (
    build_directed_system,
    build_spanning_system,
    nullspace_rank1,
    propagate_upper_bounds,
    support_strongly_connected,
)
from .base import (
    ASYNCHRONOUS,
    OUTDEG_AWARE,
    SEMI_SYNCHRONOUS,
    SYNCHRONOUS,
    AgentState,
    ModelRequirements,
    StepInfo,
    ViewProtocol,
    chain_input,
)
from ..model import Awareness


def _scale_chains(
    view: View, order: tuple[str, ...], vec: tuple[int, ...], ell: int
) -> Optional[int]:
    """Anchor a nullspace vector on the leader chains; None if it won't fit."""
    leader_sum = sum(
        v for c, v in zip(order, vec) if chain_input(view, c) == LEADER_INPUT
    )
    if leader_sum == 0:
        return None
    factor = Fraction(ell, leader_sum)
    total = 0
    for v in vec:
        value = v * factor
        if value.denominator != 1 or value < 1:
            return None
        total += int(value)
    return total


def directed_estimate(view: View, ell: int) -> Optional[int]:
    """Shallowest slice whose balance system scales to integer anonymities."""
    for lo in range(view.height):
        try:
            system = build_directed_system(view, (lo, lo + 1))
            vec = nullspace_rank1(system)
        except (ContractViolation, SolverFault):
            continue
        n = _scale_chains(view, system.order, vec, ell)
        if n is not None:
            return n
    return None


class DirectedCounting(ViewProtocol):
    name = "directed-counting"
    requirements = ModelRequirements(
        models=frozenset({SYNCHRONOUS, SEMI_SYNCHRONOUS}),
        awareness=OUTDEG_AWARE,
        needs_ell=True,
    )

    def evaluate(self, view: View) -> Optional[int]:
        return directed_estimate(view, self.params.ell)


@dataclass
class DirectedCountingState(AgentState):
    window: int = 1
    # (lo, hi, anchor key, deadline height) while outwaiting hidden branches
    wait: Optional[tuple[int, int, tuple, int]] = None
    final: Optional[int] = None


def _anchor_key(table) -> tuple:
    return tuple(sorted((head, a, b) for head, (a, b) in table.anchors.items()))


class DirectedCountingTerminating(ViewProtocol):
    """Counting with certificate over a non-branching interval.

    Upper bounds on branch anonymities spread from the leader branch along
    red edges; once every chain in some interval is bounded, waiting out the
    bound total proves no branch is missing, and the slice solution of that
    interval is exact. The interval length needed is unknown in advance, so
    the search window doubles whenever bounds fail to complete.
    """

    name = "directed-counting-terminating"
    requirements = ModelRequirements(
        models=frozenset({SYNCHRONOUS}),
        awareness=OUTDEG_AWARE,
        needs_ell=True,
        terminating=True,
    )

    def start(self, store: NodeStore, label: str) -> DirectedCountingState:
        return DirectedCountingState(view=initial_view(store, label))

    def step(self, state: DirectedCountingState, inbox, info: StepInfo) -> DirectedCountingState:
        advanced = super().step(state, inbox, info)
        if state.final is not None:
            return advanced
        view = advanced.view
        ell = self.params.ell
        height = view.height
        window = state.window
        wait = state.wait
        if wait is not None:
            lo, hi, key, deadline = wait
            table = self._bounds(view, lo, hi, ell)
            if table is None or not table.complete or _anchor_key(table) != key:
                wait = None
            elif height >= deadline:
                n = self._slice_answer(view, lo, hi, ell)
                if n is not None:
                    return replace(advanced, wait=None, final=n, note="terminated")
                wait = None
        if wait is None:
            had_interval = False
            for lo in range(0, height - window + 1):
                hi = lo + window
                table = self._bounds(view, lo, hi, ell)
                if table is None:
                    continue
                had_interval = True
                if table.complete:
                    wait = (lo, hi, _anchor_key(table), height + table.total())
                    break
            if wait is None and had_interval:
                window *= 2
        return replace(advanced, window=window, wait=wait)

    @staticmethod
    def _bounds(view: View, lo: int, hi: int, ell: int):
        try:
            return propagate_upper_bounds(view, (lo, hi), ell)
        except (ContractViolation, SolverFault):
            return None

    @staticmethod
    def _slice_answer(view: View, lo: int, hi: int, ell: int) -> Optional[int]:
        # The confirmed interval is where branches were proven complete, so
        # the answer is read off its own slices rather than a shallower one.
        for at in range(lo, hi):
            try:
                system = build_directed_system(view, (at, at + 1))
                vec = nullspace_rank1(system)
            except (ContractViolation, SolverFault):
                continue
            n = _scale_chains(view, system.order, vec, ell)
            if n is not None:
                return n
        return None

    def output(self, state: DirectedCountingState) -> Optional[int]:
        if state.final is not None:
            return state.final
        return directed_estimate(state.view, self.params.ell)

    def terminated(self, state: DirectedCountingState) -> bool:
        return state.final is not None

    def evaluate(self, view: View) -> Optional[int]:  # pragma: no cover - unused
        return None


@dataclass
class PortCountingState(AgentState):
    final: Optional[int] = None


class PortCounting(ViewProtocol):
    """Terminating counting with output ports and a unique leader.

    Port tags make every message of a single agent distinct, so any class
    reached by a red path from the leader chain is a singleton. Once a whole
    level is singletons and each node's outdegree matches its visible red
    edges, no agent is unaccounted for and the level size is n.
    """

    name = "port-counting"
    requirements = ModelRequirements(
        models=frozenset({SYNCHRONOUS}),
        awareness=frozenset({Awareness.PORT}),
        needs_ell=True,
        unique_leader=True,
        terminating=True,
    )

    def start(self, store: NodeStore, label: str) -> PortCountingState:
        return PortCountingState(view=initial_view(store, label))

    def step(self, state: PortCountingState, inbox, info: StepInfo) -> PortCountingState:
        advanced = super().step(state, inbox, info)
        if state.final is not None:
            return advanced
        n = self._ported_count(advanced.view)
        if n is None:
            return advanced
        return replace(advanced, final=n, note="terminated")

    @staticmethod
    def _ported_count(view: View) -> Optional[int]:
        certified: set[str] = set()
        for c in sorted(view.nodes, key=lambda x: view.node(x).level):
            node = view.node(c)
            if chain_input(view, c) == LEADER_INPUT:
                certified.add(c)
            elif node.parent in certified:
                certified.add(c)
            elif any(src in certified for src, _, _, _ in node.red_in):
                certified.add(c)
        red_out = view.red_out()
        for i in range(view.height):
            nodes = view.level_nodes(i)
            if not nodes or any(n.code not in certified for n in nodes):
                continue
            good = True
            for u in nodes:
                kids = view.children().get(u.code, [])
                deg = view.node(kids[0]).outdeg if len(kids) == 1 else None
                sent = sum(m for _, m, _, _ in red_out.get(u.code, []))
                if deg is None or deg != sent:
                    good = False
                    break
            if good:
                return len(nodes)
        return None

    def output(self, state: PortCountingState) -> Optional[int]:
        return state.final

    def terminated(self, state: PortCountingState) -> bool:
        return state.final is not None

    def evaluate(self, view: View) -> Optional[int]:  # pragma: no cover - unused
        return None


class AsyncCounting(ViewProtocol):
    """Stabilizing counting under message delays.

    Send and receive events both add a child to the bottom, so levels count
    the agent's own events and red edges span levels freely, upward
    included. Equalizing would have to invent descents for senders whose
    later history is unknown, and those inventions branch against the real
    chains when they arrive, so the view is deliberately left unleveled.
    The solver scans for the first window whose transitions balance into a
    strongly connected system and anchors the solution on the leader chains.
    """

    name = "async-counting"
    requirements = ModelRequirements(
        models=frozenset({ASYNCHRONOUS}), awareness=OUTDEG_AWARE, needs_ell=True
    )

    def step(self, state: AgentState, received, info: StepInfo) -> AgentState:
        view = merge_views(state.view, received, outdeg=info.outdeg, strict=False)
        return AgentState(view=view)

    def evaluate(self, view: View) -> Optional[int]:
        ell = self.params.ell
        for lo in range(view.height):
            for hi in range(lo + 1, view.height + 1):
                try:
                    system = build_spanning_system(view, (lo, hi))
                except ContractViolation:
                    break
                if system is None:
                    continue
                if not support_strongly_connected(system.rows):
                    continue
                try:
                    vec = nullspace_rank1(system)
                except NullityFault:
                    continue
                n = _scale_chains(view, system.order, vec, ell)
                if n is not None:
                    return n
        return None
