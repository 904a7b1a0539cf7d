"""Protocols for connected undirected networks.

The stabilizing ones evaluate the current view from scratch each step: find a
non-branching level, propagate anonymity ratios, then anchor them (leaders for
counting, nothing for a mean). The terminating counter instead accumulates
confirmed anonymities through the guesser pipeline and certifies its estimate
by outwaiting any branch that could still be hidden.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Optional

from ..errors import ContractViolation, PartialAssignment
from ..nodes import LEADER_INPUT, NodeStore, View, initial_view
from ..ratios import (
    GuessTable,
    is_guesser,
    make_guess,
    resolve_heavy,
    solve_ratios_undirected,
)
from .base import (
    ALL_MODELS,
    SEMI_SYNCHRONOUS,
    SYNCHRONOUS,
    AgentState,
    ModelRequirements,
    StepInfo,
    ViewProtocol,
    chain_input,
    level_mean,
    numeric_input,
    scale_level,
    scan_assignments,
)

_STABILIZING = frozenset({SYNCHRONOUS, SEMI_SYNCHRONOUS})


class ViewBuilder(ViewProtocol):
    """No computation, just the view construction; output is the view digest."""

    name = "view-builder"
    requirements = ModelRequirements(models=ALL_MODELS)

    def evaluate(self, view: View) -> str:
        return view.digest


class AvgConsensus(ViewProtocol):
    name = "avg-consensus"
    requirements = ModelRequirements(
        models=_STABILIZING, directed=False, needs_numeric=True
    )

    def start(self, store: NodeStore, label: str) -> AgentState:
        numeric_input(label)
        return super().start(store, label)

    def evaluate(self, view: View) -> Optional[Fraction]:
        for asg in scan_assignments(view):
            return level_mean(view, asg)
        return None


class Counting(ViewProtocol):
    name = "counting"
    requirements = ModelRequirements(
        models=_STABILIZING, directed=False, needs_ell=True
    )

    def evaluate(self, view: View) -> Optional[int]:
        for asg in scan_assignments(view):
            scaled = scale_level(view, asg, ell=self.params.ell)
            if scaled is None:
                continue
            return sum(scaled.values())
        return None


class LeaderElection(ViewProtocol):
    """Stabilizing election: smallest-anonymity node of a fresh-enough level.

    Working strictly below the view's midpoint guarantees the chosen level
    eventually stops refining, so the answer settles whenever some node of
    anonymity 1 exists; in fully symmetric networks the output is a class of
    several agents forever, which is the best any deterministic rule can do.
    """

    name = "leader-election"
    requirements = ModelRequirements(models=_STABILIZING, directed=False)

    def evaluate(self, view: View) -> Optional[str]:
        t = view.height
        for asg in scan_assignments(view, t // 2 + 1):
            best = min(asg.ratios[c] for c in asg.level_codes)
            return min(c for c in asg.level_codes if asg.ratios[c] == best)
        return None


@dataclass
class ElectionState(AgentState):
    final: Optional[str] = None


class LeaderElectionTerminating(ViewProtocol):
    """Election with known n: exact anonymities certify the winner.

    Any level deeper than n-1 steps in the past is entirely present and
    identical in every agent's view, so scaling its ratios to sum to n gives
    true anonymities. All agents scan the same certified prefix and therefore
    terminate together on the same node. A network that never produces an
    anonymity-1 node never terminates; that is inherent, not a defect.
    """

    name = "leader-election-terminating"
    requirements = ModelRequirements(
        models=frozenset({SYNCHRONOUS}), directed=False, needs_n=True, terminating=True
    )

    def start(self, store: NodeStore, label: str) -> ElectionState:
        return ElectionState(view=initial_view(store, label))

    def step(self, state: ElectionState, inbox, info: StepInfo) -> ElectionState:
        state = super().step(state, inbox, info)
        if state.final is not None:
            return state
        view = state.view
        n = self.params.n
        cutoff = min(view.height - (n - 1), view.height - 1)
        for i in range(cutoff, -1, -1):
            try:
                asg = solve_ratios_undirected(view, i)
            except (PartialAssignment, ContractViolation):
                continue
            scaled = scale_level(view, asg, total=n)
            if scaled is None:
                continue
            ones = sorted(c for c, a in scaled.items() if a == 1)
            if ones:
                return replace(state, final=ones[0], note="terminated")
            # A singleton class persists to every deeper level, so if the
            # deepest certified level has none, no shallower level does.
            break
        return state

    def output(self, state: ElectionState) -> Optional[str]:
        return state.final

    def terminated(self, state: ElectionState) -> bool:
        return state.final is not None

    def evaluate(self, view: View) -> Optional[str]:  # pragma: no cover - unused
        return None


@dataclass
class CountingState(AgentState):
    confirmed: dict[str, int] = field(default_factory=dict)
    key: Optional[tuple[Any, ...]] = None  # (cut codes, estimate) under confirmation
    since: Optional[int] = None  # view height when the key appeared
    final: Optional[int] = None


class CountingTerminating(ViewProtocol):
    """Unique-leader counting with a certificate.

    Anonymities spread from the leader chain (all 1s) through guesses: a node
    with fully known children bounds a red neighbor by balancing message
    counts, and among well-spread guesses the deepest whose subtree outweighs
    it is exact. Summing a fully known level gives an estimate n'; any branch
    still missing from the view must show up within n' further steps, so an
    estimate that survives that long is the answer.
    """

    name = "counting-terminating"
    requirements = ModelRequirements(
        models=frozenset({SYNCHRONOUS}),
        directed=False,
        needs_ell=True,
        unique_leader=True,
        terminating=True,
    )

    def start(self, store: NodeStore, label: str) -> CountingState:
        return CountingState(view=initial_view(store, label))

    def step(self, state: CountingState, inbox, info: StepInfo) -> CountingState:
        advanced = super().step(state, inbox, info)
        if state.final is not None:
            return replace(
                advanced,
                confirmed=state.confirmed,
                key=state.key,
                since=state.since,
                final=state.final,
            )
        view = advanced.view
        confirmed = dict(state.confirmed)
        known = self._pipeline(view, confirmed)
        key = self._estimate(view, known)
        since = state.since
        if key is None:
            since = None
        elif key != state.key:
            since = view.height
        final = state.final
        note = None
        if key is not None and since is not None and view.height - since >= key[1]:
            final = key[1]
            note = "terminated"
        return replace(
            advanced, confirmed=confirmed, key=key, since=since, final=final, note=note
        )

    def output(self, state: CountingState) -> Optional[int]:
        if state.final is not None:
            return state.final
        return state.key[1] if state.key is not None else None

    def terminated(self, state: CountingState) -> bool:
        return state.final is not None

    def evaluate(self, view: View) -> Optional[int]:  # pragma: no cover - unused
        return None

    def _pipeline(self, view: View, confirmed: dict[str, int]) -> dict[str, int]:
        while True:
            known = dict(confirmed)
            for c in view.nodes:
                if chain_input(view, c) == LEADER_INPUT:
                    known[c] = 1
            for c in sorted(view.nodes, key=lambda x: view.node(x).level):
                if known.get(c) == 1:
                    for kid in view.children().get(c, []):
                        known[kid] = 1
            table = GuessTable()
            guessed_parent: set[Optional[str]] = set()
            order = sorted(view.nodes, key=lambda x: (view.node(x).level, x))
            for u in order:
                if not is_guesser(view, u, known):
                    continue
                for tgt, _mult, _port, _deg in view.red_out().get(u, []):
                    if tgt in known or tgt in table.guesses:
                        continue
                    parent = view.node(tgt).parent
                    if parent in guessed_parent:
                        continue
                    try:
                        guess = make_guess(view, u, tgt, known)
                    except ContractViolation:
                        continue
                    table.guesses[tgt] = guess
                    guessed_parent.add(parent)
            if not table.guesses:
                return known
            got = resolve_heavy(table, view)
            if got is None:
                return known
            code, value = got
            confirmed[code] = value

    @staticmethod
    def _estimate(view: View, known: dict[str, int]) -> Optional[tuple[Any, ...]]:
        """Cover every branch by its shallowest known node; None if one escapes.

        The sum over such a cut counts every agent visible in the view exactly
        once. Agents hidden below a known node are already inside its
        anonymity, so only a branch surfacing outside the cut can change the
        estimate, and that is exactly what restarts the confirmation wait.
        """
        cut: list[str] = []
        total = 0
        children = view.children()
        stack = [n.code for n in view.level_nodes(0)]
        while stack:
            c = stack.pop()
            if c in known:
                cut.append(c)
                total += known[c]
                continue
            kids = children.get(c, [])
            if not kids:
                return None
            stack.extend(kids)
        return (tuple(sorted(cut)), total)


class StreamingAvgConsensus(ViewProtocol):
    """Mean of time-varying inputs, reported with its reference step.

    Nodes carry the inputs their agents held at that level's time, so solving
    the deepest solvable level yields the exact mean of some recent step. The
    output is the pair (step, mean); the lag behind the current step is the
    price of waiting for the level to be complete.
    """

    name = "streaming-avg-consensus"
    requirements = ModelRequirements(
        models=frozenset({SYNCHRONOUS}), directed=False, needs_numeric=True
    )

    def start(self, store: NodeStore, label: str) -> AgentState:
        numeric_input(label)
        return super().start(store, label)

    def evaluate(self, view: View) -> Optional[tuple[int, Fraction]]:
        for i in range(view.height - 1, -1, -1):
            try:
                asg = solve_ratios_undirected(view, i)
            except (PartialAssignment, ContractViolation):
                continue
            return (i, level_mean(view, asg))
        return None
