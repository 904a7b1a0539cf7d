"""Wrappers that adapt a protocol to a harsher setting.

self-stab:<inner>    recover from arbitrary initial states by validating and
                     trimming the view each step.
finite-state:<inner> bound the state space by refusing merges that carry no
                     new information, so quiescent runs stop growing views.
tau:<k>:<inner>      batch k steps into one round for networks that are only
                     connected over unions of k consecutive graphs.
tau:auto:<inner>     unknown round length; solve aggregated level windows
                     instead of batching.

Wrappers take a concrete protocol, not another wrapper.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Optional

from ..errors import ConfigError, ContractViolation, PartialAssignment
from ..nodes import (
    NodeStore,
    Received,
    View,
    delete_level0_and_remerge,
    equalize,
    initial_view,
    merge_views,
    well_formed,
)
from ..ratios import solve_ratios_window
from .base import (
    SYNCHRONOUS,
    AgentState,
    ModelRequirements,
    Protocol,
    ProtocolParams,
    StepInfo,
    ViewProtocol,
    chain_input,
    level_mean,
    numeric_input,
    scale_level,
)

_SYNC_ONLY = frozenset({SYNCHRONOUS})


def self_stab_requirements(inner: ModelRequirements) -> ModelRequirements:
    if inner.terminating:
        raise ConfigError("self-stab wraps stabilizing protocols only")
    if SYNCHRONOUS not in inner.models:
        raise ConfigError("self-stab runs synchronously; the inner protocol must too")
    return ModelRequirements(
        models=_SYNC_ONLY,
        directed=inner.directed,
        awareness=inner.awareness,
        needs_ell=inner.needs_ell,
        unique_leader=inner.unique_leader,
        needs_n=False,
        needs_numeric=inner.needs_numeric,
        terminating=False,
    )


def finite_state_requirements(inner: ModelRequirements) -> ModelRequirements:
    if inner.terminating:
        raise ConfigError("finite-state wraps stabilizing protocols only")
    if SYNCHRONOUS not in inner.models:
        raise ConfigError("finite-state runs synchronously; the inner protocol must too")
    if inner.awareness is not None:
        raise ConfigError("finite-state supports undirected protocols only")
    return ModelRequirements(
        models=_SYNC_ONLY,
        directed=False,
        awareness=None,
        needs_ell=inner.needs_ell,
        unique_leader=inner.unique_leader,
        needs_n=inner.needs_n,
        needs_numeric=inner.needs_numeric,
        terminating=False,
    )


def tau_batch_requirements(inner: ModelRequirements) -> ModelRequirements:
    if SYNCHRONOUS not in inner.models:
        raise ConfigError("tau batching runs synchronously; the inner protocol must too")
    if inner.awareness is not None:
        raise ConfigError("tau batching supports undirected protocols only")
    return ModelRequirements(
        models=_SYNC_ONLY,
        directed=inner.directed,
        awareness=None,
        needs_ell=inner.needs_ell,
        unique_leader=inner.unique_leader,
        needs_n=inner.needs_n,
        needs_numeric=inner.needs_numeric,
        terminating=inner.terminating,
    )


def tau_auto_requirements(inner_name: str) -> ModelRequirements:
    if inner_name not in ("counting", "avg-consensus"):
        raise ConfigError("tau:auto supports counting and avg-consensus")
    return ModelRequirements(
        models=_SYNC_ONLY,
        directed=False,
        needs_ell=inner_name == "counting",
        needs_numeric=inner_name == "avg-consensus",
    )


# ---------------------------------------------------------------------------
# Self-stabilization


@dataclass
class SelfStabState(AgentState):
    flag: int = 0  # parity of trims performed; used only when n is unknown


class SelfStab(Protocol):
    """Recover from arbitrary corruption of views.

    A view that no synchronous execution could produce is discarded outright,
    and so is any such view arriving from a neighbor: one poisoned message
    would otherwise re-infect agents in a cycle forever. Corrupt but plausible
    views are flushed by bounding the height, which retires one polluted level
    per step until only genuinely observed history remains.

    With n known the height cap is 2n - 2, the worst-case stabilization time
    of the inner protocols. Without it, agents continuously truncate to the
    smallest height among their neighborhood and trim one extra level every
    second step, skipping the toggle on any step where they had to cut their
    own view down; heights then equalize and the common height still grows
    unboundedly, so the inner protocol eventually stabilizes.
    """

    def __init__(self, inner: Protocol, params: Optional[ProtocolParams] = None):
        if not isinstance(inner, ViewProtocol):
            raise ConfigError("self-stab needs a view-evaluating inner protocol")
        self.requirements = self_stab_requirements(inner.requirements)
        self.name = f"self-stab:{inner.name}"
        self.inner = inner
        super().__init__(params)

    def start(self, store: NodeStore, label: str) -> SelfStabState:
        return SelfStabState(view=initial_view(store, label))

    def step(self, state: AgentState, inbox: tuple[Received, ...], info: StepInfo) -> SelfStabState:
        store = state.view.store
        if not well_formed(state.view):
            return SelfStabState(view=initial_view(store, info.input), note="reset")
        kept = [r for r in inbox if well_formed(r.view)]
        flag = state.flag if isinstance(state, SelfStabState) else 0
        if self.params.n is not None:
            view = equalize(
                merge_views(state.view, kept, input_label=info.input, outdeg=info.outdeg, strict=False)
            )
            cap = max(2 * self.params.n - 2, 1)
            while view.height > cap:
                view = delete_level0_and_remerge(view)
            return SelfStabState(view=view, flag=flag)
        # Unknown n. Order matters: truncate to the neighborhood minimum first,
        # merge views of now-equal height, then apply the parity trim.
        h = min([state.view.height] + [r.view.height for r in kept])
        suppress = state.view.height > h
        own = self._truncate(state.view, h)
        kept = [replace(r, view=self._truncate(r.view, h)) for r in kept]
        view = merge_views(own, kept, input_label=info.input, outdeg=info.outdeg, strict=True)
        if not suppress:
            flag ^= 1
            if flag == 0 and view.height >= 1:
                view = delete_level0_and_remerge(view)
        return SelfStabState(view=view, flag=flag)

    @staticmethod
    def _truncate(view: View, h: int) -> View:
        while view.height > h:
            view = delete_level0_and_remerge(view)
        return view

    def output(self, state: AgentState) -> Any:
        return self.inner.evaluate(state.view)


# ---------------------------------------------------------------------------
# Finite state spaces


class FiniteState(Protocol):
    """Merge only views whose essential content differs from ours.

    Two agents whose shallowest usable slices are isomorphic as labeled
    graphs would learn nothing from each other: the slice already determines
    what either protocol output can be. Skipping those merges leaves the
    state unchanged (the very same object, so the engine can spot quiescence)
    and keeps the reachable state space finite on static networks.
    """

    def __init__(self, inner: Protocol, params: Optional[ProtocolParams] = None):
        if not isinstance(inner, ViewProtocol):
            raise ConfigError("finite-state needs a view-evaluating inner protocol")
        self.requirements = finite_state_requirements(inner.requirements)
        self.name = f"finite-state:{inner.name}"
        self.inner = inner
        super().__init__(params)
        self._canon: dict[str, Optional[tuple]] = {}

    def step(self, state: AgentState, inbox: tuple[Received, ...], info: StepInfo) -> AgentState:
        mine = self._slice_key(state.view)
        kept = [
            r for r in inbox
            if mine is None or self._slice_key(r.view) != mine
        ]
        if not kept and mine is not None:
            return state
        merged = merge_views(
            state.view, kept, input_label=info.input, outdeg=info.outdeg, strict=False
        )
        return replace(state, view=equalize(merged), note=None)

    def output(self, state: AgentState) -> Any:
        return self.inner.evaluate(state.view)

    def _slice_key(self, view: View) -> Optional[tuple]:
        got = self._canon.get(view.bottom, _MISS)
        if got is not _MISS:
            return got
        key: Optional[tuple] = None
        for i in range(1, view.height + 1):
            key = _slice_canonical(view, i)
            if key is not None:
                break
        self._canon[view.bottom] = key
        return key


_MISS = object()


def _slice_canonical(view: View, i: int) -> Optional[tuple]:
    """Canonical form of the slice below level i, or None if unusable.

    Usable means: every node one level up has a unique child, message counts
    between distinct chains are mutual, and the chains form one connected
    component. The form is invariant under renaming of the chains.
    """
    chains = sorted(n.code for n in view.level_nodes(i - 1))
    k = len(chains)
    children = view.children()
    idx = {c: v for v, c in enumerate(chains)}
    labels: list[tuple] = []
    mult: dict[tuple[int, int], int] = {}
    for v, c in enumerate(chains):
        kids = children.get(c, [])
        if len(kids) != 1:
            return None
        child = view.node(kids[0])
        own = 0
        for src, m, _port, _deg in child.red_in:
            u = idx.get(src)
            if u is None:
                return None
            if u == v:
                own += m
            else:
                mult[u, v] = mult.get((u, v), 0) + m
        labels.append((chain_input(view, child.code) or "", own))
    for (u, v) in list(mult):
        if mult.get((v, u), 0) == 0:
            return None
    adj = [sorted(w for w in range(k) if mult.get((v, w), 0)) for v in range(k)]
    seen = {0}
    stack = [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    if len(seen) != k:
        return None
    return (i,) + _canonical_graph(labels, mult, adj)


def _canonical_graph(
    labels: list[tuple], mult: dict[tuple[int, int], int], adj: list[list[int]]
) -> tuple:
    """Smallest encoding of a vertex-labeled graph with directed edge weights.

    Color refinement narrows the candidate orderings; remaining ties are
    broken by individualizing one vertex of the first ambiguous class and
    recursing, keeping the lexicographically least result.
    """
    k = len(labels)

    def refine(col: list) -> list:
        while True:
            sigs = [
                (col[v], labels[v], tuple(sorted((col[w], mult[v, w], mult[w, v]) for w in adj[v])))
                for v in range(k)
            ]
            ranks = {s: r for r, s in enumerate(sorted(set(sigs)))}
            new = [ranks[sigs[v]] for v in range(k)]
            if new == col:
                return col
            col = new

    best: Optional[tuple] = None

    def search(col: list) -> None:
        nonlocal best
        cells: dict[int, list[int]] = {}
        for v in range(k):
            cells.setdefault(col[v], []).append(v)
        split = next((cells[c] for c in sorted(cells) if len(cells[c]) > 1), None)
        if split is None:
            pos = sorted(range(k), key=lambda v: col[v])
            pi = {v: p for p, v in enumerate(pos)}
            enc = (
                tuple(labels[v] for v in pos),
                tuple(
                    sorted(
                        (pi[v], pi[w], mult[v, w], mult[w, v])
                        for v in range(k)
                        for w in adj[v]
                        if pi[v] < pi[w]
                    )
                ),
            )
            if best is None or enc < best:
                best = enc
            return
        for v in split:
            col2 = list(col)
            col2[v] = -1
            search(refine(col2))

    search(refine([0] * k))
    assert best is not None
    return best


# ---------------------------------------------------------------------------
# Batched rounds


@dataclass
class TauBatchState(AgentState):
    inner: Optional[AgentState] = None
    buffer: tuple[Received, ...] = ()
    phase: int = 0


class TauBatch(Protocol):
    """Run the inner protocol once per block of tau engine steps.

    Messages buffer across the block; senders' views only change at block
    boundaries, so the buffered multiset is exactly one round of the batched
    network and the inner protocol sees a plain synchronous execution, with
    every bound multiplied by tau.
    """

    def __init__(self, inner: Protocol, tau: int, params: Optional[ProtocolParams] = None):
        if tau < 1:
            raise ConfigError("tau must be a positive integer")
        self.requirements = tau_batch_requirements(inner.requirements)
        self.name = f"tau:{tau}:{inner.name}"
        self.inner = inner
        self.tau = tau
        super().__init__(params)

    def start(self, store: NodeStore, label: str) -> TauBatchState:
        begun = self.inner.start(store, label)
        return TauBatchState(view=begun.view, inner=begun)

    def step(self, state: TauBatchState, inbox: tuple[Received, ...], info: StepInfo) -> TauBatchState:
        buffer = state.buffer + tuple(inbox)
        phase = state.phase + 1
        if phase < self.tau:
            return replace(state, buffer=buffer, phase=phase, note=None)
        begun = self.inner.step(state.inner, buffer, info)
        return TauBatchState(view=begun.view, inner=begun, note=begun.note)

    def output(self, state: TauBatchState) -> Any:
        return self.inner.output(state.inner)

    def terminated(self, state: TauBatchState) -> bool:
        return self.inner.terminated(state.inner)


class TauAuto(ViewProtocol):
    """Stabilizing counting or averaging when the round length is unknown.

    Views are merged every step, so single levels record fragments of rounds
    and are typically unsolvable. Ratios instead come from aggregated windows
    of levels: chain-to-chain message totals obey the same mutuality as a
    single symmetric slice once the window covers enough of a round to
    connect everyone.
    """

    def __init__(self, inner_name: str, params: Optional[ProtocolParams] = None):
        self.requirements = tau_auto_requirements(inner_name)
        self.name = f"tau:auto:{inner_name}"
        self.counting = inner_name == "counting"
        super().__init__(params)

    def start(self, store: NodeStore, label: str) -> AgentState:
        if not self.counting:
            numeric_input(label)
        return super().start(store, label)

    def evaluate(self, view: View) -> Any:
        for lo in range(view.height):
            for hi in range(lo + 1, view.height + 1):
                try:
                    asg = solve_ratios_window(view, lo, hi)
                except PartialAssignment:
                    continue
                except ContractViolation:
                    break
                if not self.counting:
                    return level_mean(view, asg)
                scaled = scale_level(view, asg, ell=self.params.ell)
                if scaled is None:
                    break
                return sum(scaled.values())
        return None
