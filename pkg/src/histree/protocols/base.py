"""Shared protocol machinery: state, step contract, model requirements.

A protocol is a deterministic transition system per agent. The engine calls
start() once, then step() with the multiset of received views whenever the
agent transitions; output() must be a pure function of the state. The message
an agent sends is always its current view, so protocols communicate only
through what the view encodes.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any, ClassVar, Iterable, Optional

from ..errors import ConfigError, ContractViolation, PartialAssignment
from ..model import Awareness
from ..nodes import (
    LEADER_INPUT,
    NodeStore,
    Received,
    View,
    equalize,
    initial_view,
    merge_views,
)
from ..ratios import RatioAssignment, find_nonbranching_level, solve_ratios_undirected

SYNCHRONOUS = "synchronous"
SEMI_SYNCHRONOUS = "semi-synchronous"
ASYNCHRONOUS = "asynchronous"
ALL_MODELS = frozenset({SYNCHRONOUS, SEMI_SYNCHRONOUS, ASYNCHRONOUS})

OUTDEG_AWARE = frozenset({Awareness.LATE, Awareness.EARLY, Awareness.PORT})


@dataclass(frozen=True)
class ProtocolParams:
    """Knowledge granted to the agents beyond their own input label."""

    ell: Optional[int] = None  # number of leader-labeled agents
    n: Optional[int] = None  # network size, for protocols that assume it


@dataclass(frozen=True)
class StepInfo:
    """Per-transition facts the model exposes to the agent."""

    step: int  # global engine step (diagnostics only; protocols count levels)
    input: str  # the agent's input label at this time
    outdeg: Optional[int]  # messages sent this transition, None if unaware
    model: str


@dataclass(frozen=True)
class ModelRequirements:
    models: frozenset[str]
    directed: Optional[bool] = None  # True: directed links; False: undirected; None: either
    awareness: Optional[frozenset[Awareness]] = None  # None: any mode
    needs_ell: bool = False
    unique_leader: bool = False
    needs_n: bool = False
    needs_numeric: bool = False
    terminating: bool = False


@dataclass
class AgentState:
    view: View
    note: Optional[str] = None  # drained into the run trace as an event


class Protocol(abc.ABC):
    """Deterministic agent behavior; subclasses define the transition."""

    name: ClassVar[str]
    requirements: ClassVar[ModelRequirements]

    def __init__(self, params: Optional[ProtocolParams] = None):
        p = params or ProtocolParams()
        req = self.requirements
        if req.needs_ell and (p.ell is None or p.ell < 1):
            raise ConfigError(f"{self.name} needs a known leader count ell >= 1")
        if req.unique_leader and p.ell != 1:
            raise ConfigError(f"{self.name} needs a unique leader (ell = 1)")
        if req.needs_n and (p.n is None or p.n < 1):
            raise ConfigError(f"{self.name} needs the network size n")
        self.params = p

    def start(self, store: NodeStore, label: str) -> AgentState:
        return AgentState(view=initial_view(store, label))

    @abc.abstractmethod
    def step(self, state: AgentState, inbox: tuple[Received, ...], info: StepInfo) -> AgentState:
        ...

    @abc.abstractmethod
    def output(self, state: AgentState) -> Any:
        ...

    def terminated(self, state: AgentState) -> bool:
        return False


class ViewProtocol(Protocol):
    """Base for stabilizing protocols: grow the view, evaluate it.

    The tolerant merge plus equalize pair is a no-op detour on clean
    synchronous histories and exactly the repair semi-synchronous and
    asynchronous operation needs, so a single transition covers all models.
    """

    def step(self, state: AgentState, inbox: tuple[Received, ...], info: StepInfo) -> AgentState:
        merged = merge_views(
            state.view, list(inbox), input_label=info.input, outdeg=info.outdeg, strict=False
        )
        return replace(state, view=equalize(merged), note=None)

    def output(self, state: AgentState) -> Any:
        return self.evaluate(state.view)

    @abc.abstractmethod
    def evaluate(self, view: View) -> Any:
        ...


def chain_input(view: View, code: str) -> Optional[str]:
    """Input label of the chain through a node, looking past dummy filler."""
    c: Optional[str] = code
    while c is not None:
        n = view.node(c)
        if n.input is not None and not n.is_dummy:
            return n.input
        c = n.parent
    return None


def scan_assignments(view: View, min_level: int = 0) -> Iterable[RatioAssignment]:
    """Yield ratio assignments for each solvable non-branching level in order.

    Levels where propagation stalls (disconnected slice, inconsistent data)
    are skipped: those are "not yet" answers for a stabilizing protocol.
    """
    lv = min_level
    while True:
        found = find_nonbranching_level(view, lv)
        if found is None:
            return
        try:
            yield solve_ratios_undirected(view, found)
        except (PartialAssignment, ContractViolation):
            pass
        lv = found + 1


def scale_level(
    view: View, asg: RatioAssignment, *, ell: Optional[int] = None, total: Optional[int] = None
) -> Optional[dict[str, int]]:
    """Integer anonymities for the assignment's level, or None if they don't fit.

    Exactly one anchor applies: ell fixes the sum over leader-labeled chains,
    total fixes the sum over the whole level. A missing anchor class or a
    non-integral scale means the level is not usable yet.
    """
    level_sum = asg.total()
    if total is not None:
        factor = Fraction(total) / level_sum
    else:
        assert ell is not None
        leader_sum = Fraction(0)
        for c in asg.level_codes:
            if chain_input(view, c) == LEADER_INPUT:
                leader_sum += asg.ratios[c]
        if leader_sum == 0:
            return None
        factor = Fraction(ell) / leader_sum
    scaled: dict[str, int] = {}
    for c in asg.level_codes:
        value = asg.ratios[c] * factor
        if value.denominator != 1 or value < 1:
            return None
        scaled[c] = int(value)
    return scaled


def numeric_input(label: str) -> Fraction:
    try:
        return Fraction(label)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"input {label!r} is not a number") from exc


def level_mean(view: View, asg: RatioAssignment) -> Fraction:
    """Anonymity-weighted mean of the inputs carried at the assignment level."""
    total = Fraction(0)
    weight = Fraction(0)
    for c in asg.level_codes:
        node = view.node(c)
        label = node.input if not node.is_dummy else chain_input(view, c)
        r = asg.ratios[c]
        total += r * numeric_input(label)
        weight += r
    return total / weight


__all__ = [
    "ALL_MODELS",
    "ASYNCHRONOUS",
    "AgentState",
    "ModelRequirements",
    "OUTDEG_AWARE",
    "Protocol",
    "ProtocolParams",
    "SEMI_SYNCHRONOUS",
    "SYNCHRONOUS",
    "StepInfo",
    "ViewProtocol",
    "chain_input",
    "level_mean",
    "numeric_input",
    "scale_level",
    "scan_assignments",
]
