"""Protocol catalog and lookup by name.

Base protocols are registered under their class name attribute. Wrapped
variants are spelled with a prefix: "self-stab:counting",
"finite-state:avg-consensus", "tau:3:counting-terminating", "tau:auto:counting".
Stabilizing protocols also answer to an explicit "-stabilizing" suffix.
"""

from __future__ import annotations

from typing import Optional

from ..errors import ConfigError
from .base import (
    ALL_MODELS,
    ASYNCHRONOUS,
    SEMI_SYNCHRONOUS,
    SYNCHRONOUS,
    AgentState,
    ModelRequirements,
    Protocol,
    ProtocolParams,
    StepInfo,
    ViewProtocol,
    chain_input,
)
from .directed import (
    AsyncCounting,
    DirectedCounting,
    DirectedCountingTerminating,
    PortCounting,
)
from .undirected import (
    AvgConsensus,
    Counting,
    CountingTerminating,
    LeaderElection,
    LeaderElectionTerminating,
    StreamingAvgConsensus,
    ViewBuilder,
)
from .wrappers import (
    FiniteState,
    SelfStab,
    TauAuto,
    TauBatch,
    finite_state_requirements,
    self_stab_requirements,
    tau_auto_requirements,
    tau_batch_requirements,
)

_BASE: dict[str, type[Protocol]] = {
    cls.name: cls
    for cls in (
        ViewBuilder,
        AvgConsensus,
        Counting,
        CountingTerminating,
        LeaderElection,
        LeaderElectionTerminating,
        StreamingAvgConsensus,
        DirectedCounting,
        DirectedCountingTerminating,
        PortCounting,
        AsyncCounting,
    )
}


def available_protocols() -> tuple[str, ...]:
    return tuple(sorted(_BASE))


def _resolve_base(name: str) -> str:
    if name in _BASE:
        return name
    if name.endswith("-stabilizing"):
        stem = name[: -len("-stabilizing")]
        if stem in _BASE and not _BASE[stem].requirements.terminating:
            return stem
    raise ConfigError(
        f"unknown protocol {name!r}; expected one of {', '.join(available_protocols())}, "
        "optionally wrapped as self-stab:<p>, finite-state:<p>, or tau:<k|auto>:<p>"
    )


def _parse(name: str) -> tuple[str, ...]:
    for prefix in ("self-stab:", "finite-state:"):
        if name.startswith(prefix):
            return (prefix[:-1], name[len(prefix):])
    if name.startswith("tau:"):
        head, sep, inner = name[len("tau:"):].partition(":")
        if not sep or not inner:
            raise ConfigError("tau wrapper is spelled tau:<k|auto>:<protocol>")
        return ("tau", head, inner)
    return ("plain", name)


def _tau_count(head: str) -> int:
    try:
        tau = int(head)
    except ValueError:
        raise ConfigError(f"tau must be a positive integer or 'auto', not {head!r}") from None
    if tau < 1:
        raise ConfigError("tau must be a positive integer")
    return tau


def requirements_of(name: str) -> ModelRequirements:
    """Resolve what a run of the named protocol needs, without instantiating."""
    parsed = _parse(name)
    if parsed[0] == "plain":
        return _BASE[_resolve_base(parsed[1])].requirements
    if parsed[0] == "self-stab":
        return self_stab_requirements(_BASE[_resolve_base(parsed[1])].requirements)
    if parsed[0] == "finite-state":
        return finite_state_requirements(_BASE[_resolve_base(parsed[1])].requirements)
    head, inner = parsed[1], _resolve_base(parsed[2])
    if head == "auto":
        return tau_auto_requirements(inner)
    _tau_count(head)
    return tau_batch_requirements(_BASE[inner].requirements)


def get_protocol(name: str, params: Optional[ProtocolParams] = None) -> Protocol:
    parsed = _parse(name)
    if parsed[0] == "plain":
        return _BASE[_resolve_base(parsed[1])](params)
    if parsed[0] == "self-stab":
        return SelfStab(_BASE[_resolve_base(parsed[1])](params), params)
    if parsed[0] == "finite-state":
        return FiniteState(_BASE[_resolve_base(parsed[1])](params), params)
    head, inner = parsed[1], _resolve_base(parsed[2])
    if head == "auto":
        return TauAuto(inner, params)
    return TauBatch(_BASE[inner](params), _tau_count(head), params)


__all__ = [
    "ALL_MODELS",
    "ASYNCHRONOUS",
    "AgentState",
    "AsyncCounting",
    "AvgConsensus",
    "Counting",
    "CountingTerminating",
    "DirectedCounting",
    "DirectedCountingTerminating",
    "FiniteState",
    "LeaderElection",
    "LeaderElectionTerminating",
    "ModelRequirements",
    "PortCounting",
    "Protocol",
    "ProtocolParams",
    "SEMI_SYNCHRONOUS",
    "SYNCHRONOUS",
    "SelfStab",
    "StepInfo",
    "StreamingAvgConsensus",
    "TauAuto",
    "TauBatch",
    "ViewBuilder",
    "ViewProtocol",
    "available_protocols",
    "chain_input",
    "get_protocol",
    "requirements_of",
]
