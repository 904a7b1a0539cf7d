"""Exception taxonomy shared across the package.

ScheduleError and ConfigError map to CLI exit codes 2 and 3. Solver faults are
ordinary control flow for stabilizing protocols (they output "unknown" for the
step and retry later), so they get their own leaf classes.
"""

from __future__ import annotations


class HistreeError(Exception):
    pass


class ScheduleError(HistreeError):
    """Malformed schedule input (bad JSON shape, unknown field, bad edge)."""


class ConfigError(HistreeError):
    """Valid inputs combined in an unsupported way (protocol vs model)."""


class ContractViolation(HistreeError):
    """An operation was called outside its stated precondition."""


class SolverFault(HistreeError):
    """Base class for recoverable solver failures."""


class PartialAssignment(SolverFault):
    """Ratio propagation could not reach every node of the level."""

    def __init__(self, unreached):
        self.unreached = tuple(sorted(unreached))
        super().__init__(f"ratio propagation left {len(self.unreached)} node(s) unreached")


class NullityFault(SolverFault):
    """The homogeneous system does not have a one-dimensional nullspace."""

    def __init__(self, nullity):
        self.nullity = nullity
        super().__init__(f"nullspace dimension is {nullity}, expected 1")


class NonIntegralScale(SolverFault):
    """Scaling ratios to known anonymities did not land on integers."""


class NotStabilized(HistreeError):
    """The history tree never reached two consecutive equal-size levels."""


class CapExceeded(HistreeError):
    """A bounded search or expansion hit its size cap."""
