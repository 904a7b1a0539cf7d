"""History trees for anonymous dynamic networks.

Construction and merging of leveled views, exact anonymity solvers, a
catalog of stabilizing and terminating protocols (counting, average
consensus, leader election) across synchronous, semi-synchronous,
directed, asynchronous, port-aware, self-stabilizing, and finite-state
models, plus a deterministic simulation engine and ground-truth oracle.
"""

from .engine import (
    ExecutorConfig,
    ProtocolResult,
    RunTrace,
    StepRecord,
    corrupt_states,
    differential_oracle,
    measure_stabilization,
    run,
    view_bytes,
)
from .errors import (
    CapExceeded,
    ConfigError,
    ContractViolation,
    HistreeError,
    NonIntegralScale,
    NotStabilized,
    NullityFault,
    PartialAssignment,
    ScheduleError,
    SolverFault,
)
from .model import (
    Awareness,
    ConnectivityReport,
    DynamicSchedule,
    Edge,
    gen_random_connected,
    schedule_from_json,
    schedule_to_json,
    static_schedule,
    validate,
    with_ports,
)
from .nodes import (
    DUMMY_INPUT,
    LEADER_INPUT,
    NodeStore,
    Received,
    View,
    delete_level0_and_remerge,
    equalize,
    initial_view,
    merge_views,
    well_formed,
)
from .protocols import (
    ProtocolParams,
    available_protocols,
    get_protocol,
    requirements_of,
)
from .ratios import (
    DirectedSystem,
    RatioAssignment,
    build_directed_system,
    build_spanning_system,
    find_nonbranching_level,
    nullspace_rank1,
    propagate_upper_bounds,
    scale_with_leaders,
    solve_ratios_undirected,
    solve_ratios_window,
)
from .structures import FoldedView, QuotientGraph, WalkTree, folded_view, minimum_base, unravel
from .truth import GroundTruth, build_ground_truth
from .witness import Witness, search_lower_bound_witness

__all__ = [
    "Awareness",
    "CapExceeded",
    "ConfigError",
    "ConnectivityReport",
    "ContractViolation",
    "DirectedSystem",
    "DUMMY_INPUT",
    "DynamicSchedule",
    "Edge",
    "ExecutorConfig",
    "FoldedView",
    "GroundTruth",
    "HistreeError",
    "LEADER_INPUT",
    "NodeStore",
    "NonIntegralScale",
    "NotStabilized",
    "NullityFault",
    "PartialAssignment",
    "ProtocolParams",
    "ProtocolResult",
    "QuotientGraph",
    "RatioAssignment",
    "Received",
    "RunTrace",
    "ScheduleError",
    "SolverFault",
    "StepRecord",
    "View",
    "WalkTree",
    "Witness",
    "available_protocols",
    "build_directed_system",
    "build_ground_truth",
    "build_spanning_system",
    "corrupt_states",
    "delete_level0_and_remerge",
    "differential_oracle",
    "equalize",
    "find_nonbranching_level",
    "folded_view",
    "gen_random_connected",
    "get_protocol",
    "initial_view",
    "measure_stabilization",
    "merge_views",
    "minimum_base",
    "nullspace_rank1",
    "propagate_upper_bounds",
    "requirements_of",
    "run",
    "scale_with_leaders",
    "schedule_from_json",
    "schedule_to_json",
    "search_lower_bound_witness",
    "solve_ratios_undirected",
    "solve_ratios_window",
    "static_schedule",
    "unravel",
    "validate",
    "view_bytes",
    "well_formed",
    "with_ports",
]
