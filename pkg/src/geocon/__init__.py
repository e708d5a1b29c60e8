"""Byzantine geoconsensus: covers, leader selection, EIG consensus, simulation."""

from .consensus import Behavior, ConsensusInstance, psl_run
from .covering import (
    CoverSet,
    OverlapKey,
    coverage_number,
    gcircle,
    gcube,
    greedy_cover,
    gsphere,
    gsquare,
    optimal_cover_oracle,
    overlap_bound,
    overlap_count,
)
from .geometry import PointSet, Shape, contains, covered_indices, shape_diameter, shapes_overlap
from .protocols import (
    FaultModel,
    LeaderSet,
    ProtocolOutcome,
    Refusal,
    check_basic_precondition,
    check_generic_precondition,
    run_basic,
    run_generic,
    select_leaders_basic,
    select_leaders_generic,
    tolerance_bound,
)
from .simulation import PlacementStrategy, PointGenerator, RunRecord, Scenario, execute, verify_message_bound

__all__ = [name for name in dir() if not name.startswith("_")]
