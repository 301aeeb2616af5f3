"""Four-node amplify-and-forward relay network: rates, stability region and back-pressure scheduling."""

from .channel import (
    FadingState,
    PowerAllocation,
    RateEntry,
    RateTable,
    af_objective,
    af_rate,
    build_rate_table,
    capacity,
)
from .kernel import BACKEND as KERNEL_BACKEND
from .region import (
    RegionSolution,
    SolverError,
    TimeSharing,
    is_supportable,
    membership_Id,
    membership_Is,
    solve_region_eqform,
    solve_region_minform,
    synchronous_baseline,
)
from .scenario import ArrivalSpec, Scenario, ScenarioError, SimSettings, figure2_scenario
from .scheduler import (
    Action,
    ActionKind,
    QueueState,
    apply_action,
    backpressure_decide,
    lyapunov_value,
    relay_weight,
    source_weight,
)
from .sim import (
    StabilityVerdict,
    TrajectoryStats,
    Verdict,
    classify_stability,
    figure2,
    run_trajectory,
    sweep_lambda,
)

__version__ = "0.1.0"
