"""Energy-minimizing bit scheduling over i.i.d. fading slots under a hard
deadline: closed-form policies, a numerical DP solver, a one-shot stopping
rule, analytic energy offsets, and a Monte Carlo engine.
"""
from .analysis import (
    OffsetReport,
    equal_bit_cost,
    gap_curve,
    optimal_T2_cost,
    relaxed_cost,
    table2_report,
    theorem1_ratios,
)
from .channel import (
    ChannelModel,
    DegenerateTest,
    GammaDiversity,
    MomentTable,
    NonIntegrable,
    TruncatedExponential,
    expect,
    moments,
    parse_channel_spec,
)
from .dp_solver import (
    CostToGoTable,
    DpConfig,
    DpPolicy,
    GridTooCoarse,
    OutOfTable,
    dp_decide,
    load_table,
    solve,
    solve_for,
)
from .oneshot import (
    OneShotPolicy,
    OneShotThresholds,
    compute_thresholds,
    oneshot_decide,
    oneshot_expected_energy,
)
from .policies import (
    EqualBitPolicy,
    IwfOracle,
    IwfResult,
    OptimalT2Policy,
    Policy,
    SchedulerState,
    SuboptimalIIPolicy,
    SuboptimalIPolicy,
    energy_cost,
    equal_bit,
    iwf_allocate,
    iwf_bits,
    optimal_T2,
    suboptimal_I,
    suboptimal_II,
    threshold_rule,
)
from .simulator import (
    AggregateStats,
    EpisodeRecord,
    SimulationInvariantError,
    episode_records,
    profile,
    rollout,
    run,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
