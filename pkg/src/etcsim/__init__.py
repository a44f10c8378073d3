"""Event-triggered networked control simulation under bounded
measurement noise: hybrid consensus dynamics, noise-robust triggering
schemes, a fixed-step hybrid simulation engine, and a scenario CLI."""

from .engine import (
    JumpStormError,
    Scenario,
    SolutionTrace,
    consensus_metrics,
    inter_event_stats,
    lyapunov_series,
    simulate,
    zeno_indicator,
)
from .etm import (
    BerneburgParams,
    BerneburgScheme,
    DolkParams,
    DolkScheme,
    GarciaParams,
    GarciaScheme,
    PhiSolution,
    SingleSystemHooks,
    SingleSystemScheme,
    ZenoGuaranteeError,
    c_lower_bound,
    eta_flow_derivative,
    gamma_sigma_from,
    omega,
    phi_solve,
    psi_berneburg,
    psi_dolk,
    psi_garcia,
    psi_single,
    tau_miet,
    trigger_decision,
)
from .graph import (
    BENCHMARK_EDGES,
    Graph,
    benchmark_topology,
    is_connected,
    is_weight_balanced,
    laplacian,
)
from .hybrid import (
    HybridState,
    HybridTime,
    JumpEvent,
    apply_jump,
    control_input,
    distance_to_consensus,
    flow_derivative,
    measured_error,
)
from .presets import PRESETS, build_preset, preset_names, quadratic_single_scheme
from .signals import ConstantSignal, NoiseSignal

__version__ = "0.1.0"
