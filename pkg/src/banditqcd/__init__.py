"""Bandit quickest change detection with the Decaying-epsilon-FOCuS agent."""

__version__ = "0.1.0"

from .agent import AgentConfig, AgentState, agent_step, epsilon_schedule, refresh_leader, select_stream
from .calibrate import (
    CalibrationResult,
    NumericalError,
    arl_lower_bound,
    calibrate,
    calibrate_threshold,
    compute_c_constant,
    g_function,
)
from .detectors import (
    Candidate,
    CusumState,
    FocusStreamState,
    cusum_stat_maxform,
    cusum_update,
    focus_candidate_count,
    focus_update,
    glr_stat_bruteforce,
)
from .sim import (
    MonteCarloSummary,
    TrialConfig,
    TrialOutcome,
    estimate_arl,
    estimate_edd,
    generate_observation,
    run_trial,
    run_trials,
    sweep_edd,
    trial_seed,
)
