"""Monte Carlo harness for detection delay and run length.

Every trial owns a single generator seeded from ``(master_seed, trial_index)``
through :func:`trial_seed`, so the results of a batch do not depend on how
trials are distributed over worker processes.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .agent import AgentConfig, AgentState, agent_step, select_stream

__all__ = [
    "TrialConfig",
    "TrialOutcome",
    "MonteCarloSummary",
    "trial_seed",
    "generate_observation",
    "run_trial",
    "run_trials",
    "summarize_edd",
    "summarize_arl",
    "estimate_edd",
    "estimate_arl",
    "sweep_edd",
    "default_workers",
]

log = logging.getLogger(__name__)

WORKERS_ENV = "BANDITQCD_WORKERS"
CENSOR_WARN_FRACTION = 0.05
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class TrialConfig:
    """Full description of one simulated run.

    ``change_point`` may be ``math.inf`` for a run with no change. Stream
    ``changed_stream`` (default: the last one) switches from N(mu0, 1) to
    N(mu1, 1) for every global time ``t > change_point``.
    """

    n_streams: int
    change_point: float
    mu1: float
    threshold: float
    horizon: int = 1_000_000
    seed: int = 0
    changed_stream: int | None = None
    mu0: float = 0.0

    def __post_init__(self):
        if int(self.n_streams) != self.n_streams or self.n_streams < 1:
            raise ValueError("n_streams must be a positive integer")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if math.isnan(self.change_point) or self.change_point < 0:
            raise ValueError("change_point must be >= 0 or inf")
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.changed_stream is None:
            object.__setattr__(self, "changed_stream", self.n_streams - 1)
        elif not 0 <= self.changed_stream < self.n_streams:
            raise ValueError("changed_stream out of range")

    @property
    def has_change(self) -> bool:
        return math.isfinite(self.change_point)


@dataclass(frozen=True)
class TrialOutcome:
    stopping_time: int
    declared_stream: int | None
    cp_estimate_at_stop: int
    final_stat: float
    censored: bool
    detection_delay: int | None
    false_alarm: bool


@dataclass(frozen=True)
class MonteCarloSummary:
    """Aggregate of a batch of trials.

    ``status`` is ``"ok"``, ``"warning"`` (estimate available but possibly
    biased, see ``message``) or ``"failed"`` (no usable trial; ``mean`` and
    ``std_error`` are NaN).
    """

    mean: float
    std_error: float
    n_trials: int
    n_censored: int
    n_false_alarms: int
    status: str = "ok"
    message: str = ""

    @property
    def failed(self) -> bool:
        return self.status == "failed"

    def to_dict(self) -> dict:
        return asdict(self)


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def trial_seed(master_seed: int, trial_index: int) -> int:
    """64-bit seed for trial ``trial_index`` derived with SplitMix64."""
    return _splitmix64(_splitmix64(int(master_seed) & _MASK64) ^ (int(trial_index) & _MASK64))


def generate_observation(cfg: TrialConfig, arm: int, t: int, rng: np.random.Generator) -> float:
    """Draw the observation of stream ``arm`` at global time ``t``."""
    if not 0 <= arm < cfg.n_streams:
        raise IndexError(f"arm {arm} out of range")
    mean = cfg.mu1 if (arm == cfg.changed_stream and t > cfg.change_point) else cfg.mu0
    return mean + rng.standard_normal()


def run_trial(cfg: TrialConfig, observations: list | None = None) -> TrialOutcome:
    """Run the agent on simulated data until it stops or hits the horizon.

    If ``observations`` is a list, ``(arm, x)`` for every tick is appended
    to it so the run can be replayed.
    """
    state = AgentState.initial(AgentConfig(cfg.n_streams, cfg.threshold, cfg.seed))
    rng = state.rng
    for _ in range(cfg.horizon):
        arm, _explored = select_stream(state, rng)
        x = generate_observation(cfg, arm, state.t + 1, rng)
        if observations is not None:
            observations.append((arm, x))
        agent_step(state, x, arm, rng)
        if state.stopped:
            break

    tau = state.t
    censored = not state.stopped
    nu = cfg.change_point
    false_alarm = not censored and tau <= nu
    delay = None
    if not censored and tau > nu:
        delay = int(tau - nu)
    return TrialOutcome(
        stopping_time=tau,
        declared_stream=state.declared_stream,
        cp_estimate_at_stop=state.global_cp_estimate,
        final_stat=state.max_stat,
        censored=censored,
        detection_delay=delay,
        false_alarm=false_alarm,
    )


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _trial_configs(cfg: TrialConfig, n_trials: int) -> list[TrialConfig]:
    return [replace(cfg, seed=trial_seed(cfg.seed, i)) for i in range(n_trials)]


def run_trials(cfg: TrialConfig, n_trials: int, workers: int | None = None) -> list[TrialOutcome]:
    """Run ``n_trials`` independent trials; ``cfg.seed`` is the master seed.

    Outcomes come back in trial-index order whatever the worker count.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    workers = default_workers() if workers is None else max(1, int(workers))
    configs = _trial_configs(cfg, n_trials)
    if workers == 1:
        return [run_trial(c) for c in configs]
    chunk = max(1, n_trials // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_trial, configs, chunksize=chunk))


def _mean_and_se(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, math.nan
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def summarize_edd(outcomes: Iterable[TrialOutcome]) -> MonteCarloSummary:
    """Delay summary over trials that stopped after the change.

    Censored trials and false alarms are counted but left out of the mean.
    """
    outcomes = list(outcomes)
    delays = [o.detection_delay for o in outcomes if o.detection_delay is not None]
    n_cens = sum(o.censored for o in outcomes)
    n_fa = sum(o.false_alarm for o in outcomes)
    if not delays:
        return MonteCarloSummary(
            math.nan, math.nan, len(outcomes), n_cens, n_fa,
            status="failed", message="no trial detected the change after it occurred",
        )
    mean, se = _mean_and_se(delays)
    status, message = "ok", ""
    if n_cens > CENSOR_WARN_FRACTION * len(outcomes):
        status, message = "warning", f"{n_cens} of {len(outcomes)} trials censored"
    return MonteCarloSummary(mean, se, len(outcomes), n_cens, n_fa, status, message)


def summarize_arl(outcomes: Iterable[TrialOutcome]) -> MonteCarloSummary:
    """Run-length summary; censored trials enter at the horizon value."""
    outcomes = list(outcomes)
    if not outcomes:
        return MonteCarloSummary(math.nan, math.nan, 0, 0, 0, "failed", "no trials")
    times = [o.stopping_time for o in outcomes]
    n_cens = sum(o.censored for o in outcomes)
    mean, se = _mean_and_se(times)
    status, message = "ok", ""
    if n_cens > CENSOR_WARN_FRACTION * len(outcomes):
        status = "warning"
        message = f"{n_cens} of {len(outcomes)} trials censored; mean is biased low"
    return MonteCarloSummary(mean, se, len(outcomes), n_cens, 0, status, message)


def estimate_edd(cfg: TrialConfig, n_trials: int, workers: int | None = None) -> MonteCarloSummary:
    """Expected detection delay ``E[tau - nu | tau > nu]`` by simulation."""
    if not cfg.has_change:
        raise ValueError("estimate_edd needs a finite change_point")
    summary = summarize_edd(run_trials(cfg, n_trials, workers))
    if summary.status != "ok":
        log.warning("EDD estimate %s: %s", summary.status, summary.message)
    return summary


def estimate_arl(cfg: TrialConfig, n_trials: int, workers: int | None = None) -> MonteCarloSummary:
    """Average run length under no change by simulation.

    The horizon should be well above the anticipated ARL (20x is a safe
    margin); censored runs bias the estimate low and are flagged.
    """
    if cfg.has_change:
        raise ValueError("estimate_arl needs change_point=inf")
    summary = summarize_arl(run_trials(cfg, n_trials, workers))
    if summary.status != "ok":
        log.warning("ARL estimate %s: %s", summary.status, summary.message)
    return summary


def sweep_edd(
    mu1_grid: Sequence[float],
    m_grid: Sequence[int],
    nu: int,
    threshold: float,
    n_trials: int,
    seed: int = 0,
    horizon: int = 1_000_000,
    workers: int | None = None,
) -> list[tuple[float, int, MonteCarloSummary]]:
    """EDD over a grid of post-change means and stream counts.

    Rows come out with ``M`` as the outer loop and ``mu1`` as the inner one.
    A failing cell is reported as a failed summary and the sweep goes on.
    """
    if not mu1_grid or not m_grid:
        raise ValueError("grids must be non-empty")
    rows = []
    for m in m_grid:
        for mu1 in mu1_grid:
            cfg = TrialConfig(int(m), nu, float(mu1), threshold, horizon=horizon, seed=seed)
            summary = estimate_edd(cfg, n_trials, workers)
            rows.append((float(mu1), int(m), summary))
    return rows
