import math

import numpy as np
import pytest

from banditqcd.detectors import glr_stat_bruteforce
from banditqcd.sim import (
    MonteCarloSummary,
    TrialConfig,
    TrialOutcome,
    estimate_arl,
    estimate_edd,
    generate_observation,
    run_trial,
    run_trials,
    summarize_arl,
    summarize_edd,
    sweep_edd,
    trial_seed,
)
from banditqcd.verify import glr_prefix_stats


def cfg(**kw):
    base = dict(n_streams=3, change_point=0, mu1=1.0, threshold=10.0, horizon=10_000, seed=1)
    base.update(kw)
    return TrialConfig(**base)


# --- config ----------------------------------------------------------------


def test_changed_stream_defaults_to_last():
    assert cfg(n_streams=7).changed_stream == 6


@pytest.mark.parametrize(
    "bad",
    [dict(horizon=0), dict(threshold=0.0), dict(change_point=-1), dict(changed_stream=3), dict(seed=-1)],
)
def test_config_validation(bad):
    with pytest.raises(ValueError):
        cfg(**bad)


# --- observations ----------------------------------------------------------


def test_no_change_regime_is_standard_normal():
    c = cfg(change_point=math.inf)
    rng = np.random.default_rng(0)
    xs = [generate_observation(c, 2, 10**6, rng) for _ in range(100_000)]
    assert abs(np.mean(xs)) < 4 / math.sqrt(1e5)


def test_changed_stream_after_change():
    c = cfg(change_point=0, mu1=1.0)
    rng = np.random.default_rng(1)
    xs = [generate_observation(c, 2, 1, rng) for _ in range(100_000)]
    assert abs(np.mean(xs) - 1.0) < 4 / math.sqrt(1e5)
    assert np.std(xs) == pytest.approx(1.0, abs=0.02)


def test_unchanged_stream_ignores_change():
    c = cfg(change_point=0, mu1=1.0)
    rng = np.random.default_rng(2)
    xs = [generate_observation(c, 0, 50, rng) for _ in range(100_000)]
    assert abs(np.mean(xs)) < 4 / math.sqrt(1e5)


def test_change_starts_strictly_after_nu():
    c = cfg(change_point=5, mu1=100.0)
    rng = np.random.default_rng(3)
    assert generate_observation(c, 2, 5, rng) < 50
    assert generate_observation(c, 2, 6, rng) > 50


# --- single trials ---------------------------------------------------------


def test_unreachable_threshold_is_censored():
    out = run_trial(cfg(n_streams=1, mu1=0.0, change_point=math.inf, threshold=1e9, horizon=100))
    assert out.censored
    assert out.stopping_time == 100
    assert out.declared_stream is None
    assert out.detection_delay is None
    assert not out.false_alarm


def test_large_shift_replays_against_oracle():
    log = []
    out = run_trial(cfg(n_streams=1, change_point=0, mu1=10.0, threshold=5.0), observations=log)
    assert not out.censored
    assert out.stopping_time <= 3
    assert out.stopping_time == len(log)
    xs = [x for _, x in log]
    stats, _ = glr_prefix_stats(xs)
    first = int(np.argmax(stats >= 5.0)) + 1
    assert first == out.stopping_time
    assert out.final_stat == pytest.approx(glr_stat_bruteforce(xs)[0], abs=1e-9)
    assert out.detection_delay == out.stopping_time


def test_multi_stream_replay_against_oracle():
    log = []
    c = cfg(n_streams=4, change_point=30, mu1=1.5, threshold=12.0, seed=77)
    out = run_trial(c, observations=log)
    per_stream = {m: [] for m in range(4)}
    first_cross = None
    for t, (arm, x) in enumerate(log, start=1):
        per_stream[arm].append(x)
        if first_cross is None and glr_stat_bruteforce(per_stream[arm])[0] >= c.threshold:
            first_cross = (t, arm)
    assert first_cross == (out.stopping_time, out.declared_stream)


def test_trial_is_deterministic():
    c = cfg(n_streams=5, change_point=20, seed=123)
    assert run_trial(c) == run_trial(c)


def test_false_alarm_flagged():
    # tiny threshold: the first observation already crosses, before the change
    out = run_trial(cfg(n_streams=2, change_point=1000, threshold=1e-9))
    assert out.false_alarm
    assert out.detection_delay is None
    assert out.stopping_time == 1


# --- seeding and batches ---------------------------------------------------


def test_trial_seeds_are_distinct_and_stable():
    seeds = [trial_seed(42, i) for i in range(1000)]
    assert len(set(seeds)) == 1000
    assert all(0 <= s < 2**64 for s in seeds)
    assert trial_seed(42, 7) == trial_seed(42, 7)
    assert trial_seed(42, 7) != trial_seed(43, 7)


def test_parallel_matches_serial():
    c = cfg(n_streams=3, change_point=10, threshold=8.0, seed=99)
    serial = run_trials(c, 12, workers=1)
    parallel = run_trials(c, 12, workers=3)
    assert serial == parallel
    assert summarize_edd(serial) == summarize_edd(parallel)


def test_workers_env_variable(monkeypatch):
    monkeypatch.setenv("BANDITQCD_WORKERS", "2")
    c = cfg(n_streams=2, change_point=0, threshold=6.0, seed=5)
    assert run_trials(c, 4) == run_trials(c, 4, workers=1)


# --- summaries -------------------------------------------------------------


def _outcome(tau, nu, censored=False):
    delay = None if censored or tau <= nu else tau - nu
    return TrialOutcome(tau, None if censored else 0, 0, 1.0, censored, delay, not censored and tau <= nu)


def test_edd_summary_excludes_censored_and_false_alarms():
    outs = [_outcome(110, 100), _outcome(120, 100), _outcome(130, 100), _outcome(50, 100), _outcome(500, 100, True)]
    s = summarize_edd(outs)
    assert s.mean == pytest.approx(20.0)
    assert s.std_error == pytest.approx(np.std([10, 20, 30], ddof=1) / math.sqrt(3))
    assert (s.n_trials, s.n_censored, s.n_false_alarms) == (5, 1, 1)
    assert s.n_censored + s.n_false_alarms <= s.n_trials
    assert s.status == "warning"


def test_edd_summary_failure_is_explicit():
    s = summarize_edd([_outcome(50, 100), _outcome(500, 100, True)])
    assert s.failed
    assert math.isnan(s.mean)


def test_arl_summary_includes_censored_at_horizon():
    outs = [_outcome(100, math.inf), _outcome(300, math.inf), _outcome(1000, math.inf, True)]
    s = summarize_arl(outs)
    assert s.mean == pytest.approx(1400 / 3)
    assert s.n_censored == 1
    assert s.status == "warning"
    assert "biased" in s.message


def test_estimate_edd_requires_change():
    with pytest.raises(ValueError):
        estimate_edd(cfg(change_point=math.inf), 2)
    with pytest.raises(ValueError):
        estimate_arl(cfg(change_point=0), 2)


def test_estimate_edd_all_censored_fails():
    s = estimate_edd(cfg(n_streams=1, change_point=0, threshold=1e9, horizon=20), 3)
    assert s.failed
    assert s.n_censored == 3


def test_estimate_arl_small():
    s = estimate_arl(cfg(n_streams=2, change_point=math.inf, threshold=3.0, horizon=100_000), 50)
    assert isinstance(s, MonteCarloSummary)
    assert s.n_trials == 50 and s.n_censored == 0
    assert s.mean > 1


def test_sweep_order_and_shape():
    rows = sweep_edd([-1.0, 2.0], [1, 2], nu=0, threshold=4.0, n_trials=5, seed=3)
    assert [(mu, m) for mu, m, _ in rows] == [(-1.0, 1), (2.0, 1), (-1.0, 2), (2.0, 2)]
    assert all(s.n_trials == 5 for _, _, s in rows)
    with pytest.raises(ValueError):
        sweep_edd([], [1], 0, 4.0, 5)


def test_sweep_keeps_going_after_failed_cell():
    rows = sweep_edd([1.0, 50.0], [1], nu=0, threshold=1e4, n_trials=2, horizon=30)
    assert rows[0][2].failed
    assert not rows[1][2].failed


def test_small_edd_monotone_in_threshold():
    lo = estimate_edd(cfg(n_streams=2, change_point=0, threshold=5.0, seed=4), 200)
    hi = estimate_edd(cfg(n_streams=2, change_point=0, threshold=20.0, seed=4), 200)
    pooled = math.hypot(lo.std_error, hi.std_error)
    assert hi.mean >= lo.mean - 2 * pooled


def _pure_exploration_delay(rng, m, nu, mu1, lam, horizon=5000):
    """Independent simulator: uniform arm every tick, exhaustive GLR per stream."""
    sums = [[0.0] for _ in range(m)]
    for t in range(1, horizon + 1):
        arm = int(rng.integers(m))
        x = rng.normal(mu1 if arm == m - 1 and t > nu else 0.0, 1.0)
        s = sums[arm]
        s.append(s[-1] + x)
        cum = np.asarray(s)
        n = len(cum) - 1
        stat = np.max((cum[-1] - cum[:-1]) ** 2 / (2.0 * (n - np.arange(n))))
        if stat >= lam:
            return t
    return None


def test_edd_matches_pure_exploration_oracle():
    # with M=10 the exploration rate is 1 until t - estimate exceeds 1000,
    # so short runs are pure uniform sampling
    m, nu, mu1, lam = 10, 20, 2.0, math.log(3000)
    rng = np.random.default_rng(2)
    delays = []
    for _ in range(600):
        tau = _pure_exploration_delay(rng, m, nu, mu1, lam)
        if tau is not None and tau > nu:
            delays.append(tau - nu)
    oracle_mean = np.mean(delays)
    oracle_se = np.std(delays, ddof=1) / math.sqrt(len(delays))
    s = estimate_edd(TrialConfig(m, nu, mu1, lam, horizon=5000, seed=8), 600)
    assert abs(s.mean - oracle_mean) <= 3 * math.hypot(s.std_error, oracle_se)
