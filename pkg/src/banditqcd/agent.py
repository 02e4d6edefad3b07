"""Decaying-epsilon-FOCuS agent.

One agent watches ``M`` streams but samples only one of them per tick. Each
stream keeps its own FOCuS state; the agent tracks the leading stream (the
largest local GLR statistic) and its change-point estimate, and explores with
a probability that decays with the time elapsed since that estimate.

Streams are indexed ``0 .. M-1``. Random draws within a tick happen in a
fixed order: exploration coin, explored arm (only when exploring),
observation noise (drawn by the caller), tie-break among leaders (only when
several streams share the maximum).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detectors import FocusStreamState

__all__ = [
    "AgentConfig",
    "AgentState",
    "epsilon_schedule",
    "select_stream",
    "agent_step",
    "refresh_leader",
]


@dataclass(frozen=True)
class AgentConfig:
    n_streams: int
    threshold: float
    seed: int = 0

    def __post_init__(self):
        if int(self.n_streams) != self.n_streams or self.n_streams < 1:
            raise ValueError(f"n_streams must be a positive integer, got {self.n_streams!r}")
        if not (self.threshold > 0) or math.isnan(self.threshold):
            raise ValueError(f"threshold must be > 0, got {self.threshold!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


@dataclass
class AgentState:
    """Mutable state of one agent run.

    Build it with :meth:`AgentState.initial`, which seeds the generator and
    draws the initial leader uniformly.
    """

    config: AgentConfig
    rng: np.random.Generator
    streams: list
    stats: list
    pull_counts: list
    leader: int
    t: int = 0
    global_cp_estimate: int = 0
    stopped: bool = False
    declared_stream: int | None = None

    @classmethod
    def initial(cls, config: AgentConfig, rng: np.random.Generator | None = None) -> "AgentState":
        if rng is None:
            rng = np.random.default_rng(int(config.seed))
        m = config.n_streams
        leader = _uniform_index(rng, m)
        return cls(
            config=config,
            rng=rng,
            streams=[FocusStreamState() for _ in range(m)],
            stats=[0.0] * m,
            pull_counts=[0] * m,
            leader=leader,
        )

    @property
    def n_streams(self) -> int:
        return self.config.n_streams

    @property
    def max_stat(self) -> float:
        return self.stats[self.leader]

    def snapshot(self) -> tuple:
        """Hashable summary of the observable state, used to compare runs."""
        return (
            self.t,
            self.leader,
            self.global_cp_estimate,
            self.stopped,
            self.declared_stream,
            tuple(self.pull_counts),
            tuple(self.stats),
            tuple(s.local_cp_estimate for s in self.streams),
        )


def _uniform_index(rng: np.random.Generator, n: int) -> int:
    # floor(n * U) is uniform on 0..n-1 and avoids the overhead of integers()
    return int(n * rng.random())


def epsilon_schedule(t: int, cp_estimate: int, n_streams: int) -> float:
    """Exploration probability ``min(1, M / max(1, t - cp_estimate)**(1/3))``."""
    if cp_estimate > t:
        raise ValueError(f"cp_estimate={cp_estimate} exceeds t={t}")
    gap = t - cp_estimate
    if gap <= 1:
        return 1.0
    return min(1.0, n_streams / gap ** (1.0 / 3.0))


def select_stream(
    state: AgentState,
    rng: np.random.Generator | None = None,
    explore: bool | None = None,
) -> tuple[int, bool]:
    """Choose which stream to sample at the next tick.

    Parameters
    ----------
    state : AgentState
        Agent before the tick. Must not be stopped.
    rng : numpy.random.Generator, optional
        Defaults to the agent's own generator.
    explore : bool, optional
        Force the exploration decision instead of drawing it. The coin is
        not drawn when this is given, so forced runs consume fewer numbers.

    Returns
    -------
    arm : int
        Stream index to sample.
    explored : bool
        Whether the arm was drawn uniformly rather than taken from the leader.
    """
    if state.stopped:
        raise RuntimeError("agent has already stopped")
    rng = state.rng if rng is None else rng
    m = state.config.n_streams
    if explore is None:
        eps = epsilon_schedule(state.t + 1, state.global_cp_estimate, m)
        explore = rng.random() < eps
    if explore:
        return _uniform_index(rng, m), True
    return state.leader, False


def refresh_leader(state: AgentState, rng: np.random.Generator | None = None) -> int:
    """Recompute the leader and global change-point estimate.

    When several streams share the maximal statistic, the leader is drawn
    uniformly among them.
    """
    stats = state.stats
    top = max(stats)
    if stats.count(top) > 1:
        rng = state.rng if rng is None else rng
        ties = [i for i, v in enumerate(stats) if v == top]
        leader = ties[_uniform_index(rng, len(ties))]
    else:
        leader = stats.index(top)
    state.leader = leader
    state.global_cp_estimate = state.streams[leader].local_cp_estimate
    return leader


def agent_step(
    state: AgentState,
    x: float,
    arm: int,
    rng: np.random.Generator | None = None,
) -> AgentState:
    """Feed observation ``x`` from stream ``arm`` and advance the clock.

    Updates ``state`` in place and returns it. Sets ``stopped`` and
    ``declared_stream`` once the largest local statistic reaches the
    threshold.
    """
    if state.stopped:
        raise RuntimeError("agent has already stopped")
    if not 0 <= arm < state.config.n_streams:
        raise IndexError(f"arm {arm} out of range for {state.config.n_streams} streams")
    if not math.isfinite(x):
        raise ValueError(f"observation must be finite, got {x!r}")
    t = state.t + 1
    stream = state.streams[arm].update(x, t)
    state.t = t
    state.pull_counts[arm] += 1
    state.stats[arm] = stream.stat
    refresh_leader(state, rng)
    if state.stats[state.leader] >= state.config.threshold:
        state.stopped = True
        state.declared_stream = state.leader
    return state
