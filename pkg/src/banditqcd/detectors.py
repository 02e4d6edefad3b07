"""Single-stream change detectors for a Gaussian mean shift with unit variance.

Three detectors live here:

* :class:`CusumState` - CUSUM with a known post-change mean, updated by the
  constant-time recursion.
* :func:`glr_stat_bruteforce` - the two-sided GLR statistic evaluated by
  scanning every candidate start. O(n) per call; used as the oracle.
* :class:`FocusStreamState` - the same GLR statistic maintained online by
  functional pruning (FOCuS), with an O(log t) expected candidate set.

The pre-change mean is fixed at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "Candidate",
    "CusumState",
    "FocusStreamState",
    "cusum_update",
    "cusum_stat_maxform",
    "glr_stat_bruteforce",
    "focus_update",
    "focus_candidate_count",
]


def _check_finite(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"observation must be finite, got {x!r}")
    return x


# ---------------------------------------------------------------------------
# CUSUM
# ---------------------------------------------------------------------------


@dataclass
class CusumState:
    """CUSUM statistic for a shift from N(0, 1) to N(mu1, 1)."""

    mu1: float
    stat: float = 0.0
    n_obs: int = 0

    def __post_init__(self):
        if self.mu1 == 0 or not math.isfinite(self.mu1):
            raise ValueError("mu1 must be finite and non-zero")

    def llr(self, x: float) -> float:
        return self.mu1 * x - 0.5 * self.mu1 * self.mu1

    def update(self, x: float) -> "CusumState":
        x = _check_finite(x)
        self.stat = max(self.llr(x) + self.stat, 0.0)
        self.n_obs += 1
        return self


def cusum_update(state: CusumState, x: float) -> CusumState:
    """Advance ``state`` by one observation in place and return it."""
    return state.update(x)


def cusum_stat_maxform(xs: Sequence[float], mu1: float) -> float:
    """CUSUM statistic recomputed from scratch as a max over partial sums.

    Evaluates ``sum_{i>k} llr(x_i)`` for every start ``k`` in ``0..n``
    (``k = n`` is the empty sum, so the result is never negative).
    """
    arr = np.asarray(xs, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("observations must be finite")
    llr = mu1 * arr - 0.5 * mu1 * mu1
    partial = np.concatenate(([0.0], np.cumsum(llr)))
    return float(np.max(partial[-1] - partial))


# ---------------------------------------------------------------------------
# GLR oracle
# ---------------------------------------------------------------------------


def glr_stat_bruteforce(xs: Sequence[float]) -> tuple[float, int]:
    """Two-sided Gaussian GLR statistic by exhaustive search.

    Returns ``max_k (sum(xs[k:]))**2 / (2 * (n - k))`` over ``0 <= k < n``
    together with the maximising ``k`` (smallest on ties). An empty input
    gives ``(0.0, 0)``.
    """
    values = [_check_finite(x) for x in xs]
    n = len(values)
    best, best_k = 0.0, 0
    tail = 0.0
    # walk k downwards so the tail sum is built incrementally; ">=" keeps the
    # smallest k on ties
    for k in range(n - 1, -1, -1):
        tail += values[k]
        val = tail * tail / (2.0 * (n - k))
        if val >= best:
            best, best_k = val, k
    return best, best_k


# ---------------------------------------------------------------------------
# FOCuS
# ---------------------------------------------------------------------------


class Candidate(NamedTuple):
    """A potential change start kept by the pruning step.

    ``boundary`` is the smallest |mu| (on the candidate's side) at which this
    candidate beats its predecessor in the list.
    """

    n_start: int
    s_start: float
    boundary: float
    start_time: int


_SENTINEL = Candidate(0, 0.0, 0.0, 0)


@dataclass
class FocusStreamState:
    """Running FOCuS state for one stream.

    Attributes
    ----------
    n_obs : int
        Number of observations received by this stream.
    sum : float
        Running sum of those observations.
    pos, neg : list of Candidate
        Candidates that are optimal for some positive (resp. negative) mean.
        Both lists start with the sentinel ``(0, 0.0, 0.0, 0)``.
    stat : float
        Current GLR statistic over this stream's history.
    local_cp_estimate : int
        Global time at which the maximising segment's start was recorded.
    cp_index : int
        Same estimate in units of this stream's own observation count.
    last_time : int
        Global time of the most recent observation (0 before any).
    """

    n_obs: int = 0
    sum: float = 0.0
    pos: list = field(default_factory=lambda: [_SENTINEL])
    neg: list = field(default_factory=lambda: [_SENTINEL])
    stat: float = 0.0
    local_cp_estimate: int = 0
    cp_index: int = 0
    last_time: int = 0

    def update(self, x: float, t: int) -> "FocusStreamState":
        """Absorb observation ``x`` made at global time ``t``."""
        if not math.isfinite(x):
            raise ValueError(f"observation must be finite, got {x!r}")
        if t <= self.last_time:
            raise RuntimeError(
                f"time must increase: got t={t} after t={self.last_time}"
            )
        n = self.n_obs + 1
        s = self.sum + x
        self.n_obs, self.sum, self.last_time = n, s, t

        # positive side: the newest candidate wins for large mu, so dominated
        # candidates are always at the tail
        pos = self.pos
        while True:
            last = pos[-1]
            mu = 2.0 * (s - last.s_start) / (n - last.n_start)
            if len(pos) == 1:
                bound = mu if mu > last.boundary else last.boundary
                break
            if mu <= last.boundary:
                pos.pop()
            else:
                bound = mu
                break
        pos.append(Candidate(n, s, bound, t))

        neg = self.neg
        while True:
            last = neg[-1]
            mu = 2.0 * (s - last.s_start) / (n - last.n_start)
            if len(neg) == 1:
                bound = mu if mu < last.boundary else last.boundary
                break
            if mu >= last.boundary:
                neg.pop()
            else:
                bound = mu
                break
        neg.append(Candidate(n, s, bound, t))

        best, best_n, best_time = 0.0, 0, 0
        for side in (pos, neg):
            # the last entry of each side is the zero-length segment
            for c in side[:-1]:
                d = s - c.s_start
                val = d * d / (2.0 * (n - c.n_start))
                if val > best or (val == best and c.n_start < best_n):
                    best, best_n, best_time = val, c.n_start, c.start_time
        self.stat = best
        self.cp_index = best_n
        self.local_cp_estimate = best_time
        return self

    def candidate_count(self) -> int:
        return len(self.pos) + len(self.neg)


def focus_update(state: FocusStreamState, x: float, t: int) -> FocusStreamState:
    """Advance ``state`` by observation ``x`` at global time ``t``, in place."""
    return state.update(x, t)


def focus_candidate_count(state: FocusStreamState) -> int:
    return state.candidate_count()
