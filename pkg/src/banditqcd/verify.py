"""Randomised self-checks of the detectors against exhaustive oracles.

Used by the ``verify`` command and by the test-suite. Each check returns a
:class:`CheckResult`; none of them raise on a mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detectors import CusumState, FocusStreamState, cusum_stat_maxform

__all__ = [
    "CheckResult",
    "glr_prefix_stats",
    "cusum_prefix_stats",
    "random_sequence",
    "check_focus_oracle",
    "check_cusum_maxform",
    "check_sign_symmetry",
]

TOL = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    cases: int
    comparisons: int
    max_abs_error: float

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{self.name}: {verdict} ({self.cases} cases, {self.comparisons} comparisons, "
            f"max |err| {self.max_abs_error:.3g})"
        )


def glr_prefix_stats(xs) -> tuple[np.ndarray, np.ndarray]:
    """GLR statistic and maximising start for every prefix of ``xs``.

    Builds the full ``(n, n)`` table of segment statistics, so it is meant
    for sequences of a few hundred points.
    """
    x = np.asarray(xs, dtype=float)
    n = x.size
    if n == 0:
        return np.zeros(0), np.zeros(0, dtype=int)
    cum = np.concatenate(([0.0], np.cumsum(x)))
    end = np.arange(1, n + 1)[:, None]
    start = np.arange(n)[None, :]
    length = end - start
    with np.errstate(divide="ignore", invalid="ignore"):
        table = (cum[end] - cum[start]) ** 2 / (2.0 * length)
    table = np.where(length > 0, table, -np.inf)
    # argmax returns the first (smallest k) maximiser
    return table.max(axis=1), table.argmax(axis=1)


def cusum_prefix_stats(xs, mu1: float) -> np.ndarray:
    """CUSUM max-form statistic for every prefix, from a full table of sums."""
    x = np.asarray(xs, dtype=float)
    n = x.size
    cum = np.concatenate(([0.0], np.cumsum(mu1 * x - 0.5 * mu1 * mu1)))
    end = np.arange(1, n + 1)[:, None]
    start = np.arange(n + 1)[None, :]
    table = np.where(start <= end, cum[end] - cum[np.minimum(start, n)], -np.inf)
    return table.max(axis=1)


def random_sequence(rng: np.random.Generator, max_len: int) -> np.ndarray:
    """Gaussian sequence with random length, level, scale and an optional shift."""
    n = int(rng.integers(1, max_len + 1))
    x = rng.normal(rng.normal(0.0, 0.5), rng.uniform(0.5, 2.0), size=n)
    if n > 1 and rng.random() < 0.5:
        cp = int(rng.integers(1, n))
        x[cp:] += rng.normal(0.0, 2.0)
    return x


def check_focus_oracle(cases: int = 1000, max_len: int = 300, seed: int = 0, tol: float = TOL) -> CheckResult:
    """FOCuS statistic versus the exhaustive GLR at every prefix."""
    rng = np.random.default_rng(seed)
    worst, comparisons, passed = 0.0, 0, True
    for _ in range(cases):
        x = random_sequence(rng, max_len)
        expected, _ = glr_prefix_stats(x)
        state = FocusStreamState()
        for i, xi in enumerate(x.tolist()):
            state.update(xi, i + 1)
            err = abs(state.stat - expected[i])
            worst = max(worst, err)
            if err > tol:
                passed = False
        comparisons += x.size
    return CheckResult("FOCuS ≡ GLR oracle", passed, cases, comparisons, worst)


def check_cusum_maxform(cases: int = 1000, max_len: int = 300, seed: int = 0, tol: float = TOL) -> CheckResult:
    """CUSUM recursion versus the max-over-partial-sums form at every prefix."""
    rng = np.random.default_rng(seed)
    worst, comparisons, passed = 0.0, 0, True
    for _ in range(cases):
        x = random_sequence(rng, max_len)
        mu1 = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 2.0))
        expected = cusum_prefix_stats(x, mu1)
        state = CusumState(mu1)
        recursed = np.empty(x.size)
        for i, xi in enumerate(x.tolist()):
            recursed[i] = state.update(xi).stat
        errs = np.abs(recursed - expected)
        final_err = abs(state.stat - cusum_stat_maxform(x, mu1))
        worst = max(worst, float(errs.max()), final_err)
        comparisons += x.size
        if errs.max() > tol or final_err > tol:
            passed = False
    return CheckResult("CUSUM recursion ≡ max-form", passed, cases, comparisons, worst)


def check_sign_symmetry(cases: int = 200, max_len: int = 300, seed: int = 0) -> CheckResult:
    """FOCuS trajectories on ``xs`` and ``-xs`` must coincide exactly."""
    rng = np.random.default_rng(seed)
    worst, comparisons, passed = 0.0, 0, True
    for _ in range(cases):
        x = random_sequence(rng, max_len)
        a, b = FocusStreamState(), FocusStreamState()
        for i, xi in enumerate(x.tolist()):
            a.update(xi, i + 1)
            b.update(-xi, i + 1)
            err = abs(a.stat - b.stat)
            worst = max(worst, err)
            if err != 0.0:
                passed = False
        comparisons += x.size
    return CheckResult("FOCuS sign symmetry", passed, cases, comparisons, worst)
