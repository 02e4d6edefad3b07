"""Threshold calibration from the run-length bound for the multi-stream GLR.

The bound reads ``ARL >= exp(lam) / (M * sqrt(lam) * C)`` with

    C = integral_0^inf x g(x)^2 dx / sqrt(pi),
    g(x) = 2 x^-2 exp(-2 sum_{n>=1} Phi(-x sqrt(n) / 2) / n),

``g`` being Siegmund's overshoot function. Dropping the ``sqrt(lam)`` factor
gives the threshold rule ``lam = log(C * M * gamma)``.

The integral is split into three pieces:

* ``(0, x_lo]``: the series needs ~1/x^2 terms there, so ``g`` is replaced
  by its small-x form ``exp(-rho x)`` with ``rho = -zeta(1/2) / sqrt(2 pi)``,
  integrated in closed form. The mismatch at ``x_lo`` bounds the error.
* ``[x_lo, x_hi]``: composite Simpson in ``u = log x``, refined by halving
  the step until the Richardson estimate is small.
* ``[x_hi, inf)``: the series is below 1e-50 for ``x >= 30``, so
  ``g = 2 / x^2`` and the piece is ``2 / x_hi^2`` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, zeta

__all__ = [
    "NumericalError",
    "CalibrationResult",
    "g_function",
    "compute_c_constant",
    "arl_lower_bound",
    "calibrate_threshold",
    "calibrate",
]

X_LO = 1e-2
X_HI = 30.0
TERM_CAP = 10_000_000
SERIES_TOL = 1e-13
_CHUNK = 1 << 16

# g(x) = exp(-RHO * x + O(x^2)) as x -> 0
RHO = float(-zeta(0.5) / math.sqrt(2.0 * math.pi))


class NumericalError(ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""


@dataclass(frozen=True)
class CalibrationResult:
    c_constant: float
    threshold: float
    target_arl: float
    n_streams: int
    quadrature_error_estimate: float


def _overshoot_series(x: float, term_cap: int = TERM_CAP, tol: float = SERIES_TOL) -> float:
    """``sum_{n>=1} Phi(-x sqrt(n) / 2) / n``, summed in vectorised chunks.

    Stops once a geometric bound on the remaining tail drops below ``tol``
    (which also implies the last increment is below ``tol``), or after
    ``term_cap`` terms.
    """
    a = 0.5 * x
    ratio = math.exp(-0.5 * a * a)
    total = 0.0
    start = 1
    while start <= term_cap:
        stop = min(start + _CHUNK, term_cap + 1)
        n = np.arange(start, stop, dtype=float)
        total += float(np.sum(ndtr(-a * np.sqrt(n)) / n))
        # Phi(-z) <= exp(-z^2 / 2) / 2, summed as a geometric series
        tail = math.exp(-0.5 * a * a * stop) / (2.0 * stop * (1.0 - ratio))
        if tail < tol:
            break
        start = stop
    return total


def g_function(x: float, term_cap: int = TERM_CAP) -> float:
    """Siegmund's overshoot function ``g(x)`` for ``x > 0``."""
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise ValueError(f"g is defined for finite x > 0, got {x!r}")
    return 2.0 / (x * x) * math.exp(-2.0 * _overshoot_series(x, term_cap))


def _lower_piece(x_lo: float) -> tuple[float, float]:
    # integral_0^x_lo x exp(-2 rho x) dx
    k = 2.0 * RHO
    value = (1.0 - math.exp(-k * x_lo) * (1.0 + k * x_lo)) / (k * k)
    # relative mismatch of g^2 at x_lo grows like x^2, so it bounds the piece
    mismatch = abs(g_function(x_lo) ** 2 - math.exp(-k * x_lo)) / math.exp(-k * x_lo)
    return value, mismatch * value


class _Integrand:
    """``x^2 g(x)^2`` on a log grid, memoised so refinements reuse values."""

    def __init__(self):
        self._cache = {}

    def __call__(self, u: float) -> float:
        val = self._cache.get(u)
        if val is None:
            x = math.exp(u)
            val = (x * g_function(x)) ** 2
            self._cache[u] = val
        return val


def _simpson_log(f: _Integrand, u_lo: float, u_hi: float, n: int) -> float:
    h = (u_hi - u_lo) / n
    total = f(u_lo) + f(u_hi)
    for i in range(1, n):
        total += (4.0 if i % 2 else 2.0) * f(u_lo + i * h)
    return total * h / 3.0


def _middle_piece(x_lo, x_hi, n_start, rel_tol, max_doublings):
    f = _Integrand()
    u_lo, u_hi = math.log(x_lo), math.log(x_hi)
    n = n_start
    prev = _simpson_log(f, u_lo, u_hi, n)
    for _ in range(max_doublings):
        n *= 2
        cur = _simpson_log(f, u_lo, u_hi, n)
        err = abs(cur - prev) / 15.0
        if err <= rel_tol * abs(cur):
            return cur, err, n
        prev = cur
    if abs(cur - prev) > 1e-4 * abs(cur):
        raise NumericalError(
            f"quadrature did not converge: relative change {abs(cur - prev) / abs(cur):.3g} "
            f"after {n} intervals"
        )
    return cur, abs(cur - prev) / 15.0, n


def _c_constant(x_lo=X_LO, x_hi=X_HI, n_start=32, rel_tol=1e-12, max_doublings=6):
    lower, lower_err = _lower_piece(x_lo)
    middle, middle_err, _ = _middle_piece(x_lo, x_hi, n_start, rel_tol, max_doublings)
    upper = 2.0 / (x_hi * x_hi)
    root_pi = math.sqrt(math.pi)
    c = (lower + middle + upper) / root_pi
    err = (lower_err + middle_err) / root_pi
    return c, err


@lru_cache(maxsize=None)
def compute_c_constant(x_lo: float = X_LO, x_hi: float = X_HI, n_start: int = 32) -> tuple[float, float]:
    """The constant ``C`` and an estimate of its absolute error.

    ``n_start`` is the initial number of Simpson intervals; the step is
    halved until the Richardson estimate falls below 1e-12 relative.
    Results are cached per argument set.
    """
    return _c_constant(x_lo, x_hi, n_start)


def arl_lower_bound(lam: float, n_streams: int, c: float) -> float:
    """Run-length lower bound ``exp(lam) / (M sqrt(lam) C)``."""
    if not lam > 0:
        raise ValueError(f"lam must be > 0, got {lam!r}")
    if n_streams < 1 or not c > 0:
        raise ValueError("need n_streams >= 1 and c > 0")
    try:
        num = math.exp(lam)
    except OverflowError:
        raise OverflowError(f"exp({lam}) overflows a double") from None
    return num / (n_streams * math.sqrt(lam) * c)


def calibrate_threshold(gamma: float, n_streams: int, c: float) -> float:
    """Threshold ``log(C * M * gamma)`` targeting an ARL of at least ``gamma``."""
    arg = c * n_streams * gamma
    if not arg > 0 or not math.isfinite(arg):
        raise ValueError(f"C * M * gamma must be positive and finite, got {arg!r}")
    lam = math.log(arg)
    if not lam > 0:
        raise ValueError(f"gamma={gamma} too small: log(C M gamma) = {lam:.4g} is not positive")
    return lam


def calibrate(gamma: float, n_streams: int) -> CalibrationResult:
    """Compute ``C`` and the matching threshold for a target ARL."""
    c, err = compute_c_constant()
    lam = calibrate_threshold(gamma, n_streams, c)
    return CalibrationResult(c, lam, float(gamma), int(n_streams), err)
