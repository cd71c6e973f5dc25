"""Density thresholds of the densification regimes.

``lambda0`` is the density where the coverage probability peaks and
``lambda1`` the density where ASE growth becomes near-linear again.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from densecell.analytic import ase, coverage_values
from densecell.errors import BracketingError, DomainError, NotFoundError, ToleranceError

DEFAULT_BRACKET = (1.0, 100.0)
DEFAULT_STEP = 0.01
DEFAULT_REL_WIDTH = 0.005
DEFAULT_SLOPE_THRESHOLD = 0.9


@dataclass(frozen=True)
class ThresholdReport:
    lambda0: float
    gamma: float
    bracket: tuple
    iterations: int
    derivative_residual: float


@dataclass(frozen=True)
class Lambda1Report:
    lambda1: float
    gamma0: float
    lambda0: float
    slope_threshold: float
    grid: tuple = field(default_factory=tuple)
    ase: tuple = field(default_factory=tuple)
    slopes: tuple = field(default_factory=tuple)


def coverage_log_derivative(env, lam, gamma, h=DEFAULT_STEP, method="auto"):
    """Central difference of ``p_cov`` in ``ln(lambda)`` with step ``h``.

    Returns ``(derivative, noise_floor)``; the floor is the derivative error implied
    by the quadrature error estimates.
    """
    lo, hi = lam * math.exp(-h), lam * math.exp(h)
    p_hi, e_hi = coverage_values(env, hi, [gamma], method)
    p_lo, e_lo = coverage_values(env, lo, [gamma], method)
    deriv = (p_hi[0] - p_lo[0]) / (2.0 * h)
    floor = (e_hi[0] + e_lo[0]) / (2.0 * h)
    return float(deriv), float(floor)


def find_lambda0(env, gamma, bracket=DEFAULT_BRACKET, h=DEFAULT_STEP, rel_width=DEFAULT_REL_WIDTH,
                 method="auto", max_iter=100):
    """Bisect for the coverage peak: the zero of ``d p_cov / d ln(lambda)``.

    The search stops once ``hi/lo - 1 <= rel_width`` and returns the geometric
    midpoint.
    """
    lo, hi = (float(b) for b in bracket)
    if not 0 < lo < hi:
        raise DomainError(f"bracket must satisfy 0 < lo < hi, got {bracket}")
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    g_lo, f_lo = coverage_log_derivative(env, lo, gamma, h, method)
    g_hi, f_hi = coverage_log_derivative(env, hi, gamma, h, method)
    if abs(g_lo) <= f_lo and abs(g_hi) <= f_hi:
        raise ToleranceError(
            f"coverage derivative is within its noise floor at both ends of {bracket}",
            estimate=math.sqrt(lo * hi),
        )
    if np.sign(g_lo) == np.sign(g_hi):
        raise BracketingError(
            f"coverage derivative does not change sign on {bracket} ({g_lo:.3g}, {g_hi:.3g})"
        )
    iterations = 0
    g_mid = g_lo
    while hi / lo - 1.0 > rel_width:
        if iterations >= max_iter:
            raise ToleranceError("bisection did not reach the requested width", estimate=math.sqrt(lo * hi))
        mid = math.sqrt(lo * hi)
        g_mid, _ = coverage_log_derivative(env, mid, gamma, h, method)
        iterations += 1
        if np.sign(g_mid) == np.sign(g_lo):
            lo, g_lo = mid, g_mid
        else:
            hi, g_hi = mid, g_mid
    lam0 = math.sqrt(lo * hi)
    return ThresholdReport(lam0, float(gamma), (lo, hi), iterations, abs(g_mid))


def _ase_value(env, gamma0, method, lam):
    return ase(env, lam, gamma0, method).value


def ase_profile(env, gamma0, grid, method="auto", workers=1):
    """ASE at every grid density, in grid order."""
    fn = partial(_ase_value, env, gamma0, method)
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            return np.array(list(ex.map(fn, grid)))
    return np.array([fn(lam) for lam in grid])


def log_log_slopes(grid, values):
    """Local ``d ln(values) / d ln(grid)``: central inside, one-sided at the ends."""
    return np.gradient(np.log(values), np.log(grid))


def find_lambda1(env, gamma0, grid, slope_threshold=DEFAULT_SLOPE_THRESHOLD, lambda0=None,
                 method="auto", workers=1):
    """Smallest grid density above ``lambda0`` from which the log-log ASE slope stays
    at or above ``slope_threshold``.

    Without ``lambda0`` the coverage peak at ``gamma0`` is searched first; a model
    whose coverage has no interior peak (the single-slope baseline) uses 0.
    Raises :class:`NotFoundError` carrying the slope profile when no grid point
    qualifies.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3 or np.any(~(grid > 0)) or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must hold at least 3 strictly increasing positive densities")
    if lambda0 is None:
        try:
            lambda0 = find_lambda0(env, gamma0, method=method).lambda0
        except BracketingError:
            lambda0 = 0.0
    values = ase_profile(env, gamma0, grid, method, workers)
    slopes = log_log_slopes(grid, values)
    ok = slopes >= slope_threshold
    # suffix_ok[i]: every slope from i onward meets the threshold
    suffix_ok = np.logical_and.accumulate(ok[::-1])[::-1]
    candidates = np.nonzero(suffix_ok & (grid > lambda0))[0]
    profile = tuple(zip(grid.tolist(), values.tolist(), slopes.tolist()))
    if candidates.size == 0:
        raise NotFoundError(
            f"log-log ASE slope never settles above {slope_threshold} on the grid", profile=profile
        )
    return Lambda1Report(
        float(grid[candidates[0]]),
        float(gamma0),
        float(lambda0),
        float(slope_threshold),
        tuple(grid.tolist()),
        tuple(values.tolist()),
        tuple(slopes.tolist()),
    )
