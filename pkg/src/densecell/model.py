"""Piecewise probabilistic LoS/NLoS path loss model and network presets.

Distances are in km and powers in mW everywhere inside the package. Gains
``a_los``/``a_nlos`` on a :class:`PathLossSegment` are referenced to 1 km, so
``path_gain(r) = a * r**-alpha`` with ``r`` in km. The 3GPP field-test constants
(41.1 dB / 32.9 dB) are quoted at 1 m and are rescaled by the preset builders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from densecell.errors import DomainError, ParameterError

#: Reference distance of the dB gain constants accepted at the config boundary.
REFERENCE_DISTANCE_KM = 1e-3

CASE1_D1_KM = 0.3
CASE1_ALPHA_LOS = 2.09
CASE1_ALPHA_NLOS = 3.75
CASE1_A_LOS_DB = -41.1
CASE1_A_NLOS_DB = -32.9
CASE1_TX_POWER_DBM = 24.0
CASE1_NOISE_DBM = -95.0


def dbm_to_mw(dbm):
    return 10.0 ** (dbm / 10.0)


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def gain_at_1km(a_ref, alpha, ref_km=REFERENCE_DISTANCE_KM):
    """Rescale a gain quoted at ``ref_km`` to the 1 km reference used internally."""
    return a_ref * ref_km**alpha


@dataclass(frozen=True)
class Linear3gpp:
    """LoS probability ``1 - r/d1`` for ``r <= d1`` and 0 beyond."""

    d1: float

    def __post_init__(self):
        if not self.d1 > 0:
            raise ParameterError(f"d1 must be positive, got {self.d1}")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.d1, np.clip(1.0 - r / self.d1, 0.0, 1.0), 0.0)


@dataclass(frozen=True)
class Constant:
    """Distance-independent LoS probability."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ParameterError(f"LoS probability must lie in [0, 1], got {self.p}")

    def __call__(self, r):
        return np.full(np.shape(r), float(self.p))


LosProbabilityFn = Union[Linear3gpp, Constant]


@dataclass(frozen=True)
class PathLossSegment:
    """One piece of the path loss law, valid for ``d_lo < r <= d_hi``."""

    d_lo: float
    d_hi: float
    a_los: float
    alpha_los: float
    a_nlos: float
    alpha_nlos: float
    los_prob: LosProbabilityFn

    def __post_init__(self):
        for name in ("a_los", "alpha_los", "a_nlos", "alpha_nlos"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.d_lo < self.d_hi:
            raise ParameterError(f"segment bounds must satisfy d_lo < d_hi, got ({self.d_lo}, {self.d_hi})")

    @property
    def has_los(self):
        return not (isinstance(self.los_prob, Constant) and self.los_prob.p == 0.0)

    @property
    def has_nlos(self):
        return not (isinstance(self.los_prob, Constant) and self.los_prob.p == 1.0)


@dataclass(frozen=True)
class PathLossModel:
    """Ordered segments tiling ``(0, inf)``."""

    segments: tuple

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ParameterError("a path loss model needs at least one segment")
        if segs[0].d_lo != 0.0:
            raise ParameterError("first segment must start at 0")
        if segs[-1].d_hi != math.inf:
            raise ParameterError("last segment must be unbounded")
        for left, right in zip(segs, segs[1:]):
            if left.d_hi != right.d_lo:
                raise ParameterError(f"segments do not tile: {left.d_hi} != {right.d_lo}")

    @property
    def n_segments(self):
        return len(self.segments)

    @cached_property
    def inner_boundaries(self):
        """Boundaries ``d_1 .. d_{N-1}`` as an array."""
        return np.array([s.d_hi for s in self.segments[:-1]], dtype=float)

    @cached_property
    def _law_table(self):
        return np.array(
            [[s.a_los, s.alpha_los, s.a_nlos, s.alpha_nlos] for s in self.segments], dtype=float
        )

    def segment_index(self, r):
        """Index of the segment containing each ``r`` (``d_lo < r <= d_hi``)."""
        r = _check_positive(r)
        return np.searchsorted(self.inner_boundaries, r, side="left")

    def law(self, r, los):
        """Return ``(a, alpha)`` arrays of the branch selected by ``los`` at ``r``."""
        idx = self.segment_index(r)
        table = self._law_table[idx]
        los = np.broadcast_to(np.asarray(los, dtype=bool), np.shape(idx))
        a = np.where(los, table[..., 0], table[..., 2])
        alpha = np.where(los, table[..., 1], table[..., 3])
        return a, alpha


@dataclass(frozen=True)
class NetworkEnvironment:
    tx_power: float
    noise_power: float
    model: PathLossModel

    def __post_init__(self):
        if not self.tx_power > 0:
            raise ParameterError(f"tx_power must be positive, got {self.tx_power}")
        if not self.noise_power >= 0:
            raise ParameterError(f"noise_power must be non-negative, got {self.noise_power}")


def _check_positive(r):
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise DomainError("distance must be positive")
    return r


def _scalarize(x, like):
    return float(x) if np.ndim(like) == 0 else x


def path_gain(model, r, los):
    """Linear gain ``A r^-alpha`` of the LoS (``los=True``) or NLoS branch."""
    a, alpha = model.law(r, los)
    value = a * np.asarray(r, dtype=float) ** -alpha
    return _scalarize(value, r)


def los_probability(model, r):
    r_arr = _check_positive(r)
    idx = model.segment_index(r_arr)
    out = np.zeros(r_arr.shape)
    for k, seg in enumerate(model.segments):
        mask = idx == k
        if np.any(mask):
            out[mask] = seg.los_prob(r_arr[mask])
    return _scalarize(out, r)


def case1_environment(d1_km, alpha_los, alpha_nlos, a_los_db, a_nlos_db, tx_power_dbm, noise_dbm):
    """Two-segment linear-LoS environment from 1 m-referenced dB constants."""
    a_los = gain_at_1km(db_to_linear(a_los_db), alpha_los)
    a_nlos = gain_at_1km(db_to_linear(a_nlos_db), alpha_nlos)
    laws = dict(a_los=a_los, alpha_los=alpha_los, a_nlos=a_nlos, alpha_nlos=alpha_nlos)
    model = PathLossModel(
        (
            PathLossSegment(0.0, d1_km, los_prob=Linear3gpp(d1_km), **laws),
            PathLossSegment(d1_km, math.inf, los_prob=Constant(0.0), **laws),
        )
    )
    return NetworkEnvironment(dbm_to_mw(tx_power_dbm), dbm_to_mw(noise_dbm), model)


def single_slope_environment(alpha, a_db, tx_power_dbm, noise_dbm):
    """Single-slope NLoS-only environment from a 1 m-referenced dB gain."""
    return preset_single_slope(alpha, db_to_linear(a_db), (dbm_to_mw(tx_power_dbm), dbm_to_mw(noise_dbm)))


def preset_3gpp_case1():
    """The 3GPP Case 1 environment (d1 = 0.3 km, 24 dBm, -95 dBm noise)."""
    return case1_environment(
        CASE1_D1_KM,
        CASE1_ALPHA_LOS,
        CASE1_ALPHA_NLOS,
        CASE1_A_LOS_DB,
        CASE1_A_NLOS_DB,
        CASE1_TX_POWER_DBM,
        CASE1_NOISE_DBM,
    )


def preset_single_slope(alpha, a, env_powers=None, ref_km=REFERENCE_DISTANCE_KM):
    """NLoS-only single-slope model ``a (r/ref)^-alpha`` on one unbounded segment.

    ``env_powers`` is ``(tx_power_mw, noise_power_mw)``; defaults to the
    3GPP Case 1 powers. The LoS branch mirrors the NLoS law but is never used
    since the LoS probability is identically zero.
    """
    if not alpha > 2:
        raise ParameterError(f"single-slope exponent must exceed 2 for finite interference, got {alpha}")
    if env_powers is None:
        env_powers = (dbm_to_mw(CASE1_TX_POWER_DBM), dbm_to_mw(CASE1_NOISE_DBM))
    tx_power, noise_power = env_powers
    a_km = gain_at_1km(a, alpha, ref_km)
    seg = PathLossSegment(0.0, math.inf, a_km, alpha, a_km, alpha, Constant(0.0))
    return NetworkEnvironment(tx_power, noise_power, PathLossModel((seg,)))


def is_case1(model):
    """True when ``model`` has the two-segment linear-LoS shape the closed forms assume."""
    if model.n_segments != 2:
        return False
    s1, s2 = model.segments
    return (
        isinstance(s1.los_prob, Linear3gpp)
        and s1.los_prob.d1 == s1.d_hi
        and isinstance(s2.los_prob, Constant)
        and s2.los_prob.p == 0.0
        and (s1.a_los, s1.alpha_los, s1.a_nlos, s1.alpha_nlos)
        == (s2.a_los, s2.alpha_los, s2.a_nlos, s2.alpha_nlos)
    )


def check_finite_interference(model):
    """Raise if the aggregate interference integral diverges for this model."""
    last = model.segments[-1]
    if last.has_nlos and last.alpha_nlos <= 2:
        raise ParameterError(
            f"NLoS exponent {last.alpha_nlos} <= 2 on the unbounded segment: interference diverges"
        )
    los_reaches_infinity = last.has_los and not (
        isinstance(last.los_prob, Linear3gpp) and last.los_prob.d1 <= last.d_lo
    )
    if los_reaches_infinity and last.alpha_los <= 2:
        raise ParameterError(
            f"LoS exponent {last.alpha_los} <= 2 on the unbounded segment: interference diverges"
        )


def tail_exponent(model):
    """Smallest path loss exponent carrying weight on the unbounded segment."""
    check_finite_interference(model)
    last = model.segments[-1]
    alphas = []
    if last.has_nlos:
        alphas.append(last.alpha_nlos)
    if last.has_los and not (isinstance(last.los_prob, Linear3gpp) and last.los_prob.d1 <= last.d_lo):
        alphas.append(last.alpha_los)
    return min(alphas)
