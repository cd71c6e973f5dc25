"""Vectorised adaptive Gauss-Kronrod (G10/K21) quadrature.

Many independent integrals ("owners") are refined together so that nested
integrals, where every outer node needs its own inner integral, stay inside
numpy. Intervals must be finite; callers map infinite tails with
:func:`rational_tail` or :func:`power_tail`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from densecell.errors import NumericalError

# QUADPACK qk21 abscissae (positive half, descending) and weights.
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600629540265,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(21)
GAUSS_WEIGHTS[1:10:2] = _WG
GAUSS_WEIGHTS[11:20:2] = _WG[::-1]

_EPS = np.finfo(float).eps


@dataclass
class BatchResult:
    value: np.ndarray
    error: np.ndarray
    converged: np.ndarray
    n_intervals: np.ndarray


def _gk21(f, lo, hi, owner):
    half = 0.5 * (hi - lo)
    center = 0.5 * (hi + lo)
    x = center[:, None] + half[:, None] * NODES[None, :]
    fx = np.asarray(f(x, owner), dtype=float)
    if fx.shape != x.shape:
        fx = np.broadcast_to(fx, x.shape)
    kron = fx @ KRONROD_WEIGHTS
    gauss = fx @ GAUSS_WEIGHTS
    mean = 0.5 * kron
    resasc = np.abs(fx - mean[:, None]) @ KRONROD_WEIGHTS
    resabs = np.abs(fx) @ KRONROD_WEIGHTS
    err = np.abs(kron - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc != 0) & (err != 0), scaled, err)
    roundoff = 50.0 * _EPS * resabs
    err = np.where(resabs > np.finfo(float).tiny / (50 * _EPS), np.maximum(err, roundoff), err)
    ahalf = np.abs(half)
    return kron * half, err * ahalf, roundoff * ahalf


def integrate_batch(f, lo, hi, owner, n_owners, abs_tol=1e-10, rel_tol=1e-10, max_rounds=60,
                    max_intervals=4000):
    """Integrate ``n_owners`` functions over unions of finite intervals.

    ``f(x, owner)`` receives nodes ``x`` of shape ``(m, 21)`` and the owner index
    of each row, shape ``(m,)``, and returns values of shape ``(m, 21)``.
    ``lo``/``hi``/``owner`` list the initial intervals; an owner's integral is the
    sum over its intervals. Refinement bisects, per unfinished owner, every
    interval whose error exceeds the mean allowance ``max(abs_tol, rel_tol*|I|)/n``
    plus the owner's worst interval; intervals at round-off level are left alone.
    """
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    owner = np.asarray(owner, dtype=np.intp).ravel()
    abs_tol = np.broadcast_to(np.asarray(abs_tol, dtype=float), (n_owners,))

    val, err, floor = _gk21(f, lo, hi, owner)
    converged = np.zeros(n_owners, dtype=bool)
    done_val = np.zeros(n_owners)
    done_err = np.zeros(n_owners)

    def retire(mask):
        nonlocal lo, hi, owner, val, err, floor
        done_val[:] += np.bincount(owner[mask], weights=val[mask], minlength=n_owners)
        done_err[:] += np.bincount(owner[mask], weights=err[mask], minlength=n_owners)
        keep = ~mask
        lo, hi, owner, val, err, floor = (a[keep] for a in (lo, hi, owner, val, err, floor))

    for _ in range(max_rounds):
        tot_val = done_val + np.bincount(owner, weights=val, minlength=n_owners)
        tot_err = done_err + np.bincount(owner, weights=err, minlength=n_owners)
        tol = np.maximum(abs_tol, rel_tol * np.abs(tot_val))
        counts = np.bincount(owner, minlength=n_owners)
        ok = (tot_err <= tol) & (counts > 0)
        converged |= ok
        stalled = counts >= max_intervals
        if np.any(ok | stalled):
            retire((ok | stalled)[owner])
        if owner.size == 0:
            break
        counts = np.bincount(owner, minlength=n_owners)
        worst = np.zeros(n_owners)
        np.maximum.at(worst, owner, err)
        split = (err > tol[owner] / counts[owner]) | (err >= worst[owner])
        split &= err > 2.0 * floor
        split &= np.abs(hi - lo) > 16 * _EPS * np.maximum(np.abs(lo), np.abs(hi))
        if not np.any(split):
            break
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        new_owner = np.concatenate([owner[split], owner[split]])
        new_val, new_err, new_floor = _gk21(f, new_lo, new_hi, new_owner)
        keep = ~split
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        owner = np.concatenate([owner[keep], new_owner])
        val = np.concatenate([val[keep], new_val])
        err = np.concatenate([err[keep], new_err])
        floor = np.concatenate([floor[keep], new_floor])

    value = done_val + np.bincount(owner, weights=val, minlength=n_owners)
    error = done_err + np.bincount(owner, weights=err, minlength=n_owners)
    n_int = np.bincount(owner, minlength=n_owners)
    converged |= error <= np.maximum(abs_tol, rel_tol * np.abs(value))
    return BatchResult(value, error, converged, n_int)


def integrate(f, breakpoints, abs_tol=1e-10, rel_tol=1e-10, strict=True, **kwargs):
    """Integrate a vectorised scalar function over consecutive ``breakpoints``.

    Returns ``(value, error_estimate)``. With ``strict`` a non-converged result
    raises :class:`NumericalError` carrying the estimate.
    """
    pts = np.asarray(breakpoints, dtype=float)
    res = integrate_batch(lambda x, _o: f(x), pts[:-1], pts[1:], np.zeros(len(pts) - 1, dtype=np.intp),
                          1, abs_tol, rel_tol, **kwargs)
    value, error = float(res.value[0]), float(res.error[0])
    if strict and not res.converged[0]:
        raise NumericalError(f"quadrature did not converge (error estimate {error:.3g})", value)
    return value, error


def rational_tail(v, start, scale):
    """Map ``v in [0, 1)`` to ``x = start + scale*v/(1-v)``; returns ``(x, dx/dv)``."""
    w = 1.0 - v
    return start + scale * v / w, scale / (w * w)


def power_tail(v, start, q):
    """Map ``v in (0, 1]`` to ``x = start * v**-q``; returns ``(x, dx/dv)``.

    With ``q = 1/(alpha-2)`` an integrand decaying like ``x**(1-alpha)`` becomes
    bounded and smooth in ``v``.
    """
    x = start * v ** -q
    return x, q * x / v
