"""Gauss hypergeometric function on the non-positive real axis, and the
truncated interference integrals built from it.

``rho1(alpha, beta, t, d)`` equals the integral of ``u**beta / (1 + t*u**alpha)``
over ``[0, d]`` and ``rho2`` the same integrand over ``[d, inf)``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import beta as beta_fn

from densecell.errors import DomainError, NumericalError, ParameterError
from densecell.quadrature import integrate_batch

SERIES_TOL = 1e-14
SERIES_MAX_TERMS = 10_000
#: Above this transformed argument the series is replaced by the Euler integral.
SERIES_W_MAX = 0.95
NEAR_SINGULAR = 1e-6


def _is_nonpos_int(c):
    return (c <= 0) & (c == np.round(c))


def _series(a, b, c, w):
    """Power series of 2F1(a, b; c; w) for 0 <= w < 1, vectorised."""
    total = np.ones_like(w)
    term = np.ones_like(w)
    active = w != 0
    n = 0
    while np.any(active):
        if n >= SERIES_MAX_TERMS:
            raise NumericalError("hypergeometric series did not converge", estimate=total)
        idx = np.nonzero(active)[0]
        term[idx] *= (a[idx] + n) * (b[idx] + n) / ((c[idx] + n) * (n + 1)) * w[idx]
        total[idx] += term[idx]
        n += 1
        small = np.abs(term[idx]) <= SERIES_TOL * np.abs(total[idx])
        active[idx[small]] = False
    return total


def _euler(a, b, c, z):
    """Euler integral for 2F1 with c > b > 0 and z <= 0, vectorised.

    The integral over s in [0, 1] is split at 1/2; the substitutions
    s = x**(1/b) and 1 - s = y**(1/(c-b)) absorb both endpoint powers.
    """
    m = z.size
    cb = c - b
    zabs = -z
    x_hi = 0.5**b
    y_hi = 0.5**cb
    peak = np.clip(zabs ** -b, 0.0, x_hi)
    # geometric cuts from peak/100 up to x_hi so a power-law tail spanning many
    # decades is never swallowed by a single interval
    with np.errstate(divide="ignore"):
        decades = np.log10(np.where(peak > 0, x_hi / np.maximum(peak, 1e-300), 1.0)) + 2.0
    ratio = 10.0 ** np.maximum(1.0, decades / 40.0)
    steps = np.arange(41)
    cuts = np.minimum(peak[:, None] * 1e-2 * ratio[:, None] ** steps[None, :], x_hi[:, None] if np.ndim(x_hi) else x_hi)
    cuts = np.concatenate([np.zeros((m, 1)), cuts, np.broadcast_to(x_hi, (m,))[:, None]], axis=1)
    lo_x = cuts[:, :-1].ravel()
    hi_x = cuts[:, 1:].ravel()
    own_x = np.repeat(np.arange(m), cuts.shape[1] - 1)

    def fx(x, o):
        bb, cc, aa, zz = b[o][:, None], cb[o][:, None], a[o][:, None], zabs[o][:, None]
        s = x ** (1.0 / bb)
        return (1.0 - s) ** (cc - 1.0) * (1.0 + zz * s) ** -aa / bb

    def fy(y, o):
        bb, cc, aa, zz = b[o][:, None], cb[o][:, None], a[o][:, None], zabs[o][:, None]
        s = 1.0 - y ** (1.0 / cc)
        return s ** (bb - 1.0) * (1.0 + zz * s) ** -aa / cc

    # both halves share one batch: owners [0, m) are the x side, [m, 2m) the y side
    def f(t, o):
        out = np.empty_like(t)
        left = o < m
        if np.any(left):
            out[left] = fx(t[left], o[left])
        if np.any(~left):
            out[~left] = fy(t[~left], o[~left] - m)
        return out

    lo = np.concatenate([lo_x, np.zeros(m)])
    hi = np.concatenate([hi_x, y_hi])
    own = np.concatenate([own_x, np.arange(m) + m])
    res = integrate_batch(f, lo, hi, own, 2 * m, abs_tol=0.0, rel_tol=1e-12)
    value = (res.value[:m] + res.value[m:]) / beta_fn(b, cb)
    if not np.all(res.converged):
        raise NumericalError("Euler integral for 2F1 did not converge", estimate=value)
    return value


def hyp2f1_nonpos(a, b, c, z):
    """Gauss hypergeometric 2F1(a, b; c; z) for real parameters and ``z <= 0``.

    Uses the Pfaff transformation ``(1-z)**-a * 2F1(a, c-b; c; z/(z-1))`` so the
    series argument lies in ``[0, 1)``; when that argument exceeds 0.95 the Euler
    integral representation is integrated instead (when ``c > b > 0`` or
    ``c > a > 0``). Broadcasts over array arguments.
    """
    a, b, c, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c, z)))
    shape = a.shape
    a, b, c, z = (np.atleast_1d(v).ravel().copy() for v in (a, b, c, z))
    if np.any(_is_nonpos_int(c)):
        raise DomainError("c must not be a non-positive integer")
    if np.any(~(z <= 0)):
        raise DomainError("z must be <= 0")

    out = np.ones_like(z)
    at_inf = np.isneginf(z)
    if np.any(at_inf):
        if np.any(np.minimum(a[at_inf], b[at_inf]) <= 0):
            raise DomainError("2F1 at z = -inf is only defined here for a, b > 0")
        out[at_inf] = 0.0
    with np.errstate(invalid="ignore"):
        w = np.where(at_inf, 0.0, z / (z - 1.0))
    use_series = (z != 0) & ~at_inf & (w <= SERIES_W_MAX)
    euler_ab = (c > b) & (b > 0)
    euler_ba = (c > a) & (a > 0)
    use_euler = ~at_inf & (w > SERIES_W_MAX) & (euler_ab | euler_ba)
    use_series |= ~at_inf & (w > SERIES_W_MAX) & ~use_euler

    if np.any(use_series):
        i = use_series
        out[i] = (1.0 - z[i]) ** -a[i] * _series(a[i], c[i] - b[i], c[i], w[i])
    if np.any(use_euler):
        i = np.nonzero(use_euler)[0]
        swap = ~euler_ab[i]
        aa = np.where(swap, b[i], a[i])
        bb = np.where(swap, a[i], b[i])
        out[i] = _euler(aa, bb, c[i], z[i])
    return float(out[0]) if shape == () else out.reshape(shape)


def rho1(alpha, beta, t, d):
    """Integral of ``u**beta / (1 + t*u**alpha)`` over ``[0, d]``."""
    alpha, beta, t, d = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (alpha, beta, t, d)))
    if np.any(~(alpha > 0)) or np.any(~(beta >= 0)) or np.any(~(t >= 0)) or np.any(~(d >= 0)):
        raise DomainError("rho1 requires alpha > 0 and beta, t, d >= 0")
    p = beta + 1.0
    k = p / alpha
    with np.errstate(over="ignore", invalid="ignore"):
        z = -t * d**alpha
    z = np.where(d == 0, 0.0, z)
    value = d**p / p * hyp2f1_nonpos(1.0, k, 1.0 + k, z)
    return float(value) if np.ndim(value) == 0 else value


def rho2(alpha, beta, t, d):
    """Integral of ``u**beta / (1 + t*u**alpha)`` over ``[d, inf)``; needs ``alpha > beta + 1``."""
    alpha, beta, t, d = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (alpha, beta, t, d)))
    margin = alpha - beta - 1.0
    if np.any(~(margin > 0)):
        raise DomainError("rho2 requires alpha - beta - 1 > 0 (tail integral diverges otherwise)")
    if np.any(margin < NEAR_SINGULAR):
        raise ParameterError(
            f"alpha - beta - 1 = {np.min(margin):.3g} is within {NEAR_SINGULAR} of the pole; check the exponents"
        )
    if np.any(~(t > 0)) or np.any(~(d > 0)):
        raise DomainError("rho2 requires t > 0 and d > 0")
    k = 1.0 - (beta + 1.0) / alpha
    finite = np.isfinite(d)
    dd = np.where(finite, d, 1.0)
    z = -1.0 / (t * dd**alpha)
    value = dd**-margin / (t * margin) * hyp2f1_nonpos(1.0, k, 1.0 + k, z)
    value = np.where(finite, value, 0.0)
    return float(value) if np.ndim(value) == 0 else value
