"""Coverage probability and area spectral efficiency of the typical user.

Two routes share one outer driver over the serving distance ``r``:

* the general engine integrates the Laplace exponent of the interference
  numerically for any :class:`~densecell.model.PathLossModel`;
* the 3GPP Case 1 route closes the inner Laplace transform with the
  ``rho1``/``rho2`` expressions and only integrates over ``r``.

Every function is pure given an immutable environment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from densecell.errors import DomainError, NumericalError, UsageError
from densecell.model import Constant, Linear3gpp, check_finite_interference, is_case1, tail_exponent
from scipy.special import expit

from densecell.quadrature import integrate_batch, power_tail, rational_tail
from densecell.special import rho1, rho2

#: Absolute tolerance on the Laplace exponent ``2*pi*lambda*J``.
INNER_ABS_TOL = 1e-10
#: Absolute tolerance on each outer term ``T_n``.
OUTER_ABS_TOL = 1e-9
_REL_TOL = 1e-10
_GAMMA_CHUNK = 128
_U_MAX = 1e150

LOS, NLOS = "L", "NL"


@dataclass(frozen=True)
class CoverageQuery:
    lam: float
    gamma: float

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError(f"density must be positive, got {self.lam}")
        if not self.gamma > 0:
            raise DomainError(f"SINR threshold must be positive, got {self.gamma}")


@dataclass(frozen=True)
class TermContribution:
    segment: int  # 1-based
    branch: str  # "L" or "NL"
    value: float


@dataclass(frozen=True)
class CoverageResult:
    value: float
    abs_error_estimate: float
    term_breakdown: tuple = field(default_factory=tuple)

    def term(self, segment, branch):
        for t in self.term_breakdown:
            if t.segment == segment and t.branch == branch:
                return t.value
        raise KeyError((segment, branch))


@dataclass(frozen=True)
class AseResult:
    value: float
    abs_error_estimate: float


# --------------------------------------------------------------------------
# nearest-BS distance densities


def _segment(model, n):
    if not 1 <= n <= model.n_segments:
        raise DomainError(f"segment index {n} outside 1..{model.n_segments}")
    return model.segments[n - 1]


def _contact_density(lam, r):
    return np.exp(-math.pi * r * r * lam) * 2.0 * math.pi * r * lam


def _in_segment(seg, r):
    r = np.asarray(r, dtype=float)
    if np.any(~((r > seg.d_lo) & (r <= seg.d_hi))):
        raise DomainError(f"r outside segment ({seg.d_lo}, {seg.d_hi}]")
    return r


def nearest_pdf_los(env, lam, n, r):
    """Density of 'nearest BS at distance r, in segment n, with a LoS link'."""
    seg = _segment(env.model, n)
    r = _in_segment(seg, r)
    value = seg.los_prob(r) * _contact_density(lam, r)
    return float(value) if value.ndim == 0 else value


def nearest_pdf_nlos(env, lam, n, r):
    """Density of 'nearest BS at distance r, in segment n, with a NLoS link'."""
    seg = _segment(env.model, n)
    r = _in_segment(seg, r)
    value = (1.0 - seg.los_prob(r)) * _contact_density(lam, r)
    return float(value) if value.ndim == 0 else value


# --------------------------------------------------------------------------
# Laplace transform of the interference, general engine


def _interference_integral(model, tx_power, r, s, abs_tol):
    """``J(r, s)``: integral over ``u > r`` of the per-interferer
    ``1 - E[exp(-s P zeta(u) g)]`` weighted by ``u``; vectorised over ``r, s``.

    The Laplace transform is ``exp(-2 pi lambda J)``.
    """
    r = np.asarray(r, dtype=float).ravel()
    s = np.asarray(s, dtype=float).ravel()
    m = r.size
    bounds = model.inner_boundaries
    q = 1.0 / (tail_exponent(model) - 2.0)

    # transition radii where s*P*zeta(u) = 1, one per (segment, branch) law
    laws = model._law_table
    a = np.concatenate([laws[:, 0], laws[:, 2]])
    alpha = np.concatenate([laws[:, 1], laws[:, 3]])
    ustar = (s[:, None] * tx_power * a[None, :]) ** (1.0 / alpha[None, :])

    tail_start = np.maximum(r, 4.0 * ustar.max(axis=1))
    if bounds.size:
        tail_start = np.maximum(tail_start, bounds[-1])
    cands = np.concatenate(
        [
            r[:, None],
            np.broadcast_to(bounds, (m, bounds.size)),
            ustar * 0.25,
            ustar,
            ustar * 4.0,
            r[:, None] * 2.0,
            r[:, None] * 8.0,
            tail_start[:, None],
        ],
        axis=1,
    )
    cuts = np.sort(np.clip(cands, r[:, None], tail_start[:, None]), axis=1)
    lo = np.concatenate([cuts[:, :-1].ravel(), np.zeros(m)])
    hi = np.concatenate([cuts[:, 1:].ravel(), np.ones(m)])
    own = np.concatenate([np.repeat(np.arange(m), cuts.shape[1] - 1), np.arange(m, 2 * m)])

    def integrand(x, o):
        finite = o < m
        k = np.where(finite, o, o - m)
        u = np.empty_like(x)
        jac = np.ones_like(x)
        u[finite] = x[finite]
        if np.any(~finite):
            ut, jt = power_tail(x[~finite], tail_start[k[~finite]][:, None], q)
            u[~finite], jac[~finite] = ut, jt
        out = np.zeros_like(x)
        ok = u < _U_MAX
        uu = u[ok]
        ss = np.broadcast_to(s[k][:, None], x.shape)[ok]
        with np.errstate(divide="ignore"):
            log_sp = np.log(ss * tx_power)
            log_u = np.log(uu)
        seg_idx = np.searchsorted(bounds, uu, side="left")
        total = np.zeros_like(uu)
        for j, seg in enumerate(model.segments):
            here = seg_idx == j if model.n_segments > 1 else slice(None)
            lsp, lu = log_sp[here], log_u[here]
            p_los = seg.los_prob(uu[here])
            # y/(1+y) with y = s P a u^-alpha, evaluated as a logistic in log y
            acc = np.zeros_like(lu)
            if seg.has_los:
                acc += p_los * expit(lsp + math.log(seg.a_los) - seg.alpha_los * lu)
            if seg.has_nlos:
                acc += (1.0 - p_los) * expit(lsp + math.log(seg.a_nlos) - seg.alpha_nlos * lu)
            total[here] = acc
        out[ok] = total * uu * jac[ok]
        return out

    tol = np.concatenate([abs_tol, abs_tol]) * 0.5
    res = integrate_batch(integrand, lo, hi, own, 2 * m, abs_tol=tol, rel_tol=_REL_TOL)
    value = res.value[:m] + res.value[m:]
    error = res.error[:m] + res.error[m:]
    if not np.all(res.converged):
        raise NumericalError("interference integral did not converge", estimate=value)
    return value, error


def laplace_general(env, lam, r, s):
    """Laplace transform of the interference seen from a serving distance ``r``.

    Integrates the interference exponent numerically over all interferers
    beyond ``r`` with both LoS and NLoS possibilities. Vectorised over ``r``/``s``.
    """
    check_finite_interference(env.model)
    r_arr, s_arr = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(s, dtype=float))
    if np.any(~(r_arr > 0)):
        raise DomainError("serving distance must be positive")
    if np.any(~(s_arr >= 0)):
        raise DomainError("Laplace argument must be non-negative")
    if lam < 0:
        raise DomainError("density must be non-negative")
    tol = np.full(r_arr.size, INNER_ABS_TOL / (2.0 * math.pi * max(lam, 1e-300)))
    j, _ = _interference_integral(env.model, env.tx_power, r_arr, s_arr, tol)
    value = np.exp(-2.0 * math.pi * lam * j).reshape(r_arr.shape)
    return float(value) if value.ndim == 0 else value


# --------------------------------------------------------------------------
# 3GPP Case 1 closed forms


def _case1_constants(env):
    if not is_case1(env.model):
        raise UsageError("closed-form path needs a two-segment 3GPP Case 1 model")
    seg = env.model.segments[0]
    return seg.a_los, seg.alpha_los, seg.a_nlos, seg.alpha_nlos, seg.d_hi


def _near_exponent(lam, d1, r, alpha_l, alpha_n, t_los, t_nlos):
    """Log Laplace transform for 0 < r <= d1 given the per-branch ``t`` arguments."""
    c = 2.0 * math.pi * lam
    return (
        -c * (rho1(alpha_l, 1, t_los, d1) - rho1(alpha_l, 1, t_los, r))
        + c / d1 * (rho1(alpha_l, 2, t_los, d1) - rho1(alpha_l, 2, t_los, r))
        - c / d1 * (rho1(alpha_n, 2, t_nlos, d1) - rho1(alpha_n, 2, t_nlos, r))
        - c * rho2(alpha_n, 1, t_nlos, d1)
    )


def _check_near(r, d1):
    r = np.asarray(r, dtype=float)
    if np.any(~((r > 0) & (r <= d1))):
        raise DomainError(f"closed form requires 0 < r <= d1 = {d1}")
    return r


def _log_laplace_case1_los(env, lam, gamma, r):
    a_l, alpha_l, a_n, alpha_n, d1 = _case1_constants(env)
    r = _check_near(r, d1)
    base = gamma * r**alpha_l
    return _near_exponent(lam, d1, r, alpha_l, alpha_n, 1.0 / base, 1.0 / (base * a_n / a_l))


def _log_laplace_case1_nlos_near(env, lam, gamma, r):
    a_l, alpha_l, a_n, alpha_n, d1 = _case1_constants(env)
    r = _check_near(r, d1)
    base = gamma * r**alpha_n
    return _near_exponent(lam, d1, r, alpha_l, alpha_n, 1.0 / (base * a_l / a_n), 1.0 / base)


def _log_laplace_case1_nlos_far(env, lam, gamma, r):
    _, _, _, alpha_n, d1 = _case1_constants(env)
    r = np.asarray(r, dtype=float)
    if np.any(~(r > d1)):
        raise DomainError(f"far-field closed form requires r > d1 = {d1}")
    return -2.0 * math.pi * lam * rho2(alpha_n, 1, 1.0 / (gamma * r**alpha_n), r)


def _as_output(x):
    x = np.exp(x)
    return float(x) if np.ndim(x) == 0 else x


def laplace_case1_los(env, lam, gamma, r):
    """Closed-form Laplace transform at ``s = gamma r^aL / (P A^L)`` for a LoS server, ``0 < r <= d1``."""
    return _as_output(_log_laplace_case1_los(env, lam, gamma, r))


def laplace_case1_nlos_near(env, lam, gamma, r):
    """Closed-form Laplace transform at ``s = gamma r^aNL / (P A^NL)`` for a NLoS server, ``0 < r <= d1``."""
    return _as_output(_log_laplace_case1_nlos_near(env, lam, gamma, r))


def laplace_case1_nlos_far(env, lam, gamma, r):
    """Closed-form Laplace transform for a NLoS server beyond ``d1`` (pure NLoS tail)."""
    return _as_output(_log_laplace_case1_nlos_far(env, lam, gamma, r))


# --------------------------------------------------------------------------
# outer driver


def _active_terms(model):
    terms = []
    for n, seg in enumerate(model.segments, start=1):
        fn = seg.los_prob
        los_reachable = not (isinstance(fn, Constant) and fn.p == 0.0) and not (
            isinstance(fn, Linear3gpp) and fn.d1 <= seg.d_lo
        )
        if los_reachable:
            terms.append((n, LOS))
        if seg.has_nlos:
            terms.append((n, NLOS))
    return terms


def _general_log_laplace(env, lam):
    def log_laplace(r, s, gamma, n, branch):
        tol = np.full(r.size, INNER_ABS_TOL / (2.0 * math.pi * lam))
        j, _ = _interference_integral(env.model, env.tx_power, r, s, tol)
        return -2.0 * math.pi * lam * j

    return log_laplace


def _case1_log_laplace(env, lam):
    d1 = env.model.segments[0].d_hi

    def log_laplace(r, s, gamma, n, branch):
        if n == 1 and branch == LOS:
            return _log_laplace_case1_los(env, lam, gamma, r)
        if n == 1:
            return _log_laplace_case1_nlos_near(env, lam, gamma, r)
        if branch == NLOS:
            return _log_laplace_case1_nlos_far(env, lam, gamma, np.maximum(r, np.nextafter(d1, np.inf)))
        raise AssertionError("LoS term of the far segment is identically zero")

    return log_laplace


def _coverage_batch(env, lam, gammas, log_laplace, terms, abs_tol=OUTER_ABS_TOL):
    """Integrate every ``(gamma, term)`` pair; returns an array ``(G, len(terms))`` and errors."""
    model = env.model
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    G, K = gammas.size, len(terms)
    scale = 1.0 / math.sqrt(math.pi * lam)
    hint_mult = np.array([0.125, 0.25, 0.5, 1.0, 2.0, 4.0])

    lo, hi, own = [], [], []
    tail_owner = {}
    n_owners = G * K
    for g in range(G):
        for k, (n, branch) in enumerate(terms):
            seg = model.segments[n - 1]
            a, alpha = (seg.a_los, seg.alpha_los) if branch == LOS else (seg.a_nlos, seg.alpha_nlos)
            hints = list(hint_mult * scale)
            if env.noise_power > 0:
                r_noise = (env.tx_power * a / (gammas[g] * env.noise_power)) ** (1.0 / alpha)
                hints += [0.5 * r_noise, r_noise, 2.0 * r_noise]
            if isinstance(seg.los_prob, Linear3gpp):
                hints.append(seg.los_prob.d1)
            top = seg.d_hi if math.isfinite(seg.d_hi) else seg.d_lo + 6.0 * scale
            pts = sorted({seg.d_lo, top, *[h for h in hints if seg.d_lo < h < top]})
            owner = g * K + k
            lo += pts[:-1]
            hi += pts[1:]
            own += [owner] * (len(pts) - 1)
            if not math.isfinite(seg.d_hi):
                tail_owner[n_owners] = (owner, top)
                lo.append(0.0)
                hi.append(1.0)
                own.append(n_owners)
                n_owners += 1

    base_owner = np.arange(n_owners)
    tail_start = np.zeros(n_owners)
    for t_own, (parent, start) in tail_owner.items():
        base_owner[t_own] = parent
        tail_start[t_own] = start
    is_tail = np.zeros(n_owners, dtype=bool)
    is_tail[list(tail_owner)] = True
    owner_gamma = gammas[base_owner // K]
    owner_term = base_owner % K

    def integrand(x, o):
        r = x.copy()
        jac = np.ones_like(x)
        tail = is_tail[o]
        if np.any(tail):
            rt, jt = rational_tail(x[tail], tail_start[o[tail]][:, None], scale)
            r[tail], jac[tail] = rt, jt
        out = np.zeros_like(x)
        term_of_row = owner_term[o]
        for k, (n, branch) in enumerate(terms):
            rows = term_of_row == k
            if not np.any(rows):
                continue
            seg = model.segments[n - 1]
            rr = r[rows]
            gg = np.broadcast_to(owner_gamma[o[rows]][:, None], rr.shape)
            a, alpha = (seg.a_los, seg.alpha_los) if branch == LOS else (seg.a_nlos, seg.alpha_nlos)
            p_los = seg.los_prob(rr)
            weight = p_los if branch == LOS else 1.0 - p_los
            # s = gamma / (P zeta(r)) without forming zeta, which overflows as r -> 0
            s_all = gg * rr**alpha / (env.tx_power * a)
            with np.errstate(over="ignore"):
                outer = weight * _contact_density(lam, rr) * np.exp(-s_all * env.noise_power) * jac[rows]
            live = outer > 1e-300
            vals = np.zeros_like(rr)
            if np.any(live):
                s = s_all[live]
                log_l = log_laplace(rr[live], s, gg[live], n, branch)
                vals[live] = outer[live] * np.exp(log_l)
            out[rows] = vals
        return out

    res = integrate_batch(integrand, np.array(lo), np.array(hi), np.array(own), n_owners,
                          abs_tol=abs_tol, rel_tol=_REL_TOL)
    values = np.bincount(base_owner, weights=res.value, minlength=G * K)[: G * K]
    errors = np.bincount(base_owner, weights=res.error, minlength=G * K)[: G * K]
    if not np.all(res.converged):
        bad = [terms[base_owner[i] % K] for i in np.nonzero(~res.converged)[0]]
        raise NumericalError(f"coverage quadrature did not converge for terms {sorted(set(bad))}",
                             estimate=values.reshape(G, K).sum(axis=1))
    return values.reshape(G, K), errors.reshape(G, K)


def _result(terms, values, errors, extra_terms=()):
    breakdown = [TermContribution(n, b, float(v)) for (n, b), v in zip(terms, values)]
    breakdown += list(extra_terms)
    breakdown.sort(key=lambda t: (t.segment, 0 if t.branch == LOS else 1))
    total = float(np.sum(values))
    err = float(np.sum(errors)) + INNER_ABS_TOL * max(total, 0.0)
    return CoverageResult(min(max(total, 0.0), 1.0), err, tuple(breakdown))


def _zero_terms(model, terms):
    present = set(terms)
    return [TermContribution(n, b, 0.0) for n in range(1, model.n_segments + 1) for b in (LOS, NLOS)
            if (n, b) not in present]


def coverage_general(env, query):
    """Coverage probability by numerical evaluation of every Laplace transform."""
    check_finite_interference(env.model)
    terms = _active_terms(env.model)
    values, errors = _coverage_batch(env, query.lam, [query.gamma], _general_log_laplace(env, query.lam), terms)
    return _result(terms, values[0], errors[0], _zero_terms(env.model, terms))


def coverage_case1(env, query):
    """Coverage probability of the 3GPP Case 1 model via the closed-form Laplace transforms."""
    _case1_constants(env)
    terms = [(1, LOS), (1, NLOS), (2, NLOS)]
    values, errors = _coverage_batch(env, query.lam, [query.gamma], _case1_log_laplace(env, query.lam), terms)
    return _result(terms, values[0], errors[0], [TermContribution(2, LOS, 0.0)])


def coverage_values(env, lam, gammas, method="auto", abs_tol=OUTER_ABS_TOL):
    """Vectorised coverage over thresholds at one density; returns ``(values, errors)``.

    ``method`` is ``"general"``, ``"case1"`` or ``"auto"`` (closed form whenever
    the model has the Case 1 shape).
    """
    if method == "auto":
        method = "case1" if is_case1(env.model) else "general"
    if method == "case1":
        _case1_constants(env)
        terms = [(1, LOS), (1, NLOS), (2, NLOS)]
        log_laplace = _case1_log_laplace(env, lam)
    elif method == "general":
        check_finite_interference(env.model)
        terms = _active_terms(env.model)
        log_laplace = _general_log_laplace(env, lam)
    else:
        raise UsageError(f"unknown coverage method {method!r}")
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    values, errors = np.empty(gammas.size), np.empty(gammas.size)
    # chunks bound the memory of the nested batch
    for i in range(0, gammas.size, _GAMMA_CHUNK):
        v, e = _coverage_batch(env, lam, gammas[i : i + _GAMMA_CHUNK], log_laplace, terms, abs_tol)
        values[i : i + _GAMMA_CHUNK] = v.sum(axis=1)
        errors[i : i + _GAMMA_CHUNK] = e.sum(axis=1)
    return np.clip(values, 0.0, 1.0), errors + INNER_ABS_TOL


# --------------------------------------------------------------------------
# area spectral efficiency

# the coverage tail decays at least like exp(-2y/alpha_max); beyond y = 80 it is
# below 1e-17 for every exponent used here
_ASE_Y_MAX = 80.0
_ASE_Y_EDGES = np.array([0.0, 1.0, 4.0, 16.0, 40.0, _ASE_Y_MAX])


def ase(env, lam, gamma0, method="auto", rel_tol=1e-6):
    """Area spectral efficiency in bps/Hz/km^2.

    Integration by parts turns the SINR density into the coverage curve:
    ``lam * [log2(1+g0) p(g0) + (1/ln 2) * int_{g0}^inf p(x)/(1+x) dx]``. The
    remaining integral is taken in ``y = ln((1+x)/(1+g0))``, where the coverage
    tail decays exponentially.
    """
    if not gamma0 > 0:
        raise DomainError("gamma0 must be positive")
    if not lam > 0:
        if lam == 0:
            return AseResult(0.0, 0.0)
        raise DomainError("density must be non-negative")
    p0, e0 = coverage_values(env, lam, [gamma0], method)

    def integrand(y, _o):
        x = (1.0 + gamma0) * np.exp(y) - 1.0
        p, _ = coverage_values(env, lam, x.ravel(), method)
        return p.reshape(y.shape)

    edges = _ASE_Y_EDGES
    n = edges.size - 1
    res = integrate_batch(integrand, edges[:-1], edges[1:], np.zeros(n, dtype=np.intp), 1,
                          abs_tol=1e-9, rel_tol=rel_tol * 0.1)
    if not res.converged[0]:
        raise NumericalError("ASE quadrature did not converge", estimate=lam * float(res.value[0]))
    tail = float(res.value[0]) / math.log(2.0)
    value = lam * (math.log2(1.0 + gamma0) * float(p0[0]) + tail)
    err = lam * (math.log2(1.0 + gamma0) * float(e0[0]) + float(res.error[0]) / math.log(2.0))
    return AseResult(value, err)
