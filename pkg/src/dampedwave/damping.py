"""Scalar damping nonlinearities and the pointwise implicit solve.

A DampingLaw is a monotone C1 function g with g(0) = 0 and g'(0) > 0,
together with declared growth exponents: q in (1,5) bounds |g(x)| <= C|x|^q
and m in (0,4) bounds |g'(x)| <= C|x|^m for |x| >= 1. The built-in families
cover the admissible behaviors: linear, saturating (bounded), sublinear
(g(v)/v -> 0 at infinity), and cubic superlinear growth.

verify_law certifies the hypothesis clauses numerically on a sample range;
the report states the certified range rather than claiming a global bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

from .errors import ConfigError, LawError, SolverFailure


@dataclass(frozen=True)
class DampingLaw:
    """Monotone scalar nonlinearity with its analytic derivative.

    fn and deriv accept scalars or arrays. q, m, c_growth are the declared
    growth data certified by verify_law on a finite sample range.
    """

    fn: Callable
    deriv: Callable
    q: float
    m: float
    c_growth: float
    family: str = "custom"
    params: tuple = ()

    def __post_init__(self):
        if not (1.0 < self.q < 5.0):
            raise ConfigError(f"growth exponent q={self.q} outside (1, 5)")
        if not (0.0 < self.m < 4.0):
            raise ConfigError(f"derivative exponent m={self.m} outside (0, 4)")
        if self.c_growth <= 0:
            raise ConfigError("growth constant must be positive")


def _linear_g(kappa, x):
    return kappa * np.asarray(x, dtype=float)


def _linear_dg(kappa, x):
    return np.full_like(np.asarray(x, dtype=float), kappa)


def _saturating_g(x):
    x = np.asarray(x, dtype=float)
    return x / (1.0 + np.abs(x))


def _saturating_dg(x):
    x = np.asarray(x, dtype=float)
    return 1.0 / (1.0 + np.abs(x)) ** 2


def _sublinear_g(x):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    outer = np.sign(x) * (2.0 * np.sqrt(np.maximum(ax, 1.0)) - 1.0)
    return np.where(ax <= 1.0, x, outer)


def _sublinear_dg(x):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    return np.where(ax <= 1.0, 1.0, 1.0 / np.sqrt(np.maximum(ax, 1.0)))


def _cubic_g(x):
    x = np.asarray(x, dtype=float)
    return x + x ** 3


def _cubic_dg(x):
    x = np.asarray(x, dtype=float)
    return 1.0 + 3.0 * x * x


def linear(kappa=1.0, q=2.0, m=1.0):
    """g(s) = kappa*s. Bounded derivative, so m defaults to 1."""
    if kappa <= 0:
        raise ConfigError("linear damping gain must be positive")
    return DampingLaw(
        fn=partial(_linear_g, kappa), deriv=partial(_linear_dg, kappa),
        q=q, m=m, c_growth=kappa, family="linear", params=(kappa,),
    )


def saturating():
    """g(s) = s/(1+|s|): bounded monotone with g'(0) = 1 (saturation type)."""
    return DampingLaw(
        fn=_saturating_g, deriv=_saturating_dg,
        q=2.0, m=1.0, c_growth=1.0, family="saturating",
    )


def sublinear():
    """C1 law equal to s near 0 with sqrt growth, so g(s)/s -> 0 at infinity."""
    return DampingLaw(
        fn=_sublinear_g, deriv=_sublinear_dg,
        q=2.0, m=1.0, c_growth=2.0, family="sublinear",
    )


def cubic():
    """g(s) = s + s^3 with q = 3, m = 2."""
    return DampingLaw(
        fn=_cubic_g, deriv=_cubic_dg,
        q=3.0, m=2.0, c_growth=4.0, family="cubic",
    )


def custom(fn, deriv, q=2.0, m=1.0, c_growth=1.0):
    return DampingLaw(fn=fn, deriv=deriv, q=q, m=m, c_growth=c_growth, family="custom")


BUILTIN_FAMILIES = ("linear", "saturating", "sublinear", "cubic")


def eval_g(law, x):
    """Evaluate g; raises LawError on non-finite output."""
    y = law.fn(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(y)):
        raise LawError(f"damping law {law.family} produced a non-finite value")
    if np.ndim(x) == 0:
        return float(y)
    return y


def eval_g_prime(law, x):
    y = law.deriv(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(y)):
        raise LawError(f"damping law {law.family} derivative non-finite")
    if np.ndim(x) == 0:
        return float(y)
    return y


@dataclass(frozen=True)
class LawReport:
    """Pass/fail per hypothesis clause, certified on a finite sample range."""

    passed: bool
    clauses: dict
    q_hat: float
    m_hat: float
    worst: tuple | None   # (clause name, sample x) of the recorded violation
    sample_range: tuple
    n_samples: int

    def as_items(self):
        items = [("passed", self.passed)]
        items += [(f"clause_{k}", v) for k, v in self.clauses.items()]
        items += [
            ("q_hat", self.q_hat),
            ("m_hat", self.m_hat),
            ("range_lo", self.sample_range[0]),
            ("range_hi", self.sample_range[1]),
            ("n_samples", self.n_samples),
        ]
        return items


def _loglog_slope(x, y):
    """Least-squares slope of log|y| against log|x|; nan when degenerate."""
    keep = (np.abs(x) >= 1.0) & (np.abs(y) > 0.0)
    if np.count_nonzero(keep) < 2:
        return float("nan")
    lx = np.log(np.abs(x[keep]))
    ly = np.log(np.abs(y[keep]))
    slope = np.polyfit(lx, ly, 1)[0]
    return float(slope)


def verify_law(law, sample_range=(-10.0, 10.0), n_samples=401):
    """Check every hypothesis clause of the law on a sampled range.

    The range must contain [-1, 1] and hold at least 100 samples. The report
    fails when any clause is violated or when the fitted growth exponent
    exceeds the declared q by more than 0.1. Failures are report content,
    not exceptions.
    """
    lo, hi = float(sample_range[0]), float(sample_range[1])
    if lo > -1.0 or hi < 1.0:
        raise ConfigError("sample range must contain [-1, 1]")
    if n_samples < 100:
        raise ConfigError("need at least 100 samples")
    xs = np.unique(np.concatenate([
        np.linspace(lo, hi, int(n_samples)), [-1.0, 0.0, 1.0],
    ]))
    g = eval_g(law, xs)
    dg = eval_g_prime(law, xs)
    scale = float(np.max(np.abs(g))) or 1.0

    clauses = {}
    worst = None

    g0 = eval_g(law, 0.0)
    clauses["zero_at_origin"] = g0 == 0.0
    if not clauses["zero_at_origin"]:
        worst = worst or ("zero_at_origin", 0.0)

    dg0 = eval_g_prime(law, 0.0)
    clauses["positive_slope_at_origin"] = dg0 > 0.0
    if not clauses["positive_slope_at_origin"]:
        worst = worst or ("positive_slope_at_origin", 0.0)

    diffs = np.diff(g)
    mono_bad = diffs < -1e-14 * scale
    clauses["monotone"] = not mono_bad.any()
    if mono_bad.any():
        k = int(np.argmax(mono_bad))
        worst = worst or ("monotone", float(xs[k + 1]))

    nz = xs != 0.0
    sign_bad = nz & (xs * g <= 0.0)
    clauses["sign"] = not sign_bad.any()
    if sign_bad.any():
        k = int(np.argmax(sign_bad))
        worst = worst or ("sign", float(xs[k]))

    far = np.abs(xs) >= 1.0
    gb = np.abs(g[far]) > law.c_growth * np.abs(xs[far]) ** law.q * (1.0 + 1e-12)
    clauses["value_growth"] = not gb.any()
    if gb.any():
        k = int(np.argmax(gb))
        worst = worst or ("value_growth", float(xs[far][k]))

    db = np.abs(dg[far]) > law.c_growth * np.abs(xs[far]) ** law.m * (1.0 + 1e-12)
    clauses["slope_growth"] = not db.any()
    if db.any():
        k = int(np.argmax(db))
        worst = worst or ("slope_growth", float(xs[far][k]))

    q_hat = _loglog_slope(xs, g)
    m_hat = _loglog_slope(xs, dg)
    exponent_ok = math.isnan(q_hat) or q_hat <= law.q + 0.1
    if not exponent_ok:
        worst = worst or ("exponent_estimate", float("nan"))

    passed = all(clauses.values()) and exponent_ok
    return LawReport(
        passed=passed, clauses=clauses, q_hat=q_hat, m_hat=m_hat,
        worst=worst, sample_range=(lo, hi), n_samples=int(n_samples),
    )


def select_p(m):
    """Pick the Hoelder exponent p used by the fourth damping-disturbance budget.

    For 0 < m <= 2 any p > 2/m is admissible and p = 2/m + 1 is returned;
    for 2 < m < 4 the midpoint of the admissible interval (1, m/(m-2)) is
    returned.
    """
    m = float(m)
    if not (0.0 < m < 4.0):
        raise ConfigError(f"derivative exponent m={m} outside (0, 4)")
    if m <= 2.0:
        return 2.0 / m + 1.0
    return 0.5 * (1.0 + m / (m - 2.0))


def solve_implicit_field(law, a, d, dt, rhs, max_iter=100, tol_factor=1e-12):
    """Solve v + dt*a*g(v + d) = rhs node-wise (monotone, hence unique root).

    Safeguarded Newton on the whole field at once: g non-decreasing makes
    F(v) = v + dt*a*g(v+d) - rhs strictly increasing, so [rhs, rhs - dt*a*g(rhs+d)]
    sorted is always a bracket and bisection fallback guarantees convergence.
    """
    a = np.asarray(a, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    ad = dt * a
    step0 = ad * law.fn(rhs + d)
    lo = np.minimum(rhs, rhs - step0)
    hi = np.maximum(rhs, rhs - step0)
    tol = tol_factor * np.maximum(1.0, np.abs(rhs))

    v = rhs - step0 / (1.0 + ad * law.deriv(rhs + d))
    v = np.clip(v, lo, hi)
    for _ in range(max_iter):
        f = v + ad * law.fn(v + d) - rhs
        done = np.abs(f) <= tol
        if done.all():
            return v
        lo = np.where(f <= 0.0, v, lo)
        hi = np.where(f > 0.0, v, hi)
        fp = 1.0 + ad * law.deriv(v + d)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = v - f / fp
        inside = np.isfinite(cand) & (cand > lo) & (cand < hi)
        v_new = np.where(inside, cand, 0.5 * (lo + hi))
        v = np.where(done, v, v_new)

    f = v + ad * law.fn(v + d) - rhs
    bad = np.abs(f) > tol
    k = int(np.argmax(np.abs(np.where(bad, f, 0.0))))
    idx = np.unravel_index(k, f.shape) if f.ndim else ()
    raise SolverFailure(
        f"implicit damping solve did not converge at node {idx}",
        node=idx, bracket=(float(np.ravel(lo)[k]), float(np.ravel(hi)[k])),
        residual=float(np.ravel(f)[k]),
    )


def solve_pointwise_implicit(law, a_i, d_i, dt, rhs):
    """Scalar version of the implicit damping solve (root of F to 1e-12*max(1,|rhs|))."""
    if dt <= 0:
        raise ConfigError("dt must be positive")
    if a_i < 0:
        raise ConfigError("localization value must be nonnegative")
    v = solve_implicit_field(
        law, np.asarray(a_i, dtype=float), float(d_i), float(dt),
        np.asarray(rhs, dtype=float),
    )
    return float(v)
