"""Scalar comparison machinery for phi' = -c(t) g(phi).

The central quantities are the barrier integral G(v) = int_0^v 1/g, the
cumulative gain int_{t0}^{t1} c, and the settling time at which the
cumulative gain first reaches G(v0).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .functions import ComparisonNonlinearity, GainFunction, RateSpec

__all__ = [
    "DivergentIntegralError",
    "MalformedSamplesError",
    "SettlingCertificate",
    "SampleCheck",
    "barrier_integral",
    "barrier_inverse",
    "cumulative_gain",
    "settling_time_bound",
    "comparison_solution",
    "check_gronwall_power",
    "check_comparison",
]

_MAX_DOUBLINGS = 60
_RESIDUAL_TOL = 1e-10


class DivergentIntegralError(ArithmeticError):
    """The integral of 1/g failed to converge."""


class MalformedSamplesError(ValueError):
    """Sampled function is unordered, negative or misaligned."""


@dataclass(frozen=True)
class SettlingCertificate:
    """Settling-time estimate for a comparison problem started at (t0, v0).

    ``T_bound`` is ``math.inf`` when the tail mass of c cannot absorb
    G(v0); serialized as the string ``"unbounded"``.
    """

    t0: float
    v0: float
    G_v0: float
    T_bound: float
    tail_mass: float
    rate: RateSpec | None = field(default=None, compare=False, repr=False)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.T_bound)

    def to_dict(self) -> dict:
        return {
            "t0": self.t0,
            "v0": self.v0,
            "G_v0": self.G_v0,
            "T_bound": self.T_bound if self.bounded else "unbounded",
            "tail_mass": self.tail_mass if math.isfinite(self.tail_mass) else "infinite",
        }


@dataclass(frozen=True)
class SampleCheck:
    """Outcome of a sample-wise inequality check.

    ``worst_margin`` is the largest (lhs - rhs) seen; ``first_violation`` is
    the ``(t, margin)`` of the earliest sample exceeding the tolerance.
    """

    passed: bool
    worst_margin: float
    first_violation: tuple[float, float] | None = None

    def __bool__(self) -> bool:
        return self.passed


def _quad(func, a: float, b: float) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info = integrate.quad(func, a, b, epsabs=0.0, epsrel=1e-13,
                                        limit=200, full_output=True)[:3]
    if not math.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
        raise DivergentIntegralError(
            f"quadrature of 1/g on [{a:g}, {b:g}] did not converge (estimate {val:g}, error {err:g})"
        )
    return val


def barrier_integral(g: ComparisonNonlinearity, v: float, method: str = "auto") -> float:
    """G(v) = int_0^v ds / g(s).

    For an exact power law the closed form v**(1-a) / (1-a) is returned
    unless ``method="quadrature"``. The quadrature path splits [0, v] at v/2
    and integrates the singular half in u = s**(1-beta), where the
    integrand s**beta / ((1-beta) g(s)) stays bounded by 1/((1-beta) m).
    """
    if v < 0:
        raise ValueError("barrier integral needs v >= 0")
    if v == 0:
        return 0.0
    if g.alpha is not None and method == "auto":
        a = g.alpha
        return v ** (1.0 - a) / (1.0 - a)
    beta = g.beta
    p = 1.0 - beta
    half = 0.5 * v

    def head(u: float) -> float:
        if u <= 0.0:
            return 1.0 / (p * g.m)
        s = u ** (1.0 / p)
        gs = g(s)
        if gs <= 0.0:
            raise DivergentIntegralError(f"g vanishes at s={s:g} > 0")
        return s ** beta / (p * gs)

    def body(s: float) -> float:
        gs = g(s)
        if gs <= 0.0:
            raise DivergentIntegralError(f"g vanishes at s={s:g} > 0")
        return 1.0 / gs

    return _quad(head, 0.0, half ** p) + _quad(body, half, v)


def barrier_inverse(g: ComparisonNonlinearity, y: float, v_hi: float | None = None,
                    method: str = "auto") -> float:
    """Solve G(v) = y for v >= 0.

    Uses the closed form for power laws; otherwise a bracketed Newton
    iteration (G' = 1/g) that falls back to bisection whenever the Newton
    step leaves the bracket.
    """
    if y <= 0:
        return 0.0
    if g.alpha is not None and method == "auto":
        a = g.alpha
        return ((1.0 - a) * y) ** (1.0 / (1.0 - a))
    lo, hi = 0.0, v_hi if v_hi is not None else 1.0
    g_hi = barrier_integral(g, hi, method="quadrature")
    while g_hi < y:
        lo, hi = hi, 2.0 * hi
        g_hi = barrier_integral(g, hi, method="quadrature")
    if g_hi == y:
        return hi
    v = hi
    Gv = g_hi
    for _ in range(200):
        gv = g(v)
        step = (Gv - y) * gv
        cand = v - step
        if not lo < cand < hi:
            cand = 0.5 * (lo + hi)
        v = cand
        Gv = barrier_integral(g, v, method="quadrature")
        if Gv > y:
            hi = v
        elif Gv < y:
            lo = v
        else:
            return v
        if hi - lo <= 4e-16 * hi or abs(Gv - y) <= 1e-15 * y:
            break
    return v


def cumulative_gain(c: GainFunction, t0: float, t1: float) -> float:
    """Integral of c over [t0, t1]."""
    return c.cumulative(t0, t1)


def settling_time_bound(rate: RateSpec, t0: float, v0: float) -> SettlingCertificate:
    """Smallest T >= t0 with int_{t0}^T c = G(v0).

    The root is bracketed by doubling T - t0 and refined by bisection that
    keeps the left end strictly infeasible (cumulative gain below G(v0)), so
    flat stretches of c resolve to the infimum. Returns an unbounded
    certificate when the tail mass of c does not exceed G(v0).
    """
    if v0 < 0:
        raise ValueError("settling_time_bound needs v0 >= 0")
    G = barrier_integral(rate.g, v0)
    c = rate.c
    if v0 == 0:
        return SettlingCertificate(t0, v0, 0.0, t0, c.tail_mass(t0), rate)

    width = 1.0
    hi = None
    for _ in range(_MAX_DOUBLINGS + 1):
        if c.cumulative(t0, t0 + width) >= G:
            hi = t0 + width
            break
        width *= 2.0
    if hi is None:
        return SettlingCertificate(t0, v0, G, math.inf, c.tail_mass(t0), rate)
    # the settling condition is strict: tail > G
    tail = c.tail_mass(t0)
    if tail <= G:
        return SettlingCertificate(t0, v0, G, math.inf, tail, rate)

    lo = t0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if c.cumulative(t0, mid) >= G:
            hi = mid
        else:
            lo = mid
    resid = c.cumulative(t0, hi) - G
    if abs(resid) > _RESIDUAL_TOL * max(1.0, G):
        raise ArithmeticError(f"settling time bisection ended with residual {resid:g}")
    return SettlingCertificate(t0, v0, G, hi, tail, rate)


def comparison_solution(rate: RateSpec, t0: float, v0: float, t: float,
                        method: str = "auto") -> float:
    """phi(t) for phi' = -c(t) g(phi), phi(t0) = v0, extended by 0 after settling."""
    if t < t0:
        raise ValueError("comparison_solution needs t >= t0")
    if v0 <= 0:
        return 0.0
    cum = rate.c.cumulative(t0, t)
    g = rate.g
    if g.alpha is not None and method == "auto":
        a = g.alpha
        base = v0 ** (1.0 - a) - (1.0 - a) * cum
        return base ** (1.0 / (1.0 - a)) if base > 0 else 0.0
    y = barrier_integral(g, v0, method=method) - cum
    if y <= 0:
        return 0.0
    return barrier_inverse(g, y, v_hi=v0, method=method)


def _validate_samples(times, values) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(times, dtype=float)
    w = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.shape != w.shape or t.size == 0:
        raise MalformedSamplesError("times and values must be 1-D arrays of equal length")
    if np.any(np.diff(t) < 0):
        raise MalformedSamplesError("sample times must be nondecreasing")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise MalformedSamplesError("sampled values must be finite and nonnegative")
    return t, w


def _first_violation(t: np.ndarray, margins: np.ndarray, tol: float) -> SampleCheck:
    bad = np.nonzero(margins > tol)[0]
    worst = float(margins.max()) if margins.size else 0.0
    if bad.size:
        i = int(bad[0])
        return SampleCheck(False, worst, (float(t[i]), float(margins[i])))
    return SampleCheck(True, worst)


def check_gronwall_power(times, w, c: GainFunction, alpha: float,
                         tol: float = 1e-6) -> SampleCheck:
    """Check w(t)**(1-a) <= w(t0)**(1-a) - (1-a) int_{t0}^t c at each sample.

    Past the point where the right side turns negative the bound is read
    as ``max(rhs, 0)``: the dominating solution has settled, so w must be 0.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    t, w = _validate_samples(times, w)
    p = 1.0 - alpha
    t0 = t[0]
    cum = np.array([c.cumulative(t0, ti) for ti in t])
    rhs = np.maximum(w[0] ** p - p * cum, 0.0)
    return _first_violation(t, w ** p - rhs, tol)


def check_comparison(times, w, rate: RateSpec, tol: float = 1e-9) -> SampleCheck:
    """Check w(t_i) <= phi(t_i) + tol, with phi started from (t_0, w_0)."""
    t, w = _validate_samples(times, w)
    t0, v0 = float(t[0]), float(w[0])
    phi = np.array([comparison_solution(rate, t0, v0, float(ti)) for ti in t])
    return _first_violation(t, w - phi, tol)
