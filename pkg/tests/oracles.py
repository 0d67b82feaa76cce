"""Independent reference computations used by the tests.

Nothing here calls into the package's numerical routines; each oracle
works from first principles (dense sums, fine-step integration, brute force).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate


def piecewise_integral(edges, values, t0, t1):
    """Integral of a right-continuous step function by summing overlaps."""
    total = 0.0
    bounds = list(edges) + [math.inf]
    for k, v in enumerate(values):
        lo, hi = max(bounds[k], t0), min(bounds[k + 1], t1)
        if hi > lo:
            total += v * (hi - lo)
    return total


def power_closed_form(alpha, v0, mass):
    base = v0 ** (1 - alpha) - (1 - alpha) * mass
    return base ** (1 / (1 - alpha)) if base > 0 else 0.0


def barrier_by_quad(g, v):
    """int_0^v 1/g by plain adaptive quadrature, no singularity handling."""
    val, _ = integrate.quad(lambda s: 1.0 / g(s), 0.0, v, limit=400, epsabs=0, epsrel=1e-10)
    return val


def euler_fine(rhs, t0, v0, t1, n):
    """Fixed-step explicit Euler, clamped at 0; returns (times, values)."""
    ts = np.linspace(t0, t1, n + 1)
    vs = np.empty_like(ts)
    vs[0] = v0
    for k in range(n):
        h = ts[k + 1] - ts[k]
        vs[k + 1] = max(vs[k] + h * rhs(ts[k], vs[k]), 0.0)
    return ts, vs


def dense_segment_distance(p, a, b, n=200001):
    s = np.linspace(0.0, 1.0, n)[:, None]
    pts = (1 - s) * np.asarray(a) + s * np.asarray(b)
    return float(np.min(np.linalg.norm(pts - np.asarray(p), axis=1)))


def one_sided_limit(f, x, side, kmax=12):
    """f(x +- 10^-k) for k up to kmax, taking the last value."""
    return f(x + side * 10.0 ** -kmax)


def central_difference_gradient(V, t, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    vt = (V(t + h, x) - V(t - h, x)) / (2 * h)
    vx = np.array([(V(t, x + h * e) - V(t, x - h * e)) / (2 * h) for e in np.eye(x.size)])
    return vt, vx
