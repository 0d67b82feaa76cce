"""Grid-based checks of the weak and strong Lyapunov decrease conditions.

The checks are falsifiers: a failing grid point is a genuine counterexample
(up to the derivative surrogate), a pass is numerical evidence only.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import erfinv
from scipy.stats import qmc

from .comparison import barrier_integral, settling_time_bound
from .functions import GainFunction, RateSpec
from .setvalued import CaratheodoryMap, vertices

__all__ = [
    "DomainError",
    "LipschitzRequiredError",
    "NoBasinError",
    "LyapunovCandidate",
    "RateFunctionW",
    "GridSpec",
    "Violation",
    "CheckReport",
    "BasinEstimate",
    "epiderivative",
    "hypoderivative",
    "weak_condition_at",
    "strong_condition_at",
    "check_stability",
    "basin_estimate",
    "sphere_directions",
]

log = logging.getLogger(__name__)

H_GRID = 10.0 ** -np.arange(2, 9)
# the liminf/limsup surrogate is read off the finest levels only
TAIL_LEVELS = 2


class DomainError(ValueError):
    """Every probe x + h f' left the domain of V."""


class LipschitzRequiredError(ValueError):
    """Strong-mode check requested for a V not flagged locally Lipschitz."""


class NoBasinError(ValueError):
    """No positive basin radius could be certified."""


@dataclass(frozen=True, eq=False)
class LyapunovCandidate:
    """Scalar V(t, x) >= 0 with optional exact gradient.

    ``gradient(t, x)`` returns ``(V_t, V_x)`` and is trusted away from the
    origin. ``radial_bound`` is an increasing p with V(t,x) >= p(|x|).
    ``domain_radius`` limits where V may be evaluated (open ball).
    """

    value: Callable[[float, np.ndarray], float]
    gradient: Callable[[float, np.ndarray], tuple[float, np.ndarray]] | None = None
    positive_definite: bool = True
    radial_bound: Callable[[float], float] | None = None
    lipschitz: bool = False
    domain_radius: float = math.inf
    name: str = ""

    def __call__(self, t: float, x) -> float:
        return float(self.value(float(t), np.atleast_1d(np.asarray(x, dtype=float))))

    def in_domain(self, x) -> bool:
        return float(np.linalg.norm(x)) < self.domain_radius

    def check_invariants(self, times, points, tol: float = 1e-12) -> list[str]:
        """Return descriptions of sampled invariant failures (empty when clean)."""
        problems = []
        points = [np.atleast_1d(np.asarray(x, dtype=float)) for x in points]
        dim = points[0].size if points else 1
        for t in times:
            if abs(self(t, np.zeros(dim))) > tol:
                problems.append(f"V({t:g}, 0) != 0")
            for x in points:
                r = float(np.linalg.norm(x))
                if r == 0 or not self.in_domain(x):
                    continue
                v = self(t, x)
                if self.positive_definite and not v > 0:
                    problems.append(f"V({t:g}, {x.tolist()}) = {v:g} is not positive")
                if self.radial_bound is not None and v < self.radial_bound(r) - tol:
                    problems.append(f"V({t:g}, {x.tolist()}) below radial bound")
        return problems

    # presets -----------------------------------------------------------
    @classmethod
    def quadratic(cls, lipschitz: bool = True) -> "LyapunovCandidate":
        return cls(lambda t, x: float(x @ x), lambda t, x: (0.0, 2.0 * x),
                   radial_bound=lambda r: r * r, lipschitz=lipschitz, name="quadratic")

    @classmethod
    def norm(cls, lipschitz: bool = True) -> "LyapunovCandidate":
        def grad(t, x):
            r = float(np.linalg.norm(x))
            return 0.0, (x / r if r > 0 else np.zeros_like(x))

        return cls(lambda t, x: float(np.linalg.norm(x)), grad, radial_bound=lambda r: r,
                   lipschitz=lipschitz, name="norm")


@dataclass(frozen=True, eq=False)
class RateFunctionW:
    """Decrease rate W(t, x) with growth envelope |W| <= k(t)(1+|x|)."""

    evaluator: Callable[[float, np.ndarray], float]
    growth: GainFunction | None = None

    def __call__(self, t: float, x) -> float:
        return float(self.evaluator(float(t), np.atleast_1d(np.asarray(x, dtype=float))))

    def check_growth(self, points, tol: float = 1e-9) -> bool:
        if self.growth is None:
            return True
        return all(abs(self(t, x)) <= self.growth(t) * (1 + np.linalg.norm(x)) + tol
                   for t, x in points)

    @classmethod
    def from_rate(cls, V: LyapunovCandidate, rate: RateSpec) -> "RateFunctionW":
        """W(t, x) = c(t) g(V(t, x))."""
        return cls(lambda t, x: rate.c(t) * rate.g(V(t, x)))


def _difference_quotients(V: LyapunovCandidate, t: float, x: np.ndarray,
                          f: np.ndarray) -> list[np.ndarray]:
    """Quotients per h level; each entry holds the perturbed-direction values."""
    v0 = V(t, x)
    n = x.size
    levels = []
    for h in H_GRID:
        r = h ** 1.5
        dirs = [f] + [f + s * r * e for e in np.eye(n) for s in (1.0, -1.0)]
        qs = []
        for fp in dirs:
            y = x + h * fp
            if not V.in_domain(y):
                continue
            val = V(t + h, y)
            if math.isfinite(val):
                qs.append((val - v0) / h)
        levels.append(np.array(qs))
    if not any(q.size for q in levels):
        raise DomainError(f"all difference-quotient probes left the domain of V at x={x.tolist()}")
    return levels


def _surrogate(levels: list[np.ndarray], reducer) -> float:
    usable = [q for q in levels if q.size]
    return float(reducer(np.concatenate(usable[-TAIL_LEVELS:])))


def epiderivative(V: LyapunovCandidate, t: float, x, f) -> float:
    """Contingent epiderivative of V at (t, x) in direction (1, f).

    Exact V_t + <V_x, f> when a gradient is supplied and x != 0. Otherwise
    the minimum of difference quotients over the finest levels of the
    h-grid 1e-2 ... 1e-8, each with directions perturbed by h**1.5.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    f = np.atleast_1d(np.asarray(f, dtype=float))
    if V.gradient is not None and np.any(x != 0):
        vt, vx = V.gradient(float(t), x)
        return float(vt + np.dot(vx, f))
    return _surrogate(_difference_quotients(V, float(t), x, f), np.min)


def hypoderivative(V: LyapunovCandidate, t: float, x, f) -> float:
    """Contingent hypoderivative: as :func:`epiderivative` with max for min."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    f = np.atleast_1d(np.asarray(f, dtype=float))
    if V.gradient is not None and np.any(x != 0):
        vt, vx = V.gradient(float(t), x)
        return float(vt + np.dot(vx, f))
    return _surrogate(_difference_quotients(V, float(t), x, f), np.max)


def _condition(V, F, rate, t, x, strong: bool) -> tuple[float, np.ndarray, float]:
    """(margin, witness velocity, scale) at one point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    verts = vertices(F(t, x))
    deriv = hypoderivative if strong else epiderivative
    ds = np.array([deriv(V, t, x, f) for f in verts])
    k = int(np.argmax(ds)) if strong else int(np.argmin(ds))
    decay = rate.c(t) * rate.g(V(t, x))
    return float(ds[k] + decay), verts[k], max(abs(ds[k]), abs(decay))


def weak_condition_at(V: LyapunovCandidate, F: CaratheodoryMap, rate: RateSpec,
                      t: float, x) -> float:
    """min over vertices f of F(t,x) of D_up V(t,x)(1,f) + c(t) g(V(t,x))."""
    return _condition(V, F, rate, t, x, strong=False)[0]


def strong_condition_at(V: LyapunovCandidate, F: CaratheodoryMap, rate: RateSpec,
                        t: float, x) -> float:
    """max over vertices f of F(t,x) of D_down V(t,x)(1,f) + c(t) g(V(t,x))."""
    _require_lipschitz(V)
    return _condition(V, F, rate, t, x, strong=True)[0]


def _require_lipschitz(V: LyapunovCandidate) -> None:
    if not V.lipschitz:
        raise LipschitzRequiredError(
            "strong finite-time stability requires V to be locally Lipschitz continuous; "
            "the candidate is not flagged as such"
        )


def sphere_directions(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic, roughly uniform unit vectors in R^n."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        ang = 2.0 * np.pi * (np.arange(count) + 0.5) / count
        return np.column_stack([np.cos(ang), np.sin(ang)])
    sampler = qmc.Sobol(d=n, scramble=True, seed=seed)
    u = sampler.random(count)
    z = np.sqrt(2.0) * erfinv(2.0 * np.clip(u, 1e-12, 1 - 1e-12) - 1.0)
    return z / np.linalg.norm(z, axis=1, keepdims=True)


@dataclass(frozen=True)
class GridSpec:
    """Points (t, x) on which a decrease condition is evaluated.

    Radii are geometric from ``r_min`` to ``r_max`` (``n_shells`` of them),
    crossed with ``n_dirs`` sphere directions and the sample ``times``
    minus ``exceptional_times``. ``extra_points`` are appended verbatim.
    """

    dim: int
    times: tuple[float, ...] = (0.0,)
    r_min: float = 1e-4
    r_max: float = 1.0
    n_shells: int = 20
    n_dirs: int = 16
    exceptional_times: tuple[float, ...] = ()
    extra_points: tuple[tuple[float, tuple[float, ...]], ...] = ()
    seed: int = 0

    @classmethod
    def empty(cls, dim: int) -> "GridSpec":
        return cls(dim, times=(), n_shells=0)

    def points(self) -> list[tuple[float, np.ndarray]]:
        ts = [t for t in self.times if t not in set(self.exceptional_times)]
        pts: list[tuple[float, np.ndarray]] = []
        if self.n_shells > 0 and ts:
            if self.n_shells == 1:
                radii = np.array([self.r_max])
            else:
                radii = np.geomspace(self.r_min, self.r_max, self.n_shells)
            dirs = sphere_directions(self.dim, self.n_dirs, self.seed)
            for t in ts:
                for r in radii:
                    for d in dirs:
                        pts.append((float(t), r * d))
        for t, x in self.extra_points:
            pts.append((float(t), np.asarray(x, dtype=float)))
        return pts

    def describe(self) -> dict:
        return {
            "dim": self.dim, "times": list(self.times), "r_min": self.r_min,
            "r_max": self.r_max, "n_shells": self.n_shells, "n_dirs": self.n_dirs,
            "exceptional_times": list(self.exceptional_times),
            "extra_points": len(self.extra_points),
        }


@dataclass(frozen=True)
class Violation:
    t: float
    x: tuple[float, ...]
    margin: float
    witness: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"t": self.t, "x": list(self.x), "margin": self.margin,
                "witness": list(self.witness)}


@dataclass
class CheckReport:
    mode: str
    grid: dict
    n_evaluated: int
    violations: list[Violation] = field(default_factory=list)
    max_margin: float = -math.inf
    min_margin: float = math.inf
    mean_margin: float = math.nan
    heuristic: bool = False
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self, max_violations: int = 50) -> dict:
        def num(v):
            return v if math.isfinite(v) else None

        return {
            "mode": self.mode,
            "passed": self.passed,
            "grid": self.grid,
            "n_evaluated": self.n_evaluated,
            "n_violations": len(self.violations),
            "violations": [v.to_dict() for v in self.violations[:max_violations]],
            "margin_stats": {"max": num(self.max_margin), "min": num(self.min_margin),
                             "mean": num(self.mean_margin)},
            "heuristic_vertex_reduction": self.heuristic,
            "warnings": list(self.warnings),
        }


def default_tolerance(scale: float) -> float:
    return 1e-9 * (1.0 + abs(scale))


def _evaluate_chunk(V, F, rate, strong, chunk):
    out = []
    for t, x in chunk:
        out.append(_condition(V, F, rate, t, x, strong))
    return out


def summarize(mode: str, grid: dict, points, results, heuristic: bool,
              tol: float | None = None) -> CheckReport:
    """Fold per-point (margin, witness, scale) results into a report."""
    report = CheckReport(mode=mode, grid=grid, n_evaluated=len(points), heuristic=heuristic)
    if not points:
        report.warnings.append("empty grid: condition holds vacuously")
        log.warning("empty grid: condition holds vacuously")
        return report
    margins = np.array([r[0] for r in results])
    report.max_margin = float(margins.max())
    report.min_margin = float(margins.min())
    report.mean_margin = float(margins.mean())
    for (t, x), (margin, witness, scale) in zip(points, results):
        limit = default_tolerance(scale) if tol is None else tol
        if margin > limit:
            report.violations.append(Violation(float(t), tuple(np.asarray(x, float).tolist()),
                                               float(margin),
                                               tuple(np.asarray(witness, float).tolist())))
    if heuristic:
        report.warnings.append("V has no exact gradient: vertex reduction and contingent "
                               "derivatives are numerical surrogates")
    return report


def check_stability(V: LyapunovCandidate, F: CaratheodoryMap, rate: RateSpec,
                    mode: str, grid: GridSpec | Sequence[tuple[float, np.ndarray]],
                    tol: float | None = None, executor: Executor | None = None,
                    chunk_size: int = 256) -> CheckReport:
    """Evaluate the weak or strong condition on every grid point.

    The origin is skipped. With an ``executor`` the grid is split into
    chunks evaluated concurrently; results are reassembled in grid order,
    so the report does not depend on scheduling.
    """
    if mode not in ("weak", "strong"):
        raise ValueError("mode must be 'weak' or 'strong'")
    strong = mode == "strong"
    if strong:
        _require_lipschitz(V)
    if isinstance(grid, GridSpec):
        pts, desc = grid.points(), grid.describe()
    else:
        pts = [(float(t), np.atleast_1d(np.asarray(x, dtype=float))) for t, x in grid]
        desc = {"explicit_points": len(pts)}
    pts = [(t, x) for t, x in pts if np.any(x != 0)]
    chunks = [pts[i:i + chunk_size] for i in range(0, len(pts), chunk_size)]
    if executor is None:
        parts = [_evaluate_chunk(V, F, rate, strong, c) for c in chunks]
    else:
        futures = [executor.submit(_evaluate_chunk, V, F, rate, strong, c) for c in chunks]
        parts = [fut.result() for fut in futures]
    results = [r for part in parts for r in part]
    return summarize(mode, desc, pts, results, heuristic=V.gradient is None, tol=tol)


@dataclass(frozen=True)
class BasinEstimate:
    delta: float
    T0: float
    V_eps: float
    R: float
    rho0: float

    def to_dict(self) -> dict:
        return {"delta": self.delta, "T0": self.T0, "V_eps": self.V_eps, "R": self.R,
                "rho0": self.rho0}


def _ball_sup(V: LyapunovCandidate, t: float, radius: float, dirs: np.ndarray,
              n_radii: int = 16) -> float:
    radii = radius * np.linspace(1.0 / n_radii, 1.0, n_radii)
    return max(V(t, r * d) for r in radii for d in dirs)


def basin_estimate(V: LyapunovCandidate, rate: RateSpec, t0: float, eps: float,
                   domain_radius: float, dim: int = 1, n_times: int = 33,
                   seed: int = 0) -> BasinEstimate:
    """Radius delta such that starting in the delta-ball keeps V below V_eps / 2.

    The ball radius R of the construction is taken at ``eps`` itself, the
    smallest admissible choice, which gives the shortest horizon T0 and
    therefore the largest V_eps. V_eps is the sampled infimum of V over
    [t0, T0] x {|x| = eps} using 64 * dim sphere directions.
    """
    if not 0 < eps < domain_radius:
        raise NoBasinError(f"eps={eps:g} must lie inside the domain radius {domain_radius:g}")
    dirs = sphere_directions(dim, 64 * dim, seed)
    R = eps
    rho0 = _ball_sup(V, t0, R, dirs)
    tail = rate.c.tail_mass(t0)
    G = barrier_integral(rate.g, rho0)
    if not tail > G:
        raise NoBasinError(f"tail mass {tail:g} of c does not exceed G(rho0)={G:g}")
    T0 = settling_time_bound(rate, t0, rho0).T_bound
    times = np.linspace(t0, T0, n_times)
    V_eps = min(V(t, eps * d) for t in times for d in dirs)
    if not V_eps > 1e-300:
        raise NoBasinError(f"V_eps estimate {V_eps:g} is not positive")
    lo, hi = 0.0, eps
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _ball_sup(V, t0, mid, dirs) < 0.5 * V_eps:
            lo = mid
        else:
            hi = mid
    if lo <= 0:
        raise NoBasinError("no positive delta keeps V below V_eps / 2")
    return BasinEstimate(lo, T0, V_eps, R, rho0)
