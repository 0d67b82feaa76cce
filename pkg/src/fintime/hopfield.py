"""Hopfield networks with discontinuous activations as differential inclusions.

The network x' = -h(t,x) + B(t) g(t,x) + I(t) is regularized by replacing each
activation with its Filippov interval, which makes the right-hand side an
affine image of a box. The Lyapunov function is

    V(t, x) = exp(-t) |x| (|x| - exp(-|x|**(alpha - 1)))

with comparison rate c(t) = delta * exp((alpha - 1) t), g(v) = v**alpha.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .certifier import (
    BasinEstimate,
    CheckReport,
    GridSpec,
    LyapunovCandidate,
    NoBasinError,
    basin_estimate,
    check_stability,
    sphere_directions,
    summarize,
)
from .comparison import SettlingCertificate, settling_time_bound
from .functions import ComparisonNonlinearity, GainFunction, RateSpec
from .integrator import StepControl, SweepSummary, sweep_strong, verify_settling
from .setvalued import (
    AffineImage,
    CaratheodoryMap,
    MonotoneScalarFunction,
    Singleton,
    filippov_interval,
    product_box,
)

__all__ = [
    "AssumptionViolation",
    "HopfieldSpec",
    "HopfieldSystem",
    "DemoReport",
    "lyapunov_value",
    "lyapunov_gradient",
    "build",
    "validate",
    "verify_network_inequality",
    "demo",
    "reference_spec",
    "one_dim_spec",
    "sign_demo_spec",
]

log = logging.getLogger(__name__)


class AssumptionViolation(ValueError):
    """A standing assumption on the network data fails at a witness point."""

    def __init__(self, name: str, t: float, x=None, detail: str = ""):
        self.name = name
        self.t = t
        self.x = None if x is None else np.asarray(x, dtype=float).tolist()
        where = f"t={t:g}" + ("" if x is None else f", x={self.x}")
        super().__init__(f"assumption {name!r} violated at {where}" + (f": {detail}" if detail else ""))


@dataclass(frozen=True, eq=False)
class HopfieldSpec:
    """Data of the network x' = -h(t,x) + B(t) g(t,x) + I(t).

    ``h(t, x)`` acts coordinatewise and ``activations[i]`` is the
    nondecreasing g_i. ``a`` and ``b`` are the gains in the standing
    inequalities on the ball |x| < rho.
    """

    n: int
    h: Callable[[float, np.ndarray], np.ndarray]
    activations: tuple[MonotoneScalarFunction, ...]
    B: Callable[[float], np.ndarray]
    I: Callable[[float], np.ndarray]
    alpha: float
    delta: float
    rho: float
    a: GainFunction
    b: GainFunction
    mu: GainFunction | None = None
    name: str = ""
    config: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.activations) != self.n:
            raise ValueError("need one activation per coordinate")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.delta <= 0:
            raise ValueError("delta must be positive")

    def rate(self) -> RateSpec:
        return RateSpec(GainFunction.exponential(self.delta, self.alpha - 1.0),
                        ComparisonNonlinearity.power(self.alpha))

    def activation_values(self, x: np.ndarray) -> np.ndarray:
        return np.array([g(xi) for g, xi in zip(self.activations, x)])

    def filippov_box(self, x: np.ndarray) -> list[tuple[float, float]]:
        return [filippov_interval(g, xi) for g, xi in zip(self.activations, x)]

    def with_delta(self, delta: float) -> "HopfieldSpec":
        cfg = None if self.config is None else {**self.config, "delta": delta}
        return HopfieldSpec(self.n, self.h, self.activations, self.B, self.I, self.alpha,
                            delta, self.rho, self.a, self.b, self.mu, self.name, cfg)


def lyapunov_value(t: float, x, alpha: float) -> float:
    r = float(np.linalg.norm(x))
    if r == 0.0:
        return 0.0
    return math.exp(-t) * r * (r - math.exp(-(r ** (alpha - 1.0))))


def lyapunov_gradient(t: float, x, alpha: float) -> tuple[float, np.ndarray]:
    """(V_t, V_x); V_x = C(t) x (2 - (1/|x| + (1-a)|x|**(a-2)) exp(-|x|**(a-1)))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r = float(np.linalg.norm(x))
    if r == 0.0:
        return 0.0, np.zeros_like(x)
    C = math.exp(-t)
    e = math.exp(-(r ** (alpha - 1.0)))
    k = 2.0 - (1.0 / r + (1.0 - alpha) * r ** (alpha - 2.0)) * e
    return -C * r * (r - e), C * k * x


@dataclass(frozen=True, eq=False)
class HopfieldSystem:
    spec: HopfieldSpec
    inclusion: CaratheodoryMap
    V: LyapunovCandidate
    rate: RateSpec

    def tail_mass(self, t0: float = 0.0) -> float:
        """int_{t0}^inf c = delta / (1 - alpha) * exp((alpha - 1) t0)."""
        a = self.spec.alpha
        return self.spec.delta / (1.0 - a) * math.exp((a - 1.0) * t0)


def _estimate_mu(spec: HopfieldSpec) -> GainFunction:
    # sampled constant envelope with a factor-2 margin; presets state mu exactly
    dirs = sphere_directions(spec.n, 32 * spec.n)
    worst = 0.0
    for t in (0.0, 0.5, 1.0):
        Bt = np.asarray(spec.B(t), dtype=float)
        for r in np.geomspace(1e-3, 10.0, 25):
            for d in dirs:
                x = r * d
                corners = itertools.product(*spec.filippov_box(x))
                for gv in corners:
                    f = -np.asarray(spec.h(t, x)) + Bt @ np.asarray(gv) + np.asarray(spec.I(t))
                    worst = max(worst, float(np.linalg.norm(f)) / (1.0 + r))
    return GainFunction.constant(2.0 * worst)


def _validation_points(spec: HopfieldSpec, t_check: float, n_times: int = 9,
                       n_shells: int = 24, n_dirs: int = 24):
    times = np.linspace(0.0, t_check, n_times)
    radii = np.geomspace(1e-4 * spec.rho, spec.rho * (1.0 - 1e-9), n_shells)
    dirs = sphere_directions(spec.n, n_dirs)
    extra = []
    if spec.n > 1:
        # axis points, where coordinatewise discontinuities live
        for i in range(spec.n):
            for s in (1.0, -1.0):
                e = np.zeros(spec.n)
                e[i] = s
                extra.append(e)
    dirs = np.vstack([dirs] + ([np.array(extra)] if extra else []))
    return times, radii, dirs


def validate(spec: HopfieldSpec, t_check: float | None = None, tol: float = 1e-12) -> None:
    """Check the standing assumptions on a grid over [0, t_check] x B(0, rho).

    Raises :class:`AssumptionViolation` naming the first failed inequality.
    """
    if t_check is None:
        t_check = default_check_horizon(spec)
    times, radii, dirs = _validation_points(spec, t_check)
    zero = np.zeros(spec.n)
    a_exp = 2.0 * spec.alpha
    for t in times:
        It = np.asarray(spec.I(t), dtype=float)
        if np.any(np.abs(It) > tol):
            raise AssumptionViolation("I(t)=0", t, detail=f"I={It.tolist()}")
    for t in times:
        if np.any(np.abs(np.asarray(spec.h(t, zero), dtype=float)) > tol):
            raise AssumptionViolation("h(t,0)=0", t)
    for t in times:
        lhs = np.asarray(spec.B(t), dtype=float) @ spec.activation_values(zero)
        if np.any(np.abs(lhs + np.asarray(spec.I(t), dtype=float)) > tol):
            raise AssumptionViolation("B(t)g(t,0)=-I(t)", t)
    for t in times:
        gap = spec.a(t) - spec.b(t) * spec.rho ** (2.0 * (1.0 - spec.alpha))
        if gap < spec.delta - tol:
            raise AssumptionViolation("a(t)-b(t)rho^(2(1-alpha))>=delta", t,
                                      detail=f"lhs={gap:g} < delta={spec.delta:g}")
    for t in times:
        for r in radii:
            for d in dirs:
                x = r * d
                xh = float(x @ np.asarray(spec.h(t, x), dtype=float))
                if spec.a(t) * r ** a_exp > xh + tol * (1.0 + abs(xh)):
                    raise AssumptionViolation("a(t)|x|^(2alpha)<=<x,h(t,x)>", t, x)
    for t in times:
        Bt = np.asarray(spec.B(t), dtype=float)
        for r in radii:
            for d in dirs:
                x = r * d
                for gv in itertools.product(*spec.filippov_box(x)):
                    xbg = float(x @ (Bt @ np.asarray(gv)))
                    if xbg > spec.b(t) * r * r + tol * (1.0 + abs(xbg)):
                        raise AssumptionViolation("<x,B(t)g(t,x)><=b(t)|x|^2", t, x)


def default_check_horizon(spec: HopfieldSpec) -> float:
    """max(1, 2 T) with T the settling bound from V(0, x) at |x| = rho / 2."""
    x = np.zeros(spec.n)
    x[0] = 0.5 * spec.rho
    cert = settling_time_bound(spec.rate(), 0.0, lyapunov_value(0.0, x, spec.alpha))
    return max(1.0, 2.0 * cert.T_bound) if cert.bounded else 1.0


def build(spec: HopfieldSpec, validate_assumptions: bool = True,
          t_check: float | None = None) -> HopfieldSystem:
    """Wire the Filippov inclusion, Lyapunov candidate and rate of a network."""
    if validate_assumptions:
        validate(spec, t_check)

    def evaluate(t: float, x: np.ndarray):
        offset = -np.asarray(spec.h(t, x), dtype=float) + np.asarray(spec.I(t), dtype=float)
        base = product_box(spec.filippov_box(x))
        Bt = np.asarray(spec.B(t), dtype=float)
        if isinstance(base, Singleton):
            return Singleton(offset + Bt @ base.point)
        return AffineImage(Bt, offset, base)

    mu = spec.mu if spec.mu is not None else _estimate_mu(spec)
    inclusion = CaratheodoryMap(spec.n, evaluate, mu, equilibrium=True, name=spec.name)
    alpha = spec.alpha
    V = LyapunovCandidate(
        lambda t, x: lyapunov_value(t, x, alpha),
        lambda t, x: lyapunov_gradient(t, x, alpha),
        positive_definite=True,
        lipschitz=True,
        domain_radius=spec.rho,
        name="hopfield",
    )
    return HopfieldSystem(spec, inclusion, V, spec.rate())


def ball_grid(spec: HopfieldSpec, density: int = 10, t_max: float = 5.0) -> GridSpec:
    """Log-radial grid in B(0, rho) minus the origin."""
    n_dirs = 2 if spec.n == 1 else 4 * density
    return GridSpec(spec.n, times=tuple(np.linspace(0.0, t_max, density + 1).tolist()),
                    r_min=1e-4, r_max=spec.rho * (1.0 - 1e-9), n_shells=5 * density,
                    n_dirs=n_dirs)


def verify_network_inequality(sys: HopfieldSystem, grid: GridSpec | Sequence,
                            tol: float | None = None) -> CheckReport:
    """Evaluate V_t + V_x (B f - h) + c V**alpha at every Filippov vertex f.

    Uses the closed-form gradient and the network data directly, without
    going through the inclusion object, so it is an independent route to
    the quantity the strong-mode certifier computes.
    """
    spec = sys.spec
    alpha, delta = spec.alpha, spec.delta
    if isinstance(grid, GridSpec):
        pts, desc = grid.points(), grid.describe()
    else:
        pts = [(float(t), np.atleast_1d(np.asarray(x, dtype=float))) for t, x in grid]
        desc = {"explicit_points": len(pts)}
    pts = [(t, x) for t, x in pts if np.any(x != 0)]
    results = []
    for t, x in pts:
        r = float(np.linalg.norm(x))
        if r >= spec.rho:
            raise ValueError(f"grid point |x|={r:g} lies outside the ball of radius {spec.rho:g}")
        C = math.exp(-t)
        e = math.exp(-(r ** (alpha - 1.0)))
        body = r * (r - e)
        Vt = -C * body
        Vx = C * x * (2.0 - (1.0 / r + (1.0 - alpha) * r ** (alpha - 2.0)) * e)
        c_t = delta * math.exp((alpha - 1.0) * t)
        decay = c_t * (C * body) ** alpha
        Bt = np.asarray(spec.B(t), dtype=float)
        hx = np.asarray(spec.h(t, x), dtype=float)
        best, witness, scale = -math.inf, None, 0.0
        for f in itertools.product(*spec.filippov_box(x)):
            drift = float(Vx @ (Bt @ np.asarray(f) - hx))
            val = Vt + drift + decay
            if val > best:
                best, witness = val, Bt @ np.asarray(f) - hx
                scale = max(abs(Vt + drift), abs(decay))
        results.append((best, witness, scale))
    return summarize("network-inequality", desc, pts, results, heuristic=False, tol=tol)


@dataclass
class DemoReport:
    certificate: SettlingCertificate
    check: CheckReport | None
    sweep: SweepSummary
    settling_verdicts: dict[str, bool]
    basin: BasinEstimate | None
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        ok_check = self.check is None or self.check.passed
        return ok_check and self.sweep.all_settled and (
            not self.certificate.bounded or all(self.settling_verdicts.values()))

    def to_dict(self) -> dict:
        return {
            "certificate": self.certificate.to_dict(),
            "check": None if self.check is None else self.check.to_dict(),
            "sweep": self.sweep.to_dict(),
            "settling_verdicts": dict(self.settling_verdicts),
            "basin": None if self.basin is None else self.basin.to_dict(),
            "warnings": list(self.warnings),
            "passed": self.passed,
        }


def demo(sys: HopfieldSystem, t0: float, x0, ctrl: StepControl = StepControl(),
         n_random: int = 8, seed: int = 0, grid: GridSpec | None = None,
         eps: float | None = None, tol: float = 1e-5, run_check: bool = True) -> DemoReport:
    """Certificate, strong-mode grid check and multi-selection simulation."""
    spec = sys.spec
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    warnings: list[str] = []
    basin = None
    eps = spec.rho / 3.0 if eps is None else eps
    try:
        basin = basin_estimate(sys.V, sys.rate, t0, eps, spec.rho, dim=spec.n, seed=seed)
        if np.linalg.norm(x0) >= basin.delta:
            warnings.append(f"|x0|={np.linalg.norm(x0):g} is outside the certified basin "
                            f"delta={basin.delta:g}")
    except NoBasinError as exc:
        warnings.append(f"no basin estimate: {exc}")
    check = None
    if run_check:
        check = check_stability(sys.V, sys.inclusion, sys.rate, "strong",
                                grid if grid is not None else ball_grid(spec, density=4))
    cert = settling_time_bound(sys.rate, t0, sys.V(t0, x0))
    if not cert.bounded:
        warnings.append("settling bound is unbounded (tail mass of c does not exceed "
                        "G(V(t0,x0))); running simulation only")
        log.warning(warnings[-1])
    sweep = sweep_strong(sys.inclusion, sys.V, sys.rate, t0, x0, ctrl, n_random, seed=seed)
    verdicts = {}
    if cert.bounded:
        for run in sweep.runs:
            verdicts[run.strategy] = (run.settled_at is not None
                                      and verify_settling(run, cert, sys.V, tol))
    return DemoReport(cert, check, sweep, verdicts, basin, warnings)


# reference instances -------------------------------------------------------

def _sign_power_h(a: float, alpha: float):
    p = 2.0 * alpha - 1.0

    def h(t, x):
        x = np.asarray(x, dtype=float)
        return a * np.sign(x) * np.abs(x) ** p if p != 0 else a * np.sign(x)

    return h


def _constant_matrix(M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return lambda t: M


def _zero_input(n):
    z = np.zeros(n)
    return lambda t: z


def from_config(doc: dict) -> HopfieldSpec:
    """Inline network: h_i = a sign(x_i)|x_i|^(2 alpha - 1), constant B, I = input."""
    n = int(doc["n"])
    alpha = float(doc["alpha"])
    a = float(doc["a"])
    B = np.atleast_2d(np.asarray(doc["B"], dtype=float))
    if B.shape != (n, n):
        raise ValueError(f"B must be {n}x{n}")
    b = float(doc.get("b", max(0.0, float(np.max(np.linalg.eigvalsh(0.5 * (B + B.T)))))))
    act = doc.get("activation", "identity")
    acts = tuple(MonotoneScalarFunction.from_config(act) for _ in range(n))
    inp = np.asarray(doc.get("I", [0.0] * n), dtype=float)
    mu = doc.get("mu")
    jump = float(act.get("jump", 0.0)) if isinstance(act, dict) else (1.0 if act == "sign" else 0.0)
    if mu is None:
        norm_b = float(np.linalg.norm(B, 2))
        mu_val = max(norm_b, a * math.sqrt(n) + norm_b * jump * math.sqrt(n)
                     + float(np.linalg.norm(inp)) + norm_b)
        mu = {"kind": "const", "value": mu_val}
    cfg = {"kind": "hopfield", "n": n, "alpha": alpha, "a": a, "b": b,
           "delta": float(doc["delta"]), "rho": float(doc["rho"]), "B": B.tolist(),
           "activation": act, "I": inp.tolist(), "mu": mu}
    return HopfieldSpec(
        n=n, h=_sign_power_h(a, alpha), activations=acts, B=_constant_matrix(B),
        I=(lambda t: inp), alpha=alpha, delta=float(doc["delta"]), rho=float(doc["rho"]),
        a=GainFunction.constant(a), b=GainFunction.constant(b),
        mu=GainFunction.from_config(mu), name=doc.get("name", "inline"), config=cfg,
    )


REFERENCE_B = [[0.2, 1.0], [-1.0, 0.2]]


def reference_spec() -> HopfieldSpec:
    """Two neurons, alpha = 1/2, delta = 0.1, rho = 0.3, a = 0.5.

    Activations are the identity on |x| < 0.5 with a jump of 0.1 at
    |x| = 0.5, so the Filippov machinery is live but the jumps sit outside
    the ball. B has symmetric part 0.2 I, hence b = 0.2.
    """
    return from_config({"name": "hopfield-ref-1", "n": 2, "alpha": 0.5, "delta": 0.1,
                        "rho": 0.3, "a": 0.5, "b": 0.2, "B": REFERENCE_B,
                        "activation": {"kind": "step", "threshold": 0.5, "jump": 0.1}})


def one_dim_spec(a: float = 0.5, b_coef: float = 0.2, delta: float = 0.1,
                 rho: float = 0.3, alpha: float = 0.5) -> HopfieldSpec:
    """Scalar network h = a sign(x)|x|^(2 alpha - 1), g = identity, B = (b_coef)."""
    return from_config({"name": "hopfield-1d", "n": 1, "alpha": alpha, "delta": delta,
                        "rho": rho, "a": a, "b": max(b_coef, 0.0), "B": [[b_coef]],
                        "activation": "identity"})


def sign_demo_spec() -> HopfieldSpec:
    """Sign activations with a rotating B; simulation-only, not certificate-backed.

    <x, B sign(x)> exceeds b|x|^2 near the axes for small |x|, so the
    standing inequalities do not hold on any ball around the origin.
    """
    return from_config({"name": "hopfield-sign-2", "n": 2, "alpha": 0.5, "delta": 0.1,
                        "rho": 0.3, "a": 0.5, "b": 0.2, "B": [[0.0, 0.2], [-0.2, 0.0]],
                        "activation": "sign"})
