"""Explicit Euler trajectories of x' in F(t, x) under a velocity selection rule."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .certifier import LyapunovCandidate, RateFunctionW, epiderivative, weak_condition_at
from .comparison import SettlingCertificate, comparison_solution, settling_time_bound
from .functions import RateSpec
from .setvalued import CaratheodoryMap, point_set_distance, vertices

__all__ = [
    "BlowUpError",
    "StepStallError",
    "UnsettledError",
    "SelectionStrategy",
    "StepControl",
    "Trajectory",
    "DecreaseCheck",
    "SweepSummary",
    "integrate",
    "verify_decrease",
    "verify_settling",
    "sweep_strong",
]


class BlowUpError(ArithmeticError):
    """State left the a priori linear-growth envelope."""


class StepStallError(ArithmeticError):
    """Step control fell below the minimum step."""


class UnsettledError(ValueError):
    """Settling verification needs a settled trajectory and a finite bound."""


@dataclass(frozen=True)
class SelectionStrategy:
    """How a velocity is picked from the vertices of F(t, x).

    kind: ``steepest`` (smallest epiderivative of V, lowest index on ties),
    ``fixed`` (vertex ``index``, wrapped modulo the vertex count),
    ``random`` (uniform vertex from a generator seeded with ``seed``),
    ``continuity`` (vertex closest to the previous velocity).
    """

    kind: str = "steepest"
    index: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("steepest", "fixed", "random", "continuity"):
            raise ValueError(f"unknown selection strategy {self.kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "fixed":
            return f"fixed-{self.index}"
        if self.kind == "random":
            return f"random-{self.seed}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "SelectionStrategy":
        """Parse ``steepest``, ``continuity``, ``fixed-<i>`` or ``random-<seed>``."""
        if text in ("steepest", "continuity"):
            return cls(text)
        kind, _, num = text.partition("-")
        if kind in ("fixed", "random") and num.isdigit():
            return cls(kind, index=int(num)) if kind == "fixed" else cls(kind, seed=int(num))
        raise ValueError(f"unknown selection strategy {text!r}")


@dataclass(frozen=True)
class StepControl:
    h0: float = 1e-3
    h_min: float = 1e-12
    h_max: float = 1e-2
    shrink: float = 0.5
    grow: float = 2.0
    max_rel_change: float = 0.1
    eps_zero: float = 1e-6
    tol_set: float = 1e-9
    lipschitz_slack: float = 10.0
    max_midpoint_halvings: int = 6
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not 0 < self.h_min <= self.h0 <= self.h_max:
            raise ValueError("step control needs 0 < h_min <= h0 <= h_max")
        if self.eps_zero <= 0:
            raise ValueError("dead-zone radius must be positive")
        if not 0 < self.shrink < 1 <= self.grow:
            raise ValueError("need 0 < shrink < 1 <= grow")

    @classmethod
    def from_config(cls, doc: dict | None) -> "StepControl":
        return cls(**(doc or {}))


@dataclass
class Trajectory:
    """Sampled path; ``velocities[k]`` drives the step from sample k to k+1."""

    times: np.ndarray
    states: np.ndarray
    velocities: np.ndarray
    V: np.ndarray | None = None
    phi: np.ndarray | None = None
    settled_at: float | None = None
    strategy: str = ""
    n_rejected: int = 0

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.states, axis=1)))

    def settled_flags(self) -> np.ndarray:
        if self.settled_at is None:
            return np.zeros(self.times.size, dtype=int)
        return (self.times >= self.settled_at).astype(int)

    def to_csv(self) -> str:
        """CSV text with header t,x_1..x_n,V,phi_bound,settled (17 significant digits)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"x_{i + 1}" for i in range(self.dim)]
                        + ["V", "phi_bound", "settled"])
        flags = self.settled_flags()
        fmt = "{:.17g}".format
        for k in range(self.times.size):
            row = [fmt(self.times[k])] + [fmt(v) for v in self.states[k]]
            row.append(fmt(self.V[k]) if self.V is not None else "")
            row.append(fmt(self.phi[k]) if self.phi is not None else "")
            row.append(str(int(flags[k])))
            writer.writerow(row)
        return buf.getvalue()


def _growth_bound(F: CaratheodoryMap, t0: float, t: float, r0: float) -> float:
    mass = F.growth.cumulative(t0, t)
    return (1.0 + r0) * math.exp(min(mass, 700.0)) - 1.0


def _select(sel: SelectionStrategy, verts: np.ndarray, V, t: float, x: np.ndarray,
            prev: np.ndarray | None, rng: np.random.Generator) -> np.ndarray:
    if verts.shape[0] == 1:
        if sel.kind == "random":
            rng.integers(1)
        return verts[0]
    if sel.kind == "fixed":
        return verts[sel.index % verts.shape[0]]
    if sel.kind == "random":
        return verts[int(rng.integers(verts.shape[0]))]
    if sel.kind == "continuity" and prev is not None:
        return verts[int(np.argmin(np.linalg.norm(verts - prev, axis=1)))]
    if sel.kind in ("steepest", "continuity"):
        if V is not None and np.any(x != 0):
            ds = np.array([epiderivative(V, t, x, f) for f in verts])
            return verts[int(np.argmin(ds))]
        return verts[int(np.argmin(np.linalg.norm(verts, axis=1)))]
    raise AssertionError(sel.kind)


def _may_snap(F, V, rate, t, x, tol=1e-12) -> bool:
    if not F.equilibrium:
        return False
    if V is None or rate is None or not np.any(x != 0):
        return True
    return weak_condition_at(V, F, rate, t, x) <= tol


def integrate(F: CaratheodoryMap, sel: SelectionStrategy, t0: float, x0, t_end: float,
              ctrl: StepControl = StepControl(), V: LyapunovCandidate | None = None,
              rate: RateSpec | None = None) -> Trajectory:
    """Explicit Euler with step halving and a dead zone around the origin.

    A step is halved when the displacement exceeds ``max_rel_change * |x|``
    or (at most ``max_midpoint_halvings`` times per step) when the selected
    velocity is farther than ``tol_set + lipschitz_slack * h`` from the set
    at the step midpoint. A midpoint residual that does not shrink under
    halving marks a switching surface; the step is then taken at the last
    size-admissible length, which realizes sliding motion as chattering.
    Once |x| <= eps_zero and the weak decrease margin there is <= 0, the
    state is snapped to 0 and integration stops.
    """
    if not t0 < t_end:
        raise ValueError("integrate needs t0 < t_end")
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    if x.size != F.dim:
        raise ValueError(f"x0 has dimension {x.size}, F has {F.dim}")
    rng = np.random.default_rng(sel.seed)
    r0 = float(np.linalg.norm(x))
    t = float(t0)
    times, states, vels = [t], [x.copy()], []
    settled_at = None
    rejected = 0
    h = ctrl.h0
    prev = None

    if float(np.linalg.norm(x)) <= ctrl.eps_zero and _may_snap(F, V, rate, t, x):
        states[-1] = np.zeros_like(x)
        settled_at = t
    steps = 0
    while settled_at is None and t < t_end:
        steps += 1
        if steps > ctrl.max_steps:
            raise StepStallError(f"exceeded {ctrl.max_steps} steps at t={t:g}")
        S = F(t, x)
        verts = vertices(S)
        f = _select(sel, verts, V, t, x, prev, rng)
        rx = float(np.linalg.norm(x))
        speed = float(np.linalg.norm(f))
        h_try = min(h, t_end - t)
        mid_halvings = 0
        last_resid = math.inf
        while True:
            if h_try < ctrl.h_min and h_try < t_end - t:
                raise StepStallError(f"step fell below h_min={ctrl.h_min:g} at t={t:g}")
            if h_try * speed > ctrl.max_rel_change * max(rx, ctrl.eps_zero):
                h_try *= ctrl.shrink
                rejected += 1
                continue
            if mid_halvings < ctrl.max_midpoint_halvings:
                x_mid = x + 0.5 * h_try * f
                resid = point_set_distance(f, F(t + 0.5 * h_try, x_mid))
                if resid > ctrl.tol_set + ctrl.lipschitz_slack * h_try * (1.0 + speed):
                    if resid > 0.75 * last_resid:
                        # residual does not shrink with h: a switching surface is
                        # crossed, halving cannot help, keep the larger step
                        h_try /= ctrl.shrink
                        mid_halvings -= 1
                        break
                    last_resid = resid
                    h_try *= ctrl.shrink
                    mid_halvings += 1
                    rejected += 1
                    continue
            break
        x_new = x + h_try * f
        t_new = t + h_try
        if t_end - t_new < 1e-12 * max(1.0, abs(t_end)):
            t_new = t_end
        bound = _growth_bound(F, t0, t_new, r0)
        if float(np.linalg.norm(x_new)) > 1.1 * bound + 1e-6:
            raise BlowUpError(f"|x|={np.linalg.norm(x_new):g} exceeds growth envelope "
                              f"{bound:g} at t={t_new:g}")
        vels.append(f.copy())
        prev = f
        t, x = t_new, x_new
        if float(np.linalg.norm(x)) <= ctrl.eps_zero and _may_snap(F, V, rate, t, x):
            x = np.zeros_like(x)
            settled_at = t
        times.append(t)
        states.append(x.copy())
        # grow from the step that passed the size test, ignoring midpoint halvings
        h = min(ctrl.h_max, ctrl.grow * h_try * 2 ** mid_halvings)

    times_a = np.array(times)
    states_a = np.array(states)
    vels_a = np.array(vels).reshape(len(vels), F.dim)
    traj = Trajectory(times_a, states_a, vels_a, settled_at=settled_at, strategy=sel.label,
                      n_rejected=rejected)
    if V is not None:
        traj.V = np.array([V(tk, xk) for tk, xk in zip(times_a, states_a)])
        if rate is not None:
            v0 = traj.V[0]
            traj.phi = np.array([comparison_solution(rate, t0, v0, tk) for tk in times_a])
    return traj


@dataclass(frozen=True)
class DecreaseCheck:
    passed: bool
    worst_margin: float

    def __bool__(self) -> bool:
        return self.passed


def verify_decrease(traj: Trajectory, V: LyapunovCandidate, W: RateFunctionW,
                    tol: float = 1e-9) -> DecreaseCheck:
    """Check V(s,x(s)) <= V(t,x(t)) - int_t^s W for every sample pair t < s.

    The integral of W is the cumulative trapezoid rule along the samples.
    With a_k = V_k + I_k the condition is a_s - a_t <= 0 for t < s, so a
    running minimum makes the all-pairs check linear in the sample count.
    """
    if traj.times.size < 2:
        raise ValueError("verify_decrease needs at least two samples")
    ts = traj.times
    vs = np.array([V(t, x) for t, x in zip(ts, traj.states)])
    ws = np.array([W(t, x) for t, x in zip(ts, traj.states)])
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (ws[1:] + ws[:-1]) * np.diff(ts))])
    a = vs + integral
    running_min = np.minimum.accumulate(a)[:-1]
    worst = float(np.max(a[1:] - running_min))
    return DecreaseCheck(worst <= tol, worst)


def verify_settling(traj: Trajectory, cert: SettlingCertificate, V: LyapunovCandidate,
                    tol: float = 1e-5) -> bool:
    """Settled no later than the certified bound and V dominated by phi throughout."""
    if not cert.bounded:
        raise UnsettledError("certificate is unbounded; nothing to verify against")
    if traj.settled_at is None:
        raise UnsettledError("trajectory did not settle")
    if cert.rate is None:
        raise ValueError("certificate carries no rate specification")
    if traj.settled_at > cert.T_bound + tol:
        return False
    for t, x in zip(traj.times, traj.states):
        phi = comparison_solution(cert.rate, cert.t0, cert.v0, float(t))
        if V(t, x) > phi + tol:
            return False
    return True


@dataclass
class SweepSummary:
    certificate: SettlingCertificate
    runs: list[Trajectory] = field(default_factory=list)
    max_sup_norm: float = 0.0
    max_settled_at: float | None = None
    all_settled: bool = False
    all_before_bound: bool = False

    def to_dict(self) -> dict:
        return {
            "certificate": self.certificate.to_dict(),
            "n_runs": len(self.runs),
            "strategies": [r.strategy for r in self.runs],
            "max_sup_norm": self.max_sup_norm,
            "max_settled_at": self.max_settled_at,
            "all_settled": self.all_settled,
            "all_before_bound": self.all_before_bound,
        }


def sweep_strong(F: CaratheodoryMap, V: LyapunovCandidate, rate: RateSpec, t0: float, x0,
                 ctrl: StepControl, n_random: int, t_end: float | None = None,
                 seed: int = 0, tol: float = 0.0) -> SweepSummary:
    """Integrate under every fixed-vertex strategy at (t0, x0) plus random ones."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    cert = settling_time_bound(rate, t0, V(t0, x0))
    if t_end is None:
        t_end = (t0 + 2.0 * (cert.T_bound - t0) + 1.0) if cert.bounded else t0 + 10.0
    n_fixed = vertices(F(t0, x0)).shape[0]
    strategies: Sequence[SelectionStrategy] = (
        [SelectionStrategy("fixed", index=i) for i in range(n_fixed)]
        + [SelectionStrategy("random", seed=seed + k) for k in range(n_random)]
    )
    summary = SweepSummary(cert)
    for s in strategies:
        summary.runs.append(integrate(F, s, t0, x0, t_end, ctrl, V, rate))
    summary.max_sup_norm = max(r.sup_norm for r in summary.runs)
    settled = [r.settled_at for r in summary.runs]
    summary.all_settled = all(s is not None for s in settled)
    if summary.all_settled:
        summary.max_settled_at = max(settled)
        summary.all_before_bound = cert.bounded and summary.max_settled_at <= cert.T_bound + tol
    return summary
