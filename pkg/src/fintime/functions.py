"""Scalar gain functions c(t) and comparison nonlinearities g(v).

Both families are restricted to named presets and sampled tables so that
every instance can be serialized to a small JSON document.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

__all__ = [
    "GainFunction",
    "ComparisonNonlinearity",
    "RateSpec",
    "ConfigError",
]


class ConfigError(ValueError):
    """Raised when a function description is malformed."""


def _as_floats(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigError(f"{name} must be a nonempty 1-D list of numbers")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class GainFunction:
    """Nonnegative, locally integrable function c on [0, inf).

    Supported kinds
    ---------------
    ``const``      c(t) = value
    ``power``      c(t) = scale * t**alpha, alpha > -1
    ``exp``        c(t) = delta * exp(rate * t)
    ``piecewise``  piecewise-constant: values[i] on [edges[i], edges[i+1]),
                   zero outside [edges[0], edges[-1]]
    ``table``      piecewise-linear through samples (t[i], v[i]), zero
                   outside the sampled range

    Integrals are evaluated from closed-form antiderivatives, so
    :meth:`cumulative` is exact up to rounding for every kind.
    """

    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        k, p = self.kind, self.params
        if k == "const":
            if float(p["value"]) < 0:
                raise ConfigError("const gain must be nonnegative")
        elif k == "power":
            if float(p.get("scale", 1.0)) < 0 or float(p["alpha"]) <= -1:
                raise ConfigError("power gain needs scale >= 0 and alpha > -1")
        elif k == "exp":
            if float(p["delta"]) < 0:
                raise ConfigError("exp gain needs delta >= 0")
        elif k == "piecewise":
            edges = _as_floats(p["edges"], "edges")
            values = _as_floats(p["values"], "values")
            if edges.size != values.size + 1:
                raise ConfigError("piecewise gain needs len(edges) == len(values) + 1")
            if np.any(np.diff(edges) <= 0) or edges[0] < 0:
                raise ConfigError("piecewise edges must be increasing and >= 0")
            if np.any(values < 0):
                raise ConfigError("piecewise values must be nonnegative")
            # cumulative integral at each edge
            object.__setattr__(
                self, "_cum", np.concatenate([[0.0], np.cumsum(values * np.diff(edges))])
            )
            object.__setattr__(self, "_edges", edges)
            object.__setattr__(self, "_values", values)
        elif k == "table":
            t = _as_floats(p["t"], "t")
            v = _as_floats(p["v"], "v")
            if t.size != v.size or t.size < 2:
                raise ConfigError("table gain needs matching t and v with >= 2 samples")
            if np.any(np.diff(t) <= 0) or t[0] < 0:
                raise ConfigError("table t must be increasing and >= 0")
            if np.any(v < 0):
                raise ConfigError("table values must be nonnegative")
            seg = 0.5 * (v[1:] + v[:-1]) * np.diff(t)
            object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(seg)]))
            object.__setattr__(self, "_edges", t)
            object.__setattr__(self, "_values", v)
        else:
            raise ConfigError(f"unknown gain kind {k!r}")

    # constructors -------------------------------------------------------
    @classmethod
    def constant(cls, value: float) -> "GainFunction":
        return cls("const", {"value": float(value)})

    @classmethod
    def power(cls, alpha: float, scale: float = 1.0) -> "GainFunction":
        return cls("power", {"alpha": float(alpha), "scale": float(scale)})

    @classmethod
    def exponential(cls, delta: float, rate: float) -> "GainFunction":
        return cls("exp", {"delta": float(delta), "rate": float(rate)})

    @classmethod
    def piecewise(cls, edges, values) -> "GainFunction":
        return cls("piecewise", {"edges": [float(e) for e in edges],
                                 "values": [float(v) for v in values]})

    @classmethod
    def table(cls, t, v) -> "GainFunction":
        return cls("table", {"t": [float(s) for s in t], "v": [float(s) for s in v]})

    @classmethod
    def from_config(cls, doc: dict) -> "GainFunction":
        if not isinstance(doc, dict) or "kind" not in doc:
            raise ConfigError("gain function must be an object with a 'kind' field")
        doc = dict(doc)
        kind = doc.pop("kind")
        try:
            if kind == "table" and "edges" in doc:
                return cls.piecewise(doc["edges"], doc["values"])
            return cls(kind, doc)
        except KeyError as exc:
            raise ConfigError(f"gain function {kind!r} is missing field {exc}") from None

    def to_config(self) -> dict:
        return {"kind": self.kind, **self.params}

    def scaled(self, factor: float) -> "GainFunction":
        """Return ``factor * c`` as a new gain of the same kind."""
        if factor < 0:
            raise ValueError("scale factor must be nonnegative")
        k, p = self.kind, self.params
        if k == "const":
            return GainFunction.constant(factor * p["value"])
        if k == "power":
            return GainFunction.power(p["alpha"], factor * p.get("scale", 1.0))
        if k == "exp":
            return GainFunction.exponential(factor * p["delta"], p["rate"])
        if k == "piecewise":
            return GainFunction.piecewise(p["edges"], [factor * v for v in p["values"]])
        return GainFunction.table(p["t"], [factor * v for v in p["v"]])

    # evaluation ---------------------------------------------------------
    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k, p = self.kind, self.params
        if k == "const":
            out = np.full_like(t, p["value"])
        elif k == "power":
            out = p.get("scale", 1.0) * np.power(np.maximum(t, 0.0), p["alpha"])
        elif k == "exp":
            out = p["delta"] * np.exp(p["rate"] * t)
        elif k == "piecewise":
            idx = np.searchsorted(self._edges, t, side="right") - 1
            inside = (idx >= 0) & (idx < self._values.size)
            out = np.where(inside, self._values[np.clip(idx, 0, self._values.size - 1)], 0.0)
        else:
            inside = (t >= self._edges[0]) & (t <= self._edges[-1])
            out = np.where(inside, np.interp(t, self._edges, self._values), 0.0)
        return float(out) if out.ndim == 0 else out

    def _antiderivative(self, t: float) -> float:
        """Integral of c from 0 (or the first sample) up to ``t``."""
        k, p = self.kind, self.params
        if k == "const":
            return p["value"] * t
        if k == "power":
            a = p["alpha"]
            return p.get("scale", 1.0) * t ** (a + 1.0) / (a + 1.0)
        if k == "exp":
            r = p["rate"]
            if r == 0.0:
                return p["delta"] * t
            return p["delta"] * math.expm1(r * t) / r
        edges, cum = self._edges, self._cum
        if t <= edges[0]:
            return 0.0
        if t >= edges[-1]:
            return float(cum[-1])
        i = int(np.searchsorted(edges, t, side="right")) - 1
        dt = t - edges[i]
        if k == "piecewise":
            return float(cum[i] + self._values[i] * dt)
        v0, v1 = self._values[i], self._values[i + 1]
        slope = (v1 - v0) / (edges[i + 1] - edges[i])
        return float(cum[i] + v0 * dt + 0.5 * slope * dt * dt)

    def cumulative(self, t0: float, t1: float) -> float:
        """Integral of c over [t0, t1]; ``t1`` may be ``inf``."""
        if t1 < t0:
            raise ValueError(f"cumulative gain needs t0 <= t1, got {t0} > {t1}")
        if t1 == t0:
            return 0.0
        if math.isinf(t1):
            return self.tail_mass(t0)
        return max(0.0, self._antiderivative(t1) - self._antiderivative(t0))

    def tail_mass(self, t0: float) -> float:
        """Integral of c over [t0, inf), ``inf`` when divergent."""
        k, p = self.kind, self.params
        if k == "const":
            return math.inf if p["value"] > 0 else 0.0
        if k == "power":
            return math.inf if p.get("scale", 1.0) > 0 else 0.0
        if k == "exp":
            if p["delta"] == 0:
                return 0.0
            r = p["rate"]
            if r >= 0:
                return math.inf
            return -p["delta"] * math.exp(r * t0) / r
        return max(0.0, float(self._cum[-1]) - self._antiderivative(t0))

    def has_infinite_tail(self) -> bool:
        return math.isinf(self.tail_mass(0.0))


@dataclass(frozen=True, eq=False)
class ComparisonNonlinearity:
    """Increasing g on [0, inf) with g(0) = 0 and an integrable 1/g near 0.

    ``beta`` and ``m`` declare the lower bound g(v) >= m * v**beta near the
    origin (beta < 1). Quadrature of 1/g uses it to remove the endpoint
    singularity.

    Supported kinds are ``power`` (g(v) = v**alpha, 0 < alpha < 1), ``table``
    (piecewise linear through samples with a power-law head below the first
    sample) and ``callable`` (arbitrary user function, not serializable).
    """

    kind: str
    params: dict[str, Any] = field(default_factory=dict)
    func: Callable[[float], float] | None = None

    def __post_init__(self) -> None:
        k, p = self.kind, self.params
        if k == "power":
            a = float(p["alpha"])
            if not 0.0 < a < 1.0:
                raise ConfigError("power nonlinearity needs 0 < alpha < 1")
        elif k == "table":
            v = _as_floats(p["v"], "v")
            g = _as_floats(p["g"], "g")
            if v.size != g.size:
                raise ConfigError("table nonlinearity needs matching v and g")
            if v[0] == 0.0:
                if g[0] != 0.0:
                    raise ConfigError("table nonlinearity needs g(0) = 0")
                v, g = v[1:], g[1:]
            if v.size < 2:
                raise ConfigError("table nonlinearity needs >= 2 positive samples")
            if v[0] <= 0 or np.any(np.diff(v) <= 0) or np.any(np.diff(g) <= 0) or g[0] <= 0:
                raise ConfigError("table nonlinearity must be strictly increasing and positive")
            beta = float(p["beta"])
            if not 0.0 <= beta < 1.0:
                raise ConfigError("table nonlinearity needs exponent bound 0 <= beta < 1")
            object.__setattr__(self, "_v", v)
            object.__setattr__(self, "_g", g)
        elif k == "callable":
            if self.func is None:
                raise ConfigError("callable nonlinearity needs func")
            if not 0.0 <= float(p["beta"]) < 1.0 or float(p.get("m", 0.0)) <= 0:
                raise ConfigError("callable nonlinearity needs 0 <= beta < 1 and m > 0")
        else:
            raise ConfigError(f"unknown nonlinearity kind {k!r}")

    @classmethod
    def power(cls, alpha: float) -> "ComparisonNonlinearity":
        return cls("power", {"alpha": float(alpha)})

    @classmethod
    def table(cls, v, g, beta: float) -> "ComparisonNonlinearity":
        return cls("table", {"v": [float(s) for s in v], "g": [float(s) for s in g],
                             "beta": float(beta)})

    @classmethod
    def from_callable(cls, func: Callable[[float], float], beta: float,
                      m: float) -> "ComparisonNonlinearity":
        return cls("callable", {"beta": float(beta), "m": float(m)}, func=func)

    @classmethod
    def from_config(cls, doc: dict) -> "ComparisonNonlinearity":
        if not isinstance(doc, dict) or "kind" not in doc:
            raise ConfigError("nonlinearity must be an object with a 'kind' field")
        doc = dict(doc)
        kind = doc.pop("kind")
        if kind == "callable":
            raise ConfigError("callable nonlinearities cannot be loaded from config")
        try:
            return cls(kind, doc)
        except KeyError as exc:
            raise ConfigError(f"nonlinearity {kind!r} is missing field {exc}") from None

    def to_config(self) -> dict:
        if self.kind == "callable":
            raise ConfigError("callable nonlinearities are not serializable")
        return {"kind": self.kind, **self.params}

    def as_callable(self) -> "ComparisonNonlinearity":
        """Same function, but forced onto the generic quadrature path."""
        return ComparisonNonlinearity.from_callable(self.__call__, self.beta, self.m)

    @property
    def alpha(self) -> float | None:
        """Exponent when g is an exact power law, else ``None``."""
        return float(self.params["alpha"]) if self.kind == "power" else None

    @property
    def beta(self) -> float:
        if self.kind == "power":
            return float(self.params["alpha"])
        return float(self.params["beta"])

    @property
    def m(self) -> float:
        if self.kind == "power":
            return 1.0
        if self.kind == "table":
            return float(self._g[0] / self._v[0] ** self.beta)
        return float(self.params["m"])

    def __call__(self, v: float) -> float:
        v = float(v)
        if v <= 0.0:
            return 0.0
        if self.kind == "power":
            return v ** self.params["alpha"]
        if self.kind == "callable":
            return float(self.func(v))
        vs, gs = self._v, self._g
        if v <= vs[0]:
            return float(gs[0] * (v / vs[0]) ** self.beta)
        if v >= vs[-1]:
            slope = (gs[-1] - gs[-2]) / (vs[-1] - vs[-2])
            return float(gs[-1] + slope * (v - vs[-1]))
        return float(np.interp(v, vs, gs))


@dataclass(frozen=True, eq=False)
class RateSpec:
    """The gain/nonlinearity pair driving the comparison equation
    phi' = -c(t) g(phi)."""

    c: GainFunction
    g: ComparisonNonlinearity

    @classmethod
    def from_config(cls, doc: dict) -> "RateSpec":
        if not isinstance(doc, dict) or "c" not in doc or "g" not in doc:
            raise ConfigError("rate must be an object with 'c' and 'g'")
        return cls(GainFunction.from_config(doc["c"]),
                   ComparisonNonlinearity.from_config(doc["g"]))

    def to_config(self) -> dict:
        return {"c": self.c.to_config(), "g": self.g.to_config()}

    def scaled(self, factor: float) -> "RateSpec":
        return RateSpec(self.c.scaled(factor), self.g)
