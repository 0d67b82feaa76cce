"""Named systems shared by the CLI and the test-suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hopfield
from .certifier import LyapunovCandidate
from .functions import ComparisonNonlinearity, ConfigError, GainFunction, RateSpec
from .setvalued import Box, CaratheodoryMap, MonotoneScalarFunction, Singleton, filippov_interval

__all__ = ["SystemBundle", "load_system", "load_lyapunov", "PRESETS",
           "sign_1d", "repeller", "zero_field", "linear"]


@dataclass(frozen=True, eq=False)
class SystemBundle:
    """An inclusion with the Lyapunov data and rate it is usually checked against."""

    name: str
    F: CaratheodoryMap
    V: LyapunovCandidate
    rate: RateSpec
    hopfield: hopfield.HopfieldSystem | None = None

    @property
    def dim(self) -> int:
        return self.F.dim


def _sqrt_rate() -> RateSpec:
    return RateSpec(GainFunction.constant(1.0), ComparisonNonlinearity.power(0.5))


def sign_1d() -> SystemBundle:
    """x' in -Filippov[sign](x)."""
    sgn = MonotoneScalarFunction.sign()

    def evaluate(t, x):
        lo, hi = filippov_interval(sgn, x[0])
        return Singleton([-lo]) if lo == hi else Box([-hi], [-lo])

    F = CaratheodoryMap(1, evaluate, GainFunction.constant(1.0), name="sign-1d")
    return SystemBundle("sign-1d", F, LyapunovCandidate.norm(), _sqrt_rate())


def linear(A, name: str = "linear") -> SystemBundle:
    """x' = A x with the quadratic candidate."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ConfigError("linear system needs a square matrix")
    mu = GainFunction.constant(float(np.linalg.norm(A, 2)))
    F = CaratheodoryMap(A.shape[0], lambda t, x: Singleton(A @ x), mu, name=name)
    return SystemBundle(name, F, LyapunovCandidate.quadratic(), _sqrt_rate())


def repeller() -> SystemBundle:
    return linear([[1.0]], name="repeller")


def zero_field() -> SystemBundle:
    return linear([[0.0]], name="zero-field")


def _hopfield_bundle(spec: hopfield.HopfieldSpec, validate: bool = True) -> SystemBundle:
    sys_ = hopfield.build(spec, validate_assumptions=validate)
    return SystemBundle(spec.name, sys_.inclusion, sys_.V, sys_.rate, sys_)


PRESETS = {
    "sign-1d": sign_1d,
    "repeller": repeller,
    "zero-field": zero_field,
    "hopfield-ref-1": lambda: _hopfield_bundle(hopfield.reference_spec()),
    "hopfield-1d": lambda: _hopfield_bundle(hopfield.one_dim_spec()),
    "hopfield-sign-2": lambda: _hopfield_bundle(hopfield.sign_demo_spec(), validate=False),
}


def load_system(doc) -> SystemBundle:
    """Resolve a preset name or an inline ``{"kind": "linear" | "hopfield", ...}``."""
    if isinstance(doc, str):
        if doc not in PRESETS:
            raise ConfigError(f"unknown system preset {doc!r}; known: {sorted(PRESETS)}")
        return PRESETS[doc]()
    if isinstance(doc, dict):
        if "preset" in doc:
            return load_system(doc["preset"])
        kind = doc.get("kind")
        if kind == "linear":
            return linear(doc["A"], doc.get("name", "linear"))
        if kind == "hopfield":
            try:
                spec = hopfield.from_config(doc)
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"bad inline hopfield system: {exc}") from None
            return _hopfield_bundle(spec, validate=doc.get("validate", True))
    raise ConfigError("system must be a preset name or an object with 'kind'")


def load_lyapunov(doc, bundle: SystemBundle) -> LyapunovCandidate:
    """Lyapunov candidate from config; ``None`` keeps the system default."""
    if doc is None:
        return bundle.V
    if isinstance(doc, str):
        doc = {"kind": doc}
    kind = doc.get("kind")
    lip = doc.get("lipschitz")
    if kind == "quadratic":
        V = LyapunovCandidate.quadratic()
    elif kind == "norm":
        V = LyapunovCandidate.norm()
    elif kind in ("hopfield", "default"):
        V = bundle.V
    else:
        raise ConfigError(f"unknown Lyapunov kind {kind!r}")
    if lip is not None:
        V = LyapunovCandidate(V.value, V.gradient, V.positive_definite, V.radial_bound,
                              bool(lip), V.domain_radius, V.name)
    return V
