"""Command-line front end.

Subcommands ``settle-bound``, ``check``, ``simulate`` and ``hopfield-demo``
read one JSON config document, print a JSON report on stdout and write
trajectory CSVs to ``--out``.

Exit codes: 0 pass, 2 config error, 3 unbounded certificate under
``--require-finite``, 4 condition or assumption violation, 5 numeric failure.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, hopfield
from .certifier import (
    DomainError,
    GridSpec,
    LipschitzRequiredError,
    NoBasinError,
    basin_estimate,
    check_stability,
)
from .comparison import DivergentIntegralError, settling_time_bound
from .functions import ConfigError, RateSpec
from .integrator import (
    BlowUpError,
    SelectionStrategy,
    StepControl,
    StepStallError,
    UnsettledError,
    integrate,
    verify_settling,
)
from .systems import SystemBundle, load_lyapunov, load_system

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNBOUNDED = 3
EXIT_VIOLATION = 4
EXIT_NUMERIC = 5

DEFAULT_GRID_DENSITY = 4


def config_hash(doc: dict) -> str:
    """sha256 of the canonical (key-sorted, compact) JSON encoding."""
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


# config helpers ------------------------------------------------------------

def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def _system(cfg: dict, default: str | None = None) -> SystemBundle | None:
    doc = cfg.get("system", default)
    return None if doc is None else load_system(doc)


def _rate(cfg: dict, bundle: SystemBundle | None) -> RateSpec:
    if "rate" in cfg:
        return RateSpec.from_config(cfg["rate"])
    if bundle is None:
        raise ConfigError("config needs a 'rate' or a 'system' providing one")
    return bundle.rate


def _initial_conditions(cfg: dict, dim: int) -> list[np.ndarray]:
    raw = cfg.get("x0")
    if raw is None:
        raise ConfigError("config needs initial conditions 'x0'")
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("x0 must be numeric") from None
    if arr.ndim == 0 or (arr.ndim == 1 and dim == 1):
        arr = arr.reshape(-1, 1)
    elif arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim or arr.shape[0] == 0:
        raise ConfigError(f"x0 must be a nonempty list of {dim}-vectors")
    return [row.copy() for row in arr]


def _grid(cfg: dict, bundle: SystemBundle, t0: float) -> GridSpec:
    density = int(cfg.get("grid_density", DEFAULT_GRID_DENSITY))
    if density < 1:
        raise ConfigError("grid_density must be >= 1")
    g = cfg.get("grid", {})
    if bundle.hopfield is not None and not g:
        return hopfield.ball_grid(bundle.hopfield.spec, density=density)
    dim = bundle.dim
    t_max = float(g.get("t_max", 5.0))
    n_times = int(g.get("n_times", density + 1))
    r_max = float(g.get("r_max", min(1.0, bundle.V.domain_radius * (1 - 1e-9))))
    return GridSpec(
        dim,
        times=tuple(np.linspace(t0, t0 + t_max, n_times).tolist()),
        r_min=float(g.get("r_min", 1e-4)),
        r_max=r_max,
        n_shells=int(g.get("n_shells", 5 * density)),
        n_dirs=int(g.get("n_dirs", 2 if dim == 1 else 4 * density)),
        exceptional_times=tuple(g.get("exceptional_times", ())),
        seed=int(cfg.get("seed", 0)),
    )


def _strategies(cfg: dict) -> list[SelectionStrategy]:
    raw = cfg.get("selection", "steepest")
    names = [raw] if isinstance(raw, str) else list(raw)
    seed = int(cfg.get("seed", 0))
    out = []
    for name in names:
        try:
            out.append(SelectionStrategy("random", seed=seed) if name == "random"
                       else SelectionStrategy.parse(name))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return sorted(out, key=lambda s: s.label)


def _step_control(cfg: dict) -> StepControl:
    try:
        return StepControl.from_config(cfg.get("step"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad step control: {exc}") from None


def _write_csv(out: Path | None, name: str, text: str) -> str | None:
    if out is None:
        return None
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def _x_label(i: int) -> str:
    return f"x{i}"


# commands ------------------------------------------------------------------

def cmd_settle_bound(cfg: dict, args) -> tuple[dict, int]:
    bundle = _system(cfg)
    rate = _rate(cfg, bundle)
    t0 = float(cfg.get("t0", 0.0))
    if "v0" in cfg:
        v0 = float(cfg["v0"])
    elif bundle is not None and "x0" in cfg:
        V = load_lyapunov(cfg.get("lyapunov"), bundle)
        v0 = V(t0, _initial_conditions(cfg, bundle.dim)[0])
    else:
        raise ConfigError("settle-bound needs 'v0' or a system with 'x0'")
    if v0 < 0:
        raise ConfigError("v0 must be nonnegative")
    cert = settling_time_bound(rate, t0, v0)
    code = EXIT_UNBOUNDED if (args.require_finite and not cert.bounded) else EXIT_OK
    return {"certificate": cert.to_dict()}, code


def cmd_check(cfg: dict, args) -> tuple[dict, int]:
    bundle = _system(cfg)
    if bundle is None:
        raise ConfigError("check needs a 'system'")
    V = load_lyapunov(cfg.get("lyapunov"), bundle)
    rate = _rate(cfg, bundle)
    mode = cfg.get("mode", "weak")
    if mode not in ("weak", "strong"):
        raise ConfigError("mode must be 'weak' or 'strong'")
    t0 = float(cfg.get("t0", 0.0))
    grid = _grid(cfg, bundle, t0)
    report = check_stability(V, bundle.F, rate, mode, grid)
    return {"checks": [report.to_dict()]}, EXIT_OK if report.passed else EXIT_VIOLATION


def _verdict(traj, cert, V) -> str:
    if not cert.bounded:
        return "no-certificate"
    try:
        return "pass" if verify_settling(traj, cert, V) else "fail"
    except UnsettledError:
        return "unsettled"


def cmd_simulate(cfg: dict, args) -> tuple[dict, int]:
    bundle = _system(cfg)
    if bundle is None:
        raise ConfigError("simulate needs a 'system'")
    V = load_lyapunov(cfg.get("lyapunov"), bundle)
    rate = _rate(cfg, bundle)
    t0 = float(cfg.get("t0", 0.0))
    ctrl = _step_control(cfg)
    x0s = _initial_conditions(cfg, bundle.dim)
    strategies = _strategies(cfg)
    out = Path(args.out) if args.out else None
    runs = []
    any_fail = False
    for i, x0 in enumerate(x0s):
        cert = settling_time_bound(rate, t0, V(t0, x0))
        if "t_end" in cfg:
            t_end = float(cfg["t_end"])
        elif cert.bounded:
            t_end = t0 + 2.0 * (cert.T_bound - t0) + 1.0
        else:
            t_end = t0 + 10.0
        for s in strategies:
            traj = integrate(bundle.F, s, t0, x0, t_end, ctrl, V, rate)
            verdict = _verdict(traj, cert, V)
            any_fail |= verdict == "fail"
            runs.append({
                "x0_index": i,
                "x0": x0.tolist(),
                "strategy": s.label,
                "n_samples": int(traj.times.size),
                "n_rejected": traj.n_rejected,
                "settled_at": traj.settled_at,
                "sup_norm": traj.sup_norm,
                "certificate": cert.to_dict(),
                "verdict": verdict,
                "csv": _write_csv(out, f"traj_{_x_label(i)}_{s.label}.csv", traj.to_csv()),
            })
    return {"trajectories": runs}, EXIT_VIOLATION if any_fail else EXIT_OK


def cmd_hopfield_demo(cfg: dict, args) -> tuple[dict, int]:
    bundle = _system(cfg, default="hopfield-ref-1")
    if bundle.hopfield is None:
        raise ConfigError("hopfield-demo needs a Hopfield system")
    sys_ = bundle.hopfield
    if "delta" in cfg:
        spec = sys_.spec.with_delta(float(cfg["delta"]))
        sys_ = hopfield.build(spec, validate_assumptions=cfg.get("validate", True))
    spec = sys_.spec
    t0 = float(cfg.get("t0", 0.0))
    seed = int(cfg.get("seed", 0))
    eps = float(cfg.get("eps", spec.rho / 3.0))
    if "x0" in cfg:
        x0s = _initial_conditions(cfg, spec.n)
    else:
        try:
            delta = basin_estimate(sys_.V, sys_.rate, t0, eps, spec.rho, dim=spec.n,
                                   seed=seed).delta
        except NoBasinError:
            delta = spec.rho / 10.0
        x0s = [np.eye(spec.n)[0] * 0.9 * delta]
    ctrl = _step_control(cfg)
    n_random = int(cfg.get("n_random", 8))
    density = int(cfg.get("grid_density", DEFAULT_GRID_DENSITY))
    grid = hopfield.ball_grid(spec, density=density)
    out = Path(args.out) if args.out else None
    runs = []
    passed = True
    for i, x0 in enumerate(x0s):
        rep = hopfield.demo(sys_, t0, x0, ctrl, n_random=n_random, seed=seed, grid=grid,
                            eps=eps, run_check=(i == 0 and cfg.get("check", True)))
        passed &= rep.passed
        entry = {"x0_index": i, "x0": x0.tolist(), **rep.to_dict(), "runs": []}
        for traj in sorted(rep.sweep.runs, key=lambda r: r.strategy):
            entry["runs"].append({
                "strategy": traj.strategy,
                "settled_at": traj.settled_at,
                "n_samples": int(traj.times.size),
                "verdict": _verdict(traj, rep.certificate, sys_.V),
                "csv": _write_csv(out, f"hopfield_{_x_label(i)}_{traj.strategy}.csv",
                                  traj.to_csv()),
            })
        runs.append(entry)
    return {"system": spec.name, "demos": runs}, EXIT_OK if passed else EXIT_VIOLATION


COMMANDS = {
    "settle-bound": cmd_settle_bound,
    "check": cmd_check,
    "simulate": cmd_simulate,
    "hopfield-demo": cmd_hopfield_demo,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fintime", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="JSON config document")
        p.add_argument("--out", metavar="DIR", help="directory for CSV output")
        p.add_argument("--seed", type=int, help="seed for every randomized step")
        p.add_argument("--require-finite", action="store_true",
                       help="exit 3 when the settling bound is unbounded")
        p.add_argument("--grid-density", type=int, metavar="K")
        p.add_argument("--preset", metavar="NAME", help="system preset name")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "check":
            p.add_argument("--mode", choices=("weak", "strong"))
        if name in ("simulate", "hopfield-demo", "settle-bound"):
            p.add_argument("--x0", type=float, nargs="+", metavar="X",
                           help="one initial condition")
        if name == "simulate":
            p.add_argument("--selection", action="append", metavar="NAME",
                           help="steepest | continuity | random | fixed-<i> | random-<seed>")
        if name == "hopfield-demo":
            p.add_argument("--delta", type=float, help="override the decay constant delta")
    return parser


def _effective_config(args) -> dict:
    cfg = copy.deepcopy(_load_config(args.config))
    if args.preset:
        cfg["system"] = args.preset
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.grid_density is not None:
        cfg["grid_density"] = args.grid_density
    if getattr(args, "mode", None):
        cfg["mode"] = args.mode
    if getattr(args, "x0", None):
        cfg["x0"] = [args.x0]
    if getattr(args, "selection", None):
        cfg["selection"] = args.selection
    if getattr(args, "delta", None) is not None:
        cfg["delta"] = args.delta
    return cfg


def run(argv: list[str] | None = None, stdout=None) -> int:
    """Parse ``argv``, execute, print the report; return the exit code."""
    stdout = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    report: dict = {"command": args.command, "argv": list(argv if argv is not None else sys.argv[1:])}
    t_start = time.perf_counter()
    try:
        cfg = _effective_config(args)
        report["config"] = cfg
        report["config_hash"] = config_hash(cfg)
        body, code = COMMANDS[args.command](cfg, args)
        report.update(body)
        if code == EXIT_UNBOUNDED:
            report["error"] = "settling bound is unbounded"
    except (ConfigError, LipschitzRequiredError, DomainError) as exc:
        code, report["error"] = EXIT_CONFIG, str(exc)
    except hopfield.AssumptionViolation as exc:
        code, report["error"] = EXIT_VIOLATION, str(exc)
        report["assumption"] = exc.name
    except ValueError as exc:
        code, report["error"] = EXIT_CONFIG, str(exc)
    except (BlowUpError, StepStallError, DivergentIntegralError, ArithmeticError) as exc:
        code, report["error"] = EXIT_NUMERIC, f"{type(exc).__name__}: {exc}"
    report["exit_code"] = code
    report["timings"] = {"total_s": time.perf_counter() - t_start}
    if "error" in report:
        print(f"fintime {args.command}: {report['error']}", file=sys.stderr)
    json.dump(_jsonable(report), stdout, indent=2, sort_keys=False, allow_nan=False)
    stdout.write("\n")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
