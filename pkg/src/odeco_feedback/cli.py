"""Command-line interface.

Exit codes: 0 success, 1 domain/regime failure, 2 input or parse failure.
Vectors are comma separated; write ``--x0=-1,2`` when the first entry is negative.
"""

from __future__ import annotations

import argparse
import json
import math
import sys as _sys
from pathlib import Path
from typing import Any

import numpy as np

from . import certify, robust, sim
from .errors import DomainError, InfeasibleDisturbanceError, OdecoError, PreconditionError, SpecError
from .modal import from_modal, mode_params, to_modal
from .tensor import OdecoSystem, load_system, validate_system

DEFAULTS = {
    "dt": sim.DEFAULT_DT,
    "eps": 1e-3,
    "t_end": 30.0,
    "omega": 1.0,
    "blowup_threshold": sim.DEFAULT_BLOWUP,
}


class InputError(Exception):
    """Bad command-line value; maps to exit status 2."""


def _floats(text: str, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise InputError(f"{what}: expected finite numbers, got {text!r}")
    return vals


def _positive(value: float, what: str) -> float:
    if not value > 0:
        raise InputError(f"{what} must be positive, got {value!r}")
    return value


def _vector(args, sys: OdecoSystem, required: bool = True) -> np.ndarray | None:
    x0 = getattr(args, "x0", None)
    y0 = getattr(args, "y0", None)
    if x0 is not None and y0 is not None:
        raise InputError("give either --x0 or --y0, not both")
    if x0 is None and y0 is None:
        if required:
            raise InputError("an initial state is required (--x0 or --y0)")
        return None
    vals = np.array(_floats(x0 if x0 is not None else y0, "--x0" if x0 is not None else "--y0"))
    if vals.shape != (sys.n,):
        raise InputError(f"initial state needs {sys.n} entries, got {vals.size}")
    return vals if x0 is not None else from_modal(sys, vals)


def _dbar(args, sys: OdecoSystem) -> np.ndarray:
    vals = _floats(args.dbar, "--dbar")
    if len(vals) == 1:
        vals = vals * sys.n
    if len(vals) != sys.n:
        raise InputError(f"--dbar needs 1 or {sys.n} entries, got {len(vals)}")
    if any(v < 0 for v in vals):
        raise InputError("--dbar entries must be nonnegative")
    return np.array(vals)


def _config(args, **extra) -> dict[str, Any]:
    cfg = {"system": str(args.system), "defaults": dict(DEFAULTS)}
    for key in ("dt", "eps", "t_end", "omega", "threshold"):
        if hasattr(args, key):
            cfg[key] = getattr(args, key)
    cfg.update(extra)
    return cfg


def _emit(payload: dict[str, Any], out: str | None = None) -> None:
    text = json.dumps(payload, indent=2, default=_json_default)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _finite_or_none(v: float | None):
    return None if v is None or not math.isfinite(v) else v


# -- subcommands ----------------------------------------------------------------

def cmd_validate(args) -> int:
    system = load_system(args.system)
    report = validate_system(system, args.tol)
    thresholds = []
    for r in range(system.n):
        m = mode_params(system, r)
        thresholds.append(certify.threshold(m) if m.kappa < 0 else None)
    payload = report.to_dict()
    payload["thresholds"] = thresholds
    payload["config"] = _config(args, tol=args.tol)
    _emit(payload)
    return 0 if report.valid else 1


def cmd_simulate(args) -> int:
    system = load_system(args.system)
    x0 = _vector(args, system, required=False)
    if x0 is None:
        if args.seed is None:
            raise InputError("give --x0/--y0, or --seed to draw a random initial state")
        x0 = np.random.default_rng(args.seed).uniform(-1.0, 1.0, system.n)
    disturbance = None
    if args.dbar is not None:
        disturbance = sim.make_paper_disturbance(_dbar(args, system), args.omega, system.n)
    traj = sim.integrate(system, x0, args.t_end, args.dt, disturbance, args.threshold)
    if args.out:
        traj.to_csv(args.out)
    _emit({
        "config": _config(args, x0=x0, seed=args.seed),
        "termination": traj.termination,
        "samples": int(traj.t.size),
        "final_state": traj.x[-1],
        "final_modal": traj.y[-1],
        "out": args.out,
    })
    return 0


def cmd_roa_check(args) -> int:
    system = load_system(args.system)
    x0 = _vector(args, system)
    cert = certify.roa_membership(system, x0)
    payload = cert.to_dict()
    payload["config"] = _config(args, x0=x0)
    _emit(payload, args.out)
    return 0


def cmd_roa_grid(args) -> int:
    system = load_system(args.system)
    certify.roa_membership(system, np.zeros(system.n))  # regime check before the long run
    xr, yr = _floats(args.x_range, "--x-range"), _floats(args.y_range, "--y-range")
    counts = [int(v) for v in _floats(args.counts, "--counts")]
    if len(xr) != 2 or len(yr) != 2 or len(counts) != 2 or min(counts) < 1:
        raise InputError("--x-range/--y-range need two numbers, --counts two positive integers")
    grid = sim.basin_grid(system, tuple(xr), tuple(yr), tuple(counts), args.t_end, args.eps,
                          args.threshold, args.dt)
    summary = sim.basin_agreement(grid, system)
    sidecar = {"boundaries": grid.boundaries, "config": grid.config, "agreement": summary,
               "label_counts": grid.counts()}
    if args.out:
        grid.to_csv(args.out)
        Path(str(args.out) + ".boundary.json").write_text(json.dumps(sidecar, indent=2) + "\n")
    _emit({"config": _config(args), "agreement": summary, "label_counts": grid.counts(),
           "boundaries": grid.boundaries, "out": args.out})
    return 0


def cmd_settle(args) -> int:
    system = load_system(args.system)
    x0 = _vector(args, system)
    times = certify.settling_times(system, x0, args.eps)
    y0 = to_modal(system, x0)
    modes = [{"mode": r + 1, "y0": y0[r], "T": times[r]} for r in range(system.n)]
    payload: dict[str, Any] = {"config": _config(args, x0=x0), "modes": modes, "T": max(times)}
    if args.verify:
        t_end = 1.2 * max(times) + 1.0
        traj = sim.integrate(system, x0, t_end, args.dt, blowup_threshold=args.threshold)
        measured = sim.measure_hitting_time(traj, args.eps)
        for rec, mt in zip(modes, measured):
            rec["measured"] = mt
        finite = [v for v in measured if v is not None]
        payload["measured"] = max(finite) if len(finite) == len(measured) else None
        payload["tolerance"] = 2 * args.dt
    _emit(payload, args.out)
    return 0


def cmd_escape(args) -> int:
    system = load_system(args.system)
    x0 = _vector(args, system)
    t_esc = certify.escape_time(system, x0)
    y0 = to_modal(system, x0)
    modes = []
    for r in range(system.n):
        m = mode_params(system, r)
        fate = certify.classify_mode_fate(m, y0[r])
        modes.append({"mode": r + 1, "y0": y0[r], **fate.to_dict()})
    if t_esc is None:
        raise PreconditionError("no mode escapes from this initial state")
    payload: dict[str, Any] = {"config": _config(args, x0=x0), "modes": modes, "t_esc": t_esc}
    if args.verify:
        traj = sim.integrate(system, x0, 1.5 * t_esc + args.dt, args.dt, blowup_threshold=args.threshold)
        payload["measured"] = None if traj.blowup is None else traj.blowup.t
        payload["measured_mode"] = None if traj.blowup is None else traj.blowup.mode + 1
    _emit(payload, args.out)
    return 0


def cmd_robust_bounds(args) -> int:
    system = load_system(args.system)
    env = robust.DisturbanceEnvelope(_dbar(args, system))
    cert = robust.robust_certificate(system, env)
    payload = cert.to_dict()
    payload["config"] = _config(args, dbar=env.bounds)
    _emit(payload, None if args.out is None else args.out)
    return 0


def cmd_robust_run(args) -> int:
    system = load_system(args.system)
    env = robust.DisturbanceEnvelope(_dbar(args, system))
    cert = robust.robust_certificate(system, env)
    x0 = _vector(args, system, required=False)
    if x0 is None:
        # half the certified radius in every mode: inside the robust set
        x0 = from_modal(system, 0.5 * cert.bounds)
    inside = robust.robust_set_membership(system, env, x0)
    traj = sim.integrate(system, x0, args.t_end, args.dt,
                         sim.make_paper_disturbance(env.bounds, args.omega, system.n), args.threshold)
    if not traj.completed:
        raise DomainError(f"disturbed trajectory escaped ({traj.termination})")
    window = (0.5 * args.t_end, args.t_end)
    measured = sim.measure_ultimate_magnitude(traj, window)
    if args.out:
        traj.to_csv(args.out, {f"bound{r + 1}": cert.modes[r].bound for r in range(system.n)})
    _emit({
        "config": _config(args, x0=x0, dbar=env.bounds, window=window),
        "x0_in_robust_set": inside,
        "predicted": cert.bounds,
        "measured": measured,
        "within_bounds": bool(np.all(measured <= cert.bounds + 1e-3)),
        "out": args.out,
    })
    return 0


def sweep_rows(system: OdecoSystem, levels, omega: float, t_end: float, dt: float,
               window: tuple[float, float]) -> list[dict[str, float]]:
    """Predicted vs measured ultimate magnitudes for uniform disturbance levels."""
    levels = [float(v) for v in levels]
    envs = [robust.DisturbanceEnvelope.uniform(d, system.n) for d in levels]
    certs = [robust.robust_certificate(system, e) for e in envs]
    amp = np.array([e.bounds for e in envs])
    ens = sim.integrate_many(system, np.zeros((len(levels), system.n)), t_end, dt,
                             sim.make_paper_disturbance(amp, omega, system.n))
    if np.any(np.isfinite(ens.blowup_time)):
        raise DomainError("a disturbed sweep trajectory escaped")
    measured = sim.ultimate_magnitude(ens.t, ens.y, window)
    rows = []
    for i, d in enumerate(levels):
        for r in range(system.n):
            rows.append({"dbar": d, "mode": r + 1, "predicted": certs[i].modes[r].bound,
                         "measured": float(measured[i, r])})
    return rows


def cmd_robust_sweep(args) -> int:
    system = load_system(args.system)
    start, stop, step = _floats(args.sweep, "--sweep")
    _positive(step, "sweep step")
    levels = np.round(np.arange(start, stop + 0.5 * step, step), 12)
    window = tuple(_floats(args.window, "--window")) if args.window else (0.5 * args.t_end, args.t_end)
    if len(window) != 2:
        raise InputError("--window needs two numbers")
    rows = sweep_rows(system, levels, args.omega, args.t_end, args.dt, window)
    if args.out:
        import csv

        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["dbar", "mode", "predicted", "measured"])
            w.writeheader()
            w.writerows(rows)
    _emit({
        "config": _config(args, levels=levels, window=window),
        "rows": rows,
        "all_within_bounds": all(row["measured"] <= row["predicted"] for row in rows),
        "out": args.out,
    })
    return 0


# -- parser ---------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, *, state: bool = False, dt: bool = False,
            eps: bool = False, t_end: float | None = None, threshold: bool = False,
            omega: bool = False) -> None:
    p.add_argument("--system", required=True, help="system spec JSON file")
    if state:
        p.add_argument("--x0", help="initial state, comma separated")
        p.add_argument("--y0", help="initial state in modal coordinates, comma separated")
    if dt:
        p.add_argument("--dt", type=float, default=DEFAULTS["dt"], help="integrator step (default %(default)s)")
    if eps:
        p.add_argument("--eps", type=float, default=DEFAULTS["eps"], help="settling tolerance (default %(default)s)")
    if t_end is not None:
        p.add_argument("--t-end", type=float, default=t_end, help="final time (default %(default)s)")
    if threshold:
        p.add_argument("--threshold", type=float, default=DEFAULTS["blowup_threshold"],
                       help="blow-up threshold on max |y_r| (default %(default)s)")
    if omega:
        p.add_argument("--omega", type=float, default=DEFAULTS["omega"],
                       help="disturbance frequency (default %(default)s)")
    p.add_argument("--out", help="output file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odeco", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a system spec")
    p.add_argument("--system", required=True)
    p.add_argument("--tol", type=float, default=1e-10, help="orthonormality tolerance")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="integrate the closed loop and write a trajectory CSV")
    _common(p, state=True, dt=True, t_end=DEFAULTS["t_end"], threshold=True, omega=True)
    p.add_argument("--dbar", help="matched sinusoidal disturbance level(s)")
    p.add_argument("--seed", type=int, help="seed for a random initial state in [-1, 1]^n")
    p.set_defaults(func=cmd_simulate)

    roa = sub.add_parser("roa", help="region of attraction").add_subparsers(dest="mode", required=True)
    p = roa.add_parser("check", help="certificate for one initial state")
    _common(p, state=True)
    p.set_defaults(func=cmd_roa_check)
    p = roa.add_parser("grid", help="basin classification on a planar grid")
    _common(p, dt=True, eps=True, t_end=DEFAULTS["t_end"], threshold=True)
    p.add_argument("--x-range", default="-3,3")
    p.add_argument("--y-range", default="-3,3")
    p.add_argument("--counts", default="121,121")
    p.set_defaults(func=cmd_roa_grid)

    p = sub.add_parser("settle", help="settling times")
    _common(p, state=True, dt=True, eps=True, threshold=True)
    p.add_argument("--verify", action="store_true", help="also measure with the integrator")
    p.set_defaults(func=cmd_settle)

    p = sub.add_parser("escape", help="finite escape times")
    _common(p, state=True, dt=True, threshold=True)
    p.add_argument("--verify", action="store_true", help="also measure with the integrator")
    p.set_defaults(func=cmd_escape)

    rob = sub.add_parser("robust", help="disturbance robustness").add_subparsers(dest="mode", required=True)
    p = rob.add_parser("bounds", help="robust thresholds, ISS rates and gains")
    _common(p)
    p.add_argument("--dbar", required=True)
    p.set_defaults(func=cmd_robust_bounds)
    p = rob.add_parser("run", help="disturbed trajectory with predicted bounds")
    _common(p, state=True, dt=True, t_end=100.0, threshold=True, omega=True)
    p.add_argument("--dbar", required=True)
    p.set_defaults(func=cmd_robust_run)
    p = rob.add_parser("sweep", help="ultimate magnitude vs disturbance level")
    _common(p, dt=True, t_end=100.0, omega=True)
    p.add_argument("--sweep", default="0.05,0.35,0.05", help="start,stop,step")
    p.add_argument("--window", help="measurement window t_a,t_b (default second half)")
    p.set_defaults(func=cmd_robust_sweep)
    return parser


def _validate_numbers(args) -> None:
    for key in ("dt", "eps", "t_end", "omega", "threshold", "tol"):
        if hasattr(args, key):
            _positive(getattr(args, key), "--" + key.replace("_", "-"))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _validate_numbers(args)
        return args.func(args)
    except (InputError, SpecError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2
    except (OdecoError, MemoryError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        mode = getattr(exc, "mode", None)
        if mode is not None:
            err["mode"] = mode + 1
        if isinstance(exc, InfeasibleDisturbanceError):
            err["modes"] = [r + 1 for r in exc.modes]
        print(json.dumps(err))
        print(f"error: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
