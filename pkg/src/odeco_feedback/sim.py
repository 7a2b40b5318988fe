"""Fixed-step RK4 oracle, disturbance signals and basin classification.

The integrator works in state coordinates on ``x' = K x + A x^{k-1} + d(t)``
using only the factored contraction, so it never touches the closed-form
solution it is used to check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, UnsupportedRegimeError
from .modal import ModeParams, mode_params, to_modal
from .tensor import OdecoSystem, odeco_contract

DEFAULT_DT = 1e-3
DEFAULT_BLOWUP = 1e8
# A step that moves the state by more than this fraction of max(1, |x|) is
# split in half (recursively); this only fires as a trajectory runs away.
MAX_RELATIVE_STEP = 0.1
MAX_SPLIT_DEPTH = 60


# -- disturbance signals --------------------------------------------------------

@dataclass(frozen=True)
class NoDisturbance:
    def modal(self, t: float, y: np.ndarray) -> np.ndarray:
        return np.zeros_like(y)

    def bounds(self, n: int) -> np.ndarray:
        return np.zeros(n)


@dataclass(frozen=True)
class Sinusoid:
    """``d_r(t) = amplitude_r * sin(freq_r * omega * t + phase_r)``.

    ``amplitude`` may be ``(n,)`` or, for ensembles, ``(m, n)``.
    """

    amplitude: np.ndarray
    omega: float
    freq: np.ndarray
    phase: np.ndarray

    def modal(self, t: float, y: np.ndarray) -> np.ndarray:
        return np.broadcast_to(
            np.asarray(self.amplitude) * np.sin(np.asarray(self.freq) * self.omega * t + self.phase),
            y.shape,
        )

    def bounds(self, n: int) -> np.ndarray:
        a = np.abs(np.asarray(self.amplitude, dtype=float))
        return a if a.ndim == 1 else a.max(axis=0)


@dataclass(frozen=True)
class BangBangWorstCase:
    """State feedback ``d_r = dbar_r * sign(y_r)`` on the target modes, zero elsewhere.

    Pushes each targeted mode away from the origin as hard as the envelope allows.
    """

    dbar: np.ndarray
    modes: tuple[int, ...]

    def modal(self, t: float, y: np.ndarray) -> np.ndarray:
        mask = np.zeros(y.shape[-1])
        mask[list(self.modes)] = 1.0
        return mask * np.asarray(self.dbar) * np.sign(y)

    def bounds(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        out[list(self.modes)] = np.asarray(self.dbar, dtype=float)[list(self.modes)]
        return out


@dataclass(frozen=True)
class Custom:
    """Sampled modal disturbance table held constant between samples."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or v.ndim != 2 or v.shape[0] != t.size or t.size == 0:
            raise DimensionError("Custom disturbance needs times (T,) and values (T, n)")
        if np.any(np.diff(t) <= 0):
            raise ValueError("Custom disturbance times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def modal(self, t: float, y: np.ndarray) -> np.ndarray:
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return np.broadcast_to(self.values[max(i, 0)], y.shape)

    def bounds(self, n: int) -> np.ndarray:
        return np.abs(self.values).max(axis=0)


DisturbanceSignal = NoDisturbance | Sinusoid | BangBangWorstCase | Custom


def make_paper_disturbance(dbar, omega: float = 1.0, n: int = 2) -> Sinusoid:
    """``d_1 = dbar sin(omega t)``, ``d_2 = dbar cos(0.9 omega t)``, zero on further modes.

    ``dbar`` is a scalar, a per-mode vector ``(n,)``, or an ensemble ``(m, n)``.
    """
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega!r}")
    dbar = np.asarray(dbar, dtype=float)
    if np.any(dbar < 0):
        raise ValueError("dbar must be nonnegative")
    mask = np.zeros(n)
    mask[: min(n, 2)] = 1.0
    freq = np.zeros(n)
    phase = np.zeros(n)
    freq[0] = 1.0
    if n > 1:
        freq[1] = 0.9
        phase[1] = math.pi / 2
    amplitude = np.broadcast_to(dbar, dbar.shape[:-1] + (n,) if dbar.ndim else (n,)) * mask
    return Sinusoid(amplitude=amplitude, omega=float(omega), freq=freq, phase=phase)


# -- integrator -----------------------------------------------------------------

Rhs = Callable[[float, np.ndarray], np.ndarray]


def closed_loop_rhs(sys: OdecoSystem, disturbance: DisturbanceSignal | None = None) -> Rhs:
    dist = disturbance or NoDisturbance()
    K_T = sys.gain_matrix.T
    V, V_T = sys.basis, sys.basis.T

    if isinstance(dist, NoDisturbance):
        return lambda t, x: x @ K_T + odeco_contract(sys, x)

    def rhs(t: float, x: np.ndarray) -> np.ndarray:
        return x @ K_T + odeco_contract(sys, x) + dist.modal(t, x @ V) @ V_T

    return rhs


def modal_rhs(modes: Sequence[ModeParams], disturbance: DisturbanceSignal | None = None) -> Rhs:
    dist = disturbance or NoDisturbance()
    kappa = np.array([m.kappa for m in modes])
    lam = np.array([m.lam for m in modes])
    p1 = np.array([m.p + 1 for m in modes])

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return kappa * y + lam * y**p1 + dist.modal(t, y)

    return rhs


def rk4_step(f: Rhs, t: float, x: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, x)
    k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = f(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _grid(t_end: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if not t_end >= 0:
        raise ValueError(f"t_end must be nonnegative, got {t_end!r}")
    steps = int(math.ceil(t_end / dt - 1e-9))
    return dt * np.arange(steps + 1)


@dataclass(frozen=True)
class BlowUp:
    t: float
    mode: int


@dataclass
class Trajectory:
    """Uniformly sampled solution; ``y[i] = V^T x[i]``."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    dt: float
    blowup: BlowUp | None = None

    @property
    def completed(self) -> bool:
        return self.blowup is None

    @property
    def termination(self) -> str:
        if self.blowup is None:
            return "completed"
        return f"blew_up(t={self.blowup.t!r}, mode={self.blowup.mode + 1})"

    def to_csv(self, path: str | Path, extra: dict[str, np.ndarray] | None = None) -> None:
        n = self.x.shape[1]
        header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)]
        cols = [self.t[:, None], self.x, self.y]
        for name, values in (extra or {}).items():
            header.append(name)
            cols.append(np.broadcast_to(np.asarray(values, dtype=float), self.t.shape)[:, None])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(np.hstack(cols).tolist())


class _Runaway:
    """Step subdivision with threshold-crossing localisation for one trajectory."""

    def __init__(self, f: Rhs, V: np.ndarray, threshold: float, min_locate: float):
        self.f = f
        self.V = V
        self.threshold = threshold
        self.min_locate = min_locate

    def advance(self, t: float, x: np.ndarray, h: float, depth: int = 0):
        """Return ``(x_new, crossing_time_or_None)`` after a step of length ``h``."""
        with np.errstate(over="ignore", invalid="ignore"):
            x1 = rk4_step(self.f, t, x, h)
        finite = bool(np.all(np.isfinite(x1)))
        scale = max(1.0, float(np.max(np.abs(x))))
        smooth = finite and float(np.max(np.abs(x1 - x))) <= MAX_RELATIVE_STEP * scale
        y1 = np.abs(x1 @ self.V) if finite else None
        crossed = finite and float(np.max(y1)) > self.threshold
        if depth < MAX_SPLIT_DEPTH and (not smooth or (crossed and h > self.min_locate)):
            xm, tc = self.advance(t, x, 0.5 * h, depth + 1)
            if tc is not None:
                return xm, tc
            return self.advance(t + 0.5 * h, xm, 0.5 * h, depth + 1)
        if not finite:
            return x, t
        if crossed:
            y0 = np.abs(x @ self.V)
            r = int(np.argmax(y1))
            frac = (self.threshold - y0[r]) / (y1[r] - y0[r]) if y1[r] > y0[r] else 1.0
            return x1, t + h * min(max(frac, 0.0), 1.0)
        return x1, None


def integrate(
    sys: OdecoSystem,
    x0,
    t_end: float,
    dt: float = DEFAULT_DT,
    disturbance: DisturbanceSignal | None = None,
    blowup_threshold: float = DEFAULT_BLOWUP,
) -> Trajectory:
    """Classic RK4 on the closed loop, sampled every ``dt``.

    Integration stops once ``max_r |y_r|`` exceeds ``blowup_threshold``; the
    crossing is localised to within ``dt / 100`` by halving the last step.
    A non-finite state counts as a blow-up at the previous sample.
    """
    x = np.array(x0, dtype=float)
    if x.shape != (sys.n,):
        raise DimensionError(f"x0 must have shape ({sys.n},), got {x.shape}")
    times = _grid(t_end, dt)
    f = closed_loop_rhs(sys, disturbance)
    stepper = _Runaway(f, sys.basis, blowup_threshold, dt / 100.0)
    xs = np.empty((times.size, sys.n))
    xs[0] = x
    blowup = None
    count = 1
    if np.max(np.abs(x @ sys.basis)) > blowup_threshold:
        blowup = BlowUp(0.0, int(np.argmax(np.abs(x @ sys.basis))))
    for i in range(1, times.size if blowup is None else 0):
        t = times[i - 1]
        x_new, tc = stepper.advance(t, x, times[i] - t)
        if tc is not None:
            y_new = np.abs(x_new @ sys.basis)
            mode = int(np.argmax(y_new)) if np.all(np.isfinite(y_new)) else int(np.argmax(np.abs(x @ sys.basis)))
            blowup = BlowUp(float(tc), mode)
            break
        x = x_new
        xs[i] = x
        count += 1
    xs = xs[:count]
    return Trajectory(t=times[:count], x=xs, y=xs @ sys.basis, dt=dt, blowup=blowup)


@dataclass
class Ensemble:
    """Modal samples of many trajectories; ``y`` has shape ``(len(t), m, n)``.

    Rows that blew up are NaN from the first sample past the threshold and
    ``blowup_time`` holds that sample time (NaN for rows that completed).
    """

    t: np.ndarray
    y: np.ndarray
    blowup_time: np.ndarray


def integrate_many(
    sys: OdecoSystem,
    x0s,
    t_end: float,
    dt: float = DEFAULT_DT,
    disturbance: DisturbanceSignal | None = None,
    blowup_threshold: float = DEFAULT_BLOWUP,
    stride: int = 1,
) -> Ensemble:
    """Vectorised fixed-step RK4 for a batch of initial states ``(m, n)``.

    No step subdivision: blow-up times are only resolved to the sample grid.
    Every ``stride``-th sample is stored.
    """
    X = np.array(x0s, dtype=float)
    if X.ndim != 2 or X.shape[1] != sys.n:
        raise DimensionError(f"x0s must have shape (m, {sys.n}), got {X.shape}")
    return _run_batch(closed_loop_rhs(sys, disturbance), X, sys.basis, t_end, dt, blowup_threshold, stride)


def integrate_modal(
    modes: Sequence[ModeParams],
    y0,
    t_end: float,
    dt: float = DEFAULT_DT,
    disturbance: DisturbanceSignal | None = None,
    blowup_threshold: float = DEFAULT_BLOWUP,
    stride: int = 1,
) -> Ensemble:
    """RK4 on the decoupled scalar equations directly (``y0`` is ``(n,)`` or ``(m, n)``)."""
    Y = np.atleast_2d(np.array(y0, dtype=float))
    if Y.shape[1] != len(modes):
        raise DimensionError(f"y0 must have {len(modes)} columns, got shape {Y.shape}")
    eye = np.eye(len(modes))
    return _run_batch(modal_rhs(modes, disturbance), Y, eye, t_end, dt, blowup_threshold, stride)


def _run_batch(f: Rhs, X: np.ndarray, V: np.ndarray, t_end: float, dt: float,
               threshold: float, stride: int) -> Ensemble:
    times = _grid(t_end, dt)
    keep = np.arange(0, times.size, stride)
    out = np.empty((keep.size,) + X.shape)
    blowup = np.full(X.shape[0], np.nan)
    dead = np.zeros(X.shape[0], dtype=bool)

    def check(x, t):
        with np.errstate(invalid="ignore"):
            bad = ~np.all(np.isfinite(x), axis=1) | (np.max(np.abs(x @ V), axis=1) > threshold)
        new = bad & ~dead
        blowup[new] = t
        dead[new] = True
        x[dead] = np.nan

    x = X.copy()
    check(x, times[0])
    out[0] = x @ V
    j = 1
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, times.size):
            x = rk4_step(f, times[i - 1], x, times[i] - times[i - 1])
            check(x, times[i])
            if j < keep.size and keep[j] == i:
                out[j] = x @ V
                j += 1
    return Ensemble(t=times[keep], y=out, blowup_time=blowup)


# -- measurements ---------------------------------------------------------------

def hitting_times(t: np.ndarray, y: np.ndarray, eps: float) -> np.ndarray:
    """First time ``|y| <= eps`` along axis 0, linearly interpolated; NaN if never."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    a = np.abs(np.asarray(y, dtype=float))
    flat = a.reshape(a.shape[0], -1)
    with np.errstate(invalid="ignore"):
        hit = flat <= eps
    first = np.argmax(hit, axis=0)
    out = np.full(flat.shape[1], np.nan)
    for col in np.flatnonzero(hit.any(axis=0)):
        k = first[col]
        if k == 0:
            out[col] = t[0]
            continue
        y_prev, y_hit = flat[k - 1, col], flat[k, col]
        frac = (y_prev - eps) / (y_prev - y_hit) if y_prev != y_hit else 1.0
        out[col] = t[k - 1] + frac * (t[k] - t[k - 1])
    return out.reshape(a.shape[1:])


def measure_hitting_time(traj: Trajectory, eps: float) -> list[float | None]:
    """Per-mode first time with ``|y_r| <= eps`` (``None`` if never reached)."""
    h = hitting_times(traj.t, traj.y, eps)
    return [None if math.isnan(v) else float(v) for v in h]


def measure_ultimate_magnitude(traj: Trajectory, window: tuple[float, float]) -> np.ndarray:
    """Per-mode ``max |y_r|`` over samples with ``t_a <= t <= t_b``."""
    if not traj.completed:
        raise ValueError(f"trajectory did not complete ({traj.termination})")
    return ultimate_magnitude(traj.t, traj.y, window)


def ultimate_magnitude(t: np.ndarray, y: np.ndarray, window: tuple[float, float]) -> np.ndarray:
    t_a, t_b = window
    tol = 1e-9 * max(1.0, abs(t[-1]))
    if t_a > t_b or t_a < t[0] - tol or t_b > t[-1] + tol:
        raise ValueError(f"window {window} is outside the sampled span [{t[0]}, {t[-1]}]")
    sel = (t >= t_a - tol) & (t <= t_b + tol)
    return np.max(np.abs(y[sel]), axis=0)


# -- basin classification -----------------------------------------------------

CONVERGED, ESCAPED, UNDECIDED = "conv", "esc", "undec"


@dataclass
class BasinGrid:
    """Per-cell labels on a planar grid; ``labels[j, i]`` belongs to ``(xs[i], ys[j])``."""

    xs: np.ndarray
    ys: np.ndarray
    labels: np.ndarray
    boundaries: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def points(self) -> np.ndarray:
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([gx.ravel(), gy.ravel()])

    @property
    def cell_width(self) -> float:
        widths = [np.diff(a).max() for a in (self.xs, self.ys) if a.size > 1]
        return float(max(widths)) if widths else 0.0

    def counts(self) -> dict[str, int]:
        return {lab: int(np.sum(self.labels == lab)) for lab in (CONVERGED, ESCAPED, UNDECIDED)}

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "label"])
            for (a, b), lab in zip(self.points, self.labels.ravel()):
                w.writerow([repr(float(a)), repr(float(b)), lab])


def analytic_boundaries(sys: OdecoSystem) -> list[dict]:
    """Lines ``v_r^T x = value`` bounding the certified region (stable-gain modes only)."""
    from .certify import threshold

    out = []
    for r in range(sys.n):
        m = mode_params(sys, r)
        if not m.kappa < 0:
            continue
        c = threshold(m)
        if c is None:
            continue
        values = [-c, c] if m.even else [c]
        for v in values:
            out.append({"mode": r + 1, "direction": sys.vector(r).tolist(), "value": v})
    return out


def basin_grid(
    sys: OdecoSystem,
    x_range: tuple[float, float] = (-3.0, 3.0),
    y_range: tuple[float, float] = (-3.0, 3.0),
    counts: tuple[int, int] = (121, 121),
    t_end: float = 30.0,
    eps: float = 1e-3,
    blowup_threshold: float = DEFAULT_BLOWUP,
    dt: float = DEFAULT_DT,
) -> BasinGrid:
    """Integrate every grid point and label it converged / escaped / undecided.

    A cell is converged once ``max_r |y_r| <= eps`` and escaped once the
    state exceeds ``blowup_threshold`` or stops being finite.  All cells are
    stepped together; decided cells drop out of the batch.
    """
    if sys.n != 2:
        raise UnsupportedRegimeError(
            "basin_grid needs a planar system (n = 2); slice higher-dimensional systems first"
        )
    nx, ny = counts
    if nx < 1 or ny < 1:
        raise ValueError(f"grid counts must be positive, got {counts}")
    xs = np.linspace(*x_range, nx)
    ys = np.linspace(*y_range, ny)
    gx, gy = np.meshgrid(xs, ys)
    X = np.column_stack([gx.ravel(), gy.ravel()])
    labels = np.full(X.shape[0], UNDECIDED, dtype=object)

    f = closed_loop_rhs(sys)
    V = sys.basis
    times = _grid(t_end, dt)
    active = np.arange(X.shape[0])
    x = X.copy()

    def settle(x, active):
        with np.errstate(invalid="ignore"):
            mag = np.max(np.abs(x @ V), axis=1)
            esc = ~np.isfinite(mag) | (mag > blowup_threshold)
            conv = ~esc & (mag <= eps)
        labels[active[esc]] = ESCAPED
        labels[active[conv]] = CONVERGED
        keep = ~(esc | conv)
        return x[keep], active[keep]

    x, active = settle(x, active)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, times.size):
            if active.size == 0:
                break
            x = rk4_step(f, times[i - 1], x, times[i] - times[i - 1])
            x, active = settle(x, active)

    config = {
        "x_range": list(x_range), "y_range": list(y_range), "counts": [nx, ny],
        "t_end": t_end, "eps": eps, "dt": dt, "blowup_threshold": blowup_threshold,
    }
    return BasinGrid(xs, ys, labels.reshape(ny, nx), analytic_boundaries(sys), config)


def basin_agreement(grid: BasinGrid, sys: OdecoSystem, band: float | None = None) -> dict:
    """Compare simulated labels with the analytic region, skipping a band around its boundary.

    ``band`` defaults to one cell width.  Undecided cells count as
    disagreements and are also reported separately.
    """
    from .certify import roa_membership

    band = grid.cell_width if band is None else band
    pts = grid.points
    labels = grid.labels.ravel()
    near = np.zeros(len(pts), dtype=bool)
    for b in grid.boundaries:
        near |= np.abs(pts @ np.asarray(b["direction"]) - b["value"]) < band
    predicted = np.array([roa_membership(sys, p).inside for p in pts])
    considered = ~near
    expected = np.where(predicted, CONVERGED, ESCAPED)
    agree = considered & (labels == expected)
    n_cons = int(considered.sum())
    return {
        "cells": int(len(pts)),
        "considered": n_cons,
        "excluded_band": int(near.sum()),
        "agree": int(agree.sum()),
        "undecided_considered": int(np.sum(considered & (labels == UNDECIDED))),
        "fraction": float(agree.sum() / n_cons) if n_cons else 1.0,
        "band": band,
    }
