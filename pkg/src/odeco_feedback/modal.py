"""Modal coordinates and exact per-mode trajectories.

In the shared basis every mode obeys the scalar Bernoulli equation

    y' = kappa * y + lam * y**(p + 1),      p = k - 2,

whose solution is available in closed form up to the first time the
bracketed term of the solution formula reaches zero (the horizon).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .tensor import OdecoSystem, odeco_contract

KAPPA_ZERO_TOL = 1e-14
Y0_ZERO_TOL = 1e-300


@dataclass(frozen=True)
class ModeParams:
    """One decoupled mode: linear gain, Z-eigenvalue and exponent ``p = k - 2``."""

    kappa: float
    lam: float
    p: int

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"p must be an integer >= 1, got {self.p!r}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def even(self) -> bool:
        return self.p % 2 == 0

    @property
    def parity(self) -> str:
        return "even" if self.even else "odd"

    def drift(self, y):
        """Right-hand side ``kappa*y + lam*y**(p+1)``."""
        return self.kappa * y + self.lam * y ** (self.p + 1)


def mode_params(sys: OdecoSystem, r: int) -> ModeParams:
    return ModeParams(kappa=sys.kappa[r], lam=sys.lam[r], p=sys.p)


def system_modes(sys: OdecoSystem) -> list[ModeParams]:
    return [mode_params(sys, r) for r in range(sys.n)]


def nonzero_equilibria(m: ModeParams) -> tuple[float, ...]:
    """Real solutions of ``kappa + lam * y**p = 0``.

    Even p gives the pair ``(-c, c)`` when ``-kappa/lam > 0`` and nothing
    otherwise; odd p gives the single signed real root.
    """
    if m.lam == 0.0 or m.kappa == 0.0:
        return ()
    ratio = -m.kappa / m.lam
    if m.even and ratio <= 0:
        return ()
    c = abs(ratio) ** (1.0 / m.p)
    if not math.isfinite(c):
        # lam so small the equilibrium is beyond floating point: unconstrained
        return ()
    return (-c, c) if m.even else (math.copysign(c, ratio),)


def _beyond_equilibrium(m: ModeParams, y0: float) -> bool:
    # Stable origin (kappa < 0): the mode escapes exactly when y0 lies strictly
    # outside the nonzero equilibrium on its own side of the origin.
    for c in nonzero_equilibria(m):
        if (c > 0 and y0 > c) or (c < 0 and y0 < c):
            return True
    return False


def to_modal(sys: OdecoSystem, x) -> np.ndarray:
    """``y = V^T x`` (works on stacks of shape ``(..., n)``)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (sys.n,):
        raise DimensionError(f"expected trailing dimension {sys.n}, got shape {x.shape}")
    return x @ sys.basis


def from_modal(sys: OdecoSystem, y) -> np.ndarray:
    """``x = V y = sum_r y_r v_r``."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1:] != (sys.n,):
        raise DimensionError(f"expected trailing dimension {sys.n}, got shape {y.shape}")
    return y @ sys.basis.T


def vector_field(sys: OdecoSystem, x) -> np.ndarray:
    """Closed-loop right-hand side ``K x + A x^{k-1}``."""
    x = np.asarray(x, dtype=float)
    return x @ sys.gain_matrix.T + odeco_contract(sys, x)


def jacobian(sys: OdecoSystem, x) -> np.ndarray:
    """Jacobian of :func:`vector_field`: ``K + (k-1) sum_r lam_r (v_r^T x)^{k-2} v_r v_r^T``."""
    y = to_modal(sys, x)
    if y.ndim != 1:
        raise DimensionError("jacobian takes a single vector")
    V = sys.basis
    w = sys.kappa + (sys.k - 1) * sys.lam * y ** (sys.k - 2)
    return (V * w) @ V.T


def mode_horizon(m: ModeParams, y0: float) -> float:
    """End of the interval on which the closed-form solution is valid.

    ``math.inf`` when the mode never escapes (including ``y0 == 0`` and
    ``y0`` sitting exactly on a nonzero equilibrium).
    """
    y0 = float(y0)
    if abs(y0) < Y0_ZERO_TOL or y0 in nonzero_equilibria(m):
        return math.inf
    p = m.p
    if abs(m.kappa) < KAPPA_ZERO_TOL:
        rate = p * m.lam * y0**p
        return 1.0 / rate if rate > 0 else math.inf
    a = (m.lam / m.kappa) * y0**p
    if m.kappa < 0:
        # bracket * e^{p kappa t} = (1 + a) - a e^{p kappa t}, decreasing to 1 + a
        if not _beyond_equilibrium(m, y0) or 1.0 + a >= 0.0:
            return math.inf
        return math.log1p(-1.0 / (1.0 + a)) / (p * -m.kappa)
    # kappa > 0: bracket = (1 + a) e^{-p kappa t} - a, decreasing to -a
    if a <= 0.0:
        return math.inf
    return math.log1p(1.0 / a) / (p * m.kappa)


def mode_value(m: ModeParams, y0: float, t):
    """Closed-form ``y(t)`` for the scalar mode started at ``y0``.

    ``t`` may be a scalar or an array.  Raises :class:`DomainError` when any
    requested time is at or beyond :func:`mode_horizon`.
    """
    y0 = float(y0)
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    if np.any(t_arr < 0):
        raise ValueError("time must be nonnegative")
    if abs(y0) < Y0_ZERO_TOL:
        out = np.zeros_like(t_arr)
        return float(out) if scalar else out
    horizon = mode_horizon(m, y0)
    if np.any(t_arr >= horizon):
        raise DomainError(
            f"t = {float(np.max(t_arr))!r} is past the closed-form horizon {horizon!r}",
            horizon=horizon,
        )
    if y0 in nonzero_equilibria(m):
        out = np.full_like(t_arr, y0)
        return float(out) if scalar else out

    p = m.p
    y0p = y0**p  # exact signed power for odd p
    if abs(m.kappa) < KAPPA_ZERO_TOL:
        bracket = 1.0 - p * m.lam * y0p * t_arr
        out = y0 * bracket ** (-1.0 / p)
    elif m.kappa < 0:
        a = (m.lam / m.kappa) * y0p
        if 1.0 + a < 0.0 and horizon == math.inf:
            # y0 rounds onto the equilibrium from the inside
            out = np.full_like(t_arr, y0)
            return float(out) if scalar else out
        # bracket * e^{p kappa t} = 1 - a (e^{p kappa t} - 1); nothing overflows for large t
        reduced = 1.0 - a * np.expm1(p * m.kappa * t_arr)
        out = y0 * np.exp(m.kappa * t_arr) * reduced ** (-1.0 / p)
    else:
        a = (m.lam / m.kappa) * y0p
        bracket = np.exp(-p * m.kappa * t_arr) + a * np.expm1(-p * m.kappa * t_arr)
        out = y0 * bracket ** (-1.0 / p)
    return float(out) if scalar else out


@dataclass(frozen=True)
class ModeSolution:
    """A mode together with its initial value; callable on times below ``horizon``."""

    params: ModeParams
    y0: float
    horizon: float

    def __call__(self, t):
        return mode_value(self.params, self.y0, t)


def solve_mode(m: ModeParams, y0: float) -> ModeSolution:
    return ModeSolution(params=m, y0=float(y0), horizon=mode_horizon(m, y0))


def closed_form_state(sys: OdecoSystem, x0, t):
    """Exact ``x(t)``; ``t`` scalar gives shape ``(n,)``, an array of times gives ``(len(t), n)``."""
    y0 = to_modal(sys, x0)
    if y0.ndim != 1:
        raise DimensionError("closed_form_state takes a single initial state")
    t_arr = np.asarray(t, dtype=float)
    tmax = float(np.max(t_arr)) if t_arr.size else 0.0
    solutions = [solve_mode(mode_params(sys, r), y0[r]) for r in range(sys.n)]
    first = min(range(sys.n), key=lambda r: solutions[r].horizon)
    if tmax >= solutions[first].horizon:
        raise DomainError(
            f"mode {first + 1} escapes at t = {solutions[first].horizon!r}, before t = {tmax!r}",
            horizon=solutions[first].horizon,
            mode=first,
        )
    y = np.stack([np.asarray(s(t_arr)) for s in solutions], axis=-1)
    return from_modal(sys, y)
