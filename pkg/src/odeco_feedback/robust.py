"""Robust invariance and ISS-type bounds under matched bounded disturbances.

Only even ``p`` is handled: the drift ``kappa*y + lam*y**(p+1)`` is then odd
in ``y``, so a symmetric interval is forward invariant as soon as the drift
plus the worst-case disturbance points inward at its right end.  The
interval radius is a root of

    phi(s) = lam * s**(p+1) + kappa * s + dbar,

found by bisection on an interval where ``phi`` is provably monotone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import InfeasibleDisturbanceError, UnsupportedRegimeError
from .modal import ModeParams, mode_params, to_modal
from .tensor import OdecoSystem

BISECT_MAXITER = 200
RESIDUAL_TOL = 1e-12
DEGENERATE_MARGIN = 1e-9


def bisect_decreasing(f: Callable[[float], float], lo: float, hi: float,
                      maxiter: int = BISECT_MAXITER) -> float:
    """Root of ``f`` on ``[lo, hi]`` given ``f(lo) >= 0 >= f(hi)``.

    Halves until the bracket can no longer shrink in floating point, then
    returns whichever endpoint has the smaller residual.
    """
    flo, fhi = f(lo), f(hi)
    if flo < 0 or fhi > 0:
        raise ValueError(f"not a decreasing bracket: f({lo})={flo}, f({hi})={fhi}")
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if fm > 0:
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return lo if abs(flo) <= abs(fhi) else hi


def _phi(m: ModeParams, dbar: float) -> Callable[[float], float]:
    return lambda s: m.lam * s ** (m.p + 1) + m.kappa * s + dbar


def _require_even_stable(m: ModeParams, mode: int | None = None) -> None:
    label = "" if mode is None else f"mode {mode + 1}: "
    if not m.even:
        raise UnsupportedRegimeError(f"{label}robust bounds are only available for even p", mode=mode)
    if not m.kappa < 0:
        raise UnsupportedRegimeError(f"{label}robust bounds need kappa < 0", mode=mode)


def peak_point(m: ModeParams) -> float:
    """Maximiser ``s* = (-kappa / ((p+1) lam))^(1/p)`` of ``-kappa*s - lam*s**(p+1)``."""
    return (-m.kappa / ((m.p + 1) * m.lam)) ** (1.0 / m.p)


def dbar_max(m: ModeParams) -> float:
    """Largest disturbance level a destabilising mode (``lam > 0``) can absorb."""
    _require_even_stable(m)
    if not m.lam > 0:
        raise UnsupportedRegimeError("dbar_max is defined for lam > 0 only")
    s = peak_point(m)
    return -m.kappa * s - m.lam * s ** (m.p + 1)


def robust_threshold(m: ModeParams, dbar: float) -> float:
    """Smallest positive root of ``phi`` (the robust radius for ``lam > 0``)."""
    _require_even_stable(m)
    if not m.lam > 0:
        raise UnsupportedRegimeError("robust_threshold needs lam > 0; use hat_threshold")
    if dbar < 0:
        raise ValueError(f"disturbance bound must be nonnegative, got {dbar!r}")
    if dbar == 0:
        return 0.0
    top = dbar_max(m)
    if not dbar < top:
        raise InfeasibleDisturbanceError(f"dbar = {dbar!r} >= dbar_max = {top!r}")
    # phi decreases strictly on [0, s*] from dbar > 0 to dbar - dbar_max < 0.
    return bisect_decreasing(_phi(m, dbar), 0.0, peak_point(m))


def hat_threshold(m: ModeParams, dbar: float) -> float:
    """Unique nonnegative root of ``phi`` for a mode with ``lam <= 0``."""
    _require_even_stable(m)
    if m.lam > 0:
        raise UnsupportedRegimeError("hat_threshold needs lam <= 0; use robust_threshold")
    if dbar < 0:
        raise ValueError(f"disturbance bound must be nonnegative, got {dbar!r}")
    linear = dbar / -m.kappa
    if m.lam == 0 or dbar == 0:
        return linear
    # phi(0) = dbar > 0 and phi(dbar/|kappa|) = lam * s**(p+1) <= 0.
    phi = _phi(m, dbar)
    if phi(linear) >= 0:
        # the higher-order term is below rounding: the linear bound is the root
        return linear
    return bisect_decreasing(phi, 0.0, linear)


def iss_envelope(alpha: float, y0_abs: float, d_sup: float, t):
    """``exp(-alpha t)|y0| + (1 - exp(-alpha t)) / alpha * d_sup``."""
    if not alpha > 0:
        raise ValueError(f"ISS rate must be positive, got {alpha!r}")
    decay = np.exp(-alpha * np.asarray(t, dtype=float))
    out = decay * y0_abs - np.expm1(-alpha * np.asarray(t, dtype=float)) / alpha * d_sup
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class DisturbanceEnvelope:
    """Per-mode bounds ``|d_r(t)| <= bounds[r]``."""

    bounds: np.ndarray

    def __post_init__(self):
        b = np.array(self.bounds, dtype=float).reshape(-1)
        if np.any(~np.isfinite(b)) or np.any(b < 0):
            raise ValueError(f"disturbance bounds must be finite and nonnegative, got {b.tolist()}")
        b.setflags(write=False)
        object.__setattr__(self, "bounds", b)

    @classmethod
    def uniform(cls, dbar: float, n: int) -> "DisturbanceEnvelope":
        return cls(np.full(n, float(dbar)))


@dataclass
class RobustMode:
    mode: int
    kind: str  # "tilde" for lam > 0, "hat" otherwise
    dbar: float
    bound: float
    alpha: float
    gain_slope: float | None
    dbar_max: float | None = None
    nominal_threshold: float | None = None

    def gain(self, s):
        """Linear ISS gain; ``gain(dbar) == bound``."""
        if self.gain_slope is None:
            raise ValueError("ISS gain is undefined for a zero disturbance bound")
        if s == self.dbar:
            return self.bound
        return self.gain_slope * s

    def envelope(self, y0_abs: float, t, d_sup: float | None = None):
        return iss_envelope(self.alpha, y0_abs, self.dbar if d_sup is None else d_sup, t)

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode + 1,
            "kind": self.kind,
            "dbar": self.dbar,
            "bound": self.bound,
            "alpha": self.alpha,
            "gain_slope": self.gain_slope,
            "dbar_max": self.dbar_max,
            "nominal_threshold": self.nominal_threshold,
        }


@dataclass
class RobustCertificate:
    modes: list[RobustMode]
    warnings: list[str] = field(default_factory=list)

    @property
    def bounds(self) -> np.ndarray:
        return np.array([m.bound for m in self.modes])

    @property
    def alphas(self) -> np.ndarray:
        return np.array([m.alpha for m in self.modes])

    @property
    def zero_disturbance(self) -> bool:
        return all(m.dbar == 0 for m in self.modes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "zero_disturbance": self.zero_disturbance,
            "modes": [m.to_dict() for m in self.modes],
            "warnings": list(self.warnings),
        }


def robust_certificate(sys: OdecoSystem, env: DisturbanceEnvelope) -> RobustCertificate:
    """Ultimate bounds, ISS rates and gains for every mode."""
    if env.bounds.shape != (sys.n,):
        raise ValueError(f"need {sys.n} disturbance bounds, got {env.bounds.size}")
    params = [mode_params(sys, r) for r in range(sys.n)]
    for r, m in enumerate(params):
        _require_even_stable(m, r)
    infeasible = tuple(
        r for r, m in enumerate(params) if m.lam > 0 and not env.bounds[r] < dbar_max(m)
    )
    if infeasible:
        detail = ", ".join(
            f"mode {r + 1}: dbar={env.bounds[r]:.6g} >= dbar_max={dbar_max(params[r]):.6g}"
            for r in infeasible
        )
        raise InfeasibleDisturbanceError(f"infeasible disturbance bounds ({detail})", modes=infeasible)

    cert = RobustCertificate(modes=[])
    for r, m in enumerate(params):
        d = float(env.bounds[r])
        if m.lam > 0:
            top = dbar_max(m)
            bound = robust_threshold(m, d)
            kind, nominal = "tilde", (-m.kappa / m.lam) ** (1.0 / m.p)
            if top - d <= DEGENERATE_MARGIN:
                cert.warnings.append(
                    f"mode {r + 1}: dbar is within {DEGENERATE_MARGIN:g} of dbar_max; "
                    "the robust radius sits at a near-double root and invariance margins vanish"
                )
        else:
            top, nominal = None, None
            bound = hat_threshold(m, d)
            kind = "hat"
        alpha = -(m.kappa + max(m.lam, 0.0) * bound**m.p)
        slope = bound / d if d > 0 else None
        cert.modes.append(RobustMode(r, kind, d, bound, alpha, slope, top, nominal))
    return cert


def robust_set_membership(sys: OdecoSystem, env: DisturbanceEnvelope, x0) -> bool:
    """Whether ``|v_r^T x0| < c_tilde_r`` for every destabilising mode."""
    cert = robust_certificate(sys, env)
    y0 = to_modal(sys, x0)
    return all(abs(y0[m.mode]) < m.bound for m in cert.modes if m.kind == "tilde")
