"""Region-of-attraction, settling-time and escape-time certificates.

Every certificate here assumes a stabilising linear part (``kappa_r < 0``
for every mode) and refuses other regimes with
:class:`UnsupportedRegimeError`.  Mode indices in the Python API are
0-based; the JSON forms report ``mode`` 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

from .errors import PreconditionError, UnsupportedRegimeError
from .modal import ModeParams, jacobian, mode_horizon, mode_params, nonzero_equilibria, to_modal
from .tensor import OdecoSystem


def _require_stable(m: ModeParams, mode: int | None = None) -> None:
    if not m.kappa < 0:
        label = "" if mode is None else f"mode {mode + 1}: "
        raise UnsupportedRegimeError(
            f"{label}certificates need kappa < 0, got kappa = {m.kappa!r}", mode=mode
        )


def _require_stable_system(sys: OdecoSystem) -> None:
    for r in range(sys.n):
        _require_stable(mode_params(sys, r), r)


def threshold(m: ModeParams) -> float | None:
    """Nonzero equilibrium ``c = (-kappa/lam)^(1/p)`` bounding the mode's basin.

    ``None`` when the mode is unconstrained (``lam == 0``, or even p with
    ``lam < 0``).  For odd p the real root keeps the sign of ``-kappa/lam``.
    """
    _require_stable(m)
    eq = nonzero_equilibria(m)
    if not eq:
        return None
    return max(eq) if m.even else eq[0]


# -- mode fates -----------------------------------------------------------------

@dataclass(frozen=True)
class ConvergesToZero:
    def to_dict(self) -> dict[str, Any]:
        return {"fate": "converges"}


@dataclass(frozen=True)
class BoundaryEquilibrium:
    value: float

    def to_dict(self) -> dict[str, Any]:
        return {"fate": "boundary_equilibrium", "value": self.value}


@dataclass(frozen=True)
class EscapesPlusInfinity:
    t_esc: float

    def to_dict(self) -> dict[str, Any]:
        return {"fate": "escapes_plus_infinity", "t_esc": self.t_esc}


@dataclass(frozen=True)
class EscapesMinusInfinity:
    t_esc: float

    def to_dict(self) -> dict[str, Any]:
        return {"fate": "escapes_minus_infinity", "t_esc": self.t_esc}


ModeFate = Union[ConvergesToZero, BoundaryEquilibrium, EscapesPlusInfinity, EscapesMinusInfinity]


def classify_mode_fate(m: ModeParams, y0: float) -> ModeFate:
    """Decide whether a stabilised mode converges, sits on its equilibrium, or escapes."""
    _require_stable(m)
    y0 = float(y0)
    c = threshold(m)
    if c is None:
        return ConvergesToZero()
    if m.even:
        if abs(y0) < c:
            return ConvergesToZero()
        if abs(y0) == c:
            return BoundaryEquilibrium(y0)
    else:
        outside = y0 > c if c > 0 else y0 < c
        if y0 == c:
            return BoundaryEquilibrium(y0)
        if not outside:
            return ConvergesToZero()
    t_esc = mode_horizon(m, y0)
    if not math.isfinite(t_esc):
        # y0 is within rounding of the equilibrium: the bracket never closes
        return BoundaryEquilibrium(y0)
    return EscapesPlusInfinity(t_esc) if y0 > 0 else EscapesMinusInfinity(t_esc)


def escape_time_mode(m: ModeParams, y0: float) -> float:
    """``1/(p|kappa|) * ln((lam/|kappa|) / (lam/|kappa| - y0^-p))`` for an escaping mode."""
    fate = classify_mode_fate(m, y0)
    if not isinstance(fate, (EscapesPlusInfinity, EscapesMinusInfinity)):
        raise PreconditionError(f"mode does not escape from y0 = {y0!r} ({fate.to_dict()['fate']})")
    alpha = -m.kappa
    q = m.lam / alpha
    arg = q / (q - float(y0) ** (-m.p))
    return math.log(arg) / (m.p * alpha)


def escape_time(sys: OdecoSystem, x0) -> float | None:
    """First finite escape time over all modes, or ``None`` if nothing escapes."""
    _require_stable_system(sys)
    y0 = to_modal(sys, x0)
    times = []
    for r in range(sys.n):
        m = mode_params(sys, r)
        if isinstance(classify_mode_fate(m, y0[r]), (EscapesPlusInfinity, EscapesMinusInfinity)):
            times.append(escape_time_mode(m, y0[r]))
    return min(times) if times else None


def settling_time_mode(m: ModeParams, y0: float, eps: float) -> float:
    """First time ``|y(t)| <= eps`` for a converging mode."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    fate = classify_mode_fate(m, y0)
    if not isinstance(fate, ConvergesToZero):
        raise PreconditionError(f"mode does not converge from y0 = {y0!r} ({fate.to_dict()['fate']})")
    y0 = float(y0)
    if abs(y0) <= eps:
        return 0.0
    alpha = -m.kappa
    if m.lam == 0.0:
        return math.log(abs(y0) / eps) / alpha
    b = m.lam if m.even else m.lam * math.copysign(1.0, y0)
    shift = b / alpha
    arg = (eps ** (-m.p) - shift) / (abs(y0) ** (-m.p) - shift)
    return max(math.log(arg), 0.0) / (m.p * alpha)


# -- region of attraction -----------------------------------------------------

@dataclass
class ModeConstraint:
    mode: int
    y0: float
    threshold: float | None
    kind: str  # "two-sided", "upper", "lower" or "unconstrained"
    satisfied: bool
    boundary: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode + 1,
            "y0": self.y0,
            "threshold": "unconstrained" if self.threshold is None else self.threshold,
            "kind": self.kind,
            "satisfied": self.satisfied,
            "boundary": self.boundary,
        }


@dataclass
class RoaCertificate:
    parity: str
    modes: list[ModeConstraint] = field(default_factory=list)

    @property
    def inside(self) -> bool:
        return all(c.satisfied for c in self.modes)

    @property
    def violated(self) -> list[int]:
        return [c.mode for c in self.modes if not c.satisfied]

    @property
    def on_boundary(self) -> bool:
        return any(c.boundary for c in self.modes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "inside": self.inside,
            "parity": self.parity,
            "boundary": self.on_boundary,
            "violated_modes": [r + 1 for r in self.violated],
            "modes": [c.to_dict() for c in self.modes],
        }


def mode_constraint(m: ModeParams, y0: float, mode: int = 0) -> ModeConstraint:
    c = threshold(m)
    y0 = float(y0)
    if c is None:
        return ModeConstraint(mode, y0, None, "unconstrained", True)
    if m.even:
        return ModeConstraint(mode, y0, c, "two-sided", abs(y0) < c, abs(y0) == c)
    if c > 0:
        return ModeConstraint(mode, y0, c, "upper", y0 < c, y0 == c)
    return ModeConstraint(mode, y0, c, "lower", y0 > c, y0 == c)


def roa_membership(sys: OdecoSystem, x0) -> RoaCertificate:
    """Check ``x0`` against the modal threshold inequalities.

    Points exactly on a threshold are reported outside (the certified sets are
    open) with ``boundary`` set on the offending mode.
    """
    _require_stable_system(sys)
    y0 = to_modal(sys, x0)
    cert = RoaCertificate(parity="even" if sys.p % 2 == 0 else "odd")
    for r in range(sys.n):
        cert.modes.append(mode_constraint(mode_params(sys, r), y0[r], r))
    return cert


def settling_time(sys: OdecoSystem, x0, eps: float) -> float:
    """Time after which every ``|y_r(t)| <= eps`` (so ``||x(t)|| <= sqrt(n) eps``)."""
    return max(settling_times(sys, x0, eps))


def settling_times(sys: OdecoSystem, x0, eps: float) -> list[float]:
    cert = roa_membership(sys, x0)
    if not cert.inside:
        bad = cert.violated[0]
        raise PreconditionError(
            f"x0 is outside the certified region of attraction (mode {bad + 1})", mode=bad
        )
    y0 = to_modal(sys, x0)
    return [settling_time_mode(mode_params(sys, r), y0[r], eps) for r in range(sys.n)]


def linearization_modal(sys: OdecoSystem) -> np.ndarray:
    """Modal-coordinate Jacobian of the closed loop at the origin."""
    J = jacobian(sys, np.zeros(sys.n))
    return sys.basis.T @ J @ sys.basis
