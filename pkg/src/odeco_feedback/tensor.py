"""Supersymmetric tensors, ODECO systems and their contractions.

An ODECO system is stored in factored form: an orthonormal basis ``V``
(columns are the modal directions), one Z-eigenvalue and one feedback
gain per column, and the tensor order ``k``.  The dense representation
exists only as a small-scale, brute-force oracle for the factored path.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DimensionError, SpecError

ORTHO_TOL = 1e-10
UNIT_NORM_TOL = 1e-6
MAX_DENSE_ENTRIES = 10**6


@dataclass(frozen=True)
class DenseSymTensor:
    """Dense order-``k`` tensor over ``R^n``.

    ``entries`` has shape ``(n,) * k``; the C-ordered buffer is the flat
    mixed-radix layout, so ``entries.ravel()[i]`` addresses index tuple
    ``np.unravel_index(i, entries.shape)``.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim < 1 or len(set(a.shape)) != 1:
            raise DimensionError(f"tensor must be cubical, got shape {a.shape}")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def order(self) -> int:
        return self.entries.ndim

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class OdecoSystem:
    """Closed loop ``x' = K x + A x^{k-1}`` with a shared orthonormal basis.

    ``A = sum_r lam[r] v_r^{(x)k}`` and ``K = sum_r kappa[r] v_r v_r^T`` where
    ``v_r = basis[:, r]``.

    Columns within ``UNIT_NORM_TOL`` of unit length are renormalised on
    construction; columns further off are rejected.  Orthogonality is not
    enforced here (see :func:`validate_system`).
    """

    basis: np.ndarray
    lam: np.ndarray
    kappa: np.ndarray
    k: int
    _gain: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        V = np.array(self.basis, dtype=float)
        if V.ndim != 2 or V.shape[0] != V.shape[1] or V.shape[0] < 1:
            raise DimensionError(f"basis must be a square n x n matrix, got shape {V.shape}")
        n = V.shape[0]
        lam = np.array(self.lam, dtype=float).reshape(-1)
        kappa = np.array(self.kappa, dtype=float).reshape(-1)
        if lam.shape != (n,) or kappa.shape != (n,):
            raise DimensionError(
                f"need {n} eigenvalues and {n} gains, got {lam.size} and {kappa.size}"
            )
        if int(self.k) != self.k or self.k < 3:
            raise SpecError(f"tensor order k must be an integer >= 3, got {self.k}")
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(lam)) and np.all(np.isfinite(kappa))):
            raise SpecError("basis, eigenvalues and gains must be finite")
        norms = np.linalg.norm(V, axis=0)
        bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_NORM_TOL)
        if bad.size:
            raise SpecError(
                f"basis column(s) {[int(j) + 1 for j in bad]} are not unit length "
                f"(norms {norms[bad].tolist()})"
            )
        V = V / norms
        for arr in (V, lam, kappa):
            arr.setflags(write=False)
        object.__setattr__(self, "basis", V)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "k", int(self.k))
        gain = (V * kappa) @ V.T
        gain.setflags(write=False)
        object.__setattr__(self, "_gain", gain)

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def p(self) -> int:
        return self.k - 2

    @property
    def gain_matrix(self) -> np.ndarray:
        """Feedback matrix ``K = V diag(kappa) V^T``."""
        return self._gain

    def vector(self, r: int) -> np.ndarray:
        return self.basis[:, r]


def planar_example(theta: float = math.pi / 6) -> OdecoSystem:
    """The two-mode, k = 4 benchmark: one destabilising mode, one stabilising."""
    c, s = math.cos(theta), math.sin(theta)
    V = np.array([[c, -s], [s, c]])
    return OdecoSystem(basis=V, lam=[1.0, -0.5], kappa=[-1.0, -1.0], k=4)


def random_orthonormal(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_odeco_system(
    rng: np.random.Generator,
    n: int,
    k: int,
    lam_range: tuple[float, float] = (-2.0, 2.0),
    kappa_range: tuple[float, float] = (-3.0, -0.1),
) -> OdecoSystem:
    return OdecoSystem(
        basis=random_orthonormal(n, rng),
        lam=rng.uniform(*lam_range, size=n),
        kappa=rng.uniform(*kappa_range, size=n),
        k=k,
    )


def _check_vector(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (n,):
        raise DimensionError(f"expected trailing dimension {n}, got shape {x.shape}")
    return x


def dense_contract(A: DenseSymTensor, x) -> np.ndarray:
    """``(A x^{k-1})_i = sum a[i, i2..ik] x[i2]...x[ik]`` by direct summation, O(n^k)."""
    x = _check_vector(x, A.dim)
    if x.ndim != 1:
        raise DimensionError("dense_contract takes a single vector")
    out = A.entries
    for _ in range(A.order - 1):
        out = out @ x
    return np.array(out, dtype=float).reshape(A.dim)


def scalar_form(A: DenseSymTensor, x) -> float:
    """The homogeneous polynomial ``A x^k``."""
    x = _check_vector(x, A.dim)
    if x.ndim != 1:
        raise DimensionError("scalar_form takes a single vector")
    out = A.entries
    for _ in range(A.order):
        out = out @ x
    return float(out)


def odeco_contract(sys: OdecoSystem, x) -> np.ndarray:
    """``sum_r lam_r (v_r^T x)^{k-1} v_r`` in O(n^2).

    Accepts a single vector or a stack of vectors with shape ``(..., n)``.
    """
    x = _check_vector(x, sys.n)
    y = x @ sys.basis
    return (sys.lam * _int_power(y, sys.k - 1)) @ sys.basis.T


def _int_power(y: np.ndarray, e: int) -> np.ndarray:
    # repeated multiplication; much faster than float pow on large batches
    out = y
    for _ in range(e - 1):
        out = out * y
    return out


def materialize(sys: OdecoSystem) -> DenseSymTensor:
    """Dense tensor ``sum_r lam_r v_r^{(x)k}``."""
    if sys.n**sys.k > MAX_DENSE_ENTRIES:
        raise MemoryError(
            f"dense tensor would have {sys.n}^{sys.k} entries (limit {MAX_DENSE_ENTRIES})"
        )
    A = np.zeros((sys.n,) * sys.k)
    for r in range(sys.n):
        v = sys.vector(r)
        term = v
        for _ in range(sys.k - 1):
            term = np.multiply.outer(term, v)
        A += sys.lam[r] * term
    return DenseSymTensor(A)


def is_supersymmetric(A: DenseSymTensor, tol: float = 1e-12) -> bool:
    """Compare the tensor with every axis permutation of itself."""
    a = A.entries
    for perm in itertools.permutations(range(A.order)):
        if np.max(np.abs(a - a.transpose(perm)), initial=0.0) > tol:
            return False
    return True


def z_eigen_residual(A: DenseSymTensor, v, lam: float) -> float:
    """``||A v^{k-1} - lam v||_2`` for a unit vector ``v``."""
    v = _check_vector(v, A.dim)
    nv = float(np.linalg.norm(v))
    if abs(nv - 1.0) > 1e-10:
        raise ValueError(f"Z-eigenvector must have unit norm, got {nv!r}")
    return float(np.linalg.norm(dense_contract(A, v) - lam * v))


@dataclass
class ValidationReport:
    orthonormality_defect: float
    tol: float
    k: int
    p: int
    i_plus: list[int]
    i_minus: list[int]
    i_zero: list[int]
    nonnegative_gain_modes: list[int]
    errors: list[str] = field(default_factory=list)

    @property
    def orthonormal(self) -> bool:
        return self.orthonormality_defect <= self.tol

    @property
    def p_even(self) -> bool:
        return self.p % 2 == 0

    @property
    def all_gains_negative(self) -> bool:
        return not self.nonnegative_gain_modes

    @property
    def valid(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict[str, Any]:
        # Mode indices are reported 1-based, matching r = 1..n.
        return {
            "valid": self.valid,
            "orthonormality_defect": self.orthonormality_defect,
            "tol": self.tol,
            "k": self.k,
            "p": self.p,
            "parity": "even" if self.p_even else "odd",
            "I_plus": [r + 1 for r in self.i_plus],
            "I_minus": [r + 1 for r in self.i_minus],
            "I_zero": [r + 1 for r in self.i_zero],
            "nonnegative_gain_modes": [r + 1 for r in self.nonnegative_gain_modes],
            "errors": list(self.errors),
        }


def validate_system(sys: OdecoSystem, tol: float = ORTHO_TOL) -> ValidationReport:
    """Check orthonormality and summarise the mode signs.

    Never raises; failures are collected in ``report.errors``.  Modes with a
    nonnegative gain do not invalidate the system (the closed-form solution
    still applies) but they are listed because the certificates refuse them.
    """
    V = sys.basis
    defect = float(np.max(np.abs(V.T @ V - np.eye(sys.n))))
    report = ValidationReport(
        orthonormality_defect=defect,
        tol=tol,
        k=sys.k,
        p=sys.p,
        i_plus=[r for r in range(sys.n) if sys.lam[r] > 0],
        i_minus=[r for r in range(sys.n) if sys.lam[r] < 0],
        i_zero=[r for r in range(sys.n) if sys.lam[r] == 0],
        nonnegative_gain_modes=[r for r in range(sys.n) if sys.kappa[r] >= 0],
    )
    if not defect <= tol:
        report.errors.append(f"basis is not orthonormal: max|V^T V - I| = {defect:.3e} > {tol:.1e}")
    if sys.p < 1:
        report.errors.append(f"p = k - 2 must be >= 1, got {sys.p}")
    return report


# -- system spec files -------------------------------------------------------

def system_from_dict(d: dict[str, Any]) -> OdecoSystem:
    """Build a system from the JSON layout.

    ``{"n": 2, "k": 4, "basis": [[v11, v21], [v12, v22]], "lambda": [...], "kappa": [...]}``
    where ``basis[j]`` is the j-th basis *column* ``v_{j+1}``.
    """
    if not isinstance(d, dict):
        raise SpecError("system spec must be a JSON object")
    missing = [key for key in ("k", "basis", "lambda", "kappa") if key not in d]
    if missing:
        raise SpecError(f"system spec is missing field(s): {', '.join(missing)}")
    try:
        cols = np.array(d["basis"], dtype=float)
        lam = np.array(d["lambda"], dtype=float)
        kappa = np.array(d["kappa"], dtype=float)
        k = d["k"]
    except (TypeError, ValueError) as exc:
        raise SpecError(f"non-numeric entry in system spec: {exc}") from exc
    if cols.ndim != 2:
        raise SpecError("basis must be a list of n columns, each a list of n numbers")
    n = d.get("n", cols.shape[0])
    if n != cols.shape[0] or cols.shape != (n, n):
        raise SpecError(f"basis shape {cols.shape} does not match n = {n}")
    if not isinstance(k, int) or isinstance(k, bool):
        raise SpecError(f"k must be an integer, got {k!r}")
    try:
        return OdecoSystem(basis=cols.T, lam=lam, kappa=kappa, k=k)
    except DimensionError as exc:
        raise SpecError(str(exc)) from exc


def system_to_dict(sys: OdecoSystem) -> dict[str, Any]:
    return {
        "n": sys.n,
        "k": sys.k,
        "basis": sys.basis.T.tolist(),
        "lambda": sys.lam.tolist(),
        "kappa": sys.kappa.tolist(),
    }


def load_system(path: str | Path) -> OdecoSystem:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from exc
    return system_from_dict(data)


def save_system(sys: OdecoSystem, path: str | Path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(sys), indent=2) + "\n")
