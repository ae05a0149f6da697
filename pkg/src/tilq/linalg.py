"""Small dense kernels: pseudoinverse, PSD and symmetry tests, range consistency.

All norms are Frobenius unless a function says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds used across the package.

    pinv_rcond: relative singular-value cutoff for the pseudoinverse. ``None``
        selects ``max(rows, cols) * eps`` per matrix.
    psd_margin: allowed negative eigenvalue, relative to the spectral scale.
    residual_tol: allowed constraint residual, relative to a problem scale.
    symmetry_tol: allowed asymmetry ``||M - M^T||`` relative to ``max(1, ||M||)``.
    """

    pinv_rcond: Optional[float] = None
    psd_margin: float = 1e-9
    residual_tol: float = 1e-9
    symmetry_tol: float = 1e-9

    def __post_init__(self):
        for name in ("psd_margin", "residual_tol", "symmetry_tol"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be strictly positive")
        if self.pinv_rcond is not None and not self.pinv_rcond > 0:
            raise InvalidInputError("pinv_rcond must be strictly positive")


DEFAULT_TOL = Tolerances()


class PsdCheck(NamedTuple):
    ok: bool
    min_eig: float


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array or raise InvalidInputError."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return a


def norm(m) -> float:
    return float(np.linalg.norm(m))


def pinv(m, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse by SVD.

    Singular values below ``rcond * s_max`` are treated as zero, where rcond
    is ``tol.pinv_rcond`` or ``max(rows, cols) * eps`` when that is unset.
    Subnormal singular values are also dropped so the result stays finite.
    """
    a = as_matrix(m)
    rows, cols = a.shape
    if a.size == 0:
        return np.zeros((cols, rows))
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    rcond = tol.pinv_rcond if tol.pinv_rcond is not None else max(rows, cols) * np.finfo(float).eps
    cutoff = rcond * (s[0] if s.size else 0.0)
    keep = s > max(cutoff, np.finfo(float).tiny)
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (vt.T * s_inv) @ u.T


def symmetrize(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    return 0.5 * (a + a.T)


def is_symmetric(m, tol: Tolerances = DEFAULT_TOL) -> bool:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return norm(a - a.T) <= tol.symmetry_tol * max(1.0, norm(a))


def is_psd(m, tol: Tolerances = DEFAULT_TOL) -> PsdCheck:
    """PSD test on the symmetric part of ``m``.

    Passes when the smallest eigenvalue is at least ``-psd_margin * scale``
    with ``scale = max(1, spectral radius)``. The smallest eigenvalue is
    always returned.
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"PSD test needs a square matrix, got {a.shape}")
    if a.size == 0:
        return PsdCheck(True, 0.0)
    eigs = np.linalg.eigvalsh(symmetrize(a))
    scale = max(1.0, float(np.max(np.abs(eigs))))
    lam = float(eigs[0])
    return PsdCheck(lam >= -tol.psd_margin * scale, lam)


def consistency_residual(L, N, tol: Tolerances = DEFAULT_TOL) -> float:
    """``||L L^+ N - N||``: zero exactly when ``L X = N`` is solvable."""
    lm = as_matrix(L, "L")
    nm = as_matrix(N, "N")
    if lm.shape[0] != nm.shape[0]:
        raise InvalidInputError(f"L {lm.shape} and N {nm.shape} are not conformable")
    return norm(lm @ pinv(lm, tol) @ nm - nm)


def consistency_scale(L, N) -> float:
    return max(1.0, norm(L), norm(N))


def solve_consistency(L, N, tol: Tolerances = DEFAULT_TOL) -> bool:
    """True iff ``L X = N`` has a solution, i.e. ``L L^+ N = N`` within tolerance."""
    lm = as_matrix(L, "L")
    nm = as_matrix(N, "N")
    if lm.shape[0] != nm.shape[0]:
        raise InvalidInputError(f"L {lm.shape} and N {nm.shape} are not conformable")
    lp = pinv(lm, tol)
    return norm(lm @ lp @ nm - nm) <= tol.residual_tol * consistency_scale(lm, nm)
