"""Linear feedback equilibrium strategies for fully general coefficients.

The production recursion propagates the closed-loop quadratic form

    P~[t,k] = Q[t,k] + Phi_k' R[t,k] Phi_k + (A + B Phi_k)' P~[t,k+1] (A + B Phi_k)
              + (C + D Phi_k)' P~[t,k+1] (C + D Phi_k)

with all coefficients taken from row ``t``.  ``Phi_k`` is fixed once the pass
for anchor ``k`` reaches its diagonal, so anchors are processed from ``N - 1``
down to ``0``.  The expanded form with the cross aggregates is kept as an
independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .errors import InvalidInputError
from .linalg import (DEFAULT_TOL, Tolerances, consistency_residual, is_psd, norm, pinv,
                     symmetrize)
from .open_loop import solve_standard_lq
from .problem import ProblemData, is_fully_time_invariant


@dataclass
class FeedbackSolution:
    N: int
    P_tilde: Dict[tuple, np.ndarray]
    W_tilde: Dict[tuple, np.ndarray]
    H_tilde: Dict[tuple, np.ndarray]
    Phi: List[np.ndarray]
    residuals: List[float]
    residual_scales: List[float]
    min_eigs: List[float]
    constraint_ok: List[bool]
    psd_ok: List[bool]
    feasible: bool
    first_failing: Optional[int]  # largest failing anchor, i.e. the first one met in the sweep

    def failing(self) -> List[int]:
        return [t for t in range(self.N) if not (self.constraint_ok[t] and self.psd_ok[t])]

    def W_diag(self, t: int) -> np.ndarray:
        return self.W_tilde[t, t]


def _aggregates(p: ProblemData, t: int, k: int, nxt: np.ndarray):
    A, B, C, D = p.A[t, k], p.B[t, k], p.C[t, k], p.D[t, k]
    w = p.R[t, k] + B.T @ nxt @ B + D.T @ nxt @ D
    h = B.T @ nxt @ A + D.T @ nxt @ C
    return w, h


def _closed_loop_step(p: ProblemData, t: int, k: int, nxt: np.ndarray, phi: np.ndarray):
    acl = p.A[t, k] + p.B[t, k] @ phi
    ccl = p.C[t, k] + p.D[t, k] @ phi
    return symmetrize(p.Q[t, k] + phi.T @ p.R[t, k] @ phi + acl.T @ nxt @ acl + ccl.T @ nxt @ ccl)


def solve_feedback(p: ProblemData, tol: Tolerances = DEFAULT_TOL) -> FeedbackSolution:
    """Solve the symmetric Riccati family and extract ``Phi``.

    An infeasible diagonal (indefinite ``W~[t,t]`` or inconsistent
    ``W~ Phi = -H~``) does not stop the sweep: the pseudoinverse gain is kept
    so that diagnostics for every anchor are available.
    """
    N = p.N
    P: Dict[tuple, np.ndarray] = {}
    W: Dict[tuple, np.ndarray] = {}
    H: Dict[tuple, np.ndarray] = {}
    Phi: List[Optional[np.ndarray]] = [None] * N
    residuals = [0.0] * N
    scales = [1.0] * N
    eigs = [0.0] * N
    cons_ok = [True] * N
    psd_ok = [True] * N
    first_failing = None

    for t in range(N - 1, -1, -1):
        P[t, N] = p.G[t]
        for k in range(N - 1, t - 1, -1):
            nxt = P[t, k + 1]
            w, h = _aggregates(p, t, k, nxt)
            W[t, k], H[t, k] = w, h
            if k == t:
                Phi[t] = -pinv(w, tol) @ h
                residuals[t] = consistency_residual(w, h, tol)
                scales[t] = max(1.0, norm(w), norm(h))
                cons_ok[t] = residuals[t] <= tol.residual_tol * scales[t]
                chk = is_psd(w, tol)
                eigs[t], psd_ok[t] = chk.min_eig, chk.ok
                if first_failing is None and not (cons_ok[t] and psd_ok[t]):
                    first_failing = t
            P[t, k] = _closed_loop_step(p, t, k, nxt, Phi[k])

    return FeedbackSolution(
        N=N, P_tilde=P, W_tilde=W, H_tilde=H, Phi=Phi, residuals=residuals,
        residual_scales=scales, min_eigs=eigs, constraint_ok=cons_ok, psd_ok=psd_ok,
        feasible=all(cons_ok) and all(psd_ok), first_failing=first_failing,
    )


def propagate_expanded(p: ProblemData, Phi: List[np.ndarray]) -> Dict[tuple, np.ndarray]:
    """Cross-check recursion written with the cross aggregates ``W~[t,k]`` and ``H~[t,k]``.

    ``Phi`` is taken as given, so comparing against ``solve_feedback``'s
    ``P_tilde`` isolates the algebra of the two forms.
    """
    N = p.N
    P: Dict[tuple, np.ndarray] = {}
    for t in range(N - 1, -1, -1):
        P[t, N] = p.G[t]
        for k in range(N - 1, t - 1, -1):
            nxt = P[t, k + 1]
            A, C = p.A[t, k], p.C[t, k]
            w, h = _aggregates(p, t, k, nxt)
            phi = Phi[k]
            P[t, k] = (p.Q[t, k] + A.T @ nxt @ A + C.T @ nxt @ C
                       + phi.T @ h + h.T @ phi + phi.T @ w @ phi)
    return P


def stationarity_residuals(p: ProblemData, sol: FeedbackSolution) -> List[float]:
    """``||R Phi_t + B' P~ (A + B Phi_t) + D' P~ (C + D Phi_t)||`` on each diagonal."""
    out = []
    for t in range(p.N):
        nxt, phi = sol.P_tilde[t, t + 1], sol.Phi[t]
        A, B, C, D = p.A[t, t], p.B[t, t], p.C[t, t], p.D[t, t]
        r = p.R[t, t] @ phi + B.T @ nxt @ (A + B @ phi) + D.T @ nxt @ (C + D @ phi)
        out.append(norm(r))
    return out


def _require_definite(p: ProblemData, tol: Tolerances):
    bad = []
    for t, k in p.pairs():
        if not is_psd(p.Q[t, k], tol).ok:
            bad.append(f"Q[{t},{k}] not PSD")
        if not np.linalg.eigvalsh(symmetrize(p.R[t, k]))[0] > 0:
            bad.append(f"R[{t},{k}] not positive definite")
    for t in range(p.N):
        if not is_psd(p.G[t], tol).ok:
            bad.append(f"G[{t}] not PSD")
    if bad:
        raise InvalidInputError("definite-case precondition fails: " + "; ".join(bad))


def assert_definite_case(p: ProblemData, sol: FeedbackSolution,
                         tol: Tolerances = DEFAULT_TOL) -> bool:
    """With ``Q >= 0``, ``R > 0``, ``G >= 0``: every ``W~ > 0`` and every ``P~ >= 0``."""
    _require_definite(p, tol)
    if not sol.feasible:
        return False
    for w in sol.W_tilde.values():
        if not np.linalg.eigvalsh(symmetrize(w))[0] > 0:
            return False
    return all(is_psd(mat, tol).ok for mat in sol.P_tilde.values())


def reduce_to_standard(p: ProblemData, sol: FeedbackSolution,
                       tol: Tolerances = DEFAULT_TOL) -> bool:
    """For fully anchor-invariant data, ``P~`` is constant in ``t`` and equals the classical solve."""
    if not is_fully_time_invariant(p, tol):
        raise InvalidInputError("reduction needs every coefficient family independent of the anchor time")
    std = standard_lq_reference(p, tol)
    for (t, k), mat in sol.P_tilde.items():
        ref = std.P[k]
        if norm(mat - ref) > tol.residual_tol * max(1.0, norm(ref)):
            return False
    return True


def standard_lq_reference(p: ProblemData, tol: Tolerances = DEFAULT_TOL):
    rows = {nm: [p.family(nm)[k, k] for k in range(p.N)] for nm in "ABCDQR"}
    return solve_standard_lq(rows["A"], rows["B"], rows["C"], rows["D"], rows["Q"], rows["R"],
                             p.G[0], t_start=0, N=p.N, tol=tol)
