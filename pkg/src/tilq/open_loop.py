"""Open-loop equilibrium controls for problems with anchor-independent dynamics.

The coupled nonsymmetric Riccati family ``P[t, k]`` and the Lyapunov family
``S[t, k]`` are swept backward, anchor time outer and running time inner.  The
diagonal aggregates ``W[k, k]`` and ``H[k, k]`` only depend on the pass for
anchor ``k``, so they are available once that pass has finished.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .errors import FeasibilityError, InvalidInputError, UnsupportedStructureError
from .linalg import (DEFAULT_TOL, Tolerances, as_matrix, consistency_residual, is_psd,
                     norm, pinv, symmetrize)
from .problem import Mode, ProblemData


@dataclass
class OpenLoopSolution:
    N: int
    P: Dict[tuple, np.ndarray]
    S: Dict[tuple, np.ndarray]
    W_diag: List[np.ndarray]
    H_diag: List[np.ndarray]
    H_cross: Dict[tuple, np.ndarray]
    gains: List[np.ndarray]
    convexity: List[np.ndarray]
    residuals: List[float]
    residual_scales: List[float]
    min_eigs: List[float]
    feasible: bool
    constraint_ok: List[bool] = field(default_factory=list)
    convexity_ok: List[bool] = field(default_factory=list)

    def failing(self) -> List[int]:
        return [t for t in range(self.N) if not (self.constraint_ok[t] and self.convexity_ok[t])]


def _check_mode(p: ProblemData, tol: Tolerances) -> Mode:
    mode = p.resolved_mode(tol)
    if mode is Mode.GENERAL:
        raise UnsupportedStructureError(
            "open-loop Riccati solve needs dynamics independent of the anchor time; "
            "use verify_open_loop with a hand-built candidate for general coefficients")
    return mode


def solve_open_loop(p: ProblemData, tol: Tolerances = DEFAULT_TOL,
                    literal_cross_term: bool = False) -> OpenLoopSolution:
    """Solve the nonsymmetric Riccati family and the Lyapunov family.

    The cross aggregate is ``H[t,k] = B' P[t,k+1]' A + D' P[t,k+1]' C``.  With
    ``literal_cross_term`` the transposes are dropped; the two agree whenever
    ``P[t, k+1]`` is symmetric (in particular in stationary mode) and only the
    default makes the adjoint equal ``P[t, l] X_l`` otherwise.

    Infeasibility (an inconsistent ``W u = -H x`` at some diagonal, or an
    indefinite convexity matrix) is reported in the verdict; the recursions
    always run to completion.
    """
    _check_mode(p, tol)
    N = p.N
    A = [p.A[k, k] for k in range(N)]
    B = [p.B[k, k] for k in range(N)]
    C = [p.C[k, k] for k in range(N)]
    D = [p.D[k, k] for k in range(N)]

    P: Dict[tuple, np.ndarray] = {}
    H_cross: Dict[tuple, np.ndarray] = {}
    W_diag: List[Optional[np.ndarray]] = [None] * N
    H_diag: List[Optional[np.ndarray]] = [None] * N
    WpH: List[Optional[np.ndarray]] = [None] * N  # W[k,k]^+ H[k,k], memoized per anchor

    for t in range(N - 1, -1, -1):
        P[t, N] = p.G[t]
        for k in range(N - 1, t - 1, -1):
            nxt = P[t, k + 1]
            if k == t:
                w = p.R[t, t] + B[t].T @ nxt @ B[t] + D[t].T @ nxt @ D[t]
                h = B[t].T @ nxt @ A[t] + D[t].T @ nxt @ C[t]
                W_diag[t], H_diag[t] = w, h
                WpH[t] = pinv(w, tol) @ h
            # Cross aggregate built with P[t, k+1]' so that the adjoint decouples as
            # Z = P X even when P[t, k+1] is not symmetric; see README.
            nxt_c = nxt if literal_cross_term else nxt.T
            hc = B[k].T @ nxt_c @ A[k] + D[k].T @ nxt_c @ C[k]
            H_cross[t, k] = hc
            P[t, k] = (p.Q[t, k] + A[k].T @ nxt @ A[k] + C[k].T @ nxt @ C[k]
                       - hc.T @ WpH[k])

    S: Dict[tuple, np.ndarray] = {}
    convexity = []
    for t in range(N - 1, -1, -1):
        S[t, N] = p.G[t]
        for k in range(N - 1, t - 1, -1):
            nxt = S[t, k + 1]
            S[t, k] = symmetrize(p.Q[t, k] + A[k].T @ nxt @ A[k] + C[k].T @ nxt @ C[k])
    for t in range(N):
        nxt = S[t, t + 1]
        convexity.append(symmetrize(p.R[t, t] + B[t].T @ nxt @ B[t] + D[t].T @ nxt @ D[t]))

    residuals, scales, constraint_ok, convexity_ok, min_eigs = [], [], [], [], []
    for t in range(N):
        w, h = W_diag[t], H_diag[t]
        r = consistency_residual(w, h, tol)
        s = max(1.0, norm(w), norm(h))
        residuals.append(r)
        scales.append(s)
        constraint_ok.append(r <= tol.residual_tol * s)
        chk = is_psd(convexity[t], tol)
        min_eigs.append(chk.min_eig)
        convexity_ok.append(chk.ok)

    gains = [-WpH[k] for k in range(N)]
    return OpenLoopSolution(
        N=N, P=P, S=S, W_diag=W_diag, H_diag=H_diag, H_cross=H_cross, gains=gains,
        convexity=convexity, residuals=residuals, residual_scales=scales, min_eigs=min_eigs,
        feasible=all(constraint_ok) and all(convexity_ok),
        constraint_ok=constraint_ok, convexity_ok=convexity_ok,
    )


def open_loop_gains(sol: OpenLoopSolution) -> List[np.ndarray]:
    """Feedback representation ``u*_k = K_k X*_k`` of the open-loop equilibrium."""
    if not sol.feasible:
        raise FeasibilityError(f"open-loop solve infeasible at t={sol.failing()}")
    return list(sol.gains)


# --------------------------------------------------------------------------
# pre-commitment (standard) Riccati recursion


@dataclass
class StandardLQSolution:
    t_start: int
    N: int
    P: Dict[int, np.ndarray]
    W: Dict[int, np.ndarray]
    H: Dict[int, np.ndarray]
    gains: Dict[int, np.ndarray]
    feasible: bool
    min_eigs: Dict[int, float]
    residuals: Dict[int, float]


def _seq(x, name, t_start, N):
    """Per-k sequence indexed by absolute time; accepts a list of length N or N - t_start."""
    if isinstance(x, dict):
        return {k: as_matrix(x[k], f"{name}[{k}]") for k in range(t_start, N)}
    try:
        arr = np.asarray(x, dtype=np.float64)
    except ValueError:
        arr = None
    if arr is not None and arr.ndim == 2:
        arr = as_matrix(arr, name)
        return {k: arr for k in range(t_start, N)}
    seq = list(x)
    if len(seq) == N:
        return {k: as_matrix(seq[k], f"{name}[{k}]") for k in range(t_start, N)}
    if len(seq) == N - t_start:
        return {k: as_matrix(seq[k - t_start], f"{name}[{k}]") for k in range(t_start, N)}
    raise InvalidInputError(f"{name} has {len(seq)} entries, expected {N} or {N - t_start}")


def solve_standard_lq(A, B, C, D, Q, R, G, t_start: int = 0, N: Optional[int] = None,
                      tol: Tolerances = DEFAULT_TOL) -> StandardLQSolution:
    """Classical stochastic LQ backward recursion on ``{t_start, ..., N}``.

    Sequences may be indexed by absolute time (length N) or relative to
    ``t_start``; dicts are keyed by absolute time.  When ``N`` is omitted it is
    taken from the length of ``A``.
    """
    if N is None:
        if isinstance(A, dict):
            N = max(A) + 1
        elif np.asarray(A).ndim == 3:
            N = len(A)
        else:
            raise InvalidInputError("N is required when A is a single matrix")
    if not 0 <= t_start < N:
        raise InvalidInputError(f"t_start {t_start} outside 0..{N - 1}")
    A, B, C, D, Q, R = (_seq(x, nm, t_start, N) for x, nm in zip((A, B, C, D, Q, R), "ABCDQR"))
    G = as_matrix(G, "G")
    n = G.shape[0]
    for k in range(t_start, N):
        m = B[k].shape[1]
        shapes = {"A": (A[k], (n, n)), "B": (B[k], (n, m)), "C": (C[k], (n, n)),
                  "D": (D[k], (n, m)), "Q": (Q[k], (n, n)), "R": (R[k], (m, m))}
        for nm, (mat, shp) in shapes.items():
            if mat.shape != shp:
                raise InvalidInputError(f"{nm}[{k}] has shape {mat.shape}, expected {shp}")
    P = {N: G}
    W, H, gains, eigs, res = {}, {}, {}, {}, {}
    feasible = True
    for k in range(N - 1, t_start - 1, -1):
        nxt = P[k + 1]
        w = symmetrize(R[k] + B[k].T @ nxt @ B[k] + D[k].T @ nxt @ D[k])
        h = B[k].T @ nxt @ A[k] + D[k].T @ nxt @ C[k]
        wp = pinv(w, tol)
        W[k], H[k] = w, h
        gains[k] = -wp @ h
        chk = is_psd(w, tol)
        eigs[k] = chk.min_eig
        res[k] = consistency_residual(w, h, tol)
        if not chk.ok or res[k] > tol.residual_tol * max(1.0, norm(w), norm(h)):
            feasible = False
        P[k] = symmetrize(Q[k] + A[k].T @ nxt @ A[k] + C[k].T @ nxt @ C[k] - h.T @ wp @ h)
    return StandardLQSolution(t_start=t_start, N=N, P=P, W=W, H=H, gains=gains,
                              feasible=feasible, min_eigs=eigs, residuals=res)


def standard_lq_for_anchor(p: ProblemData, t: int, tol: Tolerances = DEFAULT_TOL) -> StandardLQSolution:
    """Pre-commitment solve using the coefficient row anchored at ``t``."""
    if not 0 <= t < p.N:
        raise InvalidInputError(f"anchor {t} outside 0..{p.N - 1}")
    rows = {nm: {k: p.family(nm)[t, k] for k in range(t, p.N)} for nm in "ABCDQR"}
    return solve_standard_lq(rows["A"], rows["B"], rows["C"], rows["D"], rows["Q"], rows["R"],
                             p.G[t], t_start=t, N=p.N, tol=tol)


@dataclass
class InconsistencyReport:
    t0: int
    t1: int
    gain_t0: np.ndarray  # gain at step t1 planned from anchor t0
    gain_t1: np.ndarray  # gain at step t1 re-planned from anchor t1
    difference: float
    solutions: tuple


def demonstrate_inconsistency(p: ProblemData, t0: int, t1: int,
                              tol: Tolerances = DEFAULT_TOL) -> InconsistencyReport:
    """Compare the step-``t1`` gain planned at ``t0`` with the one re-planned at ``t1``."""
    if not 0 <= t0 < t1 < p.N:
        raise InvalidInputError(f"need 0 <= t0 < t1 < N, got t0={t0}, t1={t1}, N={p.N}")
    s0 = standard_lq_for_anchor(p, t0, tol)
    s1 = standard_lq_for_anchor(p, t1, tol)
    g0, g1 = s0.gains[t1], s1.gains[t1]
    return InconsistencyReport(t0=t0, t1=t1, gain_t0=g0, gain_t1=g1,
                               difference=norm(g0 - g1), solutions=(s0, s1))


def stationarity_residuals(sol: OpenLoopSolution) -> List[float]:
    """``||W[k,k] K_k + H[k,k]||`` per k."""
    return [norm(w @ k + h) for w, k, h in zip(sol.W_diag, sol.gains, sol.H_diag)]


def stationary_collapse_gap(sol: OpenLoopSolution) -> float:
    """Largest relative spread of ``P[t, k]`` over anchors, plus its asymmetry."""
    gap = 0.0
    for (t, k), mat in sol.P.items():
        ref = sol.P[min(k, sol.N - 1), k]
        scale = max(1.0, norm(ref))
        gap = max(gap, norm(mat - ref) / scale, norm(mat - mat.T) / scale)
    return gap
