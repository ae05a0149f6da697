"""Independent certificates for open-loop and feedback equilibria.

Everything here works on exact scenario trees, not on Riccati output.  For
each decision time ``k`` the candidate is checked three ways at every
``F_{k-1}`` node (a level-``k`` node of the equilibrium tree):

* stationarity: the gradient of player ``k``'s cost in ``u_k``, assembled
  from the backward adjoint process;
* convexity: the Hessian in ``u_k``, assembled by polarization of the
  homogeneous (zero-state) system driven by a unit deviation;
* inequality: the cost change for a set of probe deviations.

A deviation only changes ``u_k``.  In the open-loop concept later controls
stay at their equilibrium node values; in the feedback concept they follow
``Phi`` and so respond to the deviated state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import InvalidInputError, UnsupportedNoiseError
from .linalg import DEFAULT_TOL, Tolerances, is_psd, symmetrize
from .problem import InitialPair, ProblemData
from .simulation import (ENUMERATION_CAP, RADEMACHER, NoiseModel, PolicySpec, ScenarioTree,
                         build_tree, cond_mean, solve_adjoint, tree_costs)

DEFAULT_PROBES = 16


@dataclass
class VerificationReport:
    concept: str  # open_loop | feedback
    start: InitialPair
    times: List[int]
    stationarity_residual: List[float]
    stationarity_scale: List[float]
    hessian: List[np.ndarray]
    convexity_margin: List[float]
    inequality_slack: List[float]
    slack_scale: List[float]
    minimizer_slack: List[Optional[float]]
    stationarity_ok: List[bool]
    convexity_ok: List[bool]
    inequality_ok: List[bool]
    passed: bool = field(init=False)
    failing: List[int] = field(init=False)

    def __post_init__(self):
        self.failing = [k for k, a, b, c in zip(self.times, self.stationarity_ok, self.convexity_ok,
                                                self.inequality_ok) if not (a and b and c)]
        self.passed = not self.failing

    def to_dict(self) -> dict:
        return {
            "concept": self.concept,
            "start": {"t": self.start.t, "x": self.start.x.tolist()},
            "verdict": "pass" if self.passed else "fail",
            "failing": self.failing,
            "per_k": [
                {
                    "k": k,
                    "stationarity_residual": self.stationarity_residual[i],
                    "stationarity_scale": self.stationarity_scale[i],
                    "convexity_margin": self.convexity_margin[i],
                    "hessian": self.hessian[i].tolist(),
                    "inequality_slack": self.inequality_slack[i],
                    "slack_scale": self.slack_scale[i],
                    "minimizer_slack": self.minimizer_slack[i],
                    "ok": [self.stationarity_ok[i], self.convexity_ok[i], self.inequality_ok[i]],
                }
                for i, k in enumerate(self.times)
            ],
        }


def _as_policy(candidate, concept: str) -> PolicySpec:
    if isinstance(candidate, PolicySpec):
        return candidate
    if concept == "feedback":
        return PolicySpec.strategy(candidate)
    return PolicySpec.gain_sequence(candidate)


def _check_noise(noise: NoiseModel):
    if not noise.finite:
        raise UnsupportedNoiseError("verification needs finitely supported noise")


class _Player:
    """Player ``k``'s view from every level-``k`` node of the equilibrium tree."""

    def __init__(self, p, eq: ScenarioTree, k, concept, base: PolicySpec, noise, cap):
        self.p, self.k, self.concept, self.noise, self.cap = p, k, concept, noise, cap
        self.X0 = eq.X[eq.level(k)]
        self.u_eq = eq.U[eq.level(k)]
        if concept == "open_loop":
            # later controls frozen at their equilibrium node values
            self.cont = PolicySpec.node_values({l: eq.U[eq.level(l)] for l in range(k + 1, p.N)})
            # the variational system sees no change in later controls
            self.cont_var = PolicySpec.gain_sequence({l: np.zeros((p.m, p.n)) for l in range(k + 1, p.N)})
        else:
            self.cont = PolicySpec(base.kind, base.gains, base.fn, {})
            self.cont_var = self.cont
        self.tree = self.rollout(self.X0, self.u_eq)
        self.J_eq = tree_costs(p, k, self.tree)

    def rollout(self, X0, u_k):
        policy = self.cont.with_overrides({self.k: u_k})
        return build_tree(self.p, self.k, X0, policy, self.noise, rows=self.k, cap=self.cap)

    def variation(self, u_bar):
        """The Y-system: zero initial state, deviation ``u_bar`` at step k."""
        policy = self.cont_var.with_overrides({self.k: u_bar})
        zero = np.zeros((u_bar.shape[0], self.p.n))
        return build_tree(self.p, self.k, zero, policy, self.noise, rows=self.k, cap=self.cap)

    def costs(self, u_k):
        return tree_costs(self.p, self.k, self.rollout(self.X0, u_k))

    def gradient(self):
        """Half the gradient of the conditional cost in ``u_k``, per node, and its scale."""
        p, k = self.p, self.k
        Phi = self.cont.gains if self.concept == "feedback" else None
        Z = solve_adjoint(p, k, self.tree, self.noise, kind=self.concept, Phi=Phi)
        EZ = cond_mean(Z[k + 1], self.tree.probs)
        EZw = cond_mean(Z[k + 1], self.tree.probs, self.tree.values)
        terms = (self.u_eq @ p.R[k, k].T, EZ @ p.B[k, k], EZw @ p.D[k, k])
        r = terms[0] + terms[1] + terms[2]
        scale = max(1.0, float(np.max(sum(np.linalg.norm(t, axis=1) for t in terms))))
        return r, scale

    def hessian(self):
        """Hessian of the homogeneous quadratic, by polarization over the canonical basis."""
        m = self.p.m
        eye = np.eye(m)
        dirs = [eye[i] for i in range(m)] + [eye[i] + eye[j] for i in range(m) for j in range(i + 1, m)]
        vals = tree_costs(self.p, self.k, self.variation(np.array(dirs)))
        H = np.diag(vals[:m])
        idx = m
        for i in range(m):
            for j in range(i + 1, m):
                H[i, j] = H[j, i] = 0.5 * (vals[idx] - vals[i] - vals[j])
                idx += 1
        return H


def _probes(r, H, u_eq, rng, count, tol):
    """Deviations ``delta`` (node-valued) to try at one decision time."""
    M, m = u_eq.shape
    scale = max(1.0, float(np.max(np.abs(u_eq))) if u_eq.size else 1.0)
    out = []
    for i in range(m):
        for sgn in (1.0, -1.0):
            d = np.zeros((M, m))
            d[:, i] = sgn * scale
            out.append(("basis", d))
    for _ in range(count):
        out.append(("random", scale * rng.standard_normal((M, m))))
    eigs, vecs = np.linalg.eigh(H)
    minimizer = None
    if eigs[0] > tol.psd_margin * max(1.0, abs(eigs[-1])):
        minimizer = -np.linalg.solve(H, r.T).T
        out.append(("minimizer", minimizer))
    elif eigs[0] < 0:
        v = vecs[:, 0]
        g = r @ v  # per-node first-order coefficient along v
        s = np.maximum(scale, 4 * np.abs(g) / abs(eigs[0]))
        s = np.where(g > 0, -s, s)
        out.append(("descent", s[:, None] * v[None, :]))
    return out


def _verify(p: ProblemData, start: InitialPair, policy: PolicySpec, concept: str,
            noise: NoiseModel, probes: int, seed: int, tol: Tolerances, cap: int) -> VerificationReport:
    _check_noise(noise)
    if not 0 <= start.t < p.N:
        raise InvalidInputError(f"initial time {start.t} outside 0..{p.N - 1}")
    if start.x.shape != (p.n,):
        raise InvalidInputError(f"initial state has shape {start.x.shape}, expected ({p.n},)")
    rng = np.random.default_rng(seed)
    eq = build_tree(p, start.t, start.x, policy, noise, rows="diagonal", cap=cap)
    times = list(range(start.t, p.N))
    res, rscale, hess, margin, slack, sscale, mslack = [], [], [], [], [], [], []
    s_ok, c_ok, i_ok = [], [], []
    for k in times:
        pl = _Player(p, eq, k, concept, policy, noise, cap)
        r, scale = pl.gradient()
        resid = float(np.max(np.linalg.norm(r, axis=1)))
        res.append(resid)
        rscale.append(scale)
        s_ok.append(resid <= tol.residual_tol * scale)

        H = symmetrize(pl.hessian())
        chk = is_psd(H, tol)
        hess.append(H)
        margin.append(chk.min_eig)
        c_ok.append(chk.ok)

        worst, worst_ratio, worst_scale, min_slack = np.inf, np.inf, 1.0, None
        for label, delta in _probes(r, H, pl.u_eq, rng, probes, tol):
            J = pl.costs(pl.u_eq + delta)
            diff = J - pl.J_eq
            sc = np.maximum(1.0, np.maximum(np.abs(J), np.abs(pl.J_eq)))
            ratio = diff / sc
            i = int(np.argmin(ratio))
            if ratio[i] < worst_ratio:
                worst_ratio, worst, worst_scale = float(ratio[i]), float(diff[i]), float(sc[i])
            if label == "minimizer":
                min_slack = float(np.min(diff))
        slack.append(worst)
        sscale.append(worst_scale)
        mslack.append(min_slack)
        i_ok.append(worst >= -tol.residual_tol * worst_scale)
    return VerificationReport(concept, start, times, res, rscale, hess, margin, slack, sscale, mslack,
                              s_ok, c_ok, i_ok)


def verify_open_loop(p: ProblemData, start: InitialPair, candidate, noise: NoiseModel = RADEMACHER,
                     probes: int = DEFAULT_PROBES, seed: int = 0, tol: Tolerances = DEFAULT_TOL,
                     cap: int = ENUMERATION_CAP) -> VerificationReport:
    """Certify an open-loop equilibrium candidate from ``start``.

    ``candidate`` is a gain sequence (indexed by absolute time) or a
    PolicySpec, e.g. path-dependent fixed controls.  General coefficients are
    accepted; each player's deviation system uses that player's row.
    """
    return _verify(p, start, _as_policy(candidate, "open_loop"), "open_loop", noise, probes, seed, tol, cap)


def verify_feedback(p: ProblemData, strategy, start: InitialPair, noise: NoiseModel = RADEMACHER,
                    probes: int = DEFAULT_PROBES, seed: int = 0, tol: Tolerances = DEFAULT_TOL,
                    cap: int = ENUMERATION_CAP) -> VerificationReport:
    """Certify a linear feedback strategy ``Phi`` from ``start``."""
    policy = strategy if isinstance(strategy, PolicySpec) else PolicySpec.strategy(strategy)
    if policy.kind not in ("gains", "strategy"):
        raise InvalidInputError("a feedback strategy must be a sequence of matrices")
    return _verify(p, start, policy, "feedback", noise, probes, seed, tol, cap)


@dataclass
class DerivativeCheck:
    first_order: float
    second_order: float
    fd_first: float
    fd_second: float

    def agrees(self, rel: float = 1e-6) -> bool:
        ok1 = abs(self.first_order - self.fd_first) <= rel * max(1.0, abs(self.first_order), abs(self.fd_first))
        ok2 = abs(self.second_order - self.fd_second) <= rel * max(1.0, abs(self.second_order), abs(self.fd_second))
        return ok1 and ok2


def directional_derivative_check(p: ProblemData, start: InitialPair, candidate, k: int, direction,
                                 concept: str = "open_loop", noise: NoiseModel = RADEMACHER,
                                 cap: int = ENUMERATION_CAP) -> DerivativeCheck:
    """First and second derivatives of player ``k``'s expected cost along ``u_k + lam * direction``.

    The cost is averaged over the ``F_{k-1}`` nodes with their probabilities.
    Analytic values come from the variational (Y) system; the finite
    differences use ``lam = -1, 0, 1``, which is exact for a quadratic.
    ``direction`` is one vector or one row per level-``k`` node.
    """
    _check_noise(noise)
    if concept not in ("open_loop", "feedback"):
        raise InvalidInputError(f"unknown concept {concept!r}")
    if not start.t <= k < p.N:
        raise InvalidInputError(f"decision time {k} outside {start.t}..{p.N - 1}")
    policy = _as_policy(candidate, concept)
    eq = build_tree(p, start.t, start.x, policy, noise, rows="diagonal", cap=cap)
    pl = _Player(p, eq, k, concept, policy, noise, cap)
    M = pl.X0.shape[0]
    d = np.broadcast_to(np.asarray(direction, dtype=float), (M, p.m)).copy()
    node_w = eq.weights(eq.level(k))
    Y = pl.variation(d)
    first = 2.0 * _weighted_inner(p, k, pl.tree, Y, node_w)
    second = 2.0 * _weighted_inner(p, k, Y, Y, node_w)
    f = {lam: float(node_w @ pl.costs(pl.u_eq + lam * d)) for lam in (-1.0, 0.0, 1.0)}
    return DerivativeCheck(first, second, 0.5 * (f[1.0] - f[-1.0]), f[1.0] - 2 * f[0.0] + f[-1.0])


def _weighted_inner(p, k, A: ScenarioTree, B: ScenarioTree, root_w) -> float:
    """``sum_l E[Ax' Q Bx + Au' R Bu] + E[Ax' G Bx]`` over two trees with matching layout."""
    total = 0.0
    L = p.N - k
    for j in range(L + 1):
        w = A.weights(j) * np.repeat(root_w, A.q ** j)
        if j < L:
            l = k + j
            c = np.einsum("ij,jk,ik->i", A.X[j], p.Q[k, l], B.X[j])
            c += np.einsum("ij,jk,ik->i", A.U[j], p.R[k, l], B.U[j])
        else:
            c = np.einsum("ij,jk,ik->i", A.X[j], p.G[k], B.X[j])
        total += float(w @ c)
    return total
