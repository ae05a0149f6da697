"""Trajectories, costs, and adjoint processes.

Exact expectations use a scenario tree over a finitely supported noise.  A
node at level ``j`` of a tree rooted at time ``s`` is indexed by the noise
prefix ``(w_s, ..., w_{s+j-1})`` in lexicographic order, so the children of
node ``i`` are ``i * q + r`` for the ``q`` support points.  A tree may have
several roots; each root's subtree is laid out contiguously, which lets one
vectorized pass compute conditional quantities for every node of a level.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from .errors import InvalidInputError, ResourceLimitError, UnsupportedNoiseError
from .problem import InitialPair, ProblemData

ENUMERATION_CAP = 20


# --------------------------------------------------------------------------
# noise


@dataclass(frozen=True)
class NoiseModel:
    """Scalar martingale-difference noise with zero mean and unit variance."""

    kind: str = "rademacher"  # rademacher | gaussian | two_point
    p: float = 0.5
    a: float = 1.0
    b: float = -1.0

    def __post_init__(self):
        if self.kind not in ("rademacher", "gaussian", "two_point"):
            raise InvalidInputError(f"unknown noise kind {self.kind!r}")
        if self.kind == "two_point":
            if not 0 < self.p < 1:
                raise InvalidInputError("two-point probability must lie in (0, 1)")
            mean = self.p * self.a + (1 - self.p) * self.b
            second = self.p * self.a ** 2 + (1 - self.p) * self.b ** 2
            if abs(mean) > 1e-12 or abs(second - 1) > 1e-12:
                raise InvalidInputError(
                    f"two-point noise needs mean 0 and second moment 1, got {mean:.3g} and {second:.3g}")

    @classmethod
    def two_point(cls, p: float) -> "NoiseModel":
        """The zero-mean unit-variance two-point law with P(w = a) = p."""
        a = math.sqrt((1 - p) / p)
        b = -math.sqrt(p / (1 - p))
        return cls("two_point", p=p, a=a, b=b)

    @property
    def finite(self) -> bool:
        return self.kind != "gaussian"

    def support(self):
        """``(values, probabilities)`` of a finitely supported model."""
        if self.kind == "rademacher":
            return np.array([1.0, -1.0]), np.array([0.5, 0.5])
        if self.kind == "two_point":
            return np.array([self.a, self.b]), np.array([self.p, 1 - self.p])
        raise UnsupportedNoiseError("gaussian noise has no finite support; use Monte Carlo")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        vals, probs = self.support()
        return np.where(rng.random(size) < probs[0], vals[0], vals[1])


RADEMACHER = NoiseModel()


@dataclass(frozen=True)
class NoisePath:
    values: tuple
    probability: float = 0.0


def enumerate_paths(noise: NoiseModel, steps: int, cap: int = ENUMERATION_CAP) -> List[NoisePath]:
    """All ``q**steps`` noise paths in lexicographic order of the support."""
    _check_cap(steps, cap)
    vals, probs = noise.support()
    out = []
    for idx in itertools.product(range(len(vals)), repeat=steps):
        out.append(NoisePath(tuple(float(vals[i]) for i in idx), float(np.prod([probs[i] for i in idx]))))
    return out


def _check_cap(steps, cap):
    if steps < 0:
        raise InvalidInputError("negative number of steps")
    if steps > cap:
        raise ResourceLimitError(f"{steps} steps exceed the enumeration cap of {cap}")


# --------------------------------------------------------------------------
# policies


@dataclass
class PolicySpec:
    """How controls are chosen.

    gains / strategy: ``u_k = K[k] X_k`` (the two differ only in meaning).
    fixed: ``u_k = fn(k, prefix)`` where ``prefix`` holds the noise values
        seen since the start, so ``u_k`` depends on ``w`` up to ``k - 1`` only.
    overrides: node-valued controls for given steps, used on scenario trees;
        arrays are indexed like the tree level of that step.
    """

    kind: str
    gains: Optional[Dict[int, np.ndarray]] = None
    fn: Optional[Callable[[int, tuple], np.ndarray]] = None
    overrides: Dict[int, np.ndarray] = field(default_factory=dict)

    @classmethod
    def gain_sequence(cls, gains) -> "PolicySpec":
        return cls("gains", gains=_index(gains))

    @classmethod
    def strategy(cls, Phi) -> "PolicySpec":
        return cls("strategy", gains=_index(Phi))

    @classmethod
    def fixed(cls, fn) -> "PolicySpec":
        return cls("fixed", fn=fn)

    @classmethod
    def node_values(cls, values: Dict[int, np.ndarray]) -> "PolicySpec":
        return cls("fixed", fn=None, overrides={k: np.asarray(v, dtype=float) for k, v in values.items()})

    def with_overrides(self, values: Dict[int, np.ndarray]) -> "PolicySpec":
        merged = dict(self.overrides)
        merged.update({k: np.asarray(v, dtype=float) for k, v in values.items()})
        return PolicySpec(self.kind, self.gains, self.fn, merged)

    def covers(self, start: int, N: int) -> bool:
        for k in range(start, N):
            if k in self.overrides:
                continue
            if self.kind in ("gains", "strategy") and (self.gains is None or k not in self.gains):
                return False
            if self.kind == "fixed" and self.fn is None:
                return False
        return True

    def control(self, k: int, x: np.ndarray, prefix: tuple) -> np.ndarray:
        if k in self.overrides:
            raise InvalidInputError("node-valued overrides only apply on scenario trees")
        if self.kind in ("gains", "strategy"):
            return self.gains[k] @ x
        return np.asarray(self.fn(k, prefix), dtype=float).reshape(-1)

    def level_controls(self, k: int, X: np.ndarray, prefixes: Callable[[], list]) -> np.ndarray:
        if k in self.overrides:
            U = self.overrides[k]
            if U.shape[0] != X.shape[0]:
                raise InvalidInputError(f"override at step {k} has {U.shape[0]} nodes, tree level has {X.shape[0]}")
            return U
        if self.kind in ("gains", "strategy"):
            return X @ self.gains[k].T
        return np.array([np.asarray(self.fn(k, pre), dtype=float).reshape(-1) for pre in prefixes()])


def _index(seq) -> Dict[int, np.ndarray]:
    if isinstance(seq, dict):
        return {int(k): np.asarray(v, dtype=float) for k, v in seq.items()}
    return {k: np.asarray(v, dtype=float) for k, v in enumerate(seq)}


# --------------------------------------------------------------------------
# single-path simulation


@dataclass
class Trajectory:
    start: InitialPair
    states: np.ndarray  # (steps + 1, n)
    controls: np.ndarray  # (steps, m)
    path: NoisePath


def _coeffs(p: ProblemData, rows, k):
    t = k if rows == "diagonal" else int(rows)
    if not 0 <= t <= k:
        raise InvalidInputError(f"coefficient row {t} not defined at step {k}")
    return p.A[t, k], p.B[t, k], p.C[t, k], p.D[t, k]


def simulate(p: ProblemData, start: InitialPair, policy: PolicySpec, path: NoisePath,
             rows: Union[str, int] = "diagonal") -> Trajectory:
    """Propagate one noise path.

    ``rows="diagonal"`` steps with ``A[k, k]`` (the equilibrium state); an
    integer anchor ``t`` steps with ``A[t, k]`` (the state seen by player t).
    """
    steps = p.N - start.t
    if len(path.values) != steps:
        raise InvalidInputError(f"path has {len(path.values)} values, horizon needs {steps}")
    if start.x.shape != (p.n,):
        raise InvalidInputError(f"initial state has shape {start.x.shape}, expected ({p.n},)")
    if not 0 <= start.t < p.N:
        raise InvalidInputError(f"initial time {start.t} outside 0..{p.N - 1}")
    if not policy.covers(start.t, p.N):
        raise InvalidInputError("policy does not cover the simulated horizon")
    X = np.zeros((steps + 1, p.n))
    U = np.zeros((steps, p.m))
    X[0] = start.x
    for j, k in enumerate(range(start.t, p.N)):
        A, B, C, D = _coeffs(p, rows, k)
        u = policy.control(k, X[j], tuple(path.values[:j]))
        U[j] = u
        w = path.values[j]
        X[j + 1] = A @ X[j] + B @ u + (C @ X[j] + D @ u) * w
    return Trajectory(start, X, U, path)


def evaluate_cost(p: ProblemData, anchor_t: int, traj: Trajectory) -> float:
    """Pathwise cost of ``traj`` under the weights anchored at ``anchor_t``."""
    s = traj.start.t
    if s != anchor_t or traj.states.shape[0] != p.N - s + 1:
        raise InvalidInputError(
            f"trajectory covers {s}..{s + traj.states.shape[0] - 1}, cost needs {anchor_t}..{p.N}")
    total = 0.0
    for j, k in enumerate(range(s, p.N)):
        x, u = traj.states[j], traj.controls[j]
        total += x @ p.Q[anchor_t, k] @ x + u @ p.R[anchor_t, k] @ u
    xN = traj.states[-1]
    return float(total + xN @ p.G[anchor_t] @ xN)


# --------------------------------------------------------------------------
# scenario trees


@dataclass
class ScenarioTree:
    start: int  # time of level 0
    values: np.ndarray
    probs: np.ndarray
    X: List[np.ndarray]  # X[j]: (roots * q**j, n) states at time start + j
    U: List[np.ndarray]  # U[j]: (roots * q**j, m) controls at time start + j

    @property
    def q(self) -> int:
        return len(self.values)

    @property
    def roots(self) -> int:
        return self.X[0].shape[0]

    def level(self, k: int) -> int:
        return k - self.start

    def weights(self, j: int) -> np.ndarray:
        """Probability of each level-``j`` node conditional on its root."""
        w = np.ones(1)
        for _ in range(j):
            w = np.kron(w, self.probs)
        return np.tile(w, self.roots)


def build_tree(p: ProblemData, start_time: int, X0, policy: PolicySpec, noise: NoiseModel,
               rows: Union[str, int] = "diagonal", cap: int = ENUMERATION_CAP) -> ScenarioTree:
    """Enumerate every noise path from ``start_time`` for one or more root states."""
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    steps = p.N - start_time
    _check_cap(steps, cap)
    if X0.shape[1] != p.n:
        raise InvalidInputError(f"root states have dimension {X0.shape[1]}, expected {p.n}")
    if not policy.covers(start_time, p.N):
        raise InvalidInputError("policy does not cover the simulated horizon")
    values, probs = noise.support()
    Xs, Us = [X0], []
    for j, k in enumerate(range(start_time, p.N)):
        X = Xs[-1]
        if policy.kind == "fixed" and k not in policy.overrides and X0.shape[0] != 1:
            raise InvalidInputError("prefix-based controls need a single-root tree")
        U = policy.level_controls(k, X, lambda j=j: [pre for pre in itertools.product(values.tolist(), repeat=j)])
        A, B, C, D = _coeffs(p, rows, k)
        drift = X @ A.T + U @ B.T
        diff = X @ C.T + U @ D.T
        nxt = drift[:, None, :] + values[None, :, None] * diff[:, None, :]
        Us.append(U)
        Xs.append(nxt.reshape(-1, p.n))
    return ScenarioTree(start_time, values, probs, Xs, Us)


def _quad(X, M):
    return np.einsum("ij,jk,ik->i", X, M, X)


def tree_costs(p: ProblemData, anchor_t: int, tree: ScenarioTree) -> np.ndarray:
    """Expected cost under anchor ``anchor_t``'s weights, conditional on each root."""
    if tree.start < anchor_t:
        raise InvalidInputError("tree starts before the anchor time")
    out = np.zeros(tree.roots)
    L = p.N - tree.start
    for j in range(L + 1):
        k = tree.start + j
        w = tree.weights(j)
        if j < L:
            c = _quad(tree.X[j], p.Q[anchor_t, k]) + _quad(tree.U[j], p.R[anchor_t, k])
        else:
            c = _quad(tree.X[j], p.G[anchor_t])
        out += (w * c).reshape(tree.roots, -1).sum(axis=1)
    return out


def exact_expected_cost(p: ProblemData, anchor_t: int, start: InitialPair, policy: PolicySpec,
                        noise: NoiseModel = RADEMACHER, rows: Union[str, int, None] = None,
                        cap: int = ENUMERATION_CAP) -> float:
    """``J(anchor_t, x; u)`` by summing over every noise path.

    Dynamics use the anchor's coefficient row unless ``rows`` says otherwise.
    """
    if not noise.finite:
        raise UnsupportedNoiseError("exact expectations need finitely supported noise")
    if start.t < anchor_t:
        raise InvalidInputError("start time precedes the anchor")
    tree = build_tree(p, start.t, start.x, policy, noise, anchor_t if rows is None else rows, cap)
    return float(tree_costs(p, anchor_t, tree)[0])


def monte_carlo_cost(p: ProblemData, anchor_t: int, start: InitialPair, policy: PolicySpec,
                     noise: NoiseModel, samples: int, rng: np.random.Generator,
                     rows: Union[str, int, None] = None):
    """Sample mean and standard error of the pathwise cost; ``rng`` is the only randomness."""
    if samples < 2:
        raise InvalidInputError("need at least two samples")
    rows = anchor_t if rows is None else rows
    steps = p.N - start.t
    W = noise.sample(rng, (samples, steps))
    X = np.tile(start.x, (samples, 1))
    cost = np.zeros(samples)
    for j, k in enumerate(range(start.t, p.N)):
        if policy.kind in ("gains", "strategy") and k not in policy.overrides:
            U = X @ policy.gains[k].T
        else:
            U = np.array([policy.control(k, X[i], tuple(W[i, :j])) for i in range(samples)])
        cost += _quad(X, p.Q[anchor_t, k]) + _quad(U, p.R[anchor_t, k])
        A, B, C, D = _coeffs(p, rows, k)
        X = X @ A.T + U @ B.T + W[:, j:j + 1] * (X @ C.T + U @ D.T)
    cost += _quad(X, p.G[anchor_t])
    return float(cost.mean()), float(cost.std(ddof=1) / math.sqrt(samples))


# --------------------------------------------------------------------------
# adjoint processes


def cond_mean(Z_next: np.ndarray, probs: np.ndarray, weights: Optional[np.ndarray] = None) -> np.ndarray:
    """``E(Z_{l+1} | F_{l-1})`` per parent node, optionally times ``w_l``."""
    q = len(probs)
    c = probs if weights is None else probs * weights
    return np.einsum("iqn,q->in", Z_next.reshape(-1, q, Z_next.shape[1]), c)


def solve_adjoint(p: ProblemData, anchor_k: int, tree: ScenarioTree, noise: Optional[NoiseModel] = None,
                  kind: str = "open_loop", Phi=None) -> Dict[int, np.ndarray]:
    """Backward adjoint of player ``anchor_k`` on a forward tree.

    The tree must hold that player's forward state from time ``anchor_k`` on.
    ``kind="open_loop"`` uses ``A[k, l]`` and weight ``Q[k, l]``;
    ``kind="feedback"`` uses the closed loop under ``Phi`` and weight
    ``Q[k, l] + Phi_l' R[k, l] Phi_l``.  Returns ``{l: Z_l}`` for
    ``l = anchor_k..N``, each indexed like the tree level.
    """
    if noise is not None and not noise.finite:
        raise UnsupportedNoiseError("adjoint expectations need finitely supported noise")
    if anchor_k < tree.start:
        raise InvalidInputError("tree starts after the anchor time")
    if kind not in ("open_loop", "feedback"):
        raise InvalidInputError(f"unknown adjoint kind {kind!r}")
    if kind == "feedback" and Phi is None:
        raise InvalidInputError("feedback adjoint needs the strategy")
    k = anchor_k
    Z = {p.N: tree.X[tree.level(p.N)] @ p.G[k].T}
    for ell in range(p.N - 1, k - 1, -1):
        A, C, Q = p.A[k, ell], p.C[k, ell], p.Q[k, ell]
        if kind == "feedback":
            phi = np.asarray(Phi[ell], dtype=float)
            A = A + p.B[k, ell] @ phi
            C = C + p.D[k, ell] @ phi
            Q = Q + phi.T @ p.R[k, ell] @ phi
        nxt = Z[ell + 1]
        EZ = cond_mean(nxt, tree.probs)
        EZw = cond_mean(nxt, tree.probs, tree.values)
        Z[ell] = EZ @ A + EZw @ C + tree.X[tree.level(ell)] @ Q.T
    return Z


# --------------------------------------------------------------------------
# CSV dump


def trajectories_to_csv(trajs: Sequence[Trajectory]) -> str:
    """One row per step: step, states, controls, noise, path probability."""
    if not trajs:
        return ""
    n = trajs[0].states.shape[1]
    m = trajs[0].controls.shape[1]
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["path", "step"] + [f"x{i}" for i in range(n)] + [f"u{i}" for i in range(m)]
                + ["w", "probability"])
    for idx, tr in enumerate(trajs):
        s = tr.start.t
        for j in range(tr.states.shape[0]):
            last = j == tr.controls.shape[0]
            row = [idx, s + j] + [f"{v:.10g}" for v in tr.states[j]]
            row += [""] * m if last else [f"{v:.10g}" for v in tr.controls[j]]
            row += ["" if last else f"{tr.path.values[j]:.10g}", f"{tr.path.probability:.10g}"]
            wr.writerow(row)
    return buf.getvalue()
