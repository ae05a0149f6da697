"""Random problem instances for property tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .problem import ProblemData, make_problem

STRUCTURES = ("general", "t_independent", "stationary", "invariant")


def _sym(rng, n, definite):
    if definite == "pd":
        L = rng.standard_normal((n, n))
        return L @ L.T / n + 0.1 * np.eye(n)
    if definite == "psd":
        r = int(rng.integers(1, n + 1))
        L = rng.standard_normal((n, r))
        return L @ L.T / n
    M = rng.standard_normal((n, n))
    return 0.5 * (M + M.T)


def random_problem(rng: np.random.Generator, n: int = 2, m: int = 2, N: int = 3,
                   structure: str = "t_independent", definite: bool = True,
                   dyn_scale: float = 0.6) -> ProblemData:
    """Sample a problem.

    structure: ``general`` draws every ``(t, k)`` entry independently;
    ``t_independent`` shares dynamics across anchors; ``stationary`` also
    shares Q and G; ``invariant`` shares R too, so there is no time
    inconsistency at all.  With ``definite`` Q and G are PSD and R is PD;
    otherwise the weights are arbitrary symmetric matrices.
    """
    if structure not in STRUCTURES:
        raise InvalidInputError(f"unknown structure {structure!r}")
    if min(n, m, N) < 1:
        raise InvalidInputError("dimensions and horizon must be positive")
    qkind, rkind = ("psd", "pd") if definite else ("any", "any")

    def dyn(shape):
        return dyn_scale * rng.standard_normal(shape)

    def family(make, shared):
        if shared:
            per_k = [make() for _ in range(N)]
            return {(t, k): per_k[k] for t in range(N) for k in range(t, N)}
        return {(t, k): make() for t in range(N) for k in range(t, N)}

    shared_dyn = structure != "general"
    shared_q = structure in ("stationary", "invariant")
    A = family(lambda: dyn((n, n)), shared_dyn)
    B = family(lambda: dyn((n, m)), shared_dyn)
    C = family(lambda: dyn((n, n)), shared_dyn)
    D = family(lambda: dyn((n, m)), shared_dyn)
    Q = family(lambda: _sym(rng, n, qkind), shared_q)
    R = family(lambda: _sym(rng, m, rkind), structure == "invariant")
    if shared_q:
        g = _sym(rng, n, qkind)
        G = {t: g for t in range(N)}
    else:
        G = {t: _sym(rng, n, qkind) for t in range(N)}
    return make_problem(N, A, B, C, D, Q, R, G)
