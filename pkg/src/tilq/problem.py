"""Time-inconsistent LQ problem data.

Every coefficient is stored in its fully general form: ``A[t, k]`` for
``0 <= t <= k < N`` (likewise B, C, D, Q, R) and ``G[t]`` for ``0 <= t < N``.
The first index is the initial time that the preferences and dynamics are
anchored at; the second is the running time step.  ``mode`` is metadata that
lets solvers pick a fast path.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import InvalidInputError, ProblemParseError, ProblemValidationError
from .linalg import DEFAULT_TOL, Tolerances, is_symmetric, norm

DYNAMICS = ("A", "B", "C", "D")
RUNNING = ("A", "B", "C", "D", "Q", "R")


class Mode(str, enum.Enum):
    GENERAL = "general"
    T_INDEPENDENT_DYNAMICS = "t_independent_dynamics"
    STATIONARY = "stationary"


@dataclass(frozen=True)
class Violation:
    kind: str  # symmetry | completeness | dimension | finite | mode | horizon
    family: str
    index: tuple
    detail: str = ""

    def __str__(self):
        idx = ",".join(str(i) for i in self.index)
        return f"{self.kind} {self.family}[{idx}] {self.detail}".rstrip()


@dataclass(frozen=True)
class InitialPair:
    t: int
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.float64).reshape(-1))
        if self.t < 0:
            raise InvalidInputError("initial time must be non-negative")


@dataclass(frozen=True, eq=False)
class ProblemData:
    N: int
    n: int
    m: int
    A: Mapping[tuple, np.ndarray]
    B: Mapping[tuple, np.ndarray]
    C: Mapping[tuple, np.ndarray]
    D: Mapping[tuple, np.ndarray]
    Q: Mapping[tuple, np.ndarray]
    R: Mapping[tuple, np.ndarray]
    G: Mapping[int, np.ndarray]
    mode: Optional[Mode] = None

    def family(self, name: str) -> Mapping:
        return getattr(self, name)

    def pairs(self):
        """All valid ``(t, k)`` index pairs in solver order."""
        return [(t, k) for t in range(self.N) for k in range(t, self.N)]

    def resolved_mode(self, tol: Tolerances = DEFAULT_TOL) -> Mode:
        return self.mode if self.mode is not None else detect_mode(self, tol)

    def row(self, name: str, t: int) -> list:
        """Matrices ``X[t, k]`` for ``k = t..N-1``."""
        fam = self.family(name)
        return [fam[t, k] for k in range(t, self.N)]

    def __eq__(self, other):
        if not isinstance(other, ProblemData):
            return NotImplemented
        if (self.N, self.n, self.m, self.mode) != (other.N, other.n, other.m, other.mode):
            return False
        for name in RUNNING + ("G",):
            a, b = self.family(name), other.family(name)
            if set(a) != set(b):
                return False
            if any(not np.array_equal(a[key], b[key]) for key in a):
                return False
        return True

    __hash__ = None


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    arr.setflags(write=False)
    return arr


# A family spec may be: a single matrix, a per-k sequence, a {(t,k): matrix}
# mapping, a per-t sequence of per-(k-t) sequences, or a callable f(t, k).
FamilySpec = Union[np.ndarray, Sequence, Mapping, Callable]


def _expand_running(spec, N: int, layout: Optional[str] = None) -> dict:
    if callable(spec) and not isinstance(spec, (np.ndarray, list, tuple)):
        return {(t, k): _frozen(spec(t, k)) for t in range(N) for k in range(t, N)}
    if isinstance(spec, Mapping):
        return {tuple(key): _frozen(v) for key, v in spec.items()}
    layout = layout or _guess_layout(spec)
    if layout == "single":
        mat = _frozen(spec)
        return {(t, k): mat for t in range(N) for k in range(t, N)}
    if layout == "per_k":
        mats = [_frozen(s) for s in spec]
        return {(t, k): mats[k] for t in range(N) for k in range(t, N) if k < len(mats)}
    if layout == "full":
        out = {}
        for t, row in enumerate(spec):
            for j, mat in enumerate(row):
                out[t, t + j] = _frozen(mat)
        return out
    raise InvalidInputError(f"unknown layout {layout!r}")


def _expand_terminal(spec, N: int) -> dict:
    if callable(spec) and not isinstance(spec, (np.ndarray, list, tuple)):
        return {t: _frozen(spec(t)) for t in range(N)}
    if isinstance(spec, Mapping):
        return {int(t): _frozen(v) for t, v in spec.items()}
    if _depth(spec) <= 2:
        mat = _frozen(spec)
        return {t: mat for t in range(N)}
    return {t: _frozen(s) for t, s in enumerate(spec)}


def _depth(obj) -> int:
    if isinstance(obj, np.ndarray):
        return obj.ndim
    if isinstance(obj, (list, tuple)):
        return 1 + (_depth(obj[0]) if len(obj) else 0)
    return 0


def _guess_layout(spec) -> str:
    d = _depth(spec)
    if d <= 2:
        return "single"
    if d == 3:
        return "per_k"
    if d == 4:
        return "full"
    raise InvalidInputError(f"cannot infer coefficient layout from nesting depth {d}")


def make_problem(N: int, A, B, C, D, Q, R, G, mode: Optional[Mode] = None,
                 tol: Tolerances = DEFAULT_TOL, check: bool = True) -> ProblemData:
    """Build a ProblemData from any mix of compact family layouts.

    With ``check`` the result is validated (raising ProblemValidationError) and
    ``mode`` is detected when not supplied.
    """
    if N < 1:
        raise ProblemValidationError([Violation("horizon", "N", (N,), "horizon must be >= 1")])
    fams = {name: _expand_running(spec, N) for name, spec in zip(RUNNING, (A, B, C, D, Q, R))}
    g = _expand_terminal(G, N)
    first = fams["A"].get((0, 0))
    n = first.shape[0] if first is not None else 0
    firstb = fams["B"].get((0, 0))
    m = firstb.shape[1] if firstb is not None and firstb.ndim == 2 else 0
    p = ProblemData(N=N, n=n, m=m, G=g, mode=Mode(mode) if mode is not None else None, **fams)
    if not check:
        return p
    violations = validate(p, tol)
    if violations:
        raise ProblemValidationError(violations)
    if p.mode is None:
        p = ProblemData(**{**_fields(p), "mode": detect_mode(p, tol)})
    return p


def _fields(p: ProblemData) -> dict:
    return {f: getattr(p, f) for f in ("N", "n", "m", "A", "B", "C", "D", "Q", "R", "G", "mode")}


def validate(p: ProblemData, tol: Tolerances = DEFAULT_TOL) -> list:
    """Every invariant violation of ``p``; an empty list means valid. Read-only."""
    out = []
    if p.N < 1:
        return [Violation("horizon", "N", (p.N,), "horizon must be >= 1")]
    shapes = {"A": (p.n, p.n), "C": (p.n, p.n), "B": (p.n, p.m), "D": (p.n, p.m),
              "Q": (p.n, p.n), "R": (p.m, p.m)}
    for name in RUNNING:
        fam = p.family(name)
        for t, k in p.pairs():
            if (t, k) not in fam:
                out.append(Violation("completeness", name, (t, k), "missing"))
                continue
            out.extend(_check_matrix(name, (t, k), fam[t, k], shapes[name], name in "QR", tol))
        for key in fam:
            if not (isinstance(key, tuple) and len(key) == 2 and 0 <= key[0] <= key[1] < p.N):
                out.append(Violation("completeness", name, tuple(np.atleast_1d(key)), "index out of range"))
    for t in range(p.N):
        if t not in p.G:
            out.append(Violation("completeness", "G", (t,), "missing"))
            continue
        out.extend(_check_matrix("G", (t,), p.G[t], (p.n, p.n), True, tol))
    if not out and p.mode is not None:
        actual = detect_mode(p, tol)
        if _rank(actual) < _rank(p.mode):
            out.append(Violation("mode", "mode", (), f"declared {p.mode.value} but data is {actual.value}"))
    return out


def _check_matrix(name, idx, mat, shape, symmetric, tol):
    a = np.asarray(mat)
    if a.shape != shape:
        return [Violation("dimension", name, idx, f"shape {a.shape}, expected {shape}")]
    if not np.all(np.isfinite(a)):
        return [Violation("finite", name, idx, "non-finite entry")]
    if symmetric and not is_symmetric(a, tol):
        return [Violation("symmetry", name, idx, f"asymmetry {norm(a - a.T):.3g}")]
    return []


def _rank(mode: Mode) -> int:
    return {Mode.GENERAL: 0, Mode.T_INDEPENDENT_DYNAMICS: 1, Mode.STATIONARY: 2}[Mode(mode)]


def _t_independent(p: ProblemData, names, tol: Tolerances) -> bool:
    for name in names:
        fam = p.family(name)
        for t, k in p.pairs():
            ref = fam[k, k]
            if norm(fam[t, k] - ref) > tol.residual_tol * max(1.0, norm(ref)):
                return False
    return True


def _g_t_independent(p: ProblemData, tol: Tolerances) -> bool:
    ref = p.G[p.N - 1]
    return all(norm(p.G[t] - ref) <= tol.residual_tol * max(1.0, norm(ref)) for t in range(p.N))


def detect_mode(p: ProblemData, tol: Tolerances = DEFAULT_TOL) -> Mode:
    """Most specific structural mode whose equalities hold within tolerance."""
    if not _t_independent(p, DYNAMICS, tol):
        return Mode.GENERAL
    if _t_independent(p, ("Q",), tol) and _g_t_independent(p, tol):
        return Mode.STATIONARY
    return Mode.T_INDEPENDENT_DYNAMICS


def is_fully_time_invariant(p: ProblemData, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Stationary and R also independent of the anchor time: no time inconsistency at all."""
    return detect_mode(p, tol) is Mode.STATIONARY and _t_independent(p, ("R",), tol)


def with_mode(p: ProblemData, mode: Optional[Mode]) -> ProblemData:
    return ProblemData(**{**_fields(p), "mode": mode})


def replace_entries(p: ProblemData, name: str, updates: Mapping, mode="detect",
                    tol: Tolerances = DEFAULT_TOL) -> ProblemData:
    """Copy of ``p`` with some entries of one family replaced."""
    fam = dict(p.family(name))
    for key, v in updates.items():
        fam[key] = _frozen(v)
    q = ProblemData(**{**_fields(p), name: fam, "mode": None})
    if mode == "detect":
        return with_mode(q, detect_mode(q, tol))
    return with_mode(q, mode)


def restrict(p: ProblemData, t0: int) -> ProblemData:
    """Sub-problem on ``{t0, ..., N}`` with times shifted so ``t0`` becomes 0."""
    if not 0 <= t0 < p.N:
        raise InvalidInputError(f"restriction start {t0} outside 0..{p.N - 1}")
    fams = {}
    for name in RUNNING:
        fam = p.family(name)
        fams[name] = {(t - t0, k - t0): fam[t, k] for t, k in p.pairs() if t >= t0}
    g = {t - t0: p.G[t] for t in range(t0, p.N)}
    q = ProblemData(N=p.N - t0, n=p.n, m=p.m, G=g, mode=None, **fams)
    return with_mode(q, detect_mode(q))


# --------------------------------------------------------------------------
# discounting constructors


@dataclass(frozen=True)
class DiscountSpec:
    """Lag-weighted preferences: ``Q[t,k] = w(k-t) Q``, ``R[t,k] = w(k-t) R``, ``G[t] = w(N-t) G``."""

    kind: str  # exponential | hyperbolic | custom
    base_Q: np.ndarray
    base_R: np.ndarray
    base_G: np.ndarray
    rate: float = 0.0
    weights: Optional[Sequence[float]] = None

    def weight(self, lag: int) -> float:
        if self.kind == "exponential":
            return math.exp(-self.rate * lag)
        if self.kind == "hyperbolic":
            return 1.0 / (1.0 + lag)
        if self.kind == "custom":
            if self.weights is None or lag >= len(self.weights):
                raise InvalidInputError(f"custom discount has no weight for lag {lag}")
            return float(self.weights[lag])
        raise InvalidInputError(f"unknown discount kind {self.kind!r}")


def from_discounting(spec: DiscountSpec, A, B, C, D, N: int,
                     tol: Tolerances = DEFAULT_TOL) -> ProblemData:
    """Problem with anchor-independent dynamics (per-k or single) and discounted weights."""
    weights = [spec.weight(lag) for lag in range(N + 1)]
    if any(not w > 0 for w in weights):
        raise InvalidInputError("discount weights must be strictly positive")
    if spec.kind == "custom" and not math.isclose(weights[0], 1.0):
        raise InvalidInputError("discount weight at lag 0 must equal 1")
    bq, br, bg = (np.asarray(x, dtype=np.float64) for x in (spec.base_Q, spec.base_R, spec.base_G))
    return make_problem(
        N,
        _per_k_dynamics(A, N), _per_k_dynamics(B, N), _per_k_dynamics(C, N), _per_k_dynamics(D, N),
        Q=lambda t, k: weights[k - t] * bq,
        R=lambda t, k: weights[k - t] * br,
        G=lambda t: weights[N - t] * bg,
        tol=tol,
    )


def _per_k_dynamics(spec, N):
    if _depth(spec) <= 2:
        return lambda t, k: spec
    return lambda t, k: spec[k]


# --------------------------------------------------------------------------
# JSON problem files


def load_problem(document, tol: Tolerances = DEFAULT_TOL) -> ProblemData:
    """Parse a problem document (JSON text, bytes, or already-decoded dict)."""
    if isinstance(document, (str, bytes, bytearray)):
        text = document.decode() if isinstance(document, (bytes, bytearray)) else document
        if not text.strip():
            raise ProblemParseError("$", "empty document")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProblemParseError(f"$ (line {exc.lineno}, column {exc.colno})", exc.msg) from None
    else:
        doc = document
    if not isinstance(doc, dict) or not doc:
        raise ProblemParseError("$", "expected a non-empty JSON object")
    N = _get_int(doc, "N")
    if "discount" in doc:
        return _load_discounted(doc, N, tol)
    mode = doc.get("mode")
    if mode is not None:
        try:
            mode = Mode(mode)
        except ValueError:
            raise ProblemParseError("$.mode", f"unknown mode {mode!r}") from None
    if N < 1:
        raise ProblemValidationError([Violation("horizon", "N", (N,), "horizon must be >= 1")])
    fams = {}
    for name in RUNNING:
        if name not in doc:
            raise ProblemParseError(f"$.{name}", "missing coefficient family")
        fams[name] = _parse_running(doc[name], N, f"$.{name}")
    if "G" not in doc:
        raise ProblemParseError("$.G", "missing terminal weight")
    g = _parse_terminal(doc["G"], N, "$.G")
    p = make_problem(N, G=g, mode=mode, tol=tol, check=False, **fams)
    for key, expect in (("n", p.n), ("m", p.m)):
        if key in doc and _get_int(doc, key) != expect:
            raise ProblemValidationError([Violation("dimension", key, (), f"declared {doc[key]}, data has {expect}")])
    violations = validate(p, tol)
    if violations:
        raise ProblemValidationError(violations)
    return p if p.mode is not None else with_mode(p, detect_mode(p, tol))


def _get_int(doc, key):
    if key not in doc:
        raise ProblemParseError(f"$.{key}", "missing")
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ProblemParseError(f"$.{key}", f"expected integer, got {type(v).__name__}")
    return v


def _parse_matrix(obj, path):
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ProblemParseError(path, "expected a non-empty row-major nested array")
    width = len(obj[0])
    for i, r in enumerate(obj):
        if len(r) != width:
            raise ProblemParseError(f"{path}[{i}]", "ragged matrix rows")
        for j, v in enumerate(r):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ProblemParseError(f"{path}[{i}][{j}]", "expected a number")
    return np.array(obj, dtype=np.float64)


def _parse_running(obj, N, path):
    d = _depth(obj)
    if d == 2:
        return _parse_matrix(obj, path)
    if d == 3:
        if len(obj) != N:
            raise ProblemParseError(path, f"per-k layout needs {N} matrices, got {len(obj)}")
        return [_parse_matrix(x, f"{path}[{k}]") for k, x in enumerate(obj)]
    if d == 4:
        if len(obj) != N:
            raise ProblemParseError(path, f"full layout needs {N} rows over t, got {len(obj)}")
        full = {}
        for t, row in enumerate(obj):
            if len(row) != N - t:
                raise ProblemParseError(f"{path}[{t}]", f"row t={t} needs {N - t} matrices, got {len(row)}")
            for j, x in enumerate(row):
                full[t, t + j] = _parse_matrix(x, f"{path}[{t}][{j}]")
        return full
    raise ProblemParseError(path, "expected a matrix, a per-k array, or a full (t, k-t) array")


def _parse_terminal(obj, N, path):
    d = _depth(obj)
    if d == 2:
        return _parse_matrix(obj, path)
    if d == 3:
        if len(obj) != N:
            raise ProblemParseError(path, f"per-t layout needs {N} matrices, got {len(obj)}")
        return {t: _parse_matrix(x, f"{path}[{t}]") for t, x in enumerate(obj)}
    raise ProblemParseError(path, "expected a matrix or a per-t array of matrices")


def _load_discounted(doc, N, tol):
    disc = doc["discount"]
    if not isinstance(disc, dict) or disc.get("kind") not in ("hyperbolic", "exponential", "custom"):
        raise ProblemParseError("$.discount.kind", "expected hyperbolic, exponential or custom")
    if N < 1:
        raise ProblemValidationError([Violation("horizon", "N", (N,), "horizon must be >= 1")])
    dyn = doc.get("dynamics")
    if not isinstance(dyn, dict):
        raise ProblemParseError("$.dynamics", "expected an object with A, B, C, D")
    parsed = {}
    for name in DYNAMICS:
        if name not in dyn:
            raise ProblemParseError(f"$.dynamics.{name}", "missing")
        val = _parse_running(dyn[name], N, f"$.dynamics.{name}")
        if isinstance(val, dict):
            raise ProblemParseError(f"$.dynamics.{name}", "discounted problems take per-k or single dynamics")
        parsed[name] = val
    bases = {}
    for key in ("base_Q", "base_R", "base_G"):
        if key not in doc:
            raise ProblemParseError(f"$.{key}", "missing")
        bases[key] = _parse_matrix(doc[key], f"$.{key}")
    spec = DiscountSpec(kind=disc["kind"], rate=float(disc.get("rate", 0.0)),
                        weights=disc.get("weights"), **bases)
    return from_discounting(spec, parsed["A"], parsed["B"], parsed["C"], parsed["D"], N, tol)


def problem_to_dict(p: ProblemData) -> dict:
    """Full-layout JSON-ready encoding; ``load_problem`` inverts it exactly."""
    doc = {"N": p.N, "n": p.n, "m": p.m}
    if p.mode is not None:
        doc["mode"] = Mode(p.mode).value
    for name in RUNNING:
        fam = p.family(name)
        doc[name] = [[fam[t, k].tolist() for k in range(t, p.N)] for t in range(p.N)]
    doc["G"] = [p.G[t].tolist() for t in range(p.N)]
    return doc


def dump_problem(p: ProblemData, indent: Optional[int] = None) -> str:
    return json.dumps(problem_to_dict(p), indent=indent)
