"""Embedded worked examples with their published values.

Published matrices are rounded.  Tolerances are per entry: half a unit in the
last printed place, doubled for accumulated recursion error.  That gives 5e-4
for four-decimal values and 5e-2 for one-decimal ones.

Rows marked ``erratum`` record published values that cannot be reproduced
from the published data (see the README); they are reported but do not gate
the fixture verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .linalg import DEFAULT_TOL, Tolerances
from .problem import DiscountSpec, ProblemData, from_discounting, make_problem

FOUR_DEC = 5e-4
ONE_DEC = 5e-2


def _m(*rows):
    return np.array(rows, dtype=np.float64)


# --------------------------------------------------------------------------
# problem data


def example_1_1() -> ProblemData:
    """Scalar problem with hyperbolic weights on control and terminal state."""
    one = _m([1.0])
    spec = DiscountSpec("hyperbolic", base_Q=_m([0.0]), base_R=one, base_G=_m([2.0]))
    return from_discounting(spec, one, one, one, _m([0.0]), N=4)


_A51 = [_m([1.12, 0.21], [-0.13, 0.98]), _m([2.12, -0.35], [-0.21, 3.43]),
        _m([5.46, 1.21], [-0.98, 4.21])]
_B51 = [_m([1.45, -0.23], [-0.2, 4]), _m([1.5, 0.3], [-0.2, 3]),
        _m([-4.36, 0.82], [1.21, 4.21])]
_C51 = [_m([1, 0.32], [0.25, 3]), _m([1.65, -0.13], [-0.42, 6]),
        _m([-3, 1.53], [-0.62, 4.78])]
_D51 = [_m([5, 1], [-0.85, 8]), _m([4, 0.53], [-0.42, 5]),
        _m([9.21, -2.03], [-1.52, 6.98])]
_Q51 = [_m([-2, 0.8], [0.8, 1.6]), _m([4, 0], [0, 0]), _m([1.56, -0.23], [-0.23, 2.54])]
_G51 = _m([1, 0], [0, 2])
_R51 = {
    (0, 0): _m([-0.5, 0], [0, 1]), (0, 1): _m([-5, 0], [0, -4]), (0, 2): _m([-9, 0], [0, 10]),
    (1, 1): _m([4, -0.3], [-0.3, 7]), (1, 2): _m([2.24, -5.67], [-5.67, -1.27]),
    (2, 2): _m([6.29, -1.67], [-1.67, 8.38]),
}


def example_5_1() -> ProblemData:
    return make_problem(3, _A51, _B51, _C51, _D51, _Q51, dict(_R51), _G51)


def example_5_2() -> ProblemData:
    R = dict(_R51)
    R[0, 1] = _m([-1, 0], [0, -0.6])
    R[0, 2] = _m([9.45, 1.32], [1.32, 10.78])
    R[1, 2] = _m([5.24, -1.67], [-1.67, 7.27])
    return make_problem(3, _A51, _B51, _C51, _D51, _Q51, R, _G51)


def example_5_3() -> ProblemData:
    A = {(0, 0): _m([2.3, 0.41], [-0.3, 1.9]), (0, 1): _m([4.12, -0.35], [0.31, 3.03]),
         (1, 1): _m([6, 1.63], [-1.37, 7])}
    B = {(0, 0): _m([2.45, -0.3], [0.2, 4]), (0, 1): _m([2.5, 0.6], [-0.2, 3]),
         (1, 1): _m([4, 0.93], [1.07, 3])}
    C = {(0, 0): _m([2.2, 0.32], [0.5, 3]), (0, 1): _m([3.65, -0.3], [-0.42, 5.6]),
         (1, 1): _m([8, 2.03], [-1.23, 10])}
    D = {(0, 0): _m([5.6, 1], [0.73, 7.8]), (0, 1): _m([5, 0.73], [-0.47, 5.2]),
         (1, 1): _m([5, -0.93], [1.016, 4.65])}
    Q = {(0, 0): _m([2, 0.8], [0.8, 1.6]), (0, 1): _m([4, 0], [0, 0]),
         (1, 1): _m([2, 0.1], [0.1, 5])}
    R = {(0, 0): _m([-0.5, 0], [0, 1]), (0, 1): _m([-5, 0], [0, -4]),
         (1, 1): _m([4, -0.3], [-0.3, 7])}
    G = {0: _m([1, 0], [0, 2]), 1: _m([2, -0.3], [-0.3, 3])}
    return make_problem(2, A, B, C, D, Q, R, G)


# --------------------------------------------------------------------------
# expected values


@dataclass(frozen=True)
class Expected:
    name: str
    value: np.ndarray
    atol: float
    erratum: bool = False

    def __post_init__(self):
        object.__setattr__(self, "value", np.atleast_1d(np.asarray(self.value, dtype=np.float64)))


@dataclass
class ExampleFixture:
    name: str
    build: Callable[[], ProblemData]
    expected: List[Expected]
    # qualitative expectations checked by the pipeline, e.g. {"feedback_feasible": False}
    verdicts: Dict[str, bool] = field(default_factory=dict)
    start_x: Optional[np.ndarray] = None

    def problem(self) -> ProblemData:
        return self.build()


def _e(name, atol, *rows, erratum=False):
    return Expected(name, _m(*rows) if isinstance(rows[0], list) else np.array(rows), atol, erratum)


FIXTURES: Dict[str, ExampleFixture] = {
    "example-1-1": ExampleFixture(
        "example-1-1", example_1_1,
        expected=[
            _e("standard_gain[anchor=0,k=1]", FOUR_DEC, -0.6038),
            _e("standard_gain[anchor=1,k=1]", FOUR_DEC, -0.4979),
            _e("gain_difference[0,1]", FOUR_DEC, 0.1059),
        ],
        verdicts={"time_inconsistent": True},
    ),
    "example-5-1": ExampleFixture(
        "example-5-1", example_5_1,
        expected=[
            _e("P[2]", FOUR_DEC, [16.6571, 5.8520], [5.8520, 11.5436]),
            _e("P[1]", FOUR_DEC, [6.9700, -1.3882], [-1.3882, 9.1396], erratum=True),
            _e("P[0]", FOUR_DEC, [7.8991, 4.2276], [4.2276, 4.6336], erratum=True),
            _e("S[2]", FOUR_DEC, [43.0612, -12.3922], [-12.3922, 87.4900]),
            _e("S[1]", FOUR_DEC, [11.6579, -7.4371], [-7.4371, 95.6692], erratum=True),
            _e("S[0]", FOUR_DEC, [34.3248, 35.9699], [35.9699, 938.8710], erratum=True),
            _e("W[2]", FOUR_DEC, [117.6727, -34.9725], [-34.9725, 146.0623]),
            _e("W[1]", FOUR_DEC, [287.3160, 153.0623], [153.0623, 447.2115]),
            _e("W[0]", ONE_DEC, [1138.3, -410.9], [-410.9, 915.8]),
            _e("convexity[2]", FOUR_DEC, [117.6727, -34.9725], [-34.9725, 146.0623]),
            _e("convexity[1]", ONE_DEC, [857.9, -426.0], [-426.0, 2909.6]),
            # printed to the nearest ten
            _e("convexity[0]", 10.0, [17940, -54740], [-54740, 331470]),
            _e("K[0]", FOUR_DEC, [-0.2183, 0.0031], [0.0023, -0.3286]),
            _e("K[1]", FOUR_DEC, [-0.5138, 0.1973], [0.0026, -1.1339]),
            _e("K[2]", FOUR_DEC, [0.4889, -0.2601], [0.1605, -0.7474]),
            _e("W~[1,1]", FOUR_DEC, [239.0218, 247.7565], [247.7565, 224.5117]),
            _e("eig W~[1,1]", ONE_DEC, -16.096, 479.6294),
        ],
        verdicts={"open_loop_feasible": True, "feedback_feasible": False,
                  "open_loop_verified": True},
        start_x=np.array([1.0, 1.0]),
    ),
    "example-5-2": ExampleFixture(
        "example-5-2", example_5_2,
        expected=[
            _e("P~[2,2]", FOUR_DEC, [16.6571, 5.8520], [5.8520, 11.5436]),
            _e("P~[1,2]", FOUR_DEC, [16.3775, 6.1187], [6.1187, 10.8526]),
            _e("P~[1,1]", FOUR_DEC, [37.3769, -10.7301], [-10.7301, 12.7823]),
            _e("P~[0,2]", FOUR_DEC, [17.9435, 3.9449], [3.9449, 14.2605]),
            _e("P~[0,1]", FOUR_DEC, [39.7057, -11.0096], [-11.0096, 3.2054]),
            _e("P~[0,0]", FOUR_DEC, [6.1615, 4.3853], [4.3853, 3.2889]),
            _e("W~[2,2]", FOUR_DEC, [117.6727, -34.9725], [-34.9725, 146.0623]),
            _e("W~[1,1]", FOUR_DEC, [281.0078, 160.6675], [160.6675, 425.5062]),
            _e("W~[0,0]", ONE_DEC, [1178.0, -334.5], [-334.5, 143.3]),
            _e("Phi[0]", FOUR_DEC, [-0.0368, 0.0884], [0.6555, -0.0192]),
            _e("Phi[1]", FOUR_DEC, [-0.5094, 0.1935], [-0.0021, -1.1301]),
            _e("Phi[2]", FOUR_DEC, [0.4889, -0.2601], [0.1605, -0.7474]),
        ],
        verdicts={"feedback_feasible": True, "feedback_verified": True,
                  "open_loop_matches_example_5_1": True},
        start_x=np.array([1.0, 0.0]),
    ),
    "example-5-3": ExampleFixture(
        "example-5-3", example_5_3,
        expected=[
            _e("P~[1,1]", FOUR_DEC, [18.8304, -11.9513], [-11.9513, 46.5418]),
            _e("P~[0,1]", FOUR_DEC, [40.6027, -28.7266], [-28.7266, 50.9647]),
            _e("P~[0,0]", FOUR_DEC, [99.6787, 14.1112], [14.1112, 8.3265]),
            _e("W~[1,1]", FOUR_DEC, [86.9155, 11.0531], [11.0531, 103.2478]),
            _e("W~[0,0]", ONE_DEC, [1282.7, -1027.0], [-1027.0, 3582.2]),
            _e("Phi[0]", FOUR_DEC, [-0.4665, -0.0206], [0.0269, -0.3965]),
            _e("Phi[1]", FOUR_DEC, [-1.4499, -0.4726], [0.6369, -1.8700]),
        ],
        verdicts={"feedback_feasible": True, "feedback_verified": True},
        start_x=np.array([1.0, -1.0]),
    ),
}


# --------------------------------------------------------------------------
# pipeline


def compute_quantities(p: ProblemData, tol: Tolerances = DEFAULT_TOL) -> Dict[str, np.ndarray]:
    """Every named quantity the fixtures can refer to, for one problem."""
    from .feedback import solve_feedback
    from .open_loop import solve_open_loop
    from .problem import Mode

    out: Dict[str, np.ndarray] = {}
    if p.resolved_mode(tol) is not Mode.GENERAL:
        ol = solve_open_loop(p, tol)
        for k in range(p.N + 1):
            out[f"P[{k}]"] = ol.P[min(k, p.N - 1), k]
            out[f"S[{k}]"] = ol.S[min(k, p.N - 1), k]
        for k in range(p.N):
            out[f"W[{k}]"] = ol.W_diag[k]
            out[f"K[{k}]"] = ol.gains[k]
            out[f"convexity[{k}]"] = ol.convexity[k]
    fb = solve_feedback(p, tol)
    for (t, k), mat in fb.P_tilde.items():
        out[f"P~[{t},{k}]"] = mat
    for (t, k), mat in fb.W_tilde.items():
        out[f"W~[{t},{k}]"] = mat
    for t in range(p.N):
        out[f"Phi[{t}]"] = fb.Phi[t]
        out[f"eig W~[{t},{t}]"] = np.linalg.eigvalsh(fb.W_tilde[t, t])
    return out


@dataclass
class RowResult:
    name: str
    ok: bool
    max_error: float
    atol: float
    erratum: bool = False


@dataclass
class FixtureResult:
    name: str
    rows: List[RowResult]
    passed: bool


def _verdicts(fx: ExampleFixture, p: ProblemData, tol: Tolerances) -> Dict[str, bool]:
    from .feedback import solve_feedback
    from .open_loop import demonstrate_inconsistency, solve_open_loop
    from .problem import InitialPair
    from .verify import verify_feedback, verify_open_loop

    got: Dict[str, bool] = {}
    x = fx.start_x if fx.start_x is not None else np.ones(p.n)
    for key in fx.verdicts:
        if key == "time_inconsistent":
            got[key] = demonstrate_inconsistency(p, 0, 1, tol).difference > 1e-6
        elif key == "open_loop_feasible":
            got[key] = solve_open_loop(p, tol).feasible
        elif key == "feedback_feasible":
            got[key] = solve_feedback(p, tol).feasible
        elif key == "open_loop_verified":
            got[key] = verify_open_loop(p, InitialPair(0, x), solve_open_loop(p, tol).gains, tol=tol).passed
        elif key == "feedback_verified":
            got[key] = verify_feedback(p, solve_feedback(p, tol).Phi, InitialPair(0, x), tol=tol).passed
        elif key == "open_loop_matches_example_5_1":
            a, b = solve_open_loop(p, tol), solve_open_loop(example_5_1(), tol)
            got[key] = (all(np.array_equal(a.P[i], b.P[i]) for i in a.P)
                        and all(np.array_equal(a.S[i], b.S[i]) for i in a.S)
                        and all(np.array_equal(g1, g2) for g1, g2 in zip(a.gains, b.gains)))
        else:
            raise KeyError(key)
    return got


def run_fixture(fx: ExampleFixture, tol: Tolerances = DEFAULT_TOL) -> FixtureResult:
    from .open_loop import demonstrate_inconsistency

    p = fx.problem()
    if fx.name == "example-1-1":
        rep = demonstrate_inconsistency(p, 0, 1, tol)
        q = {"standard_gain[anchor=0,k=1]": rep.gain_t0, "standard_gain[anchor=1,k=1]": rep.gain_t1,
             "gain_difference[0,1]": np.array([rep.difference])}
    else:
        q = compute_quantities(p, tol)
    rows = []
    for exp in fx.expected:
        got = np.asarray(q[exp.name], dtype=float).reshape(exp.value.shape)
        err = float(np.max(np.abs(got - exp.value)))
        rows.append(RowResult(exp.name, err <= exp.atol, err, exp.atol, exp.erratum))
    verdicts = _verdicts(fx, p, tol)
    for key, want in fx.verdicts.items():
        have = verdicts[key]
        rows.append(RowResult(f"{key} is {want}", have == want, 0.0 if have == want else 1.0, 0.0))
    passed = all(r.ok for r in rows if not r.erratum)
    return FixtureResult(fx.name, rows, passed)


def run_examples(fixtures: Optional[Dict[str, ExampleFixture]] = None,
                 tol: Tolerances = DEFAULT_TOL) -> List[FixtureResult]:
    fixtures = FIXTURES if fixtures is None else fixtures
    return [run_fixture(fx, tol) for fx in fixtures.values()]


def format_table(results: List[FixtureResult]) -> str:
    lines = []
    for res in results:
        lines.append(f"{res.name}: {'PASS' if res.passed else 'FAIL'}")
        for r in res.rows:
            tag = "ok  " if r.ok else ("ERRATUM" if r.erratum else "FAIL")
            lines.append(f"  {tag:7s} {r.name:34s} max|err|={r.max_error:.3g} (atol {r.atol:g})")
    total = sum(r.passed for r in results)
    lines.append(f"{total}/{len(results)} fixtures pass")
    return "\n".join(lines) + "\n"
