"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line; conftest prints them in the terminal
summary.  Published values are rounded, so per-entry tolerances are half a
unit in the last printed place, doubled.
"""

import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from tilq.feedback import solve_feedback
from tilq.fixtures import FIXTURES
from tilq.generate import random_problem
from tilq.open_loop import demonstrate_inconsistency, solve_open_loop, solve_standard_lq
from tilq.problem import InitialPair
from tilq.simulation import NoiseModel, PolicySpec, build_tree, solve_adjoint
from tilq.verify import directional_derivative_check, verify_feedback, verify_open_loop


def record(num, ok, detail):
    ACCEPTANCE_LINES[num] = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[num])
    return ok


def published(fixture, name):
    for e in FIXTURES[fixture].expected:
        if e.name == name:
            return e.value
    raise KeyError(name)


def max_err(got, want):
    return float(np.max(np.abs(np.asarray(got).reshape(want.shape) - want)))


def certified(rep, stat_rel=1e-8, slack_rel=1e-9):
    """Stationarity, convexity and slack checks at the criterion tolerances."""
    stat = all(r <= stat_rel * s for r, s in zip(rep.stationarity_residual, rep.stationarity_scale))
    slack = all(v >= -slack_rel * s for v, s in zip(rep.inequality_slack, rep.slack_scale))
    return stat and slack and all(rep.convexity_ok)


def random_dims(rng):
    return dict(n=int(rng.integers(1, 3)), m=int(rng.integers(1, 3)), N=int(rng.integers(1, 6)))


def test_criterion_01_example_5_1_open_loop(ex51):
    t0 = time.perf_counter()
    sol = solve_open_loop(ex51)
    elapsed = time.perf_counter() - t0
    got = {}
    for k in range(3):
        got[f"P[{k}]"] = sol.P[k, k]
        got[f"S[{k}]"] = sol.S[k, k]
        got[f"K[{k}]"] = sol.gains[k]
    got["W[0]"] = sol.W_diag[0]
    tols = {name: 5e-2 if name == "W[0]" else 5e-4 for name in got}
    errs = {name: max_err(got[name], published("example-5-1", name)) for name in got}
    bad = sorted(name for name in errs if errs[name] > tols[name])
    ok = not bad and elapsed < 1.0
    detail = f"runtime {elapsed * 1e3:.1f} ms; "
    detail += "all matrices within tolerance" if not bad else "mismatched " + ", ".join(
        f"{name} (max err {errs[name]:.3g})" for name in bad)
    record(1, ok, detail)
    assert ok, detail


def test_criterion_02_example_5_1_feedback_infeasible(ex51):
    sol = solve_feedback(ex51)
    eigs = np.linalg.eigvalsh(sol.W_tilde[1, 1])
    err = max_err(eigs, np.array([-16.096, 479.6294]))
    ok = (not sol.feasible) and err <= 5e-2
    record(2, ok, f"feasible={sol.feasible}, eig W~[1,1]={np.round(eigs, 4).tolist()}, max err {err:.3g}")
    assert ok


def test_criterion_03_example_5_2_feedback(ex51, ex52):
    sol = solve_feedback(ex52)
    errs = [max_err(sol.Phi[t], published("example-5-2", f"Phi[{t}]")) for t in range(3)]
    errs.append(max_err(sol.P_tilde[0, 0], published("example-5-2", "P~[0,0]")))
    a, b = solve_open_loop(ex51), solve_open_loop(ex52)
    same = (all(np.array_equal(a.P[i], b.P[i]) for i in a.P)
            and all(np.array_equal(a.S[i], b.S[i]) for i in a.S)
            and all(np.array_equal(x, y) for x, y in zip(a.gains, b.gains)))
    ok = sol.feasible and max(errs) <= 5e-4 and same
    record(3, ok, f"feasible={sol.feasible}, max err {max(errs):.3g}, open-loop bit-identical={same}")
    assert ok


def test_criterion_04_example_5_3_feedback(ex53):
    sol = solve_feedback(ex53)
    e_phi = max(max_err(sol.Phi[t], published("example-5-3", f"Phi[{t}]")) for t in range(2))
    e_w = max(max_err(sol.W_tilde[t, t], published("example-5-3", f"W~[{t},{t}]")) for t in range(2))
    ok = e_phi <= 5e-4 and e_w <= 5e-2
    record(4, ok, f"Phi max err {e_phi:.3g}, W~ max err {e_w:.3g}")
    assert ok


def test_criterion_05_example_1_1_inconsistency(ex11):
    rep = demonstrate_inconsistency(ex11, 0, 1)
    g0, g1 = float(rep.gain_t0[0, 0]), float(rep.gain_t1[0, 0])
    err = max(abs(g0 + 0.6038), abs(g1 + 0.4979), abs(rep.difference - 0.1059))
    ok = err <= 5e-4
    record(5, ok, f"gains {g0:.4f}, {g1:.4f}, difference {rep.difference:.4f}")
    assert ok


def test_criterion_06_open_loop_certification():
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    passed = tried = 0
    failures = []
    while tried < 50:
        p = random_problem(rng, structure="t_independent", definite=bool(rng.integers(2)), **random_dims(rng))
        sol = solve_open_loop(p)
        if not sol.feasible:
            continue
        tried += 1
        rep = verify_open_loop(p, InitialPair(0, rng.standard_normal(p.n)), sol.gains, noise=NoiseModel())
        if certified(rep):
            passed += 1
        else:
            failures.append(rep.failing)
    elapsed = time.perf_counter() - t0
    ok = passed == 50 and elapsed < 30
    record(6, ok, f"{passed}/50 feasible instances certified in {elapsed:.1f} s")
    assert ok, failures


def test_criterion_07_feedback_certification():
    rng = np.random.default_rng(7)
    structures = ["general", "t_independent", "stationary"]
    passed = tried = general = 0
    t0 = time.perf_counter()
    while tried < 50:
        s = structures[tried % 3]
        p = random_problem(rng, structure=s, definite=bool(rng.integers(2)), **random_dims(rng))
        sol = solve_feedback(p)
        if not sol.feasible:
            continue
        tried += 1
        general += s == "general"
        rep = verify_feedback(p, sol.Phi, InitialPair(0, rng.standard_normal(p.n)), noise=NoiseModel())
        passed += certified(rep)
    elapsed = time.perf_counter() - t0
    ok = passed == 50
    record(7, ok, f"{passed}/50 certified ({general} general-mode) in {elapsed:.1f} s")
    assert ok


def test_criterion_08_definite_case():
    rng = np.random.default_rng(8)
    good = 0
    for _ in range(100):
        p = random_problem(rng, structure="general", definite=True, **random_dims(rng))
        sol = solve_feedback(p)
        w_pd = all(np.linalg.eigvalsh(w)[0] > 0 for w in sol.W_tilde.values())
        p_psd = all(np.linalg.eigvalsh(m)[0] >= -1e-9 * max(1.0, np.abs(m).max()) for m in sol.P_tilde.values())
        good += sol.feasible and w_pd and p_psd
    ok = good == 100
    record(8, ok, f"{good}/100 feasible with W~ > 0 and P~ >= 0")
    assert ok


def test_criterion_09_reduction_to_standard():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(20):
        p = random_problem(rng, structure="invariant", definite=bool(rng.integers(2)), **random_dims(rng))
        sol = solve_feedback(p)
        rows = {nm: [p.family(nm)[k, k] for k in range(p.N)] for nm in "ABCDQR"}
        std = solve_standard_lq(rows["A"], rows["B"], rows["C"], rows["D"], rows["Q"], rows["R"], p.G[0], N=p.N)
        for (t, k), mat in sol.P_tilde.items():
            ref = std.P[k]
            worst = max(worst, np.linalg.norm(mat - ref) / max(1.0, np.linalg.norm(ref)))
    ok = worst <= 1e-9
    record(9, ok, f"max relative deviation {worst:.3g} over 20 instances")
    assert ok


def _open_loop_gap(p, sol, x0):
    eq = build_tree(p, 0, x0, PolicySpec.gain_sequence(sol.gains), NoiseModel(), rows="diagonal")
    worst = 0.0
    for k in range(p.N):
        Z = solve_adjoint(p, k, eq, kind="open_loop")
        for ell, z in Z.items():
            want = eq.X[ell] @ sol.P[k, ell].T
            worst = max(worst, np.abs(z - want).max() / max(1.0, np.abs(want).max()))
    return worst


def _feedback_gap(p, sol, x0):
    eq = build_tree(p, 0, x0, PolicySpec.strategy(sol.Phi), NoiseModel(), rows="diagonal")
    worst = 0.0
    for k in range(p.N):
        tree = build_tree(p, k, eq.X[k], PolicySpec.strategy(sol.Phi), NoiseModel(), rows=k)
        Z = solve_adjoint(p, k, tree, kind="feedback", Phi=sol.Phi)
        for ell, z in Z.items():
            want = tree.X[tree.level(ell)] @ sol.P_tilde[k, ell].T
            worst = max(worst, np.abs(z - want).max() / max(1.0, np.abs(want).max()))
    return worst


def test_criterion_10_adjoint_decoupling(ex51, ex52, ex53):
    rng = np.random.default_rng(10)
    ol = [(ex51, np.ones(2))]
    fb = [(ex52, np.array([1.0, 0.0])), (ex53, np.array([1.0, -1.0]))]
    for _ in range(20):
        p = random_problem(rng, structure="t_independent", definite=bool(rng.integers(2)), **random_dims(rng))
        ol.append((p, rng.standard_normal(p.n)))
        q = random_problem(rng, structure="general", definite=bool(rng.integers(2)), **random_dims(rng))
        fb.append((q, rng.standard_normal(q.n)))
    worst_ol = worst_fb = 0.0
    n_ol = n_fb = 0
    for p, x in ol:
        sol = solve_open_loop(p)
        if sol.feasible:
            worst_ol, n_ol = max(worst_ol, _open_loop_gap(p, sol, x)), n_ol + 1
    for p, x in fb:
        sol = solve_feedback(p)
        if sol.feasible:
            worst_fb, n_fb = max(worst_fb, _feedback_gap(p, sol, x)), n_fb + 1
    ok = worst_ol <= 1e-8 and worst_fb <= 1e-8
    record(10, ok, f"open-loop Z=PX gap {worst_ol:.2g} ({n_ol} solves), "
                   f"feedback Z=P~X gap {worst_fb:.2g} ({n_fb} solves)")
    assert ok


def test_criterion_11_cross_concept(ex51):
    gains = solve_open_loop(ex51).gains
    rep = verify_feedback(ex51, gains, InitialPair(0, np.ones(2)))
    neg = [k for k, s in zip(rep.times, rep.inequality_slack) if s < 0]
    ok = bool(neg) and not rep.passed
    record(11, ok, f"negative slack at k={neg}: {[round(s, 3) for s in rep.inequality_slack]}")
    assert ok


def test_criterion_12_derivative_checks(ex51, ex52, ex53):
    rng = np.random.default_rng(12)
    cases = [(ex51, "open_loop"), (ex52, "feedback"), (ex53, "feedback")]
    for _ in range(7):
        cases.append((random_problem(rng, structure="t_independent", **random_dims(rng)), "open_loop"))
        cases.append((random_problem(rng, structure="general", **random_dims(rng)), "feedback"))
    agree = rays = 0
    worst = 0.0
    while rays < 100:
        p, concept = cases[rays % len(cases)]
        cand = solve_open_loop(p).gains if concept == "open_loop" else solve_feedback(p).Phi
        x0 = rng.standard_normal(p.n)
        k = int(rng.integers(0, p.N))
        nodes = 2 ** k
        direction = rng.standard_normal((nodes, p.m))
        chk = directional_derivative_check(p, InitialPair(0, x0), cand, k, direction, concept=concept)
        for a, b in ((chk.first_order, chk.fd_first), (chk.second_order, chk.fd_second)):
            worst = max(worst, abs(a - b) / max(1.0, abs(a), abs(b)))
        agree += chk.agrees(1e-6)
        rays += 1
    ok = agree == 100
    record(12, ok, f"{agree}/100 rays agree, worst relative gap {worst:.2g}")
    assert ok
