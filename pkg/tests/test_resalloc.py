import math

import numpy as np
import pytest

from wiet.ehmodels import LinearEh, SigmoidEh
from wiet.resalloc import (DEFAULT_SIGMOID, InfeasibleError, SwiptProblem, SwiptSolution,
                           brute_force_tiny, evaluate, mismatch_eval, random_problem, solve,
                           wit_sweep, zf_baseline, zf_directions)

pytestmark = pytest.mark.filterwarnings("ignore:Solution may be inaccurate")


def _cn(rng, shape, scale=1.0):
    return scale * (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / math.sqrt(2)


def test_problem_validation():
    g = np.ones((2, 3), complex)
    with pytest.raises(ValueError):
        SwiptProblem(np.ones((3, 2)), [1 / 3] * 3, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        SwiptProblem(g, [0.2, 0.2], 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        SwiptProblem(g, [0.5, 0.5], 1.0, 0.0, 0.0, zeta=0.5)
    with pytest.raises(TypeError):
        SwiptProblem(g, [0.5, 0.5], 1.0, 0.0, 0.0, eh="linear")


def test_evaluate_mrt_rate():
    rng = np.random.default_rng(0)
    g = _cn(rng, (1, 4))
    p, s2 = 2.0, 0.1
    pb = SwiptProblem(g, [1.0], 5.0, 0.0, 0.0, noise=[s2])
    w = math.sqrt(p) * g[0] / np.linalg.norm(g[0])
    m = evaluate(pb, SwiptSolution(np.outer(w, w.conj())[None], np.zeros((4, 4))))
    assert m["rate"][0] == pytest.approx(math.log2(1 + p * np.linalg.norm(g) ** 2 / s2))
    assert m["p_tx"] == pytest.approx(p)


def test_evaluate_zero_solution():
    pb = SwiptProblem(np.ones((2, 3)), [0.5, 0.5], 1.0, 0.0, 0.0, p_c=0.7)
    m = evaluate(pb, SwiptSolution.zeros(2, 3))
    assert m["r_ws"] == 0 and m["p_eh"] == 0 and m["u_wit"] == 0 and m["p_tx"] == 0
    assert m["p_d"] == pytest.approx(0.7)


def test_evaluate_hand_expansion():
    rng = np.random.default_rng(1)
    g = _cn(rng, (2, 3))
    w = _cn(rng, (2, 3))
    v = _cn(rng, 3)
    eta, s2, pc, zeta = 0.6, 0.05, 0.3, 2.0
    pb = SwiptProblem(g, [0.3, 0.7], 100.0, 0.0, 0.0, p_c=pc, zeta=zeta, eh=LinearEh(eta),
                      noise=[s2, s2])
    sol = SwiptSolution(np.array([np.outer(x, x.conj()) for x in w]), np.outer(v, v.conj()))
    m = evaluate(pb, sol)
    q = lambda gk, x: abs(np.vdot(gk, x)) ** 2  # |g^H x|^2
    rates, rf = [], []
    for k in range(2):
        sig = q(g[k], w[k])
        itf = q(g[k], w[1 - k]) + q(g[k], v)
        rates.append(math.log2(1 + sig / (itf + s2)))
        rf.append(sig + itf)
    p_tx = sum(np.linalg.norm(x) ** 2 for x in w) + np.linalg.norm(v) ** 2
    p_eh = eta * sum(rf)
    assert np.allclose(m["rate"], rates)
    assert np.allclose(m["p_rf"], rf)
    assert m["p_tx"] == pytest.approx(p_tx)
    assert m["u_wit"] == pytest.approx((0.3 * rates[0] + 0.7 * rates[1]) / (pc + zeta * p_tx - p_eh))
    assert m["u_wet"] == pytest.approx(p_eh / (pc + zeta * p_tx))
    with pytest.raises(ValueError):
        evaluate(pb, SwiptSolution.zeros(2, 4))


def test_zf_directions():
    rng = np.random.default_rng(2)
    g = _cn(rng, (1, 4))
    assert np.allclose(np.abs(zf_directions(g)[0]), np.abs(g[0]) / np.linalg.norm(g[0]))
    g = np.eye(3, dtype=complex)[:2] * np.array([[2.0], [0.5j]])
    d = zf_directions(g)
    assert np.allclose(np.abs(d), np.eye(3)[:2])
    g = _cn(rng, (2, 4))
    d = zf_directions(g)
    leak = abs(np.vdot(g[1], d[0])) ** 2 / np.linalg.norm(g[1]) ** 2
    assert leak < 1e-12
    with pytest.raises(np.linalg.LinAlgError):
        zf_directions(np.array([[1, 1], [2, 2]], complex))


def test_single_user_harvest_max_is_mrt():
    rng = np.random.default_rng(3)
    g = _cn(rng, (1, 3), 1e-3)
    pb = SwiptProblem(g, [1.0], 1.0, 0.0, 0.0, eh=LinearEh(0.5), noise=[1e-9])
    m = evaluate(pb, solve(pb, "harvest_max", restarts=1, stream=rng))
    assert m["p_eh"] == pytest.approx(0.5 * 1.0 * np.linalg.norm(g) ** 2, rel=1e-6)


def test_power_min_matches_brute_force():
    rng = np.random.default_rng(0)
    g = _cn(rng, (1, 2), 1e-3 * math.sqrt(2))
    pb = SwiptProblem(g, [1.0], 0.01, 2.0, 0.0, p_c=0.1, zeta=1.0, noise=[1e-9])
    m = evaluate(pb, solve(pb, "power_min", restarts=1, stream=rng))
    closed = 3.0 * 1e-9 / np.linalg.norm(g) ** 2
    assert m["p_tx"] == pytest.approx(closed, rel=1e-5)
    b = evaluate(pb, brute_force_tiny(pb, "power_min", 16))
    assert m["p_tx"] <= b["p_tx"] <= m["p_tx"] + pb.p_max / 16


def test_brute_force_guards_and_convergence():
    pb = SwiptProblem(np.ones((2, 2)), [0.5, 0.5], 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        brute_force_tiny(pb)
    g = np.array([[1e-3, 0.5e-3j]])
    pb = SwiptProblem(g, [1.0], 1.0, 1.0, 0.0, noise=[1e-9])
    v8 = brute_force_tiny(pb, "sum_rate", 8).info["objective"]
    v16 = brute_force_tiny(pb, "sum_rate", 16).info["objective"]
    assert v16 >= v8 - 1e-12
    closed = math.log2(1 + np.linalg.norm(g) ** 2 / 1e-9)
    assert v16 == pytest.approx(closed, rel=1e-2)


def test_infeasible_raises():
    rng = np.random.default_rng(4)
    pb = SwiptProblem(_cn(rng, (1, 2), 1e-6), [1.0], 1e-3, 30.0, 0.0, noise=[1e-9])
    with pytest.raises(InfeasibleError):
        solve(pb, "wit_eff", restarts=1, stream=rng)


def test_solve_feasible_and_beats_zf():
    rng = np.random.default_rng(5)
    pb = random_problem(rng, n=4, k=2, pmax_dbm=30.0)
    sol = solve(pb, "wit_eff", restarts=1, stream=rng)
    m = evaluate(pb, sol)
    assert m["feasible"]
    assert m["p_tx"] <= pb.p_max * (1 + 1e-9)
    assert np.all(sol.rank_residual >= 0)
    assert sol.info["objective"] >= zf_baseline(pb).info["objective"] - 1e-9


def test_mismatch_zero_when_violated():
    # linear design at mW inputs is far below the sigmoid turn-on point
    rng = np.random.default_rng(6)
    pb = random_problem(rng, n=4, k=2, pmax_dbm=30.0, p_req=1e-6)
    eh = SigmoidEh(psat=0.02, a=6400.0, b=0.003)
    m_lin, m_true = mismatch_eval(pb, eh, restarts=1, stream=rng)
    assert m_lin["feasible"]
    assert not m_true["feasible"] and m_true["u_wit"] == 0.0


def test_wit_sweep_orderings():
    rng = np.random.default_rng(7)
    pb = random_problem(rng, n=6, k=2, pmax_dbm=40.0)
    rows = wit_sweep(pb, DEFAULT_SIGMOID, [0.0, 1e-4, 2e-4], stream=rng)
    lin = [r["wit_eff_linear"] for r in rows]
    assert all(b <= a * (1 + 1e-6) + 1e-9 for a, b in zip(lin, lin[1:]))
    for r in rows:
        # the ZF baseline is designed under the sigmoid harvester
        assert r["wit_eff_sigmoid"] >= r["wit_eff_zf"] * (1 - 1e-6)
        assert r["wit_eff_mismatch"] <= r["wit_eff_sigmoid"] + 1e-9
