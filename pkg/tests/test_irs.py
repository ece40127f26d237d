import math

import numpy as np
import pytest

from wiet import irs
from wiet.channel import dbm2watt
from wiet.ehmodels import LinearEh
from wiet.irs import (HybridTx, IrsState, LosEnv, ModeSchedule, ModeScenario, beam_sharing,
                      cascaded, effective_channel, facing, fd_min_power, mode_channels, mode_eval,
                      mode_sim, mtbs_scan, multi_focus, pa_mixed, ps_metrics, random_bsa_env,
                      random_irs_problem, random_mtbs_env, random_multifocus_env, realize_hybrid,
                      scan_codebook, solve_hp_pb_ps, tiles)
from wiet.numerics import RngStream

pytestmark = pytest.mark.filterwarnings("ignore:Solution may be inaccurate")


def _cn(rng, shape):
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / math.sqrt(2)


# ----------------------------------------------------------------------------
# States and channels
# ----------------------------------------------------------------------------
def test_state_quantisation_and_unit_modulus():
    rng = np.random.default_rng(0)
    for bits in (1, 2, 3):
        s = IrsState.random(64, rng, bits)
        assert s.on_lattice()
        assert np.allclose(np.abs(s.diag), 1.0)
        assert len(np.unique(np.round(s.phases, 9))) <= 2**bits
    s = IrsState([0.4, 2.0, 4.0], bits=1)
    assert np.allclose(s.phases, [0.0, math.pi, math.pi])
    assert IrsState([7.0]).phases[0] == pytest.approx(7.0 - 2 * math.pi)
    assert IrsState([1.0]).lattice() is None


def test_effective_channel_cases():
    rng = np.random.default_rng(1)
    h_d, h_r, h = _cn(rng, (2, 4)), _cn(rng, (2, 5)), _cn(rng, (5, 4))
    hk = cascaded(h_r, h)
    st = IrsState(np.zeros(5))
    eff = effective_channel(h_d, hk, st)
    assert np.allclose(eff, h_d.conj() + hk.sum(axis=1))
    assert np.allclose(effective_channel(h_d, np.zeros_like(hk), st), h_d.conj())
    st = IrsState(rng.uniform(0, 2 * math.pi, 5))
    eff = effective_channel(h_d, hk, st)
    for k in range(2):
        for m in range(4):
            ref = np.conj(h_d[k, m]) + sum(np.exp(1j * st.phases[n]) * np.conj(h_r[k, n]) * h[n, m]
                                           for n in range(5))
            assert eff[k, m] == pytest.approx(ref)
    with pytest.raises(ValueError):
        effective_channel(h_d, hk, IrsState(np.zeros(3)))


def test_ps_metrics():
    rng = np.random.default_rng(2)
    rows = _cn(rng, (1, 4))
    tx = HybridTx(np.exp(1j * rng.uniform(0, 6, (4, 2))), _cn(rng, (2, 1)))
    s2, sc2 = 0.1, 0.2
    m = ps_metrics(rows, tx, 1.0, s2, sc2)
    assert m["e"][0] == 0.0
    rho = 0.3
    m = ps_metrics(rows, tx, rho, s2, sc2, eh=LinearEh(0.5))
    sig = abs(rows[0] @ tx.f_r @ tx.f_b[:, 0]) ** 2
    assert m["sinr"][0] == pytest.approx(rho * sig / (rho * s2 + sc2))
    assert m["e_h"][0] == pytest.approx(0.5 * (1 - rho) * sig)
    rows = _cn(rng, (2, 4))
    tx = HybridTx(np.exp(1j * rng.uniform(0, 6, (4, 3))), _cn(rng, (3, 2)))
    m = ps_metrics(rows, tx, [0.4, 0.7], s2, sc2)
    b = tx.f_r @ tx.f_b
    for k, r in enumerate([0.4, 0.7]):
        sig = abs(rows[k] @ b[:, k]) ** 2
        itf = abs(rows[k] @ b[:, 1 - k]) ** 2
        assert m["sinr"][k] == pytest.approx(r * sig / (r * (itf + s2) + sc2))
        assert m["e"][k] == pytest.approx((1 - r) * (sig + itf))
    with pytest.raises(ValueError):
        ps_metrics(rows, tx, 1.5, s2, sc2)


def test_realize_hybrid_exact():
    rng = np.random.default_rng(3)
    beams = _cn(rng, (8, 2))
    tx = realize_hybrid(beams, 5)
    assert np.allclose(np.abs(tx.f_r), 1.0)
    assert np.allclose(tx.beams, beams)
    with pytest.raises(ValueError):
        realize_hybrid(beams, 3)


# ----------------------------------------------------------------------------
# Hybrid precoding with passive beamforming
# ----------------------------------------------------------------------------
@pytest.fixture(scope="module")
def hp_instance():
    return random_irs_problem(RngStream(4, 0), n_e=64, m=8, k=2, n_rf=4)


def _feasible(pb, sol):
    m = ps_metrics(pb.rows(sol.state), sol.tx, sol.rho, pb.sigma2, pb.sigma_c2)
    return np.all(m["sinr"] >= pb.gamma * (1 - 1e-6)) and np.all(m["e"] >= pb.q * (1 - 1e-6))


def test_hp_solution_feasible_and_unit_modulus(hp_instance):
    pb = hp_instance
    sol = solve_hp_pb_ps(pb, stream=RngStream(4, 1))
    assert _feasible(pb, sol)
    assert np.allclose(np.abs(sol.tx.f_r), 1.0)
    assert sol.tx.l == pb.n_rf
    assert all(b <= a * (1 + 1e-9) for a, b in zip(sol.trace, sol.trace[1:]))


def test_hp_no_irs_dominates_fd(hp_instance):
    pb = hp_instance.subset(0)
    hyb = solve_hp_pb_ps(pb, state=IrsState(np.zeros(0)))
    fd = fd_min_power(pb, IrsState(np.zeros(0)))
    assert hyb.p_sum >= fd.p_sum * (1 - 1e-6)


def test_hp_gamma_monotone(hp_instance):
    st = IrsState(np.zeros(hp_instance.n_e))
    lo = fd_min_power(hp_instance.with_(gamma=np.full(2, 1.0)), st).p_sum
    hi = fd_min_power(hp_instance.with_(gamma=np.full(2, 10.0)), st).p_sum
    assert hi >= lo * (1 - 1e-6)


def test_hp_optimised_beats_random(hp_instance):
    st = IrsState.random(64, np.random.default_rng(9))
    r = solve_hp_pb_ps(hp_instance, state=st, optimize_irs=False)
    o = solve_hp_pb_ps(hp_instance, start=r)
    assert o.p_sum <= r.p_sum * (1 + 1e-9)
    assert np.array_equal(r.state.phases, st.phases)


def test_hp_infeasible():
    # identical channels cannot both reach an SINR of 10
    h = np.tile(_cn(np.random.default_rng(5), (1, 4)), (2, 1))
    pb = irs.IrsSwiptProblem(h, np.zeros((2, 0)), np.zeros((0, 4)), 10.0, 1e-6, n_rf=2)
    with pytest.raises(irs.InfeasibleError):
        solve_hp_pb_ps(pb, state=IrsState(np.zeros(0)))


def test_hp_deterministic():
    a = random_irs_problem(RngStream(6, 0), n_e=16, m=6, k=2, n_rf=4)
    b = random_irs_problem(RngStream(6, 0), n_e=16, m=6, k=2, n_rf=4)
    assert np.array_equal(a.h_inc, b.h_inc) and np.array_equal(a.h_d, b.h_d)
    assert np.array_equal(a.subset(8).h_r, a.h_r[:, :8])


# ----------------------------------------------------------------------------
# Operating modes
# ----------------------------------------------------------------------------
def test_mode_schedule_validation():
    with pytest.raises(ValueError):
        ModeSchedule("V")
    with pytest.raises(ValueError):
        ModeSchedule("I.A", tau=1.0)
    for mode in irs.MODES:
        total = sum(d for d, _, _ in ModeSchedule(mode, 0.3, 0.4, 0.6).subslots())
        assert total == pytest.approx(1.0)


@pytest.fixture(scope="module")
def mode_setup():
    scen = ModeScenario()
    return scen, mode_channels(scen, RngStream(7, 0))


def test_mode_ia_vanishing_wet(mode_setup):
    scen, ch = mode_setup
    p = float(dbm2watt(48))
    h = [mode_eval(ModeSchedule("I.A", tau=t), scen, ch, p)["rx_harvest"]
         for t in (0.5, 0.9, 0.99, 0.999)]
    assert all(b < a for a, b in zip(h, h[1:]))
    assert h[-1] < 1e-3 * h[0] * 10


def test_mode_sim_orderings(mode_setup):
    scen, ch = mode_setup
    res = mode_sim(scen, ch, float(dbm2watt(50)))
    assert all(res[m] is not None for m in irs.MODES)
    best = max(irs.MODES, key=lambda m: res[m]["irs_harvest"])
    assert best == "III"
    assert res["I.A"]["rx_harvest"] == pytest.approx(res["I.C"]["rx_harvest"], rel=1e-6)
    assert res["III"]["rx_harvest"] == pytest.approx(res["IV"]["rx_harvest"], rel=1e-6)
    for m in irs.MODES:
        assert res[m]["feasible"]


def test_mode_eval_matches_sim(mode_setup):
    scen, ch = mode_setup
    p = float(dbm2watt(50))
    res = mode_sim(scen, ch, p, modes=("II",))
    m = mode_eval(res["II"]["schedule"], scen, ch, p)
    assert m["snr"] == pytest.approx(res["II"]["snr"], rel=1e-9)
    assert m["irs_harvest"] == pytest.approx(res["II"]["irs_harvest"], rel=1e-9)


# ----------------------------------------------------------------------------
# Power-feedback algorithms
# ----------------------------------------------------------------------------
def test_los_env_hop_law():
    nodes = {"a": irs.Node((0.0, 1.0, 0.0)), "b": irs.Node((0.0, 3.0, 0.0))}
    env = LosEnv(nodes, 2, 2)
    direct, cas = env.link("a", "b")
    assert abs(direct) == pytest.approx(math.sqrt(env.c) / 2.0)
    d1 = np.linalg.norm(env.elements - [0, 1, 0], axis=1)
    d2 = np.linalg.norm(env.elements - [0, 3, 0], axis=1)
    assert np.allclose(np.abs(cas), env.c / (d1 * d2))
    env2 = env.blocked_copy([("a", "b")])
    assert env2.link("a", "b")[0] == 0
    # pattern peak gain
    n = facing((0.0, 1.0, 0.0), q=20.0)
    assert n.gain(np.array([0.0, -1.0, 0.0])) == pytest.approx(42.0)


def test_tiles_partition():
    env = random_mtbs_env(RngStream(8, 0))
    parts = tiles(env, (4, 4))
    assert len(parts) == 16
    assert np.array_equal(np.sort(np.concatenate(parts)), np.arange(env.n))
    with pytest.raises(ValueError):
        tiles(env, (3, 4))


def test_scan_codebook_on_lattice():
    cb = scan_codebook((4, 4), bits=1)
    assert cb.shape[1] == 16
    assert np.all(np.isin(np.round(cb, 9), np.round([0.0, math.pi], 9)))
    assert len(np.unique(cb, axis=0)) == cb.shape[0]


def test_mtbs_monotone_and_beats_random():
    rng = np.random.default_rng(10)
    for s in range(5):
        env = random_mtbs_env(RngStream(9, s))
        res = mtbs_scan(env, "tx", "rx")
        assert np.all(np.diff(res.trace) >= -1e-18 * res.trace[-1])
        assert res.state.on_lattice()
        rand = np.mean([env.power("tx", "rx", IrsState.random(env.n, rng, 1)) for _ in range(20)])
        assert res.trace[-1] > rand


def test_mtbs_single_tile_is_exhaustive():
    env = random_mtbs_env(RngStream(11, 0), rows=4, cols=4)
    cb = scan_codebook((4, 4))
    res = mtbs_scan(env, "tx", "rx", tile=(4, 4), codebook=cb, n_sweeps=1)
    best = max(env.power("tx", "rx", c) for c in np.vstack([np.zeros(16), cb]))
    assert res.trace[-1] == pytest.approx(best, rel=1e-12)


def test_mtbs_blocked_recovers():
    env = random_mtbs_env(RngStream(12, 0))
    blk = env.blocked_copy([("tx", "rx")])
    a = mtbs_scan(env, "tx", "rx").trace[-1]
    b = mtbs_scan(blk, "tx", "rx").trace[-1]
    assert b >= 0.95 * a


def test_multi_focus_single_link_and_validation():
    env = random_multifocus_env(RngStream(13, 0))
    pairs = [("tx", "er1"), ("tx", "er2")]
    ref = IrsState(irs.focus_phases(env, "tx", "er1"), 1)
    for tech in irs.TECHNIQUES:
        st = multi_focus(env, pairs, tech, [1.0, 0.0], stream=np.random.default_rng(0))
        assert np.allclose(st.phases, ref.phases)
    with pytest.raises(ValueError):
        multi_focus(env, pairs, "XX", [0.5, 0.5])
    with pytest.raises(ValueError):
        multi_focus(env, pairs, "PA", [0.5, 0.6])


def test_multi_focus_weight_monotone():
    env = random_multifocus_env(RngStream(14, 0))
    pairs = [("tx", "er1"), ("tx", "er2")]
    for tech in ("PA", "ITD"):
        p = [env.power("tx", "er1", multi_focus(env, pairs, tech, [a, 1 - a]))
             for a in (0.2, 0.5, 0.8)]
        assert p[0] < p[1] < p[2]
    p = [np.mean([env.power("tx", "er1", multi_focus(env, pairs, "RUI", [a, 1 - a],
                                                     stream=np.random.default_rng(s)))
                  for s in range(10)]) for a in (0.2, 0.8)]
    assert p[0] < p[1]


def test_multi_focus_symmetric_equal():
    env = random_multifocus_env(RngStream(15, 0), symmetric=True)
    pairs = [("tx", "er1"), ("tx", "er2")]
    for tech in ("PA", "ITD"):
        st = multi_focus(env, pairs, tech, [0.5, 0.5])
        p1, p2 = env.power("tx", "er1", st), env.power("tx", "er2", st)
        assert p1 == pytest.approx(p2, rel=1e-6)
    r = [multi_focus(env, pairs, "RUI", [0.5, 0.5], stream=np.random.default_rng(s))
         for s in range(40)]
    p1 = np.mean([env.power("tx", "er1", s) for s in r])
    p2 = np.mean([env.power("tx", "er2", s) for s in r])
    assert p1 == pytest.approx(p2, rel=0.1)


def test_beam_sharing_orderings():
    for s in range(5):
        env = random_bsa_env(RngStream(16, s))
        res = beam_sharing(env)
        m, base = res.info["metrics"], res.info["pa_mixed"]
        assert m["ptx_du"] < base["ptx_du"]
        assert m["du_sinr"] >= base["du_sinr"]
        assert res.state.on_lattice()


def test_beam_sharing_unconstrained_not_worse_than_pa():
    env = random_bsa_env(RngStream(17, 0))
    res = beam_sharing(env, threshold_db=math.inf)
    m, base = res.info["metrics"], res.info["pa_mixed"]
    w = (1 / base["dtx_du"], 1 / base["ptx_pu"])
    assert w[0] * m["dtx_du"] + w[1] * m["ptx_pu"] >= 2.0 * (1 - 1e-12)
    assert res.info["feasible"]
    assert np.allclose(pa_mixed(env).phases, multi_focus(
        env, [("dtx", "du"), ("ptx", "pu")], "PA", [0.5, 0.5]).phases)
