import math

import numpy as np
import pytest

from wiet.channel import LosLink, los_gain
from wiet.nearfield import (C_LIGHT, ArrayGeometry, Room, _branches, far_codebook, fnbs_scan,
                            fraunhofer, gain_over_farfield, optimize_placement,
                            received_power_mrt, ula, worst_case_power,
                            worst_case_power_closed_form)


def test_fraunhofer():
    assert fraunhofer(0.2, C_LIGHT / 2.4e9) == pytest.approx(0.64, rel=0.01)
    assert fraunhofer(0.2, C_LIGHT / 60e9) == pytest.approx(16.0, rel=0.01)
    assert fraunhofer(0.4, 0.1) == pytest.approx(4 * fraunhofer(0.2, 0.1))
    with pytest.raises(ValueError):
        fraunhofer(0.0, 0.1)


def test_room_validation():
    with pytest.raises(ValueError):
        Room(1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        Room(1.0, 1.0, 1.0, z0=0.6)
    assert Room(4.0, 2.0, 3.0, z0=-0.5).lzp == pytest.approx(4.0)


def test_array_aperture():
    a = ula(8, 0.01)
    assert a.aperture == pytest.approx(7 * 0.005)
    with pytest.raises(ValueError):
        ArrayGeometry(np.zeros((2, 3)) + [[0, 0, 0], [1, 0, 0]], 0.1, aperture=2.0)


def test_received_power_mrt():
    assert received_power_mrt([[0, 0, 0]], [1, 0, 0]) == pytest.approx(1.0)
    assert received_power_mrt([[1, 0, 0], [-1, 0, 0]], [0, 2, 0], p_tx=2.0, c=0.5) == \
        pytest.approx(2 * 2.0 * 0.5 / 5.0)
    rng = np.random.default_rng(0)
    tx = rng.uniform(-1, 1, (5, 3))
    rx = np.array([0.3, 4.0, -0.2])
    link = LosLink(c=3e-3, lam=0.1)
    g = los_gain(np.linalg.norm(tx - rx, axis=1), link)
    assert received_power_mrt(tx, rx, 1.7, link.c) == pytest.approx(1.7 * np.sum(np.abs(g) ** 2))
    with pytest.raises(ValueError):
        received_power_mrt([[0, 0, 0]], [0, 0, 0])


@pytest.mark.parametrize("qb", [1.25, 3.0])
def test_branch_continuity(qb):
    lx, lzp = 2.0, 1.0
    ly = math.sqrt((qb * lx**2 - lzp**2) / 4.0)
    q, b1, b2, b3 = _branches(lx, ly, lzp)
    assert q == pytest.approx(qb, rel=1e-14)
    lo, hi = (b1, b2) if qb == 1.25 else (b2, b3)
    assert lo == pytest.approx(hi, rel=1e-12)


def test_cube_room_matches_oracle():
    room = Room(4.0, 4.0, 4.0, shell=0.0)
    pos, val = optimize_placement(room)
    assert val == pytest.approx(worst_case_power_closed_form(room), rel=1e-6)
    assert pos[0] == pytest.approx(-pos[1])


@pytest.mark.parametrize("dims", [(1.0, 0.2, 0.3), (3.0, 1.5, 2.5), (2.0, 0.6, 1.0)])
def test_closed_form_matches_numeric(dims):
    room = Room(*dims, shell=0.0)
    _, val = optimize_placement(room)
    assert val == pytest.approx(worst_case_power_closed_form(room), rel=1e-6)


def test_deep_room_farfield_placement():
    room = Room(1.0, 8.0, 1.0, shell=0.0)
    pos, val = optimize_placement(room)
    assert abs(pos[0]) < 1e-4
    assert val == pytest.approx(worst_case_power_closed_form(room), rel=1e-6)


def test_single_antenna_centre():
    pos, val = optimize_placement(Room(2.0, 1.0, 1.0, shell=0.0), n_t=1)
    assert pos[0] == 0.0
    assert val == pytest.approx(worst_case_power(Room(2.0, 1.0, 1.0, shell=0.0), [0.0])[0])


def test_gain_bounds():
    rng = np.random.default_rng(1)
    for _ in range(200):
        lx, ly, lz = np.exp(rng.uniform(0, math.log(20), 3))
        g = gain_over_farfield(Room(lx, ly, lz))
        assert 1.0 <= g <= 3.0 + 1e-9
    assert gain_over_farfield(Room(1.0, 1e-3, 1e-3)) == pytest.approx(3.0, rel=0.01)
    assert gain_over_farfield(Room(1.0, 20.0, 20.0)) == pytest.approx(1.0)


def test_fnbs_boresight_far_field():
    arr = ula(16, 0.01)
    d_f = fraunhofer(arr.aperture, arr.lam)
    res = fnbs_scan(arr, [0.0, 50 * d_f, 0.0], n_far=64)
    _, angles = far_codebook(arr, 64)
    assert abs(angles[res["far_index"]]) == pytest.approx(np.min(np.abs(angles)))
    assert res["near_power"] >= res["far_power"]


def test_fnbs_near_refinement_improves():
    arr = ula(64, 0.01)
    d_f = fraunhofer(arr.aperture, arr.lam)
    th = math.radians(20)
    rx = 0.5 * d_f * np.array([math.sin(th), math.cos(th), 0.0])
    res = fnbs_scan(arr, rx)
    assert res["near_power"] > 1.05 * res["far_power"]
    assert res["focus"] is not None
    assert res["trace"].size == 64 + 1 + 9 * 64
