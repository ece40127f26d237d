import math

import numpy as np
import pytest

from wiet.numerics import (BracketError, DomainError, NumericsError, RngStream, bessel_i0, bessel_j0,
                           dawson, erfi, find_root, gaussian, lambert_w0, log_bessel_i0)

# reference values from mpmath at 40 digits
W0_REF = [(-0.3, -0.48940222718021493357), (0.01, 0.0099014738435950120894),
          (0.5, 0.35173371124919582602), (1.0, 0.567143290409783873),
          (3.0, 1.04990889496403996), (10.0, 1.7455280027406993831),
          (100.0, 3.3856301402900501849), (1e4, 7.2318460380933727065)]
I0_REF = [(0.5, 1.0634833707413235193), (1.0, 1.2660658777520083356), (5.0, 27.239871823604446895),
          (20.0, 43558282.559553533272), (50.0, 2.9325537838493363267e+20),
          (200.0, 2.0396871734097246195e+85)]
J0_REF = [(0.5, 0.93846980724081290423), (1.0, 0.76519768655796655145),
          (5.0, -0.17759677131433830435), (20.0, 0.16702466434058315473),
          (50.0, 0.055812327669251815005), (200.0, -0.015437439930565091592)]
ERFI_REF = [(0.1, 0.11321517416959979929), (1.0, 1.650425758797542876),
            (2.5, 130.39575501324692681), (5.0, 8298273880.6768035161),
            (10.0, 1.5243074227086696994e+42), (20.0, 1.4747975396287862024e+172)]
DAWSON_REF = [(0.1, 0.099335992397852866508), (1.0, 0.53807950691276841914),
              (2.5, 0.22308372216743548113), (5.0, 0.10213407442427683544),
              (10.0, 0.050253847187598528033), (100.0, 0.0050002500375093782827)]


def test_lambert_trivial_points():
    assert lambert_w0(0.0) == 0.0
    assert lambert_w0(math.e) == pytest.approx(1.0, rel=1e-14)
    assert lambert_w0(1.0) == pytest.approx(0.5671432904, abs=1e-10)
    assert lambert_w0(-1 / math.e) == pytest.approx(-1.0, abs=1e-7)


@pytest.mark.parametrize("x,w", W0_REF)
def test_lambert_reference(x, w):
    assert lambert_w0(x) == pytest.approx(w, rel=1e-13)


def test_lambert_round_trip():
    x = np.concatenate([np.linspace(-1 / math.e + 1e-6, 0, 200)[:-1],
                        np.geomspace(1e-12, 1e6, 9800)])
    w = lambert_w0(x)
    resid = np.abs(w * np.exp(w) - x) / np.maximum(np.abs(x), 1e-300)
    assert resid.max() <= 1e-12


def test_lambert_domain():
    with pytest.raises(DomainError):
        lambert_w0(-0.5)
    assert issubclass(DomainError, NumericsError)


@pytest.mark.parametrize("x,v", I0_REF)
def test_bessel_i0_reference(x, v):
    assert bessel_i0(x) == pytest.approx(v, rel=1e-10)
    assert bessel_i0(-x) == bessel_i0(x)
    assert log_bessel_i0(x) == pytest.approx(math.log(v), rel=1e-12)


def test_bessel_i0_identities():
    assert bessel_i0(0.0) == 1.0
    x = np.linspace(-30, 30, 601)
    assert np.all(bessel_i0(x) >= 1.0)


def test_bessel_i0_overflow():
    with pytest.raises(NumericsError):
        bessel_i0(800.0)


@pytest.mark.parametrize("x,v", J0_REF)
def test_bessel_j0_reference(x, v):
    assert bessel_j0(x) == pytest.approx(v, rel=1e-9, abs=1e-12)


def test_bessel_j0_root_and_bound():
    assert bessel_j0(0.0) == 1.0
    assert abs(bessel_j0(2.4048255577)) <= 1e-9
    x = np.linspace(0, 300, 30001)
    assert np.all(np.abs(bessel_j0(x)) <= 1.0)


@pytest.mark.parametrize("x,v", ERFI_REF)
def test_erfi_reference(x, v):
    assert erfi(x) == pytest.approx(v, rel=1e-9)
    assert erfi(-x) == -erfi(x)


def test_erfi_zero_and_overflow():
    assert erfi(0.0) == 0.0
    with pytest.raises(NumericsError):
        erfi(27.0)


@pytest.mark.parametrize("x,v", DAWSON_REF)
def test_dawson_reference(x, v):
    assert dawson(x) == pytest.approx(v, rel=1e-10)


def test_rng_determinism_and_range():
    a = gaussian(RngStream(1, 0), 3)
    b = gaussian(RngStream(1, 0), 3)
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(2**64)
    assert RngStream(5, 2**64 - 1).child(1).stream_id == 0


def test_rng_statistics():
    n = 100_000
    x = gaussian(RngStream(7, 0), n)
    y = gaussian(RngStream(7, 1), n)
    assert abs(x.mean()) < 4 / math.sqrt(n)
    assert 0.95 <= x.var() <= 1.05
    assert abs(np.corrcoef(x, y)[0, 1]) < 0.02


def test_find_root():
    assert find_root(lambda x: x - 1, 0, 2) == pytest.approx(1.0, abs=1e-14)
    assert find_root(lambda x: x * x - 2, 0, 2) == pytest.approx(1.4142135624, abs=1e-10)
    with pytest.raises(BracketError):
        find_root(lambda x: x + 1, 0, 2)
