import math

import pytest

import affinelab as al


def test_small_gap_fraction():
    assert abs(al.small_gap_fraction(1e5) - 3 / math.pi**2) < 0.01


def test_gaps_sum_to_count():
    g = al.gaps(1000)
    assert len(g) == 1000
    assert sum(g) == pytest.approx(1000.0)


def test_gap_length_matches_approximation():
    assert al.gap_length(100, 0.3) == pytest.approx(1.5121240788893708, rel=1e-12)
    assert al.gap_length_approx(100, 0.3) == pytest.approx(1.5117072061832235, rel=1e-12)


def test_haar_siegel_mean():
    r = math.sqrt(0.5 / math.pi)
    xs = al.haar_samples(20000, seed=3)
    mean = sum(x.count_in_disc(r) for x in xs) / len(xs)
    assert abs(mean - 0.5) < 0.03


def test_lattice_flows():
    x = al.AffineLattice(al.Mat2(), (0.3, 0.1))
    assert x.alpha0() == pytest.approx(1.0)
    assert x.geodesic(2 * math.log(10)).alpha0() == pytest.approx(10.0)
    value, status = x.triangle()
    assert status in ("finite", "zero", "overflow")


def test_billiard():
    t = al.EllipseTable(2.0, 1.0, 0.5)
    assert al.reduction(0.75, t)["l"] == pytest.approx(16.151246559827386, rel=1e-10)
    assert al.det_Mpsi(0.75, t) != 0.0
    orbit = al.billiard_orbit(0.3, t, n=5000, seed=1)
    assert orbit["max_lambda_drift"] < 1e-9
    assert orbit["barrier_hits"] > 0
    with pytest.raises(ValueError):
        al.EllipseTable(1.0, 2.0, 0.5)


def test_lenses():
    p, v = al.eaton_exit((-1.0, 0.0), (1.0, 0.0), 1.0)
    assert v == pytest.approx((-1.0, 0.0))
    assert al.admissible(al.Mat2(), 0.25)
    assert not al.admissible(al.Mat2(), 0.6)
    assert al.trapped(al.Mat2(), 0.25, 1.1)
    ex, unimodular = al.lyapunov_W(al.Mat2(), 0.25, 1.3, steps=50000)
    assert unimodular
    assert abs(ex - 0.5) < 0.1
    with pytest.raises(ValueError):
        al.deviation_exponent(al.Mat2(), 0.25, 0.0)
