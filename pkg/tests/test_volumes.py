import math

import numpy as np
import pytest

from snmcache import InfiniteMomentError, VolumeDistribution


def test_pareto_mean():
    assert VolumeDistribution.pareto(3.0, v_min=2.0).mean() == pytest.approx(3.0)


def test_pareto_from_mean():
    d = VolumeDistribution.pareto(2.5, mean=3.0)
    assert d.v_min == pytest.approx(1.8)
    assert d.mean() == pytest.approx(3.0)


def test_deterministic_second_moment():
    assert VolumeDistribution.deterministic(5.0).second_moment() == pytest.approx(25.0)


def test_empirical_moments():
    d = VolumeDistribution.empirical([1.0, 2.0, 3.0, 6.0])
    assert d.mean() == pytest.approx(3.0)
    assert d.second_moment() == pytest.approx((1 + 4 + 9 + 36) / 4)


def test_infinite_moments():
    with pytest.raises(InfiniteMomentError):
        VolumeDistribution.pareto(1.0, v_min=1.0).mean()
    with pytest.raises(InfiniteMomentError):
        VolumeDistribution.pareto(2.0, v_min=1.0).second_moment()
    # truncation keeps every moment finite
    assert math.isfinite(VolumeDistribution.truncated_pareto(1.5, 100.0, v_min=1.0).second_moment())


def test_deterministic_mgf():
    d = VolumeDistribution.deterministic(1.0)
    assert float(d.mgf(-1.0)) == pytest.approx(math.exp(-1.0))


@pytest.mark.parametrize("d", [
    VolumeDistribution.deterministic(4.0),
    VolumeDistribution.pareto(3.0, v_min=2.0),
    VolumeDistribution.truncated_pareto(2.5, 50.0, v_min=1.0),
    VolumeDistribution.empirical([1, 2, 2, 9]),
])
def test_mgf_at_zero_is_one(d):
    assert float(d.mgf(0.0)) == pytest.approx(1.0, abs=1e-12)


def test_pareto_mgf_rejects_positive_argument():
    with pytest.raises(ValueError):
        VolumeDistribution.pareto(3.0, v_min=2.0).mgf(0.1)


def test_pareto_mgf_monte_carlo():
    beta, vmin, x = 3.0, 2.0, -0.5
    rng = np.random.default_rng(2024)
    v = vmin * rng.random(10_000_000) ** (-1.0 / beta)
    f = np.exp(x * v)
    se = f.std(ddof=1) / math.sqrt(len(f))
    exact = float(VolumeDistribution.pareto(beta, v_min=vmin).mgf(x))
    assert abs(exact - f.mean()) < 3 * se
    g = v * f
    se_g = g.std(ddof=1) / math.sqrt(len(g))
    assert abs(float(VolumeDistribution.pareto(beta, v_min=vmin).mgf_derivative(x)) - g.mean()) < 3 * se_g


@pytest.mark.parametrize("d", [
    VolumeDistribution.pareto(2.1, mean=3.0),
    VolumeDistribution.pareto(3.0, v_min=2.0),
    VolumeDistribution.truncated_pareto(2.5, 10.0, mean=1.61),
])
def test_mgf_monotone_and_derivative(d):
    x = -np.geomspace(1e-4, 5.0, 40)[::-1]
    m = np.asarray(d.mgf(x))
    assert np.all(np.diff(m) >= 0)
    h = 1e-5 * np.abs(x)
    fd = (np.asarray(d.mgf(x + h)) - np.asarray(d.mgf(x - h))) / (2 * h)
    assert np.allclose(np.asarray(d.mgf_derivative(x)), fd, rtol=1e-6)


def test_truncation_at_huge_cap_matches_pareto():
    a = VolumeDistribution.pareto(2.5, v_min=1.8)
    b = VolumeDistribution.truncated_pareto(2.5, 1e12, v_min=1.8)
    assert b.mean() == pytest.approx(a.mean(), rel=1e-6)
    for x in (-0.01, -0.3, -2.0):
        assert float(b.mgf(x)) == pytest.approx(float(a.mgf(x)), rel=1e-6)


@pytest.mark.parametrize("d", [
    VolumeDistribution.pareto(2.1, mean=3.0),
    VolumeDistribution.pareto(4.0, mean=3.0),
    VolumeDistribution.truncated_pareto(2.5, 10.0, mean=1.61),
])
def test_complement_table_matches_direct_evaluation(d):
    # c0 = E[1 - e^{-xV}], c1 = E[V (1 - e^{-xV})]; the direct route cancels below ~1e-4
    x = np.geomspace(1e-4, 1.0, 30)
    c0, c1 = d.laplace_complement(x)
    assert np.allclose(c0, 1.0 - np.asarray(d.mgf(-x)), rtol=1e-6, atol=1e-15)
    assert np.allclose(c1, d.mean() - np.asarray(d.mgf_derivative(-x)), rtol=1e-6, atol=1e-15)


def test_small_argument_complement_is_linear():
    d = VolumeDistribution.pareto(3.0, mean=3.0)
    c0, c1 = d.laplace_complement(np.array([1e-12]))
    assert c0[0] == pytest.approx(1e-12 * d.mean(), rel=1e-4)
    assert c1[0] == pytest.approx(1e-12 * d.second_moment(), rel=1e-3)


def test_sample_mean(rng):
    d = VolumeDistribution.pareto(3.0, mean=3.0)
    s = d.sample(rng, 400_000)
    assert s.min() >= d.v_min
    assert s.mean() == pytest.approx(3.0, rel=0.02)


def test_expectation_nodes_integrate_moments():
    d = VolumeDistribution.pareto(3.0, mean=3.0)
    v, w = d.expectation_nodes(64)
    assert w.sum() == pytest.approx(1.0, rel=1e-10)
    assert w @ v == pytest.approx(3.0, rel=1e-6)
    assert w @ np.exp(-0.3 * v) == pytest.approx(float(d.mgf(-0.3)), rel=1e-8)


def test_round_trip_dict():
    d = VolumeDistribution.truncated_pareto(2.5, 10.0, mean=1.61)
    e = VolumeDistribution.from_dict(d.to_dict())
    assert e.mean() == pytest.approx(d.mean(), rel=1e-12)
