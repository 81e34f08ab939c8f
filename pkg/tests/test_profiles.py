import math

import numpy as np
import pytest
from scipy import integrate

from snmcache import PopularityProfile


def test_uniform_density():
    p = PopularityProfile("uniform", 2.0)
    assert p.density(1.0) == pytest.approx(0.5)
    assert p.density(-0.5) == 0.0


def test_exponential_density_at_zero():
    assert PopularityProfile("exponential", 1.0).density(0.0) == pytest.approx(1.0)


def test_cdf_examples():
    assert PopularityProfile("uniform", 2.0).cdf(1.0) == pytest.approx(0.5)
    assert PopularityProfile("exponential", 1.0).cdf(1e6) == pytest.approx(1.0)
    # 1 - (t/delta + 1)^(1 - zeta) at t = delta
    assert PopularityProfile("powerlaw", 4.0, 3.0).cdf(4.0) == pytest.approx(0.75, abs=1e-14)


@pytest.mark.parametrize("kind,delta,zeta,L", [
    ("uniform", 3.0, None, 3.0),
    ("exponential", 3.5, None, 7.0),
    ("powerlaw", 4.0, 3.0, 5.0),
])
def test_life_span_closed_form(kind, delta, zeta, L):
    assert PopularityProfile(kind, delta, zeta).life_span == pytest.approx(L, rel=1e-14)


@pytest.mark.parametrize("kind,L,zeta,delta", [
    ("exponential", 7.0, None, 3.5),
    ("uniform", 7.0, None, 7.0),
    ("powerlaw", 5.0, 3.0, 4.0),
])
def test_from_life_span_inverts(kind, L, zeta, delta):
    p = PopularityProfile.from_life_span(kind, L, zeta)
    assert p.delta == pytest.approx(delta, rel=1e-12)
    assert p.life_span == pytest.approx(L, rel=1e-12)


@pytest.mark.parametrize("zeta", [1.0, 0.5, None])
def test_powerlaw_rejects_bad_zeta(zeta):
    with pytest.raises(ValueError):
        PopularityProfile.from_life_span("powerlaw", 5.0, zeta)


def _numeric_life_span(p):
    end = p.tail_age(1e-14)
    pts = [0.0] + [k for k in p.kinks() if 0 < k < end]
    total = 0.0
    edges = sorted(set(pts + list(np.geomspace(max(p.delta * 1e-6, 1e-9), end, 60))))
    for a, b in zip(edges[:-1], edges[1:]):
        total += integrate.quad(lambda t: p.density(t) ** 2, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
    return 1.0 / total


def test_life_span_matches_squared_density_integral(rng):
    for _ in range(50):
        kind = rng.choice(["uniform", "exponential", "powerlaw"])
        zeta = float(rng.uniform(1.5, 6.0)) if kind == "powerlaw" else None
        p = PopularityProfile(str(kind), float(rng.uniform(0.2, 50.0)), zeta)
        assert abs(_numeric_life_span(p) - p.life_span) / p.life_span < 1e-6


@pytest.mark.parametrize("p", [
    PopularityProfile("uniform", 2.0),
    PopularityProfile("exponential", 1.5),
    PopularityProfile("powerlaw", 4.0, 2.5),
])
def test_cdf_is_antiderivative(p):
    t = np.linspace(0.01, 6.0, 200)
    t = t[np.abs(t - p.delta) > 1e-3]
    h = 1e-6
    fd = (p.cdf(t + h) - p.cdf(t - h)) / (2 * h)
    assert np.max(np.abs(fd - p.density(t))) < 1e-6


def test_cdf_monotone_and_zero_before_birth():
    p = PopularityProfile("powerlaw", 2.0, 3.0)
    t = np.linspace(-5, 100, 1000)
    c = p.cdf(t)
    assert np.all(np.diff(c) >= 0)
    assert np.all(c[t <= 0] == 0)


def test_quantile_inverts_cdf():
    for p in (PopularityProfile("uniform", 2.0), PopularityProfile("exponential", 3.0),
              PopularityProfile("powerlaw", 1.0, 4.0)):
        u = np.linspace(0.001, 0.999, 50)
        assert np.allclose(p.cdf(p.quantile(u)), u, atol=1e-12)


def test_round_trip_dict():
    p = PopularityProfile("powerlaw", 2.0, 3.0)
    assert PopularityProfile.from_dict(p.to_dict()) == p
    assert math.isclose(PopularityProfile.from_dict(p.to_dict()).life_span, p.life_span)


@pytest.mark.parametrize("p", [
    PopularityProfile("uniform", 3.0),
    PopularityProfile("exponential", 2.0),
    PopularityProfile("powerlaw", 2.0, 1.7),
])
def test_window_is_cdf_difference(p):
    t = np.linspace(-1, 10, 301)
    for width in (0.01, 1.0, 5.0):
        assert np.allclose(p.window(t, width), p.cdf(t) - p.cdf(t - width), atol=1e-14)


def test_window_keeps_digits_deep_in_the_tail():
    p = PopularityProfile("powerlaw", 2.0, 1.7)
    t, w = 1e5, 1e-6
    # first-order expansion: w * density(t)
    assert p.window(t, w) == pytest.approx(w * p.density(t), rel=1e-6)
    assert p.window(1e20, 1.0) > 0
