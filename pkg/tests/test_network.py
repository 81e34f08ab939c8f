import math

import numpy as np
import pytest

from snmcache import (CacheTopology, CheModel, ContentClass, IngressModel, PopularityProfile, TrafficConfig,
                      VolumeDistribution, generate, simulate_tree)
from snmcache.network import (_Traffic, propagate_intensity, solve_leaf, solve_network, solve_parent_improved,
                              solve_parent_poisson)
from snmcache.sim import Replication, run_seeds

CLS = ContentClass(PopularityProfile.from_life_span("exponential", 7.0), VolumeDistribution.pareto(2.5, mean=3.0))


def cfg(kind="unlocalized", gamma=1e4, weights=None, **kw):
    return TrafficConfig(gamma, (CLS,), 60.0, ingress=IngressModel(kind, weights), **kw)


def test_single_node_tree_is_single_cache():
    conf = TrafficConfig(1e4, (CLS,), 60.0)
    sol = solve_network(conf, CacheTopology.single(800))
    che = CheModel(1e4, [CLS]).solve(800)
    assert sol.global_hit_ratio == pytest.approx(che.p_hit, rel=1e-10)
    assert sol.nodes["cache"].T_C == pytest.approx(che.T_C, rel=1e-10)


def test_leaf_with_zero_share_sees_nothing():
    topo = CacheTopology.two_level(2, 50, 100)
    traffic = _Traffic(cfg(weights=(1.0, 0.0)), topo, 16)
    leaf = solve_leaf("leaf1", 50, traffic)
    assert leaf.requests == 0 and leaf.misses == 0
    assert leaf.p_hit == 0.0
    assert propagate_intensity([leaf], traffic.keys[0]) == []


def test_leaf_matches_scaled_volume_model():
    topo = CacheTopology.two_level(8, 100, 0)
    traffic = _Traffic(cfg(), topo, 64)
    leaf = solve_leaf("leaf3", 100, traffic)
    alone = ContentClass(CLS.profile, CLS.volumes.scaled(1 / 8))
    che = CheModel(1e4, [alone]).solve(100)
    assert leaf.p_hit == pytest.approx(che.p_hit, rel=1e-10)
    assert leaf.T_C == pytest.approx(che.T_C, rel=1e-10)


def test_leaf_matches_simulation_per_leaf():
    topo = CacheTopology.two_level(8, 50, 0)
    conf = cfg(gamma=2e3, seed=4)
    traffic = _Traffic(conf, topo, 64)
    model = solve_leaf("leaf0", 50, traffic).p_hit
    seeds = run_seeds(3, 4)
    vals = [simulate_tree(generate(conf.with_(seed=s), topo), topo).node("leaf0").hit_ratio for s in seeds]
    rep = Replication.of(vals)
    assert abs(model - rep.mean) <= max(rep.half_width, 0.003)


def test_pass_through_child_forwards_everything():
    topo = CacheTopology.two_level(2, 0, 100)
    traffic = _Traffic(cfg(), topo, 16)
    leaf = solve_leaf("leaf0", 0, traffic)
    key = traffic.keys[0]
    [(child, stream)] = propagate_intensity([leaf], key)
    a = np.linspace(0.1, 30, 50)
    direct = traffic.vnodes[0][0][:, None] * 0.5 * CLS.profile.density(a)[None, :]
    assert np.allclose(stream.rate(a), direct, rtol=1e-12)


def test_symmetric_children_double_intensity():
    topo = CacheTopology.two_level(2, 40, 100)
    traffic = _Traffic(cfg(), topo, 16)
    kids = [solve_leaf(f"leaf{i}", 40, traffic) for i in range(2)]
    key = traffic.keys[0]
    a = np.linspace(0.0, 40.0, 80)
    one = propagate_intensity(kids[:1], key)[0][1].rate(a)
    both = sum(s.rate(a) for _, s in propagate_intensity(kids, key))
    assert np.allclose(both, 2 * one, rtol=1e-12)


def test_pass_through_leaves_equal_root_only_cache():
    topo = CacheTopology.two_level(4, 0, 600)
    conf = cfg()
    che = CheModel(1e4, [CLS]).solve(600)
    for scheme in ("poisson", "improved"):
        sol = solve_network(conf, topo, scheme)
        assert sol.global_hit_ratio == pytest.approx(che.p_hit, rel=1e-4)
        assert sol.nodes["root"].T_C == pytest.approx(che.T_C, rel=1e-4)


def test_zero_capacity_parent_hits_nothing():
    topo = CacheTopology.two_level(4, 100, 0)
    traffic = _Traffic(cfg(), topo, 16)
    kids = [solve_leaf(f"leaf{i}", 100, traffic) for i in range(4)]
    for solver in (solve_parent_poisson, solve_parent_improved):
        root = solver("root", 0, kids, traffic)
        assert root.hits == 0.0 and root.T_C == 0.0


def test_single_child_with_longer_memory_never_hits():
    # one child whose eviction time exceeds the parent's: everything the parent
    # could still hold is also at the child, so forwarded requests always miss
    topo = CacheTopology(
        (CacheTopology.two_level(1, 0, 0).nodes[0].__class__("root", 50, ("leaf0",)),
         CacheTopology.two_level(1, 0, 0).nodes[1].__class__("leaf0", 400)), "root")
    traffic = _Traffic(TrafficConfig(1e4, (CLS,), 60.0, ingress=IngressModel("unlocalized")), topo, 32)
    leaf = solve_leaf("leaf0", 400, traffic)
    root = solve_parent_improved("root", 50, [leaf], traffic)
    assert leaf.T_C >= root.T_C
    assert root.hits == pytest.approx(0.0, abs=1e-9 * root.requests)
    poisson = solve_parent_poisson("root", 50, [leaf], traffic)
    assert poisson.hits > 0


def test_all_zero_capacities():
    sol = solve_network(cfg(), CacheTopology.two_level(8, 0, 0))
    # only the truncated profile tail (1e-12 of the mass) separates this from zero
    assert sol.global_hit_ratio == pytest.approx(0.0, abs=1e-9)


def test_huge_root_reaches_large_cache_limit():
    topo = CacheTopology.two_level(2, 0, 10**12)
    sol = solve_network(cfg(gamma=10.0), topo)
    assert sol.global_hit_ratio == pytest.approx(CheModel(10.0, [CLS]).large_cache_phit(), abs=1e-6)


@pytest.mark.parametrize("scheme", ["poisson", "improved"])
def test_conservation(scheme):
    sol = solve_network(cfg(), CacheTopology.two_level(8, 100, 800), scheme)
    for node in sol.nodes.values():
        assert abs(node.requests - node.hits - node.misses) <= 1e-6 * node.requests
        if "conservation_gap" in node.diagnostics:
            assert abs(node.diagnostics["conservation_gap"]) <= 1e-6 * node.requests
        p = node.p_in(CLS_KEY, np.linspace(0, 50, 40))
        assert np.all((p >= -1e-12) & (p <= 1 + 1e-12))


CLS_KEY = (0, 0)


def test_localized_without_root_equals_leaf_submodel():
    topo = CacheTopology.two_level(8, 200, 0)
    sol = solve_network(cfg("localized"), topo)
    sub = CheModel(1e4 / 8, [CLS]).solve(200)
    assert sol.global_hit_ratio == pytest.approx(sub.p_hit, rel=1e-8)


def test_unlocalized_all_root_is_best():
    conf = cfg()
    ratios = []
    for leaf in (0, 25, 50, 100):
        ratios.append(solve_network(conf, CacheTopology.two_level(8, leaf, 1600 - 8 * leaf)).global_hit_ratio)
    assert ratios[0] == max(ratios)
    assert np.all(np.diff(ratios) < 0)


def test_improved_differs_from_poisson_and_is_closer_to_simulation():
    topo = CacheTopology.two_level(8, 50, 400)
    conf = cfg(gamma=2500.0, seed=1)
    imp = solve_network(conf, topo, "improved").global_hit_ratio
    poi = solve_network(conf, topo, "poisson").global_hit_ratio
    seeds = run_seeds(11, 4)
    sim = Replication.of([simulate_tree(generate(conf.with_(seed=s), topo), topo).hit_ratio for s in seeds]).mean
    assert imp != poi
    assert abs(imp - sim) < abs(poi - sim)


def test_poisson_scheme_mid_allocation_within_ten_percent():
    topo = CacheTopology.two_level(8, 100, 800)
    conf = cfg(warmup=60.0, seed=2)
    poi = solve_network(conf, topo, "poisson").global_hit_ratio
    seeds = run_seeds(5, 3)
    sim = Replication.of([simulate_tree(generate(conf.with_(seed=s), topo), topo).hit_ratio for s in seeds]).mean
    assert abs(poi - sim) / sim < 0.10


def test_unknown_scheme():
    with pytest.raises(ValueError):
        solve_network(cfg(), CacheTopology.two_level(2, 1, 1), "exact")


def test_rows():
    sol = solve_network(cfg(), CacheTopology.two_level(2, 10, 10))
    rows = sol.rows()
    assert {r["node_id"] for r in rows} == {"root", "leaf0", "leaf1"}
    assert all(0 <= r["p_hit"] <= 1 for r in rows)
    assert math.isfinite(sol.root_miss_rate)
