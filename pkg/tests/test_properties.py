import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from snmcache import (CacheTopology, CheModel, ContentClass, FilterPolicy, LruCache, PopularityProfile,
                      VirtualTimeWarp, VolumeDistribution, shuffle_k_slices, simulate_single, simulate_tree, warp)

from conftest import make_trace

FAST = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])

ids_st = st.lists(st.integers(0, 30), min_size=1, max_size=300)


@st.composite
def traces(draw):
    ids = draw(ids_st)
    gaps = draw(st.lists(st.floats(0.0, 2.0), min_size=len(ids), max_size=len(ids)))
    t = np.cumsum(gaps) - draw(st.floats(0.0, 50.0))
    return make_trace(ids, times=t)


@st.composite
def warps(draw, lo, hi):
    n_left = draw(st.integers(1, 6))
    n_right = draw(st.integers(1, 6))
    left = np.sort(np.unique(draw(st.lists(st.floats(1e-3, 1.0), min_size=n_left, max_size=n_left))))
    right = np.sort(np.unique(draw(st.lists(st.floats(1e-3, 1.0), min_size=n_right, max_size=n_right))))
    t = np.concatenate([(lo - 1.0) * left[::-1], [0.0], (hi + 1.0) * right])
    t = np.unique(t)
    slopes = np.array(draw(st.lists(st.floats(0.05, 20.0), min_size=len(t) - 1, max_size=len(t) - 1)))
    # rescale so that the knots have average slope one
    slopes *= (t[-1] - t[0]) / np.sum(slopes * np.diff(t))
    w = np.concatenate([[0.0], np.cumsum(slopes * np.diff(t))])
    w -= np.interp(0.0, t, w)
    w[t == 0.0] = 0.0
    return VirtualTimeWarp(tuple(t), tuple(w))


@FAST
@given(data=st.data(), cap=st.integers(0, 20))
def test_warp_leaves_lru_decisions_unchanged(data, cap):
    tr = data.draw(traces())
    lo, hi = min(float(tr.time[0]), -1.0), max(float(tr.time[-1]), 1.0)
    w = data.draw(warps(lo, hi))
    out = warp(tr, w)
    assert np.all(np.diff(out.time) >= 0)
    assert np.array_equal(simulate_single(out, cap).hit_sequence, simulate_single(tr, cap).hit_sequence)


@FAST
@given(ids=ids_st, k=st.integers(1, 400), seed=st.integers(0, 2**32 - 1))
def test_shuffle_preserves_multiset(ids, k, seed):
    tr = make_trace(ids)
    k = min(k, len(ids))
    out = shuffle_k_slices(tr, k, seed)
    assert np.array_equal(np.sort(out.content), np.sort(tr.content))
    assert np.array_equal(out.time, tr.time)


def _brute(ids, cap):
    state, hits = [], []
    for x in ids:
        hit = x in state
        hits.append(hit)
        if hit:
            state.remove(x)
        if hit or cap > 0:
            state.insert(0, x)
            del state[cap:]
    return hits, state


@FAST
@given(ids=ids_st, cap=st.integers(1, 50))
def test_lru_matches_list_scan(ids, cap):
    hits, state = _brute(ids, cap)
    assert simulate_single(make_trace(ids), cap).hit_sequence.tolist() == hits
    ref = LruCache(cap)
    for x in ids:
        ref.request(x)
    assert ref.keys() == state


@FAST
@given(ids=ids_st, cap=st.integers(0, 30))
def test_lru_inclusion_gives_monotone_hits(ids, cap):
    tr = make_trace(ids)
    small = simulate_single(tr, cap).hit_sequence
    big = simulate_single(tr, cap + 1).hit_sequence
    assert np.all(big[small])


@FAST
@given(ids=ids_st, cap=st.integers(0, 30))
def test_single_node_tree_is_single_cache(ids, cap):
    tr = make_trace(ids)
    assert np.array_equal(simulate_tree(tr, CacheTopology.single(cap)).hit_sequence,
                          simulate_single(tr, cap).hit_sequence)


@FAST
@given(ids=ids_st, cap=st.integers(0, 30))
def test_empty_filter_is_no_filter(ids, cap):
    tr = make_trace(ids)
    assert np.array_equal(simulate_single(tr, cap, FilterPolicy()).hit_sequence,
                          simulate_single(tr, cap).hit_sequence)


@FAST
@given(ids=ids_st, cap=st.integers(0, 30), blocked=st.sets(st.integers(0, 30)))
def test_filtered_contents_never_hit(ids, cap, blocked):
    tr = make_trace(ids)
    labels = {i: ("x" if i in blocked else "y") for i in range(31)}
    res = simulate_single(tr, cap, FilterPolicy(["x"]), class_of=labels)
    is_blocked = np.isin(tr.content, list(blocked))
    assert not res.hit_sequence[is_blocked].any()
    # filtered requests leave the cache untouched
    keep = ~is_blocked
    alone = make_trace(tr.content[keep]) if keep.any() else None
    if alone is not None:
        assert np.array_equal(res.hit_sequence[keep], simulate_single(alone, cap).hit_sequence)


profiles = st.one_of(
    st.builds(PopularityProfile, st.just("uniform"), st.floats(0.1, 100.0)),
    st.builds(PopularityProfile, st.just("exponential"), st.floats(0.1, 100.0)),
    st.builds(PopularityProfile, st.just("powerlaw"), st.floats(0.1, 100.0), st.floats(1.2, 6.0)),
)


@FAST
@given(p=profiles, t=st.floats(-10, 1e4), width=st.floats(1e-6, 1e3))
def test_window_mass_bounds(p, t, width):
    w = p.window(t, width)
    assert 0.0 <= w <= 1.0
    assert abs(w - (p.cdf(t) - p.cdf(t - width))) < 1e-12


@settings(max_examples=25, deadline=None)
@given(p=profiles, beta=st.floats(2.05, 6.0), gamma=st.floats(1.0, 1e5), T=st.floats(1e-4, 100.0))
def test_occupancy_bounded_by_linear_regime(p, beta, gamma, T):
    cls = ContentClass(p, VolumeDistribution.pareto(beta, mean=3.0))
    m = CheModel(gamma, [cls])
    occ = m.occupancy(T)
    assert 0 < occ <= gamma * 3.0 * T * (1 + 1e-9)
    assert m.occupancy(T * 1.5) > occ
