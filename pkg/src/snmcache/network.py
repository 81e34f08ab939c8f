"""Analytic hit probabilities for trees of LRU caches fed at the leaves.

Leaves see Poisson request streams and are solved exactly as single caches
whose volumes are scaled by the ingress share.  Upper nodes see the
superposition of their children's miss streams.  For every content class,
ingress split type and volume node we track the expected miss intensity
``m(a)`` and its integral ``M(a)`` over the content age ``a``; a parent
treats the superposition as Poisson when computing its occupancy
(``p_in``).  The ``improved`` scheme then corrects the hit probability of a
request coming from child ``c``: that child cannot have forwarded the same
content during its own eviction window, so

    1 - p_hit(a | c) = (1 - p_in(a)) * exp(M_c(a) - M_c(a - min(T_c, T))).

Per-child hit probabilities are averaged with weights equal to the child
miss intensities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicHermiteSpline

from .che import CheModel, CheSolution, MAX_AGE_FACTOR, TAIL_EPS
from .config import CacheTopology, ConfigError, ContentClass, TrafficConfig
from .quadrature import QuadratureError, geometric_breaks, integrate

POISSON = "poisson"
IMPROVED = "improved"
_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


def _end_age(profile) -> float:
    return min(profile.tail_age(TAIL_EPS), MAX_AGE_FACTOR * profile.delta)


def _age_grid(profile, shifts, n_lin: int = 1500, n_geo: int = 600) -> np.ndarray:
    end = _end_age(profile)
    pts = [np.linspace(0.0, end, n_lin), geometric_breaks(end * 1e-10, end, per_decade=n_geo // 10)]
    kinks = [0.0, *profile.kinks()]
    extra = []
    for s in shifts:
        if 0 < s < math.inf:
            extra.extend(k + s for k in kinks)
    extra.extend(kinks)
    pts.append(np.array([e for e in extra if 0 <= e <= end]))
    return np.unique(np.concatenate(pts))


class _Stream:
    """Expected request intensity of one (class, split) pair, per volume node.

    ``rate(a)`` returns an array of shape ``(n_volumes, len(a))``; the
    integral ``cum(a)`` is tabulated on `grid` with per-interval Gauss
    quadrature and interpolated by a cubic Hermite spline that uses the
    exact rate as derivative.
    """

    def __init__(self, rate, grid: np.ndarray):
        self._rate = rate
        self.grid = grid
        lo, hi = grid[:-1], grid[1:]
        half = 0.5 * (hi - lo)
        x = (0.5 * (lo + hi))[:, None] + half[:, None] * _GL_X[None, :]
        vals = rate(x.ravel())
        inc = vals.reshape(vals.shape[0], len(lo), len(_GL_X)) @ _GL_W * half
        cum = np.concatenate([np.zeros((vals.shape[0], 1)), np.cumsum(inc, axis=1)], axis=1)
        self.total = cum[:, -1]
        self._spline = CubicHermiteSpline(grid, cum.T, rate(grid).T)

    def rate(self, a):
        a = np.asarray(a, dtype=float)
        inside = (a >= 0) & (a <= self.grid[-1])
        return np.where(inside, self._rate(np.clip(a, 0.0, self.grid[-1])), 0.0)

    def cum(self, a):
        a = np.asarray(a, dtype=float)
        out = self._spline(np.clip(np.nan_to_num(a, neginf=0.0), 0.0, self.grid[-1])).T
        return np.where(a <= 0, 0.0, out)

    def window(self, a, T: float):
        """``M(a) - M(a - T)``."""
        if math.isinf(T):
            return self.cum(a)
        return self.cum(a) - self.cum(np.asarray(a) - T)


@dataclass
class NodeSolution:
    """Analytic state of one cache of the tree.

    Rates are per day, summed over all contents: ``requests`` enter the
    node, ``hits`` are served there and ``misses`` go to the parent.
    """

    node_id: str
    capacity: int
    T_C: float
    requests: float
    hits: float
    misses: float
    scheme: str
    streams: dict = field(repr=False, default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def p_hit(self) -> float:
        return self.hits / self.requests if self.requests > 0 else 0.0

    def p_in(self, key, ages) -> np.ndarray:
        """Probability that the content is cached, shape ``(n_volumes, len(ages))``."""
        return self.diagnostics["p_in"][key](np.asarray(ages, dtype=float))


@dataclass
class NetworkSolution:
    nodes: dict
    request_rate: float
    global_hit_ratio: float
    root_miss_rate: float
    scheme: str

    def rows(self) -> list[dict]:
        return [{"node_id": n.node_id, "capacity": n.capacity, "T_C_days": n.T_C,
                 "requests": n.requests, "hits": n.hits, "p_hit": n.p_hit} for n in self.nodes.values()]


class _Traffic:
    """Per (class, split type) bookkeeping shared by all nodes."""

    def __init__(self, config: TrafficConfig, topology: CacheTopology, n_volume_nodes: int):
        self.gamma = config.gamma
        self.classes = config.classes
        self.leaves = topology.leaves
        self.splits = config.ingress.split_types(len(self.leaves))
        self.keys = [(k, s) for k, c in enumerate(self.classes) if c.weight > 0 for s in range(len(self.splits))]
        self.vnodes = {}
        for k, c in enumerate(self.classes):
            if c.weight > 0:
                self.vnodes[k] = c.volumes.expectation_nodes(n_volume_nodes)
        self.total_rate = config.gamma * config.mean_volume

    def mass(self, key) -> float:
        k, s = key
        return self.gamma * self.classes[k].weight * self.splits[s][0]

    def share(self, key, leaf: str) -> float:
        return float(self.splits[key[1]][1][self.leaves.index(leaf)])


def solve_leaf(leaf: str, capacity: int, traffic: _Traffic) -> NodeSolution:
    """Single-cache solution of a leaf fed by its share of every content's requests."""
    leaf_classes, keys = [], []
    for key in traffic.keys:
        p = traffic.share(key, leaf)
        if p <= 0:
            continue
        cls = traffic.classes[key[0]]
        leaf_classes.append(ContentClass(cls.profile, cls.volumes.scaled(p), cls.weight * traffic.splits[key[1]][0],
                                         label=f"{cls.label}/{key[1]}"))
        keys.append(key)
    if not leaf_classes:
        return NodeSolution(leaf, capacity, math.inf if capacity > 0 else 0.0, 0.0, 0.0, 0.0, "leaf")
    model = CheModel(traffic.gamma, leaf_classes)
    sol: CheSolution = model.solve(float(capacity))
    requests = traffic.gamma * model.total_volume
    T = sol.T_C
    streams, p_in = {}, {}
    for key, lc in zip(keys, leaf_classes):
        p = traffic.share(key, leaf)
        prof = lc.profile
        v = traffic.vnodes[key[0]][0][:, None] * p

        def g(a, prof=prof):
            return prof.window(a, T) if not math.isinf(T) else prof.cdf(a)

        def rate(a, prof=prof, v=v, g=g):
            return v * prof.density(a)[None, :] * np.exp(-v * g(a)[None, :])

        streams[key] = _Stream(rate, _age_grid(prof, (T,)))
        p_in[key] = (lambda a, v=v, g=g: -np.expm1(-v * g(a)[None, :]))
    hits = sol.p_hit * requests
    return NodeSolution(leaf, capacity, T, requests, hits, requests - hits, "leaf", streams,
                        {"p_in": p_in, "residual": sol.residual, "che": sol})


def propagate_intensity(children: list[NodeSolution], key) -> list[tuple[NodeSolution, _Stream]]:
    """Miss streams of `children` for one (class, split) key; children that forward nothing are skipped."""
    return [(c, c.streams[key]) for c in children if key in c.streams and np.any(c.streams[key].total > 0)]


def _parent_breaks(profile, T: float, child_T) -> np.ndarray:
    end = _end_age(profile)
    pts = [0.0, end]
    shifts = [T] + [t for t in child_T if not math.isinf(t)] + [min(t, T) for t in child_T]
    for s in shifts:
        if 0 < s < math.inf:
            pts.extend([s, end + s])
            pts.extend(k + s for k in profile.kinks())
    pts.extend(profile.kinks())
    scale = min([profile.delta] + [s for s in shifts if 0 < s < math.inf])
    pts.extend(geometric_breaks(scale * 1e-3, max(pts)))
    return np.array([p for p in pts if p >= 0])


class _Parent:
    """Aggregate inputs of a non-leaf node for every key."""

    def __init__(self, node_id: str, children: list[NodeSolution], traffic: _Traffic):
        self.node_id = node_id
        self.traffic = traffic
        self.inputs = {}
        self.aggregate = {}
        child_T = [c.T_C for c in children]
        for key in traffic.keys:
            inp = propagate_intensity(children, key)
            if not inp:
                continue
            self.inputs[key] = inp
            prof = traffic.classes[key[0]].profile

            def rate(a, inp=inp):
                return sum(s.rate(a) for _, s in inp)

            self.aggregate[key] = _Stream(rate, _age_grid(prof, child_T))
        self.requests = sum(traffic.mass(k) * traffic.vnodes[k[0]][1] @ self.aggregate[k].total
                            for k in self.aggregate)

    def occupancy(self, T: float) -> float:
        if T <= 0:
            return 0.0
        if math.isinf(T):
            return math.inf
        total = 0.0
        for key, agg in self.aggregate.items():
            w = self.traffic.vnodes[key[0]][1]
            prof = self.traffic.classes[key[0]].profile
            child_T = [c.T_C for c, _ in self.inputs[key]]

            def f(a, agg=agg, w=w):
                return w @ -np.expm1(-agg.window(a, T))

            res = integrate(f, _parent_breaks(prof, T, child_T), epsrel=1e-9)
            total += self.traffic.mass(key) * res.value
        return total

    def solve_T(self, capacity: float) -> float:
        if capacity <= 0 or self.requests <= 0:
            return 0.0 if capacity <= 0 else math.inf
        T_lo, T_hi = 0.0, 2.0 * capacity / self.requests
        limit = 1e9 * max(self.traffic.classes[k[0]].life_span for k in self.aggregate)
        while self.occupancy(T_hi) < capacity:
            T_lo, T_hi = T_hi, 2.0 * T_hi
            if T_hi > limit:
                return math.inf
        T = optimize.brentq(lambda t: self.occupancy(t) - capacity, T_lo, T_hi, rtol=1e-12, xtol=1e-300)
        resid = abs(self.occupancy(T) - capacity) / capacity
        if resid > 1e-7:
            raise QuadratureError("parent occupancy equation not solved", T, resid)
        return T

    def solve(self, capacity: int, scheme: str) -> NodeSolution:
        T = self.solve_T(float(capacity))
        streams, p_in, hits = {}, {}, 0.0
        for key, agg in self.aggregate.items():
            inp = self.inputs[key]
            w = self.traffic.vnodes[key[0]][1]
            prof = self.traffic.classes[key[0]].profile

            def miss_factor(a, agg=agg):
                return np.exp(-agg.window(a, T))

            if scheme == POISSON:
                def out_rate(a, agg=agg, miss_factor=miss_factor):
                    return agg.rate(a) * miss_factor(a)
            else:
                def out_rate(a, inp=inp, miss_factor=miss_factor):
                    base = miss_factor(a)
                    acc = 0.0
                    for c, s in inp:
                        acc = acc + s.rate(a) * base * np.exp(s.window(a, min(c.T_C, T)))
                    return acc

            def hit_rate(a, agg=agg, out_rate=out_rate, w=w):
                return w @ (agg.rate(a) - out_rate(a))

            # hits are a difference of rates, so tolerance is set by the incoming volume
            res = integrate(hit_rate, _parent_breaks(prof, T, [c.T_C for c, _ in inp]), epsrel=1e-9,
                            epsabs=1e-12 * float(w @ agg.total))
            hits += self.traffic.mass(key) * res.value
            streams[key] = _Stream(out_rate, _age_grid(prof, [T] + [c.T_C for c, _ in inp]
                                                       + [min(c.T_C, T) for c, _ in inp]))
            p_in[key] = (lambda a, miss_factor=miss_factor: 1.0 - miss_factor(a))
        misses = sum(self.traffic.mass(k) * self.traffic.vnodes[k[0]][1] @ s.total for k, s in streams.items())
        return NodeSolution(self.node_id, capacity, T, self.requests, hits, misses, scheme, streams,
                            {"p_in": p_in, "conservation_gap": self.requests - hits - misses})


def solve_parent_poisson(node_id: str, capacity: int, children: list[NodeSolution], traffic: _Traffic) -> NodeSolution:
    """Parent solved with its input treated as Poisson: ``p_hit = p_in``."""
    return _Parent(node_id, children, traffic).solve(capacity, POISSON)


def solve_parent_improved(node_id: str, capacity: int, children: list[NodeSolution], traffic: _Traffic) -> NodeSolution:
    """Parent solved with per-child exclusion windows in the hit probability."""
    return _Parent(node_id, children, traffic).solve(capacity, IMPROVED)


def solve_network(config: TrafficConfig, topology: CacheTopology, scheme: str = IMPROVED,
                  n_volume_nodes: int = 64) -> NetworkSolution:
    """Solve every cache of `topology` bottom-up and report the global hit ratio.

    The global hit ratio is the fraction of exogenous requests served by any
    cache, i.e. one minus the root miss rate over the total request rate.
    A tree has no feedback, so one bottom-up pass suffices.
    """
    if scheme not in (POISSON, IMPROVED):
        raise ValueError(f"unknown scheme {scheme!r}")
    if config.ingress.kind == "single" and len(topology.leaves) > 1:
        raise ConfigError("a multi-leaf topology needs an ingress model")
    traffic = _Traffic(config, topology, n_volume_nodes)
    solved: dict[str, NodeSolution] = {}
    for nid in topology.bottom_up():
        node = topology.node(nid)
        if not node.children:
            solved[nid] = solve_leaf(nid, node.capacity, traffic)
        else:
            kids = [solved[c] for c in node.children]
            solved[nid] = _Parent(nid, kids, traffic).solve(node.capacity, scheme)
    root = solved[topology.root]
    total = traffic.total_rate
    g = global_hit_probability(solved, topology, total)
    return NetworkSolution(solved, total, g, root.misses, scheme)


def global_hit_probability(solved: dict, topology: CacheTopology, request_rate: float) -> float:
    if request_rate <= 0:
        return 0.0
    return min(max(1.0 - solved[topology.root].misses / request_rate, 0.0), 1.0)
