"""Trace-driven LRU simulation: single caches, class filters and cache trees."""

from __future__ import annotations

import csv
import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import _kernels
from .config import CacheTopology, ConfigError, TrafficConfig
from .tracegen import RequestTrace, generate


class UnknownClassError(KeyError):
    """A filter is active but a content has no known class."""


class UnreachableTargetError(ValueError):
    """The requested hit ratio exceeds what an unbounded cache achieves."""

    def __init__(self, target: float, asymptote: float):
        super().__init__(f"target hit ratio {target} is above the asymptotic hit ratio {asymptote:.6g}")
        self.target = target
        self.asymptote = asymptote


class LruCache:
    """Reference LRU cache over arbitrary hashable keys.

    >>> c = LruCache(1)
    >>> [c.request(k) for k in "aab"]
    [False, True, False]
    """

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError("capacity must be non-negative")
        self.capacity = int(capacity)
        self._items: OrderedDict = OrderedDict()

    def request(self, key, admit: bool = True) -> bool:
        if key in self._items:
            self._items.move_to_end(key)
            return True
        if admit and self.capacity > 0:
            if len(self._items) >= self.capacity:
                self._items.popitem(last=False)
            self._items[key] = None
        return False

    def __contains__(self, key) -> bool:
        return key in self._items

    def __len__(self) -> int:
        return len(self._items)

    def keys(self) -> list:
        """Cached keys from most to least recently used."""
        return list(reversed(self._items))


@dataclass(frozen=True)
class FilterPolicy:
    """Class labels whose contents are never admitted."""

    labels: frozenset = frozenset()

    def __init__(self, labels=()):
        object.__setattr__(self, "labels", frozenset(str(x) for x in labels))

    def __bool__(self) -> bool:
        return bool(self.labels)

    def admit_mask(self, n_contents: int, class_of, original_ids=None) -> np.ndarray:
        """Boolean admission flag per dense content id.

        `class_of` is either a ``(codes, labels)`` pair indexed by dense id,
        or a mapping from content id to label; `original_ids` translates
        dense ids back to the keys of such a mapping.
        """
        if not self.labels:
            return np.ones(n_contents, dtype=bool)
        if class_of is None:
            raise UnknownClassError("a class filter needs a content-to-class map")
        mask = np.ones(n_contents, dtype=bool)
        if isinstance(class_of, tuple):
            codes, labels = class_of
            blocked = np.array([str(l) in self.labels for l in labels], dtype=bool)
            codes = np.asarray(codes)
            if len(codes) < n_contents:
                raise UnknownClassError(f"no class for contents {len(codes)}..{n_contents - 1}")
            return ~blocked[codes[:n_contents]]
        keys = range(n_contents) if original_ids is None else original_ids
        for cid, key in enumerate(keys):
            try:
                mask[cid] = str(class_of[int(key)]) not in self.labels
            except (KeyError, IndexError):
                raise UnknownClassError(f"unknown class of content {key}") from None
        return mask


@dataclass(frozen=True)
class NodeStats:
    node_id: str
    capacity: int
    requests: int
    hits: int

    @property
    def misses(self) -> int:
        return self.requests - self.hits

    @property
    def hit_ratio(self) -> float:
        return self.hits / self.requests if self.requests else math.nan


@dataclass(frozen=True, eq=False)
class SimResult:
    """Counts over the measured window of one simulation run.

    ``hit_sequence`` holds, for every request of the trace (warm-up
    included), whether any cache served it.  ``hit_ratio`` is the fraction
    of measured exogenous requests served by some cache.
    """

    nodes: tuple
    requests: int
    hits: int
    hit_sequence: np.ndarray = field(repr=False, default=None)

    @property
    def hit_ratio(self) -> float:
        return self.hits / self.requests if self.requests else math.nan

    def node(self, node_id: str) -> NodeStats:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)

    def rows(self) -> list[dict]:
        return [{"node_id": n.node_id, "capacity": n.capacity, "requests": n.requests,
                 "hits": n.hits, "hit_ratio": n.hit_ratio} for n in self.nodes]

    def to_csv(self, path) -> None:
        write_rows(path, self.rows(), ("node_id", "capacity", "requests", "hits", "hit_ratio"))

    def summary(self) -> dict:
        return {"requests": self.requests, "hits": self.hits, "hit_ratio": self.hit_ratio,
                "nodes": self.rows()}


@dataclass(frozen=True)
class Replication:
    """Mean and Student-t 95% half-width of independent runs."""

    values: np.ndarray
    mean: float
    half_width: float
    seeds: tuple = ()

    @classmethod
    def of(cls, values, seeds=()) -> "Replication":
        v = np.asarray(values, dtype=float)
        n = v.shape[0]
        mean = v.mean(axis=0)
        if n < 2:
            hw = np.full_like(mean, math.nan)
        else:
            sd = v.std(axis=0, ddof=1)
            hw = stats.t.ppf(0.975, n - 1) * sd / math.sqrt(n)
        return cls(v, mean, hw, tuple(seeds))

    @property
    def low(self):
        return self.mean - self.half_width

    @property
    def high(self):
        return self.mean + self.half_width

    def to_dict(self) -> dict:
        return {"mean": np.asarray(self.mean).tolist(), "half_width": np.asarray(self.half_width).tolist(),
                "n_runs": int(self.values.shape[0]), "values": self.values.tolist(), "seeds": list(self.seeds)}


@dataclass(frozen=True)
class CacheSizeResult:
    """Smallest capacity reaching a target, and the bracketing hit ratios."""

    capacity: int
    hit_ratio: float
    below_capacity: int
    below_hit_ratio: float


def _class_map(trace: RequestTrace, class_of):
    if class_of is not None:
        return class_of
    if trace.content_class is not None:
        return (trace.content_class, trace.class_labels)
    return None


def _measured(trace: RequestTrace, measure_from: float) -> np.ndarray:
    m = ~trace.pre_horizon
    if measure_from:
        m &= trace.time >= measure_from
    return m


def _admit(trace: RequestTrace, n: int, filter: FilterPolicy | None, class_of):
    if filter is None or not filter:
        return np.ones(n, dtype=bool)
    ids, _ = trace.dense_ids()
    original = np.zeros(n, dtype=np.int64)
    original[ids] = trace.content
    return filter.admit_mask(n, _class_map(trace, class_of), original)


def simulate_single(trace: RequestTrace, capacity: int, filter: FilterPolicy | None = None,
                    class_of=None, measure_from: float = 0.0) -> SimResult:
    """Replay `trace` through one LRU cache of `capacity` contents.

    Warm-up requests (and those before `measure_from`) update the cache but
    are not counted.  Contents whose class is in `filter` are never stored.
    `class_of` maps content ids to class labels; generated traces carry it.
    """
    if capacity < 0:
        raise ValueError("capacity must be non-negative")
    ids, n = trace.dense_ids()
    admit = _admit(trace, n, filter, class_of)
    hits = _kernels.lru_replay(ids, n, int(capacity), admit)
    m = _measured(trace, measure_from)
    req = int(m.sum())
    h = int(np.count_nonzero(hits & m))
    node = NodeStats(trace.ingress_ids[0] if len(trace.ingress_ids) == 1 else "cache", int(capacity), req, h)
    return SimResult((node,), req, h, hits)


def simulate_tree(trace: RequestTrace, topology: CacheTopology, filter: FilterPolicy | None = None,
                  class_of=None, measure_from: float = 0.0) -> SimResult:
    """Replay `trace` through a cache tree with leave-copy-everywhere.

    A request enters at its ingress leaf and climbs until a cache holds the
    content, or reaches the repository above the root.  A copy is then
    stored in every cache on the traversed path.
    """
    order = [n.id for n in topology.nodes]
    index = {nid: i for i, nid in enumerate(order)}
    leaves = set(topology.leaves)
    for name in trace.ingress_ids:
        if name not in leaves:
            raise ConfigError(f"ingress {name!r} is not a leaf of the topology")
    parents = topology.parent_of()
    parent = np.array([index[parents[nid]] if nid in parents else -1 for nid in order], dtype=np.int64)
    caps = np.array([topology.node(nid).capacity for nid in order], dtype=np.int64)
    start = np.array([index[name] for name in trace.ingress_ids], dtype=np.int64)[trace.ingress]
    ids, n = trace.dense_ids()
    admit = _admit(trace, n, filter, class_of)
    m = _measured(trace, measure_from)
    served, req, hit = _kernels.tree_replay(ids, start, parent, caps, admit, n, m)
    nodes = tuple(NodeStats(nid, int(caps[i]), int(req[i]), int(hit[i])) for i, nid in enumerate(order))
    hit_seq = served >= 0
    total = int(m.sum())
    return SimResult(nodes, total, int(np.count_nonzero(hit_seq & m)), hit_seq)


def hit_ratio_curve(trace: RequestTrace, capacities, filter: FilterPolicy | None = None,
                    class_of=None) -> np.ndarray:
    return np.array([simulate_single(trace, int(c), filter, class_of).hit_ratio for c in capacities])


def asymptotic_hit_ratio(trace: RequestTrace, filter: FilterPolicy | None = None, class_of=None) -> float:
    """Hit ratio of a cache large enough to hold every content."""
    _, n = trace.dense_ids()
    return simulate_single(trace, max(n, 1), filter, class_of).hit_ratio


def required_cache_size(trace: RequestTrace, target: float, filter: FilterPolicy | None = None,
                        class_of=None) -> CacheSizeResult:
    """Smallest LRU capacity whose measured hit ratio reaches `target`.

    Doubling from one content brackets the answer, then bisection over
    integer capacities narrows it.  Assumes the hit ratio is monotone in
    capacity, which holds for LRU.
    """
    if not 0 < target < 1:
        raise ValueError("target must lie in (0, 1)")
    _, n = trace.dense_ids()
    top = max(n, 1)

    def ratio(c):
        return simulate_single(trace, c, filter, class_of).hit_ratio

    asym = ratio(top)
    if not asym >= target:
        raise UnreachableTargetError(target, asym)
    lo, lo_r = 0, 0.0
    hi = 1
    hi_r = ratio(hi)
    while hi_r < target:
        lo, lo_r = hi, hi_r
        hi = min(2 * hi, top)
        hi_r = ratio(hi) if hi < top else asym
    while hi - lo > 1:
        mid = (lo + hi) // 2
        r = ratio(mid)
        if r >= target:
            hi, hi_r = mid, r
        else:
            lo, lo_r = mid, r
    return CacheSizeResult(hi, hi_r, lo, lo_r)


def run_seeds(base_seed: int, n_runs: int) -> list[int]:
    """Distinct, reproducible child seeds."""
    children = np.random.SeedSequence(base_seed).spawn(n_runs)
    return [int(c.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)) for c in children]


def replicate(config: TrafficConfig, topology: CacheTopology | None, n_runs: int, measure,
              base_seed: int | None = None) -> Replication:
    """Run `measure(trace)` on `n_runs` traces generated with independent seeds.

    `measure` may return a scalar or a fixed-length sequence (for example a
    hit-ratio curve); the result holds the elementwise mean and 95% CI.
    """
    if n_runs < 2:
        raise ValueError("replicate needs at least two runs")
    seeds = run_seeds(config.seed if base_seed is None else base_seed, n_runs)
    values = []
    for s in seeds:
        trace = generate(config.with_(seed=s), topology)
        values.append(measure(trace))
    return Replication.of(values, seeds)


def write_rows(path, rows, columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k)) for k in columns})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")
