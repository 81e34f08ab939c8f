"""Sweeps that pair analytic curves with simulation estimates.

Simulated runs accept a ``scale`` divisor: the arrival rate is assumed to
be already divided by it, and nominal cache sizes are divided by the same
factor before simulation.  Reported capacities are always nominal.
"""

from __future__ import annotations

import math

import numpy as np

from .che import CheModel
from .config import CacheTopology, TrafficConfig
from .network import solve_network
from .sim import (FilterPolicy, Replication, required_cache_size, run_seeds, simulate_single, simulate_tree)
from .tracegen import RequestTrace, generate, shuffle_k_slices


def scaled_capacity(capacity: float, scale: float) -> int:
    return max(int(round(capacity / scale)), 0)


def model_curve(config: TrafficConfig, capacities, filtered=(), scale: float = 1.0) -> list[dict]:
    """Analytic rows at nominal capacities; `config` carries the scaled rate."""
    model = CheModel(config.gamma * scale, config.classes, filtered=filtered)
    return model.curve(capacities)


def simulated_curve(config: TrafficConfig, capacities, reps: int, filtered=(), scale: float = 1.0,
                    base_seed: int | None = None) -> list[dict]:
    """Hit ratio at each nominal capacity with a Student-t 95% interval over `reps` traces."""
    caps = [scaled_capacity(c, scale) for c in capacities]
    policy = FilterPolicy(filtered)
    seeds = run_seeds(config.seed if base_seed is None else base_seed, reps)
    values = []
    for s in seeds:
        trace = generate(config.with_(seed=s))
        values.append([simulate_single(trace, c, policy).hit_ratio for c in caps])
    rep = Replication.of(values, seeds)
    hw = np.atleast_1d(rep.half_width)
    return [{"capacity": c, "sim_capacity": sc, "p_hit_sim": float(m), "ci_half_width": float(h)}
            for c, sc, m, h in zip(capacities, caps, np.atleast_1d(rep.mean), hw)]


def slice_count(trace: RequestTrace, slice_hours: float) -> int:
    span = float(trace.time[-1] - trace.time[0]) if len(trace) else 0.0
    if math.isinf(slice_hours):
        return 1
    return int(min(max(1, math.ceil(span * 24.0 / slice_hours)), len(trace)))


def shuffle_study(trace: RequestTrace, slice_hours, targets, reps: int = 3, seed: int = 0) -> list[dict]:
    """Required LRU size per target for the original trace and for K-slice shuffles.

    ``slice_hours = inf`` means a single slice (full shuffle).  Each shuffled
    setting is repeated with `reps` permutation seeds.
    """
    rows = []
    for t in targets:
        r = required_cache_size(trace, t)
        rows.append({"slice_hours": 0.0, "slices": len(trace), "target": t, "capacity_mean": float(r.capacity),
                     "ci_half_width": 0.0, "capacities": [r.capacity]})
    seeds = run_seeds(seed, reps)
    for h in slice_hours:
        k = slice_count(trace, h)
        caps = {t: [] for t in targets}
        for s in seeds:
            shuffled = shuffle_k_slices(trace, k, s)
            for t in targets:
                caps[t].append(required_cache_size(shuffled, t).capacity)
        for t in targets:
            rep = Replication.of(caps[t]) if reps >= 2 else None
            rows.append({"slice_hours": float(h), "slices": k, "target": t,
                         "capacity_mean": float(np.mean(caps[t])),
                         "ci_half_width": float(rep.half_width) if rep else math.nan,
                         "capacities": caps[t]})
    return rows


def tree_point(config: TrafficConfig, topology_nominal: CacheTopology, scale: float = 1.0,
               scheme: str = "improved") -> float:
    """Analytic global hit ratio of a nominal allocation."""
    nominal = config.with_(gamma=config.gamma * scale)
    return solve_network(nominal, topology_nominal, scheme).global_hit_ratio


def simulate_allocations(config: TrafficConfig, topologies, reps: int, base_seed: int | None = None) -> Replication:
    """Global hit ratio of every (already scaled) topology, one trace per replication."""
    seeds = run_seeds(config.seed if base_seed is None else base_seed, reps)
    values = []
    for s in seeds:
        trace = generate(config.with_(seed=s), topologies[0])
        values.append([simulate_tree(trace, topo).hit_ratio for topo in topologies])
    return Replication.of(values, seeds)
