"""Preset traffic mixes and topologies used by the figure sweeps.

Every preset takes a ``scale`` divisor applied to the content arrival rate;
callers divide cache sizes by the same factor.  Hit ratios depend on cache
size only through ``C / gamma``, so scaled runs estimate the same curves at
a fraction of the cost.
"""

from __future__ import annotations

import numpy as np

from .config import CacheTopology, ContentClass, IngressModel, TrafficConfig
from .profiles import PopularityProfile
from .volumes import VolumeDistribution

DESK_HORIZON = 60.0

# (life-span in days, mean volume, truncation) per class of the multi-class mix
MIX_CLASSES = (
    (500.0, 1.61, 10.0),
    (2.0, 83.33, None),
    (7.0, 75.0, None),
    (30.0, 66.66, None),
    (100.0, 50.0, None),
    (1000.0, 50.0, None),
)
MIX_BETA = 2.5
MIX_WEIGHTS = {
    1: (0.85, 0.00, 0.00, 0.02, 0.02, 0.11),
    2: (0.85, 0.00, 0.02, 0.02, 0.02, 0.09),
    3: (0.85, 0.01, 0.02, 0.02, 0.02, 0.08),
}
MIX_GAMMA = 1e5
FILTERS = {"LRU": (), "LRU-0": ("0",), "LRU-(0+5)": ("0", "5")}

SINGLE_GAMMA = 1e4
SINGLE_MEAN_VOLUME = 3.0
FIG6_LIFE_SPANS = (1.0, 7.0, 30.0)
FIG6_BETAS = (2.1, 3.0)
FIG6_MODEL_BETAS = (2.1, 2.3, 2.5, 3.0, 4.0)

TREE_LEAVES = 8
TREE_TOTALS = (100, 400, 1600, 6400, 25600, 51200)
TREE_LEAF_FRACTIONS = (0.0, 0.25, 0.5, 0.75, 1.0)


def single_class_config(life_span: float, beta: float, profile: str = "uniform", gamma: float = SINGLE_GAMMA,
                        mean_volume: float = SINGLE_MEAN_VOLUME, horizon: float = DESK_HORIZON, scale: float = 1.0,
                        seed: int = 0, **kwargs) -> TrafficConfig:
    prof = PopularityProfile.from_life_span(profile, life_span, kwargs.pop("zeta", None))
    cls = ContentClass(prof, VolumeDistribution.pareto(beta, mean=mean_volume))
    return TrafficConfig(gamma / scale, (cls,), horizon, seed=seed, **kwargs)


def mix_classes(weights) -> tuple:
    out = []
    for k, ((L, mean, vmax), w) in enumerate(zip(MIX_CLASSES, weights)):
        if vmax is None:
            vol = VolumeDistribution.pareto(MIX_BETA, mean=mean)
        else:
            vol = VolumeDistribution.truncated_pareto(MIX_BETA, vmax, mean=mean)
        out.append(ContentClass(PopularityProfile.from_life_span("exponential", L), vol, w, label=str(k)))
    return tuple(out)


def mix_scenario(number: int, gamma: float = MIX_GAMMA, horizon: float = DESK_HORIZON, scale: float = 1.0,
                 seed: int = 0, warmup: float | None = 30.0) -> TrafficConfig:
    """Six-class mix; the long-lived classes need warm-up mode to stay affordable."""
    return TrafficConfig(gamma / scale, mix_classes(MIX_WEIGHTS[number]), horizon, warmup=warmup, seed=seed)


def tree_config(localized: bool, gamma: float = SINGLE_GAMMA, horizon: float = DESK_HORIZON, scale: float = 1.0,
                seed: int = 0, warmup: float | None = 60.0) -> TrafficConfig:
    prof = PopularityProfile.from_life_span("exponential", 7.0)
    cls = ContentClass(prof, VolumeDistribution.pareto(2.5, mean=SINGLE_MEAN_VOLUME))
    ingress = IngressModel("localized" if localized else "unlocalized")
    return TrafficConfig(gamma / scale, (cls,), horizon, ingress=ingress, warmup=warmup, seed=seed)


def tree_allocation(total: int, leaf_fraction: float, n_leaves: int = TREE_LEAVES,
                    scale: float = 1.0) -> CacheTopology:
    """Two-level tree with `leaf_fraction` of `total / scale` split evenly over the leaves."""
    budget = total / scale
    leaf = int(np.floor(leaf_fraction * budget / n_leaves + 1e-9))
    root = int(round(budget)) - n_leaves * leaf
    return CacheTopology.two_level(n_leaves, leaf, max(root, 0))


def capacity_grid(lo: float, hi: float, n: int) -> np.ndarray:
    return np.unique(np.round(np.geomspace(lo, hi, n)).astype(int))
