"""Traffic mixes, ingress models and cache topologies.

Everything here is an immutable value object with a JSON representation,
so that every experiment can be reproduced from the documents it wrote.
Time is measured in days, cache sizes in contents.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .profiles import PopularityProfile
from .volumes import VolumeDistribution

TRAFFIC_SCHEMA = "snmcache.traffic/1"
TOPOLOGY_SCHEMA = "snmcache.topology/1"

SINGLE = "single"
UNLOCALIZED = "unlocalized"
LOCALIZED = "localized"
EXPLICIT = "explicit"
INGRESS_KINDS = (SINGLE, UNLOCALIZED, LOCALIZED, EXPLICIT)


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ContentClass:
    profile: PopularityProfile
    volumes: VolumeDistribution
    weight: float = 1.0
    label: str = "0"
    cacheable: bool = True

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ConfigError(f"class weight must lie in [0, 1], got {self.weight}")

    @property
    def life_span(self) -> float:
        return self.profile.life_span

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "weight": self.weight,
            "cacheable": self.cacheable,
            "profile": self.profile.to_dict(),
            "volume": self.volumes.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ContentClass":
        return cls(
            profile=PopularityProfile.from_dict(data["profile"]),
            volumes=VolumeDistribution.from_dict(data["volume"]),
            weight=float(data.get("weight", 1.0)),
            label=str(data.get("label", "0")),
            cacheable=bool(data.get("cacheable", True)),
        )


@dataclass(frozen=True)
class IngressModel:
    """How the requests of a content are spread over the leaves.

    ``unlocalized``: every request independently picks leaf ``i`` with
    probability ``node_weights[i]``.  ``localized``: each content is pinned to
    one leaf, drawn with probabilities ``node_weights``.  ``explicit``: each
    content draws its split vector from the finite list ``splits`` of
    ``(probability, vector)`` pairs.
    """

    kind: str = SINGLE
    node_weights: tuple | None = None
    splits: tuple = ()

    def __post_init__(self):
        if self.kind not in INGRESS_KINDS:
            raise ConfigError(f"unknown ingress model {self.kind!r}")
        if self.node_weights is not None:
            w = np.asarray(self.node_weights, dtype=float)
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise ConfigError("node weights must be non-negative and sum to 1")
        if self.kind == EXPLICIT:
            if not self.splits:
                raise ConfigError("explicit ingress needs at least one split vector")
            probs = [p for p, _ in self.splits]
            if abs(sum(probs) - 1.0) > 1e-9 or min(probs) < 0:
                raise ConfigError("split probabilities must be non-negative and sum to 1")
            for _, vec in self.splits:
                v = np.asarray(vec, dtype=float)
                if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
                    raise ConfigError("every split vector must be non-negative and sum to 1")

    def split_types(self, n_leaves: int) -> list[tuple[float, np.ndarray]]:
        """The law of the per-content split vector as ``(probability, vector)`` pairs."""
        if self.kind == SINGLE:
            if n_leaves != 1:
                raise ConfigError(f"single-cache ingress used with {n_leaves} leaves")
            return [(1.0, np.ones(1))]
        if self.kind == EXPLICIT:
            out = []
            for p, vec in self.splits:
                v = np.asarray(vec, dtype=float)
                if len(v) != n_leaves:
                    raise ConfigError(f"split vector of length {len(v)} for {n_leaves} leaves")
                out.append((float(p), v))
            return out
        w = self.weights(n_leaves)
        if self.kind == UNLOCALIZED:
            return [(1.0, w)]
        return [(float(w[i]), np.eye(n_leaves)[i]) for i in range(n_leaves) if w[i] > 0]

    def weights(self, n_leaves: int) -> np.ndarray:
        if self.node_weights is None:
            return np.full(n_leaves, 1.0 / n_leaves)
        w = np.asarray(self.node_weights, dtype=float)
        if len(w) != n_leaves:
            raise ConfigError(f"{len(w)} node weights for {n_leaves} leaves")
        return w

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.node_weights is not None:
            out["node_weights"] = list(self.node_weights)
        if self.splits:
            out["splits"] = [{"probability": p, "vector": list(v)} for p, v in self.splits]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "IngressModel":
        weights = data.get("node_weights")
        splits = tuple((float(s["probability"]), tuple(float(x) for x in s["vector"]))
                       for s in data.get("splits", ()))
        return cls(data.get("kind", SINGLE), tuple(weights) if weights is not None else None, splits)


@dataclass(frozen=True)
class TrafficConfig:
    """Complete description of a shot-noise request process.

    Parameters
    ----------
    gamma : float
        Arrival rate of new contents, contents/day.
    classes : tuple of ContentClass
        Content classes; their weights must sum to one.
    horizon : float
        Length of the measured window ``[0, horizon]``, days.
    burn_in : float, optional
        Contents start arriving at ``-burn_in``.  Defaults to three times the
        longest class life-span, capped at ten horizons.
    warmup : float, optional
        When set, only requests falling in ``[-warmup, horizon]`` are
        generated and each class gets its own burn-in, long enough for its
        profile tail (see :meth:`class_burn_in`).  This keeps long-lived
        classes stationary without generating their whole history.
    ingress : IngressModel
    seed : int
    """

    gamma: float
    classes: tuple
    horizon: float
    burn_in: float | None = None
    warmup: float | None = None
    ingress: IngressModel = field(default_factory=IngressModel)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.gamma >= 0:
            raise ConfigError(f"gamma must be non-negative, got {self.gamma}")
        if not self.horizon > 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if not self.classes:
            raise ConfigError("at least one content class is required")
        total = sum(c.weight for c in self.classes)
        if abs(total - 1.0) > 1e-12:
            raise ConfigError(f"class weights sum to {total!r}, expected 1")
        if self.burn_in is not None and self.burn_in < 0:
            raise ConfigError("burn_in must be non-negative")
        if self.warmup is not None and self.warmup < 0:
            raise ConfigError("warmup must be non-negative")

    @property
    def effective_burn_in(self) -> float:
        if self.burn_in is not None:
            return float(self.burn_in)
        longest = max(c.life_span for c in self.classes if c.weight > 0)
        return min(3.0 * longest, 10.0 * self.horizon)

    def class_burn_in(self, cls: ContentClass, tail: float = 1e-5) -> float:
        """Arrival window start (days before 0) used for `cls` in warmup mode."""
        if self.burn_in is not None:
            return float(self.burn_in)
        return max(cls.profile.tail_age(tail), self.warmup or 0.0)

    @property
    def mean_volume(self) -> float:
        return sum(c.weight * c.volumes.mean() for c in self.classes)

    @property
    def request_rate(self) -> float:
        """Stationary aggregate request rate, requests/day."""
        return self.gamma * self.mean_volume

    def with_(self, **changes) -> "TrafficConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "schema": TRAFFIC_SCHEMA,
            "gamma": self.gamma,
            "horizon": self.horizon,
            "burn_in": self.burn_in,
            "warmup": self.warmup,
            "seed": self.seed,
            "ingress": self.ingress.to_dict(),
            "classes": [c.to_dict() for c in self.classes],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrafficConfig":
        schema = data.get("schema", TRAFFIC_SCHEMA)
        if schema != TRAFFIC_SCHEMA:
            raise ConfigError(f"unsupported traffic schema {schema!r}")
        try:
            return cls(
                gamma=float(data["gamma"]),
                classes=tuple(ContentClass.from_dict(c) for c in data["classes"]),
                horizon=float(data["horizon"]),
                burn_in=data.get("burn_in"),
                warmup=data.get("warmup"),
                ingress=IngressModel.from_dict(data.get("ingress", {})),
                seed=int(data.get("seed", 0)),
            )
        except KeyError as exc:
            raise ConfigError(f"missing field {exc.args[0]!r} in traffic config") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def dump(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "TrafficConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class CacheNode:
    id: str
    capacity: int
    children: tuple = ()


@dataclass(frozen=True)
class CacheTopology:
    """A tree of LRU caches; requests enter at the leaves."""

    nodes: tuple
    root: str

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate node ids in topology")
        by_id = {n.id: n for n in self.nodes}
        if self.root not in by_id:
            raise ConfigError(f"root {self.root!r} is not a node")
        for n in self.nodes:
            if n.capacity < 0 or int(n.capacity) != n.capacity:
                raise ConfigError(f"capacity of {n.id!r} must be a non-negative integer")
            for c in n.children:
                if c not in by_id:
                    raise ConfigError(f"unknown child {c!r} of {n.id!r}")
        seen: set[str] = set()
        stack = [self.root]
        while stack:
            nid = stack.pop()
            if nid in seen:
                raise ConfigError("topology is not a tree")
            seen.add(nid)
            stack.extend(by_id[nid].children)
        if seen != set(ids):
            raise ConfigError("some nodes are not reachable from the root")

    @classmethod
    def single(cls, capacity: int, node_id: str = "cache") -> "CacheTopology":
        return cls((CacheNode(node_id, int(capacity)),), node_id)

    @classmethod
    def two_level(cls, n_leaves: int, leaf_capacity, root_capacity: int) -> "CacheTopology":
        """Root with `n_leaves` children; `leaf_capacity` may be a scalar or a list."""
        caps = np.broadcast_to(np.asarray(leaf_capacity), (n_leaves,))
        leaves = tuple(CacheNode(f"leaf{i}", int(caps[i])) for i in range(n_leaves))
        root = CacheNode("root", int(root_capacity), tuple(n.id for n in leaves))
        return cls((root,) + leaves, "root")

    def node(self, node_id: str) -> CacheNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def leaves(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes if not n.children)

    def parent_of(self) -> dict:
        return {c: n.id for n in self.nodes for c in n.children}

    def bottom_up(self) -> list[str]:
        """Node ids ordered so that every child precedes its parent."""
        by_id = {n.id: n for n in self.nodes}
        order: list[str] = []

        def visit(nid):
            for c in by_id[nid].children:
                visit(c)
            order.append(nid)

        visit(self.root)
        return order

    def with_capacities(self, capacities: dict) -> "CacheTopology":
        nodes = tuple(replace(n, capacity=int(capacities.get(n.id, n.capacity))) for n in self.nodes)
        return CacheTopology(nodes, self.root)

    @property
    def total_capacity(self) -> int:
        return sum(n.capacity for n in self.nodes)

    def to_dict(self) -> dict:
        return {
            "schema": TOPOLOGY_SCHEMA,
            "root": self.root,
            "nodes": [{"id": n.id, "capacity": n.capacity, "children": list(n.children)} for n in self.nodes],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CacheTopology":
        try:
            nodes = tuple(CacheNode(str(n["id"]), int(n["capacity"]), tuple(str(c) for c in n.get("children", ())))
                          for n in data["nodes"])
            return cls(nodes, str(data["root"]))
        except KeyError as exc:
            raise ConfigError(f"missing field {exc.args[0]!r} in topology") from None

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "CacheTopology":
        return cls.from_dict(json.loads(Path(path).read_text()))


def single_class(profile: PopularityProfile, volumes: VolumeDistribution, gamma: float,
                 horizon: float, **kwargs) -> TrafficConfig:
    """Shorthand for a one-class traffic configuration."""
    return TrafficConfig(gamma=gamma, classes=(ContentClass(profile, volumes),), horizon=horizon, **kwargs)
