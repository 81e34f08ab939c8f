"""Synthetic request traces: generation, time warping and slice shuffling."""

from __future__ import annotations

import csv
import gzip
import hashlib
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import CacheTopology, ConfigError, TrafficConfig

CSV_HEADER = ("time_days", "content_id", "ingress_id", "pre_horizon")
_CHUNK = 2_000_000


@dataclass(frozen=True, eq=False)
class RequestTrace:
    """Time-ordered requests.

    ``ingress`` indexes into ``ingress_ids``.  ``pre_horizon`` marks requests
    outside the measured window (warm-up); simulators replay them but do not
    count them.  ``content_class`` maps (dense) content ids to indices into
    ``class_labels`` when the trace was generated from a known mix.
    """

    time: np.ndarray
    content: np.ndarray
    ingress: np.ndarray
    pre_horizon: np.ndarray
    ingress_ids: tuple = ("cache",)
    horizon: float = float("nan")
    burn_in: float = 0.0
    seed: int | None = None
    config_hash: str = ""
    content_class: np.ndarray | None = None
    class_labels: tuple = ()
    _dense: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        n = len(self.time)
        for name in ("content", "ingress", "pre_horizon"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name!r} has the wrong length")
        for arr in (self.time, self.content, self.ingress, self.pre_horizon):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return len(self.time)

    @property
    def measured(self) -> np.ndarray:
        return ~self.pre_horizon

    @property
    def n_measured(self) -> int:
        return int(np.count_nonzero(~self.pre_horizon))

    def dense_ids(self) -> tuple[np.ndarray, int]:
        """Content ids remapped to ``0..n-1`` (identity for generated traces)."""
        if not self._dense:
            c = self.content
            if len(c) == 0:
                self._dense.append((np.zeros(0, np.int64), 0))
            elif c.min() >= 0 and c.max() < max(4 * len(c), 1024):
                self._dense.append((np.asarray(c, dtype=np.int64), int(c.max()) + 1))
            else:
                uniq, inv = np.unique(c, return_inverse=True)
                self._dense.append((inv.astype(np.int64), len(uniq)))
        return self._dense[0]

    def class_label_of(self) -> dict | None:
        if self.content_class is None:
            return None
        return {i: self.class_labels[k] for i, k in enumerate(self.content_class)}

    def replace(self, **changes) -> "RequestTrace":
        changes.setdefault("_dense", [])
        return replace(self, **changes)

    def ingress_names(self) -> np.ndarray:
        return np.asarray(self.ingress_ids, dtype=object)[self.ingress]

    # -- CSV ------------------------------------------------------------------

    def to_csv(self, path) -> None:
        """Write ``time_days,content_id,ingress_id,pre_horizon``; gzip if the name ends in .gz."""
        path = Path(path)
        opener = gzip.open if path.suffix == ".gz" else open
        names = self.ingress_ids
        with opener(path, "wt", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            w.writerows(zip((f"{t:.12g}" for t in self.time.tolist()),
                            self.content.tolist(),
                            (names[i] for i in self.ingress.tolist()),
                            (int(p) for p in self.pre_horizon.tolist())))

    @classmethod
    def from_csv(cls, path, horizon: float | None = None) -> "RequestTrace":
        path = Path(path)
        opener = gzip.open if path.suffix == ".gz" else open
        with opener(path, "rt", newline="") as fh:
            return cls._read(fh, horizon)

    @classmethod
    def _read(cls, fh: io.TextIOBase, horizon: float | None) -> "RequestTrace":
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header[:3]) != CSV_HEADER[:3]:
            raise ValueError(f"unexpected trace header {header!r}")
        times, contents, ingress, pre = [], [], [], []
        names: dict[str, int] = {}
        for row in reader:
            if not row:
                continue
            times.append(float(row[0]))
            contents.append(int(row[1]))
            ingress.append(names.setdefault(row[2], len(names)))
            pre.append(len(row) > 3 and row[3].strip() in ("1", "true", "True"))
        t = np.asarray(times, dtype=float)
        if len(t) and np.any(np.diff(t) < 0):
            raise ValueError("trace times must be non-decreasing")
        if horizon is None:
            meas = t[~np.asarray(pre, dtype=bool)] if len(t) else t
            horizon = float(meas.max()) if len(meas) else 0.0
        return cls(t, np.asarray(contents, dtype=np.int64), np.asarray(ingress, dtype=np.int32),
                   np.asarray(pre, dtype=bool), tuple(names) or ("cache",), horizon=horizon)


def config_hash(config: TrafficConfig) -> str:
    return hashlib.sha256(config.to_json().encode()).hexdigest()[:16]


def generate(config: TrafficConfig, topology: CacheTopology | None = None) -> RequestTrace:
    """Draw a shot-noise request trace.

    Contents of each class arrive as a Poisson process of rate
    ``gamma * weight`` on ``[-burn_in, horizon]``.  Given its volume ``V`` and
    arrival time, a content issues a Poisson number of requests whose ages
    are i.i.d. draws from the profile, obtained by inverting its cumulative
    function.  Every request picks its ingress leaf from the content's split
    vector.  Output is sorted by time with ties kept in generation order.
    """
    leaves = topology.leaves if topology is not None else ("cache",)
    splits = config.ingress.split_types(len(leaves))
    split_probs = np.array([p for p, _ in splits])
    split_vecs = np.array([v for _, v in splits])
    rng = np.random.default_rng(config.seed)
    H = config.horizon
    warm = config.warmup

    times, owners, ingress, classes = [], [], [], []
    n_contents = 0
    for k, cls in enumerate(config.classes):
        if cls.weight <= 0 or config.gamma <= 0:
            continue
        B = config.effective_burn_in if warm is None else config.class_burn_in(cls)
        total = int(rng.poisson(config.gamma * cls.weight * (B + H)))
        prof = cls.profile
        for start in range(0, total, _CHUNK):
            m = min(_CHUNK, total - start)
            tau = rng.uniform(-B, H, size=m)
            vol = cls.volumes.sample(rng, m)
            stype = rng.choice(len(splits), size=m, p=split_probs) if len(splits) > 1 else np.zeros(m, np.int64)
            if warm is None:
                lo = np.zeros(m)
                mass = np.ones(m)
            else:
                lo = prof.cdf(-warm - tau)
                mass = prof.cdf(H - tau) - lo
            counts = rng.poisson(vol * mass)
            owner = np.repeat(np.arange(m), counts)
            u = lo[owner] + rng.random(len(owner)) * mass[owner]
            u = np.minimum(u, np.nextafter(1.0, 0.0))
            times.append(tau[owner] + prof.quantile(u))
            # only contents with at least one request get an id
            seen = counts > 0
            local = np.cumsum(seen) - 1
            owners.append(local[owner] + n_contents)
            ingress.append(_draw_ingress(rng, stype[owner], split_vecs))
            n_seen = int(seen.sum())
            classes.append(np.full(n_seen, k, dtype=np.int16))
            n_contents += n_seen

    if times:
        t = np.concatenate(times)
        ids = np.concatenate(owners).astype(np.int64)
        ing = np.concatenate(ingress).astype(np.int32)
        cc = np.concatenate(classes)
    else:
        t, ids, ing, cc = np.zeros(0), np.zeros(0, np.int64), np.zeros(0, np.int32), np.zeros(0, np.int16)
    order = np.argsort(t, kind="stable")
    t, ids, ing = t[order], ids[order], ing[order]
    return RequestTrace(
        time=t, content=ids, ingress=ing, pre_horizon=(t < 0) | (t > H),
        ingress_ids=tuple(leaves), horizon=H,
        burn_in=config.effective_burn_in if warm is None else float(warm),
        seed=config.seed, config_hash=config_hash(config),
        content_class=cc, class_labels=tuple(c.label for c in config.classes),
    )


def _draw_ingress(rng, stype: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    n_leaves = vecs.shape[1]
    out = np.zeros(len(stype), dtype=np.int32)
    if n_leaves == 1:
        return out
    for s, vec in enumerate(vecs):
        mask = stype == s
        n = int(mask.sum())
        if n == 0:
            continue
        nz = np.flatnonzero(vec)
        if len(nz) == 1:
            out[mask] = nz[0]
        else:
            out[mask] = rng.choice(n_leaves, size=n, p=vec)
    return out


@dataclass(frozen=True)
class VirtualTimeWarp:
    """Piecewise-linear increasing map of real time to virtual time.

    Knots ``(t_j, w_j)`` must be strictly increasing in both coordinates and
    pass through the origin.  Beyond the outer knots the map continues with
    slope one, and the knots must have an average slope of one, so that
    ``w(t) / t -> 1``.
    """

    t: tuple
    w: tuple

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if len(t) != len(w) or len(t) < 2:
            raise ValueError("a warp needs at least two (t, w) knots")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(w) <= 0):
            raise ValueError("warp knots must be strictly increasing")
        if not t[0] <= 0 <= t[-1] or abs(np.interp(0.0, t, w)) > 1e-12 * max(1.0, abs(w[-1])):
            raise ValueError("a warp must map 0 to 0")
        slope = (w[-1] - w[0]) / (t[-1] - t[0])
        if abs(slope - 1.0) > 1e-9:
            raise ValueError(f"average warp slope is {slope}, expected 1")

    def __call__(self, x):
        t = np.asarray(self.t, dtype=float)
        w = np.asarray(self.w, dtype=float)
        x = np.asarray(x, dtype=float)
        if np.array_equal(t, w):
            return x.copy()
        out = np.interp(x, t, w)
        out = np.where(x < t[0], w[0] + (x - t[0]), out)
        return np.where(x > t[-1], w[-1] + (x - t[-1]), out)

    @classmethod
    def diurnal(cls, start: float, stop: float, amplitude: float = 0.5, period: float = 1.0,
                knots_per_period: int = 48, phase: float = 0.0) -> "VirtualTimeWarp":
        """Piecewise-linear approximation of ``t - a p / (2 pi) (sin(2 pi t / p + phase) - sin(phase))``.

        The rate ``w'(t) = 1 - a cos(2 pi t / p + phase)`` oscillates around one.
        `start` and `stop` are rounded outwards to whole periods.
        """
        if not 0 <= amplitude < 1:
            raise ValueError("amplitude must lie in [0, 1)")
        k0 = np.floor(min(start, 0.0) / period)
        k1 = np.ceil(max(stop, 0.0) / period)
        n = int((k1 - k0) * knots_per_period) + 1
        t = np.linspace(k0 * period, k1 * period, n)
        t = np.union1d(t, [0.0])
        w = t - amplitude * period / (2 * np.pi) * (np.sin(2 * np.pi * t / period + phase) - np.sin(phase))
        return cls(tuple(t), tuple(w))


def warp(trace: RequestTrace, w: VirtualTimeWarp) -> RequestTrace:
    """Map every timestamp through `w`; request order and ids are untouched."""
    new_t = np.maximum.accumulate(w(trace.time)) if len(trace) else trace.time.copy()
    return trace.replace(time=new_t, horizon=float(w(trace.horizon)) if np.isfinite(trace.horizon) else trace.horizon,
                         content=trace.content.copy(), ingress=trace.ingress.copy(),
                         pre_horizon=trace.pre_horizon.copy())


def shuffle_k_slices(trace: RequestTrace, k: int, seed=None) -> RequestTrace:
    """Randomly permute requests inside each of `k` consecutive slices.

    Slices hold ``len(trace) // k`` requests each, the last one taking the
    remainder.  Content and ingress ids move together; timestamps and
    warm-up flags stay at their positions, so only the id sequence changes.
    """
    n = len(trace)
    if k < 1 or k > max(n, 1):
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    size = n // k
    perm = np.arange(n)
    for s in range(k):
        lo = s * size
        hi = n if s == k - 1 else lo + size
        if hi - lo > 1:
            perm[lo:hi] = lo + rng.permutation(hi - lo)
    return trace.replace(content=trace.content[perm], ingress=trace.ingress[perm],
                         time=trace.time.copy(), pre_horizon=trace.pre_horizon.copy())
