"""Fit a multi-class shot-noise model to a request trace.

Each content gets a request count ``V`` and a life-span estimate
``L = N^2 * bin / sum(n_i^2)`` from its histogram of requests in one-day
bins (``n_i`` requests in bin ``i``, ``N`` in total).  The estimate is the
reciprocal of the squared-density integral of the histogram, so a uniform
spread over ``k`` bins gives ``k`` days.  Contents are then grouped by the
thresholds below and each group becomes one content class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ContentClass, IngressModel, TrafficConfig
from .profiles import PopularityProfile
from .tracegen import RequestTrace
from .volumes import VolumeDistribution

MIN_REQUESTS = 10
LIFE_SPAN_EDGES = (2.0, 5.0, 8.0, 13.0)
N_CLASSES = 6
STATIONARY = (0, 5)
CLASS_RULES = (
    "V < 10",
    "V >= 10, L <= 2",
    "V >= 10, 2 < L <= 5",
    "V >= 10, 5 < L <= 8",
    "V >= 10, 8 < L <= 13",
    "V >= 10, L > 13",
)


@dataclass(frozen=True, eq=False)
class ContentStats:
    """Per-content statistics, one row per distinct content (sorted by id).

    ``life_span`` is NaN for contents with fewer than ten requests.
    ``ingress_counts[i, j]`` counts requests of content ``i`` at ingress ``j``.
    """

    content: np.ndarray
    requests: np.ndarray
    life_span: np.ndarray
    first: np.ndarray
    last: np.ndarray
    ingress_counts: np.ndarray
    ingress_ids: tuple
    bin_width: float = 1.0

    def __len__(self) -> int:
        return len(self.content)

    def index(self) -> dict:
        return {int(c): i for i, c in enumerate(self.content)}


@dataclass(frozen=True)
class ClassPartition:
    """Class of every content plus per-class summary rows."""

    labels: np.ndarray
    rows: tuple

    def shares(self) -> np.ndarray:
        return np.array([r["pct_videos"] / 100.0 for r in self.rows])


def _measured_view(trace: RequestTrace, measured_only: bool):
    if measured_only and trace.pre_horizon.any():
        m = ~trace.pre_horizon
        return trace.time[m], trace.content[m], trace.ingress[m]
    return trace.time, trace.content, trace.ingress


def estimate_stats(trace: RequestTrace, bin_width: float = 1.0, measured_only: bool = True) -> ContentStats:
    """Request count and histogram life-span of every content in `trace`."""
    t, c, ing = _measured_view(trace, measured_only)
    if len(t) == 0:
        raise ValueError("cannot estimate statistics of an empty trace")
    ids, inv, counts = np.unique(c, return_inverse=True, return_counts=True)
    bins = np.floor(t / bin_width).astype(np.int64)
    pair = inv.astype(np.int64) * (bins.max() - bins.min() + 1) + (bins - bins.min())
    _, pair_inv = np.unique(pair, return_inverse=True)
    per_bin = np.bincount(pair_inv)
    owner = np.zeros(len(per_bin), dtype=np.int64)
    owner[pair_inv] = inv
    sq = np.bincount(owner, weights=per_bin.astype(float) ** 2, minlength=len(ids))
    life = counts.astype(float) ** 2 * bin_width / sq
    life[counts < MIN_REQUESTS] = np.nan
    first = np.full(len(ids), np.inf)
    last = np.full(len(ids), -np.inf)
    np.minimum.at(first, inv, t)
    np.maximum.at(last, inv, t)
    n_ing = len(trace.ingress_ids)
    ing_counts = np.bincount(inv * n_ing + ing, minlength=len(ids) * n_ing).reshape(len(ids), n_ing)
    return ContentStats(ids, counts, life, first, last, ing_counts, tuple(trace.ingress_ids), bin_width)


def classify_values(requests, life_span) -> np.ndarray:
    """Class index (0..5) for request counts and life-span estimates."""
    v = np.asarray(requests, dtype=float)
    L = np.asarray(life_span, dtype=float)
    cls = 1 + np.searchsorted(np.asarray(LIFE_SPAN_EDGES), np.nan_to_num(L, nan=0.0), side="left")
    return np.where(v < MIN_REQUESTS, 0, cls).astype(np.int64)


def classify(stats: ContentStats) -> ClassPartition:
    """Assign every content to a class and summarize each class."""
    labels = classify_values(stats.requests, stats.life_span)
    total_req = stats.requests.sum()
    rows = []
    for k in range(N_CLASSES):
        m = labels == k
        n = int(m.sum())
        rows.append({
            "class": k,
            "rule": CLASS_RULES[k],
            "pct_reqs": float(100.0 * stats.requests[m].sum() / total_req),
            "pct_videos": 100.0 * n / len(labels),
            "mean_life_span": float(np.nanmean(stats.life_span[m])) if n and k else float("nan"),
            "mean_volume": float(stats.requests[m].mean()) if n else float("nan"),
            "contents": n,
        })
    return ClassPartition(labels, tuple(rows))


def fit_config(trace: RequestTrace, profile_kind: str = "exponential", horizon: float | None = None,
               zeta: float | None = None, seed: int = 0, warmup: float | None = None) -> TrafficConfig:
    """Traffic configuration that mimics `trace`.

    Classes 1-4 keep a shot-noise profile of the given kind, matched to the
    class-mean life-span.  Classes 0 and 5 are treated as stationary:
    uniform profiles as long as the observation window.  Volumes follow the
    empirical per-class request counts and the arrival rate of every class
    is its number of observed contents per day.  Several ingress points turn
    into an unlocalized ingress model weighted by per-ingress volume.
    """
    stats = estimate_stats(trace)
    if len(stats) < 2:
        raise ValueError("a trace with a single content cannot be fitted")
    part = classify(stats)
    if horizon is None:
        span = stats.last.max() - min(stats.first.min(), 0.0)
        horizon = float(trace.horizon) if np.isfinite(trace.horizon) and trace.horizon > 0 else float(span)
    if not horizon > 0:
        raise ValueError("cannot fit a trace spanning zero time")
    n = len(stats)
    classes = []
    for k in range(N_CLASSES):
        m = part.labels == k
        if not m.any():
            continue
        if k in STATIONARY:
            prof = PopularityProfile("uniform", horizon)
        else:
            prof = PopularityProfile.from_life_span(profile_kind, float(np.nanmean(stats.life_span[m])), zeta)
        vols = VolumeDistribution.empirical(stats.requests[m].astype(float))
        classes.append(ContentClass(prof, vols, m.sum() / n, label=str(k)))
    # exact unit sum after float division
    total = sum(c.weight for c in classes)
    classes[-1] = ContentClass(classes[-1].profile, classes[-1].volumes, classes[-1].weight + 1.0 - total,
                               classes[-1].label)
    if len(stats.ingress_ids) > 1:
        share = stats.ingress_counts.sum(axis=0) / stats.ingress_counts.sum()
        ingress = IngressModel("unlocalized", tuple(float(x) for x in share))
    else:
        ingress = IngressModel()
    return TrafficConfig(gamma=n / horizon, classes=tuple(classes), horizon=horizon, ingress=ingress,
                         seed=seed, warmup=warmup if warmup is not None else horizon)


def merge_traces(*traces: RequestTrace) -> RequestTrace:
    """Union of several traces (same content id space), re-sorted by time."""
    names: list = []
    for tr in traces:
        names.extend(n for n in tr.ingress_ids if n not in names)
    t = np.concatenate([tr.time for tr in traces])
    c = np.concatenate([tr.content for tr in traces])
    ing = np.concatenate([np.array([names.index(n) for n in tr.ingress_ids], dtype=np.int32)[tr.ingress]
                          for tr in traces])
    pre = np.concatenate([tr.pre_horizon for tr in traces])
    order = np.argsort(t, kind="stable")
    return RequestTrace(t[order], c[order], ing[order], pre[order], tuple(names),
                        horizon=max(tr.horizon for tr in traces))


def _interval(stats: ContentStats, content) -> tuple[float, float]:
    idx = np.searchsorted(stats.content, content)
    if idx >= len(stats.content) or stats.content[idx] != content:
        raise KeyError(f"content {content} is not in the trace")
    return float(stats.first[idx]), float(stats.last[idx])


def time_overlap_fraction(content, trace_a: RequestTrace, trace_b: RequestTrace) -> float:
    """Length of the intersection over the union of the content's two active periods.

    The active period runs from the first to the last request of the content.
    """
    a0, a1 = _interval(estimate_stats(trace_a), content)
    b0, b1 = _interval(estimate_stats(trace_b), content)
    return interval_overlap((a0, a1), (b0, b1))


def interval_overlap(a, b) -> float:
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = max(a[1], b[1]) - min(a[0], b[0])
    if union <= 0:
        return 1.0 if a == b else 0.0
    return inter / union


def cross_classify(trace_a: RequestTrace, trace_b: RequestTrace) -> np.ndarray:
    """Row-stochastic matrix: share of class-i contents of A falling in class j of B.

    Contents of A missing from B have no requests there and so count as
    class 0.  Rows of classes with no contents in A are NaN.
    """
    sa, sb = estimate_stats(trace_a), estimate_stats(trace_b)
    la = classify(sa).labels
    lb_all = classify(sb).labels
    pos = np.searchsorted(sb.content, sa.content)
    pos = np.minimum(pos, len(sb.content) - 1)
    found = sb.content[pos] == sa.content
    lb = np.where(found, lb_all[pos], 0)
    out = np.zeros((N_CLASSES, N_CLASSES))
    np.add.at(out, (la, lb), 1.0)
    rows = out.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        return np.where(rows > 0, out / np.where(rows > 0, rows, 1.0), np.nan)


def request_count_correlation(trace_a: RequestTrace, trace_b: RequestTrace, min_requests: int = 0) -> float:
    """Pearson correlation of per-content request counts over the joint catalogue.

    A content absent from one trace counts zero requests there.  With
    `min_requests`, only contents reaching that count in either trace are kept.
    """
    sa, sb = estimate_stats(trace_a), estimate_stats(trace_b)
    ids = np.union1d(sa.content, sb.content)
    va = np.zeros(len(ids))
    vb = np.zeros(len(ids))
    va[np.searchsorted(ids, sa.content)] = sa.requests
    vb[np.searchsorted(ids, sb.content)] = sb.requests
    keep = np.maximum(va, vb) >= min_requests
    if keep.sum() < 2:
        raise ValueError("need at least two contents to correlate")
    return float(np.corrcoef(va[keep], vb[keep])[0, 1])


def split_by_ingress(trace: RequestTrace) -> list[RequestTrace]:
    """One trace per ingress point (same ids and timestamps)."""
    out = []
    for j, name in enumerate(trace.ingress_ids):
        m = trace.ingress == j
        out.append(RequestTrace(trace.time[m].copy(), trace.content[m].copy(),
                                np.zeros(int(m.sum()), np.int32), trace.pre_horizon[m].copy(),
                                (name,), horizon=trace.horizon))
    return out


def classification_rows(partition: ClassPartition) -> list[dict]:
    return [dict(r) for r in partition.rows]
