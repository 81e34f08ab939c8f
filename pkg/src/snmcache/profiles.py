"""Temporal popularity profiles of individual contents.

A profile is a probability density over the age of a content (days since
it entered the catalogue).  All three supported shapes have closed-form
densities, cumulative functions, inverses and life-spans, so the trace
generator can sample request ages exactly and the analytic engine never
needs to integrate the density numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNIFORM = "uniform"
EXPONENTIAL = "exponential"
POWERLAW = "powerlaw"
KINDS = (UNIFORM, EXPONENTIAL, POWERLAW)

# Keeps the power-law life-span finite and well conditioned.
MIN_ZETA = 1.0 + 1e-6


@dataclass(frozen=True)
class PopularityProfile:
    """Normalized request-rate shape as a function of content age.

    Parameters
    ----------
    kind : str
        One of ``"uniform"``, ``"exponential"`` or ``"powerlaw"``.
    delta : float
        Shape (scale) parameter, in days.
    zeta : float, optional
        Power-law exponent; only used (and required) for ``"powerlaw"``.
    """

    kind: str
    delta: float
    zeta: float | None = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError(f"delta must be positive and finite, got {self.delta}")
        if kind == POWERLAW:
            if self.zeta is None or not self.zeta > MIN_ZETA:
                raise ValueError(f"power-law profile needs zeta > {MIN_ZETA}, got {self.zeta}")
        elif self.zeta is not None:
            object.__setattr__(self, "zeta", None)

    @classmethod
    def from_life_span(cls, kind: str, life_span: float, zeta: float | None = None) -> "PopularityProfile":
        """Build the profile of the given shape whose life-span equals `life_span`."""
        if not life_span > 0:
            raise ValueError(f"life-span must be positive, got {life_span}")
        kind = str(kind).lower()
        if kind == UNIFORM:
            return cls(kind, life_span)
        if kind == EXPONENTIAL:
            return cls(kind, life_span / 2.0)
        if kind == POWERLAW:
            if zeta is None or not zeta > MIN_ZETA:
                raise ValueError(f"power-law profile needs zeta > {MIN_ZETA}, got {zeta}")
            return cls(kind, life_span * (zeta - 1.0) ** 2 / (2.0 * zeta - 1.0), zeta)
        raise ValueError(f"unknown profile kind {kind!r}")

    @property
    def life_span(self) -> float:
        """Average life-span ``1 / int density(t)^2 dt`` in days."""
        if self.kind == UNIFORM:
            return self.delta
        if self.kind == EXPONENTIAL:
            return 2.0 * self.delta
        z = self.zeta
        return self.delta * (2.0 * z - 1.0) / (z - 1.0) ** 2

    def density(self, t):
        t = np.asarray(t, dtype=float)
        d = self.delta
        with np.errstate(over="ignore", invalid="ignore"):
            if self.kind == UNIFORM:
                out = np.where((t >= 0) & (t <= d), 1.0 / d, 0.0)
            elif self.kind == EXPONENTIAL:
                out = np.where(t >= 0, np.exp(-np.maximum(t, 0.0) / d) / d, 0.0)
            else:
                z = self.zeta
                out = np.where(t >= 0, (z - 1.0) / d * (np.maximum(t, 0.0) / d + 1.0) ** (-z), 0.0)
        return out if out.ndim else float(out)

    def cdf(self, t):
        """Cumulative popularity ``int_0^t density``; zero for negative ages."""
        t = np.asarray(t, dtype=float)
        tp = np.maximum(t, 0.0)
        d = self.delta
        if self.kind == UNIFORM:
            out = np.minimum(tp / d, 1.0)
        elif self.kind == EXPONENTIAL:
            out = -np.expm1(-tp / d)
        else:
            out = -np.expm1((1.0 - self.zeta) * np.log1p(tp / d))
        return out if out.ndim else float(out)

    def survival(self, t):
        """``1 - cdf(t)``, computed without cancellation for large ages."""
        t = np.asarray(t, dtype=float)
        tp = np.maximum(t, 0.0)
        d = self.delta
        if self.kind == UNIFORM:
            out = np.maximum(1.0 - tp / d, 0.0)
        elif self.kind == EXPONENTIAL:
            out = np.exp(-tp / d)
        else:
            out = np.exp((1.0 - self.zeta) * np.log1p(tp / d))
        return out if out.ndim else float(out)

    def window(self, t, width: float):
        """Popularity mass in ``(t - width, t]``, accurate when `width` is tiny next to `t`."""
        t = np.asarray(t, dtype=float)
        s = np.maximum(t - width, 0.0)
        # t - s would round to zero when width is far below t
        w = np.where(t - width > 0, width, np.maximum(t, 0.0))
        d = self.delta
        with np.errstate(over="ignore", invalid="ignore"):
            if self.kind == UNIFORM:
                out = (np.clip(t, 0.0, d) - np.minimum(s, d)) / d
            elif self.kind == EXPONENTIAL:
                out = np.exp(-s / d) * -np.expm1(-w / d)
            else:
                z = self.zeta
                out = self.survival(t) * np.expm1((z - 1.0) * np.log1p(w / (d + s)))
        out = np.where(t > 0, np.maximum(out, 0.0), 0.0)
        return out if out.ndim else float(out)

    def quantile(self, u):
        """Inverse of :meth:`cdf` on ``[0, 1)``."""
        u = np.asarray(u, dtype=float)
        d = self.delta
        if self.kind == UNIFORM:
            out = u * d
        elif self.kind == EXPONENTIAL:
            out = -d * np.log1p(-u)
        else:
            out = d * np.expm1(np.log1p(-u) / (1.0 - self.zeta))
        return out if out.ndim else float(out)

    def tail_age(self, eps: float) -> float:
        """Smallest age beyond which at most a fraction `eps` of requests fall."""
        if self.kind == UNIFORM:
            return self.delta
        return float(self.quantile(1.0 - eps))

    def kinks(self) -> tuple[float, ...]:
        """Ages where the density is not smooth (besides zero)."""
        return (self.delta,) if self.kind == UNIFORM else ()

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "delta": self.delta}
        if self.zeta is not None:
            out["zeta"] = self.zeta
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PopularityProfile":
        if "life_span" in data:
            return cls.from_life_span(data["kind"], data["life_span"], data.get("zeta"))
        return cls(data["kind"], data["delta"], data.get("zeta"))
