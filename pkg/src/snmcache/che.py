"""Che's approximation for a single LRU cache fed by shot-noise traffic.

Under the approximation every content is evicted a fixed time ``T_C`` after
its last request.  A content of age ``tau`` is then in the cache iff it was
requested during the window of ages ``[tau - T_C, tau]``, whose popularity
mass is ``g(tau) = Lambda(tau) - Lambda(tau - T_C)``.  Averaging over the
volume law turns occupancy and hit rate into one-dimensional integrals of
``E[exp(-g V)]`` and ``E[V exp(-g V)]`` over the age.

Class weights combine with the per-class request rates: the hit ratio is the
expected hit rate divided by the expected request rate, both summed over
classes (``weighting="request"``).  ``weighting="content"`` reproduces the
variant that averages per-class hit ratios with the content weights only.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .config import ContentClass, TrafficConfig
from .quadrature import QuadratureError, geometric_breaks, integrate

TAIL_EPS = 1e-12
MAX_AGE_FACTOR = 1e15
WEIGHTINGS = ("request", "content")


@dataclass(frozen=True)
class CheSolution:
    """Eviction time and hit probability of one cache size."""

    capacity: float
    T_C: float
    p_hit: float
    residual: float = 0.0
    quad_error: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def never_fills(self) -> bool:
        return math.isinf(self.T_C)


class CheModel:
    """Analytic LRU model for a multi-class shot-noise traffic mix.

    Parameters
    ----------
    gamma : float
        Content arrival rate (contents/day).
    classes : sequence of ContentClass
        Traffic classes; weights are the probabilities of the class marks.
    filtered : iterable of str
        Labels of classes that are never admitted into the cache.  Their
        requests always miss but still count in the total request rate.
    weighting : {"request", "content"}
        How per-class contributions are combined (see module docstring).
    """

    def __init__(self, gamma: float, classes, filtered=(), weighting: str = "request"):
        if weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}")
        self.gamma = float(gamma)
        self.classes = tuple(classes)
        self.filtered = frozenset(str(f) for f in filtered)
        self.weighting = weighting
        self.active = tuple(c for c in self.classes if c.weight > 0 and c.label not in self.filtered)
        self.total_volume = sum(c.weight * c.volumes.mean() for c in self.classes)
        self.active_volume = sum(c.weight * c.volumes.mean() for c in self.active)

    @classmethod
    def from_config(cls, config: TrafficConfig, **kwargs) -> "CheModel":
        return cls(config.gamma, config.classes, **kwargs)

    # -- integrals ------------------------------------------------------------

    @staticmethod
    def _window(cls: ContentClass, tau, T):
        return cls.profile.window(tau, T)

    @staticmethod
    def _end_age(cls: ContentClass) -> float:
        p = cls.profile
        return min(p.tail_age(TAIL_EPS), MAX_AGE_FACTOR * p.delta)

    def _breaks(self, cls: ContentClass, T: float, end: float) -> np.ndarray:
        pts = [0.0, end]
        if 0 < T < end:
            pts.append(T)
        for k in cls.profile.kinks():
            for b in (k, k + T):
                if 0 < b < end:
                    pts.append(b)
        scale = min(cls.profile.delta, T) if T > 0 else cls.profile.delta
        pts.extend(geometric_breaks(scale * 1e-3, end))
        return np.array(pts)

    def _occupancy_integral(self, cls: ContentClass, T: float):
        """``int_0^inf 1 - E[exp(-g V)] dtau`` for one class."""
        if T <= 0:
            return 0.0, 0.0
        end = T + self._end_age(cls)
        vol = cls.volumes

        def f(tau):
            return vol.laplace_complement(self._window(cls, tau, T))[0]

        res = integrate(f, self._breaks(cls, T, end), epsrel=1e-10)
        return res.value, res.error

    def _hit_integral(self, cls: ContentClass, T: float):
        """``int_0^inf lambda(tau) E[V (1 - exp(-g V))] dtau``: hits per content of the class."""
        end = self._end_age(cls)
        if T <= 0:
            return 0.0, 0.0
        vol = cls.volumes
        prof = cls.profile

        def f(tau):
            return prof.density(tau) * vol.laplace_complement(self._window(cls, tau, T))[1]

        res = integrate(f, self._breaks(cls, min(T, end), end), epsrel=1e-10)
        return res.value, res.error

    # -- public surface -------------------------------------------------------

    def occupancy(self, T: float) -> float:
        """Expected number of cached contents for eviction time `T` (days)."""
        return self.occupancy_with_error(T)[0]

    def occupancy_with_error(self, T: float) -> tuple[float, float]:
        if T < 0:
            raise ValueError("eviction time must be non-negative")
        if math.isinf(T):
            return math.inf, 0.0
        total, err = 0.0, 0.0
        for c in self.active:
            v, e = self._occupancy_integral(c, T)
            total += c.weight * v
            err += c.weight * e
        return self.gamma * total, self.gamma * err

    def hit_probability(self, T: float) -> float:
        return self.hit_probability_with_error(T)[0]

    def hit_probability_with_error(self, T: float) -> tuple[float, float]:
        if T < 0:
            raise ValueError("eviction time must be non-negative")
        if math.isinf(T):
            return self.large_cache_phit(), 0.0
        if self.total_volume <= 0:
            return 0.0, 0.0
        hits, err = 0.0, 0.0
        for c in self.active:
            h, e = self._hit_integral(c, T)
            m = c.volumes.mean()
            if self.weighting == "request":
                hits += c.weight * h / self.total_volume
                err += c.weight * e / self.total_volume
            else:
                hits += c.weight * h / m
                err += c.weight * e / m
        return min(max(hits, 0.0), 1.0), err

    def solve(self, capacity: float, rtol: float = 1e-8) -> CheSolution:
        """Solve the occupancy equation for `capacity` and evaluate the hit probability."""
        if capacity < 0:
            raise ValueError("capacity must be non-negative")
        if not self.active:
            if capacity > 0:
                warnings.warn("every class is filtered: the hit probability is zero", stacklevel=2)
            return CheSolution(capacity, math.inf if capacity > 0 else 0.0, 0.0)
        if capacity == 0 or self.gamma == 0:
            if self.gamma == 0 and capacity > 0:
                return CheSolution(capacity, math.inf, 0.0)
            return CheSolution(capacity, 0.0, 0.0)

        T_lo = 0.0
        T_hi = 2.0 * capacity / (self.gamma * self.active_volume)
        limit = 1e9 * max(c.life_span for c in self.active)
        while self.occupancy(T_hi) < capacity:
            T_lo, T_hi = T_hi, 2.0 * T_hi
            if T_hi > limit:
                p = self.large_cache_phit()
                return CheSolution(capacity, math.inf, p, diagnostics={"reason": "cache never fills"})

        T = optimize.brentq(lambda t: self.occupancy(t) - capacity, T_lo, T_hi, xtol=1e-300, rtol=1e-14,
                            maxiter=200)
        occ, occ_err = self.occupancy_with_error(T)
        residual = abs(occ - capacity) / capacity
        if residual > rtol:
            raise QuadratureError("occupancy equation not solved to tolerance", T, residual)
        p, p_err = self.hit_probability_with_error(T)
        return CheSolution(capacity, T, p, residual=residual, quad_error=max(occ_err / capacity, p_err),
                           diagnostics={"occupancy_error": occ_err, "hit_error": p_err})

    def large_cache_phit(self) -> float:
        """Hit probability in the limit of an infinite eviction time."""
        if self.total_volume <= 0:
            return 0.0
        p = 0.0
        for c in self.active:
            m = c.volumes.mean()
            miss = float(c.volumes.laplace_complement(np.array([1.0]))[0][0])
            if self.weighting == "request":
                p += c.weight * (m - miss) / self.total_volume
            else:
                p += c.weight * (1.0 - miss / m)
        return p

    def small_cache_phit(self, capacity: float) -> float:
        """Linearized hit probability, valid while it is small."""
        if not self.active:
            return 0.0
        T = capacity / (self.gamma * self.active_volume)
        acc = 0.0
        for c in self.active:
            m2 = c.volumes.second_moment()
            if self.weighting == "request":
                acc += c.weight * m2 / c.life_span / self.total_volume
            else:
                acc += c.weight * m2 / (c.life_span * c.volumes.mean())
        return T * acc

    def curve(self, capacities) -> list[dict]:
        """Rows of ``capacity, T_C_days, p_hit, p_hit_small_approx, p_hit_large_asymptote``."""
        large = self.large_cache_phit()
        rows = []
        for cap in capacities:
            sol = self.solve(float(cap))
            try:
                small = self.small_cache_phit(float(cap))
            except ValueError:
                small = math.nan
            rows.append({"capacity": cap, "T_C_days": sol.T_C, "p_hit": sol.p_hit,
                         "p_hit_small_approx": small, "p_hit_large_asymptote": large})
        return rows

    def required_capacity(self, target: float, rtol: float = 1e-6) -> float:
        """Cache size (real-valued) at which the model reaches hit probability `target`."""
        large = self.large_cache_phit()
        if not 0 < target < large:
            raise ValueError(f"target {target} outside (0, {large:.6g})")

        def p_of_T(t):
            return self.hit_probability(t) - target

        T_hi = 1e-3 * min(c.life_span for c in self.active)
        while p_of_T(T_hi) < 0:
            T_hi *= 2.0
        T = optimize.brentq(p_of_T, 0.0, T_hi, rtol=rtol * 1e-2)
        return self.occupancy(T)


# -- functional surface ---------------------------------------------------------

def capacity_of_tc(T: float, gamma: float, classes, **kwargs) -> float:
    return CheModel(gamma, classes, **kwargs).occupancy(T)


def solve_tc(capacity: float, gamma: float, classes, **kwargs) -> CheSolution:
    return CheModel(gamma, classes, **kwargs).solve(capacity)


def hit_probability(T: float, classes, **kwargs) -> float:
    return CheModel(1.0, classes, **kwargs).hit_probability(T)


def small_cache_phit(capacity: float, gamma: float, classes, **kwargs) -> float:
    return CheModel(gamma, classes, **kwargs).small_cache_phit(capacity)


def large_cache_phit(classes, **kwargs) -> float:
    return CheModel(1.0, classes, **kwargs).large_cache_phit()


def filtered_phit(capacity: float, gamma: float, classes, filtered, **kwargs) -> float:
    return CheModel(gamma, classes, filtered=filtered, **kwargs).solve(capacity).p_hit


def phit_vs_capacity_curve(config: TrafficConfig, capacities, **kwargs) -> list[dict]:
    return CheModel.from_config(config, **kwargs).curve(capacities)
