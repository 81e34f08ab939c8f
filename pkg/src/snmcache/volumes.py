"""Laws of the per-content request volume.

The volume of a content is the expected number of requests it attracts over
its whole life; the realized count is Poisson given the volume.  Besides the
moments, the analysis needs the moment generating function and its
derivative at non-positive arguments, ``E[exp(-x V)]`` and
``E[V exp(-x V)]`` for ``x >= 0``.  For Pareto laws these are computed by
adaptive quadrature after the substitution ``u = v_min / v``, which maps the
unbounded support onto ``(0, 1]``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, interpolate, optimize, special

PARETO = "pareto"
TRUNCATED_PARETO = "truncated_pareto"
DETERMINISTIC = "deterministic"
EMPIRICAL = "empirical"
KINDS = (PARETO, TRUNCATED_PARETO, DETERMINISTIC, EMPIRICAL)

_QUAD_EPSREL = 1e-11


class InfiniteMomentError(ValueError):
    """Raised when a requested moment of the volume law diverges."""


@dataclass(frozen=True)
class VolumeDistribution:
    """Distribution of the expected request volume ``V`` of a content.

    Use the named constructors (:meth:`pareto`, :meth:`truncated_pareto`,
    :meth:`deterministic`, :meth:`empirical`) rather than the raw fields.
    """

    kind: str
    beta: float | None = None
    v_min: float | None = None
    v_max: float | None = None
    value: float | None = None
    samples: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown volume law {self.kind!r}")
        if self.kind in (PARETO, TRUNCATED_PARETO):
            if self.beta is None or not self.beta > 1:
                raise InfiniteMomentError(f"Pareto exponent must exceed 1 for a finite mean, got {self.beta}")
            if self.v_min is None or not self.v_min > 0:
                raise ValueError(f"v_min must be positive, got {self.v_min}")
            if self.kind == TRUNCATED_PARETO:
                if self.v_max is None or not self.v_max > self.v_min:
                    raise ValueError("truncated Pareto needs v_max > v_min")
        elif self.kind == DETERMINISTIC:
            if self.value is None or not self.value > 0:
                raise ValueError(f"deterministic volume must be positive, got {self.value}")
        else:
            if len(self.samples) == 0 or min(self.samples) <= 0:
                raise ValueError("empirical volume law needs positive samples")

    # -- constructors -------------------------------------------------------

    @classmethod
    def pareto(cls, beta: float, v_min: float | None = None, mean: float | None = None):
        """Pareto law ``f(v) = beta v_min^beta / v^(1 + beta)`` for ``v >= v_min``.

        Exactly one of `v_min` or `mean` must be given.
        """
        if (v_min is None) == (mean is None):
            raise ValueError("give exactly one of v_min or mean")
        if v_min is None:
            if not beta > 1:
                raise InfiniteMomentError(f"Pareto exponent must exceed 1, got {beta}")
            v_min = mean * (beta - 1.0) / beta
        return cls(PARETO, beta=float(beta), v_min=float(v_min))

    @classmethod
    def truncated_pareto(cls, beta: float, v_max: float, v_min: float | None = None, mean: float | None = None):
        """Pareto law restricted to ``[v_min, v_max]`` and renormalized.

        When `mean` is given, `v_min` is solved numerically so that the
        truncated law has that mean.
        """
        if (v_min is None) == (mean is None):
            raise ValueError("give exactly one of v_min or mean")
        if v_min is None:
            if not 0 < mean < v_max:
                raise ValueError(f"target mean {mean} must lie in (0, v_max={v_max})")

            def gap(vm):
                return cls(TRUNCATED_PARETO, beta=float(beta), v_min=vm, v_max=float(v_max)).mean() - mean

            v_min = optimize.brentq(gap, v_max * 1e-12, v_max * (1 - 1e-12), xtol=1e-15, rtol=1e-15)
        return cls(TRUNCATED_PARETO, beta=float(beta), v_min=float(v_min), v_max=float(v_max))

    @classmethod
    def deterministic(cls, value: float):
        return cls(DETERMINISTIC, value=float(value))

    @classmethod
    def empirical(cls, samples):
        return cls(EMPIRICAL, samples=tuple(float(s) for s in samples))

    # -- helpers --------------------------------------------------------------

    @cached_property
    def _atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """Support points and probabilities for the discrete laws."""
        if self.kind == DETERMINISTIC:
            return np.array([self.value]), np.array([1.0])
        values, counts = np.unique(np.asarray(self.samples, dtype=float), return_counts=True)
        return values, counts / counts.sum()

    @property
    def _lower_u(self) -> float:
        return self.v_min / self.v_max if self.kind == TRUNCATED_PARETO else 0.0

    @property
    def _norm(self) -> float:
        return 1.0 - self._lower_u**self.beta

    def _raw_moment(self, k: int) -> float:
        if self.kind in (DETERMINISTIC, EMPIRICAL):
            values, probs = self._atoms
            return float(np.dot(values**k, probs))
        b, vm = self.beta, self.v_min
        if self.kind == PARETO:
            if b <= k:
                raise InfiniteMomentError(f"moment {k} of Pareto(beta={b}) is infinite")
            return b * vm**k / (b - k)
        vx = self.v_max
        if abs(b - k) < 1e-12:
            integral = math.log(vx / vm)
        else:
            integral = (vx ** (k - b) - vm ** (k - b)) / (k - b)
        return b * vm**b * integral / self._norm

    def mean(self) -> float:
        return self._raw_moment(1)

    def second_moment(self) -> float:
        return self._raw_moment(2)

    def scaled(self, factor: float) -> "VolumeDistribution":
        """Law of ``factor * V``."""
        if not factor > 0:
            raise ValueError(f"scale factor must be positive, got {factor}")
        if self.kind == PARETO:
            return VolumeDistribution(PARETO, beta=self.beta, v_min=self.v_min * factor)
        if self.kind == TRUNCATED_PARETO:
            return VolumeDistribution(TRUNCATED_PARETO, beta=self.beta,
                                      v_min=self.v_min * factor, v_max=self.v_max * factor)
        if self.kind == DETERMINISTIC:
            return VolumeDistribution.deterministic(self.value * factor)
        return VolumeDistribution.empirical(np.asarray(self.samples) * factor)

    # -- transforms -----------------------------------------------------------

    def _pareto_integrals(self, x: float) -> tuple[float, float]:
        a, b, vm = self._lower_u, self.beta, self.v_min
        c = x * vm
        if c == 0.0:
            return 1.0, self.mean()

        def f0(u):
            return b * u ** (b - 1.0) * math.exp(c / u) if u > 0 else 0.0

        def f1(u):
            return b * vm * u ** (b - 2.0) * math.exp(c / u) if u > 0 else 0.0

        opts = dict(epsabs=0.0, epsrel=_QUAD_EPSREL, limit=400)
        i0 = integrate.quad(f0, a, 1.0, **opts)[0]
        i1 = integrate.quad(f1, a, 1.0, **opts)[0]
        return i0 / self._norm, i1 / self._norm

    def _pareto_complements(self, x: float) -> tuple[float, float]:
        """``E[1 - exp(-x V)]`` and ``E[V (1 - exp(-x V))]`` without cancellation.

        Integrates in ``s = log(u)`` with ``u = v_min / v``; below ``u_lo``
        (far under ``x v_min``) the bracket equals one and the tail is exact.
        """
        a, b, vm = self._lower_u, self.beta, self.v_min
        c = x * vm
        if c == 0.0:
            return 0.0, 0.0
        u_lo = max(a, 1e-12 * min(c, 1.0))

        def f0(s):
            u = math.exp(s)
            return -b * u ** b * math.expm1(-c / u)

        def f1(s):
            u = math.exp(s)
            return -b * vm * u ** (b - 1.0) * math.expm1(-c / u)

        lo = math.log(u_lo)
        pts = [p for p in (math.log(c), math.log(10 * c)) if lo < p < 0.0] or None
        opts = dict(epsabs=0.0, epsrel=_QUAD_EPSREL, limit=400, points=pts)
        i0 = integrate.quad(f0, lo, 0.0, **opts)[0]
        i1 = integrate.quad(f1, lo, 0.0, **opts)[0]
        if u_lo > a:
            i0 += u_lo ** b
            i1 += b * vm * u_lo ** (b - 1.0) / (b - 1.0)
        return i0 / self._norm, i1 / self._norm

    def _check_argument(self, x):
        if self.kind == PARETO and np.any(np.asarray(x) > 0):
            raise ValueError("the Pareto moment generating function diverges for x > 0")

    def mgf(self, x):
        """``E[exp(x V)]``; the analysis only uses ``x <= 0``."""
        self._check_argument(x)
        if self.kind in (DETERMINISTIC, EMPIRICAL):
            values, probs = self._atoms
            out = np.exp(np.multiply.outer(np.asarray(x, dtype=float), values)) @ probs
            return float(out) if np.ndim(out) == 0 else out
        return _vectorize_scalar(lambda s: self._pareto_integrals(s)[0], x)

    def mgf_derivative(self, x):
        """``E[V exp(x V)]``."""
        self._check_argument(x)
        if self.kind in (DETERMINISTIC, EMPIRICAL):
            values, probs = self._atoms
            out = np.exp(np.multiply.outer(np.asarray(x, dtype=float), values)) @ (values * probs)
            return float(out) if np.ndim(out) == 0 else out
        return _vectorize_scalar(lambda s: self._pareto_integrals(s)[1], x)

    def laplace_pair(self, x, x_max: float = 1.0):
        """Return ``(E[exp(-x V)], E[V exp(-x V)])`` for arrays of ``x >= 0``."""
        c0, c1 = self.laplace_complement(x, x_max)
        return 1.0 - c0, self.mean() - c1

    def laplace_complement(self, x, x_max: float = 1.0):
        """Return ``(E[1 - exp(-x V)], E[V (1 - exp(-x V))])`` for arrays of ``x >= 0``.

        This is the fast path used inside the analytic integrals; both terms
        keep full relative accuracy as ``x -> 0``.  Discrete laws with few
        atoms are evaluated exactly, the others go through a cached log-log
        spline table covering ``[0, x_max]``.
        """
        x = np.asarray(x, dtype=float)
        if self.kind in (DETERMINISTIC, EMPIRICAL) and len(self._atoms[0]) <= 256:
            values, probs = self._atoms
            e = -np.expm1(-np.multiply.outer(x, values))
            return e @ probs, e @ (values * probs)
        return _laplace_table(self, max(float(x_max), 1.0))(x)

    # -- sampling and quadrature ----------------------------------------------

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == DETERMINISTIC:
            return np.full(size, self.value)
        if self.kind == EMPIRICAL:
            values, probs = self._atoms
            return rng.choice(values, size=size, p=probs)
        u = 1.0 - rng.random(size)  # in (0, 1]
        if self.kind == PARETO:
            return self.v_min * u ** (-1.0 / self.beta)
        return self.v_min * (1.0 - self._norm * (1.0 - u)) ** (-1.0 / self.beta)

    def expectation_nodes(self, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights with ``sum(w * h(v)) ~= E[h(V)]``.

        Pareto laws use Gauss-Jacobi quadrature in ``u = v_min / v`` with the
        weight ``u^(beta - 2)`` absorbed, which integrates ``E[V]`` exactly.
        """
        if self.kind in (DETERMINISTIC, EMPIRICAL):
            values, probs = self._atoms
            return values.copy(), probs.copy()
        b, vm = self.beta, self.v_min
        if self.kind == PARETO:
            x, w = special.roots_jacobi(n, 0.0, b - 2.0)
            u = (1.0 + x) / 2.0
            return vm / u, 2.0 ** (1.0 - b) * w * b * u
        a = self._lower_u
        x, w = np.polynomial.legendre.leggauss(n)
        u = a + (1.0 - a) * (1.0 + x) / 2.0
        weights = w * (1.0 - a) / 2.0 * b * u ** (b - 1.0) / self._norm
        return vm / u, weights

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        if self.kind == PARETO:
            return {"kind": PARETO, "beta": self.beta, "v_min": self.v_min}
        if self.kind == TRUNCATED_PARETO:
            return {"kind": TRUNCATED_PARETO, "beta": self.beta, "v_min": self.v_min, "v_max": self.v_max}
        if self.kind == DETERMINISTIC:
            return {"kind": DETERMINISTIC, "value": self.value}
        return {"kind": EMPIRICAL, "samples": list(self.samples)}

    @classmethod
    def from_dict(cls, data: dict) -> "VolumeDistribution":
        kind = data["kind"]
        if kind == PARETO:
            return cls.pareto(data["beta"], v_min=data.get("v_min"), mean=data.get("mean"))
        if kind == TRUNCATED_PARETO:
            return cls.truncated_pareto(data["beta"], data["v_max"], v_min=data.get("v_min"), mean=data.get("mean"))
        if kind == DETERMINISTIC:
            return cls.deterministic(data["value"])
        if kind == EMPIRICAL:
            return cls.empirical(data["samples"])
        raise ValueError(f"unknown volume law {kind!r}")


def _vectorize_scalar(fn, x):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return fn(float(arr))
    return np.array([fn(float(v)) for v in arr.ravel()]).reshape(arr.shape)


class _LaplaceTable:
    """Cubic-spline table of the transform complements on a log-log grid."""

    X_LO = 1e-15

    def __init__(self, dist: VolumeDistribution, x_max: float, n: int = 800):
        s = np.linspace(math.log(self.X_LO), math.log(x_max), n)
        vals = np.array([_exact_complements(dist, math.exp(v)) for v in s])
        logs = np.log(vals)
        self.s_lo, self.s_max = s[0], s[-1]
        self._c0 = interpolate.CubicSpline(s, logs[:, 0])
        self._c1 = interpolate.CubicSpline(s, logs[:, 1])
        # power-law continuation below the grid
        self._slopes = (float(self._c0(s[0], 1)), float(self._c1(s[0], 1)))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x > math.exp(self.s_max) * (1 + 1e-12)):
            raise ValueError("argument outside the tabulated range")
        with np.errstate(divide="ignore"):
            s = np.log(x)
        inside = s >= self.s_lo
        sc = np.where(inside, np.minimum(s, self.s_max), self.s_lo)
        out = []
        for spline, slope in zip((self._c0, self._c1), self._slopes):
            v = spline(sc)
            v = np.where(inside, v, v + slope * (s - self.s_lo))
            out.append(np.exp(v))
        return out[0], out[1]


def _exact_complements(dist: VolumeDistribution, x: float) -> tuple[float, float]:
    if dist.kind in (PARETO, TRUNCATED_PARETO):
        return dist._pareto_complements(x)
    values, probs = dist._atoms
    e = -np.expm1(-x * values)
    return float(e @ probs), float(e @ (values * probs))


@functools.lru_cache(maxsize=256)
def _laplace_table(dist: VolumeDistribution, x_max: float) -> _LaplaceTable:
    return _LaplaceTable(dist, x_max)
