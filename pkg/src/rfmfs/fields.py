"""External fields: i.i.d. random fields with analytic moments, their sample
statistics m_n = (m_n_par, m_n_perp), the associated 2D walks, deterministic
stats schedules, sign-time fractions, and conditioning-band indicators.

The sample statistics of a field prefix h_1..h_k are

    m_par  = (1/k) sum h_i,      m_perp = sqrt((1/k) sum h_i^2 - m_par^2),

and the centered walk S'_k = (sum (h_i - mu1), sum (h_i^2 - mu2)) satisfies
the exact identities

    k (m_par - mu1)        = (S'_k)_1
    k (m_perp - sd)        = [(S'_k)_2 - (S'_k)_1 (m_par + mu1)] / (m_perp + sd)

with sd = sqrt(mu2 - mu1^2); both are pure algebra, no asymptotics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numerics import RngStream

__all__ = [
    "DistributionSpec",
    "FieldSample",
    "FieldStats",
    "StatsSchedule",
    "SpecError",
    "ScheduleError",
    "MissingMomentError",
    "ParameterError",
    "sample_field",
    "field_from_values",
    "field_stats",
    "schedule_stats",
    "shifted_walk",
    "t_plus",
    "conditioning_indicator",
    "parse_dist",
]


class SpecError(ValueError):
    """Invalid distribution parameters."""


class ScheduleError(ValueError):
    """Stats schedule produced an inadmissible m_perp."""


class MissingMomentError(ValueError):
    """Moment-based quantity requested from a field without declared moments."""


class ParameterError(ValueError):
    """Parameter outside its contract range."""


@dataclass(frozen=True)
class DistributionSpec:
    """An i.i.d. field distribution with analytically known moments mu1..mu4.

    variant is one of rademacher / bernoulli / gaussian / uniform.  Moments
    are carried in closed form (not estimated) so assumption flags and
    delta-method covariances are exact.  tail_exponent is the largest xi with
    E|h|^(4+xi) finite; all built-ins have every moment, so xi = inf.

    Assumption flags: a1 (finite variance, strictly varying), a2 (finite
    fourth moment with non-degenerate h^2 fluctuation), a4 (a finite 4+xi
    moment).  a3_declared records the declared reachability of the first
    walk component's law; it is not computable from moments.
    """

    variant: str
    params: tuple[float, ...]

    # -- constructors ------------------------------------------------------
    @staticmethod
    def rademacher(scale: float = 1.0) -> "DistributionSpec":
        if not (scale > 0 and math.isfinite(scale)):
            raise SpecError(f"rademacher scale must be positive, got {scale}")
        return DistributionSpec("rademacher", (float(scale),))

    @staticmethod
    def bernoulli(p: float, a: float, b: float) -> "DistributionSpec":
        if not (0.0 <= p <= 1.0):
            raise SpecError(f"bernoulli p must lie in [0,1], got {p}")
        return DistributionSpec("bernoulli", (float(p), float(a), float(b)))

    @staticmethod
    def gaussian(mean: float, sd: float) -> "DistributionSpec":
        if not (sd > 0 and math.isfinite(sd)):
            raise SpecError(f"gaussian sd must be positive, got {sd}")
        return DistributionSpec("gaussian", (float(mean), float(sd)))

    @staticmethod
    def uniform(lo: float, hi: float) -> "DistributionSpec":
        if not (hi > lo):
            raise SpecError(f"uniform needs hi > lo, got [{lo}, {hi}]")
        return DistributionSpec("uniform", (float(lo), float(hi)))

    # -- moments -----------------------------------------------------------
    def moment(self, k: int) -> float:
        """E h^k for k = 1..4, in closed form per variant."""
        if self.variant == "rademacher":
            (s,) = self.params
            return 0.0 if k % 2 else s ** k
        if self.variant == "bernoulli":
            p, a, b = self.params
            return p * a ** k + (1.0 - p) * b ** k
        if self.variant == "gaussian":
            mu, sd = self.params
            v = sd * sd
            if k == 1:
                return mu
            if k == 2:
                return mu * mu + v
            if k == 3:
                return mu ** 3 + 3.0 * mu * v
            if k == 4:
                return mu ** 4 + 6.0 * mu * mu * v + 3.0 * v * v
        if self.variant == "uniform":
            lo, hi = self.params
            return (hi ** (k + 1) - lo ** (k + 1)) / ((k + 1) * (hi - lo))
        raise SpecError(f"unknown variant {self.variant!r}")

    @property
    def mu1(self) -> float:
        return self.moment(1)

    @property
    def mu2(self) -> float:
        return self.moment(2)

    @property
    def mu3(self) -> float:
        return self.moment(3)

    @property
    def mu4(self) -> float:
        return self.moment(4)

    @property
    def variance(self) -> float:
        return max(self.mu2 - self.mu1 ** 2, 0.0)

    def m_limit(self) -> tuple[float, float]:
        """Limiting stats (mu1, sqrt(mu2 - mu1^2)) of the sample statistics."""
        return (self.mu1, math.sqrt(self.variance))

    @property
    def tail_exponent(self) -> float:
        return math.inf

    # -- assumption flags ----------------------------------------------------
    @property
    def a1(self) -> bool:
        return math.isfinite(self.mu2) and self.variance > 0.0

    @property
    def a2(self) -> bool:
        # Note: fails for rademacher (h^2 is constant), by the formula.
        return math.isfinite(self.mu4) and self.mu4 - self.mu2 ** 2 > 0.0

    @property
    def a3_declared(self) -> bool:
        return True

    @property
    def a4(self) -> bool:
        return self.tail_exponent > 0.0

    # -- sampling ------------------------------------------------------------
    def draw(self, gen: np.random.Generator, size: int) -> np.ndarray:
        if self.variant == "rademacher":
            (s,) = self.params
            return s * (2.0 * gen.integers(0, 2, size=size) - 1.0)
        if self.variant == "bernoulli":
            p, a, b = self.params
            return np.where(gen.random(size) < p, a, b)
        if self.variant == "gaussian":
            mu, sd = self.params
            return gen.normal(mu, sd, size=size)
        if self.variant == "uniform":
            lo, hi = self.params
            return gen.uniform(lo, hi, size=size)
        raise SpecError(f"unknown variant {self.variant!r}")

    def __str__(self) -> str:
        return ":".join([self.variant] + [format(p, "g") for p in self.params])


def parse_dist(text: str) -> DistributionSpec:
    """Parse config strings like 'rademacher:1.0', 'gaussian:0:1',
    'bernoulli:0.5:-1:1', 'uniform:-1:1'."""
    parts = text.strip().split(":")
    name, args = parts[0].lower(), parts[1:]
    try:
        vals = [float(a) for a in args]
    except ValueError as exc:
        raise SpecError(f"non-numeric parameter in {text!r}") from exc
    try:
        if name == "rademacher":
            return DistributionSpec.rademacher(*(vals or [1.0]))
        if name == "bernoulli":
            return DistributionSpec.bernoulli(*vals)
        if name == "gaussian":
            return DistributionSpec.gaussian(*vals)
        if name == "uniform":
            return DistributionSpec.uniform(*vals)
    except TypeError as exc:
        raise SpecError(f"wrong parameter count in {text!r}") from exc
    raise SpecError(f"unknown distribution {name!r}")


@dataclass(frozen=True)
class FieldStats:
    """Sample statistics of a field prefix: m_par, m_perp = sample sd, and n."""

    m_par: float
    m_perp: float
    n: int

    def as_pair(self) -> tuple[float, float]:
        return (self.m_par, self.m_perp)


@dataclass(frozen=True)
class FieldSample:
    """A realized field h_1..h_n with its running walk sums.

    walk[k-1] = (sum_{i<=k} h_i, sum_{i<=k} h_i^2).  spec is None for
    deterministic fields constructed from explicit values.
    """

    values: np.ndarray
    walk: np.ndarray
    spec: Optional[DistributionSpec]
    seed: Optional[RngStream]

    @property
    def n(self) -> int:
        return self.values.size

    def walk_at(self, k: int) -> tuple[float, float]:
        if not (1 <= k <= self.n):
            raise IndexError(f"k={k} outside 1..{self.n}")
        return (float(self.walk[k - 1, 0]), float(self.walk[k - 1, 1]))


def sample_field(spec: DistributionSpec, n: int, rng: RngStream) -> FieldSample:
    """n i.i.d. draws from spec with the walk populated."""
    if n < 1:
        raise ParameterError(f"field length must be >= 1, got {n}")
    values = spec.draw(rng.generator(), n)
    return _with_walk(values, spec, rng)


def field_from_values(values, spec: Optional[DistributionSpec] = None) -> FieldSample:
    """Deterministic field from explicit values (spec optional, for moments)."""
    return _with_walk(np.asarray(values, dtype=float), spec, None)


def _with_walk(values: np.ndarray, spec, seed) -> FieldSample:
    walk = np.empty((values.size, 2))
    np.cumsum(values, out=walk[:, 0])
    np.cumsum(values * values, out=walk[:, 1])
    values.setflags(write=False)
    walk.setflags(write=False)
    return FieldSample(values, walk, spec, seed)


def field_stats(sample: FieldSample, k: int) -> FieldStats:
    """Stats of the length-k prefix; rounding-negative radicands clamp to 0."""
    s1, s2 = sample.walk_at(k)
    m_par = s1 / k
    rad = s2 / k - m_par * m_par
    return FieldStats(m_par, math.sqrt(rad) if rad > 0.0 else 0.0, k)


def stats_arrays(sample: FieldSample, n_lo: int, n_hi: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (m_par, m_perp) for every prefix length in [n_lo, n_hi]."""
    ks = np.arange(n_lo, n_hi + 1, dtype=float)
    s1 = sample.walk[n_lo - 1:n_hi, 0]
    s2 = sample.walk[n_lo - 1:n_hi, 1]
    m_par = s1 / ks
    rad = np.maximum(s2 / ks - m_par * m_par, 0.0)
    return m_par, np.sqrt(rad)


@dataclass(frozen=True)
class StatsSchedule:
    """Deterministic stats m_n = m + gamma * n**(-delta).

    Represents rate-controlled fields at the statistics level: every mixture
    quantity depends on h only through m_n, so prescribing m_n directly gives
    exact rate experiments with no sampling noise.
    """

    m: tuple[float, float]
    gamma: tuple[float, float]
    delta: float

    def __post_init__(self):
        if self.m[1] <= 0.0:
            raise ScheduleError(f"limit m_perp must be positive, got {self.m[1]}")
        if self.delta < 0.0:
            raise ScheduleError(f"delta must be nonnegative, got {self.delta}")


def schedule_stats(schedule: StatsSchedule, n: int) -> FieldStats:
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    scale = float(n) ** (-schedule.delta)
    m_par = schedule.m[0] + schedule.gamma[0] * scale
    m_perp = schedule.m[1] + schedule.gamma[1] * scale
    if m_perp <= 0.0:
        raise ScheduleError(f"schedule gives m_perp = {m_perp} <= 0 at n = {n}")
    return FieldStats(m_par, m_perp, n)


def shifted_walk(sample: FieldSample, k: int) -> tuple[float, float]:
    """Centered walk S'_k = (S_k^1 - k mu1, S_k^2 - k mu2)."""
    if sample.spec is None:
        raise MissingMomentError("deterministic field has no declared moments")
    s1, s2 = sample.walk_at(k)
    return (s1 - k * sample.spec.mu1, s2 - k * sample.spec.mu2)


def t_plus(sample: FieldSample, N: int) -> float:
    """Fraction of prefixes n <= N with positive first walk sum."""
    if not (1 <= N <= sample.n):
        raise IndexError(f"N={N} outside 1..{sample.n}")
    return float(np.mean(sample.walk[:N, 0] > 0.0))


def conditioning_indicator(stats: FieldStats, m: tuple[float, float],
                           n: int, delta: float) -> bool:
    """True iff each coordinate of m_n - m has magnitude inside the band
    [n^(-1/2-delta), n^(-1/2+delta)]."""
    if not (0.0 < delta < 1.0 / 6.0):
        raise ParameterError(f"delta must lie in (0, 1/6), got {delta}")
    lo = float(n) ** (-0.5 - delta)
    hi = float(n) ** (-0.5 + delta)
    d1 = abs(stats.m_par - m[0])
    d2 = abs(stats.m_perp - m[1])
    return (lo <= d1 <= hi) and (lo <= d2 <= hi)
