"""Metastate experiments over the random field.

A Gibbs state enters every experiment only through its fingerprint: the
vector of expectations of a fixed finite dictionary of bounded observables
tanh(<a, phi_I> + b).  Under a limiting product state those expectations
have a closed form (each linear combination of spins is Gaussian), so limit
fingerprints are one-dimensional Gauss-Hermite integrals, deterministic up
to the quadrature order.

The volume-indexed scan over one field realization produces the empirical
(Newman-Stein) metastate: one atom per prefix length n = 1..N with weight
1/N.  In surrogate mode atom n is the two-point form

    W_n^+ . fp(plus state) + (1 - W_n^+) . fp(minus state),

with W_n^+ the half-disk weight of the prefix statistics; exact mode
estimates atom fingerprints by Monte Carlo over the finite-volume Gibbs
sampler and is meant for small N.  Prefixes too short for the mixture
representation (n < 5) or with degenerate statistics (m_perp = 0) fall back
to the sign indicator of the centered first walk sum, the sub-diffusive
weight limit.

The other experiments: independent-replica statistics of W_n^+ (half-half
in the two-maximizer range), the arcsine law of the sign-time T_N^+, the
chaotic-size-dependence search for prefix lengths whose weight hits a
target, the conditioning-band miss rate, and the single-maximizer collapse
check.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .fields import (
    DistributionSpec,
    FieldSample,
    MissingMomentError,
    ParameterError,
    StatsSchedule,
    field_stats,
    sample_field,
    stats_arrays,
    t_plus,
)
from .gibbs import (
    MixtureDensity,
    Observable,
    UnsupportedStatsError,
    gibbs_expectation,
    weight_plus_batch,
    weight_plus_profile,
)
from .numerics import DiskPoint, RngStream, ks_distance
from .tilting import MaximizerSet, ModelParams, Phase, classify_phase, maximizers

__all__ = [
    "Fingerprint",
    "EmpiricalMetastate",
    "AwSummary",
    "TrivialityReport",
    "PhaseError",
    "DriftWarning",
    "TrivialityNotice",
    "default_dictionary",
    "arcsine_cdf",
    "fingerprint_limit_state",
    "surrogate_fingerprint",
    "fingerprint_gibbs",
    "ns_metastate",
    "aw_experiment",
    "sign_times",
    "arcsine_experiment",
    "walk_target",
    "csd_search",
    "cesaro_miss_rate",
    "triviality_check",
]


class PhaseError(ValueError):
    """Experiment requires a parameter range the given model is not in."""


class DriftWarning(UserWarning):
    """Nonzero field mean: sign times degenerate to 0 or 1."""


class TrivialityNotice(UserWarning):
    """Single-maximizer range: the scan metastate collapses to one atom."""


_GH_CACHE: dict = {}


def _gh(order: int):
    cached = _GH_CACHE.get(order)
    if cached is None:
        t, w = np.polynomial.hermite.hermgauss(order)
        cached = (t * math.sqrt(2.0), w / math.sqrt(math.pi))
        _GH_CACHE[order] = cached
    return cached


def _gauss_tanh(a, s: float, order: int):
    """E tanh(a + s G), G standard normal; a scalar or array."""
    t, w = _gh(order)
    a = np.asarray(a, dtype=float)
    return np.tanh(a[..., None] + s * t) @ w


def default_dictionary() -> tuple[Observable, ...]:
    """Five observables on the first three coordinates; all biasless, so
    every entry is an odd function of the spins."""
    return (
        Observable((1,), (1.0,)),
        Observable((2,), (1.0,)),
        Observable((3,), (1.0,)),
        Observable((1, 2), (0.5, 0.5)),
        Observable((1, 3), (1.0, -1.0)),
    )


_SOURCE_KINDS = ("limit", "surrogate", "exact")


@dataclass(frozen=True)
class Fingerprint:
    """Dictionary expectations of one state; source records how: the limit
    state itself, the two-point surrogate at prefix n, or per-n Monte Carlo."""

    values: np.ndarray
    source: tuple[str, int]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        kind, n = self.source
        if kind not in _SOURCE_KINDS:
            raise ParameterError(f"unknown fingerprint source kind {kind!r}")
        object.__setattr__(self, "source", (kind, int(n)))


def _max_index(dictionary: Sequence[Observable]) -> int:
    if not dictionary:
        raise ParameterError("dictionary must contain at least one observable")
    return max(obs.indices[-1] for obs in dictionary)


def fingerprint_limit_state(z, field: FieldSample, m,
                            dictionary: Sequence[Observable],
                            gh_order: int = 96) -> Fingerprint:
    """Closed-form fingerprint of the limiting product state at z.

    Coordinate i is Gaussian with mean x + y (h_i - m_par) / m_perp and
    variance 1 - |z|^2, so each dictionary entry is a 1D Gaussian average
    of tanh, done by Gauss-Hermite.
    """
    if not isinstance(z, DiskPoint):
        z = DiskPoint(float(z[0]), float(z[1]))
    m_par, m_perp = m
    if m_perp <= 0.0:
        raise UnsupportedStatsError(f"m_perp must be positive, got {m_perp}")
    if _max_index(dictionary) > field.n:
        raise IndexError("dictionary indexes past the end of the field")
    var = 1.0 - z.norm2
    vals = np.empty(len(dictionary))
    for j, obs in enumerate(dictionary):
        h = field.values[np.asarray(obs.indices) - 1]
        c = np.asarray(obs.coeffs)
        mu = z.x + z.y * (h - m_par) / m_perp
        a = float(mu @ c) + obs.bias
        s = math.sqrt(var * float(c @ c))
        vals[j] = float(_gauss_tanh(a, s, gh_order))
    return Fingerprint(vals, ("limit", 0))


# ------------------------------------------------------------ state scans

def _indicator_weight(centered_sum: float) -> float:
    if centered_sum > 0.0:
        return 1.0
    if centered_sum < 0.0:
        return 0.0
    return 0.5


def _plus_weights_prefix(field: FieldSample, N: int,
                         params: ModelParams) -> np.ndarray:
    """W_n^+ for every prefix n = 1..N; indicator fallback below n = 5 and
    at degenerate prefixes."""
    mu1 = field.spec.mu1
    w = np.empty(N)
    head = min(4, N)
    for n in range(1, head + 1):
        w[n - 1] = _indicator_weight(field.walk[n - 1, 0] - n * mu1)
    if N >= 5:
        ns = np.arange(5, N + 1)
        mp, mq = stats_arrays(field, 5, N)
        ok = mq > 0.0
        w[4:][ok] = weight_plus_profile(ns[ok], params, mp[ok], mq[ok])
        for i in np.nonzero(~ok)[0]:
            n = int(ns[i])
            w[n - 1] = _indicator_weight(field.walk[n - 1, 0] - n * mu1)
    return w


def _limit_pair(field: FieldSample, params: ModelParams,
                dictionary: Sequence[Observable], gh_order: int):
    """(fp_plus, fp_minus) in the two-maximizer range, else the single limit
    fingerprint twice (the scan then has one atom value)."""
    if field.spec is None:
        raise MissingMomentError("field must carry a distribution spec")
    m = field.spec.m_limit()
    mset = maximizers(params, m)
    if mset.is_two:
        fp_p = fingerprint_limit_state(mset.z_plus, field, m, dictionary, gh_order)
        fp_m = fingerprint_limit_state(mset.z_minus, field, m, dictionary, gh_order)
        return fp_p, fp_m, True
    warnings.warn("single-maximizer range: scan metastate collapses to a "
                  "point mass (see triviality_check)", TrivialityNotice,
                  stacklevel=3)
    fp = fingerprint_limit_state(mset.z_star, field, m, dictionary, gh_order)
    return fp, fp, False


@dataclass(frozen=True)
class EmpiricalMetastate:
    """Volume-scan metastate: atom n is the state at prefix length n, with
    weight 1/N each; plus_weights[n-1] = W_n^+ of that prefix."""

    N: int
    atoms: tuple[Fingerprint, ...]
    plus_weights: np.ndarray

    def __post_init__(self):
        if self.N < 1:
            raise ParameterError(f"N must be >= 1, got {self.N}")
        if len(self.atoms) != self.N:
            raise ParameterError("one atom per prefix length required")
        w = np.asarray(self.plus_weights, dtype=float)
        if w.size != self.N:
            raise ParameterError("one plus-weight per atom required")
        w.setflags(write=False)
        object.__setattr__(self, "plus_weights", w)

    @property
    def atom_weights(self) -> np.ndarray:
        return np.full(self.N, 1.0 / self.N)

    def atom_matrix(self) -> np.ndarray:
        return np.vstack([a.values for a in self.atoms])

    def fraction_plus(self) -> float:
        return float(np.mean(self.plus_weights > 0.5))


def surrogate_fingerprint(field: FieldSample, n: int, params: ModelParams,
                          dictionary: Optional[Sequence[Observable]] = None,
                          gh_order: int = 96) -> Fingerprint:
    """Two-point surrogate for the prefix-n state: the limit fingerprints
    mixed with the prefix weight W_n^+."""
    if dictionary is None:
        dictionary = default_dictionary()
    if not (1 <= n <= field.n):
        raise IndexError(f"n={n} outside 1..{field.n}")
    fp_p, fp_m, _ = _limit_pair(field, params, dictionary, gh_order)
    w = float(_plus_weights_prefix(field, n, params)[n - 1])
    return Fingerprint(w * fp_p.values + (1.0 - w) * fp_m.values,
                       ("surrogate", n))


def fingerprint_gibbs(field: FieldSample, n: int, params: ModelParams,
                      dictionary: Optional[Sequence[Observable]] = None,
                      samples: int = 4000, rng: Optional[RngStream] = None,
                      density: Optional[MixtureDensity] = None):
    """(Fingerprint, standard errors) of the prefix-n Gibbs state by Monte
    Carlo over the mixture + transport sampler."""
    if dictionary is None:
        dictionary = default_dictionary()
    if rng is None:
        raise ParameterError("rng required for Monte Carlo fingerprints")
    if density is None:
        density = MixtureDensity.build(n, params, field_stats(field, n))
    vals = np.empty(len(dictionary))
    ses = np.empty(len(dictionary))
    for j, obs in enumerate(dictionary):
        vals[j], ses[j] = gibbs_expectation(obs, n, params, field, samples,
                                            rng.substream(j), density=density)
    return Fingerprint(vals, ("exact", n)), ses


def ns_metastate(field: FieldSample, N: int, params: ModelParams,
                 dictionary: Optional[Sequence[Observable]] = None,
                 mode: str = "surrogate", rng: Optional[RngStream] = None,
                 samples: int = 4000) -> EmpiricalMetastate:
    """Empirical metastate of the volume scan n = 1..N over one field.

    surrogate mode is deterministic and scales to N ~ 1e4; exact mode runs
    the Monte Carlo sampler at every prefix and is meant for N <= 50.
    Atoms below n = 5 (no mixture representation) always use the surrogate
    with the indicator weight, as do degenerate prefixes in exact mode.
    """
    if mode not in ("surrogate", "exact"):
        raise ParameterError(f"mode must be surrogate or exact, got {mode!r}")
    if dictionary is None:
        dictionary = default_dictionary()
    if not (1 <= N <= field.n):
        raise ParameterError(f"N={N} outside 1..{field.n}")
    if _max_index(dictionary) > field.n:
        raise IndexError("dictionary indexes past the end of the field")
    fp_p, fp_m, _ = _limit_pair(field, params, dictionary, gh_order=96)
    w = _plus_weights_prefix(field, N, params)
    if mode == "exact" and rng is None:
        raise ParameterError("rng required for exact mode")
    atoms = []
    for n in range(1, N + 1):
        if mode == "exact" and n >= 5:
            try:
                fp, _ = fingerprint_gibbs(field, n, params, dictionary,
                                          samples, rng.substream(n))
                atoms.append(fp)
                continue
            except UnsupportedStatsError:
                pass  # degenerate prefix: fall through to the surrogate
        atoms.append(Fingerprint(
            w[n - 1] * fp_p.values + (1.0 - w[n - 1]) * fp_m.values,
            ("surrogate", n)))
    return EmpiricalMetastate(N, tuple(atoms), w)


# ------------------------------------------------------ replica experiments

def _run_replicas(replicas: int, threads: int, fn):
    if threads <= 1:
        for r in range(replicas):
            fn(r)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fn, range(replicas)))


@dataclass(frozen=True)
class AwSummary:
    """Independent-replica weight statistics and induced fingerprints."""

    n: int
    replicas: int
    fraction_plus: float
    w_plus: np.ndarray
    fingerprints: np.ndarray
    mean_fingerprint: np.ndarray
    dictionary: tuple[Observable, ...]

    def __post_init__(self):
        for name in ("w_plus", "fingerprints", "mean_fingerprint"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def aw_experiment(spec: DistributionSpec, n: int, replicas: int,
                  params: ModelParams, rng: RngStream,
                  dictionary: Optional[Sequence[Observable]] = None,
                  threads: int = 1) -> AwSummary:
    """Replica law of (W_n^+, fingerprint) over independent fields.

    In the two-maximizer range the limit is the half-half mixture over the
    two pure-state fingerprints; the summary records the empirical split
    and per-replica values.
    """
    if dictionary is None:
        dictionary = default_dictionary()
    phase = classify_phase(params, spec)
    if phase is not Phase.SPIN_GLASS:
        raise PhaseError(f"replica experiment needs the two-maximizer range, "
                         f"model is {phase.value}")
    if replicas < 1:
        raise ParameterError(f"replicas must be >= 1, got {replicas}")
    k = _max_index(dictionary)
    if n < max(5, k):
        raise ParameterError(f"n={n} too small for the dictionary")
    m_par, m_perp = spec.m_limit()
    mset = maximizers(params, spec.m_limit())
    mp = np.empty(replicas)
    mq = np.empty(replicas)
    head = np.empty((replicas, k))

    def one(r: int):
        f = sample_field(spec, n, rng.substream(r))
        st = field_stats(f, n)
        mp[r], mq[r] = st.m_par, st.m_perp
        head[r] = f.values[:k]

    _run_replicas(replicas, threads, one)
    w = weight_plus_batch(n, params, mp, mq)
    fps = np.empty((replicas, len(dictionary)))
    for j, obs in enumerate(dictionary):
        c = np.asarray(obs.coeffs)
        hc = head[:, np.asarray(obs.indices) - 1] @ c
        csum = float(c.sum())
        for z, share in ((mset.z_plus, w), (mset.z_minus, 1.0 - w)):
            a = z.x * csum + z.y * (hc - m_par * csum) / m_perp + obs.bias
            s = math.sqrt((1.0 - z.norm2) * float(c @ c))
            if z is mset.z_plus:
                fps[:, j] = share * _gauss_tanh(a, s, 96)
            else:
                fps[:, j] += share * _gauss_tanh(a, s, 96)
    return AwSummary(n, replicas, float(np.mean(w > 0.5)), w, fps,
                     fps.mean(axis=0), tuple(dictionary))


def arcsine_cdf(x):
    """CDF arcsin(2x - 1)/pi + 1/2 of the arcsine law on [0, 1]."""
    arr = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return np.arcsin(2.0 * arr - 1.0) / math.pi + 0.5


def sign_times(spec: DistributionSpec, N: int, replicas: int,
               rng: RngStream, threads: int = 1) -> np.ndarray:
    """Replica sample of the sign-time T_N^+ over independent fields."""
    if replicas < 1:
        raise ParameterError(f"replicas must be >= 1, got {replicas}")
    if spec.mu1 != 0.0:
        warnings.warn("field mean is nonzero: T_N^+ drifts to 0 or 1",
                      DriftWarning, stacklevel=2)
    ts = np.empty(replicas)

    def one(r: int):
        f = sample_field(spec, N, rng.substream(r))
        ts[r] = t_plus(f, N)

    _run_replicas(replicas, threads, one)
    return ts


def arcsine_experiment(spec: DistributionSpec, N: int, replicas: int,
                       rng: RngStream, threads: int = 1) -> float:
    """KS distance between replica sign-times T_N^+ and the arcsine law."""
    return ks_distance(sign_times(spec, N, replicas, rng, threads),
                       arcsine_cdf)


# ----------------------------------------------------- subsequence search

def walk_target(target_lambda: float, params: ModelParams,
                maximizers: MaximizerSet) -> float:
    """Centered walk level whose weight limit is target_lambda:
    p1 = ln(lambda/(1-lambda)) / (2 beta x_plus)."""
    if not (0.0 < target_lambda < 1.0):
        raise ValueError(f"target must lie in (0,1), got {target_lambda}")
    if not maximizers.is_two:
        raise PhaseError("walk targeting needs the two-maximizer range")
    return math.log(target_lambda / (1.0 - target_lambda)) / (
        2.0 * params.beta * maximizers.z_plus.x)


def csd_search(field: FieldSample, target_lambda: float, params: ModelParams,
               maximizers: MaximizerSet, n_max: int, tol: float,
               filter_width: float = 0.5, chunk: int = 4096) -> Optional[int]:
    """First prefix length n <= n_max with |W_n^+ - target_lambda| <= tol.

    The weight quadrature runs only where the centered first walk sum is
    within filter_width of the target level p1; recurrence of the walk makes
    such n plentiful, and far from p1 the weight cannot be near the target.
    Returns None when no candidate hits (a valid outcome at finite n_max).
    """
    p1 = walk_target(target_lambda, params, maximizers)
    if not (0.0 < tol < 1.0):
        raise ParameterError(f"tol must lie in (0,1), got {tol}")
    if filter_width <= 0.0:
        raise ParameterError(f"filter width must be positive, got {filter_width}")
    if not (5 <= n_max <= field.n):
        raise ParameterError(f"n_max={n_max} outside 5..{field.n}")
    if field.spec is None:
        raise MissingMomentError("search needs the field's declared moments")
    mu1 = field.spec.mu1
    ns = np.arange(5, n_max + 1, dtype=np.int64)
    centered = field.walk[4:n_max, 0] - ns * mu1
    cand = ns[np.abs(centered - p1) < filter_width]
    for lo in range(0, cand.size, chunk):
        sub = cand[lo:lo + chunk]
        s1 = field.walk[sub - 1, 0]
        s2 = field.walk[sub - 1, 1]
        mp = s1 / sub
        mq = np.sqrt(np.maximum(s2 / sub - mp * mp, 0.0))
        ok = mq > 0.0
        w = np.empty(sub.size)
        w[ok] = weight_plus_profile(sub[ok], params, mp[ok], mq[ok])
        for i in np.nonzero(~ok)[0]:
            w[i] = _indicator_weight(float(s1[i] - sub[i] * mu1))
        hits = np.abs(w - target_lambda) <= tol
        if np.any(hits):
            return int(sub[int(np.argmax(hits))])
    return None


# ------------------------------------------------------ conditioning bands

def cesaro_miss_rate(field: Union[FieldSample, StatsSchedule], N: int,
                     delta: float) -> float:
    """Fraction of prefixes n <= N whose statistics fall outside the
    conditioning band [n^(-1/2-delta), n^(-1/2+delta)] (componentwise)."""
    if not (0.0 < delta < 1.0 / 6.0):
        raise ParameterError(f"delta must lie in (0, 1/6), got {delta}")
    if N < 1:
        raise ParameterError(f"N must be >= 1, got {N}")
    ns = np.arange(1, N + 1, dtype=float)
    if isinstance(field, StatsSchedule):
        scale = ns ** (-field.delta)
        d1 = np.abs(field.gamma[0]) * scale
        d2 = np.abs(field.gamma[1]) * scale
    else:
        if field.spec is None or not field.spec.a4:
            raise MissingMomentError("miss rate needs a spec with a finite "
                                     "fourth moment")
        if N > field.n:
            raise IndexError(f"N={N} outside 1..{field.n}")
        m_par, m_perp = field.spec.m_limit()
        mp, mq = stats_arrays(field, 1, N)
        d1 = np.abs(mp - m_par)
        d2 = np.abs(mq - m_perp)
    lo = ns ** (-0.5 - delta)
    hi = ns ** (-0.5 + delta)
    inside = (lo <= d1) & (d1 <= hi) & (lo <= d2) & (d2 <= hi)
    return float(1.0 - np.mean(inside))


# --------------------------------------------------------- collapse check

@dataclass(frozen=True)
class TrivialityReport:
    """Fingerprint drift of the prefix states toward the single limit."""

    phase: Phase
    n_grid: tuple[int, ...]
    deviations: np.ndarray
    max_deviation: float
    limit_fingerprint: Fingerprint
    fingerprints: tuple[Fingerprint, ...]

    def __post_init__(self):
        dev = np.asarray(self.deviations, dtype=float)
        dev.setflags(write=False)
        object.__setattr__(self, "deviations", dev)


def triviality_check(spec: DistributionSpec, params: ModelParams,
                     n_grid: Sequence[int],
                     dictionary: Optional[Sequence[Observable]] = None,
                     rng: Optional[RngStream] = None,
                     gh_order: int = 96) -> TrivialityReport:
    """Single-maximizer collapse: sup-norm gap between prefix fingerprints
    and the limit fingerprint across n_grid (the plug-in state at the prefix
    statistics stands in for the prefix Gibbs state)."""
    if dictionary is None:
        dictionary = default_dictionary()
    if rng is None:
        raise ParameterError("rng required to draw the field realization")
    phase = classify_phase(params, spec)
    if phase is Phase.SPIN_GLASS:
        raise PhaseError("collapse check needs a single-maximizer range")
    ng = tuple(int(n) for n in n_grid)
    if not ng or min(ng) < 1:
        raise ParameterError("n_grid must hold positive lengths")
    field = sample_field(spec, max(max(ng), _max_index(dictionary)), rng)
    m = spec.m_limit()
    z_star = maximizers(params, m).z_star
    fp_lim = fingerprint_limit_state(z_star, field, m, dictionary, gh_order)
    devs = np.empty(len(ng))
    fps = []
    for i, n in enumerate(ng):
        st = field_stats(field, n)
        mset = maximizers(params, st.as_pair())
        z_n = mset.z_plus if mset.is_two else mset.z_star
        fp_n = fingerprint_limit_state(z_n, field, st.as_pair(), dictionary,
                                       gh_order)
        fps.append(Fingerprint(fp_n.values, ("surrogate", n)))
        devs[i] = float(np.max(np.abs(fp_n.values - fp_lim.values)))
    return TrivialityReport(phase, ng, devs, float(devs.max()), fp_lim,
                            tuple(fps))
