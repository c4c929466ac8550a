"""Shared numerical kernels: disk quadrature, stable log-integrals, root
finding, damped 2D Newton iteration, seeded RNG streams, and the KS statistic.

The integration domain throughout is the open unit disk B(0,1).  Grids are
tensor products of Gauss-Legendre nodes in s = r**2 (which concentrates radial
resolution toward r = 1, where integrands proportional to (1-r**2)**(n/2) vary
fastest) and offset-half trapezoid nodes in the angle.  With the angular count
a multiple of 4 the node set is exactly symmetric under x -> -x and y -> -y
and contains no nodes on either axis, so half-disk splits never straddle a
node and symmetric integrands split exactly in half.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "DiskPoint",
    "QuadratureGrid",
    "RngStream",
    "NumericsError",
    "DomainError",
    "IntegrationError",
    "EmptyMassError",
    "BracketingError",
    "NonConvergenceError",
    "integrate_disk",
    "log_integral_disk",
    "logsumexp",
    "find_root_1d",
    "newton_2d",
    "ks_distance",
    "grid_for",
]


class NumericsError(Exception):
    """Base class for numerical-kernel failures."""


class DomainError(NumericsError, ValueError):
    """Input outside the admissible domain (e.g. a point outside B(0,1))."""


class IntegrationError(NumericsError):
    """Non-finite integrand value at a quadrature node."""


class EmptyMassError(IntegrationError):
    """log-integrand is -inf at every node: the integral carries no mass."""


class BracketingError(NumericsError):
    """Root bracket does not change sign."""


class NonConvergenceError(NumericsError):
    """Iteration exceeded max_iter.  Carries the last iterate and residual."""

    def __init__(self, message, last=None, residual=None):
        super().__init__(message)
        self.last = last
        self.residual = residual


@dataclass(frozen=True)
class DiskPoint:
    """A point of the open unit disk, x**2 + y**2 < 1."""

    x: float
    y: float

    def __post_init__(self):
        if not (self.x * self.x + self.y * self.y < 1.0):
            raise DomainError(f"point ({self.x}, {self.y}) is not inside the unit disk")

    @property
    def norm2(self) -> float:
        return self.x * self.x + self.y * self.y

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


def _as_xy(z) -> tuple[float, float]:
    """Accept a DiskPoint or a bare (x, y) pair."""
    if isinstance(z, DiskPoint):
        return z.x, z.y
    x, y = z
    return float(x), float(y)


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor-product quadrature over the unit disk.

    Node layout: all positive-x nodes first (n_pos of them), then the
    negative-x nodes, each block mirror-symmetric to the other.  xs, ys, w are
    flat arrays of length radial_nodes * angular_nodes; w sums to pi.
    """

    radial_nodes: int
    angular_nodes: int
    xs: np.ndarray = field(repr=False)
    ys: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    n_pos: int = field(repr=False)
    s_edges: np.ndarray = field(repr=False)
    s_nodes: np.ndarray = field(repr=False)
    theta_nodes: np.ndarray = field(repr=False)
    cell_index: np.ndarray = field(repr=False)  # storage order -> raveled (s, theta) cell

    @classmethod
    def build(cls, radial: int = 256, angular: int = 256) -> "QuadratureGrid":
        if radial < 1 or angular < 4:
            raise ValueError("radial >= 1 and angular >= 4 required")
        if angular % 4 != 0:
            raise ValueError("angular node count must be a multiple of 4 "
                             "(preserves x and y mirror symmetry off the axes)")
        # Gauss-Legendre in s = r^2 on [0,1]; int_disk f = int f(sqrt(s)e_theta) ds dtheta / 2.
        t, wt = np.polynomial.legendre.leggauss(radial)
        s = 0.5 * (t + 1.0)
        ws = 0.5 * wt
        dtheta = 2.0 * math.pi / angular
        theta = -math.pi + (np.arange(angular) + 0.5) * dtheta
        r = np.sqrt(s)
        X = r[:, None] * np.cos(theta)[None, :]
        Y = r[:, None] * np.sin(theta)[None, :]
        W = 0.5 * ws[:, None] * np.full(angular, dtheta)[None, :]
        xs, ys, w = X.ravel(), Y.ravel(), W.ravel()
        pos = xs > 0.0
        order = np.concatenate([np.nonzero(pos)[0], np.nonzero(~pos)[0]])
        xs, ys, w = xs[order], ys[order], w[order]
        n_pos = int(pos.sum())
        # cell edges in s for within-cell jitter when sampling densities
        edges = np.empty(radial + 1)
        edges[0], edges[-1] = 0.0, 1.0
        edges[1:-1] = 0.5 * (s[:-1] + s[1:])
        for a in (xs, ys, w, edges, s, theta, order):
            a.setflags(write=False)
        return cls(radial, angular, xs, ys, w, n_pos, edges, s, theta, order)

    @property
    def nodes(self):
        """Sequence of (DiskPoint, weight) pairs in storage order."""
        return [(DiskPoint(float(x), float(y)), float(wi))
                for x, y, wi in zip(self.xs, self.ys, self.w)]

    def region_slice(self, region: str) -> slice:
        if region == "full":
            return slice(None)
        if region == "half_plus":
            return slice(0, self.n_pos)
        if region == "half_minus":
            return slice(self.n_pos, None)
        raise ValueError(f"unknown region {region!r}")


@lru_cache(maxsize=32)
def _build_cached(radial: int, angular: int) -> QuadratureGrid:
    return QuadratureGrid.build(radial, angular)


def grid_for(n: int, base: int = 256, factor: float = 5.0) -> QuadratureGrid:
    """Grid sized for integrands with ridges of width ~ n**-0.5.

    Node counts grow like factor*sqrt(n), rounded up to a multiple of 4, with
    a floor of `base`.  Grids are cached and shared.
    """
    k = max(base, 4 * math.ceil(factor * math.sqrt(max(n, 1)) / 4.0))
    return _build_cached(k, k)


def default_grid() -> QuadratureGrid:
    return _build_cached(256, 256)


def integrate_disk(f, grid: QuadratureGrid, region: str = "full") -> float:
    """Weighted node sum of f over the disk or a half-disk.

    f must be vectorized: called as f(xs, ys) on coordinate arrays.
    """
    sl = grid.region_slice(region)
    vals = np.asarray(f(grid.xs[sl], grid.ys[sl]), dtype=float)
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.argmax(bad))
        raise IntegrationError(
            f"non-finite integrand {vals[i]} at node ({grid.xs[sl][i]}, {grid.ys[sl][i]})")
    return float(np.dot(vals, grid.w[sl]))


def logsumexp(logv: np.ndarray) -> float:
    """Stable log(sum(exp(logv))); -inf entries are allowed."""
    m = np.max(logv)
    if not np.isfinite(m):
        if m == -np.inf:
            return -math.inf
        raise IntegrationError(f"non-finite log value {m}")
    return float(m + np.log(np.sum(np.exp(logv - m))))


def log_integral_disk(log_f, grid: QuadratureGrid, region: str = "full") -> float:
    """log of integral of exp(log_f) over the region, by weighted log-sum-exp.

    The nodewise maximum is subtracted before exponentiation, so exponents of
    order n stay representable for n up to 1e6 and beyond.  -inf values are
    admissible (zero mass at a node); +inf or nan raise IntegrationError, and
    all nodes at -inf raise EmptyMassError.
    """
    sl = grid.region_slice(region)
    logv = np.asarray(log_f(grid.xs[sl], grid.ys[sl]), dtype=float)
    if np.isnan(logv).any() or (logv == np.inf).any():
        i = int(np.argmax(np.isnan(logv) | (logv == np.inf)))
        raise IntegrationError(
            f"invalid log-integrand {logv[i]} at node ({grid.xs[sl][i]}, {grid.ys[sl][i]})")
    m = float(np.max(logv))
    if m == -math.inf:
        raise EmptyMassError("log-integrand is -inf at every node")
    return m + math.log(float(np.dot(grid.w[sl], np.exp(logv - m))))


def find_root_1d(F, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 100) -> float:
    """Root of F on [lo, hi] by bisection refined with secant steps.

    Requires a sign change on the bracket; the bracket is preserved at every
    step, so the returned x satisfies |F(x)| <= tol with x in [lo, hi].
    """
    flo, fhi = F(lo), F(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0.0:
        raise BracketingError(f"no sign change on [{lo}, {hi}]: F={flo}, {fhi}")
    a, b, fa, fb = lo, hi, flo, fhi
    x, fx = a, fa
    for _ in range(max_iter):
        # secant proposal from the bracket endpoints, bisection as fallback
        if fb != fa:
            xs = b - fb * (b - a) / (fb - fa)
        else:
            xs = 0.5 * (a + b)
        if not (a < xs < b):
            xs = 0.5 * (a + b)
        fxs = F(xs)
        x, fx = xs, fxs
        if abs(fx) <= tol:
            return x
        if fa * fxs < 0.0:
            b, fb = xs, fxs
        else:
            a, fa = xs, fxs
        if b - a < 1e-15 * max(1.0, abs(a)):
            return x
        # keep the bracket shrinking: force one bisection if the secant stalls
        xm = 0.5 * (a + b)
        fm = F(xm)
        if abs(fm) <= tol:
            return xm
        if fa * fm < 0.0:
            b, fb = xm, fm
        else:
            a, fa = xm, fm
    raise NonConvergenceError(f"find_root_1d: no convergence in {max_iter} iterations",
                              last=x, residual=abs(fx))


def newton_2d(grad, hess, z0, tol: float = 1e-10, max_iter: int = 100) -> DiskPoint:
    """Damped Newton iteration for grad = 0 inside the unit disk.

    Each step solves H dz = -g; if the full step leaves the disk it is halved
    until the iterate stays strictly inside (the objective diverges to -inf at
    the boundary, so maximizers are interior).
    """
    x, y = _as_xy(z0)
    if x * x + y * y >= 1.0:
        raise DomainError("newton_2d start must lie inside the unit disk")
    gx, gy = 0.0, 0.0
    for _ in range(max_iter):
        gx, gy = grad((x, y))
        res = math.hypot(gx, gy)
        if not math.isfinite(res):
            raise NonConvergenceError("newton_2d: non-finite gradient",
                                      last=(x, y), residual=res)
        if res <= tol:
            return DiskPoint(float(x), float(y))
        h11, h12, h21, h22 = np.asarray(hess((x, y)), dtype=float).ravel()
        det = h11 * h22 - h12 * h21
        if det == 0.0 or not math.isfinite(det):
            raise NonConvergenceError("newton_2d: singular Hessian",
                                      last=(x, y), residual=res)
        dx = -(h22 * gx - h12 * gy) / det
        dy = -(h11 * gy - h21 * gx) / det
        step = 1.0
        while (x + step * dx) ** 2 + (y + step * dy) ** 2 >= 1.0 - 1e-14:
            step *= 0.5
            if step < 1e-18:
                raise NonConvergenceError("newton_2d: step collapsed at the boundary",
                                          last=(x, y), residual=res)
        x, y = x + step * dx, y + step * dy
    raise NonConvergenceError(f"newton_2d: no convergence in {max_iter} iterations",
                              last=(x, y), residual=math.hypot(*grad((x, y))))


def ks_distance(samples, cdf) -> float:
    """sup norm between the empirical CDF of samples in [0,1] and cdf."""
    s = np.sort(np.asarray(samples, dtype=float))
    if s.size == 0:
        raise ValueError("ks_distance: empty sample")
    if s[0] < 0.0 or s[-1] > 1.0:
        bad = s[0] if s[0] < 0.0 else s[-1]
        raise DomainError(f"sample value {bad} outside [0, 1]")
    n = s.size
    c = np.asarray(cdf(s), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - c)
    d_minus = np.max(c - (i - 1) / n)
    return float(max(d_plus, d_minus))


@dataclass(frozen=True)
class RngStream:
    """Deterministic, splittable random stream.

    Identical (seed, stream_id) always reproduce the same draws; distinct
    stream_ids (or distinct substream lineages) are statistically independent
    via SeedSequence spawn keys.
    """

    seed: int
    stream_id: int = 0
    lineage: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed,
                                    spawn_key=(self.stream_id, *self.lineage))
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, (*self.lineage, int(index)))
