"""Quantitative asymptotics: finite-n maximizer tracking, the first-order
shift law, the tilting-difference expansion, Laplace ratios for half-disk
integrals, and the three weight-limit regimes.

All expansions are taken around a limit maximizer z* with the exact Hessian
H = H[psi](z*); the finite-n curvature corrections enter only through the
remainder terms that the ratio tests bound empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import FieldStats
from .numerics import DiskPoint, RngStream, newton_2d
from .tilting import MaximizerSet, ModelParams, grad_psi, hess_psi, psi, psi_n

__all__ = [
    "MaximizerTrack",
    "SingularHessianError",
    "UndeterminedRegimeError",
    "track_maximizer",
    "predicted_shift",
    "psi_diff_prediction",
    "laplace_ratio",
    "weight_limit",
]


class SingularHessianError(ValueError):
    """Limit Hessian not invertible; the expansion has no first-order term."""


class UndeterminedRegimeError(ValueError):
    """delta < 1 with gamma_par = 0: the weight limit is not classified."""


@dataclass(frozen=True)
class MaximizerTrack:
    """Newton-refined maximizer of psi_n paired with its limit point."""

    n: int
    z_n: DiskPoint
    z_star: DiskPoint
    grad_residual: float


def track_maximizer(n: int, params: ModelParams, stats: FieldStats,
                    z_star: DiskPoint) -> MaximizerTrack:
    """Follow the maximizer of psi_n that continues z_star.

    Newton from z_star on grad psi_n; by the shift law the target is within
    O(|m_n - m|) of the start, so the quadratic basin is never left for
    stats anywhere near the limit.
    """
    m_n = (stats.m_par, stats.m_perp)
    z_n = newton_2d(lambda z: grad_psi(z, params, m_n),
                    lambda z: hess_psi(z, params, m_n),
                    z_star, tol=1e-12, max_iter=100)
    gx, gy = grad_psi(z_n, params, m_n)
    return MaximizerTrack(n, z_n, z_star, math.hypot(gx, gy))


def _inv_hess(z_star: DiskPoint, params: ModelParams, m) -> np.ndarray:
    H = hess_psi(z_star, params, m)
    det = H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0]
    if abs(det) < 1e-14:
        raise SingularHessianError(
            f"Hessian at {z_star.as_tuple()} is singular (det = {det})")
    return np.linalg.inv(H)


def predicted_shift(stats: FieldStats, m, z_star: DiskPoint,
                    params: ModelParams) -> tuple[float, float]:
    """First-order maximizer shift  z_n - z* = -beta H^{-1} (m_n - m)."""
    Hinv = _inv_hess(z_star, params, m)
    v = np.array([stats.m_par - m[0], stats.m_perp - m[1]])
    out = -params.beta * (Hinv @ v)
    return float(out[0]), float(out[1])


def psi_diff_prediction(stats: FieldStats, m, z_star: DiskPoint,
                        params: ModelParams) -> float:
    """Two-term expansion of psi_n(z_n*) - psi(z*) in m_n - m:

        beta <v, z*> - (beta^2 / 2) <v, H^{-1} v>,   v = m_n - m.
    """
    Hinv = _inv_hess(z_star, params, m)
    v = np.array([stats.m_par - m[0], stats.m_perp - m[1]])
    first = params.beta * (v[0] * z_star.x + v[1] * z_star.y)
    second = -0.5 * params.beta ** 2 * float(v @ Hinv @ v)
    return first + second


def laplace_ratio(n: int, params: ModelParams, stats: FieldStats,
                  z_star: DiskPoint, half: str) -> tuple[float, float]:
    """(ratio, limit) for the sharp half-disk Laplace asymptotics.

    ratio = n * (half-disk integral of rho~_n) / exp(n psi_n(z_n*)) with
    z_n* tracked from z_star; its limit is
    (1 - |z*|^2)^{-2} * 2 pi / sqrt(det(-H[psi](z*))).
    """
    from .gibbs import _log_halves  # late import: gibbs depends on tilting only

    lp, lm = _log_halves(n, params, stats)
    if half == "half_plus":
        log_int = lp
    elif half == "half_minus":
        log_int = lm
    else:
        raise ValueError(f"half must be a half-disk region, got {half!r}")
    track = track_maximizer(n, params, stats, z_star)
    log_ratio = math.log(n) + log_int - n * psi_n(track.z_n, params, stats)
    m = (stats.m_par, stats.m_perp)
    H = hess_psi(z_star, params, m)
    det = H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0]
    if det <= 0.0:
        raise SingularHessianError(
            f"maximizer Hessian must be negative definite, det = {det}")
    limit = (1.0 - z_star.norm2) ** -2 * 2.0 * math.pi / math.sqrt(det)
    return math.exp(log_ratio), limit


def weight_limit(delta: float, gamma, params: ModelParams,
                 maximizers: MaximizerSet) -> float:
    """Limiting W^+ for stats schedules m_n = m + gamma n^(-delta).

    Three regimes: delta in [0,1) gives the indicator of gamma_par > 0,
    delta = 1 the logistic value 1/(1 + exp(-2 beta x+ gamma_par)), and
    delta > 1 the symmetric value 1/2.
    """
    if delta < 0.0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    if not maximizers.is_two:
        raise ValueError("weight limits require the two-maximizer structure")
    g_par = float(gamma[0])
    if delta < 1.0:
        if g_par == 0.0:
            raise UndeterminedRegimeError(
                "delta < 1 with gamma_par = 0 is outside the classified "
                "regimes")
        return 1.0 if g_par > 0.0 else 0.0
    if delta == 1.0:
        x_plus = maximizers.z_plus.x
        return 1.0 / (1.0 + math.exp(-2.0 * params.beta * x_plus * g_par))
    return 0.5
