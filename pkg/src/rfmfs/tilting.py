"""Exponential tilting function on the unit disk, its derivatives, global
maximizers, the critical temperature, and phase classification.

The limiting tilting function for inverse temperature beta, coupling J and
field statistics m = (m_par, m_perp) is

    psi(x, y) = (beta*J/2) x^2 + beta*(m_par*x + m_perp*y) + (1/2) ln(1 - x^2 - y^2).

The logarithm enters with POSITIVE sign: it is the exact reduction of the
(1-|z|^2)^((n-4)/2) surface factor, makes psi -> -inf at the boundary, and
reproduces the critical-point equations

    beta*J*x + beta*m_par = x/(1-r^2),      beta*m_perp = y/(1-r^2).

Global maximizer structure, for m_perp > 0:
  * m_par != 0: a unique maximizer with x* solving
        F(x) = beta*J*x + beta*m_par - x / (2a*(sqrt(1+a^2-x^2) - a)) = 0,
    a = 1/(2*beta*m_perp), on (0,1) for m_par > 0 (mirrored otherwise), and
    y* = sqrt(1+a^2-x*^2) - a.
  * m_par = 0 and (m_perp >= J or beta <= beta_c): the unique symmetric point
    z0 = (0, sqrt(1+a^2) - a).
  * m_par = 0, m_perp < J, beta > beta_c: the symmetric pair
    z+- = (+-sqrt(1 - 1/(beta*J) - (m_perp/J)^2), m_perp/J),
with beta_c = J / ((J - m_perp)(J + m_perp)).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fields import DistributionSpec, FieldStats
from .numerics import DiskPoint, DomainError, find_root_1d

__all__ = [
    "ModelParams",
    "DiskPoint",
    "MaximizerSet",
    "Phase",
    "UnsupportedFieldError",
    "AssumptionError",
    "psi",
    "psi_n",
    "grad_psi",
    "hess_psi",
    "beta_critical",
    "maximizers",
    "maximizer_near",
    "classify_phase",
]


class UnsupportedFieldError(ValueError):
    """Weakly varying field (m_perp <= 0): outside the supported model range."""


class AssumptionError(ValueError):
    """Distribution violates a required model assumption."""


@dataclass(frozen=True)
class ModelParams:
    """Inverse temperature and coupling, both positive."""

    beta: float
    J: float

    def __post_init__(self):
        if not (self.beta > 0.0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not (self.J > 0.0 and math.isfinite(self.J)):
            raise ValueError(f"J must be positive, got {self.J}")


class Phase(enum.Enum):
    ORDERED_FERROMAGNET = "OrderedFerromagnet"
    ORDERED_PARAMAGNET = "OrderedParamagnet"
    SPIN_GLASS = "SpinGlass"


@dataclass(frozen=True)
class MaximizerSet:
    """Global maximizers of psi: either One(z_star) or Two(z_plus, z_minus)."""

    points: tuple[DiskPoint, ...]

    def __post_init__(self):
        if len(self.points) not in (1, 2):
            raise ValueError("MaximizerSet holds one or two points")

    @property
    def is_two(self) -> bool:
        return len(self.points) == 2

    @property
    def z_star(self) -> DiskPoint:
        if self.is_two:
            raise ValueError("two-point maximizer set has no single z_star")
        return self.points[0]

    @property
    def z_plus(self) -> DiskPoint:
        return self.points[0] if not self.is_two else max(self.points, key=lambda p: p.x)

    @property
    def z_minus(self) -> DiskPoint:
        return self.points[0] if not self.is_two else min(self.points, key=lambda p: p.x)


def _xy(z):
    if isinstance(z, DiskPoint):
        return z.x, z.y
    x, y = z
    return x, y


def _check_disk(x, y):
    r2 = np.asarray(x) ** 2 + np.asarray(y) ** 2
    if np.any(r2 >= 1.0):
        raise DomainError("point outside the open unit disk")
    return r2


def psi(z, params: ModelParams, m) -> float:
    """Limiting tilting function at z (DiskPoint, pair, or coordinate arrays)."""
    x, y = _xy(z)
    r2 = _check_disk(x, y)
    m_par, m_perp = m
    val = (0.5 * params.beta * params.J * np.asarray(x) ** 2
           + params.beta * (m_par * np.asarray(x) + m_perp * np.asarray(y))
           + 0.5 * np.log1p(-r2))
    return float(val) if val.ndim == 0 else val


def psi_n(z, params: ModelParams, stats: FieldStats) -> float:
    """Finite-n tilting function: psi with m replaced by the sample stats."""
    return psi(z, params, (stats.m_par, stats.m_perp))


def grad_psi(z, params: ModelParams, m) -> tuple[float, float]:
    x, y = _xy(z)
    r2 = _check_disk(x, y)
    m_par, m_perp = m
    q = 1.0 / (1.0 - r2)
    gx = params.beta * params.J * x + params.beta * m_par - x * q
    gy = params.beta * m_perp - y * q
    return (float(gx), float(gy)) if np.ndim(gx) == 0 else (gx, gy)


def hess_psi(z, params: ModelParams, m) -> np.ndarray:
    """Analytic Hessian of psi; the off-diagonal is field-independent."""
    x, y = _xy(z)
    r2 = _check_disk(x, y)
    q = 1.0 / (1.0 - r2)
    q2 = q * q
    h11 = params.beta * params.J - q - 2.0 * x * x * q2
    h12 = -2.0 * x * y * q2
    h22 = -q - 2.0 * y * y * q2
    return np.array([[h11, h12], [h12, h22]], dtype=float)


def beta_critical(J: float, m_perp: float) -> Optional[float]:
    """J / ((J - m_perp)(J + m_perp)) when m_perp < J, else None."""
    if not (J > 0.0 and m_perp > 0.0):
        raise ValueError(f"J and m_perp must be positive, got J={J}, m_perp={m_perp}")
    if m_perp >= J:
        return None
    return J / ((J - m_perp) * (J + m_perp))


def _root_equation(a: float, params: ModelParams, m_par: float):
    def F(x: float) -> float:
        rad = 1.0 + a * a - x * x
        return (params.beta * params.J * x + params.beta * m_par
                - x / (2.0 * a * (math.sqrt(rad) - a)))
    return F


def maximizers(params: ModelParams, m) -> MaximizerSet:
    """Global maximizer set of psi per the three-case structure above."""
    m_par, m_perp = float(m[0]), float(m[1])
    if m_perp <= 0.0:
        raise UnsupportedFieldError(
            f"m_perp must be positive (weakly varying fields unsupported), got {m_perp}")
    a = 1.0 / (2.0 * params.beta * m_perp)
    if m_par != 0.0:
        eps = 1e-9
        lo, hi = (eps, 1.0 - eps) if m_par > 0.0 else (-(1.0 - eps), -eps)
        x_star = find_root_1d(_root_equation(a, params, m_par), lo, hi, tol=1e-12)
        y_star = math.sqrt(1.0 + a * a - x_star * x_star) - a
        return MaximizerSet((DiskPoint(x_star, y_star),))
    bc = beta_critical(params.J, m_perp)
    if bc is None or params.beta <= bc:
        return MaximizerSet((DiskPoint(0.0, math.sqrt(1.0 + a * a) - a),))
    x_plus = math.sqrt(1.0 - 1.0 / (params.beta * params.J) - (m_perp / params.J) ** 2)
    y0 = m_perp / params.J
    return MaximizerSet((DiskPoint(x_plus, y0), DiskPoint(-x_plus, y0)))


def maximizer_near(z0, params: ModelParams, m, tol: float = 1e-12) -> DiskPoint:
    """Newton-refined critical point of psi( . , params, m) started at z0."""
    from .numerics import newton_2d

    return newton_2d(lambda z: grad_psi(z, params, m),
                     lambda z: hess_psi(z, params, m),
                     z0, tol=tol)


def classify_phase(params: ModelParams, spec: DistributionSpec) -> Phase:
    """Phase of the random-field model from the distribution moments.

    Mean field nonzero: ordered ferromagnet.  Zero mean: paramagnet when the
    field sd dominates the coupling or the temperature is above critical,
    spin glass below (two symmetric maximizers, weights fluctuate forever).
    """
    if not spec.a1:
        raise AssumptionError(f"spec {spec} violates the finite-variance assumption")
    mu1, sd = spec.m_limit()
    if mu1 != 0.0:
        return Phase.ORDERED_FERROMAGNET
    if sd >= params.J:
        return Phase.ORDERED_PARAMAGNET
    if params.beta <= beta_critical(params.J, sd):
        return Phase.ORDERED_PARAMAGNET
    return Phase.SPIN_GLASS
