"""Scale-free Fisher constants of location-scale families ``s^-1 p((x-m)/s)``.

The FIM is ``(1/s^2) [[alpha, gamma], [gamma, beta]]`` with

    alpha = E[phi^2],  gamma = E[phi (1 + z phi)],  beta = E[(1 + z phi)^2]

where ``phi = p'/p`` and ``z ~ p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ..errors import NumericalError, QuadratureError
from .spec import BaseDensity


@dataclass(frozen=True)
class QuadConfig:
    """Settings passed to ``scipy.integrate.quad`` on ``(-inf, inf)``."""

    epsabs: float = 1e-13
    epsrel: float = 1e-12
    limit: int = 400
    # the integral is split at these points to help the adaptive rule
    breakpoints: tuple = (-10.0, -1.0, 0.0, 1.0, 10.0)


@dataclass(frozen=True, eq=False)
class LocScaleConstants:
    alpha: float
    beta: float
    gamma: float
    change_of_basis: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.alpha, self.gamma], [self.gamma, self.beta]])


def _integrate(f, cfg: QuadConfig):
    edges = (-math.inf,) + tuple(cfg.breakpoints) + (math.inf,)
    total, err_total = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = integrate.quad(f, lo, hi, epsabs=cfg.epsabs, epsrel=cfg.epsrel, limit=cfg.limit)
        total += val
        err_total += err
    if not math.isfinite(total) or err_total > 1e3 * max(cfg.epsabs, cfg.epsrel * abs(total)):
        raise QuadratureError("location-scale constant integral diverged",
                              value=total, error=err_total)
    return total


def _safe(fn):
    def g(y):
        p = float(fn[0](y))
        if p <= 0.0 or not math.isfinite(p):
            return 0.0
        return fn[1](y, p)
    return g


def loc_scale_constants(base: BaseDensity, quad_config: QuadConfig | None = None) -> LocScaleConstants:
    """Quadrature of the three location-scale integrals and the factor ``P``.

    ``P`` satisfies ``P @ P.T == [[alpha, gamma], [gamma, beta]]``, so the
    metric is the half-plane metric ``Id / s^2`` pulled through ``P``.
    """
    cfg = quad_config or QuadConfig()
    phi = lambda y: float(base.score(np.array([y]))[0])
    pdf = lambda y: base.pdf(np.array([y]))[0]
    a = _integrate(_safe((pdf, lambda y, p: phi(y) ** 2 * p)), cfg)
    g = _integrate(_safe((pdf, lambda y, p: phi(y) * (1.0 + y * phi(y)) * p)), cfg)
    b = _integrate(_safe((pdf, lambda y, p: (1.0 + y * phi(y)) ** 2 * p)), cfg)
    M = np.array([[a, g], [g, b]])
    lam, Q = np.linalg.eigh(M)
    if np.any(lam <= 0):
        raise NumericalError("location-scale metric is not positive-definite", eigenvalues=lam.tolist())
    P = Q * np.sqrt(lam)
    return LocScaleConstants(a, b, g, P)
