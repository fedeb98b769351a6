"""Gumbel and truncated-Gumbel Fisher information by quadrature.

Work in the standardized variable ``z = (x - m)/s`` with base density
``p(z) = exp(-z - exp(-z))`` and CDF ``F(z) = exp(-exp(-z))``.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import integrate

from ..errors import DegenerateTruncationError, QuadratureError

EULER_GAMMA = 0.57721566490153286061
DEFAULT_NODES = 200


@lru_cache(maxsize=None)
def beta_integral() -> float:
    """``int_0^inf log(x)^2 x exp(-x) dx``, computed once per process."""
    f = lambda x: math.log(x) ** 2 * x * math.exp(-x)
    total = 0.0
    for lo, hi in ((0.0, 1.0), (1.0, math.inf)):
        val, err, info = integrate.quad(f, lo, hi, epsabs=1e-15, epsrel=1e-13,
                                        limit=200, full_output=1)[:3]
        if err > 1e-11:
            raise QuadratureError("Gumbel beta integral did not converge", error=err)
        total += val
    return total


def gumbel_constants() -> np.ndarray:
    """Scale-free matrix ``s^2 I`` of the Gumbel family."""
    c = EULER_GAMMA - 1.0
    return np.array([[1.0, c], [c, beta_integral() + 1.0]])


def gumbel_fim(m, s):
    s = np.asarray(s, dtype=float)
    c = gumbel_constants()
    return c / (s * s)[..., None, None]


@lru_cache(maxsize=16)
def legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def log_mass(za, zb):
    """``log(F(zb) - F(za))``."""
    ea = np.exp(-np.asarray(za, dtype=float))
    eb = np.exp(-np.asarray(zb, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        return -eb + np.log(-np.expm1(eb - ea))


# log-density drop (nats) below its maximum on [za, zb] beyond which the
# integrands are dropped; keeps the fixed node budget on the bulk of the mass
TAIL = 70.0


def quad_window(za, zb):
    """Sub-interval of ``[za, zb]`` carrying all but ~e^-60 of the integrals."""
    zs = np.clip(0.0, za, zb)
    lo = np.maximum(za, -np.logaddexp(-zs, math.log(TAIL)))
    hi = np.minimum(zb, zs + TAIL)
    return lo, hi


def _pdf_std(z):
    return np.exp(-z - np.exp(-z))


def truncated_fim(m, s, a, b, nodes: int = DEFAULT_NODES):
    """FIM of the Gumbel family truncated to ``[a, b]``, shape ``(..., 2, 2)``.

    Uses ``I = -E_q[Hess log q]`` with the expectations that have no closed
    form done by Gauss-Legendre quadrature on :func:`quad_window` of
    ``[za, zb]``.
    """
    m = np.asarray(m, dtype=float)
    s = np.asarray(s, dtype=float)
    za = (a - m) / s
    zb = (b - m) / s
    lN = log_mass(za, zb)
    if np.any(~(lN >= math.log(1e-300))):
        raise DegenerateTruncationError("truncated Gumbel mass vanishes", m=m.tolist(), s=s.tolist())
    N = np.exp(lN)
    x, w = legendre(nodes)
    lo, hi = quad_window(za, zb)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    z = mid[..., None] + half[..., None] * x
    e = np.exp(-z)
    wq = (half / N)[..., None] * w * np.exp(-z - e)  # E_q[h] = sum(wq * h)
    E_e = np.sum(wq * e, axis=-1)
    E_ez = np.sum(wq * e * z, axis=-1)
    E_ez2 = np.sum(wq * e * z * z, axis=-1)
    E_1me = np.sum(wq * (1.0 - e), axis=-1)
    E_z1me = np.sum(wq * z * (1.0 - e), axis=-1)
    s2 = s * s

    # E[Hess g(z(theta))], g(z) = z + exp(-z)
    h_mm = E_e / s2
    h_ms = (E_ez + E_1me) / s2
    h_ss = (E_ez2 + 2.0 * E_z1me) / s2

    # Hessian of log N
    fa, fb = _pdf_std(za), _pdf_std(zb)
    dfa, dfb = -fa * (1 - np.exp(-za)), -fb * (1 - np.exp(-zb))
    dm_a = dm_b = -1.0 / s
    ds_a, ds_b = -za / s, -zb / s
    Nm = fb * dm_b - fa * dm_a
    Ns = fb * ds_b - fa * ds_a
    Nmm = dfb * dm_b * dm_b - dfa * dm_a * dm_a
    Nms = dfb * dm_b * ds_b + fb / s2 - (dfa * dm_a * ds_a + fa / s2)
    Nss = dfb * ds_b * ds_b + fb * 2 * zb / s2 - (dfa * ds_a * ds_a + fa * 2 * za / s2)
    L_mm = Nmm / N - Nm * Nm / (N * N)
    L_ms = Nms / N - Nm * Ns / (N * N)
    L_ss = Nss / N - Ns * Ns / (N * N)

    g11 = h_mm + L_mm
    g12 = h_ms + L_ms
    g22 = h_ss - 1.0 / s2 + L_ss
    return np.stack([np.stack([g11, g12], -1), np.stack([g12, g22], -1)], -2)


def score(x, m, s, a=None, b=None):
    """Score in ``(m, s)``; truncated when bounds are given."""
    x = np.asarray(x, dtype=float)
    z = (x - m) / s
    g1 = 1.0 - np.exp(-z)
    d_m = g1 / s
    d_s = -1.0 / s + z * g1 / s
    if a is not None:
        za, zb = (a - m) / s, (b - m) / s
        N = np.exp(log_mass(za, zb))
        fa, fb = _pdf_std(za), _pdf_std(zb)
        d_m = d_m + (fb - fa) / (s * N)
        d_s = d_s + (zb * fb - za * fa) / (s * N)
    return np.stack([d_m, d_s], -1)
