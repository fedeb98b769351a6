"""Closed-form geometry of the normal family truncated to [a, b].

Everything is expressed through the truncated density ``q`` evaluated at the
two bounds, written ``[f]`` for ``f(b) - f(a)``. Functions operate
elementwise on arrays of ``mu`` and ``sigma``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import log_ndtr

from ..errors import DegenerateTruncationError

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
# mass P([a, b]) below this is treated as degenerate
LOG_MASS_FLOOR = math.log(1e-300)


def log_mass(alpha, beta):
    """``log(Phi(beta) - Phi(alpha))`` for standardized bounds, tail-stable."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    upper = alpha > 0
    # mirror the upper tail so both branches subtract small lower-tail values
    lo = np.where(upper, -beta, alpha)
    hi = np.where(upper, -alpha, beta)
    lhi = log_ndtr(hi)
    llo = log_ndtr(lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        return lhi + np.log(-np.expm1(llo - lhi))


def boundary_density(mu, sigma, a, b, check=True):
    """Return ``(q(a), q(b), log N)`` for the truncated normal density."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    alpha = (a - mu) / sigma
    beta = (b - mu) / sigma
    lz = log_mass(alpha, beta)
    if check and np.any(~(lz >= LOG_MASS_FLOOR)):
        raise DegenerateTruncationError(
            "truncation interval carries no mass", mu=mu.tolist(), sigma=sigma.tolist()
        )
    base = -LOG_SQRT_2PI - np.log(sigma) - lz
    qa = np.exp(base - 0.5 * alpha * alpha)
    qb = np.exp(base - 0.5 * beta * beta)
    return qa, qb, lz


def stack(mu, sigma, a, b, check=True):
    """Moments of the truncated normal and all first/second partials.

    Returns a dict of arrays (same broadcast shape as ``mu``/``sigma``).
    """
    mu = np.asarray(mu, dtype=float)
    s = np.asarray(sigma, dtype=float)
    qa, qb, _ = boundary_density(mu, s, a, b, check=check)
    ua = a - mu
    ub = b - mu
    s2 = s * s
    s3 = s2 * s
    s4 = s2 * s2

    Q0 = qb - qa  # [q]
    Q1 = ub * qb - ua * qa  # [(x - mu) q]

    # first partials of q at each bound
    cm_a = ua / s2 + Q0
    cm_b = ub / s2 + Q0
    cs_a = Q1 / s - 1 / s + ua * ua / s3
    cs_b = Q1 / s - 1 / s + ub * ub / s3
    dmq_a, dmq_b = qa * cm_a, qb * cm_b
    dsq_a, dsq_b = qa * cs_a, qb * cs_b
    Dm = dmq_b - dmq_a  # [d_mu q]
    Ds = dsq_b - dsq_a  # [d_sigma q]
    UDs = ub * dsq_b - ua * dsq_a  # [(x - mu) d_sigma q]

    # second partials of q
    dmmq_a = dmq_a * cm_a + qa * (-1 / s2 + Dm)
    dmmq_b = dmq_b * cm_b + qb * (-1 / s2 + Dm)
    dsmq_a = dsq_a * cm_a + qa * (-2 * ua / s3 + Ds)
    dsmq_b = dsq_b * cm_b + qb * (-2 * ub / s3 + Ds)
    tail = -Q1 / s2 + UDs / s + 1 / s2
    dssq_a = dsq_a * cs_a + qa * (tail - 3 * ua * ua / s4)
    dssq_b = dsq_b * cs_b + qb * (tail - 3 * ub * ub / s4)

    mean = mu - s2 * Q0
    dmu = mu - mean  # (mu - mu_B)
    var = s2 * (1 - Q1) - dmu * dmu

    dm_mean = 1 - s2 * Dm
    ds_mean = -2 * s * Q0 - s2 * Ds
    dm_var = -s2 * ((-qb + ub * dmq_b) - (-qa + ua * dmq_a)) - 2 * dmu * (1 - dm_mean)
    ds_var = 2 * s * (1 - Q1) - s2 * UDs + 2 * dmu * ds_mean

    dmm_mean = -s2 * (dmmq_b - dmmq_a)
    dsm_mean = -2 * s * Dm - s2 * (dsmq_b - dsmq_a)
    dss_mean = -2 * Q0 - 4 * s * Ds - s2 * (dssq_b - dssq_a)

    dmm_var = (
        -s2 * ((-2 * dmq_b + ub * dmmq_b) - (-2 * dmq_a + ua * dmmq_a))
        - 2 * (1 - dm_mean) ** 2
        + 2 * dmu * dmm_mean
    )
    dsm_var = (
        -2 * s * ((-qb + ub * dmq_b) - (-qa + ua * dmq_a))
        - s2 * ((-dsq_b + ub * dsmq_b) - (-dsq_a + ua * dsmq_a))
        + 2 * ds_mean * (1 - dm_mean)
        + 2 * dsm_mean * dmu
    )
    dss_var = (
        2 * (1 - Q1)
        - 4 * s * UDs
        - s2 * (ub * dssq_b - ua * dssq_a)
        - 2 * ds_mean**2
        + 2 * dmu * dss_mean
    )
    return {
        "mean": mean,
        "var": var,
        "dm_mean": dm_mean,
        "ds_mean": ds_mean,
        "dm_var": dm_var,
        "ds_var": ds_var,
        "dmm_mean": dmm_mean,
        "dsm_mean": dsm_mean,
        "dss_mean": dss_mean,
        "dmm_var": dmm_var,
        "dsm_var": dsm_var,
        "dss_var": dss_var,
        "q_a": qa,
        "q_b": qb,
    }


def fim_from_stack(st, mu, sigma):
    """FIM entries ``(g11, g12, g22)`` from a moment stack."""
    s = np.asarray(sigma, dtype=float)
    s2 = s * s
    g11 = st["dm_mean"] / s2
    g12 = st["ds_mean"] / s2
    g22 = (st["ds_var"] + 2 * (st["mean"] - mu) * st["ds_mean"]) / (s2 * s)
    return g11, g12, g22


def fim(mu, sigma, a, b):
    """FIM array of shape ``(..., 2, 2)``."""
    st = stack(mu, sigma, a, b)
    g11, g12, g22 = fim_from_stack(st, mu, sigma)
    return np.stack([np.stack([g11, g12], -1), np.stack([g12, g22], -1)], -2)


def christoffel(mu, sigma, a, b):
    """Levi-Civita symbols ``G[..., k, i, j]`` from the dual-connection average.

    First-kind symbols of the two dual connections are built from the moment
    stack, averaged, then raised with the inverse FIM.
    """
    mu = np.asarray(mu, dtype=float)
    s = np.asarray(sigma, dtype=float)
    st = stack(mu, s, a, b)
    g11, g12, g22 = fim_from_stack(st, mu, s)
    s2 = s * s
    s3 = s2 * s
    s4 = s2 * s2
    d = st["mean"] - mu
    m1, ms = st["dm_mean"], st["ds_mean"]
    v1, vs = st["dm_var"], st["ds_var"]

    # dual (mixture-like) connection, first kind [ij,k]
    e11_1 = np.zeros_like(s)
    e11_2 = np.zeros_like(s)
    e12_1 = -2 * m1 / s3
    e12_2 = -2 * ms / s3
    e22_1 = -3 / s4 * (v1 + 2 * m1 * d)
    e22_2 = -3 / s4 * (vs + 2 * ms * d)
    # primal connection, first kind [ij,k]
    p11_1 = st["dmm_mean"] / s2
    p12_1 = st["dsm_mean"] / s2
    p22_1 = st["dss_mean"] / s2
    p11_2 = (st["dmm_var"] + 2 * d * st["dmm_mean"] + 2 * m1 * m1) / s3
    p12_2 = (st["dsm_var"] + 2 * d * st["dsm_mean"] + 2 * ms * m1) / s3
    p22_2 = (st["dss_var"] + 2 * d * st["dss_mean"] + 2 * ms * ms) / s3

    lc = {
        (0, 0, 0): 0.5 * (e11_1 + p11_1),
        (0, 0, 1): 0.5 * (e11_2 + p11_2),
        (0, 1, 0): 0.5 * (e12_1 + p12_1),
        (0, 1, 1): 0.5 * (e12_2 + p12_2),
        (1, 1, 0): 0.5 * (e22_1 + p22_1),
        (1, 1, 1): 0.5 * (e22_2 + p22_2),
    }
    det = g11 * g22 - g12 * g12
    inv = ((g22 / det, -g12 / det), (-g12 / det, g11 / det))
    out = np.empty(s.shape + (2, 2, 2))
    for i in range(2):
        for j in range(i, 2):
            first = (lc[(i, j, 0)], lc[(i, j, 1)])
            for k in range(2):
                val = first[0] * inv[0][k] + first[1] * inv[1][k]
                out[..., k, i, j] = val
                out[..., k, j, i] = val
    return out


def score(x, mu, sigma, a, b):
    """Score ``d/d(mu, sigma) log q(x)`` as an array of shape ``(n, 2)``."""
    x = np.asarray(x, dtype=float)
    qa, qb, _ = boundary_density(mu, sigma, a, b)
    u = x - mu
    Q0 = qb - qa
    Q1 = (b - mu) * qb - (a - mu) * qa
    d_mu = u / sigma**2 + Q0
    d_sigma = -1 / sigma + u * u / sigma**3 + Q1 / sigma
    return np.stack([d_mu, d_sigma], -1)
