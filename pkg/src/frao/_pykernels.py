"""Pure-numpy geodesic kernels (fallback for the compiled core).

All routines work on a batch of ``K`` parameter points at once and never
raise on invalid rows: such rows are reported through a boolean mask.
"""

from __future__ import annotations

import math

import numpy as np

from .families import core as _core
from .families import gumbel as _gum
from .families import truncnorm as _tn
from .families.spec import FamilySpec, Kind, domain_mask

FD_STEP = 1e-7
SQRT_EPS = math.sqrt(np.finfo(float).eps)
SPEED_LIMIT = 1e8
EULER, RK4 = 0, 1


def fd_steps(coords, h=FD_STEP):
    """Per-coordinate difference step, grown with the coordinate magnitude."""
    return np.maximum(h, SQRT_EPS * np.abs(coords))


def valid_mask(spec: FamilySpec, coords) -> np.ndarray:
    """Domain membership plus non-vanishing truncation mass."""
    c = np.asarray(coords, dtype=float)
    ok = domain_mask(spec, c)
    kind = spec.kind
    if kind in (Kind.TRUNCATED_NORMAL, Kind.TRUNCATED_LOGNORMAL, Kind.TRUNCATED_GUMBEL):
        a, b = spec.truncation
        if kind is Kind.TRUNCATED_LOGNORMAL:
            a, b = _core.log_bounds(spec)
        mu = np.where(ok, c[..., 0], 0.0)
        s = np.where(ok, c[..., 1], 1.0)
        with np.errstate(all="ignore"):
            if kind is Kind.TRUNCATED_GUMBEL:
                lz = _gum.log_mass((a - mu) / s, (b - mu) / s)
            else:
                lz = _tn.log_mass((a - mu) / s, (b - mu) / s)
        ok &= lz >= _tn.LOG_MASS_FLOOR
    return ok


def _safe_fim(spec, c, ok):
    ref = c[ok][0] if ok.any() else None
    if ref is None:
        return np.full(c.shape[:-1] + (c.shape[-1],) * 2, np.nan)
    cc = np.where(ok[..., None], c, ref)
    with np.errstate(all="ignore"):
        g = _core.fim_array(spec, cc)
    return np.where(ok[..., None, None], g, np.nan)


def inverse(g):
    """Explicit inverse of stacked 1x1 or 2x2 symmetric matrices."""
    if g.shape[-1] == 1:
        return 1.0 / g
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    out = np.empty_like(g)
    out[..., 0, 0] = g[..., 1, 1] / det
    out[..., 1, 1] = g[..., 0, 0] / det
    out[..., 0, 1] = -g[..., 0, 1] / det
    out[..., 1, 0] = -g[..., 1, 0] / det
    return out


def christoffel_from_derivs(g, dg):
    """Second-kind symbols from the metric and ``dg[..., l, i, j] = d_l g_ij``."""
    d = g.shape[-1]
    ginv = inverse(g)
    first = np.empty(g.shape[:-2] + (d, d, d))  # [i, j, m]
    for i in range(d):
        for j in range(d):
            for m in range(d):
                first[..., i, j, m] = 0.5 * (dg[..., i, j, m] + dg[..., j, i, m] - dg[..., m, i, j])
    out = np.zeros(g.shape[:-2] + (d, d, d))
    for k in range(d):
        for i in range(d):
            for j in range(d):
                acc = 0.0
                for m in range(d):
                    acc = acc + ginv[..., k, m] * first[..., i, j, m]
                out[..., k, i, j] = acc
    return out


def geometry_batch(spec: FamilySpec, coords, h=FD_STEP):
    """Christoffel symbols, metric and validity for each row of ``coords``.

    Closed-form symbols are used where available, otherwise central
    differences of the metric with steps from :func:`fd_steps`.
    """
    c = np.asarray(coords, dtype=float)
    d = c.shape[-1]
    ok = valid_mask(spec, c)
    g = _safe_fim(spec, c, ok)
    if spec.kind in _core.CLOSED_CHRISTOFFEL_KINDS:
        ref = c[ok][0] if ok.any() else None
        if ref is None:
            return np.full(c.shape[:-1] + (d, d, d), np.nan), g, ok
        cc = np.where(ok[..., None], c, ref)
        with np.errstate(all="ignore"):
            G = _core.christoffel_closed_array(spec, cc)
    else:
        hs = fd_steps(c, h)
        dg = np.empty(c.shape[:-1] + (d, d, d))
        for l in range(d):
            e = np.zeros(d)
            e[l] = 1.0
            cp = c + hs[..., l : l + 1] * e
            cm = c - hs[..., l : l + 1] * e
            okp, okm = valid_mask(spec, cp), valid_mask(spec, cm)
            ok = ok & okp & okm
            dg[..., l, :, :] = (_safe_fim(spec, cp, okp) - _safe_fim(spec, cm, okm)) / (
                2.0 * hs[..., l, None, None]
            )
        with np.errstate(all="ignore"):
            G = christoffel_from_derivs(g, dg)
    with np.errstate(all="ignore"):
        G = 0.5 * (G + np.swapaxes(G, -1, -2))
    ok = ok & np.all(np.isfinite(G), axis=(-3, -2, -1)) & np.all(np.isfinite(g), axis=(-2, -1))
    return G, g, ok & positive_definite(g)


def positive_definite(g):
    """Mask of metrics that are strictly positive-definite (d <= 2).

    Far from the data scale the closed forms cancel catastrophically and
    can return a singular or indefinite matrix; such points are treated as
    outside the usable domain.
    """
    with np.errstate(invalid="ignore"):
        if g.shape[-1] == 1:
            return g[..., 0, 0] > 0
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
        return (g[..., 0, 0] > 0) & (det > 0)


def _accel(G, v):
    return -np.einsum("...kij,...i,...j->...k", G, v, v)


def _quad(g, v):
    return np.einsum("...ij,...i,...j->...", g, v, v)


def integrate(spec, theta0, v0, steps, method=EULER, dt=None, record=None, h=FD_STEP,
              chunk=16):
    """Integrate a batch of geodesics with fixed step ``dt``.

    Parameters
    ----------
    theta0, v0 : (K, d) arrays
    record : increasing step indices at which the state is stored
        (default: every step).
    chunk : rows processed together; fixed so results do not depend on how
        work is split across threads.

    Returns
    -------
    dict with ``pos``, ``vel`` (K, R, d), ``speed`` (K, R), ``status`` (K,)
    (0 complete, 1 blew up) and ``blow_step`` (K,) (-1 when complete).
    """
    theta0 = np.atleast_2d(np.asarray(theta0, dtype=float))
    v0 = np.atleast_2d(np.asarray(v0, dtype=float))
    K, d = theta0.shape
    steps = int(steps)
    dt = 1.0 / steps if dt is None else float(dt)
    record = np.arange(steps + 1) if record is None else np.asarray(record, dtype=np.int64)
    R = record.size
    slot = np.full(steps + 1, -1, dtype=np.int64)
    slot[record] = np.arange(R)
    out = {
        "pos": np.full((K, R, d), np.nan),
        "vel": np.full((K, R, d), np.nan),
        "speed": np.full((K, R), np.nan),
        "status": np.zeros(K, dtype=np.int8),
        "blow_step": np.full(K, -1, dtype=np.int64),
    }
    for k0 in range(0, K, chunk):
        sl = slice(k0, min(K, k0 + chunk))
        _integrate_chunk(spec, theta0[sl], v0[sl], steps, method, dt, slot, h,
                         {key: val[sl] for key, val in out.items()})
    return out


def _integrate_chunk(spec, theta0, v0, steps, method, dt, slot, h, out):
    th = theta0.copy()
    v = v0.copy()
    K = th.shape[0]
    active = np.ones(K, dtype=bool)
    half = 0.5 * dt
    with np.errstate(all="ignore"):
        for n in range(steps + 1):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            G, g, ok = geometry_batch(spec, th[idx], h)
            sp2 = _quad(g, v[idx])
            ok &= np.all(np.isfinite(v[idx]), axis=-1) & (sp2 <= SPEED_LIMIT**2)
            bad = idx[~ok]
            active[bad] = False
            out["status"][bad] = 1
            out["blow_step"][bad] = n
            idx, G, sp2 = idx[ok], G[ok], sp2[ok]
            r = slot[n]
            if r >= 0:
                out["pos"][idx, r] = th[idx]
                out["vel"][idx, r] = v[idx]
                out["speed"][idx, r] = np.sqrt(sp2)
            if n == steps or idx.size == 0:
                continue
            x, u = th[idx], v[idx]
            if method == EULER:
                th[idx] = x + dt * u
                v[idx] = u + dt * _accel(G, u)
                continue
            a1 = _accel(G, u)
            x2, u2 = x + half * u, u + half * a1
            G2, _, ok2 = geometry_batch(spec, x2, h)
            a2 = _accel(G2, u2)
            x3, u3 = x + half * u2, u + half * a2
            G3, _, ok3 = geometry_batch(spec, x3, h)
            a3 = _accel(G3, u3)
            x4, u4 = x + dt * u3, u + dt * a3
            G4, _, ok4 = geometry_batch(spec, x4, h)
            a4 = _accel(G4, u4)
            th[idx] = x + (dt / 6.0) * (u + 2.0 * u2 + 2.0 * u3 + u4)
            v[idx] = u + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            stage_bad = idx[~(ok2 & ok3 & ok4)]
            active[stage_bad] = False
            out["status"][stage_bad] = 1
            out["blow_step"][stage_bad] = n + 1
