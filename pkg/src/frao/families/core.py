"""Densities, samplers, scores and Fisher metrics for every supported kind.

Array versions (``fim_array``, ``christoffel_closed_array``) take coordinates
of shape ``(..., d)`` and are what the integrators call in their inner loop.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import special

from ..errors import (
    NotAvailableError,
    RadiusTooLargeError,
    ValidationError,
)
from . import gumbel as _gum
from . import truncnorm as _tn
from .locscale import LocScaleConstants, QuadConfig, loc_scale_constants
from .spec import (
    PARAM_FLOOR,
    TRIANGULAR_MARGIN,
    ChristoffelSymbols,
    FamilySpec,
    FisherMetric,
    Kind,
    ParamPoint,
    TruncatedMoments,
    domain_mask,
)

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
MC_MIN_SAMPLES = 1000

CLOSED_CHRISTOFFEL_KINDS = frozenset(
    {Kind.NORMAL, Kind.LOGNORMAL, Kind.TRUNCATED_NORMAL, Kind.TRUNCATED_LOGNORMAL}
)
QUADRATURE_KINDS = frozenset({Kind.GUMBEL, Kind.TRUNCATED_GUMBEL, Kind.LOCATION_SCALE})


def _pt(spec, theta) -> ParamPoint:
    return ParamPoint.of(spec, theta)


def log_bounds(spec: FamilySpec):
    """Normal-side truncation ``(ln a, ln b)`` of a truncated log-normal."""
    a, b = spec.truncation
    return math.log(a), math.log(b)


def normal_side(spec: FamilySpec) -> FamilySpec:
    """Family whose geometry a (truncated) log-normal shares."""
    if spec.kind is Kind.LOGNORMAL:
        return FamilySpec.normal()
    if spec.kind is Kind.TRUNCATED_LOGNORMAL:
        return FamilySpec.truncated_normal(*log_bounds(spec))
    return spec


@lru_cache(maxsize=32)
def _ls_constants(base) -> LocScaleConstants:
    return loc_scale_constants(base, QuadConfig())


# ---------------------------------------------------------------- densities


def logpdf(spec: FamilySpec, theta, x):
    """Log density; ``-inf`` outside the support."""
    th = _pt(spec, theta).coords
    x = np.asarray(x, dtype=float)
    kind = spec.kind
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind in (Kind.NORMAL, Kind.TRUNCATED_NORMAL):
            mu, s = th
            out = -LOG_SQRT_2PI - math.log(s) - 0.5 * ((x - mu) / s) ** 2
            if kind is Kind.TRUNCATED_NORMAL:
                a, b = spec.truncation
                _, _, lz = _tn.boundary_density(mu, s, a, b)
                out = np.where((x >= a) & (x <= b), out - lz, -np.inf)
            return out
        if kind in (Kind.LOGNORMAL, Kind.TRUNCATED_LOGNORMAL):
            mu, s = th
            pos = x > 0
            lx = np.log(np.where(pos, x, 1.0))
            out = -LOG_SQRT_2PI - math.log(s) - lx - 0.5 * ((lx - mu) / s) ** 2
            out = np.where(pos, out, -np.inf)
            if kind is Kind.TRUNCATED_LOGNORMAL:
                a, b = spec.truncation
                la, lb = log_bounds(spec)
                _, _, lz = _tn.boundary_density(mu, s, la, lb)
                out = np.where((x >= a) & (x <= b), out - lz, -np.inf)
            return out
        if kind in (Kind.GUMBEL, Kind.TRUNCATED_GUMBEL):
            m, s = th
            z = (x - m) / s
            with np.errstate(over="ignore"):  # far left tail: log density -> -inf
                out = -math.log(s) - z - np.exp(-z)
            if kind is Kind.TRUNCATED_GUMBEL:
                a, b = spec.truncation
                lN = float(_gum.log_mass((a - m) / s, (b - m) / s))
                out = np.where((x >= a) & (x <= b), out - lN, -np.inf)
            return out
        if kind is Kind.GAMMA:
            al, be = th
            pos = x > 0
            xs = np.where(pos, x, 1.0)
            out = al * math.log(be) - special.gammaln(al) + (al - 1) * np.log(xs) - be * xs
            return np.where(pos, out, -np.inf)
        if kind is Kind.EXPONENTIAL:
            (lam,) = th
            return np.where(x >= 0, math.log(lam) - lam * x, -np.inf)
        if kind is Kind.TRIANGULAR:
            (m,) = th
            a, b = spec.truncation
            left = np.log(2 * (x - a)) - math.log((b - a) * (m - a))
            right = np.log(2 * (b - x)) - math.log((b - a) * (b - m))
            out = np.where(x <= m, left, right)
            return np.where((x >= a) & (x <= b), out, -np.inf)
        if kind is Kind.LOCATION_SCALE:
            m, s = th
            return np.log(spec.base.pdf((x - m) / s)) - math.log(s)
    raise ValidationError(f"unsupported kind {kind}")


def pdf(spec: FamilySpec, theta, x):
    """Density at ``x`` (scalar in, scalar out; arrays broadcast)."""
    out = np.exp(logpdf(spec, theta, x))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------- sampling


def _tn_ppf(u, mu, s, a, b):
    al, be = (a - mu) / s, (b - mu) / s
    if al > 0:
        # upper tail: invert the survival function for accuracy
        hi, lo = special.ndtr(-al), special.ndtr(-be)
        z = -special.ndtri(hi - u * (hi - lo))
    else:
        lo, hi = special.ndtr(al), special.ndtr(be)
        z = special.ndtri(lo + u * (hi - lo))
    return np.clip(mu + s * z, a, b)


def ppf(spec: FamilySpec, theta, u):
    """Quantile function, used by the inverse-CDF sampler."""
    th = _pt(spec, theta).coords
    u = np.asarray(u, dtype=float)
    kind = spec.kind
    if kind is Kind.NORMAL:
        return th[0] + th[1] * special.ndtri(u)
    if kind is Kind.TRUNCATED_NORMAL:
        return _tn_ppf(u, th[0], th[1], *spec.truncation)
    if kind is Kind.LOGNORMAL:
        return np.exp(th[0] + th[1] * special.ndtri(u))
    if kind is Kind.TRUNCATED_LOGNORMAL:
        a, b = spec.truncation
        return np.clip(np.exp(_tn_ppf(u, th[0], th[1], *log_bounds(spec))), a, b)
    if kind is Kind.GUMBEL:
        return th[0] - th[1] * np.log(-np.log(u))
    if kind is Kind.TRUNCATED_GUMBEL:
        m, s = th
        a, b = spec.truncation
        Fa = math.exp(-math.exp(-(a - m) / s))
        Fb = math.exp(-math.exp(-(b - m) / s))
        return np.clip(m - s * np.log(-np.log(Fa + u * (Fb - Fa))), a, b)
    if kind is Kind.GAMMA:
        return special.gammaincinv(th[0], u) / th[1]
    if kind is Kind.EXPONENTIAL:
        return -np.log1p(-u) / th[0]
    if kind is Kind.TRIANGULAR:
        (m,) = th
        a, b = spec.truncation
        Fm = (m - a) / (b - a)
        left = a + np.sqrt(u * (b - a) * (m - a))
        right = b - np.sqrt((1 - u) * (b - a) * (b - m))
        return np.where(u < Fm, left, right)
    if kind is Kind.LOCATION_SCALE:
        if spec.base.ppf is None:
            raise NotAvailableError(f"base density {spec.base.name} has no quantile function")
        return th[0] + th[1] * spec.base.ppf(u)
    raise ValidationError(f"unsupported kind {kind}")


def sample(spec: FamilySpec, theta, n: int, seed) -> np.ndarray:
    """``n`` i.i.d. draws by inverse CDF from a generator seeded with ``seed``.

    ``seed`` may be an integer or a ``numpy.random.SeedSequence``.
    """
    if int(n) != n or n < 1:
        raise ValidationError(f"sample size must be a positive integer, got {n}")
    rng = np.random.default_rng(seed)
    u = rng.random(int(n))
    # u = 0 maps to -inf for unbounded kinds; redraw would break the stream
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    return np.asarray(ppf(spec, theta, u), dtype=float)


# ---------------------------------------------------------------- scores


def score(spec: FamilySpec, theta, x) -> np.ndarray:
    """Gradient of ``log pdf`` in the parameters, shape ``(n, d)``."""
    th = _pt(spec, theta).coords
    x = np.atleast_1d(np.asarray(x, dtype=float))
    kind = spec.kind
    if kind in (Kind.NORMAL, Kind.LOGNORMAL):
        mu, s = th
        y = x if kind is Kind.NORMAL else np.log(x)
        u = y - mu
        return np.stack([u / s**2, -1 / s + u * u / s**3], -1)
    if kind is Kind.TRUNCATED_NORMAL:
        return _tn.score(x, th[0], th[1], *spec.truncation)
    if kind is Kind.TRUNCATED_LOGNORMAL:
        return _tn.score(np.log(x), th[0], th[1], *log_bounds(spec))
    if kind is Kind.GUMBEL:
        return _gum.score(x, th[0], th[1])
    if kind is Kind.TRUNCATED_GUMBEL:
        return _gum.score(x, th[0], th[1], *spec.truncation)
    if kind is Kind.GAMMA:
        al, be = th
        d_a = math.log(be) - special.psi(al) + np.log(x)
        d_b = al / be - x
        return np.stack([d_a, d_b], -1)
    if kind is Kind.EXPONENTIAL:
        return (1 / th[0] - x)[:, None]
    if kind is Kind.TRIANGULAR:
        (m,) = th
        a, b = spec.truncation
        return np.where(x <= m, -1 / (m - a), 1 / (b - m))[:, None]
    if kind is Kind.LOCATION_SCALE:
        m, s = th
        z = (x - m) / s
        phi = spec.base.score(z)
        return np.stack([-phi / s, -(1 + z * phi) / s], -1)
    raise ValidationError(f"unsupported kind {kind}")


# ---------------------------------------------------------------- Fisher metric


def _sym(g11, g12, g22):
    return np.stack([np.stack([g11, g12], -1), np.stack([g12, g22], -1)], -2)


def fim_array(spec: FamilySpec, coords) -> np.ndarray:
    """FIM for coordinates of shape ``(..., d)``; returns ``(..., d, d)``.

    No domain validation: callers pass interior points.
    """
    c = np.asarray(coords, dtype=float)
    kind = spec.kind
    if kind in (Kind.NORMAL, Kind.LOGNORMAL):
        s2 = c[..., 1] ** 2
        return _sym(1 / s2, np.zeros_like(s2), 2 / s2)
    if kind is Kind.TRUNCATED_NORMAL:
        return _tn.fim(c[..., 0], c[..., 1], *spec.truncation)
    if kind is Kind.TRUNCATED_LOGNORMAL:
        return _tn.fim(c[..., 0], c[..., 1], *log_bounds(spec))
    if kind is Kind.GUMBEL:
        return _gum.gumbel_fim(c[..., 0], c[..., 1])
    if kind is Kind.TRUNCATED_GUMBEL:
        return _gum.truncated_fim(c[..., 0], c[..., 1], *spec.truncation)
    if kind is Kind.LOCATION_SCALE:
        M = _ls_constants(spec.base).matrix
        s2 = c[..., 1] ** 2
        return M / s2[..., None, None]
    if kind is Kind.GAMMA:
        al, be = c[..., 0], c[..., 1]
        return _sym(special.polygamma(1, al), -1 / be, al / be**2)
    if kind is Kind.EXPONENTIAL:
        return (1 / c[..., 0] ** 2)[..., None, None]
    if kind is Kind.TRIANGULAR:
        a, b = spec.truncation
        m = c[..., 0]
        return (1 / ((m - a) * (b - m)))[..., None, None]
    raise ValidationError(f"unsupported kind {kind}")


def fim_source(spec: FamilySpec) -> str:
    return "quadrature" if spec.kind in QUADRATURE_KINDS else "closed-form"


def fim(spec: FamilySpec, theta) -> FisherMetric:
    pt = _pt(spec, theta)
    g = fim_array(spec, pt.as_array())
    return FisherMetric(g, pt, fim_source(spec))


def fim_monte_carlo(spec: FamilySpec, theta, n: int, seed) -> FisherMetric:
    """Sample average of the score outer product, with entrywise standard errors."""
    if int(n) != n or n < MC_MIN_SAMPLES:
        raise ValidationError(f"Monte-Carlo FIM needs n >= {MC_MIN_SAMPLES}, got {n}")
    pt = _pt(spec, theta)
    x = sample(spec, pt, int(n), seed)
    S = score(spec, pt, x)
    outer = S[:, :, None] * S[:, None, :]
    est = outer.mean(axis=0)
    se = outer.std(axis=0, ddof=1) / math.sqrt(n)
    return FisherMetric(est, pt, "monte-carlo", se)


def truncated_moments(theta, a: float, b: float) -> TruncatedMoments:
    """Conditional mean/variance of a normal on ``[a, b]`` and their partials."""
    spec = FamilySpec.truncated_normal(a, b)
    mu, s = _pt(spec, theta).coords
    st = _tn.stack(mu, s, spec.truncation[0], spec.truncation[1])
    vals = {k: float(v) for k, v in st.items()}
    extra = {"q_a": vals.pop("q_a"), "q_b": vals.pop("q_b")}
    return TruncatedMoments(**vals, extra=extra)


# ---------------------------------------------------------------- Christoffel


def christoffel_closed_array(spec: FamilySpec, coords) -> np.ndarray:
    """Closed-form symbols ``[..., k, i, j]`` for normal-type kinds."""
    c = np.asarray(coords, dtype=float)
    kind = spec.kind
    if kind in (Kind.NORMAL, Kind.LOGNORMAL):
        s = c[..., 1]
        out = np.zeros(s.shape + (2, 2, 2))
        out[..., 0, 0, 1] = out[..., 0, 1, 0] = -1 / s
        out[..., 1, 0, 0] = 1 / (2 * s)
        out[..., 1, 1, 1] = -1 / s
        return out
    if kind is Kind.TRUNCATED_NORMAL:
        return _tn.christoffel(c[..., 0], c[..., 1], *spec.truncation)
    if kind is Kind.TRUNCATED_LOGNORMAL:
        return _tn.christoffel(c[..., 0], c[..., 1], *log_bounds(spec))
    raise NotAvailableError(
        f"no closed-form Christoffel symbols for {spec}; use christoffel_numeric"
    )


def christoffel_closed(spec: FamilySpec, theta) -> ChristoffelSymbols:
    if spec.kind not in CLOSED_CHRISTOFFEL_KINDS:
        raise NotAvailableError(
            f"no closed-form Christoffel symbols for {spec}; use christoffel_numeric"
        )
    pt = _pt(spec, theta)
    return ChristoffelSymbols(christoffel_closed_array(spec, pt.as_array()), pt, "closed-form")


# ---------------------------------------------------------------- 1-parameter closed forms


def _tri_frame(spec):
    a, b = spec.truncation
    return 0.5 * (a + b), 0.5 * (b - a)  # centre and sqrt(beta)


def _tri_angle(spec, m):
    c, r = _tri_frame(spec)
    return math.asin(max(-1.0, min(1.0, (m - c) / r)))


def fr_distance_closed(spec: FamilySpec, theta0, theta1) -> float:
    """Exact Fisher-Rao distance for triangular and exponential families."""
    if spec.kind is Kind.EXPONENTIAL:
        l0, l1 = _pt(spec, theta0)[0], _pt(spec, theta1)[0]
        return abs(math.log(l1) - math.log(l0))
    if spec.kind is Kind.TRIANGULAR:
        m0, m1 = _pt(spec, theta0)[0], _pt(spec, theta1)[0]
        return abs(_tri_angle(spec, m1) - _tri_angle(spec, m0))
    raise NotAvailableError(f"no closed-form distance for {spec}")


def closed_sphere_1d(spec: FamilySpec, center, delta: float):
    """The two points at distance ``delta``: ``(theta_minus, theta_plus)``."""
    if not (delta > 0 and math.isfinite(delta)):
        raise ValidationError(f"radius must be positive, got {delta}")
    pt = _pt(spec, center)
    if spec.kind is Kind.EXPONENTIAL:
        lam = pt[0]
        lo, hi = lam * math.exp(-delta), lam * math.exp(delta)
        if lo < PARAM_FLOOR:
            raise RadiusTooLargeError(f"radius {delta} takes lambda below {PARAM_FLOOR}")
        return ParamPoint((lo,)), ParamPoint((hi,))
    if spec.kind is Kind.TRIANGULAR:
        c, r = _tri_frame(spec)
        t0 = _tri_angle(spec, pt[0])
        if t0 - delta <= -math.pi / 2 or t0 + delta >= math.pi / 2:
            raise RadiusTooLargeError(
                f"radius {delta} leaves the triangular domain around m={pt[0]}"
            )
        pts = tuple(r * math.sin(t0 + sgn * delta) + c for sgn in (-1.0, 1.0))
        if not bool(np.all(domain_mask(spec, np.array(pts)[:, None]))):
            raise RadiusTooLargeError(
                f"radius {delta} puts the mode within {TRIANGULAR_MARGIN:g}(b-a) of the support"
            )
        return ParamPoint((pts[0],)), ParamPoint((pts[1],))
    raise NotAvailableError(f"no closed-form sphere for {spec}")


def pushforward_spec(base: FamilySpec, map: str = "exp") -> FamilySpec:
    """Image of a (truncated) normal family under ``x -> exp(x)``.

    A normal truncated to ``[a, b]`` maps to the log-normal truncated to
    ``[e^a, e^b]``; geometry of the result delegates back to ``base``.
    """
    if str(map).lower() != "exp":
        raise ValidationError(f"unsupported pushforward map {map!r}")
    if base.kind is Kind.NORMAL:
        return FamilySpec.lognormal()
    if base.kind is Kind.TRUNCATED_NORMAL:
        a, b = base.truncation
        return FamilySpec.truncated_lognormal(math.exp(a), math.exp(b))
    raise ValidationError(f"pushforward is defined for normal families, got {base}")


def mean(spec: FamilySpec, theta) -> float:
    """Expectation of ``X``; quadrature where no closed form is coded."""
    th = _pt(spec, theta).coords
    kind = spec.kind
    if kind is Kind.NORMAL:
        return th[0]
    if kind is Kind.TRUNCATED_NORMAL:
        return float(_tn.stack(th[0], th[1], *spec.truncation)["mean"])
    if kind is Kind.LOGNORMAL:
        return math.exp(th[0] + 0.5 * th[1] ** 2)
    if kind is Kind.GUMBEL:
        return th[0] + _gum.EULER_GAMMA * th[1]
    if kind is Kind.TRUNCATED_GUMBEL:
        m, s = th
        a, b = spec.truncation
        za, zb = (a - m) / s, (b - m) / s
        x, w = _gum.legendre(_gum.DEFAULT_NODES)
        lo, hi = (float(v) for v in _gum.quad_window(za, zb))
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        z = mid + half * x
        N = math.exp(float(_gum.log_mass(za, zb)))
        return m + s * float(np.sum(half * w * z * np.exp(-z - np.exp(-z)))) / N
    if kind is Kind.GAMMA:
        return th[0] / th[1]
    if kind is Kind.EXPONENTIAL:
        return 1.0 / th[0]
    if kind is Kind.TRIANGULAR:
        a, b = spec.truncation
        return (a + b + th[0]) / 3.0
    from scipy import integrate

    lo, hi = spec.support
    val, _ = integrate.quad(lambda x: x * pdf(spec, th, x), lo, hi, limit=200)
    return float(val)
