"""Riemannian machinery on parametric families.

Numeric Christoffel symbols, geodesic integration, the exponential map,
Fisher-Rao spheres and geodesic-shooting distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import (
    BlowUpError,
    BoundaryError,
    NoConvergenceError,
    NumericalError,
    SphereDegenerateError,
    ValidationError,
)
from .families import core as fam
from .families.spec import ChristoffelSymbols, FamilySpec, Kind, ParamPoint, ONE_PARAM_KINDS

COMPLETE = "complete"
BLEW_UP = "blew-up"
DEFAULT_STEPS = 10_000
DEFAULT_K = 100


# ---------------------------------------------------------------- Christoffel symbols


def christoffel_numeric(spec: FamilySpec, theta, h: float = kernels.FD_STEP) -> ChristoffelSymbols:
    """Symbols from central differences of the FIM, exact 2x2 inversion.

    The step grows as ``sqrt(eps) * |theta_j|`` for large coordinates.
    """
    pt = ParamPoint.of(spec, theta)
    c = pt.as_array()
    hs = kernels._py.fd_steps(c, h)
    d = c.size
    for l in range(d):
        for sgn in (1.0, -1.0):
            cc = c.copy()
            cc[l] += sgn * hs[l]
            if not kernels._py.valid_mask(spec, cc):
                raise BoundaryError(
                    f"difference stencil leaves the domain of {spec} at {pt.coords}",
                    coordinate=l, step=float(hs[l]),
                )
    g = fam.fim_array(spec, c)
    if not np.all(np.isfinite(g)) or abs(np.linalg.det(g)) < 1e-300:
        raise NumericalError("singular Fisher metric", point=pt.coords)
    dg = np.empty((d, d, d))
    for l in range(d):
        e = np.zeros(d)
        e[l] = hs[l]
        dg[l] = (fam.fim_array(spec, c + e) - fam.fim_array(spec, c - e)) / (2.0 * hs[l])
    G = kernels._py.christoffel_from_derivs(g, dg)
    G = 0.5 * (G + np.swapaxes(G, -1, -2))
    return ChristoffelSymbols(G, pt, "finite-difference")


def christoffel(spec: FamilySpec, theta, h: float = kernels.FD_STEP) -> ChristoffelSymbols:
    """Closed-form symbols when available, numeric otherwise."""
    if spec.kind in fam.CLOSED_CHRISTOFFEL_KINDS:
        return fam.christoffel_closed(spec, theta)
    return christoffel_numeric(spec, theta, h)


# ---------------------------------------------------------------- geodesics


@dataclass(frozen=True, eq=False)
class Geodesic:
    """A discretized geodesic on ``[0, 1]``.

    ``points``/``velocities`` have one row per stored time; after a blow-up
    they stop at the last valid state and ``blowup_time`` is set.
    """

    spec: FamilySpec
    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    speeds: np.ndarray
    initial_speed: float
    status: str = COMPLETE
    blowup_time: Optional[float] = None
    method: str = "euler"
    steps: int = DEFAULT_STEPS

    @property
    def complete(self) -> bool:
        return self.status == COMPLETE

    @property
    def end(self) -> ParamPoint:
        return ParamPoint(tuple(float(v) for v in self.points[-1]))

    def to_dict(self) -> dict:
        return {
            "family": self.spec.to_dict(),
            "method": self.method,
            "steps": self.steps,
            "status": self.status,
            "blowup_time": self.blowup_time,
            "initial_speed": self.initial_speed,
            "times": self.times.tolist(),
            "points": self.points.tolist(),
            "velocities": self.velocities.tolist(),
            "speeds": self.speeds.tolist(),
        }

    def csv_rows(self):
        names = self.spec.param_names
        header = ["index", "t", *names, *(f"v_{n}" for n in names), "speed", "status"]
        rows = [header]
        for i, t in enumerate(self.times):
            rows.append([i, t, *self.points[i], *self.velocities[i], self.speeds[i], self.status])
        return rows


def _initial_check(spec, theta0, v0):
    pt = ParamPoint.of(spec, theta0)
    v = np.atleast_1d(np.asarray(v0, dtype=float)).ravel()
    if v.size != spec.param_dim:
        raise ValidationError(f"velocity must have {spec.param_dim} component(s), got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("velocity must be finite")
    return pt, v


def _steps_check(steps):
    if int(steps) != steps or steps < 1:
        raise ValidationError(f"steps must be a positive integer, got {steps}")
    return int(steps)


def geodesic_integrate(spec: FamilySpec, theta0, v0, steps: int = DEFAULT_STEPS,
                       method: str = "euler", backend: Optional[str] = None) -> Geodesic:
    """Integrate the geodesic equation from ``theta0`` with velocity ``v0``.

    Leaving the domain, a non-finite state or an FR speed above ``1e8``
    ends the trajectory with status ``blew-up``; only a failure at ``t = 0``
    raises.
    """
    pt, v = _initial_check(spec, theta0, v0)
    steps = _steps_check(steps)
    kernels.method_code(method)
    res = kernels.integrate(spec, pt.as_array()[None], v[None], steps, method, backend=backend)
    status = int(res["status"][0])
    blow = int(res["blow_step"][0])
    if status and blow == 0:
        raise NumericalError(f"geodesic cannot start at {pt.coords}", point=pt.coords)
    n = steps + 1 if not status else blow
    dt = 1.0 / steps
    times = np.arange(n) * dt
    times[-1] = 1.0 if not status else times[-1]
    return Geodesic(
        spec,
        times,
        res["pos"][0, :n].copy(),
        res["vel"][0, :n].copy(),
        res["speed"][0, :n].copy(),
        float(res["speed"][0, 0]),
        BLEW_UP if status else COMPLETE,
        blow * dt if status else None,
        str(method).lower(),
        steps,
    )


def exp_map(spec: FamilySpec, theta0, v, steps: int = DEFAULT_STEPS, method: str = "euler",
            backend: Optional[str] = None) -> ParamPoint:
    """Endpoint at ``t = 1`` of the geodesic with initial velocity ``v``."""
    geo = geodesic_integrate(spec, theta0, v, steps, method, backend)
    if not geo.complete:
        raise BlowUpError(
            f"geodesic blew up at t={geo.blowup_time:g}", geodesic=geo, time=geo.blowup_time
        )
    return geo.end


def speed_profile(spec: FamilySpec, geo: Geodesic) -> np.ndarray:
    """FR speed ``|gamma'(t)|`` at every stored time, recomputed from the metric."""
    if not geo.complete:
        raise ValidationError("speed profile requires a complete geodesic")
    g = fam.fim_array(spec, geo.points)
    v = geo.velocities
    return np.sqrt(np.einsum("nij,ni,nj->n", g, v, v))


# ---------------------------------------------------------------- spheres


@dataclass(frozen=True, eq=False)
class FRSphere:
    """Discretized Fisher-Rao sphere.

    ``points`` is ``(K, d)``; rows of blown-up directions hold NaN.
    """

    spec: FamilySpec
    center: ParamPoint
    radius: float
    points: np.ndarray
    angles: np.ndarray
    velocities: np.ndarray
    statuses: tuple
    blowup_times: tuple = ()
    source: str = "ode"

    @property
    def K(self) -> int:
        return len(self.statuses)

    @property
    def n_blowups(self) -> int:
        return sum(s != COMPLETE for s in self.statuses)

    def complete_indices(self):
        return [i for i, s in enumerate(self.statuses) if s == COMPLETE]

    def point(self, i: int) -> ParamPoint:
        return ParamPoint(tuple(float(v) for v in self.points[i]))

    def to_dict(self) -> dict:
        return {
            "family": self.spec.to_dict(),
            "center": list(self.center.coords),
            "radius": self.radius,
            "source": self.source,
            "points": [
                {
                    "index": i,
                    "angle": float(self.angles[i]),
                    "coords": [None if not math.isfinite(x) else float(x) for x in self.points[i]],
                    "status": self.statuses[i],
                }
                for i in range(self.K)
            ],
        }

    def csv_rows(self):
        header = ["index", "angle", *self.spec.param_names, "status"]
        rows = [header]
        for i in range(self.K):
            rows.append([i, self.angles[i], *self.points[i], self.statuses[i]])
        return rows


def sphere_directions(spec: FamilySpec, center: ParamPoint, delta: float, K: int):
    """Chart-uniform angles and their FR-rescaled initial velocities."""
    g = fam.fim_array(spec, center.as_array())
    if spec.param_dim == 1:
        angles = np.array([math.pi, 0.0])
        u = np.array([[-1.0], [1.0]])
    else:
        angles = 2.0 * math.pi * np.arange(K) / K
        u = np.stack([np.cos(angles), np.sin(angles)], -1)
    norms = np.sqrt(np.einsum("ij,ki,kj->k", g, u, u))
    return angles, delta * u / norms[:, None]


def _check_sphere_args(delta, K):
    if not (delta > 0 and math.isfinite(delta)):
        raise ValidationError(f"radius must be positive, got {delta}")
    if int(K) != K or K < 1:
        raise ValidationError(f"K must be a positive integer, got {K}")


def _closed_sphere(spec, center, delta):
    lo, hi = fam.closed_sphere_1d(spec, center, delta)
    pts = np.array([lo.coords, hi.coords])
    angles, vel = sphere_directions(spec, center, delta, 2)
    return FRSphere(spec, center, float(delta), pts, angles, vel, (COMPLETE, COMPLETE),
                    (None, None), "closed-form")


def _assemble(spec, center, delta, angles, vel, pos, status, blow, dt):
    statuses = tuple(BLEW_UP if s else COMPLETE for s in status)
    if all(s != COMPLETE for s in statuses):
        raise SphereDegenerateError(
            f"all {len(statuses)} geodesics of the radius-{delta:g} sphere blew up",
            center=center.coords, radius=delta,
        )
    times = tuple(None if s == COMPLETE else float(b * dt) for s, b in zip(statuses, blow))
    return FRSphere(spec, center, float(delta), pos, angles, vel, statuses, times, "ode")


def fr_sphere(spec: FamilySpec, center, delta: float, K: int = DEFAULT_K,
              steps: int = DEFAULT_STEPS, method: str = "euler",
              closed_form: Optional[bool] = None, threads: int = 1,
              backend: Optional[str] = None) -> FRSphere:
    """Discretize the FR sphere of radius ``delta`` around ``center``.

    Each of the ``K`` chart-uniform directions is scaled to FR norm
    ``delta`` and integrated to ``t = 1``. One-parameter families return the
    exact two-point sphere unless ``closed_form=False``.
    """
    pt = ParamPoint.of(spec, center)
    _check_sphere_args(delta, K)
    steps = _steps_check(steps)
    if closed_form is None:
        closed_form = spec.kind in ONE_PARAM_KINDS
    if closed_form:
        return _closed_sphere(spec, pt, delta)
    angles, vel = sphere_directions(spec, pt, delta, K)
    theta0 = np.repeat(pt.as_array()[None], len(angles), axis=0)
    res = kernels.integrate(spec, theta0, vel, steps, method, record=[steps],
                            threads=threads, backend=backend)
    return _assemble(spec, pt, delta, angles, vel, res["pos"][:, 0], res["status"],
                     res["blow_step"], 1.0 / steps)


def fr_spheres(spec: FamilySpec, center, deltas: Sequence[float], K: int = DEFAULT_K,
               steps: int = DEFAULT_STEPS, method: str = "euler", shared: bool = False,
               closed_form: Optional[bool] = None, threads: int = 1,
               backend: Optional[str] = None):
    """Spheres for several radii.

    With ``shared=True`` one unit-speed geodesic per direction is integrated
    with step ``1/steps`` and read off at ``t = delta`` (``delta * steps``
    must be an integer); this equals Euler/RK4 with ``delta * steps`` steps
    for radius ``delta``. Otherwise each radius is integrated separately.
    """
    pt = ParamPoint.of(spec, center)
    deltas = [float(d) for d in deltas]
    for d in deltas:
        _check_sphere_args(d, K)
    if closed_form is None:
        closed_form = spec.kind in ONE_PARAM_KINDS
    if closed_form:
        return [_closed_sphere(spec, pt, d) for d in deltas]
    if not shared:
        return [fr_sphere(spec, pt, d, K, steps, method, False, threads, backend) for d in deltas]
    steps = _steps_check(steps)
    idx = [int(round(d * steps)) for d in deltas]
    for d, i in zip(deltas, idx):
        if abs(i - d * steps) > 1e-9 * steps or i < 1:
            raise ValidationError(f"radius {d} is not a multiple of 1/steps")
    angles, vel = sphere_directions(spec, pt, 1.0, K)
    theta0 = np.repeat(pt.as_array()[None], len(angles), axis=0)
    order = sorted(set(idx))
    res = kernels.integrate(spec, theta0, vel, max(order), method, dt=1.0 / steps,
                            record=order, threads=threads, backend=backend)
    out = []
    for d, i in zip(deltas, idx):
        r = order.index(i)
        blown = (res["status"] == 1) & (res["blow_step"] <= i)
        _, vel_d = sphere_directions(spec, pt, d, K)
        pos = np.where(blown[:, None], np.nan, res["pos"][:, r])
        out.append(_assemble(spec, pt, d, angles, vel_d, pos, blown.astype(np.int8),
                             np.where(blown, res["blow_step"], -1) / d, 1.0 / steps))
    return out


# ---------------------------------------------------------------- distances


@dataclass(frozen=True)
class ShootingConfig:
    """Settings of the geodesic-shooting distance solver."""

    steps: int = 1000
    method: str = "rk4"
    tol: float = 1e-10
    max_iter: int = 60
    jac_step: float = 1e-6
    backend: Optional[str] = None


def _hit(spec, theta0, v, cfg):
    geo = geodesic_integrate(spec, theta0, v, cfg.steps, cfg.method, cfg.backend)
    if not geo.complete:
        return None
    return geo.points[-1]


def fr_distance_numeric(spec: FamilySpec, theta0, theta1,
                        shooting_config: Optional[ShootingConfig] = None) -> float:
    """FR distance by shooting: find ``v`` with ``exp(theta0, v) = theta1``.

    Damped Newton iterations on the initial velocity with a finite-difference
    Jacobian of the exponential map; the distance is the FR norm of ``v``.
    """
    cfg = shooting_config or ShootingConfig()
    p0 = ParamPoint.of(spec, theta0)
    p1 = ParamPoint.of(spec, theta1)
    x0, x1 = p0.as_array(), p1.as_array()
    if np.array_equal(x0, x1):
        return 0.0
    scale = max(float(np.linalg.norm(x1)), float(np.linalg.norm(x1 - x0)))
    v = x1 - x0
    end = _hit(spec, p0, v, cfg)
    shrink = 0
    while end is None:
        v = 0.5 * v
        shrink += 1
        if shrink > 40:
            raise NoConvergenceError("no complete geodesic from the initial guess")
        end = _hit(spec, p0, v, cfg)
    F = end - x1
    res = float(np.max(np.abs(F) / scale))
    best = (res, v)
    d = v.size
    for it in range(cfg.max_iter):
        if res < cfg.tol:
            break
        J = np.empty((d, d))
        for j in range(d):
            hj = cfg.jac_step * max(1.0, abs(v[j]), float(np.max(np.abs(v))))
            e = np.zeros(d)
            e[j] = hj
            ep, em = _hit(spec, p0, v + e, cfg), _hit(spec, p0, v - e, cfg)
            if ep is None or em is None:
                raise NoConvergenceError("shooting Jacobian stencil blew up", residual=best[0])
            J[:, j] = (ep - em) / (2 * hj)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise NoConvergenceError("singular shooting Jacobian", residual=best[0]) from exc
        lam = 1.0
        while lam > 1e-6:
            cand = v + lam * step
            end = _hit(spec, p0, cand, cfg)
            if end is not None:
                Fc = end - x1
                rc = float(np.max(np.abs(Fc) / scale))
                if rc < res:
                    v, F, res = cand, Fc, rc
                    break
            lam *= 0.5
        else:
            break
        if res < best[0]:
            best = (res, v)
    if res >= cfg.tol:
        raise NoConvergenceError(
            f"shooting did not converge (residual {best[0]:.3g})", residual=best[0]
        )
    g = fam.fim_array(spec, x0)
    return float(math.sqrt(v @ g @ v))
