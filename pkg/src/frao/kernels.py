"""Backend selection for the geodesic kernels.

The compiled core ``frao._kernels`` is used when it imports and covers the
family kind; ``FRAO_BACKEND=python`` forces the numpy fallback everywhere.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _pykernels as _py
from .errors import ValidationError
from .families import gumbel as _gum
from .families.core import log_bounds
from .families.spec import PARAM_FLOOR, FamilySpec, Kind

try:
    from . import _kernels as _ck
except ImportError:  # pragma: no cover - depends on the build
    _ck = None

HAVE_COMPILED = _ck is not None
FD_STEP = _py.FD_STEP
EULER, RK4 = _py.EULER, _py.RK4
# fixed work unit, so outputs do not depend on the thread count
CHUNK = 16


def default_backend() -> str:
    env = os.environ.get("FRAO_BACKEND", "auto").strip().lower()
    if env == "python" or not HAVE_COMPILED:
        return "python"
    return "compiled"


BACKEND = default_backend()


def method_code(method) -> int:
    m = str(method).lower()
    if m == "euler":
        return EULER
    if m == "rk4":
        return RK4
    raise ValidationError(f"unknown integration method {method!r}")


def _compiled_args(spec: FamilySpec):
    """Kind code and parameter vector for the compiled core, or ``None``."""
    kind = spec.kind
    if kind in (Kind.NORMAL, Kind.LOGNORMAL):
        return 0, (0.0, 0.0, 0.0, 0.0, 0.0)
    if kind is Kind.TRUNCATED_NORMAL:
        return 1, (*spec.truncation, 0.0, 0.0, 0.0)
    if kind is Kind.TRUNCATED_LOGNORMAL:
        return 1, (*log_bounds(spec), 0.0, 0.0, 0.0)
    if kind is Kind.GUMBEL:
        c = _gum.gumbel_constants()
        return 2, (0.0, 0.0, c[0, 0], c[0, 1], c[1, 1])
    if kind is Kind.TRUNCATED_GUMBEL:
        return 3, (*spec.truncation, 0.0, 0.0, 0.0)
    return None


def compiled_covers(spec: FamilySpec) -> bool:
    return HAVE_COMPILED and _compiled_args(spec) is not None


def resolve(spec: FamilySpec, backend: str | None = None) -> str:
    b = (backend or BACKEND).lower()
    if b not in ("python", "compiled", "auto"):
        raise ValidationError(f"unknown backend {backend!r}")
    if b == "python":
        return "python"
    return "compiled" if compiled_covers(spec) else "python"


def integrate(spec: FamilySpec, theta0, v0, steps: int, method="euler", dt=None,
              record=None, h: float = FD_STEP, threads: int = 1, backend=None):
    """Integrate one geodesic per row of ``theta0``/``v0``.

    See :func:`frao._pykernels.integrate` for the returned arrays. Rows are
    split into fixed chunks that may run on ``threads`` worker threads.
    """
    theta0 = np.ascontiguousarray(np.atleast_2d(np.asarray(theta0, dtype=float)))
    v0 = np.ascontiguousarray(np.atleast_2d(np.asarray(v0, dtype=float)))
    steps = int(steps)
    code = method_code(method)
    dt = 1.0 / steps if dt is None else float(dt)
    rec = np.arange(steps + 1, dtype=np.int64) if record is None else np.asarray(record, dtype=np.int64)
    K, d = theta0.shape
    chunks = [(k0, min(K, k0 + CHUNK)) for k0 in range(0, K, CHUNK)]
    if resolve(spec, backend) == "python":
        R = rec.size
        out = {
            "pos": np.full((K, R, d), np.nan),
            "vel": np.full((K, R, d), np.nan),
            "speed": np.full((K, R), np.nan),
            "status": np.zeros(K, dtype=np.int8),
            "blow_step": np.full(K, -1, dtype=np.int64),
        }

        def work(bounds):
            k0, k1 = bounds
            part = _py.integrate(spec, theta0[k0:k1], v0[k0:k1], steps, code, dt, rec, h, CHUNK)
            for key in out:
                out[key][k0:k1] = part[key]
    else:
        kind, params = _compiled_args(spec)
        params = np.asarray(params, dtype=float)
        xq, wq = (np.ascontiguousarray(a) for a in _gum.legendre(_gum.DEFAULT_NODES))
        R = rec.size
        out = {
            "pos": np.full((K, R, d), np.nan),
            "vel": np.full((K, R, d), np.nan),
            "speed": np.full((K, R), np.nan),
            "status": np.zeros(K, dtype=np.int8),
            "blow_step": np.full(K, -1, dtype=np.int64),
        }

        def work(bounds):
            _ck.integrate_range(kind, params, theta0, v0, steps, dt, code, rec, xq, wq,
                                float(h), PARAM_FLOOR, out["pos"], out["vel"], out["speed"],
                                out["status"], out["blow_step"], bounds[0], bounds[1])

    if threads and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as ex:
            list(ex.map(work, chunks))
    else:
        for ch in chunks:
            work(ch)
    return out


def geometry_batch(spec: FamilySpec, coords, h: float = FD_STEP):
    """Symbols, metric and validity mask at each row (numpy path)."""
    return _py.geometry_batch(spec, np.atleast_2d(np.asarray(coords, dtype=float)), h)
