"""Robustness analysis by importance sampling over Fisher-Rao spheres.

A single baseline sample is reused for every perturbation: the perturbed
output CDF is the self-normalized reweighting of the baseline outputs by the
likelihood ratio of the perturbed marginal.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from . import geometry
from .errors import (
    DegenerateWeightsError,
    FraoError,
    ModelEvaluationError,
    SphereDegenerateError,
    ValidationError,
    ZeroQoIError,
)
from .families import core as fam
from .families.spec import FamilySpec, ParamPoint

log = logging.getLogger(__name__)

DEFAULT_DELTAS = tuple(round(0.1 * k, 10) for k in range(1, 11))
MAX_RETRIES = 10
# stream tags mixed into SeedSequence entropy
_BOOT_TAG = 0xB0075
_CSV_HEADER = ["input", "delta", "s_min", "s_max", "ci_min_lo", "ci_min_hi",
               "ci_max_lo", "ci_max_hi", "blowups"]


def fmt(x) -> str:
    """17 significant digits: round-trips every float64."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


@dataclass(frozen=True)
class StudyInput:
    name: str
    family: FamilySpec
    baseline: ParamPoint

    @classmethod
    def of(cls, name, family, baseline):
        return cls(str(name), family, ParamPoint.of(family, baseline))


@dataclass
class StudyConfig:
    """Everything that defines a robustness study.

    ``model`` maps an ``(N, d)`` array of input draws to ``N`` outputs.
    """

    inputs: Sequence[StudyInput]
    model: Callable[[np.ndarray], np.ndarray]
    alpha: float = 0.9
    sample_size: int = 10_000
    delta_grid: Sequence[float] = DEFAULT_DELTAS
    sphere_K: int = 100
    seed: int = 0
    bootstrap_replicates: int = 500
    ci_level: float = 0.80
    sphere_steps: int = geometry.DEFAULT_STEPS
    sphere_method: str = "euler"
    # "shared": one unit-speed integration read off at every radius
    sphere_mode: str = "shared"
    threads: int = 1
    model_name: str = "custom"
    extras: dict = field(default_factory=dict)

    def validate(self) -> "StudyConfig":
        if not self.inputs:
            raise ValidationError("study needs at least one input")
        names = [inp.name for inp in self.inputs]
        if len(set(names)) != len(names):
            raise ValidationError(f"input names must be unique, got {names}")
        for inp in self.inputs:
            ParamPoint.of(inp.family, inp.baseline)
        if not (0.0 < self.alpha < 1.0):
            raise ValidationError(f"quantile level must lie in (0, 1), got {self.alpha}")
        if int(self.sample_size) != self.sample_size or self.sample_size < 100:
            raise ValidationError(f"sample size must be an integer >= 100, got {self.sample_size}")
        d = list(self.delta_grid)
        if not d:
            raise ValidationError("delta grid is empty")
        if any(not (x > 0 and math.isfinite(x)) for x in d):
            raise ValidationError(f"radii must be positive and finite, got {d}")
        if any(b <= a for a, b in zip(d[:-1], d[1:])):
            raise ValidationError(f"delta grid must be strictly increasing, got {d}")
        if int(self.sphere_K) != self.sphere_K or self.sphere_K < 1:
            raise ValidationError(f"sphere_K must be a positive integer, got {self.sphere_K}")
        if int(self.bootstrap_replicates) != self.bootstrap_replicates or self.bootstrap_replicates < 1:
            raise ValidationError("bootstrap_replicates must be a positive integer")
        if not (0.0 < self.ci_level < 1.0):
            raise ValidationError(f"ci_level must lie in (0, 1), got {self.ci_level}")
        if self.sphere_mode not in ("shared", "per-radius"):
            raise ValidationError(f"sphere_mode must be 'shared' or 'per-radius', got {self.sphere_mode!r}")
        if str(self.sphere_method).lower() not in ("euler", "rk4"):
            raise ValidationError(f"unknown integration method {self.sphere_method!r}")
        if int(self.seed) != self.seed or not (0 <= int(self.seed) < 2**64):
            raise ValidationError(f"seed must be a 64-bit non-negative integer, got {self.seed}")
        return self

    def summary(self) -> dict:
        return {
            "model": self.model_name,
            "inputs": [
                {"name": i.name, "family": i.family.to_dict(), "baseline": list(i.baseline.coords)}
                for i in self.inputs
            ],
            "alpha": self.alpha,
            "sample_size": int(self.sample_size),
            "delta_grid": [float(x) for x in self.delta_grid],
            "sphere_K": int(self.sphere_K),
            "seed": int(self.seed),
            "bootstrap_replicates": int(self.bootstrap_replicates),
            "ci_level": self.ci_level,
            "sphere_steps": int(self.sphere_steps),
            "sphere_method": str(self.sphere_method).lower(),
            "sphere_mode": self.sphere_mode,
            "extras": dict(self.extras),
        }


def input_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(index)])


@dataclass(eq=False)
class SampleSet:
    """Baseline draws, model outputs and the sort order used by IS."""

    draws: np.ndarray
    outputs: np.ndarray
    seed: int
    inputs: Sequence[StudyInput]

    @property
    def N(self) -> int:
        return self.outputs.size

    @cached_property
    def order(self) -> np.ndarray:
        return np.argsort(self.outputs, kind="stable")

    @cached_property
    def sorted_outputs(self) -> np.ndarray:
        return self.outputs[self.order]

    @cached_property
    def _base_logpdf(self) -> dict:
        return {}

    def base_logpdf(self, i: int) -> np.ndarray:
        """Baseline log density of input ``i`` at its draws, in output order."""
        cache = self._base_logpdf
        if i not in cache:
            inp = self.inputs[i]
            lp = fam.logpdf(inp.family, inp.baseline, self.draws[self.order, i])
            if not np.all(np.isfinite(lp)):
                raise ValidationError(f"baseline density of {inp.name} vanishes at a draw")
            cache[i] = lp
        return cache[i]

    def ratios(self, i: int, perturbed) -> np.ndarray:
        """Likelihood ratios ``f_pert/f_base`` of input ``i``, in output order."""
        inp = self.inputs[i]
        pt = ParamPoint.of(inp.family, perturbed)
        lp = fam.logpdf(inp.family, pt, self.draws[self.order, i])
        with np.errstate(over="ignore"):
            return np.exp(lp - self.base_logpdf(i))

    @cached_property
    def baseline_quantiles(self) -> dict:
        return {}

    def baseline_quantile(self, alpha: float) -> float:
        q = self.baseline_quantiles.get(alpha)
        if q is None:
            q = _weighted_quantile(self.sorted_outputs, np.ones(self.N), alpha)
            self.baseline_quantiles[alpha] = q
        return q


def draw_baseline(config: StudyConfig) -> SampleSet:
    """Draw ``N`` baseline inputs (one seeded stream per input) and run the model."""
    config.validate()
    N = int(config.sample_size)
    cols = [
        fam.sample(inp.family, inp.baseline, N, input_seed(config.seed, i))
        for i, inp in enumerate(config.inputs)
    ]
    X = np.stack(cols, axis=1)
    try:
        Y = np.asarray(config.model(X), dtype=float).reshape(-1)
    except FraoError:
        raise
    except Exception as exc:  # the model is user code
        raise ModelEvaluationError(f"model raised {exc!r}") from exc
    if Y.size != N:
        raise ModelEvaluationError(f"model returned {Y.size} values for {N} draws")
    bad = np.flatnonzero(~np.isfinite(Y))
    if bad.size:
        j = int(bad[0])
        raise ModelEvaluationError(f"non-finite model output at draw {j}", draw=X[j].tolist())
    return SampleSet(X, Y, int(config.seed), tuple(config.inputs))


# ---------------------------------------------------------------- IS estimators


def _weighted_quantile(ys, w, alpha):
    """``inf{t : F(t) >= alpha}`` for weights ``w`` on sorted outputs ``ys``."""
    cum = np.cumsum(w)
    total = cum[-1]
    if not (total > 0) or not math.isfinite(total):
        raise DegenerateWeightsError("importance weights sum to zero", total=float(total))
    k = int(np.searchsorted(cum, alpha * total, side="left"))
    return float(ys[min(k, ys.size - 1)])


def is_cdf(sample: SampleSet, i: int, perturbed, t: float) -> float:
    """Self-normalized IS estimate of ``P(Y <= t)`` under the perturbed input ``i``."""
    L = sample.ratios(i, perturbed)
    cum = np.cumsum(L)
    total = cum[-1]
    if not (total > 0) or not math.isfinite(total):
        raise DegenerateWeightsError("importance weights sum to zero", total=float(total))
    k = int(np.searchsorted(sample.sorted_outputs, t, side="right"))
    if k == 0:
        return 0.0
    return float(cum[k - 1] / total)


def is_quantile(sample: SampleSet, i: int, perturbed, alpha: float) -> float:
    """Plug-in quantile of the IS CDF; always one of the sample outputs."""
    if not (0.0 < alpha < 1.0):
        raise ValidationError(f"quantile level must lie in (0, 1), got {alpha}")
    return _weighted_quantile(sample.sorted_outputs, sample.ratios(i, perturbed), alpha)


def ess(L) -> float:
    L = np.asarray(L, dtype=float)
    s2 = float(np.sum(L * L))
    return float(np.sum(L)) ** 2 / s2 if s2 > 0 else 0.0


@dataclass(frozen=True)
class PLIValue:
    input_index: int
    perturbed_param: ParamPoint
    delta: Optional[float]
    s_hat: float
    q_hat_perturbed: float
    q_hat_baseline: float
    ess: float = float("nan")
    point_index: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "input_index": self.input_index,
            "point_index": self.point_index,
            "param": list(self.perturbed_param.coords),
            "delta": self.delta,
            "s_hat": self.s_hat,
            "q_perturbed": self.q_hat_perturbed,
            "q_baseline": self.q_hat_baseline,
            "ess": self.ess,
        }


def pli(sample: SampleSet, i: int, perturbed, alpha: float, delta=None, point_index=None) -> PLIValue:
    """Perturbed-law index ``q_pert / q_base - 1`` for input ``i``."""
    if not (0.0 < alpha < 1.0):
        raise ValidationError(f"quantile level must lie in (0, 1), got {alpha}")
    pt = ParamPoint.of(sample.inputs[i].family, perturbed)
    qb = sample.baseline_quantile(alpha)
    if qb == 0.0:
        raise ZeroQoIError("baseline quantile is zero; the index is undefined")
    L = sample.ratios(i, pt)
    qp = _weighted_quantile(sample.sorted_outputs, L, alpha)
    e = ess(L)
    if e < sample.N / 100:
        log.warning("low effective sample size %.1f for input %d at %s", e, i, pt.coords)
    return PLIValue(i, pt, delta, qp / qb - 1.0, qp, qb, e, point_index)


def optimize_on_sphere(sample: SampleSet, i: int, sphere: geometry.FRSphere, alpha: float):
    """Exhaustive min and max of the index over the complete sphere points.

    Ties go to the lowest point index.
    """
    idx = sphere.complete_indices()
    if not idx:
        raise SphereDegenerateError("sphere has no complete points", radius=sphere.radius)
    best_lo = best_hi = None
    for k in idx:
        v = pli(sample, i, sphere.point(k), alpha, sphere.radius, k)
        if best_lo is None or v.s_hat < best_lo.s_hat:
            best_lo = v
        if best_hi is None or v.s_hat > best_hi.s_hat:
            best_hi = v
    return best_lo, best_hi


# ---------------------------------------------------------------- bootstrap


def _replicate_counts(rng, N, B):
    idx = rng.integers(0, N, size=(B, N))
    flat = idx + (np.arange(B) * N)[:, None]
    return np.bincount(flat.ravel(), minlength=B * N).reshape(B, N).astype(float)


def _block_quantiles(ys, W, alpha):
    cum = np.cumsum(W, axis=1)
    total = cum[:, -1]
    ok = (total > 0) & np.isfinite(total)
    thr = alpha * total
    k = np.count_nonzero(cum < thr[:, None], axis=1)
    q = ys[np.minimum(k, ys.size - 1)]
    return q, ok


def bootstrap_ci(sample: SampleSet, i: int, argopt_param, alpha: float,
                 replicates: int = 500, ci_level: float = 0.80, seed=0):
    """Percentile bootstrap interval of the index at a fixed optimizer.

    Pairs ``(X_j, Y_j)`` are resampled; replicates with degenerate weights or
    a zero baseline quantile are redrawn up to ten times each.
    """
    if int(replicates) != replicates or replicates < 1:
        raise ValidationError("replicates must be a positive integer")
    if not (0.0 < ci_level < 1.0):
        raise ValidationError(f"ci_level must lie in (0, 1), got {ci_level}")
    rng = np.random.default_rng(seed)
    N = sample.N
    ys = sample.sorted_outputs
    order = sample.order
    L = sample.ratios(i, argopt_param)
    C = _replicate_counts(rng, N, int(replicates))[:, order]
    qp, okp = _block_quantiles(ys, C * L, alpha)
    qb, okb = _block_quantiles(ys, C, alpha)
    ok = okp & okb & (qb != 0.0)
    for b in np.flatnonzero(~ok):
        for _ in range(MAX_RETRIES):
            c = _replicate_counts(rng, N, 1)[:, order]
            p_, o1 = _block_quantiles(ys, c * L, alpha)
            b_, o2 = _block_quantiles(ys, c, alpha)
            if o1[0] and o2[0] and b_[0] != 0.0:
                qp[b], qb[b] = p_[0], b_[0]
                break
        else:
            raise DegenerateWeightsError(
                f"bootstrap replicate {int(b)} stayed degenerate after {MAX_RETRIES} redraws"
            )
    S = qp / qb - 1.0
    lo = (1.0 - ci_level) / 2.0
    qlo, qhi = np.quantile(S, [lo, 1.0 - lo])
    return float(qlo), float(qhi)


# ---------------------------------------------------------------- study


@dataclass(frozen=True)
class StudyCell:
    input_index: int
    input_name: str
    delta: float
    s_min: PLIValue
    s_max: PLIValue
    ci_min: tuple
    ci_max: tuple
    blowups: int
    n_points: int
    min_ess: float

    def to_dict(self) -> dict:
        return {
            "input": self.input_name,
            "input_index": self.input_index,
            "delta": self.delta,
            "s_min": self.s_min.s_hat,
            "s_max": self.s_max.s_hat,
            "argmin": list(self.s_min.perturbed_param.coords),
            "argmax": list(self.s_max.perturbed_param.coords),
            "argmin_index": self.s_min.point_index,
            "argmax_index": self.s_max.point_index,
            "q_argmin": self.s_min.q_hat_perturbed,
            "q_argmax": self.s_max.q_hat_perturbed,
            "ci_min": list(self.ci_min),
            "ci_max": list(self.ci_max),
            "blowups": self.blowups,
            "n_points": self.n_points,
            "min_ess": self.min_ess,
        }


@dataclass(eq=False)
class RAStudyResult:
    config: dict
    baseline_quantile: float
    cells: list
    errors: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def cell(self, name: str, delta: float) -> StudyCell:
        for c in self.cells:
            if c.input_name == name and abs(c.delta - delta) < 1e-12:
                return c
        raise KeyError((name, delta))

    def by_input(self, name: str):
        return [c for c in self.cells if c.input_name == name]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "baseline_quantile": self.baseline_quantile,
            "cells": [c.to_dict() for c in self.cells],
            "errors": dict(self.errors),
            "extras": self.extras,
        }

    def csv_rows(self):
        rows = [list(_CSV_HEADER)]
        for c in self.cells:
            rows.append([c.input_name, c.delta, c.s_min.s_hat, c.s_max.s_hat, *c.ci_min,
                         *c.ci_max, c.blowups])
        return rows

    def to_csv(self) -> str:
        return rows_to_csv(self.csv_rows())


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    for r in rows:
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


_SPHERE_CACHE: dict = {}


def _sphere_key(inp: StudyInput, config: StudyConfig, backend):
    from . import kernels

    return (
        repr(inp.family.to_dict()),
        inp.baseline.coords,
        tuple(float(x) for x in config.delta_grid),
        int(config.sphere_K),
        int(config.sphere_steps),
        str(config.sphere_method).lower(),
        config.sphere_mode,
        kernels.resolve(inp.family, backend),
    )


def study_spheres(inp: StudyInput, config: StudyConfig, use_cache=True, backend=None):
    """All spheres of one input (seed-independent, memoized per process)."""
    key = _sphere_key(inp, config, backend)
    if use_cache and key in _SPHERE_CACHE:
        return _SPHERE_CACHE[key]
    spheres = geometry.fr_spheres(
        inp.family, inp.baseline, config.delta_grid, config.sphere_K, config.sphere_steps,
        config.sphere_method, shared=config.sphere_mode == "shared",
        threads=config.threads, backend=backend,
    )
    if use_cache:
        _SPHERE_CACHE[key] = spheres
    return spheres


def clear_sphere_cache():
    _SPHERE_CACHE.clear()


def _boot_seed(seed, i, j, extreme):
    return np.random.SeedSequence([int(seed), _BOOT_TAG, int(i), int(j), int(extreme)])


def run_study(config: StudyConfig, use_cache: bool = True, backend=None) -> RAStudyResult:
    """Min/max index with bootstrap intervals for every input and radius."""
    config.validate()
    sample = draw_baseline(config)
    qb = sample.baseline_quantile(config.alpha)
    if qb == 0.0:
        raise ZeroQoIError("baseline quantile is zero; the index is undefined")
    errors = {}
    plans = []  # (i, j, sphere, lo, hi)
    for i, inp in enumerate(config.inputs):
        try:
            spheres = study_spheres(inp, config, use_cache, backend)
            for j, sph in enumerate(spheres):
                lo, hi = optimize_on_sphere(sample, i, sph, config.alpha)
                plans.append((i, j, sph, lo, hi))
        except FraoError as exc:
            log.error("input %s failed: %s", inp.name, exc)
            errors[inp.name] = f"{type(exc).__name__}: {exc}"
            plans = [p for p in plans if p[0] != i]

    def boot(task):
        i, j, param, extreme = task
        return bootstrap_ci(sample, i, param, config.alpha, int(config.bootstrap_replicates),
                            config.ci_level, _boot_seed(config.seed, i, j, extreme))

    tasks = []
    for i, j, _, lo, hi in plans:
        tasks.append((i, j, lo.perturbed_param, 0))
        tasks.append((i, j, hi.perturbed_param, 1))
    if config.threads and config.threads > 1:
        with ThreadPoolExecutor(max_workers=int(config.threads)) as ex:
            cis = list(ex.map(boot, tasks))
    else:
        cis = [boot(t) for t in tasks]

    cells = []
    for n, (i, j, sph, lo, hi) in enumerate(plans):
        pts = sph.complete_indices()
        min_ess = min(ess(sample.ratios(i, sph.point(k))) for k in (lo.point_index, hi.point_index))
        cells.append(StudyCell(i, config.inputs[i].name, float(config.delta_grid[j]), lo, hi,
                               cis[2 * n], cis[2 * n + 1], sph.n_blowups, len(pts), min_ess))
    return RAStudyResult(config.summary(), qb, cells, errors)
