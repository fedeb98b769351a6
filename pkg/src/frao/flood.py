"""Analytic flood model and its default robustness study.

``H = Q^0.6 (300 K sqrt((Zm - Zv)/5000))^-0.6`` with a truncated Gumbel flow
rate, truncated normal Strickler coefficient and triangular river heights.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import ra, schema
from .errors import DomainError, ValidationError
from .families import core as fam
from .families.spec import FamilySpec

INPUT_NAMES = ("Q", "K", "Zm", "Zv")
RANGES = {"Q": (0.0, 3000.0), "K": (15.0, 90.0), "Zm": (54.0, 56.0), "Zv": (49.0, 51.0)}


@dataclass(frozen=True)
class FloodInputs:
    """One model input. ``Zd`` (dyke height) is kept for reference only."""

    Q: float
    K: float
    Zm: float
    Zv: float
    Zd: Optional[float] = None

    def __post_init__(self):
        for name in INPUT_NAMES:
            lo, hi = RANGES[name]
            v = getattr(self, name)
            if not (lo <= v <= hi):
                raise DomainError(f"{name}={v} outside [{lo}, {hi}]")
        if not self.Zm > self.Zv:
            raise DomainError(f"need Zm > Zv, got Zm={self.Zm}, Zv={self.Zv}")

    def as_array(self) -> np.ndarray:
        return np.array([self.Q, self.K, self.Zm, self.Zv])


def flood_height(x):
    """River height in metres; ``x`` is a :class:`FloodInputs` or an ``(N, 4)`` array."""
    if isinstance(x, FloodInputs):
        return float(flood_height(x.as_array()[None])[0])
    X = np.asarray(x, dtype=float)
    squeeze = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[-1] != 4:
        raise ValidationError(f"flood model takes (Q, K, Zm, Zv), got {X.shape[-1]} columns")
    Q, K, Zm, Zv = X.T
    if np.any(~(Zm > Zv)):
        raise DomainError("flood model needs Zm > Zv")
    H = Q**0.6 * (300.0 * K * np.sqrt((Zm - Zv) / 5000.0)) ** -0.6
    return H[0] if squeeze else H


def flood_inputs():
    return [
        ra.StudyInput.of("Q", FamilySpec.truncated_gumbel(0.0, 3000.0), (1013.0, 558.0)),
        ra.StudyInput.of("K", FamilySpec.truncated_normal(15.0, 90.0), (30.0, 7.5)),
        ra.StudyInput.of("Zm", FamilySpec.triangular(54.0, 56.0), (55.0,)),
        ra.StudyInput.of("Zv", FamilySpec.triangular(49.0, 51.0), (50.0,)),
    ]


def flood_baseline() -> ra.StudyConfig:
    """Default study: 90% quantile of ``H``, ``N = 10^4``, radii 0.1..1, 100 sphere points."""
    return ra.StudyConfig(
        inputs=flood_inputs(),
        model=flood_height,
        alpha=0.9,
        sample_size=10_000,
        delta_grid=ra.DEFAULT_DELTAS,
        sphere_K=100,
        model_name="flood",
        extras={"Zd": None},
    )


_OVERRIDABLE = {
    "alpha", "sample_size", "delta_grid", "sphere_K", "bootstrap_replicates", "ci_level",
    "sphere_steps", "sphere_method", "sphere_mode", "threads",
}


def q_argmin_trajectory(result: ra.RAStudyResult):
    """Rows ``(delta, m, s, mean)`` of the minimizing Q perturbation per radius."""
    spec = FamilySpec.truncated_gumbel(0.0, 3000.0)
    rows = []
    for c in result.by_input("Q"):
        m, s = c.s_min.perturbed_param.coords
        rows.append((c.delta, m, s, fam.mean(spec, (m, s))))
    return rows


def run_flood_study(overrides: Optional[dict] = None, seed: int = 0, use_cache: bool = True,
                    backend=None) -> ra.RAStudyResult:
    """Run the default flood study; ``overrides`` replaces config fields."""
    cfg = flood_baseline()
    overrides = dict(overrides or {})
    unknown = set(overrides) - _OVERRIDABLE
    if unknown:
        raise ValidationError(f"cannot override {sorted(unknown)}")
    if "delta_grid" in overrides:
        overrides["delta_grid"] = tuple(float(x) for x in overrides["delta_grid"])
    cfg = replace(cfg, seed=int(seed), **overrides)
    result = ra.run_study(cfg, use_cache=use_cache, backend=backend)
    result.extras["q_argmin"] = [
        {"delta": d, "m": m, "s": s, "mean": mu} for d, m, s, mu in q_argmin_trajectory(result)
    ]
    return result


def q_argmin_csv(result: ra.RAStudyResult) -> str:
    rows = [["delta", "m", "s"]]
    rows += [[r["delta"], r["m"], r["s"]] for r in result.extras.get("q_argmin", [])]
    return ra.rows_to_csv(rows)


def write_flood_outputs(result: ra.RAStudyResult, out_dir: str) -> dict:
    """Write ``flood_pli.csv``, ``flood_q_argmin.csv`` and ``flood_result.json``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "pli": os.path.join(out_dir, "flood_pli.csv"),
        "q_argmin": os.path.join(out_dir, "flood_q_argmin.csv"),
        "json": os.path.join(out_dir, "flood_result.json"),
    }
    with open(paths["pli"], "w", encoding="utf-8", newline="") as f:
        f.write(result.to_csv())
    with open(paths["q_argmin"], "w", encoding="utf-8", newline="") as f:
        f.write(q_argmin_csv(result))
    doc = schema.validate(schema.jsonable(result.to_dict()), schema.RESULT_DOC, "result")
    with open(paths["json"], "w", encoding="utf-8", newline="") as f:
        f.write(json.dumps(doc, indent=1, allow_nan=False) + "\n")
    return paths
