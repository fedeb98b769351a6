"""Command-line front end.

Subcommands ``fim``, ``christoffel``, ``geodesic``, ``sphere``, ``perturb``,
``ra`` and ``flood``. Each reads an optional JSON ``--config`` document whose
keys mirror the flags; flags given on the command line win. Exit codes: 0
success, 2 validation error, 3 numerical error, 4 model-evaluation error.
"""

from __future__ import annotations

import argparse
import importlib
import json
import logging
import math
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__, flood, geometry, ra, schema
from .errors import FraoError, ModelEvaluationError, ValidationError
from .families import core as fam
from .families.spec import FamilySpec, Kind, ParamPoint

log = logging.getLogger("frao")

SEED_ENV = "FRAO_SEED"

# options whose value may start with '-' (negative numbers)
_VALUE_FLAGS = {"--bounds", "--theta", "--velocity", "--grid", "--deltas", "--delta"}


def _floats(text: str) -> list:
    try:
        vals = [float(t) for t in text.split(",") if t.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected finite numbers, got {text!r}")
    return vals


def _pair(text: str) -> list:
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected two numbers 'a,b', got {text!r}")
    return vals


def _grid(text: str) -> list:
    vals = _floats(text)
    if len(vals) != 3 or int(vals[2]) != vals[2] or vals[2] < 2:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi,n' with integer n >= 2, got {text!r}")
    return vals


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be a non-negative integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"seed must be a non-negative integer, got {text!r}")
    return v


def _rejoin_negative_values(argv: Sequence[str]) -> list:
    """``--bounds -2,2`` -> ``--bounds=-2,2`` so argparse does not read a flag."""
    out = []
    argv = list(argv)
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") \
                and not argv[i + 1].startswith("--"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


# ---------------------------------------------------------------- parser


def _common(p, seed=True):
    p.add_argument("--config", help="JSON document with the same keys as the flags")
    p.add_argument("--out", help="output file (geometry) or directory (studies)")
    p.add_argument("--threads", type=_positive_int, default=None, help="worker threads")
    if seed:
        p.add_argument("--seed", type=_seed, default=None,
                       help=f"random seed (falls back to ${SEED_ENV}, then 0)")


def _family_args(p):
    p.add_argument("--family", choices=[k.value for k in Kind], default=None)
    p.add_argument("--bounds", type=_pair, default=None, help="truncation bounds or support 'a,b'")
    p.add_argument("--base", default=None, help="base density of a location-scale family")
    p.add_argument("--theta", type=_floats, default=None, help="parameter point, e.g. '0,1'")


def _format_arg(p, default):
    p.add_argument("--format", choices=["csv", "json"], default=None,
                   help=f"output format (default {default})")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="frao", description="Fisher-Rao geometry and robustness analysis.")
    ap.add_argument("--version", action="version", version=f"frao {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fim", help="Fisher information matrix")
    _family_args(p)
    p.add_argument("--mc", type=_positive_int, default=None, metavar="N",
                   help="Monte-Carlo estimate from N draws")
    _format_arg(p, "json")
    _common(p)

    p = sub.add_parser("christoffel", help="Christoffel symbols of the second kind")
    _family_args(p)
    p.add_argument("--numeric", action="store_true", default=None,
                   help="use finite differences even when a closed form exists")
    p.add_argument("--h", type=float, default=None, help="finite-difference base step")
    _format_arg(p, "json")
    _common(p, seed=False)

    p = sub.add_parser("geodesic", help="integrate one geodesic on [0, 1]")
    _family_args(p)
    p.add_argument("--velocity", type=_floats, default=None, help="initial velocity")
    p.add_argument("--steps", type=_positive_int, default=None)
    p.add_argument("--method", choices=["euler", "rk4"], default=None)
    _format_arg(p, "csv")
    _common(p, seed=False)

    for name, help_ in (("sphere", "discretized Fisher-Rao sphere"),
                        ("perturb", "densities of the sphere points on a grid")):
        p = sub.add_parser(name, help=help_)
        _family_args(p)
        p.add_argument("--delta", type=float, default=None, help="sphere radius")
        p.add_argument("--k", type=_positive_int, default=None, help="number of directions")
        p.add_argument("--steps", type=_positive_int, default=None)
        p.add_argument("--method", choices=["euler", "rk4"], default=None)
        p.add_argument("--ode", action="store_true", default=None,
                       help="integrate one-parameter spheres instead of the closed form")
        if name == "perturb":
            p.add_argument("--grid", type=_grid, default=None, help="'lo,hi,n' evaluation grid")
        else:
            _format_arg(p, "csv")
        _common(p, seed=False)

    p = sub.add_parser("ra", help="robustness study from a JSON config")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--sample-size", type=_positive_int, default=None)
    p.add_argument("--replicates", type=_positive_int, default=None)
    _format_arg(p, "json")
    _common(p)

    p = sub.add_parser("flood", help="default flood-height study")
    p.add_argument("--sample-size", type=_positive_int, default=None)
    p.add_argument("--k", type=_positive_int, default=None, help="sphere directions")
    p.add_argument("--replicates", type=_positive_int, default=None)
    p.add_argument("--steps", type=_positive_int, default=None, help="sphere integration steps")
    p.add_argument("--method", choices=["euler", "rk4"], default=None)
    p.add_argument("--deltas", type=_floats, default=None, help="comma-separated radii")
    _common(p)
    return ap


# ---------------------------------------------------------------- helpers


def _load_config(path: Optional[str], sch) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path!r} is not valid JSON: {exc}") from None
    return schema.validate(doc, sch, "config")


def _pick(args, cfg, key, default=None, flag=None):
    v = getattr(args, flag or key, None)
    if v is not None:
        return v
    return cfg.get(key, default)


def resolve_seed(args, cfg) -> int:
    """Flag, then config, then ``$FRAO_SEED``, then 0."""
    s = _pick(args, cfg, "seed")
    if s is not None:
        return int(s)
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return 0
    try:
        s = int(env)
    except ValueError:
        raise ValidationError(f"${SEED_ENV} must be a non-negative integer, got {env!r}") from None
    if s < 0:
        raise ValidationError(f"${SEED_ENV} must be a non-negative integer, got {env!r}")
    return s


def _family(args, cfg) -> FamilySpec:
    fdoc = dict(cfg.get("family", {}))
    if args.family is not None:
        fdoc = {"kind": args.family}
    if args.bounds is not None:
        fdoc["bounds"] = args.bounds
    if args.base is not None:
        fdoc["base"] = args.base
    if "kind" not in fdoc:
        raise ValidationError("no family given (use --family or the config 'family' block)")
    schema.validate(fdoc, schema.FAMILY, "family")
    return FamilySpec.from_dict(fdoc)


def _point(spec, args, cfg) -> ParamPoint:
    theta = _pick(args, cfg, "theta")
    if theta is None:
        raise ValidationError("no parameter point given (use --theta)")
    return ParamPoint.of(spec, theta)


def _emit_text(text: str, out: Optional[str]):
    if out:
        d = os.path.dirname(out)
        if d:
            os.makedirs(d, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def dumps(doc) -> str:
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def _emit_json(doc, sch, out):
    doc = schema.validate(schema.jsonable(doc), sch, "output")
    _emit_text(dumps(doc), out)


# ---------------------------------------------------------------- commands


def cmd_fim(args) -> int:
    cfg = _load_config(args.config, schema.GEOMETRY_CONFIG)
    spec = _family(args, cfg)
    pt = _point(spec, args, cfg)
    if args.mc:
        res = fam.fim_monte_carlo(spec, pt, int(args.mc), resolve_seed(args, cfg))
    else:
        res = fam.fim(spec, pt)
    g = np.asarray(res.entries, dtype=float)
    fmt = _pick(args, cfg, "format", "json")
    if fmt == "csv":
        rows = [[*spec.param_names]] + [list(r) for r in g]
        _emit_text(ra.rows_to_csv(rows), _pick(args, cfg, "out"))
        return 0
    doc = {"family": spec.to_dict(), "theta": list(pt.coords), "source": res.source, "fim": g}
    if res.stderr is not None:
        doc["stderr"] = np.asarray(res.stderr)
    _emit_json(doc, schema.FIM_DOC, _pick(args, cfg, "out"))
    return 0


def cmd_christoffel(args) -> int:
    cfg = _load_config(args.config, schema.GEOMETRY_CONFIG)
    spec = _family(args, cfg)
    pt = _point(spec, args, cfg)
    h = _pick(args, cfg, "h", geometry.kernels.FD_STEP)
    if _pick(args, cfg, "numeric", False):
        res = geometry.christoffel_numeric(spec, pt, h)
    else:
        res = geometry.christoffel(spec, pt, h)
    G = np.asarray(res.symbols, dtype=float)
    fmt = _pick(args, cfg, "format", "json")
    if fmt == "csv":
        d = spec.param_dim
        rows = [["k", "i", "j", "value"]]
        rows += [[k, i, j, G[k, i, j]] for k in range(d) for i in range(d) for j in range(d)]
        _emit_text(ra.rows_to_csv(rows), _pick(args, cfg, "out"))
        return 0
    doc = {"family": spec.to_dict(), "theta": list(pt.coords), "source": res.source, "symbols": G}
    _emit_json(doc, schema.CHRISTOFFEL_DOC, _pick(args, cfg, "out"))
    return 0


def cmd_geodesic(args) -> int:
    cfg = _load_config(args.config, schema.GEOMETRY_CONFIG)
    spec = _family(args, cfg)
    pt = _point(spec, args, cfg)
    v = _pick(args, cfg, "velocity")
    if v is None:
        raise ValidationError("no initial velocity given (use --velocity)")
    geo = geometry.geodesic_integrate(spec, pt, v, int(_pick(args, cfg, "steps", geometry.DEFAULT_STEPS)),
                                      _pick(args, cfg, "method", "euler"))
    if geo.status != geometry.COMPLETE:
        log.warning("geodesic blew up at t=%g", geo.blowup_time)
    if _pick(args, cfg, "format", "csv") == "json":
        _emit_json(geo.to_dict(), schema.GEODESIC_DOC, _pick(args, cfg, "out"))
    else:
        _emit_text(ra.rows_to_csv(geo.csv_rows()), _pick(args, cfg, "out"))
    return 0


def _sphere(args, cfg):
    spec = _family(args, cfg)
    pt = _point(spec, args, cfg)
    delta = _pick(args, cfg, "delta")
    if delta is None:
        raise ValidationError("no sphere radius given (use --delta)")
    ode = _pick(args, cfg, "ode", False)
    sph = geometry.fr_sphere(
        spec, pt, float(delta), int(_pick(args, cfg, "k", geometry.DEFAULT_K)),
        int(_pick(args, cfg, "steps", geometry.DEFAULT_STEPS)), _pick(args, cfg, "method", "euler"),
        closed_form=False if ode else None, threads=int(_pick(args, cfg, "threads", 1)),
    )
    if sph.n_blowups:
        log.warning("%d of %d sphere geodesics blew up", sph.n_blowups, sph.K)
    return spec, sph


def cmd_sphere(args) -> int:
    cfg = _load_config(args.config, schema.GEOMETRY_CONFIG)
    _, sph = _sphere(args, cfg)
    if _pick(args, cfg, "format", "csv") == "json":
        _emit_json(sph.to_dict(), schema.SPHERE_DOC, _pick(args, cfg, "out"))
    else:
        _emit_text(ra.rows_to_csv(sph.csv_rows()), _pick(args, cfg, "out"))
    return 0


def perturbed_table(spec: FamilySpec, sph: geometry.FRSphere, x) -> list:
    """Rows ``x, p_<i>...`` for every completed sphere point ``i``."""
    idx = sph.complete_indices()
    cols = [fam.pdf(spec, sph.point(i), x) for i in idx]
    rows = [["x", *(f"p_{i}" for i in idx)]]
    for n, xv in enumerate(x):
        rows.append([xv, *(c[n] for c in cols)])
    return rows


def cmd_perturb(args) -> int:
    cfg = _load_config(args.config, schema.GEOMETRY_CONFIG)
    spec = _family(args, cfg)
    grid = _pick(args, cfg, "grid")
    if grid is None:
        lo, hi = spec.support
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValidationError(f"{spec} has unbounded support; give --grid lo,hi,n")
        grid = [lo, hi, 200]
    lo, hi, n = float(grid[0]), float(grid[1]), int(grid[2])
    if not hi > lo or n < 2:
        raise ValidationError(f"grid needs lo < hi and n >= 2, got {grid}")
    _, sph = _sphere(args, cfg)
    x = np.linspace(lo, hi, n)
    _emit_text(ra.rows_to_csv(perturbed_table(spec, sph, x)), _pick(args, cfg, "out"))
    return 0


def resolve_model(doc):
    """Model callable from its config entry.

    Built-ins: ``identity`` (first column), ``sum``, ``linear`` (needs
    ``weights``), ``flood``. Anything else is read as ``module:attribute``.
    """
    if isinstance(doc, str):
        doc = {"name": doc}
    name = doc["name"]
    if name == "identity":
        return lambda X: np.asarray(X)[:, 0]
    if name == "sum":
        return lambda X: np.asarray(X).sum(axis=1)
    if name == "linear":
        if "weights" not in doc:
            raise ValidationError("model 'linear' needs 'weights'")
        w = np.asarray(doc["weights"], dtype=float)
        return lambda X: np.asarray(X) @ w
    if name == "flood":
        return flood.flood_height
    if ":" not in name:
        raise ValidationError(f"unknown model {name!r}")
    mod, _, attr = name.partition(":")
    try:
        fn = getattr(importlib.import_module(mod), attr)
    except (ImportError, AttributeError) as exc:
        raise ValidationError(f"cannot load model {name!r}: {exc}") from None
    if not callable(fn):
        raise ValidationError(f"model {name!r} is not callable")
    return fn


def study_from_config(cfg: dict, seed: int, threads=None) -> ra.StudyConfig:
    """Build a :class:`~frao.ra.StudyConfig` from a validated config document."""
    inputs = []
    for item in cfg["inputs"]:
        spec = FamilySpec.from_dict(item["family"])
        inputs.append(ra.StudyInput.of(item["name"], spec, item["baseline"]))
    model_doc = cfg["model"]
    model = resolve_model(model_doc)
    if len(inputs) > 1 and (model_doc == "identity" or
                            (isinstance(model_doc, dict) and model_doc.get("name") == "identity")):
        log.warning("model 'identity' ignores all inputs but the first")
    kw = {k: cfg[k] for k in ("alpha", "sample_size", "sphere_K", "bootstrap_replicates",
                              "ci_level", "sphere_steps", "sphere_method", "sphere_mode")
          if k in cfg}
    if "delta_grid" in cfg:
        kw["delta_grid"] = tuple(float(x) for x in cfg["delta_grid"])
    name = model_doc if isinstance(model_doc, str) else model_doc["name"]
    return ra.StudyConfig(inputs=inputs, model=model, seed=seed,
                          threads=int(threads or cfg.get("threads", 1)), model_name=name,
                          **kw).validate()


def write_study(result: ra.RAStudyResult, out_dir: str, prefix: str) -> dict:
    """``<prefix>_pli.csv`` and ``<prefix>_result.json`` in ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    doc = schema.validate(schema.jsonable(result.to_dict()), schema.RESULT_DOC, "result")
    paths = {"pli": os.path.join(out_dir, f"{prefix}_pli.csv"),
             "json": os.path.join(out_dir, f"{prefix}_result.json")}
    with open(paths["pli"], "w", encoding="utf-8", newline="") as f:
        f.write(result.to_csv())
    with open(paths["json"], "w", encoding="utf-8", newline="") as f:
        f.write(dumps(doc))
    return paths


def _report_errors(result):
    for name, msg in result.errors.items():
        print(f"frao: input {name} skipped: {msg}", file=sys.stderr)


def cmd_ra(args) -> int:
    if not args.config:
        raise ValidationError("ra needs --config study.json")
    cfg = _load_config(args.config, schema.STUDY_CONFIG)
    for key, flag in (("alpha", "alpha"), ("sample_size", "sample_size"),
                      ("bootstrap_replicates", "replicates")):
        v = getattr(args, flag)
        if v is not None:
            cfg[key] = v
    study = study_from_config(cfg, resolve_seed(args, cfg), args.threads)
    result = ra.run_study(study)
    _report_errors(result)
    out = _pick(args, cfg, "out", flag="out") or cfg.get("out_dir")
    if out:
        write_study(result, out, "ra")
    elif (args.format or "json") == "csv":
        _emit_text(result.to_csv(), None)
    else:
        _emit_json(result.to_dict(), schema.RESULT_DOC, None)
    # every input failed numerically: nothing useful was produced
    return 3 if len(result.errors) == len(study.inputs) else 0


def cmd_flood(args) -> int:
    cfg = _load_config(args.config, schema.FLOOD_CONFIG)
    overrides = {k: v for k, v in cfg.items() if k not in ("seed", "out_dir")}
    for key, flag in (("sample_size", "sample_size"), ("sphere_K", "k"),
                      ("bootstrap_replicates", "replicates"), ("sphere_steps", "steps"),
                      ("sphere_method", "method"), ("delta_grid", "deltas"),
                      ("threads", "threads")):
        v = getattr(args, flag)
        if v is not None:
            overrides[key] = v
    result = flood.run_flood_study(overrides, seed=resolve_seed(args, cfg))
    _report_errors(result)
    out = args.out or cfg.get("out_dir") or "."
    paths = flood.write_flood_outputs(result, out)
    for p in paths.values():
        log.info("wrote %s", p)
    return 0


COMMANDS = {
    "fim": cmd_fim,
    "christoffel": cmd_christoffel,
    "geodesic": cmd_geodesic,
    "sphere": cmd_sphere,
    "perturb": cmd_perturb,
    "ra": cmd_ra,
    "flood": cmd_flood,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_rejoin_negative_values(argv))
    except SystemExit as exc:  # argparse usage errors exit with 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="frao: %(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ModelEvaluationError as exc:
        print(f"frao: model evaluation failed: {exc}", file=sys.stderr)
        return exc.exit_code
    except FraoError as exc:
        print(f"frao: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
