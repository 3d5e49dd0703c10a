"""Command-line surface: config-driven runs, the catalog listing and the config schema.

``beltrami run --config cfg.json --out DIR`` validates the config against
:data:`CONFIG_SCHEMA`, runs one task pipeline and writes ``report.json`` plus
CSV tables into DIR.  The report has a hashed section (config echo, results,
provenance, artifact digests) whose SHA-256 over canonical JSON is stored
next to it; wall-times live outside the hashed section.

Exit codes: 0 success, 2 validation error, 3 solver error, 4 criteria run
whose verdicts are all Inconclusive.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .coefficients import FAMILIES, Constant, coefficient_from_dict
from .conformal import annulus_map, compose_normalized, riemann_map
from .criteria import (
    INCONCLUSIVE, CriteriaConfig, _jsonable, as_density, criteria_battery, log_radii,
)
from .dirichlet import (
    boundary_residual, datum_from_dict, maximum_principle_check, multivalent_solution,
    solve_dirichlet_sc,
)
from .errors import BeltramiError, ValidationError
from .geometry import DOMAIN_KINDS, GridSpec, domain_from_dict, make_mask, shape_from_dict
from .modulus import (
    CondenserSpec, condenser_capacity, hole_condenser, identity_map, mobius_map,
    radial_stretch_map, ring_inequality_check,
)
from .oscillation import fmo_estimate
from .phi import phi_condition_suite, phi_from_dict
from .primeends import (
    IdentityMap, SlitMap, build_prime_end_space, extension_continuity_check, metric_equivalence,
    slit_test_battery,
)
from .qcsolver import jacobian_check, solve_beltrami

LOGGER = logging.getLogger(__name__)

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_INCONCLUSIVE = 0, 2, 3, 4

PHI_FAMILIES = ("exp_sqrt", "exponential", "power", "table", "tlog")

_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_OBJECT = {"type": "object"}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "beltrami run config",
    "type": "object",
    "required": ["task"],
    "additionalProperties": False,
    "properties": {
        "task": {"enum": ["criteria", "solve", "dirichlet", "modulus", "primeends"]},
        "coefficient": {"type": "object", "required": ["family"],
                        "properties": {"family": {"enum": sorted(FAMILIES)}}},
        "domain": {"type": "object", "required": ["kind"],
                   "properties": {"kind": {"enum": sorted(DOMAIN_KINDS)}}},
        "z0": _POINT,
        "datum": {"type": "object",
                  "oneOf": [{"required": ["kind"]}, {"required": ["inner", "outer"]}]},
        "phi": {"type": "object", "required": ["family"],
                "properties": {"family": {"enum": list(PHI_FAMILIES)}}},
        "condenser": {
            "type": "object", "required": ["E", "F", "grid"], "additionalProperties": False,
            "properties": {
                "E": _OBJECT, "F": _OBJECT, "domain": _OBJECT,
                "grid": {"type": "object", "required": ["center", "half_width"],
                         "properties": {"center": _POINT, "half_width": _POSITIVE}},
            },
        },
        "ring": {
            "type": "object", "required": ["map", "r1", "r2"], "additionalProperties": False,
            "properties": {
                "map": {"type": "object", "required": ["kind"],
                        "properties": {"kind": {"enum": ["identity", "mobius", "radial_stretch"]},
                                       "a": _POINT, "K": _POSITIVE, "z0": _POINT}},
                "z0": _POINT, "r1": _POSITIVE, "r2": _POSITIVE,
                "restrict_to_domain": {"type": "boolean"},
            },
        },
        "extension": {"enum": ["identity", "conformal", "solve"]},
        "numeric": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "n": {"enum": [2 ** k for k in range(4, 13)]},
                "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "tol": _POSITIVE,
                "decades": _POSITIVE,
                "per_decade": {"type": "integer", "minimum": 1},
                "fourier_N": {"type": "integer", "minimum": 8},
                "eps0": _POSITIVE,
                "depth": {"type": "integer", "minimum": 1},
                "ends": {"type": "integer", "minimum": 1},
                "maxiter": {"type": "integer", "minimum": 1},
                "method": {"enum": ["polar", "fft"]},
            },
        },
        "outputs": {"type": "object", "additionalProperties": False,
                    "properties": {"csv": {"type": "boolean"}}},
    },
}

NUMERIC_DEFAULTS = {"n": 128, "delta": 0.01, "tol": 1e-8, "decades": 5.0, "per_decade": 12,
                    "fourier_N": 64, "eps0": 0.5, "depth": 6, "ends": 8, "maxiter": 2000,
                    "method": "polar"}


# ---------------------------------------------------------------- artifacts

def canonical_json(obj):
    """Sorted-key, whitespace-free JSON of a report section."""
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False,
                      allow_nan=False)


def report_hash(section):
    return hashlib.sha256(canonical_json(section).encode("utf-8")).hexdigest()


def csv_text(columns, rows):
    """CSV with shortest round-trip float formatting."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


class _Artifacts:
    def __init__(self, enabled):
        self.enabled = enabled
        self.files = {}

    def add(self, name, columns, rows):
        if self.enabled:
            self.files[name] = csv_text(columns, rows)

    def digests(self):
        return {k: hashlib.sha256(v.encode("utf-8")).hexdigest() for k, v in sorted(self.files.items())}


# ---------------------------------------------------------------- config parsing

def load_config(path):
    """Read and validate a config file; raises ValidationError."""
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config: {exc}") from None
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"config invalid at {where}: {exc.message}") from None
    need = {"solve": ("coefficient", "domain"), "dirichlet": ("domain", "datum"),
            "primeends": ("domain",), "criteria": ()}
    for key in need.get(cfg["task"], ()):
        if key not in cfg:
            raise ValidationError(f"task {cfg['task']!r} needs {key!r}")
    if cfg["task"] == "criteria" and "coefficient" not in cfg and "phi" not in cfg:
        raise ValidationError("task 'criteria' needs 'coefficient' or 'phi'")
    if cfg["task"] == "modulus" and not ({"condenser", "ring", "domain"} & set(cfg)):
        raise ValidationError("task 'modulus' needs 'condenser', 'ring' or 'domain'")
    ring = cfg.get("ring")
    if ring and not ring["r1"] < ring["r2"]:
        raise ValidationError("ring needs r1 < r2")


def _point(p, default=0j):
    return default if p is None else complex(p[0], p[1])


def _numeric(cfg):
    out = dict(NUMERIC_DEFAULTS)
    out.update(cfg.get("numeric", {}))
    return out


# ---------------------------------------------------------------- tasks

def _task_criteria(cfg, num, art):
    results = {}
    inconclusive = []
    if "coefficient" in cfg:
        coef = coefficient_from_dict(cfg["coefficient"])
        z0 = _point(cfg.get("z0"))
        domain = domain_from_dict(cfg["domain"]) if "domain" in cfg else None
        config = CriteriaConfig(per_decade=int(num["per_decade"]), decades=float(num["decades"]))
        bat = criteria_battery(coef, z0, num["eps0"], domain, config)
        results["battery"] = bat.to_dict()
        art.add("partial_integrals.csv", ["r_or_eps", "value"], bat.rows())
        eps = log_radii(num["eps0"], config=config)
        fmo = fmo_estimate(as_density(coef, z0), z0, eps, domain)
        results["fmo"] = fmo.to_dict()
        art.add("fmo.csv", ["r_or_eps", "value"], fmo.rows())
        inconclusive += [s == INCONCLUSIVE for s in bat.statuses().values()]
        inconclusive.append(fmo.verdict == INCONCLUSIVE)
    if "phi" in cfg:
        suite = phi_condition_suite(phi_from_dict(cfg["phi"]))
        results["phi"] = suite.to_dict()
        inconclusive += [v.status == INCONCLUSIVE for v in suite.verdicts.values()]
    code = EXIT_INCONCLUSIVE if inconclusive and all(inconclusive) else EXIT_OK
    return results, {}, code


def _task_solve(cfg, num, art):
    coef = coefficient_from_dict(cfg["coefficient"])
    domain = domain_from_dict(cfg["domain"])
    mask = make_mask(domain, num["n"])
    sol = solve_beltrami(coef, mask, num["delta"], method=num["method"], tol=num["tol"],
                         maxiter=num["maxiter"])
    jac = jacobian_check(sol)
    art.add("field.csv", ["x", "y", "re_f", "im_f", "J_f"], sol.rows())
    return {"solution": sol.to_dict(), "jacobian": jac.to_dict()}, _grid_info(mask.grid), EXIT_OK


def _grid_info(grid):
    return {"center": [grid.center.real, grid.center.imag], "half_width": grid.half_width,
            "n": grid.n, "spacing": grid.spacing}


def _residual_ends(space, count):
    ends = space.ends
    stride = max(1, len(ends) // count)
    return ends[::stride][:count]


def _task_dirichlet(cfg, num, art):
    coef = coefficient_from_dict(cfg["coefficient"]) if "coefficient" in cfg else Constant(0.0)
    domain = domain_from_dict(cfg["domain"])
    dat = cfg["datum"]
    if "inner" in dat:
        mv = multivalent_solution(coef, domain, datum_from_dict(dat["inner"]), datum_from_dict(dat["outer"]),
                                  n=num["n"], N=num["fourier_N"], delta=num["delta"])
        res = {"omega": mv.omega, "single_valued": abs(mv.omega) < 1e-8}
        if mv.harmonic is not None:
            res["period"] = mv.harmonic.period.to_dict()
            res["r_star"] = mv.harmonic.r_star
        return {"multivalent": res}, {}, EXIT_OK
    datum = datum_from_dict(dat)
    sol = solve_dirichlet_sc(coef, domain, datum, n=num["n"], N=num["fourier_N"], delta=num["delta"])
    space = build_prime_end_space(domain, 64)
    rows = boundary_residual(sol, datum, _residual_ends(space, num["ends"]), eps0=num["eps0"], space=space)
    art.add("residuals.csv", ["prime_end_id", "depth", "residual"],
            [(r.end_id, r.depth, r.residual) for r in rows])
    pts = sol.f.grid.points()
    m = sol.f.mask.inside
    art.add("field.csv", ["x", "y", "re_f", "im_f"],
            np.column_stack([pts.real[m], pts.imag[m], sol.f.values.real[m], sol.f.values.imag[m]]))
    finite = [r.extrapolated for r in rows if math.isfinite(r.extrapolated)]
    res = {"solution": sol.to_dict(),
           "boundary_residual": {"max_raw": max((r.residual for r in rows), default=math.nan),
                                 "max_extrapolated": max(finite, default=math.nan),
                                 "rows": [r.row() for r in rows]},
           "maximum_principle": maximum_principle_check(sol)}
    return res, _grid_info(sol.f.grid), EXIT_OK


_MAPS = {
    "identity": lambda m: identity_map(),
    "mobius": lambda m: mobius_map(_point(m.get("a"))),
    "radial_stretch": lambda m: radial_stretch_map(float(m.get("K", 2.0)), _point(m.get("z0"))),
}


def _task_modulus(cfg, num, art):
    res = {}
    grid = {}
    if "condenser" in cfg:
        c = cfg["condenser"]
        g = GridSpec(_point(c["grid"]["center"]), float(c["grid"]["half_width"]), num["n"])
        spec = CondenserSpec(g, shape_from_dict(c["E"]), shape_from_dict(c["F"]),
                             shape_from_dict(c["domain"]) if "domain" in c else None)
        cap = condenser_capacity(spec, keep_potential=art.enabled)
        res["capacity"] = cap.to_dict()
        if cap.potential is not None:
            pts = g.points()
            ok = np.isfinite(cap.potential)
            art.add("potential.csv", ["x", "y", "u"],
                    np.column_stack([pts.real[ok], pts.imag[ok], cap.potential[ok]]))
        grid = _grid_info(g)
    if "domain" in cfg:
        domain = domain_from_dict(cfg["domain"])
        if getattr(domain, "connectivity", 1) == 2:
            g = annulus_map(make_mask(domain, min(num["n"], 256)))
            cap = condenser_capacity(hole_condenser(domain, num["n"]))
            conformal = 2.0 * math.pi / math.log(1.0 / g.r_inner)
            res["doubly_connected"] = {"r_star": g.r_inner, "conformal_capacity": conformal,
                                       "grid_capacity": cap.value,
                                       "relative_difference": abs(conformal - cap.value) / cap.value,
                                       "map": g.to_dict()}
            art.add("boundary_table.csv", ["component", "theta", "re_w", "im_w"], g.table())
    if "ring" in cfg:
        r = cfg["ring"]
        fmap = _MAPS[r["map"]["kind"]](r["map"])
        Q = coefficient_from_dict(cfg["coefficient"]) if "coefficient" in cfg else \
            (lambda z: np.ones(np.shape(z)))
        dom = domain_from_dict(cfg["domain"]) if r.get("restrict_to_domain") and "domain" in cfg else None
        chk = ring_inequality_check(fmap, _point(r.get("z0")), float(r["r1"]), float(r["r2"]), Q,
                                    domain=dom, n=num["n"])
        res["ring"] = chk.to_dict()
    return res, grid, EXIT_OK


def _task_primeends(cfg, num, art):
    domain = domain_from_dict(cfg["domain"])
    space = build_prime_end_space(domain, 64)
    art.add("ends.csv", ["id", "support_x", "support_y", "side", "ref_angle"], space.rows())
    res = {"ends": len(space.ends)}
    if domain.kind == "slit_disk":
        ref = SlitMap(domain.x0)
        battery = slit_test_battery(space)
        res["equivalence"] = metric_equivalence(space, ref, battery).to_dict()
    kind = cfg.get("extension", "identity")
    if kind == "identity":
        g = IdentityMap()
    elif kind == "conformal":
        g = SlitMap(domain.x0) if domain.kind == "slit_disk" else None
        if g is None:
            g = riemann_map(make_mask(domain, num["n"]))
    else:
        coef = coefficient_from_dict(cfg["coefficient"]) if "coefficient" in cfg else Constant(0.0)
        g = compose_normalized(solve_beltrami(coef, make_mask(domain, num["n"]), num["delta"]))
    rep = extension_continuity_check(g, space, depth=int(num["depth"]))
    res["extension"] = {"map": kind, **rep.to_dict()}
    return res, {}, EXIT_OK


TASKS = {"criteria": _task_criteria, "solve": _task_solve, "dirichlet": _task_dirichlet,
         "modulus": _task_modulus, "primeends": _task_primeends}


# ---------------------------------------------------------------- run

def execute(cfg, seed=0):
    """Run a validated config; returns (report dict, CSV files dict, exit code)."""
    num = _numeric(cfg)
    art = _Artifacts(cfg.get("outputs", {}).get("csv", True))
    t0 = time.perf_counter()
    error = None
    try:
        results, grid, code = TASKS[cfg["task"]](cfg, num, art)
    except ValidationError as exc:
        results, grid, code, error = {}, {}, EXIT_VALIDATION, exc
    except BeltramiError as exc:
        results, grid, code, error = {}, {}, EXIT_SOLVER, exc
    wall = time.perf_counter() - t0
    hashed = {
        "config": cfg,
        "numeric": num,
        "results": results,
        "status": "ok" if error is None else "error",
        "error": None if error is None else {"type": type(error).__name__, "message": str(error)},
        "exit_code": code,
        "provenance": {"version": __version__, "numpy": np.__version__, "grid": grid, "seed": seed},
        "artifacts": art.digests(),
    }
    hashed = json.loads(canonical_json(hashed))
    report = {"hashed": hashed, "sha256": report_hash(hashed), "timing": {"wall_seconds": wall}}
    return report, art.files, code


def run(config_path, out_dir, seed=0):
    """Validate, execute and write artifacts; returns the exit code."""
    try:
        cfg = load_config(config_path)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    report, files, code = execute(cfg, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)
    (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n")
    if report["hashed"]["error"]:
        print(f"error: {report['hashed']['error']['message']}", file=sys.stderr)
    return code


def catalog():
    """Sorted registry entries ``"<name> <category>"``."""
    items = [f"{k} coefficient" for k in FAMILIES]
    items += [f"{k} Φ" for k in PHI_FAMILIES]
    items += [f"{k} domain" for k in DOMAIN_KINDS]
    return sorted(items)


def list_catalog(filter_text=""):
    f = filter_text.lower()
    return [s for s in catalog() if f in s.lower()]


def main(argv=None):
    parser = argparse.ArgumentParser(prog="beltrami", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a task config")
    p_run.add_argument("--config", required=True, type=Path)
    p_run.add_argument("--out", required=True, type=Path)
    p_run.add_argument("--verbosity", type=int, choices=(0, 1, 2), default=1)
    p_run.add_argument("--seed", type=int, default=0, help="reserved; pipelines are deterministic")
    p_cat = sub.add_parser("catalog", help="list coefficient families, Φ families and domains")
    p_cat.add_argument("filter", nargs="?", default="")
    sub.add_parser("schema", help="print the config JSON schema")
    args = parser.parse_args(argv)

    if args.command == "catalog":
        for line in list_catalog(args.filter):
            print(line)
        return EXIT_OK
    if args.command == "schema":
        print(json.dumps(CONFIG_SCHEMA, indent=2, ensure_ascii=False))
        return EXIT_OK
    level = {0: logging.WARNING, 1: logging.INFO, 2: logging.DEBUG}[args.verbosity]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return run(args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
