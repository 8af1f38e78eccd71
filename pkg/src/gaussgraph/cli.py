"""Command-line front end.

Subcommands: verify, energy, minimize, spectrum, catalog.  Options can also
come from a JSON config file (``--config`` or the GAUSSGRAPH_CONFIG
environment variable); command-line flags win over the file.

Exit codes: 0 ok, 1 verification failure, 2 non-convergence, 3 infeasible
constraints, 4 input, I/O or parse error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import functionals as fn
from .errors import GaussGraphError, InfeasibleConstraintsError, ValidationError
from .graph_lift import lift_samples, validate_constraints
from .minimize import MinimizeOptions, descend
from .spectral import (
    BendingConstants,
    assemble_A,
    coercivity_constants,
    coercivity_witness,
    eigen_residuals,
    expected_spectrum,
    f_y,
    kernel_rank,
    numeric_spectrum,
    projectors,
    tilde_f,
)
from .surfaces import catalog as cat
from .surfaces import mesh as msh

log = logging.getLogger("gaussgraph")

CONFIG_ENV = "GAUSSGRAPH_CONFIG"

EXIT_OK, EXIT_VERIFY, EXIT_NONCONV, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2, 3, 4

DEFAULTS = {
    "alpha_h": 1.0,
    "alpha_k": 1.0,
    "h0": 0.0,
    "surface": None,
    "mesh": None,
    "radius": None,
    "param": [],
    "quad_order": 32,
    "area": None,
    "volume": None,
    "allow_degenerate": False,
    "seed": 0,
    "out": None,
    "no_timestamp": False,
    "format": "json",
    "samples": 200,
    "y": None,
    "init": "icosphere",
    "subdiv": 3,
    "noise": 0.0,
    "max_iters": 2000,
    "gradient": "analytic",
    "direction": "lbfgs",
    "pin_boundary": True,
    "laplacian_weight": 0.0,
    "min_angle": 1e-2,
    "volume_mode": "polyhedral",
}

_num = {"type": "number"}
_opt_num = {"type": ["number", "null"]}
CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "alpha_h": _num,
        "alpha_k": _num,
        "h0": _num,
        "surface": {"type": ["string", "null"], "enum": list(cat.CATALOG_NAMES) + [None]},
        "mesh": {"type": ["string", "null"]},
        "radius": _opt_num,
        "param": {"type": "array", "items": {"type": "string"}},
        "params": {"type": "object", "additionalProperties": _num},
        "quad_order": {"type": "integer", "minimum": 1},
        "area": _opt_num,
        "volume": _opt_num,
        "allow_degenerate": {"type": "boolean"},
        "seed": {"type": "integer"},
        "out": {"type": ["string", "null"]},
        "no_timestamp": {"type": "boolean"},
        "format": {"enum": ["json", "csv"]},
        "samples": {"type": "integer", "minimum": 1},
        "y": {"type": ["array", "null"], "items": _num, "minItems": 3, "maxItems": 3},
        "init": {"enum": ["icosphere", "flat_grid"]},
        "subdiv": {"type": "integer", "minimum": 0},
        "noise": {"type": "number", "minimum": 0},
        "max_iters": {"type": "integer", "minimum": 0},
        "gradient": {"enum": ["analytic", "fd"]},
        "direction": {"enum": ["lbfgs", "steepest"]},
        "pin_boundary": {"type": "boolean"},
        "laplacian_weight": {"type": "number", "minimum": 0},
        "min_angle": {"type": "number", "minimum": 0},
        "volume_mode": {"enum": ["polyhedral", "quadrature"]},
    },
}

VERIFY_TOL = {
    "eigen_values": 1e-8,
    "eigen_vectors": 1e-10,
    "kernel": 1e-9,
    "constraint_set": 1e-9,
    "dual_identity": 1e-10,
    "coercivity": 1e-9,
    "dual_form": 1e-8,
    "gauss_bonnet_catalog": 1e-6,
    "gauss_bonnet_mesh": 1e-9,
}


# -- configuration -------------------------------------------------------------


def load_config(path):
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise GaussGraphError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"config {path}: {exc.message}") from None
    return data


def resolve(args):
    """Merge built-in defaults < config file < explicit flags."""
    cfg = dict(DEFAULTS)
    path = args.config or os.environ.get(CONFIG_ENV)
    extra_params = {}
    if path:
        data = load_config(path)
        extra_params = data.pop("params", {})
        cfg.update(data)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None and val != []:
            cfg[key] = val
    cfg["params"] = dict(extra_params)
    for item in cfg["param"]:
        if "=" not in item:
            raise ValidationError(f"--param expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        try:
            cfg["params"][k] = float(v)
        except ValueError:
            raise ValidationError(f"--param {k}: {v!r} is not a number") from None
    if cfg["radius"] is not None:
        cfg["params"]["radius"] = cfg["radius"]
    return cfg


def constants(cfg):
    if cfg["allow_degenerate"]:
        return BendingConstants.relaxed(cfg["alpha_h"], cfg["alpha_k"], cfg["h0"])
    return BendingConstants(cfg["alpha_h"], cfg["alpha_k"], cfg["h0"])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def emit(payload, cfg, name):
    payload = dict(payload)
    if not cfg["no_timestamp"]:
        payload["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    print(text)
    if cfg["out"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(text + "\n")


# -- verify ------------------------------------------------------------------------


def _random_unit(rng, n):
    y = rng.normal(size=(n, 3))
    return y / np.linalg.norm(y, axis=1)[:, None]


def _suite(passed, residual, tol, **extra):
    return dict(passed=bool(passed), max_residual=residual, tolerance=tol, **extra)


def run_verify(cfg):
    c = constants(cfg)
    rng = np.random.default_rng(cfg["seed"])
    ys = _random_unit(rng, cfg["samples"])
    suites = {}

    # spectrum of A_y against the closed-form eigenpairs
    dev = float(np.max(np.abs(numeric_spectrum(ys, c) - expected_spectrum(c))))
    suites["eigen_values"] = _suite(dev <= VERIFY_TOL["eigen_values"], dev, VERIFY_TOL["eigen_values"])
    res = eigen_residuals(ys, c)
    vec = float(np.nanmax([np.nanmax(v) for v in res.values()]))
    suites["eigen_vectors"] = _suite(vec <= VERIFY_TOL["eigen_vectors"], vec, VERIFY_TOL["eigen_vectors"])

    # numerical zero multiplicity
    w = numeric_spectrum(ys, c)
    scale = max(c.alpha_H, abs(c.alpha_K))
    zero_mult = np.sum(np.abs(w) <= VERIFY_TOL["kernel"] * scale, axis=1)
    expected_zero = sum(m for lam, m in c.eigenvalues().values() if abs(lam) <= VERIFY_TOL["kernel"] * scale)
    ranks = kernel_rank(ys)
    suites["kernel"] = _suite(
        bool(np.all(zero_mult == expected_zero)) and bool(np.all(ranks == 5)),
        int(np.max(np.abs(zero_mult - expected_zero))),
        0,
        zero_eigenvalue_multiplicity=int(np.max(zero_mult)),
        expected_multiplicity=int(expected_zero),
        kernel_generator_rank=int(np.min(ranks)),
        coercivity_possible=bool(expected_zero == 5 and c.alpha_K > 0),
    )

    # constraint set on lifted catalog samples, and tilde_f = f_y there
    lifted = []
    for patch in (cat.sphere(1.0), cat.torus(2.0, 1.0), cat.ellipsoid(1.0, 1.5, 0.8)):
        lifted += lift_samples(cat.sample(patch, 12))
    cres = max(validate_constraints(g).max_violation for g in lifted)
    suites["constraint_set"] = _suite(cres <= VERIFY_TOL["constraint_set"], cres, VERIFY_TOL["constraint_set"])
    if c.is_coercive:
        Y = np.array([g.y for g in lifted])
        Z = np.array([g.zeta for g in lifted])
        ft, fy = tilde_f(Z, Y, c, P=projectors(Y)), f_y(Z, Y, c)
        d = float(np.max(np.abs(ft - fy) / (1.0 + np.abs(fy))))
        suites["dual_identity"] = _suite(d <= VERIFY_TOL["dual_identity"], d, VERIFY_TOL["dual_identity"])

    # coercivity bound, or a witness of its failure
    if c.is_coercive:
        c1, c2 = coercivity_constants(c)
        n = 20000
        Y = _random_unit(rng, n)
        Z = rng.uniform(-5, 5, size=(n, 3, 3))
        gap = tilde_f(Z, Y, c, P=projectors(Y)) - (c1 * np.sum(Z**2, axis=(1, 2)) - c2)
        worst = float(max(0.0, -np.min(gap)))
        suites["coercivity"] = _suite(worst <= VERIFY_TOL["coercivity"], worst, VERIFY_TOL["coercivity"], c1=c1, c2=c2)
    else:
        lam, d, val = coercivity_witness(ys[0], c)
        suites["coercivity"] = _suite(
            False, -lam, 0.0,
            status="violated",
            gate="4*alpha_H > alpha_K > 0",
            witness={"y": ys[0], "min_eigenvalue": lam, "direction": d, "F_at_1e3_direction": val},
        )

    # integral forms on closed catalog surfaces
    worst_df, worst_gb, detail = 0.0, 0.0, {}
    integrand = "tilde" if c.is_coercive else "f_y"
    for patch in (cat.sphere(1.0), cat.torus(2.0, 1.0), cat.ellipsoid(1.0, 1.5, 0.8)):
        s = cat.sample(patch, cfg["quad_order"])
        e1 = fn.energy_curvature(s, c)
        e2 = fn.energy_graph(lift_samples(s), c, integrand=integrand)
        rel = abs(e1 - e2) / max(abs(e1), 1.0)
        gb = fn.gauss_bonnet_total(s)
        target = 2 * np.pi * patch.euler
        gbr = abs(gb - target) / max(abs(target), 1.0)
        worst_df, worst_gb = max(worst_df, rel), max(worst_gb, gbr)
        detail[patch.name] = {"energy_curvature": e1, "energy_graph": e2, "total_gauss": gb, "two_pi_chi": target}
    suites["dual_form"] = _suite(worst_df <= VERIFY_TOL["dual_form"], worst_df, VERIFY_TOL["dual_form"], surfaces=detail)
    suites["gauss_bonnet_catalog"] = _suite(worst_gb <= VERIFY_TOL["gauss_bonnet_catalog"], worst_gb, VERIFY_TOL["gauss_bonnet_catalog"])
    m = msh.perturb_radially(msh.icosphere(2), 0.05, seed=cfg["seed"])
    cv = msh.mesh_curvatures(m)
    gbm = abs(float(np.sum(cv.K * cv.area)) - 2 * np.pi * m.euler_characteristic)
    suites["gauss_bonnet_mesh"] = _suite(gbm <= VERIFY_TOL["gauss_bonnet_mesh"], gbm, VERIFY_TOL["gauss_bonnet_mesh"])

    failed = [k for k, v in suites.items() if not v["passed"]]
    report = {
        "command": "verify",
        "constants": c.as_dict(),
        "coercive": c.is_coercive,
        "seed": cfg["seed"],
        "passed": not failed,
        "first_failure": failed[0] if failed else None,
        "suites": suites,
    }
    emit(report, cfg, "verify")
    if failed:
        print(f"verification failed: suite {failed[0]!r}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# -- energy ------------------------------------------------------------------------


def _surface_inputs(cfg):
    """(surface samples, graph samples, boundary mass, info) from config."""
    if cfg["mesh"]:
        m = msh.load_obj(cfg["mesh"])
        cv = msh.mesh_curvatures(m)
        surf, n_clamped = msh.mesh_surface_samples(m, cv)
        graph = msh.mesh_to_samples(m, cv)
        info = {
            "source": str(cfg["mesh"]),
            "n_vertices": m.n_vertices,
            "n_faces": m.n_faces,
            "euler_characteristic": m.euler_characteristic,
            "angle_defect_total": float(np.sum(cv.angle_defect)),
            "closed": m.is_closed,
            "n_clamped": n_clamped,
        }
        return surf, graph, msh.mesh_boundary_mass(m, cv), info
    if not cfg["surface"]:
        raise ValidationError("give --surface NAME or --mesh PATH")
    patch = cat.catalog(cfg["surface"], **cfg["params"])
    surf = cat.sample(patch, cfg["quad_order"])
    info = {"source": patch.name, "params": patch.params, "euler_characteristic": patch.euler, "closed": patch.closed}
    return surf, lift_samples(surf), cat.patch_boundary_mass(patch, cfg["quad_order"]), info


def run_energy(cfg):
    c = constants(cfg)
    surf, graph, bmass, info = _surface_inputs(cfg)
    rep = fn.energy_report(surf, c, graph, boundary_mass=bmass, a=cfg["area"], v=cfg["volume"], extra=info)
    if cfg["format"] == "csv":
        text = fn.EnergyReport.csv_header() + "\n" + rep.csv_row()
        print(text)
        if cfg["out"]:
            out = Path(cfg["out"])
            out.mkdir(parents=True, exist_ok=True)
            (out / "energy.csv").write_text(text + "\n")
    else:
        emit({"command": "energy", "constants": c.as_dict(), **rep.to_dict()}, cfg, "energy")
    return EXIT_OK


# -- minimize ----------------------------------------------------------------------


def run_minimize(cfg):
    c = constants(cfg)
    a, v = cfg["area"], cfg["volume"]
    if a is not None and v is not None and not fn.iso_ok(a, v):
        raise InfeasibleConstraintsError(
            f"targets a={a}, v={v} violate the isoperimetric gate 36*pi*v^2 <= a^3 "
            f"({36 * np.pi * v**2:.6g} > {a**3:.6g})"
        )
    if cfg["mesh"]:
        mesh = msh.load_obj(cfg["mesh"])
    elif cfg["init"] == "flat_grid":
        mesh = msh.flat_grid(max(cfg["subdiv"], 1) * 4)
    else:
        mesh = msh.icosphere(cfg["subdiv"], cfg["params"].get("radius", 1.0))
    if cfg["noise"] > 0:
        mesh = msh.perturb_radially(mesh, cfg["noise"], seed=cfg["seed"])
    opts = MinimizeOptions(
        max_iters=cfg["max_iters"],
        gradient=cfg["gradient"],
        direction=cfg["direction"],
        pin_boundary=cfg["pin_boundary"],
        laplacian_weight=cfg["laplacian_weight"],
        min_angle=cfg["min_angle"],
        volume_mode=cfg["volume_mode"],
        seed=cfg["seed"],
    )
    traj = descend(mesh, c, a=a, v=v, opts=opts)
    files = {}
    if cfg["out"]:
        csv_path, obj_path = traj.write(cfg["out"])
        files = {"trajectory": str(csv_path), "final_mesh": str(obj_path)}
    emit({"command": "minimize", "constants": c.as_dict(), **traj.summary(), "files": files}, cfg, "minimize")
    return EXIT_OK if traj.converged else EXIT_NONCONV


# -- spectrum ----------------------------------------------------------------------


def run_spectrum(cfg):
    c = constants(cfg)
    if cfg["y"] is not None:
        y = np.asarray(cfg["y"], float)
        ny = np.linalg.norm(y)
        if ny == 0:
            raise ValidationError("y must be nonzero")
        y = y / ny
    else:
        y = _random_unit(np.random.default_rng(cfg["seed"]), 1)[0]
    A = assemble_A(y, c)
    w = numeric_spectrum(y, c)
    emit(
        {
            "command": "spectrum",
            "constants": c.as_dict(),
            "y": y,
            "A": A,
            "eigenvalues_numeric": w,
            "eigenvalues_expected": {k: {"value": lam, "multiplicity": m} for k, (lam, m) in c.eigenvalues().items()},
            "max_deviation": float(np.max(np.abs(w - expected_spectrum(c)))),
            "residuals": {k: float(v) for k, v in eigen_residuals(y, c).items()},
            "kernel_rank": int(kernel_rank(y)),
        },
        cfg,
        "spectrum",
    )
    return EXIT_OK


# -- catalog -----------------------------------------------------------------------


def run_catalog(cfg):
    names = [cfg["surface"]] if cfg["surface"] else list(cat.CATALOG_NAMES)
    entries = {}
    for name in names:
        params = cfg["params"] if cfg["surface"] else {}
        patch = cat.catalog(name, **params)
        entries[name] = {
            "params": patch.params,
            "closed": patch.closed,
            "euler_characteristic": patch.euler,
            "periodic": list(patch.periodic),
            "area": cat.patch_area(patch, cfg["quad_order"]),
            "boundary_mass": cat.patch_boundary_mass(patch, cfg["quad_order"]),
        }
    emit({"command": "catalog", "quad_order": cfg["quad_order"], "surfaces": entries}, cfg, "catalog")
    return EXIT_OK


COMMANDS = {
    "verify": run_verify,
    "energy": run_energy,
    "minimize": run_minimize,
    "spectrum": run_spectrum,
    "catalog": run_catalog,
}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which here means non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        print(json.dumps({"code": "E_USAGE", "message": message}), file=sys.stderr)
        self.exit(EXIT_INPUT)


def build_parser():
    common = _Parser(add_help=False, argument_default=None)
    g = common.add_argument_group("shared options")
    g.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    g.add_argument("--alpha-h", dest="alpha_h", type=float)
    g.add_argument("--alpha-k", dest="alpha_k", type=float)
    g.add_argument("--h0", type=float)
    g.add_argument("--surface", choices=cat.CATALOG_NAMES)
    g.add_argument("--radius", type=float)
    g.add_argument("--param", action="append", metavar="KEY=VALUE", help="surface parameter, repeatable")
    g.add_argument("--mesh", help="OBJ mesh path")
    g.add_argument("--quad-order", dest="quad_order", type=int)
    g.add_argument("--area", type=float)
    g.add_argument("--volume", type=float)
    g.add_argument("--allow-degenerate", dest="allow_degenerate", action="store_true", default=None)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help="output directory")
    g.add_argument("--no-timestamp", dest="no_timestamp", action="store_true", default=None)
    g.add_argument("-v", "--verbose", action="store_true", default=False)

    p = _Parser(prog="gaussgraph", description="Bending energy of surfaces via their Gauss graphs.")
    sub = p.add_subparsers(dest="command", required=True)
    pv = sub.add_parser("verify", parents=[common], help="run the algebraic and integral verification suites")
    pv.add_argument("--samples", type=int, help="random normals per suite")
    pe = sub.add_parser("energy", parents=[common], help="energy report for a catalog surface or OBJ mesh")
    pe.add_argument("--format", choices=["json", "csv"])
    pm = sub.add_parser("minimize", parents=[common], help="constrained descent of the discrete energy")
    pm.add_argument("--init", choices=["icosphere", "flat_grid"])
    pm.add_argument("--subdiv", type=int)
    pm.add_argument("--noise", type=float)
    pm.add_argument("--max-iters", dest="max_iters", type=int)
    pm.add_argument("--gradient", choices=["analytic", "fd"])
    pm.add_argument("--direction", choices=["lbfgs", "steepest"])
    pm.add_argument("--free-boundary", dest="pin_boundary", action="store_false", default=None)
    pm.add_argument("--laplacian-weight", dest="laplacian_weight", type=float)
    pm.add_argument("--min-angle", dest="min_angle", type=float, help="smallest corner angle (radians) a step may create")
    pm.add_argument("--volume-mode", dest="volume_mode", choices=["polyhedral", "quadrature"])
    ps = sub.add_parser("spectrum", parents=[common], help="dump A_y, its eigenvalues and residuals")
    ps.add_argument("--y", type=lambda s: [float(t) for t in s.split(",")], help="normal as x,y,z")
    sub.add_parser("catalog", parents=[common], help="list catalog surfaces")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except InfeasibleConstraintsError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return EXIT_INFEASIBLE
    except GaussGraphError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(json.dumps({"code": "E_IO", "message": str(exc)}), file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
