"""Command-line entry point.

Subcommands::

    surface <potential.json>        mesh + sidecar + validation report
    factor <loop.json>              Iwasawa splitting of one loop
    revolution --a --b --c          rotational surface + axis class
    classify --p --q --v0           canonical moduli representative
    classify-loop <loop.json>       cell class of one loop
    smyth --c --k [--init omega1]   Smyth surface + symmetry/Painleve report
    validate <mesh-dir>             re-run checks on an exported mesh

``--lambda0`` is always an angle ``theta`` with ``lambda0 = exp(i theta)``.
Exit codes: 0 all requested checks pass, 1 a check or computation failed,
2 usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import MinkDPWError, NotInR
from .export import export_mesh, mesh_from_json
from .factorize import classify_cell, iwasawa_kernel
from .families import (RevolutionParams, axis_classify, moduli_normalize, revolution_mesh,
                       smyth_potential)
from .geomcheck import ValidationReport, validate_mesh
from .loopcore import LoopBandPolicy, MatrixLoop
from .potential import GridSpec, SchemaError, initial_loop, parse_potential
from .symsurface import build_surface

SURFACE_CHECKS = ("mean_curvature", "gauss", "conformality", "metric")
SMYTH_CHECKS = ("rotational", "reflection", "painleve", "gauss")


@dataclass
class RunConfig:
    command: str
    inputs: list = field(default_factory=list)
    theta: float | None = None
    grid: dict = field(default_factory=dict)
    policy: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    out: str | None = None
    formats: tuple = ("obj", "json")
    singular: str = "hole"
    seed: int = 0
    margin: int | None = None

    def __post_init__(self):
        if self.theta is not None and not np.isfinite(self.theta):
            raise ValueError("lambda0 angle must be finite")

    @property
    def lambda0(self) -> complex | None:
        return None if self.theta is None else complex(np.cos(self.theta), np.sin(self.theta))


class UsageError(Exception):
    pass


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False)


def _emit(cfg: RunConfig, name: str, obj):
    text = _dump(obj)
    if cfg.out:
        with open(os.path.join(cfg.out, name), "w", newline="\n") as fh:
            fh.write(text + "\n")
    return text


def _prepare_out(cfg: RunConfig):
    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)
        if not os.access(cfg.out, os.W_OK):
            raise UsageError(f"output directory {cfg.out} is not writable")


def _tolerances(cfg: RunConfig) -> Tolerances:
    known = set(asdict(DEFAULT))
    kw = {k: v for k, v in cfg.tolerances.items() if k in known}
    return replace(DEFAULT, **kw)


def _check_tolerances(cfg: RunConfig) -> dict:
    known = set(asdict(DEFAULT))
    return {k: v for k, v in cfg.tolerances.items() if k not in known}


def _write_mesh(cfg: RunConfig, mesh, report: ValidationReport | None, stem: str = "mesh"):
    if not cfg.out:
        return
    for fmt in cfg.formats:
        export_mesh(mesh, os.path.join(cfg.out, f"{stem}.{fmt}"), fmt, cfg.singular)
    if report is not None:
        with open(os.path.join(cfg.out, "report.json"), "w", newline="\n") as fh:
            fh.write(report.dumps() + "\n")


def _finish(report: ValidationReport, extra: dict | None = None) -> int:
    print(report.summary())
    if extra:
        print(_dump(extra))
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# subcommands


def cmd_surface(cfg: RunConfig, checks) -> int:
    doc = _load_json(cfg.inputs[0])
    if doc.get("family") == "revolution":
        return _surface_revolution(cfg, doc, checks)
    P = parse_potential(doc)
    domain = dict(doc.get("domain", {"type": "rect", "x": [-0.5, 0.5], "y": [-0.5, 0.5]}))
    grid = dict(doc.get("grid", {}))
    grid.update(cfg.grid)
    grid.setdefault("nx", 41), grid.setdefault("ny", 41)
    grid.setdefault("nr", 41), grid.setdefault("ntheta", 48)
    G = GridSpec.from_json(domain, grid)
    pol = dict(doc.get("policy", {}))
    pol.update(cfg.policy)
    policy = LoopBandPolicy(**pol)
    theta = cfg.theta if cfg.theta is not None else float(doc.get("lambda0_angle", 0.0))
    lam0 = complex(np.cos(theta), np.sin(theta))
    mesh = build_surface(P, G, initial_loop(doc.get("initial")), lam0, policy, _tolerances(cfg))
    if checks is None:
        checks = doc.get("checks", SURFACE_CHECKS)
    margin = cfg.margin if cfg.margin is not None else int(doc.get("check_margin", 0))
    report = validate_mesh(mesh, checks, _check_tolerances(cfg), margin=margin)
    _write_mesh(cfg, mesh, report)
    extra = {"cells": {k: int(v) for k, v in zip(*np.unique(mesh.cell.astype(str), return_counts=True))},
             "flagged": int(mesh.flagged.sum())}
    return _finish(report, extra)


def _surface_revolution(cfg: RunConfig, doc: dict, checks) -> int:
    params = RevolutionParams(float(doc["a"]), float(doc["b"]), float(doc.get("c", 0.0)))
    grid = dict(doc.get("grid", {}))
    grid.update(cfg.grid)
    G = GridSpec.from_json(doc["domain"], grid)
    theta = cfg.theta if cfg.theta is not None else float(doc.get("lambda0_angle", 0.0))
    mesh = revolution_mesh(params, G, complex(np.cos(theta), np.sin(theta)),
                           band=int(cfg.policy.get("max_band", 40)))
    report = validate_mesh(mesh, checks or doc.get("checks", ("mean_curvature",)),
                           _check_tolerances(cfg))
    _write_mesh(cfg, mesh, report)
    return _finish(report, {"axis": axis_classify(params.a, params.b, params.c), "H": params.H})


def cmd_factor(cfg: RunConfig) -> int:
    doc = _load_json(cfg.inputs[0])
    X = MatrixLoop.from_json(doc.get("loop", doc))
    res = iwasawa_kernel(X, _tolerances(cfg))
    out = {"F": res.F.trimmed(1e-15).to_json(), "B": res.B.trimmed(1e-15).to_json(),
           "component_sign": res.component_sign, "rho0": res.rho0,
           "conditioning": res.conditioning, "kernel_dim": res.kernel_dim,
           "residual": res.residual, "tau_residual": res.tau_residual}
    print(_emit(cfg, "iwasawa.json", out))
    return 0


def cmd_classify_loop(cfg: RunConfig) -> int:
    doc = _load_json(cfg.inputs[0])
    X = MatrixLoop.from_json(doc.get("loop", doc))
    cc = classify_cell(X, tol=_tolerances(cfg))
    ev = {k: v for k, v in cc.evidence.items() if isinstance(v, (int, float, str, bool))}
    print(_emit(cfg, "cell.json", {"variant": cc.variant, "evidence": ev}))
    return 0


def cmd_classify(cfg: RunConfig, p, q, v0) -> int:
    doc = {"input": {"p": p, "q": q, "v0": v0}}
    try:
        doc["representative"] = asdict(moduli_normalize(p, q, v0))
        doc["member"] = True
    except NotInR as exc:
        doc["member"], doc["error"] = False, f"NotInR: {exc}"
    print(_emit(cfg, "moduli.json", doc))
    return 0 if doc["member"] else 1


def cmd_revolution(cfg: RunConfig, a, b, c, extent, checks) -> int:
    params = RevolutionParams(a, b, c)
    n = int(cfg.grid.get("nx", 41))
    G = GridSpec.rect((-extent, extent), (-extent, extent), n, int(cfg.grid.get("ny", n)))
    lam0 = cfg.lambda0 if cfg.lambda0 is not None else 1.0
    mesh = revolution_mesh(params, G, lam0, band=int(cfg.policy.get("max_band", 40)))
    tol = {"mean_curvature": 1e-3}
    tol.update(_check_tolerances(cfg))
    report = validate_mesh(mesh, checks or ("mean_curvature", "gauss", "metric"), tol)
    _write_mesh(cfg, mesh, report)
    return _finish(report, {"axis": axis_classify(a, b, c), "H": params.H})


def cmd_smyth(cfg: RunConfig, c, k, init, radius, checks) -> int:
    P = smyth_potential(c, k)
    nr = int(cfg.grid.get("nr", 51))
    nt = int(cfg.grid.get("ntheta", 12 * (k + 2)))
    G = GridSpec.polar(radius, nr, nt)
    lam0 = cfg.lambda0 if cfg.lambda0 is not None else 1.0
    policy = LoopBandPolicy(**cfg.policy)
    mesh = build_surface(P, G, initial_loop(init), lam0, policy, _tolerances(cfg))
    if checks is None:
        checks = SMYTH_CHECKS if init == "identity" else ()
    report = validate_mesh(mesh, checks, _check_tolerances(cfg))
    _write_mesh(cfg, mesh, report)
    centre = mesh.vertex_record(0, 0)
    extra = {"centre": {"cell": centre["cell"], "point": centre["point"]},
             "flagged": int(mesh.flagged.sum()),
             "cells": {k: int(v) for k, v in zip(*np.unique(mesh.cell.astype(str), return_counts=True))}}
    return _finish(report, extra)


def cmd_validate(cfg: RunConfig, checks) -> int:
    path = cfg.inputs[0]
    if os.path.isdir(path):
        path = os.path.join(path, "mesh.json")
    if not os.path.exists(path):
        raise UsageError(f"no mesh JSON at {path}")
    mesh = mesh_from_json(path)
    if checks is None:
        checks = SMYTH_CHECKS if "smyth" in (mesh.potential.metadata if mesh.potential else {}) \
            else SURFACE_CHECKS
    report = validate_mesh(mesh, checks, _check_tolerances(cfg), margin=cfg.margin or 0)
    if cfg.out:
        with open(os.path.join(cfg.out, "report.json"), "w", newline="\n") as fh:
            fh.write(report.dumps() + "\n")
    return _finish(report)


# ---------------------------------------------------------------------------
# argument parsing


def _kv(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k, float(v) if any(ch in v for ch in ".eE") else int(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{k}: not a number: {v!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--lambda0", type=float, default=None, metavar="THETA",
                        help="spectral angle theta, lambda0 = exp(i theta)")
    common.add_argument("--out", default=None, help="output directory for artifacts")
    common.add_argument("--format", dest="formats", action="append", choices=("obj", "ply", "json"),
                        help="mesh formats to write (repeatable; default obj and json)")
    common.add_argument("--singular", choices=("hole", "clamp"), default="hole",
                        help="drop faces at flagged vertices (hole) or keep them (clamp)")
    common.add_argument("--grid", action="append", type=_kv, default=[], metavar="KEY=N",
                        help="grid override, e.g. nx=61 or nr=51")
    common.add_argument("--policy", action="append", type=_kv, default=[], metavar="KEY=V",
                        help="band policy override: max_band, tail_tol")
    common.add_argument("--tol", action="append", type=_kv, default=[], metavar="KEY=V",
                        help="tolerance override (numerical tolerances or check names)")
    common.add_argument("--check", dest="checks", action="append", default=None,
                        help="check to run (repeatable)")
    common.add_argument("--margin", type=int, default=None,
                        help="exclude vertices within this many steps of flagged ones from checks")
    common.add_argument("--seed", type=int, default=0)

    ap = argparse.ArgumentParser(prog="minkdpw", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    s = sub.add_parser("surface", parents=[common], help="build a surface from a potential")
    s.add_argument("input")
    s = sub.add_parser("factor", parents=[common], help="Iwasawa splitting of a loop")
    s.add_argument("input")
    s = sub.add_parser("classify-loop", parents=[common], help="cell class of a loop")
    s.add_argument("input")
    s = sub.add_parser("classify", parents=[common], help="moduli representative of (p, q, v0)")
    for name in ("--p", "--q", "--v0"):
        s.add_argument(name, type=float, required=True)
    s = sub.add_parser("revolution", parents=[common], help="rotational surface")
    for name in ("--a", "--b", "--c"):
        s.add_argument(name, type=float, required=True)
    s.add_argument("--extent", type=float, default=0.25, help="half width of the square domain")
    s = sub.add_parser("smyth", parents=[common], help="Smyth-type surface on a disk")
    s.add_argument("--c", type=float, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--init", choices=("identity", "omega1", "omega2"), default="identity")
    s.add_argument("--radius", type=float, default=0.5)
    s = sub.add_parser("validate", parents=[common], help="re-run checks on an exported mesh")
    s.add_argument("input")
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = RunConfig(ns.command, [getattr(ns, "input", None)] if hasattr(ns, "input") else [],
                        ns.lambda0, dict(ns.grid), dict(ns.policy), dict(ns.tol), ns.out,
                        tuple(ns.formats or ("obj", "json")), ns.singular, ns.seed, ns.margin)
        _prepare_out(cfg)
        np.random.seed(cfg.seed)
        if ns.command == "surface":
            return cmd_surface(cfg, ns.checks)
        if ns.command == "factor":
            return cmd_factor(cfg)
        if ns.command == "classify-loop":
            return cmd_classify_loop(cfg)
        if ns.command == "classify":
            return cmd_classify(cfg, ns.p, ns.q, ns.v0)
        if ns.command == "revolution":
            return cmd_revolution(cfg, ns.a, ns.b, ns.c, ns.extent, ns.checks)
        if ns.command == "smyth":
            return cmd_smyth(cfg, ns.c, ns.k, ns.init, ns.radius, ns.checks)
        return cmd_validate(cfg, ns.checks)
    except (UsageError, SchemaError, KeyError) as exc:
        print(f"minkdpw: error: {exc}", file=sys.stderr)
        return 2
    except MinkDPWError as exc:
        print(f"minkdpw: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
