"""Config-driven command line front end.

Subcommands:
    simulate   integrate a system and write a trajectory CSV
    check      run the invariant suites and emit a JSON report
    coeffs     dump named coefficient arrays at a point as JSON
    presets    list the shipped example systems

Exit codes: 0 ok, 1 config error, 2 divergence, 3 regularity failure,
4 check failure.
"""
from __future__ import annotations

import argparse
import json
import sys as _sys
from importlib import resources
from typing import Optional

import numpy as np

from .algebroid import DegeneracyError, GeneralizedLieAlgebroid
from .checks import run_checks
from .dynamics import DivergenceError, integrate
from .expr import ExprError, compile_expression
from .geometry import RhoEtaConnection, berwald, curvature
from .mechanics import (
    ExternalForce,
    GhMorphism,
    Lagrangian,
    LagrangeMechanicalSystem,
    MechanicalSystem,
    RegularityError,
    canonical_connection,
    canonical_semispray,
    el_covector,
    energy,
    mechanical_semispray,
    ring_connection,
)
from .presets import PRESET_NAMES, PresetDescriptor, build
from .smooth import SmoothMap

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGENCE = 2
EXIT_REGULARITY = 3
EXIT_CHECK_FAILED = 4


class ConfigError(ValueError):
    pass


def _load_schema() -> dict:
    with resources.files("algmech.schema").joinpath("config.schema.json").open() as fh:
        return json.load(fh)


def _validate_config(cfg: dict):
    import jsonschema
    try:
        jsonschema.validate(cfg, _load_schema())
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config does not match schema: {exc.message}") from exc


def _expr_matrix(spec, shape, m, r, what):
    arr = np.empty(shape, dtype=object)
    flat_spec = np.asarray(spec, dtype=object)
    if flat_spec.shape != shape:
        raise ConfigError(f"{what} has shape {flat_spec.shape}, expected {shape}")
    for idx in np.ndindex(*shape):
        arr[idx] = compile_expression(str(flat_spec[idx]), m, r)
    return arr


def _matrix_fn(exprs, shape, pad):
    def fn(x):
        u = np.concatenate([np.asarray(x, dtype=float), np.zeros(pad)])
        out = np.empty(shape)
        for idx in np.ndindex(*shape):
            out[idx] = exprs[idx](u)
        return out
    return fn


def _bundle_fn(exprs, shape):
    def fn(u):
        out = np.empty(shape)
        for idx in np.ndindex(*shape):
            out[idx] = exprs[idx](u)
        return out
    return fn


def build_inline_system(spec: dict) -> PresetDescriptor:
    m = int(spec["m"])
    r = int(spec["r"])

    if "anchor" in spec:
        anchor_ex = _expr_matrix(spec["anchor"], (m, r), m, r, "anchor")
        anchor = _matrix_fn(anchor_ex, (m, r), r)
    else:
        eye = np.eye(m, r) if m else np.zeros((0, r))
        anchor = lambda kappa: eye

    if "structure" in spec:
        struct_ex = _expr_matrix(spec["structure"], (r, r, r), m, r, "structure")
        structure = _matrix_fn(struct_ex, (r, r, r), r)
    else:
        zero = np.zeros((r, r, r))
        structure = lambda kappa: zero

    A = GeneralizedLieAlgebroid(m=m, p=r, anchor=anchor, structure=structure,
                                h_map=SmoothMap.identity(m),
                                eta_map=SmoothMap.identity(m))

    if "g" in spec:
        g_ex = _expr_matrix(spec["g"], (r, r), m, r, "g")
        gmat = _matrix_fn(g_ex, (r, r), r)
        gh = GhMorphism(g=gmat, g_tilde=lambda k: np.linalg.inv(gmat(k)))
    else:
        gh = GhMorphism.identity(r)

    if "force" in spec:
        f_ex = _expr_matrix(spec["force"], (r,), m, r, "force")
        force = ExternalForce(f=_bundle_fn(f_ex, (r,)))
    else:
        force = ExternalForce.zero(r)

    if "lagrangian" in spec:
        Lfn = compile_expression(spec["lagrangian"], m, r)
        system = LagrangeMechanicalSystem(
            algebroid=A, lagrangian=Lagrangian(value=Lfn), force=force, gh=gh)
        kind = "lagrange"
        efn = lambda u: energy(system.lagrangian, u, m)
    elif "G" in spec:
        G_ex = _expr_matrix(spec["G"], (r,), m, r, "G")
        if "gamma" in spec:
            gam_ex = _expr_matrix(spec["gamma"], (r, r), m, r, "gamma")
            conn = RhoEtaConnection(gamma=_bundle_fn(gam_ex, (r, r)))
        else:
            conn = RhoEtaConnection.zero(r, r)
        system = MechanicalSystem(algebroid=A, force=force, conn=conn,
                                  G=_bundle_fn(G_ex, (r,)), gh=gh)
        kind = "mechanical"
        efn = None
    else:
        raise ConfigError("inline system needs either 'lagrangian' or 'G'")

    return PresetDescriptor(
        name="inline", system=system, kind=kind,
        default_state=(np.zeros(m), np.full(r, 0.5)),
        energy_fn=efn)


def load_descriptor(cfg: dict) -> PresetDescriptor:
    spec = cfg["system"]
    if "preset" in spec:
        name = spec["preset"]
        if name not in PRESET_NAMES:
            raise ConfigError(
                f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
        return build(name)
    return build_inline_system(spec)


def _read_config(args) -> dict:
    cfg: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config JSON parse error at line {exc.lineno}, column {exc.colno}: "
                f"{exc.msg}") from exc
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        _validate_config(cfg)
    if getattr(args, "preset", None):
        cfg["system"] = {"preset": args.preset}
    if "system" not in cfg:
        raise ConfigError("no system given: pass --preset or --config")
    for key in ("t1", "dt", "method", "out", "seed", "tol"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "x0", None) is not None or getattr(args, "y0", None) is not None:
        init = cfg.setdefault("initial", {})
        if args.x0 is not None:
            init["x"] = [float(v) for v in args.x0.split(",")] if args.x0 else []
        if args.y0 is not None:
            init["y"] = [float(v) for v in args.y0.split(",")]
    return cfg


def _initial_state(cfg: dict, desc: PresetDescriptor):
    x0, y0 = desc.default_state
    init = cfg.get("initial", {})
    if "x" in init:
        x0 = np.asarray(init["x"], dtype=float)
    if "y" in init:
        y0 = np.asarray(init["y"], dtype=float)
    m = desc.system.algebroid.m
    r = desc.system.algebroid.p
    if x0.size != m:
        raise ConfigError(f"initial x has size {x0.size}, expected {m}")
    if y0.size != r:
        raise ConfigError(f"initial y has size {y0.size}, expected {r}")
    return x0, y0


def _fmt(v: float) -> str:
    return repr(float(v))


def cmd_simulate(args) -> int:
    cfg = _read_config(args)
    desc = load_descriptor(cfg)
    x0, y0 = _initial_state(cfg, desc)
    t1 = float(cfg.get("t1", 10.0))
    dt = float(cfg.get("dt", 1e-3))
    method = cfg.get("method", "rk4")

    diagnostics = dict(desc.conserved)
    if desc.energy_fn is not None and desc.kind != "lagrange":
        diagnostics = {"E_L": desc.energy_fn, **diagnostics}
    try:
        traj = integrate(desc.system, (x0, y0), t1=t1, dt=dt, method=method,
                         diagnostics=diagnostics)
    except DivergenceError as exc:
        print(f"simulate: {exc}", file=_sys.stderr)
        return EXIT_DIVERGENCE
    except RegularityError as exc:
        print(f"simulate: {exc}", file=_sys.stderr)
        return EXIT_REGULARITY

    m = desc.system.algebroid.m
    r = desc.system.algebroid.p
    names = (["t"] + [f"x{i+1}" for i in range(m)] + [f"y{a+1}" for a in range(r)]
             + list(traj.diagnostics))
    lines = [",".join(names)]
    for k in range(len(traj)):
        row = [_fmt(traj.t[k])]
        row += [_fmt(v) for v in traj.x[k]]
        row += [_fmt(v) for v in traj.y[k]]
        row += [_fmt(traj.diagnostics[nm][k]) for nm in traj.diagnostics]
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    out = cfg.get("out")
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        _sys.stdout.write(text)
    return EXIT_OK


def cmd_check(args) -> int:
    cfg = _read_config(args)
    desc = load_descriptor(cfg)
    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    tol = float(cfg.get("tol", 1e-6))
    try:
        results = run_checks(desc, rng, tol_fd=tol)
    except (RegularityError, DegeneracyError) as exc:
        print(f"check: {exc}", file=_sys.stderr)
        return EXIT_REGULARITY
    report = {name: res.as_dict() for name, res in results.items()}
    text = json.dumps(report, indent=2, sort_keys=True)
    out = cfg.get("out")
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK if all(res.passed for res in results.values()) else EXIT_CHECK_FAILED


def cmd_coeffs(args) -> int:
    cfg = _read_config(args)
    desc = load_descriptor(cfg)
    x0, y0 = _initial_state(cfg, desc)
    u = np.concatenate([x0, y0])
    sys = desc.system
    A = sys.algebroid
    m = A.m

    doc: dict = {"point": {"x": x0.tolist(), "y": y0.tolist()}}
    try:
        if isinstance(sys, LagrangeMechanicalSystem):
            sc = canonical_semispray(sys, u)
            conn = canonical_connection(sys)
            doc["E_b"] = el_covector(sys, u).tolist()
            doc["combo"] = sc.combo.tolist()
            doc["G"] = sc.G.tolist()
            doc["E_L"] = energy(sys.lagrangian, u, m)
        else:
            conn = sys.conn
            doc["combo"] = mechanical_semispray(sys, u).tolist()
            doc["G"] = np.atleast_1d(np.asarray(sys.G(u), dtype=float)).tolist()
        doc["Gamma"] = conn.at(u).tolist()
        doc["Gamma_ring"] = ring_connection(conn, sys.force, sys.gh, A, u).tolist()
        doc["curvature"] = curvature(A, conn, u).tolist()
        dcn = berwald(conn, m, A.p, A.p)
        doc["berwald_H"] = np.asarray(dcn.Hv(u)).tolist()
    except RegularityError as exc:
        print(f"coeffs: {exc}", file=_sys.stderr)
        return EXIT_REGULARITY
    except DegeneracyError as exc:
        print(f"coeffs: {exc}", file=_sys.stderr)
        return EXIT_REGULARITY

    text = json.dumps(doc, indent=2, sort_keys=True)
    out = cfg.get("out")
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_presets(_args) -> int:
    for name in PRESET_NAMES:
        desc = build(name)
        print(f"{name:18s} {desc.kind:10s} {desc.notes}")
    return EXIT_OK


def _add_common(sp):
    sp.add_argument("--preset", help="name of a shipped system")
    sp.add_argument("--config", help="path to a JSON run configuration")
    sp.add_argument("--t1", type=float, help="end time")
    sp.add_argument("--dt", type=float, help="time step")
    sp.add_argument("--method", choices=["rk4", "euler"], help="integration scheme")
    sp.add_argument("--out", help="output path (default stdout)")
    sp.add_argument("--seed", type=int, help="seed for randomized checks")
    sp.add_argument("--tol", type=float, help="finite-difference tolerance override")
    sp.add_argument("--x0", help="comma-separated initial base point")
    sp.add_argument("--y0", help="comma-separated initial fibre point")


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="algmech",
        description="Simulate and certify mechanics on anchored frame bundles.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("simulate", cmd_simulate), ("check", cmd_check),
                     ("coeffs", cmd_coeffs), ("presets", cmd_presets)):
        sp = sub.add_parser(name)
        _add_common(sp)
        sp.set_defaults(fn=fn)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ExprError, KeyError, ValueError) as exc:
        print(f"{args.command}: configuration error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
