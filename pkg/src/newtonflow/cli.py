"""Command-line front end: ``newtonflow <command> --input FILE ...``.

Exit codes: 0 success (or verdict stable), 1 degenerate, 2 undecided or
numerical failure, 3 invalid input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import flow as flow_mod
from . import stability as stab_mod
from ._io import InputError, dumps, function_from_json, lattice_from_json, load_json, write_atomic
from .efun import DivisorError
from .equilibria import classify, critical_points, equilibria_to_json
from .flow import FlowField, integrate
from .lattice import LatticeError
from .portrait import build_portrait, export_json, export_svg
from .stability import PerturbationConfig, PerturbationError, certify, perturb_to_generic
from .weierstrass import PoleError

EXIT_OK, EXIT_DEGENERATE, EXIT_UNDECIDED, EXIT_INVALID = 0, 1, 2, 3

# --tol-<name> flags and their defaults
TOLERANCES = {
    "rtol": flow_mod.RTOL,
    "atol": flow_mod.ATOL,
    "capture": flow_mod.CAPTURE_RADIUS,
    "hit-radius": stab_mod.HIT_RADIUS,
    "hit-arg": stab_mod.HIT_ARG_TOL,
}

CONFIG_KEYS = {"command", "input", "output", "seed", "epsilon", "density", "form", "z", "tolerances"}


def _tols(args) -> dict:
    return {k: getattr(args, "tol_" + k.replace("-", "_")) for k in TOLERANCES}


def _integrate_kwargs(t: dict) -> dict:
    return {"rtol": t["rtol"], "atol": t["atol"], "capture_radius": t["capture"]}


def _trace_kwargs(t: dict) -> dict:
    out = _integrate_kwargs(t)
    out.update(hit_radius=t["hit-radius"], hit_arg_tol=t["hit-arg"])
    return out


def _parse_z(text: str) -> complex:
    try:
        re_, im = text.split(",")
        return complex(float(re_), float(im))
    except ValueError as exc:
        raise InputError(f"expected 're,im', got {text!r}") from exc


def _c(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _emit(args, obj) -> None:
    text = dumps(obj)
    if args.output:
        write_atomic(args.output, text)
    else:
        sys.stdout.write(text)


# -- commands --------------------------------------------------------------


def cmd_reduce(args, doc, tols):
    L = lattice_from_json(doc)
    red, M = L.reduced
    out = red.to_json()
    out["tau"] = _c(red.tau)
    out["matrix"] = M.tolist()
    _emit(args, out)
    return EXIT_OK


def cmd_build(args, doc, tols):
    f = function_from_json(doc)
    d = f.divisor
    out = f.to_json()
    out_meta = {
        "order": d.order,
        "A": d.A,
        "B": d.B,
        "K": d.K,
        "lambda0": _c(d.lambda0),
        "lambda0_index": list(d.lambda0_index),
        "b_prime": _c(f.b_prime),
    }
    _emit(args, {"function": out, "divisor": out_meta})
    return EXIT_OK


def cmd_eval(args, doc, tols):
    f = function_from_json(doc)
    rows = []
    for text in args.z or []:
        z = _parse_z(text)
        F, F1, _ = f.derivs(z)
        try:
            dw = _c(f.log_deriv(z))
        except PoleError:  # w' has poles at the zeros of f
            dw = None
        rows.append({"z": _c(z), "f": _c(F), "df": _c(F1), "dw": dw})
    _emit(args, {"values": rows})
    return EXIT_OK


def cmd_critical_points(args, doc, tols):
    f = function_from_json(doc)
    _emit(args, {"critical_points": equilibria_to_json(critical_points(f))})
    return EXIT_OK


def cmd_classify(args, doc, tols):
    f = function_from_json(doc)
    field = FlowField(f)
    _emit(args, {"equilibria": [classify(field, e).to_json() for e in field.equilibria]})
    return EXIT_OK


def cmd_certify(args, doc, tols):
    f = function_from_json(doc)
    cert = certify(f, seed=args.seed, **_trace_kwargs(tols))
    out = cert.to_json()
    out["tolerances"] = tols
    _emit(args, out)
    return cert.exit_code


def cmd_perturb(args, doc, tols):
    f = function_from_json(doc)
    try:
        cfg = PerturbationConfig(args.epsilon, args.seed)
        cfg.check(f)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    try:
        g, cert = perturb_to_generic(f, cfg)
    except PerturbationError as exc:
        out = {"error": str(exc), "certificate": exc.certificate.to_json() if exc.certificate else None}
        _emit(args, out)
        return EXIT_UNDECIDED
    out = {"function": g.to_json(), "certificate": cert.to_json(), "epsilon": args.epsilon, "seed": args.seed}
    _emit(args, out)
    return cert.exit_code


def cmd_portrait(args, doc, tols):
    f = function_from_json(doc)
    if args.density < 0:
        raise InputError("density must be >= 0")
    field = FlowField(f)
    cert = certify(f, seed=args.seed, **_trace_kwargs(tols))
    p = build_portrait(field, args.density, cert, **_integrate_kwargs(tols))
    svg = export_svg(p)
    data = export_json(p)
    data["tolerances"] = tols
    if args.output:
        base, ext = os.path.splitext(args.output)
        svg_path = args.output if ext.lower() == ".svg" else base + ".svg"
        write_atomic(svg_path, svg)
        write_atomic(os.path.splitext(svg_path)[0] + ".json", json.dumps(data, indent=1) + "\n")
    else:
        sys.stdout.write(svg)
    return EXIT_OK


def cmd_field(args, doc, tols):
    f = function_from_json(doc)
    field = FlowField(f, args.form)
    if args.trace:
        tr = integrate(field, _parse_z(args.trace), args.direction, **_integrate_kwargs(tols))
        text = tr.to_csv()
        if args.output:
            write_atomic(args.output, text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    rows = []
    for text in args.z or []:
        z = _parse_z(text)
        rows.append({"z": _c(z), "velocity": _c(field.velocity(z)), "jacobian": np.asarray(field.jacobian(z)).tolist()})
    _emit(args, {"form": args.form, "values": rows})
    return EXIT_OK


COMMANDS = {
    "reduce": cmd_reduce,
    "build": cmd_build,
    "eval": cmd_eval,
    "critical-points": cmd_critical_points,
    "classify": cmd_classify,
    "certify": cmd_certify,
    "perturb": cmd_perturb,
    "portrait": cmd_portrait,
    "field": cmd_field,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="newtonflow", description="Elliptic Newton flows")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--input", "-i", help="JSON file, inline JSON, or - for stdin")
        p.add_argument("--config", help="run configuration JSON (strict keys)")
        p.add_argument("--output", "-o", help="output path (written atomically)")
        p.add_argument("--seed", type=int, default=0)
        for tol, default in TOLERANCES.items():
            p.add_argument(f"--tol-{tol}", type=float, default=default)
        if name == "perturb":
            p.add_argument("--epsilon", type=float, default=1e-3)
        if name == "portrait":
            p.add_argument("--density", type=int, default=8)
        if name in ("eval", "field"):
            p.add_argument("--z", action="append", help="evaluation point 're,im' (repeatable)")
        if name == "field":
            p.add_argument("--form", choices=flow_mod.FORMS, default="pq")
            p.add_argument("--trace", help="integrate from 're,im' and write trajectory CSV")
            p.add_argument("--direction", choices=("forward", "backward"), default="forward")
    return parser


def _apply_config(args, path):
    cfg = load_json(path)
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise InputError(f"unknown config key(s): {sorted(unknown)}")
    if "command" in cfg and cfg["command"] != args.command:
        raise InputError(f"config is for command {cfg['command']!r}")
    for key in ("input", "output", "seed", "epsilon", "density", "form", "z"):
        if key in cfg:
            setattr(args, key, cfg[key])
    tols = cfg.get("tolerances", {})
    if not isinstance(tols, dict):
        raise InputError("tolerances must be an object")
    bad = set(tols) - set(TOLERANCES)
    if bad:
        raise InputError(f"unknown tolerance(s): {sorted(bad)}")
    for k, v in tols.items():
        setattr(args, "tol_" + k.replace("-", "_"), float(v))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            _apply_config(args, args.config)
        if not args.input:
            raise InputError("--input is required")
        doc = load_json(args.input)
        return COMMANDS[args.command](args, doc, _tols(args))
    except (InputError, DivisorError, LatticeError) as exc:
        print(f"newtonflow: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ArithmeticError as exc:
        print(f"newtonflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_UNDECIDED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
