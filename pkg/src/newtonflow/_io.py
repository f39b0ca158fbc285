"""Strict JSON input/output helpers."""

from __future__ import annotations

import json
import os
import tempfile

from .efun import EllipticFunction, validate_divisor
from .lattice import Lattice, LatticeError, _pair

__all__ = ["InputError", "load_json", "lattice_from_json", "function_from_json", "write_atomic", "dumps"]


class InputError(ValueError):
    """Malformed or invalid input document."""


FUNCTION_KEYS = {"lattice", "zeros", "poles", "C", "shift"}
POINT_KEYS = {"z", "mult"}


def load_json(source: str):
    """Parse ``source``: inline JSON, ``-`` for stdin, or a file path."""
    import sys

    try:
        if source == "-":
            text = sys.stdin.read()
        elif source.lstrip().startswith(("{", "[")):
            text = source
        else:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        return json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read JSON input: {exc}") from exc


def _check_keys(d, allowed, required, what):
    if not isinstance(d, dict):
        raise InputError(f"{what} must be a JSON object")
    unknown = set(d) - allowed
    if unknown:
        raise InputError(f"unknown key(s) in {what}: {sorted(unknown)}")
    missing = set(required) - set(d)
    if missing:
        raise InputError(f"missing key(s) in {what}: {sorted(missing)}")


def lattice_from_json(d) -> Lattice:
    try:
        return Lattice.from_json(d)
    except (LatticeError, TypeError, ValueError) as exc:
        raise InputError(str(exc)) from exc


def _points(items, what):
    if not isinstance(items, list):
        raise InputError(f"{what} must be a list")
    out = []
    for it in items:
        _check_keys(it, POINT_KEYS, {"z"}, f"{what} entry")
        mult = it.get("mult", 1)
        if isinstance(mult, bool) or not isinstance(mult, int):
            raise InputError(f"multiplicity must be an integer, got {mult!r}")
        try:
            out.append((_pair(it["z"]), mult))
        except LatticeError as exc:
            raise InputError(str(exc)) from exc
    return out


def function_from_json(d) -> EllipticFunction:
    """Elliptic function from the divisor document (strict keys)."""
    _check_keys(d, FUNCTION_KEYS, {"lattice", "zeros", "poles"}, "divisor")
    L = lattice_from_json(d["lattice"])
    try:
        C = _pair(d["C"]) if "C" in d else 1.0
        shift = _pair(d["shift"]) if "shift" in d else 0.0
        div = validate_divisor(L, _points(d["zeros"], "zeros"), _points(d["poles"], "poles"))
        return EllipticFunction(div, C, shift)
    except InputError:
        raise
    except (LatticeError, ValueError) as exc:
        raise InputError(str(exc)) from exc


def dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and rename."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
