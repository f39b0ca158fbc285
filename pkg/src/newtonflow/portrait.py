"""Phase portraits: separatrix skeleton, basin fillers, SVG and JSON export."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .efun import EllipticFunction
from .equilibria import Equilibrium, classify, taylor_coefficient
from .flow import FlowField, IntegrationError, Trajectory, integrate
from .lattice import Lattice
from .stability import HIT_ARG_TOL, HIT_RADIUS, SEPARATRIX_OFFSET, stable_seeds, unstable_seeds

__all__ = [
    "Portrait",
    "build_portrait",
    "split_at_wraps",
    "export_svg",
    "export_json",
    "portrait_from_json",
    "SCHEMA",
]

SCHEMA = "portrait/1"
FILLER_RADIUS = 0.02  # cell-relative seed distance from a zero


@dataclass
class Portrait:
    function: EllipticFunction
    equilibria: list[Equilibrium]
    separatrices: list[Trajectory]
    fillers: list[Trajectory]
    density: int = 0
    certificate: dict | None = None
    meta: dict = dc_field(default_factory=dict)

    @property
    def lattice(self) -> Lattice:
        return self.function.lattice

    @property
    def connections(self) -> list[Trajectory]:
        return [s for s in self.separatrices if s.meta.get("connection")]

    @property
    def undecided(self) -> list[Trajectory]:
        return [s for s in self.separatrices if s.status not in ("converged", "connection")]

    def census(self) -> dict:
        out = {"zero": 0, "pole": 0, "critical": 0}
        for e in self.equilibria:
            out[e.kind] += e.multiplicity
        return out


# -- construction ----------------------------------------------------------


def _index(eqs, e):
    for i, x in enumerate(eqs):
        if x is e:
            return i
    for i, x in enumerate(eqs):
        if x == e:
            return i
    return None


def _separatrix_seeds(field, s: Equilibrium):
    """``(seed, role)`` pairs for all separatrices of a saddle."""
    if s.multiplicity == 1:
        return [(z, "unstable") for z in unstable_seeds(field, s)] + [
            (z, "stable") for z in stable_seeds(field, s)
        ]
    c = classify(field, s)
    h = SEPARATRIX_OFFSET * field.lattice.scale_length
    out = [(s.location + h * np.exp(1j * a), "unstable") for a in c.unstable_directions]
    out += [(s.location + h * np.exp(1j * a), "stable") for a in c.stable_directions]
    return out


def _trace(field, seed, direction, eqs, saddles, source, **kw):
    try:
        tr = integrate(
            field,
            seed,
            direction,
            equilibria=eqs,
            targets=saddles,
            exclude=source,
            hit_radius=HIT_RADIUS,
            hit_arg_tol=HIT_ARG_TOL,
            **kw,
        )
    except IntegrationError as exc:
        tr = exc.trajectory
    return tr


def _filler_args(sep_args, density):
    """``density`` arg values spread over the circle, avoiding separatrix values."""
    base = sep_args[0] if sep_args else 0.0
    out = []
    for j in range(density):
        th = base + 2 * math.pi * (j + 0.5) / density
        for _ in range(8):
            gap = min((abs((th - a + math.pi) % (2 * math.pi) - math.pi) for a in sep_args), default=1.0)
            if gap > 1e-3:
                break
            th += 1e-2
        out.append(th)
    return out


def _join(back: Trajectory, fwd: Trajectory) -> Trajectory:
    """One orbit from a backward and a forward trace sharing their first sample."""
    t = np.concatenate([-back.t[::-1], fwd.t[1:]])
    z = np.concatenate([back.z[::-1], fwd.z[1:]])
    v = np.concatenate([-back.v[::-1], fwd.v[1:]])
    absf = np.concatenate([back.absf[::-1], fwd.absf[1:]])
    argf = np.concatenate([back.argf[::-1], fwd.argf[1:] - fwd.argf[0] + back.argf[0]])
    status = "converged" if back.status == "converged" and fwd.status == "converged" else "budget"
    tr = Trajectory(back.lattice, t, z, v, absf, argf, "both", status, fwd.endpoint)
    tr.meta["origin"] = back.endpoint
    return tr


def build_portrait(field: FlowField, density: int = 8, certificate=None, **kw) -> Portrait:
    """Separatrices of every saddle plus ``density`` filler orbits per zero."""
    if density < 0:
        raise ValueError("density must be >= 0")
    if field.form == "meromorphic":
        field = field.with_form("pq")
    f = field.f
    L = f.lattice
    eqs = field.equilibria
    saddles = [e for e in eqs if e.kind == "critical"]
    seps = []
    for s in saddles:
        for seed, role in _separatrix_seeds(field, s):
            direction = "forward" if role == "unstable" else "backward"
            tr = _trace(field, seed, direction, eqs, saddles, s, **kw)
            tr.argf = tr.argf - tr.argf[0] + _branch(s.arg_value, tr.argf[0])
            hit = tr.endpoint is not None and tr.endpoint.kind == "critical"
            tr.meta.update(role=role, source=_index(eqs, s), connection=bool(hit))
            seps.append(tr)
    fillers = []
    if density:
        locs = np.array([e.location for e in eqs])
        for zi, e in enumerate(eqs):
            if e.kind != "zero":
                continue
            arriving = [
                float(tr.argf[-1]) for tr in seps
                if tr.meta["role"] == "unstable" and tr.endpoint is e
            ]
            others = np.delete(locs, zi)
            near = float(np.min(L.distance(e.location, others))) if len(others) else L.scale_length
            rho = min(FILLER_RADIUS * L.scale_length, 0.25 * near)
            n = e.multiplicity
            kappa = taylor_coefficient(f, e.location, n, radius=0.5 * rho)
            for j, th in enumerate(_filler_args(arriving, density)):
                phi = (th - np.angle(kappa) + 2 * math.pi * (j % n)) / n
                seed = e.location + rho * np.exp(1j * phi)
                back = _trace(field, seed, "backward", eqs, [], None, **kw)
                fwd = _trace(field, seed, "forward", eqs, [], None, **kw)
                tr = _join(back, fwd)
                tr.meta.update(role="filler", target=zi, arg=float(th))
                fillers.append(tr)
    cert = certificate.to_json() if hasattr(certificate, "to_json") else certificate
    return Portrait(f, list(eqs), seps, fillers, density, cert)


def _branch(a, b):
    if not math.isfinite(a):
        return b
    return a + 2 * math.pi * round((b - a) / (2 * math.pi))


# -- wrapping --------------------------------------------------------------


def split_at_wraps(lattice: Lattice, z) -> list[np.ndarray]:
    """Cut an unwrapped polyline into pieces inside the closed period cell.

    Each boundary crossing ends one piece and starts the next at the
    congruent point on the opposite edge.
    """
    z = np.asarray(z, dtype=complex)
    if len(z) == 0:
        return []
    t1, t2 = lattice.to_bary(z)
    P = np.array([t1[0], t2[0]])
    cell = np.floor(P)
    pieces = []
    cur = [P - cell]
    for i in range(1, len(z)):
        Q = np.array([t1[i], t2[i]])
        for _ in range(16):
            rel = Q - cell
            if np.all(rel >= 0) and np.all(rel <= 1):
                break
            d = Q - P
            s_best, axis, step = math.inf, None, 0
            for k in range(2):
                if d[k] > 0 and rel[k] > 1:
                    s = (cell[k] + 1 - P[k]) / d[k]
                    if s < s_best:
                        s_best, axis, step = s, k, 1
                elif d[k] < 0 and rel[k] < 0:
                    s = (cell[k] - P[k]) / d[k]
                    if s < s_best:
                        s_best, axis, step = s, k, -1
            if axis is None:
                break
            X = P + min(max(s_best, 0.0), 1.0) * d
            Xr = X - cell
            Xr[axis] = 1.0 if step > 0 else 0.0
            cur.append(np.clip(Xr, 0, 1))
            pieces.append(np.array(cur))
            cell = cell.copy()
            cell[axis] += step
            Xn = X - cell
            Xn[axis] = 0.0 if step > 0 else 1.0
            cur = [np.clip(Xn, 0, 1)]
            P = X
        cur.append(np.clip(Q - cell, 0, 1))
        P = Q
    pieces.append(np.array(cur))
    return [lattice.from_bary(p[:, 0], p[:, 1]) for p in pieces if len(p) >= 2]


# -- export ----------------------------------------------------------------


def _traj_json(tr: Trajectory, eqs) -> dict:
    meta = {}
    for k, v in tr.meta.items():
        if isinstance(v, Equilibrium):
            meta[k] = _index(eqs, v)
        elif isinstance(v, (int, float, str, bool)) or v is None:
            meta[k] = v
    return {
        "direction": tr.direction,
        "status": tr.status,
        "endpoint": None if tr.endpoint is None else _index(eqs, tr.endpoint),
        "t": tr.t.tolist(),
        "re": tr.z.real.tolist(),
        "im": tr.z.imag.tolist(),
        "vre": tr.v.real.tolist(),
        "vim": tr.v.imag.tolist(),
        "absf": tr.absf.tolist(),
        "argf": tr.argf.tolist(),
        "meta": meta,
    }


def _traj_from_json(L, d, eqs) -> Trajectory:
    ep = d["endpoint"]
    return Trajectory(
        L,
        np.array(d["t"], dtype=float),
        np.array(d["re"], dtype=float) + 1j * np.array(d["im"], dtype=float),
        np.array(d["vre"], dtype=float) + 1j * np.array(d["vim"], dtype=float),
        np.array(d["absf"], dtype=float),
        np.array(d["argf"], dtype=float),
        d["direction"],
        d["status"],
        None if ep is None else eqs[ep],
        dict(d["meta"]),
    )


def export_json(p: Portrait) -> dict:
    """Lossless JSON document for a portrait."""
    eqs = p.equilibria
    return {
        "schema": SCHEMA,
        "function": p.function.to_json(),
        "density": p.density,
        "equilibria": [e.to_json() for e in eqs],
        "separatrices": [_traj_json(t, eqs) for t in p.separatrices],
        "fillers": [_traj_json(t, eqs) for t in p.fillers],
        "certificate": p.certificate,
    }


def portrait_from_json(d: dict) -> Portrait:
    from ._io import function_from_json

    if d.get("schema") != SCHEMA:
        raise ValueError(f"unsupported portrait schema {d.get('schema')!r}")
    f = function_from_json(d["function"])
    eqs = [Equilibrium.from_json(e) for e in d["equilibria"]]
    L = f.lattice
    return Portrait(
        f,
        eqs,
        [_traj_from_json(L, t, eqs) for t in d["separatrices"]],
        [_traj_from_json(L, t, eqs) for t in d["fillers"]],
        int(d["density"]),
        d.get("certificate"),
    )


def _fmt(x: float) -> str:
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


def export_svg(p: Portrait, size: int = 600, margin: int = 30, labels: bool = True) -> str:
    """SVG 1.1 drawing of the portrait inside the period cell."""
    L = p.lattice
    w1, w2 = L.periods
    corners = np.array([0, w1, w1 + w2, w2])
    xmin, xmax = corners.real.min(), corners.real.max()
    ymin, ymax = corners.imag.min(), corners.imag.max()
    k = (size - 2 * margin) / max(xmax - xmin, ymax - ymin)
    width = int(math.ceil(k * (xmax - xmin) + 2 * margin))
    height = int(math.ceil(k * (ymax - ymin) + 2 * margin))

    def xy(z):
        return margin + k * (z.real - xmin), height - margin - k * (z.imag - ymin)

    def path(zs):
        return " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in (xy(z) for z in zs))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect x="0" y="0" width="100%" height="100%" fill="white"/>',
        f'<polygon class="cell" points="{path(corners)}" fill="none" stroke="black" stroke-width="1"/>',
    ]
    # identified edges: one chevron on the w1 sides, two on the w2 sides
    for start, edge, other, count in ((0, w1, w2, 1), (0, w2, w1, 2)):
        for off in (0, other):
            for j in range(count):
                mid = start + off + edge * (0.5 + 0.03 * (j - (count - 1) / 2))
                u = edge / abs(edge) * 0.02 * L.scale_length
                nrm = u * 1j
                pts = [mid - u + nrm, mid, mid - u - nrm]
                out.append(f'<polyline class="edge-mark" points="{path(pts)}" fill="none" stroke="black"/>')

    def lines(trs, cls, color, width_):
        for tr in trs:
            c = "connection" if tr.meta.get("connection") else cls
            col = "#d62728" if c == "connection" else color
            wid = 2.5 if c == "connection" else width_
            zs = tr.closure()
            for piece in split_at_wraps(L, zs):
                out.append(
                    f'<polyline class="{c}" points="{path(piece)}" fill="none" stroke="{col}" '
                    f'stroke-width="{wid}"/>'
                )

    lines(p.fillers, "filler", "#999999", 0.8)
    lines([s for s in p.separatrices if s.meta.get("role") == "stable"], "stable", "#2ca02c", 1.2)
    lines([s for s in p.separatrices if s.meta.get("role") != "stable"], "unstable", "#1f77b4", 1.2)

    for i, e in enumerate(p.equilibria):
        x, y = xy(complex(L.normalize(e.location)))
        X, Y = _fmt(x), _fmt(y)
        m = e.multiplicity
        if e.kind == "zero":
            out.append(f'<circle class="zero" data-mult="{m}" cx="{X}" cy="{Y}" r="5" fill="white" stroke="black" stroke-width="1.5"/>')
        elif e.kind == "pole":
            out.append(f'<circle class="pole" data-mult="{m}" cx="{X}" cy="{Y}" r="5" fill="black" stroke="black"/>')
        else:
            out.append(
                f'<path class="saddle" data-mult="{m}" d="M {_fmt(x - 6)} {Y} H {_fmt(x + 6)} M {X} {_fmt(y - 6)} V {_fmt(y + 6)}" '
                'stroke="black" stroke-width="2"/>'
            )
        if labels:
            text = str(i + 1) + (f" (x{m})" if m > 1 else "")
            out.append(f'<text x="{_fmt(x + 7)}" y="{_fmt(y + 12)}" font-size="10" font-family="sans-serif">{text}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def dumps(p: Portrait) -> str:
    return json.dumps(export_json(p), indent=1)
