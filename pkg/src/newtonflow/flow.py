"""Newton vector fields of an elliptic function and their trajectories.

Three forms of the field are available:

``meromorphic``     dz/dt = -f / f'
``desingularized``  dz/dt = -conj(f') f / (1 + |f|^4)
``pq``              the same field written through ``f = p/q`` with entire
                    ``p``, ``q``; finite everywhere, zero at poles.

The desingularized and ``pq`` forms are the same function; the second is
what the integrator uses.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np

from .efun import EllipticFunction
from .lattice import Lattice
from .weierstrass import PoleError

__all__ = [
    "FORMS",
    "FlowField",
    "Trajectory",
    "IntegrationError",
    "CriticalPointError",
    "field_at",
    "jacobian_at",
    "integrate",
    "integrate_many",
    "newton_step",
    "potential",
    "hausdorff_distance",
]

FORMS = ("meromorphic", "desingularized", "pq")

RTOL = 1e-9
ATOL = 1e-12
CAPTURE_RADIUS = 1e-6  # cell-relative
MAX_ARC_CELLS = 50.0
MAX_STEPS = 10**6
SINGULAR = 1e12
CLAMP = 0.1  # step displacement <= CLAMP * distance to nearest equilibrium


class IntegrationError(RuntimeError):
    """Integration could not proceed (step-size underflow)."""

    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


class CriticalPointError(ArithmeticError):
    """The meromorphic field or a Newton step was evaluated at a critical point."""


class FlowField:
    """A Newton vector field of ``f`` in one of :data:`FORMS`."""

    def __init__(self, f: EllipticFunction, form: str = "pq"):
        if form not in FORMS:
            raise ValueError(f"unknown form {form!r}; expected one of {FORMS}")
        self.f = f
        self.form = form

    def __repr__(self):
        return f"FlowField(form={self.form!r}, f={self.f!r})"

    @property
    def lattice(self) -> Lattice:
        return self.f.lattice

    def with_form(self, form: str) -> "FlowField":
        out = FlowField(self.f, form)
        if "equilibria" in self.__dict__:
            out.__dict__["equilibria"] = self.__dict__["equilibria"]
        return out

    @cached_property
    def equilibria(self):
        from .equilibria import find_equilibria

        return find_equilibria(self.f)

    # -- velocity ----------------------------------------------------------

    def velocity(self, z):
        z = np.asarray(z, dtype=complex)
        if self.form == "meromorphic":
            F, F1, _ = self.f.derivs(z, check=False)
            # speeds beyond 1e12 cells mean we are sitting on a critical point
            zero = F == 0
            if np.any(~zero & (np.abs(F1) * SINGULAR * self.lattice.scale_length <= np.abs(F))):
                raise CriticalPointError("meromorphic Newton field at a critical point")
            with np.errstate(invalid="ignore", divide="ignore"):
                out = np.where(zero, 0, -F / F1)
        elif self.form == "desingularized":
            out = self._desingularized(z)
        else:
            p, p1, _, q, q1, _ = self.f.pq(z, order=1)
            out = _pq_field(p, p1, q, q1)
        return out if out.ndim else complex(out)

    __call__ = velocity

    def _desingularized(self, z):
        try:
            F, F1, _ = self.f.derivs(z, check=True)
        except PoleError:
            p, p1, _, q, q1, _ = self.f.pq(z, order=1)
            return _pq_field(p, p1, q, q1)
        a = np.abs(F)
        big = a > 1
        with np.errstate(all="ignore"):
            # large |f|: the dual expression with u = 1/f avoids overflow
            u = 1 / F
            du = -F1 * u * u
            dual = np.conj(du) * u / (1 + np.abs(u) ** 4)
            direct = -np.conj(F1) * F / (1 + a**4)
        return np.where(big, dual, direct)

    def velocity_and_value(self, z):
        """Velocity together with ``f(z)`` (``inf`` at poles)."""
        z = np.asarray(z, dtype=complex)
        if self.form == "meromorphic":
            F, F1, _ = self.f.derivs(z, check=False)
            return -F / F1, F
        p, p1, _, q, q1, _ = self.f.pq(z, order=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            fval = p / q
        return _pq_field(p, p1, q, q1), fval

    # -- jacobian ----------------------------------------------------------

    def jacobian(self, z):
        """Real 2x2 Jacobian of the field with respect to ``(Re z, Im z)``."""
        z = np.asarray(z, dtype=complex)
        if self.form == "meromorphic":
            F, F1, F2 = self.f.derivs(z, check=False)
            a = -1 + F * F2 / F1**2
            b = np.zeros_like(a)
        else:
            p, p1, p2, q, q1, q2 = self.f.pq(z, order=2)
            a, b = _pq_wirtinger(p, p1, p2, q, q1, q2)
        s, d = a + b, a - b
        J = np.empty(z.shape + (2, 2))
        J[..., 0, 0] = s.real
        J[..., 0, 1] = -d.imag
        J[..., 1, 0] = s.imag
        J[..., 1, 1] = d.real
        return J


def _pq_field(p, p1, q, q1):
    ap2 = (p * np.conj(p)).real
    aq2 = (q * np.conj(q)).real
    num = p * np.conj(p1) * aq2 - q * np.conj(q1) * ap2
    return -num / (ap2 * ap2 + aq2 * aq2)


def _pq_wirtinger(p, p1, p2, q, q1, q2):
    """``dF/dz`` and ``dF/dz-bar`` of the pq field."""
    cp, cq, cp1, cq1 = np.conj(p), np.conj(q), np.conj(p1), np.conj(q1)
    ap2 = (p * cp).real
    aq2 = (q * cq).real
    A = p * cp1 * aq2 - q * cq1 * ap2
    D = ap2 * ap2 + aq2 * aq2
    A_z = p1 * cp1 * aq2 + p * cp1 * q1 * cq - q1 * cq1 * ap2 - q * cq1 * p1 * cp
    A_zb = p * np.conj(p2) * aq2 - q * np.conj(q2) * ap2
    D_z = 2 * ap2 * p1 * cp + 2 * aq2 * q1 * cq
    D_zb = 2 * ap2 * p * cp1 + 2 * aq2 * q * cq1
    a = -(A_z * D - A * D_z) / (D * D)
    b = -(A_zb * D - A * D_zb) / (D * D)
    return a, b


def field_at(field: FlowField, z):
    return field.velocity(z)


def jacobian_at(field: FlowField, z):
    return field.jacobian(z)


# -- trajectories -----------------------------------------------------------


@dataclass
class Trajectory:
    """Samples of one integrated orbit.

    ``z`` holds unwrapped complex positions (consecutive samples are close
    in the plane); :attr:`points` gives the torus representatives.
    """

    lattice: Lattice
    t: np.ndarray
    z: np.ndarray
    v: np.ndarray
    absf: np.ndarray
    argf: np.ndarray
    direction: str
    status: str = "budget"
    endpoint: object = None
    meta: dict = dc_field(default_factory=dict)

    @property
    def arg_value(self) -> float:
        return float(self.argf[0])

    @property
    def points(self) -> np.ndarray:
        return self.lattice.normalize(self.z)

    @property
    def arc_length(self) -> float:
        return float(np.sum(np.abs(np.diff(self.z))))

    def closure(self) -> np.ndarray:
        """Samples plus the endpoint equilibrium, as an unwrapped polyline."""
        if self.endpoint is None:
            return self.z
        d = self.lattice.nearest_offset(self.endpoint.location, self.z[-1])
        return np.append(self.z, self.z[-1] + d)

    def to_csv(self) -> str:
        lines = ["t,re,im,absf,argf"]
        for t, z, a, g in zip(self.t, self.z, self.absf, self.argf):
            row = (float(t), float(z.real), float(z.imag), float(a), float(g))
            lines.append(",".join(repr(x) for x in row))
        return "\n".join(lines) + "\n"


# Dormand-Prince 5(4)
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_E = np.array(
    [71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


def _wrap(x):
    return (x + math.pi) % (2 * math.pi) - math.pi


def integrate(
    field: FlowField,
    z0: complex,
    direction: str = "forward",
    *,
    max_arc: float | None = None,
    max_steps: int = MAX_STEPS,
    t_end: float | None = None,
    rtol: float = RTOL,
    atol: float = ATOL,
    capture_radius: float | None = None,
    equilibria=None,
    targets=None,
    hit_radius: float = 1e-4,
    hit_arg_tol: float = 1e-5,
    exclude=None,
) -> Trajectory:
    """Adaptive Dormand-Prince integration of ``field`` from ``z0``.

    Without ``t_end`` the orbit runs until it enters the capture radius of an
    equilibrium of the admissible kind (zeros or critical points forward,
    poles or critical points backward) or the arc/step budget runs out.
    Steps are clamped to a tenth of the distance to the nearest equilibrium.

    ``targets`` (critical points) enable connection detection: entering
    ``hit_radius`` of one with ``|arg f|`` matching its critical value to
    ``hit_arg_tol`` ends the orbit with status ``"connection"``. ``exclude``
    is ignored as a target until the orbit has moved away from it.
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    sign = 1.0 if direction == "forward" else -1.0
    L = field.lattice
    scale = L.scale_length
    z = complex(z0)
    if not np.isfinite(z):
        raise ValueError("z0 must be finite")
    if max_arc is None:
        max_arc = MAX_ARC_CELLS * L.diameter
    cap = (CAPTURE_RADIUS if capture_radius is None else capture_radius) * scale

    if t_end is None:
        eqs = field.equilibria if equilibria is None else equilibria
    else:
        eqs = [] if equilibria is None else equilibria
    allowed = {"zero", "critical"} if sign > 0 else {"pole", "critical"}
    eq_loc = np.array([e.location for e in eqs], dtype=complex)
    eq_ok = np.array([e.kind in allowed for e in eqs], dtype=bool)

    tg = list(targets or [])
    tg_loc = np.array([e.location for e in tg], dtype=complex)
    tg_arg = np.array([e.arg_value for e in tg], dtype=float)
    armed = np.array([e is not exclude for e in tg], dtype=bool)

    def rhs(w):
        return sign * field.velocity(w)

    v, fval = field.velocity_and_value(z)
    v = sign * complex(v)
    ts, zs, vs = [0.0], [z], [v]
    absf, argf = [abs(fval)], [float(np.angle(fval))]
    t = 0.0
    arc = 0.0
    status = "budget"
    endpoint = None

    def nearest(w):
        if len(eq_loc) == 0:
            return math.inf, -1
        d = L.distance(w, eq_loc)
        i = int(np.argmin(d))
        return float(d[i]), i

    dist, _ = nearest(z)
    speed = abs(v)
    if speed == 0:
        h = 0.0
    else:
        h = 0.01 * min(L.diameter, dist if np.isfinite(dist) else L.diameter) / speed
    if t_end is not None:
        h = min(h, t_end) if h > 0 else t_end

    k = [0j] * 7
    steps = 0
    while steps < max_steps:
        if t_end is not None and t >= t_end:
            status = "time"
            break
        if speed == 0:
            status = "stalled"
            break
        if np.isfinite(dist) and t_end is None:
            h = min(h, CLAMP * dist / speed)
        if t_end is not None:
            h = min(h, t_end - t)
        if h <= 1e-14 * max(1.0, abs(t)):
            traj = _make(L, ts, zs, vs, absf, argf, direction, "underflow", None)
            raise IntegrationError("step size underflow", traj)
        k[0] = v
        for i in range(1, 7):
            zi = z + h * sum(_A[i][j] * k[j] for j in range(i) if _A[i][j] != 0)
            k[i] = rhs(zi)
        znew = z + h * sum(_B[j] * k[j] for j in range(7) if _B[j] != 0)
        errv = h * sum(_E[j] * k[j] for j in range(7) if _E[j] != 0)
        sc = atol + rtol * max(abs(z), abs(znew), scale)
        err = abs(errv) / sc
        if not np.isfinite(err):
            h *= 0.2
            steps += 1
            continue
        if err > 1.0:
            h *= max(0.2, 0.9 * err**-0.2)
            steps += 1
            continue
        # accepted
        t += h
        arc += abs(znew - z)
        z = znew
        vraw, fval = field.velocity_and_value(z)
        v = sign * complex(vraw)
        speed = abs(v)
        fval = complex(fval)
        ts.append(t)
        zs.append(z)
        vs.append(v)
        absf.append(abs(fval))
        argf.append(argf[-1] + _wrap(float(np.angle(fval)) - argf[-1]) if np.isfinite(fval) else argf[-1])
        steps += 1
        h *= min(5.0, 0.9 * err**-0.2) if err > 0 else 5.0

        dist, idx = nearest(z)
        if idx >= 0 and dist < cap and eq_ok[idx]:
            status = "converged"
            endpoint = eqs[idx]
            break
        if len(tg):
            dt = L.distance(z, tg_loc)
            if not armed.all():
                armed |= dt > 100 * hit_radius * scale
            close = (dt < hit_radius * scale) & armed
            if close.any():
                j = int(np.argmin(np.where(close, dt, np.inf)))
                if abs(_wrap(argf[-1] - tg_arg[j])) < hit_arg_tol:
                    status = "connection"
                    endpoint = tg[j]
                    break
        if arc > max_arc:
            status = "budget"
            break
    traj = _make(L, ts, zs, vs, absf, argf, direction, status, endpoint)
    traj.meta["steps"] = steps
    return traj


def _make(L, ts, zs, vs, absf, argf, direction, status, endpoint):
    return Trajectory(
        L,
        np.array(ts),
        np.array(zs, dtype=complex),
        np.array(vs, dtype=complex),
        np.array(absf),
        np.array(argf),
        direction,
        status,
        endpoint,
    )


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("NEWTONFLOW_THREADS", "1")))
    except ValueError:
        return 1


def integrate_many(field: FlowField, seeds, direction="forward", **kwargs) -> list[Trajectory]:
    """Integrate from several seeds; results are returned in seed order."""
    seeds = list(seeds)
    if field.form != "meromorphic" and kwargs.get("t_end") is None and kwargs.get("equilibria") is None:
        kwargs["equilibria"] = field.equilibria
    n = _threads()
    if n == 1 or len(seeds) < 2:
        return [integrate(field, s, direction, **kwargs) for s in seeds]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda s: integrate(field, s, direction, **kwargs), seeds))


# -- discrete Newton and the stream potential -------------------------------


def newton_step(f: EllipticFunction, z: complex, damping: float = 1.0) -> complex:
    """One damped Newton step ``z - t f(z)/f'(z)``."""
    fz = f.eval(z)
    if fz == 0:
        return complex(z)
    d = f.eval_deriv(z)
    if d == 0 or abs(d) < 1e-300:
        raise CriticalPointError("Newton step at a critical point")
    return complex(z - damping * fz / d)


def potential(f: EllipticFunction, z: complex) -> complex:
    """Complex stream potential ``w = -log f`` (principal branch)."""
    L = f.lattice
    d = np.min(L.distance(z, f.divisor.points))
    if f.shift == 0 and d < 1e-7 * L.scale_length:
        raise PoleError("potential evaluated at a zero or pole")
    fz = f.eval(z)
    if fz == 0:
        raise PoleError("potential evaluated at a zero")
    return complex(-np.log(fz))


# -- curve comparison -------------------------------------------------------


def _hermite(z0, z1, v0, v1, dt, s):
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * z0 + h10 * dt * v0 + h01 * z1 + h11 * dt * v1


def _point_to_curve(pts, traj_z, traj_v, traj_t, extra=None, sub=16):
    """Distance from each of ``pts`` to the cubic-Hermite curve through the samples."""
    # dense polyline from the Hermite interpolant
    s = np.linspace(0.0, 1.0, sub, endpoint=False)
    z0, z1 = traj_z[:-1, None], traj_z[1:, None]
    v0, v1 = traj_v[:-1, None], traj_v[1:, None]
    dt = np.diff(traj_t)[:, None]
    dense = _hermite(z0, z1, v0, v1, dt, s).ravel()
    dense = np.append(dense, traj_z[-1])
    if extra is not None:
        dense = np.append(dense, extra)
    a = dense[:-1]
    b = dense[1:]
    ab = b - a
    L2 = np.abs(ab) ** 2
    out = np.empty(len(pts))
    for i, p in enumerate(pts):
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.clip(((p - a) * np.conj(ab)).real / L2, 0, 1)
        u = np.where(L2 > 0, u, 0.0)
        out[i] = np.min(np.abs(a + u * ab - p))
    return out


def hausdorff_distance(ta: Trajectory, tb: Trajectory, map_b=None, sub: int = 64) -> float:
    """Hausdorff distance between two orbits (closures, unwrapped) in the plane.

    ``map_b`` maps the plane coordinates of ``tb`` into those of ``ta``
    (a complex-linear map ``z -> alpha z + beta`` is assumed, so velocities
    transform by ``alpha``).
    """
    za, zb = ta.z, tb.z
    vb = tb.v
    ea = ta.closure()[-1] if ta.endpoint is not None else None
    eb = tb.closure()[-1] if tb.endpoint is not None else None
    if map_b is not None:
        alpha, beta = map_b
        zb = alpha * zb + beta
        vb = alpha * vb
        eb = None if eb is None else alpha * eb + beta
    pa = za if ea is None else np.append(za, ea)
    pb = zb if eb is None else np.append(zb, eb)
    d1 = _point_to_curve(pa, zb, vb, tb.t, eb, sub)
    d2 = _point_to_curve(pb, za, ta.v, ta.t, ea, sub)
    return float(max(d1.max(), d2.max()))
