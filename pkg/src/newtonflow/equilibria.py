"""Equilibria of the Newton flow: location, counting and local classification.

Zeros and poles come from the divisor (or from :func:`recover_zeros` for a
shifted function). Critical points are the zeros of ``w' = -f'/f``, found by
grid-seeded Newton iteration and certified by the argument principle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .efun import EllipticFunction, recover_zeros
from .weierstrass import PoleError

__all__ = [
    "Equilibrium",
    "Classification",
    "Circle",
    "Parallelogram",
    "CountError",
    "CensusError",
    "count_by_argument_principle",
    "full_cell",
    "critical_points",
    "find_equilibria",
    "classify",
    "taylor_coefficient",
    "equilibria_to_json",
]

GRID = 64
MAX_GRID = 512
MULT_RADIUS = 1e-3  # cell-relative
COUNT_TOL = 0.01
NEWTON_ITERS = 100
DEDUP = 1e-6  # cell-relative


class CountError(ArithmeticError):
    """Argument-principle quadrature did not settle on an integer."""


class CensusError(ArithmeticError):
    """Located critical points do not account for all ``K`` of them."""


@dataclass(frozen=True)
class Equilibrium:
    location: complex
    kind: str  # "zero" | "pole" | "critical"
    multiplicity: int
    hyperbolic: bool
    eigenvalues: tuple[complex, complex]
    value: complex = 0j  # f at the point (inf for poles)

    @property
    def arg_value(self) -> float:
        if self.kind != "critical":
            return float("nan")
        return float(np.angle(self.value))

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "z": [self.location.real, self.location.imag],
            "mult": self.multiplicity,
            "hyperbolic": self.hyperbolic,
            "eigenvalues": [[e.real, e.imag] for e in self.eigenvalues],
        }
        if self.kind == "critical":
            out["value"] = [self.value.real, self.value.imag]
        return out

    @classmethod
    def from_json(cls, d: dict) -> "Equilibrium":
        kind = d["kind"]
        value = complex(*d["value"]) if "value" in d else (complex("inf") if kind == "pole" else 0j)
        return cls(
            complex(*d["z"]),
            kind,
            int(d["mult"]),
            bool(d["hyperbolic"]),
            tuple(complex(*e) for e in d["eigenvalues"]),
            value,
        )


def equilibria_to_json(eqs) -> list:
    return [e.to_json() for e in eqs]


# -- contours --------------------------------------------------------------


@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float

    def nodes(self, n: int):
        """Trapezoid nodes and weights ``dz`` (spectrally accurate on circles)."""
        th = 2 * math.pi * np.arange(n) / n
        e = np.exp(1j * th)
        return self.center + self.radius * e, 1j * self.radius * e * (2 * math.pi / n)


@dataclass(frozen=True)
class Parallelogram:
    """Positively oriented parallelogram ``origin + s*e1 + t*e2``, ``s, t`` in [0, 1]."""

    origin: complex
    e1: complex
    e2: complex

    def nodes(self, n: int):
        x, w = leggauss(n)
        s = (x + 1) / 2
        w = w / 2
        o, e1, e2 = self.origin, self.e1, self.e2
        zs, dz = [], []
        for start, edge in ((o, e1), (o + e1, e2), (o + e1 + e2, -e1), (o + e2, -e2)):
            zs.append(start + s * edge)
            dz.append(w * edge)
        return np.concatenate(zs), np.concatenate(dz)

    def boundary_distance(self, pts) -> float:
        """Smallest distance from ``pts`` to the four edges."""
        pts = np.atleast_1d(np.asarray(pts, dtype=complex))
        o, e1, e2 = self.origin, self.e1, self.e2
        best = math.inf
        for start, edge in ((o, e1), (o + e1, e2), (o + e1 + e2, -e1), (o + e2, -e2)):
            u = np.clip(((pts - start) * np.conj(edge)).real / abs(edge) ** 2, 0, 1)
            best = min(best, float(np.min(np.abs(start + u * edge - pts))))
        return best


def full_cell(lattice, avoid=(), shift: float = 1e-3) -> Parallelogram:
    """The period cell moved along its diagonal so that no point of ``avoid`` lies near its edges."""
    w1, w2 = lattice.periods
    diag = w1 + w2
    avoid = np.asarray(list(avoid), dtype=complex)
    pts = lattice.normalize(avoid) if len(avoid) else avoid
    best = None
    for k in range(1, 40):
        s = shift * k * (1 if k % 2 else -1) * 0.5 ** (k // 8)
        P = Parallelogram(-s * diag, w1, w2)
        if not len(pts):
            return P
        # test all representatives near the cell
        reps = np.concatenate([pts + i * w1 + j * w2 for i in (-1, 0, 1) for j in (-1, 0, 1)])
        d = P.boundary_distance(reps)
        if best is None or d > best[0]:
            best = (d, P)
        if d > 1e-4 * lattice.scale_length:
            return P
    return best[1]


def count_by_argument_principle(g, dg, contour, tol: float = COUNT_TOL, max_nodes: int = 4096) -> int:
    """``(1/2 pi i) * contour integral of g'/g``, rounded to the nearest integer.

    The node count doubles (from 32) until two successive estimates agree on
    the same integer with rounding residual below ``tol``.
    """
    n = 32
    prev = None
    last = None
    while n <= max_nodes:
        z, dz = contour.nodes(n)
        with np.errstate(all="ignore"):
            val = np.sum(dg(z) / g(z) * dz) / (2j * math.pi)
        if np.isfinite(val):
            k = int(round(val.real))
            res = abs(val - k)
            last = (val, res)
            if res < tol and prev is not None and prev == k:
                return k
            prev = k if res < tol else None
        n *= 2
    raise CountError(f"argument principle did not converge (last estimate {last})")


# -- critical points -------------------------------------------------------


def _local_minima(a: np.ndarray) -> np.ndarray:
    """Mask of periodic discrete local minima of a 2-D array."""
    m = np.ones(a.shape, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            m &= a <= np.roll(np.roll(a, di, axis=0), dj, axis=1)
    return m


def _newton(fn, dfn, z, scale, iters=NEWTON_ITERS, mult=1):
    for _ in range(iters):
        try:
            v = fn(z)
            d = dfn(z)
        except PoleError:
            return None
        if not np.isfinite(v) or d == 0 or not np.isfinite(d):
            return None
        step = mult * v / d
        z = z - step
        if abs(step) < 1e-15 * scale:
            break
    return complex(z)


def _multiplicity(f, z, scale, others):
    """Argument-principle multiplicity of the root ``z`` of ``w'``."""
    L = f.lattice
    rho = MULT_RADIUS * scale
    for _ in range(4):
        crowd = [o for o in others if 0 < L.distance(o, z) < 2 * rho]
        near = np.min(L.distance(z, f.divisor.points))
        if crowd or near < 2 * rho:
            rho /= 10
            continue
        try:
            return count_by_argument_principle(
                lambda u: f.log_deriv(u, check=False),
                lambda u: f.second_log_deriv(u, check=False),
                Circle(z, rho),
            ), rho
        except CountError:
            rho /= 10
    raise CensusError(f"could not determine the multiplicity at {z}")


def _polish(f, z, k, scale):
    """Refine a ``k``-fold root of ``w'`` as a simple root of its ``k``-th derivative."""
    if k == 1:
        g, dg = f.log_deriv, f.second_log_deriv
        mult = 1
    elif k == 2:
        g, dg = f.second_log_deriv, f.third_log_deriv
        mult = 1
    elif k == 3:
        g, dg = f.third_log_deriv, f.fourth_log_deriv
        mult = 1
    else:
        g, dg = f.log_deriv, f.second_log_deriv
        mult = k
    z2 = _newton(lambda u: g(u, check=False), lambda u: dg(u, check=False), z, scale, 30, mult)
    if z2 is None or f.lattice.distance(z2, z) > 1e-3 * scale:
        return z
    return z2


def _seed_grid(f, N):
    L = f.lattice
    t = (np.arange(N) + 0.5) / N
    T1, T2 = np.meshgrid(t, t, indexing="ij")
    Z = L.from_bary(T1, T2)
    with np.errstate(all="ignore"):
        A = np.abs(f.log_deriv(Z, check=False))
    A = np.where(np.isfinite(A), A, np.inf)
    return Z[_local_minima(A)]


def _local_seeds(f):
    """Seeds on small circles around divisor points that have close neighbours."""
    L = f.lattice
    pts = f.divisor.points
    out = []
    for i, p in enumerate(pts):
        others = np.delete(pts, i)
        if not len(others):
            continue
        delta = float(np.min(L.distance(p, others)))
        if delta > 0.1 * L.scale_length:
            continue
        th = 2 * math.pi * np.arange(8) / 8
        out.extend(p + 0.5 * delta * np.exp(1j * th))
    return np.array(out, dtype=complex)


def critical_points(f: EllipticFunction, grid: int = GRID, max_grid: int = MAX_GRID):
    """All critical points of ``f``, counted with multiplicity ``K = A + B``.

    Raises :class:`CensusError` if the count is still off after refining the
    seed grid up to ``max_grid``.
    """
    from .flow import FlowField

    L = f.lattice
    scale = L.scale_length
    K = f.divisor.K
    divpts = f.divisor.points
    N = grid
    roots: list[complex] = []
    mults: list[int] = []
    radii: list[float] = []
    while True:
        seeds = _seed_grid(f, N)
        if N == grid:
            seeds = np.concatenate([_local_seeds(f), seeds])
        for s in seeds:
            z = _newton(
                lambda u: f.log_deriv(u, check=False),
                lambda u: f.second_log_deriv(u, check=False),
                complex(s),
                scale,
            )
            if z is None or not np.isfinite(z):
                continue
            if np.min(L.distance(z, divpts)) < 1e-6 * scale:
                continue
            if not abs(f.log_deriv(z, check=False)) < 1e-6 * max(1.0, 1 / scale):
                continue
            z = complex(L.normalize(z))
            if _known(L, z, roots, mults, radii, scale):
                continue
            k, rho = _multiplicity(f, z, scale, roots)
            if k < 1:
                continue
            z = complex(L.normalize(_polish(f, z, k, scale)))
            if _known(L, z, roots, mults, radii, scale):
                continue
            roots.append(z)
            mults.append(k)
            radii.append(rho)
        if sum(mults) == K:
            break
        if N >= max_grid:
            raise CensusError(
                f"located critical points account for {sum(mults)} of {K} after grid {N}"
            )
        N *= 2
    field = FlowField(f, "pq")
    out = []
    for z, k in zip(roots, mults):
        ev = tuple(complex(e) for e in np.linalg.eigvals(field.jacobian(z)))
        out.append(Equilibrium(z, "critical", k, _is_hyperbolic(ev, k), ev, complex(f.eval(z))))
    return _sorted(out)


def _known(L, z, roots, mults, radii, scale) -> bool:
    for w, k, rho in zip(roots, mults, radii):
        d = L.distance(z, w)
        if d < DEDUP * scale or (k > 1 and d < rho):
            return True
    return False


def _is_hyperbolic(ev, k) -> bool:
    if k != 1:
        return False
    big = max(abs(e) for e in ev)
    return big > 0 and min(abs(e.real) for e in ev) > 1e-9 * big


def _sorted(eqs):
    return sorted(eqs, key=lambda e: (round(e.location.real, 9), round(e.location.imag, 9)))


def find_equilibria(f: EllipticFunction) -> list[Equilibrium]:
    """Zeros, poles and critical points of the flow, in that order."""
    from .flow import FlowField

    L = f.lattice
    field = FlowField(f, "pq")
    out = []
    if f.shift == 0:
        zeros = [(a, n) for a, n in f.divisor.zeros]
    else:
        zeros = [(a, 1) for a in recover_zeros(f)]
    for a, n in zeros:
        ev = tuple(complex(e) for e in np.linalg.eigvals(field.jacobian(a)))
        out_z = Equilibrium(complex(L.normalize(a)), "zero", n, _is_hyperbolic(ev, n), ev, 0j)
        out.append(out_z)
    poles = []
    for b, m in f.divisor.poles:
        ev = tuple(complex(e) for e in np.linalg.eigvals(field.jacobian(b)))
        poles.append(Equilibrium(complex(L.normalize(b)), "pole", m, _is_hyperbolic(ev, m), ev, complex("inf")))
    return _sorted(out) + _sorted(poles) + critical_points(f)


# -- local classification --------------------------------------------------


@dataclass(frozen=True)
class Classification:
    equilibrium: Equilibrium
    type: str  # "attractor" | "repellor" | "saddle"
    node: str  # "star" or "saddle"
    hyperbolic: bool
    stable_directions: tuple[float, ...] = dc_field(default=())
    unstable_directions: tuple[float, ...] = dc_field(default=())

    def to_json(self) -> dict:
        return {
            "equilibrium": self.equilibrium.to_json(),
            "type": self.type,
            "node": self.node,
            "hyperbolic": self.hyperbolic,
            "stable_directions": list(self.stable_directions),
            "unstable_directions": list(self.unstable_directions),
        }


def taylor_coefficient(f: EllipticFunction, z0: complex, m: int, radius: float | None = None, n: int = 64) -> complex:
    """``f^(m)(z0) / m!`` from samples on a circle (discrete Fourier transform)."""
    L = f.lattice
    if radius is None:
        near = float(np.min(L.distance(z0, f.divisor.pole_points)))
        radius = min(0.05 * L.scale_length, 0.25 * near)
    th = 2 * math.pi * np.arange(n) / n
    vals = f.eval(z0 + radius * np.exp(1j * th))
    c = np.fft.fft(vals) / n
    return complex(c[m] / radius**m)


def classify(field, e: Equilibrium) -> Classification:
    """Local phase portrait of an equilibrium.

    Zeros are attracting and poles repelling star nodes. A ``k``-fold critical
    point with value ``v`` and ``f - v ~ c (z - z*)^(k+1)`` is a saddle whose
    unstable separatrices leave along ``arg(-v/c)/(k+1)`` (mod ``2 pi/(k+1)``)
    and whose stable separatrices arrive along ``arg(v/c)/(k+1)``.
    """
    if e.kind == "zero":
        return Classification(e, "attractor", "star", e.hyperbolic)
    if e.kind == "pole":
        return Classification(e, "repellor", "star", e.hyperbolic)
    f = field.f
    k = e.multiplicity
    v = e.value
    if k == 1:
        _, _, f2 = f.derivs(e.location)
        c = complex(f2) / 2
    else:
        c = taylor_coefficient(f, e.location, k + 1)
    j = 2 * math.pi * np.arange(k + 1)
    uns = (np.angle(-v / c) + j) / (k + 1)
    sta = (np.angle(v / c) + j) / (k + 1)
    wrap = lambda a: tuple(float(x) for x in np.mod(a, 2 * math.pi))  # noqa: E731
    return Classification(e, "saddle", "saddle", e.hyperbolic, wrap(sta), wrap(uns))
