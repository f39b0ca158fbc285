"""Elliptic functions built from zero/pole divisors via sigma products.

A function of order ``r`` with zeros ``a_i`` (multiplicity ``n_i``) and poles
``b_j`` (multiplicity ``m_j``) is

    f(z) = C * prod sigma(z - a_i)^n_i
             / (prod_{j<B} sigma(z - b_j)^m_j * sigma(z - b_B)^(m_B - 1) * sigma(z - b'_B))
           + c

with ``b'_B = sum n_i a_i - sum_{j<B} m_j b_j - (m_B - 1) b_B``. The
adjusted pole ``b'_B`` differs from ``b_B`` by the lattice vector
``lambda0 = sum n_i a_i - sum m_j b_j``, which makes the quotient doubly
periodic. Representatives are stored exactly as supplied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .lattice import Lattice, scale as scale_lattice
from .weierstrass import PoleError, weierstrass

__all__ = [
    "DivisorError",
    "Divisor",
    "EllipticFunction",
    "validate_divisor",
    "build",
    "build_closed",
    "add_constant",
    "recover_zeros",
    "nuclear_divisor",
    "sn_divisor",
]

# cell-relative radius inside which f refuses to evaluate at a pole
EVAL_POLE_RADIUS = 1e-7


class DivisorError(ValueError):
    """Invalid zero/pole data."""


def _as_points(items) -> list[tuple[complex, int]]:
    out = []
    for item in items:
        if (
            isinstance(item, (tuple, list))
            and len(item) == 2
            and isinstance(item[1], (int, np.integer))
            and not isinstance(item[1], bool)
        ):
            z, n = item
        else:
            z, n = item, 1
        z = complex(z)
        if not np.isfinite(z):
            raise DivisorError("divisor points must be finite")
        n = int(n)
        if n < 1:
            raise DivisorError(f"multiplicity must be >= 1, got {n}")
        out.append((z, n))
    return out


def _merge(lattice: Lattice, pts, tol):
    merged: list[list] = []
    for z, n in pts:
        for entry in merged:
            if lattice.congruent(entry[0], z, tol):
                entry[1] += n
                break
        else:
            merged.append([z, n])
    return tuple((z, n) for z, n in merged)


@dataclass(frozen=True)
class Divisor:
    """Zeros and poles with multiplicities, plus the lattice sum defect ``lambda0``."""

    lattice: Lattice
    zeros: tuple[tuple[complex, int], ...]
    poles: tuple[tuple[complex, int], ...]
    lambda0: complex
    lambda0_index: tuple[int, int]

    @property
    def order(self) -> int:
        return sum(n for _, n in self.zeros)

    @property
    def A(self) -> int:
        return len(self.zeros)

    @property
    def B(self) -> int:
        return len(self.poles)

    @property
    def K(self) -> int:
        """Number of critical points counted with multiplicity."""
        return self.A + self.B

    @property
    def zero_points(self) -> np.ndarray:
        return np.array([z for z, _ in self.zeros], dtype=complex)

    @property
    def pole_points(self) -> np.ndarray:
        return np.array([z for z, _ in self.poles], dtype=complex)

    @property
    def points(self) -> np.ndarray:
        return np.concatenate([self.zero_points, self.pole_points])

    def min_separation(self) -> float:
        """Smallest torus distance between two distinct divisor points."""
        pts = self.points
        best = math.inf
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                best = min(best, self.lattice.distance(pts[i], pts[j]))
        return best

    def swapped(self) -> "Divisor":
        k1, k2 = self.lambda0_index
        return Divisor(self.lattice, self.poles, self.zeros, -self.lambda0, (-k1, -k2))

    def to_json(self) -> dict:
        def enc(pts):
            return [{"z": [z.real, z.imag], "mult": n} for z, n in pts]

        return {"lattice": self.lattice.to_json(), "zeros": enc(self.zeros), "poles": enc(self.poles)}


def validate_divisor(lattice: Lattice, zeros, poles, tol: float = 1e-9) -> Divisor:
    """Check the divisor conditions and compute ``lambda0``.

    ``zeros`` and ``poles`` are sequences of points or ``(point, mult)``
    pairs; congruent entries are merged. Raises :class:`DivisorError`.
    """
    zs = _merge(lattice, _as_points(zeros), tol)
    ps = _merge(lattice, _as_points(poles), tol)
    r = sum(n for _, n in zs)
    rp = sum(n for _, n in ps)
    if r != rp:
        raise DivisorError(f"unbalanced multiplicities: {r} zeros vs {rp} poles")
    if r < 2:
        raise DivisorError(f"order {r} < 2")
    for a, _ in zs:
        for b, _ in ps:
            if lattice.congruent(a, b, tol):
                raise DivisorError(f"zero/pole collision at {a} ~ {b}")
    defect = sum(n * a for a, n in zs) - sum(m * b for b, m in ps)
    lam, k1, k2 = lattice.nearest_point(defect)
    t1, t2 = lattice.to_bary(defect - lam)
    if max(abs(t1), abs(t2)) >= tol:
        raise DivisorError(
            f"sum of zeros and sum of poles are not congruent (defect {defect})"
        )
    return Divisor(lattice, zs, ps, complex(lam), (int(k1), int(k2)))


@dataclass(frozen=True)
class EllipticFunction:
    """``C * sigma-product + shift`` for a validated divisor."""

    divisor: Divisor
    C: complex = 1.0
    shift: complex = 0.0

    def __post_init__(self):
        C = complex(self.C)
        if C == 0 or not np.isfinite(C):
            raise ValueError("multiplier C must be finite and nonzero")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "shift", complex(self.shift))

    # -- structure ---------------------------------------------------------

    @property
    def lattice(self) -> Lattice:
        return self.divisor.lattice

    @property
    def order(self) -> int:
        return self.divisor.order

    @property
    def zeros_stale(self) -> bool:
        """True when a nonzero shift has moved the zeros away from the divisor."""
        return self.shift != 0

    @cached_property
    def b_prime(self) -> complex:
        d = self.divisor
        bB, mB = d.poles[-1]
        return (
            sum(n * a for a, n in d.zeros)
            - sum(m * b for b, m in d.poles[:-1])
            - (mB - 1) * bB
        )

    @cached_property
    def _num(self):
        d = self.divisor
        return np.array([a for a, _ in d.zeros]), np.array([n for _, n in d.zeros])

    @cached_property
    def _den(self):
        d = self.divisor
        pts = [b for b, _ in d.poles[:-1]]
        exps = [m for _, m in d.poles[:-1]]
        bB, mB = d.poles[-1]
        if mB > 1:
            pts.append(bB)
            exps.append(mB - 1)
        pts.append(self.b_prime)
        exps.append(1)
        return np.array(pts, dtype=complex), np.array(exps)

    @cached_property
    def _signed(self):
        """Factor points with signed exponents (zeros +, poles -)."""
        pn, en = self._num
        pd, ed = self._den
        return np.concatenate([pn, pd]), np.concatenate([en, -ed])

    @cached_property
    def _w(self):
        return weierstrass(self.lattice)

    # -- core evaluation ---------------------------------------------------

    @cached_property
    def _all(self):
        pn, en = self._num
        pd, ed = self._den
        return np.concatenate([pn, pd]), len(pn)

    def _sigmas(self, z, order):
        pts, _ = self._all
        return self._w.sigma_scaled(z[..., None] - pts, order=order)

    @staticmethod
    def _products(shape, g, vals, exps, order):
        G = np.sum(exps * g, axis=-1)
        # product rule over factors F_k = s_k^e_k
        P = np.ones(shape, dtype=complex)
        P1 = np.zeros(shape, dtype=complex)
        P2 = np.zeros(shape, dtype=complex)
        for k, e in enumerate(exps):
            s = vals[0][..., k]
            F = s**e if e > 1 else s
            if order == 0:
                P = P * F
                continue
            d = vals[1][..., k]
            F1 = e * s ** (e - 1) * d if e > 1 else d
            if order == 1:
                P, P1 = P * F, P1 * F + P * F1
                continue
            dd = vals[2][..., k]
            if e > 1:
                F2 = e * s ** (e - 1) * dd + e * (e - 1) * s ** (e - 2) * d * d
            else:
                F2 = dd
            P, P1, P2 = P * F, P1 * F + P * F1, P2 * F + 2 * P1 * F1 + P * F2
        return G, P, P1, P2

    def _both(self, z, order):
        """Numerator and denominator products ``(G, P, P', P'')`` at ``z``."""
        _, k = self._all
        g, *vals = self._sigmas(z, order)
        num = self._products(z.shape, g[..., :k], [v[..., :k] for v in vals], self._num[1], order)
        den = self._products(z.shape, g[..., k:], [v[..., k:] for v in vals], self._den[1], order)
        return num, den

    def pq(self, z, order: int = 1):
        """Numerator/denominator ``(p, p', p'', q, q', q'')`` with ``f = p/q``.

        Both are rescaled by the same factor, so only ratios and
        homogeneous expressions are meaningful. The shift is folded into ``p``.
        """
        z = np.asarray(z, dtype=complex)
        (Gp, P, P1, P2), (Gq, Q, Q1, Q2) = self._both(z, order)
        M = np.maximum(Gp.real, Gq.real)
        sp = self.C * np.exp(Gp - M)
        sq = np.exp(Gq - M)
        p, p1, p2 = sp * P, sp * P1, sp * P2
        q, q1, q2 = sq * Q, sq * Q1, sq * Q2
        if self.shift != 0:
            c = self.shift
            p, p1, p2 = p + c * q, p1 + c * q1, p2 + c * q2
        return p, p1, p2, q, q1, q2

    def _check_poles(self, z, pts, radius):
        W = self._w
        d = np.abs(W._reduce(np.asarray(z, dtype=complex)[..., None] - pts)[0])
        if np.any(d < radius * self.lattice.scale_length):
            raise PoleError("evaluation point too close to a pole")

    def eval(self, z, check: bool = True):
        """``f(z)`` including the shift."""
        z = np.asarray(z, dtype=complex)
        if check:
            self._check_poles(z, self.divisor.pole_points, EVAL_POLE_RADIUS)
        (Gp, P, _, _), (Gq, Q, _, _) = self._both(z, 0)
        out = self.C * np.exp(Gp - Gq) * P / Q + self.shift
        return out if out.ndim else complex(out)

    __call__ = eval

    def derivs(self, z, check: bool = True):
        """``(f, f', f'')`` at ``z``."""
        z = np.asarray(z, dtype=complex)
        if check:
            self._check_poles(z, self.divisor.pole_points, EVAL_POLE_RADIUS)
        (Gp, P, P1, P2), (Gq, Q, Q1, Q2) = self._both(z, 2)
        k = self.C * np.exp(Gp - Gq)
        f = k * P / Q
        N1 = P1 * Q - P * Q1
        f1 = k * N1 / Q**2
        f2 = k * ((P2 * Q - P * Q2) / Q**2 - 2 * Q1 * N1 / Q**3)
        return f + self.shift, f1, f2

    def eval_deriv(self, z, check: bool = True):
        """``f'(z)`` (the shift does not contribute)."""
        z = np.asarray(z, dtype=complex)
        if check:
            self._check_poles(z, self.divisor.pole_points, EVAL_POLE_RADIUS)
        (Gp, P, P1, _), (Gq, Q, Q1, _) = self._both(z, 1)
        out = self.C * np.exp(Gp - Gq) * (P1 * Q - P * Q1) / Q**2
        return out if out.ndim else complex(out)

    def log_deriv(self, z, check: bool = True):
        """``w'(z) = -f'(z)/f(z)`` of the unshifted product (a zeta sum).

        For a shifted function this is still the log-derivative of the
        underlying product, whose zeros are the critical points of ``f``.
        """
        pts, s = self._signed
        z = np.asarray(z, dtype=complex)
        if check:
            self._check_poles(z, self.divisor.points, EVAL_POLE_RADIUS)
        zt = self._w.zeta(z[..., None] - pts, check=False)
        out = -np.sum(s * zt, axis=-1)
        return out if out.ndim else complex(out)

    def second_log_deriv(self, z, check: bool = True):
        """``w''(z) = sum n_i wp(z - a_i) - sum m_j wp(z - b_j)``."""
        z = np.asarray(z, dtype=complex)
        pts, s = self._merged_signed
        if check:
            self._check_poles(z, pts, EVAL_POLE_RADIUS)
        out = np.sum(s * self._w.wp(z[..., None] - pts, check=False), axis=-1)
        return out if out.ndim else complex(out)

    def third_log_deriv(self, z, check: bool = True):
        z = np.asarray(z, dtype=complex)
        pts, s = self._merged_signed
        if check:
            self._check_poles(z, pts, EVAL_POLE_RADIUS)
        out = np.sum(s * self._w.wp_prime(z[..., None] - pts, check=False), axis=-1)
        return out if out.ndim else complex(out)

    def fourth_log_deriv(self, z, check: bool = True):
        z = np.asarray(z, dtype=complex)
        pts, s = self._merged_signed
        if check:
            self._check_poles(z, pts, EVAL_POLE_RADIUS)
        out = np.sum(s * self._w.wp_second(z[..., None] - pts, check=False), axis=-1)
        return out if out.ndim else complex(out)

    @cached_property
    def _merged_signed(self):
        d = self.divisor
        pts = [a for a, _ in d.zeros] + [b for b, _ in d.poles]
        s = [n for _, n in d.zeros] + [-m for _, m in d.poles]
        return np.array(pts, dtype=complex), np.array(s)

    def leading_coefficient(self, index: int) -> complex:
        """``kappa`` with ``f(z) ~ kappa (z - a)^n`` at zero ``index`` (unshifted)."""
        pts, s = self._signed
        a, n = self.divisor.zeros[index]
        mask = np.ones(len(pts), dtype=bool)
        mask[index] = False
        ls = self._w.log_sigma(a - pts[mask])
        return complex(self.C * np.exp(np.sum(s[mask] * ls)))

    # -- derived functions -------------------------------------------------

    def add_constant(self, c: complex) -> "EllipticFunction":
        return add_constant(self, c)

    def with_multiplier(self, C: complex) -> "EllipticFunction":
        return replace(self, C=C)

    def reference_point(self) -> complex:
        """A point well away from all divisor points (deterministic)."""
        L = self.lattice
        t = (np.arange(8) + 0.5) / 8
        T1, T2 = np.meshgrid(t, t)
        cand = L.from_bary(T1.ravel(), T2.ravel())
        dist = np.min(L.distance(cand[:, None], self.divisor.points[None, :]), axis=1)
        return complex(cand[int(np.argmax(dist))])

    def reciprocal(self) -> "EllipticFunction":
        """Exactly ``1/f`` as a sigma product (requires ``shift == 0``)."""
        if self.shift != 0:
            raise ValueError("reciprocal is only defined for unshifted functions")
        g = EllipticFunction(self.divisor.swapped())
        z = self.reference_point()
        return replace(g, C=1 / (self.eval(z) * g.eval(z)))

    def same_function_on(self, divisor: Divisor) -> "EllipticFunction":
        """Build on ``divisor`` (same classes) with ``C`` matched to this function."""
        g = EllipticFunction(divisor, 1.0, self.shift)
        z = self.reference_point()
        return replace(g, C=(self.eval(z) - self.shift) / (g.eval(z) - self.shift))

    def rebased(self, lattice: Lattice) -> "EllipticFunction":
        """Same function, representatives renormalized into another basis of the same lattice."""
        d = self.divisor
        zeros = [(complex(lattice.normalize(a)), n) for a, n in d.zeros]
        poles = [(complex(lattice.normalize(b)), m) for b, m in d.poles]
        return self.same_function_on(validate_divisor(lattice, zeros, poles))

    def scaled(self, alpha: complex) -> "EllipticFunction":
        """``f^alpha(w) = f(w / alpha)`` on the lattice ``alpha * Lambda``."""
        d = self.divisor
        L = scale_lattice(d.lattice, alpha)
        zeros = tuple((alpha * a, n) for a, n in d.zeros)
        poles = tuple((alpha * b, m) for b, m in d.poles)
        k1, k2 = d.lambda0_index
        nd = Divisor(L, zeros, poles, alpha * d.lambda0, (k1, k2))
        # sigma(alpha*L; alpha*u) = alpha*sigma(L; u) and both products have r factors
        return EllipticFunction(nd, self.C, self.shift)

    def transported(self, lattice: Lattice) -> "EllipticFunction":
        """The function ``f*`` on another lattice via the real-linear basis map."""
        d = self.divisor
        src = d.lattice

        def move(z):
            t1, t2 = src.to_bary(z)
            return complex(lattice.from_bary(t1, t2))

        zeros = [(move(a), n) for a, n in d.zeros]
        poles = [(move(b), m) for b, m in d.poles]
        return EllipticFunction(validate_divisor(lattice, zeros, poles), self.C, self.shift)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        out = self.divisor.to_json()
        out["C"] = [self.C.real, self.C.imag]
        out["shift"] = [self.shift.real, self.shift.imag]
        return out

    @classmethod
    def from_json(cls, data: dict) -> "EllipticFunction":
        from ._io import function_from_json

        return function_from_json(data)


def build(lattice: Lattice, divisor: Divisor, C: complex = 1.0) -> EllipticFunction:
    """Elliptic function with the given divisor and multiplier ``C``."""
    if divisor.lattice != lattice:
        raise ValueError("divisor belongs to a different lattice")
    return EllipticFunction(divisor, C)


def build_closed(
    lattice: Lattice,
    zeros,
    poles_head,
    last_pole_mult: int,
    lambda0: complex,
    C: complex = 1.0,
    shift: complex = 0.0,
) -> EllipticFunction:
    """Close the divisor through its last pole.

    ``b_B = (sum n_i a_i - sum_{j<B} m_j b_j - lambda0) / m_B`` so that the
    sum defect equals the prescribed ``lambda0`` exactly.
    """
    zs = _as_points(zeros)
    ph = _as_points(poles_head)
    total = sum(n * a for a, n in zs) - sum(m * b for b, m in ph) - lambda0
    bB = total / last_pole_mult
    d = validate_divisor(lattice, zs, ph + [(bB, last_pole_mult)])
    return EllipticFunction(d, C, shift)


def add_constant(f: EllipticFunction, c: complex) -> EllipticFunction:
    """``f + c``; poles are unchanged, zeros become stale for ``c != 0``."""
    return replace(f, shift=f.shift + complex(c))


def recover_zeros(
    f: EllipticFunction, tol: float = 1e-10, max_iter: int = 60
) -> list[complex]:
    """Zeros of the shifted function, ``r`` of them counted with multiplicity.

    Each zero ``a`` of multiplicity ``n`` of the unshifted product splits into
    ``n`` zeros near ``a + (-c/kappa)^(1/n)``; those seeds are Newton-polished
    and the count near ``a`` is confirmed by the argument principle.
    """
    from .equilibria import Circle, count_by_argument_principle

    d = f.divisor
    if f.shift == 0:
        return [a for a, n in d.zeros for _ in range(n)]
    c = f.shift
    L = f.lattice
    sep = d.min_separation()
    out = []
    for idx, (a, n) in enumerate(d.zeros):
        kappa = f.leading_coefficient(idx)
        rho = (abs(c) / abs(kappa)) ** (1.0 / n)
        radius = min(0.45 * sep, max(20 * rho, 1e-6 * L.scale_length))
        if rho > 0.2 * sep:
            raise ArithmeticError("shift too large to track zeros; retry with a smaller c")
        base = (-c / kappa) ** (1.0 / n)
        roots = []
        for j in range(n):
            z = a + base * np.exp(2j * math.pi * j / n)
            for _ in range(max_iter):
                fz = f.eval(z)
                dz = fz / f.eval_deriv(z)
                z = z - dz
                if abs(dz) < 1e-15 * (1 + abs(z)) or abs(fz) < 1e-16:
                    break
            if abs(f.eval(z)) > tol * max(1.0, abs(c)) or L.distance(z, a) > radius:
                raise ArithmeticError(f"zero polishing near {a} did not converge")
            if any(L.distance(z, w) < 1e-9 * L.scale_length for w in roots):
                raise ArithmeticError(f"zero polishing near {a} merged two roots")
            roots.append(complex(z))
        count = count_by_argument_principle(
            f.eval, f.eval_deriv, Circle(a, radius)
        )
        if count != n:
            raise ArithmeticError(f"argument principle finds {count} zeros near {a}, expected {n}")
        out.extend(roots)
    return out


def nuclear_divisor(lattice: Lattice, r: int, pole=None) -> Divisor:
    """One ``r``-fold zero at 0 and one ``r``-fold pole ``b`` with ``r*b`` in the lattice."""
    if pole is None:
        pole = lattice.omega1 / 2 if r % 2 == 0 else lattice.omega1 / r
    return validate_divisor(lattice, [(0.0, r)], [(pole, r)])


def sn_divisor(lattice: Lattice) -> Divisor:
    """Zeros 0, w1/2 and poles w2/2, (w1 + w2)/2: the divisor of sn up to scaling."""
    w1, w2 = lattice.periods
    return validate_divisor(lattice, [0.0, w1 / 2], [w2 / 2, (w1 + w2) / 2])
