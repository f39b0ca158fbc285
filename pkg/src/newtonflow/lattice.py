"""Period lattices: orientation, reduction, congruence and equivalences.

A lattice is stored through a pair of basic periods ``(omega1, omega2)``
with ``Im(omega2 / omega1) > 0``. Points of the torus ``C / Lambda`` are
plain complex numbers; :meth:`Lattice.normalize` returns the representative
inside the half-open period parallelogram.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "Lattice",
    "LatticeError",
    "normalize",
    "congruent",
    "reduce_basis",
    "scale",
    "canonical_map",
    "is_reduced",
]

# tie tolerance for the boundary cases of the reduced domain
_TIE = 1e-12
# barycentric snapping width for normalize
_SNAP = 1e-13


class LatticeError(ValueError):
    """Raised for degenerate or non-finite period pairs."""


@dataclass(frozen=True)
class Lattice:
    """Period lattice generated by ``omega1`` and ``omega2``.

    Negatively oriented pairs are swapped on construction, so that
    ``Im(tau) > 0`` always holds.
    """

    omega1: complex
    omega2: complex

    def __post_init__(self):
        w1, w2 = complex(self.omega1), complex(self.omega2)
        if not (np.isfinite(w1) and np.isfinite(w2)):
            raise LatticeError("periods must be finite")
        if w1 == 0 or w2 == 0:
            raise LatticeError("periods must be nonzero")
        ratio = w2 / w1
        if abs(ratio.imag) <= 1e-14 * abs(ratio):
            raise LatticeError("periods are linearly dependent over R")
        if ratio.imag < 0:
            w1, w2 = w2, w1
        object.__setattr__(self, "omega1", w1)
        object.__setattr__(self, "omega2", w2)

    @property
    def tau(self) -> complex:
        return self.omega2 / self.omega1

    @property
    def periods(self) -> tuple[complex, complex]:
        return self.omega1, self.omega2

    @property
    def area(self) -> float:
        return abs((self.omega1.conjugate() * self.omega2).imag)

    @property
    def diameter(self) -> float:
        """Length of the longer diagonal of the period parallelogram."""
        return max(abs(self.omega1 + self.omega2), abs(self.omega1 - self.omega2))

    @property
    def scale_length(self) -> float:
        """Characteristic length sqrt(area) used for cell-relative tolerances."""
        return math.sqrt(self.area)

    @cached_property
    def reduced(self) -> tuple["Lattice", np.ndarray]:
        return reduce_basis(self)

    # -- coordinates -----------------------------------------------------

    def to_bary(self, z):
        """Real coordinates ``(t1, t2)`` with ``z = t1*omega1 + t2*omega2``."""
        w = np.asarray(z, dtype=complex) / self.omega1
        tau = self.tau
        t2 = w.imag / tau.imag
        t1 = w.real - t2 * tau.real
        return t1, t2

    def from_bary(self, t1, t2):
        return np.asarray(t1) * self.omega1 + np.asarray(t2) * self.omega2

    def point(self, k1: int, k2: int) -> complex:
        return k1 * self.omega1 + k2 * self.omega2

    def nearest_point(self, z):
        """Lattice point closest in barycentric rounding, with its integer coordinates."""
        t1, t2 = self.to_bary(z)
        k1, k2 = np.rint(t1), np.rint(t2)
        return self.from_bary(k1, k2), k1.astype(int), k2.astype(int)

    def normalize(self, z):
        """Representative of ``[z]`` in the half-open parallelogram."""
        return normalize(self, z)

    def congruent(self, z, w, tol: float = 1e-9) -> bool:
        return congruent(self, z, w, tol)

    def distance(self, z, w=0.0):
        """Euclidean distance between the classes ``[z]`` and ``[w]``."""
        red, _ = self.reduced
        d = np.asarray(z, dtype=complex) - np.asarray(w, dtype=complex)
        t1, t2 = red.to_bary(d)
        base = d - red.from_bary(np.rint(t1), np.rint(t2))
        best = np.abs(base)
        for i in (-1, 0, 1):
            for j in (-1, 0, 1):
                if i == 0 and j == 0:
                    continue
                best = np.minimum(best, np.abs(base - i * red.omega1 - j * red.omega2))
        return best if best.ndim else float(best)

    def nearest_offset(self, z, w=0.0):
        """Shortest complex vector ``d`` with ``d = z - w mod Lambda``."""
        red, _ = self.reduced
        d = np.asarray(z, dtype=complex) - np.asarray(w, dtype=complex)
        t1, t2 = red.to_bary(d)
        base = d - red.from_bary(np.rint(t1), np.rint(t2))
        best = base.copy()
        for i in (-1, 0, 1):
            for j in (-1, 0, 1):
                cand = base - i * red.omega1 - j * red.omega2
                best = np.where(np.abs(cand) < np.abs(best), cand, best)
        return best if best.ndim else complex(best)

    def to_json(self) -> dict:
        return {
            "omega1": [self.omega1.real, self.omega1.imag],
            "omega2": [self.omega2.real, self.omega2.imag],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Lattice":
        if not isinstance(data, dict) or set(data) != {"omega1", "omega2"}:
            raise LatticeError("lattice JSON needs exactly 'omega1' and 'omega2'")
        return cls(_pair(data["omega1"]), _pair(data["omega2"]))


def _pair(v) -> complex:
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise LatticeError(f"expected [re, im], got {v!r}")
    re, im = v
    if isinstance(re, bool) or isinstance(im, bool):
        raise LatticeError(f"expected numbers, got {v!r}")
    return complex(float(re), float(im))


def normalize(lattice: Lattice, z):
    """Representative of ``z mod Lambda`` with barycentric coordinates in ``[0, 1)``."""
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise ValueError("cannot normalize a non-finite point")
    t1, t2 = lattice.to_bary(z)
    t1 = t1 - np.floor(t1)
    t2 = t2 - np.floor(t2)
    # values a rounding error below an integer (e.g. floor(-tiny) = -1) belong to 0
    t1 = np.where(t1 >= 1.0 - _SNAP, 0.0, t1)
    t2 = np.where(t2 >= 1.0 - _SNAP, 0.0, t2)
    out = lattice.from_bary(t1, t2)
    return out if out.ndim else complex(out)


def congruent(lattice: Lattice, z, w, tol: float = 1e-9) -> bool:
    """True iff ``z = w mod Lambda`` up to ``tol`` in barycentric coordinates."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    t1, t2 = lattice.to_bary(complex(z) - complex(w))
    r1 = t1 - round(t1)
    r2 = t2 - round(t2)
    return bool(max(abs(r1), abs(r2)) < tol)


def is_reduced(tau: complex, tol: float = _TIE) -> bool:
    """Check the reduced-domain conditions on ``tau`` (half-open conventions)."""
    if tau.imag <= 0:
        return False
    a = abs(tau)
    if a < 1 - tol:
        return False
    if not (-0.5 - tol <= tau.real < 0.5 - tol):
        return False
    if abs(a - 1) <= tol and tau.real > tol:
        return False
    return True


def reduce_basis(lattice: Lattice) -> tuple[Lattice, np.ndarray]:
    """Gauss reduction of the period pair.

    Returns the reduced lattice basis and the unimodular integer matrix ``M``
    with ``(omega1', omega2')^T = M (omega1, omega2)^T``.
    """
    w1, w2 = lattice.omega1, lattice.omega2
    M = np.eye(2, dtype=np.int64)
    for _ in range(10_000):
        tau = w2 / w1
        # shift Re(tau) into [-1/2, 1/2)
        m = math.floor(tau.real + 0.5 + _TIE)
        if m:
            w2 = w2 - m * w1
            M[1] -= m * M[0]
            tau = w2 / w1
        if abs(tau) < 1 - _TIE:
            # tau -> -1/tau
            w1, w2 = w2, -w1
            M = np.array([M[1], -M[0]])
            continue
        break
    else:  # pragma: no cover - Gauss reduction terminates
        raise LatticeError("lattice reduction did not terminate")
    tau = w2 / w1
    if abs(abs(tau) - 1) <= _TIE and tau.real > _TIE:
        w1, w2 = w2, -w1
        M = np.array([M[1], -M[0]])
    return Lattice(w1, w2), M


def scale(lattice: Lattice, alpha: complex) -> Lattice:
    """The lattice ``alpha * Lambda`` with basis ``(alpha*omega1, alpha*omega2)``."""
    alpha = complex(alpha)
    if alpha == 0 or not np.isfinite(alpha):
        raise LatticeError("scaling factor must be finite and nonzero")
    return Lattice(alpha * lattice.omega1, alpha * lattice.omega2)


def canonical_map(lattice: Lattice) -> np.ndarray:
    """Real-linear map of R^2 sending the reduced basis to ``(1, i)``.

    The returned 2x2 matrix acts on ``(Re z, Im z)`` column vectors.
    """
    red, _ = lattice.reduced
    B = np.array(
        [[red.omega1.real, red.omega2.real], [red.omega1.imag, red.omega2.imag]]
    )
    return np.linalg.inv(B)


def apply_real_linear(H: np.ndarray, z):
    z = np.asarray(z, dtype=complex)
    x = H[0, 0] * z.real + H[0, 1] * z.imag
    y = H[1, 0] * z.real + H[1, 1] * z.imag
    out = x + 1j * y
    return out if out.ndim else complex(out)
