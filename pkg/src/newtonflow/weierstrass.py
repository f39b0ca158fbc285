"""Weierstrass sigma, zeta, wp and wp' for an arbitrary period lattice.

All evaluations go through the reduced basis ``(W1, W2)`` of the lattice,
where the nome ``q = exp(i*pi*W2/W1)`` satisfies ``|q| <= exp(-pi*sqrt(3)/2)``.
Arguments are first moved into the cell ``|t1|, |t2| <= 1/2`` around the
origin; the q-series are evaluated there and the quasi-periodicity factors
are applied on the way out (in log-space for sigma).

Only the full-period conventions are used: ``eta_k = zeta(z + omega_k) - zeta(z)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lattice import Lattice

__all__ = [
    "PoleError",
    "LatticeInvariants",
    "Weierstrass",
    "weierstrass",
    "invariants",
    "sigma",
    "log_sigma",
    "zeta",
    "wp",
    "wp_prime",
]

# distance (cell-relative) below which zeta / wp refuse to evaluate
POLE_RADIUS = 1e-8
# series cap and truncation threshold
MAX_TERMS = 64
SERIES_EPS = 1e-16


class PoleError(ArithmeticError):
    """Evaluation requested too close to a pole."""


@dataclass(frozen=True)
class LatticeInvariants:
    g2: complex
    g3: complex
    eta1: complex
    eta2: complex

    def legendre_residual(self, lattice: Lattice) -> float:
        return abs(self.eta1 * lattice.omega2 - self.eta2 * lattice.omega1 - 2j * math.pi)


class Weierstrass:
    """Weierstrass functions of one lattice, with the series data precomputed."""

    def __init__(self, lattice: Lattice):
        if not (np.isfinite(lattice.omega1) and np.isfinite(lattice.omega2)):
            raise ValueError("non-finite lattice")
        self.lattice = lattice
        red, M = lattice.reduced
        self.red = red
        self.M = M
        W1, W2 = red.omega1, red.omega2
        self.W1, self.W2 = W1, W2
        self.k = math.pi / W1  # d(v)/d(z), with v = pi z / W1
        q = np.exp(1j * math.pi * red.tau)
        self.q = q
        aq = abs(q)
        # terms decay at least like |q|^n on the reduced cell
        nterms = int(math.ceil(math.log(SERIES_EPS) / math.log(aq))) + 1
        self.nterms = min(max(nterms, 4), MAX_TERMS)
        n = np.arange(1, self.nterms + 1)
        self.n = n
        q2n = q ** (2 * n)
        self.q2n = q2n
        self.q4n = q2n * q2n
        self.c = q2n / (1 - q2n)  # Lambert coefficients
        # eta for the full reduced periods
        H1 = (math.pi**2 / (3 * W1)) * (1 - 24 * np.sum(n * self.c))
        H2 = H1 * red.tau - 2j * math.pi / W1
        self.H1, self.H2 = complex(H1), complex(H2)
        x = q2n
        s3 = np.sum(n**3 * x / (1 - x))
        s5 = np.sum(n**5 * x / (1 - x))
        self.g2 = complex((4 / 3) * self.k**4 * (1 + 240 * s3))
        self.g3 = complex((8 / 27) * self.k**6 * (1 - 504 * s5))
        # eta transforms like the periods: (W1, W2)^T = M (w1, w2)^T
        Minv = np.rint(np.linalg.inv(M)).astype(np.int64)
        self.eta1 = complex(Minv[0, 0] * self.H1 + Minv[0, 1] * self.H2)
        self.eta2 = complex(Minv[1, 0] * self.H1 + Minv[1, 1] * self.H2)
        self.pole_radius = POLE_RADIUS * lattice.scale_length

    @property
    def invariants(self) -> LatticeInvariants:
        return LatticeInvariants(self.g2, self.g3, self.eta1, self.eta2)

    # -- argument reduction ----------------------------------------------

    def _reduce(self, z):
        """Split ``z = u + m*W1 + n*W2`` with ``u`` in the central cell."""
        z = np.asarray(z, dtype=complex)
        w = z / self.W1
        tau = self.red.tau
        t2 = w.imag / tau.imag
        t1 = w.real - t2 * tau.real
        m = np.rint(t1)
        n = np.rint(t2)
        u = z - m * self.W1 - n * self.W2
        return u, m, n

    def _check_pole(self, u):
        if np.any(np.abs(u) < self.pole_radius):
            raise PoleError("argument within pole radius of a lattice point")

    # -- series on the central cell --------------------------------------

    def _zeta0(self, u):
        v = self.k * u
        vv = v[..., None]
        s = np.sum(self.c * np.sin(2 * self.n * vv), axis=-1)
        return self.H1 * u / self.W1 + self.k * (1 / np.tan(v) + 4 * s)

    def _wp0(self, u):
        v = self.k * u
        vv = v[..., None]
        s = np.sum(self.n * self.c * np.cos(2 * self.n * vv), axis=-1)
        return -self.H1 / self.W1 + self.k**2 * (1 / np.sin(v) ** 2 - 8 * s)

    def _wp_prime0(self, u):
        v = self.k * u
        vv = v[..., None]
        s = np.sum(self.n**2 * self.c * np.sin(2 * self.n * vv), axis=-1)
        sv = np.sin(v)
        return self.k**3 * (-2 * np.cos(v) / sv**3 + 16 * s)

    def _sigma0_derivs(self, u, order: int = 2):
        """sigma, sigma', sigma'' on the central cell (all entire, no poles)."""
        k = self.k
        v = k * u
        vv = v[..., None]
        cos2v = np.cos(2 * vv)
        prod = np.prod(
            (1 - 2 * self.q2n * cos2v + self.q4n) / (1 - self.q2n) ** 2, axis=-1
        )
        sv, cv = np.sin(v), np.cos(v)
        E = self.H1 * u * u / (2 * self.W1)
        pref = np.exp(E) / k
        S = sv * prod
        sig = pref * S
        if order == 0:
            return (sig,)
        L1 = 4 * np.sum(self.c * np.sin(2 * self.n * vv), axis=-1)
        S1 = prod * (cv + sv * L1)
        E1 = self.H1 * u / self.W1
        dsig = pref * (E1 * S + k * S1)
        if order == 1:
            return sig, dsig
        L2 = 8 * np.sum(self.n * self.c * np.cos(2 * self.n * vv), axis=-1)
        S2 = prod * (-sv + 2 * cv * L1 + sv * (L2 + L1 * L1))
        E2 = self.H1 / self.W1
        ddsig = pref * ((E2 + E1 * E1) * S + 2 * E1 * k * S1 + k * k * S2)
        return sig, dsig, ddsig

    # -- public evaluations ----------------------------------------------

    def _qp(self, m, n):
        """eta_lambda and lambda for lambda = m*W1 + n*W2."""
        return m * self.H1 + n * self.H2, m * self.W1 + n * self.W2

    def log_sigma(self, z):
        """A branch of log(sigma(z)); ``-inf`` real part at lattice points."""
        u, m, n = self._reduce(z)
        (s0,) = self._sigma0_derivs(u, order=0)
        eta, lam = self._qp(m, n)
        with np.errstate(divide="ignore"):
            out = np.log(s0.astype(complex)) + eta * (u + lam / 2) + 1j * math.pi * (m + n + m * n)
        return out if out.ndim else complex(out)

    def sigma(self, z):
        u, m, n = self._reduce(z)
        (s0,) = self._sigma0_derivs(u, order=0)
        eta, lam = self._qp(m, n)
        sign = np.where((m + n + m * n) % 2 == 0, 1.0, -1.0)
        out = sign * s0 * np.exp(eta * (u + lam / 2))
        return out if np.ndim(out) else complex(out)

    def sigma_scaled(self, z, order: int = 2):
        """``(g, s, s', s'')`` with ``sigma^(j)(z) = exp(g) * s^(j)``.

        ``g`` carries the quasi-periodicity factor, so the remaining values
        stay of moderate size for any ``z``.
        """
        u, m, n = self._reduce(z)
        vals = self._sigma0_derivs(u, order=order)
        eta, lam = self._qp(m, n)
        g = eta * (u + lam / 2) + 1j * math.pi * (m + n + m * n)
        s = vals[0]
        out = [g, s]
        if order >= 1:
            out.append(vals[1] + eta * s)
        if order >= 2:
            out.append(vals[2] + 2 * eta * vals[1] + eta * eta * s)
        return tuple(out)

    def zeta(self, z, check: bool = True):
        u, m, n = self._reduce(z)
        if check:
            self._check_pole(u)
        out = self._zeta0(u) + m * self.H1 + n * self.H2
        return out if out.ndim else complex(out)

    def wp(self, z, check: bool = True):
        u, _, _ = self._reduce(z)
        if check:
            self._check_pole(u)
        out = self._wp0(u)
        return out if out.ndim else complex(out)

    def wp_prime(self, z, check: bool = True):
        u, _, _ = self._reduce(z)
        if check:
            self._check_pole(u)
        out = self._wp_prime0(u)
        return out if out.ndim else complex(out)

    def wp_second(self, z, check: bool = True):
        p = self.wp(z, check=check)
        return 6 * p * p - self.g2 / 2


@lru_cache(maxsize=256)
def weierstrass(lattice: Lattice) -> Weierstrass:
    """Cached :class:`Weierstrass` instance for ``lattice``."""
    return Weierstrass(lattice)


def invariants(lattice: Lattice) -> LatticeInvariants:
    return weierstrass(lattice).invariants


def sigma(lattice: Lattice, z):
    return weierstrass(lattice).sigma(z)


def log_sigma(lattice: Lattice, z):
    return weierstrass(lattice).log_sigma(z)


def zeta(lattice: Lattice, z):
    return weierstrass(lattice).zeta(z)


def wp(lattice: Lattice, z):
    return weierstrass(lattice).wp(z)


def wp_prime(lattice: Lattice, z):
    return weierstrass(lattice).wp_prime(z)
