"""Certificates are invariant under change of basis and rescaling.

A random function is rebuilt on an SL2(Z)-equivalent basis and on a rotated
and scaled lattice. The verdict and the equilibrium census agree.

    python3 demos/transports.py
"""

import numpy as np

from newtonflow import Lattice, build_closed, certify


def summary(cert) -> tuple:
    kinds = sorted((e.kind, e.multiplicity) for e in cert.equilibria)
    return cert.verdict, tuple(kinds), len(cert.connections)


def main() -> None:
    rng = np.random.default_rng(3)
    L = Lattice(1, 0.2 + 1.1j)
    f = build_closed(L, [(0.1 + 0.2j, 1), (0.6 + 0.7j, 1)], [(0.35 + 0.5j, 1)], 1, 0.0)
    M = np.array([[2, 1], [1, 1]])
    other = Lattice(M[0, 0] * L.omega1 + M[0, 1] * L.omega2, M[1, 0] * L.omega1 + M[1, 1] * L.omega2)
    alpha = complex(rng.uniform(0.5, 1.5) * np.exp(1j * rng.uniform(-np.pi, np.pi)))
    for name, g in (("original", f), ("rebased", f.rebased(other)), ("scaled", f.scaled(alpha))):
        print(f"{name:9s} {summary(certify(g))}")


if __name__ == "__main__":
    main()
