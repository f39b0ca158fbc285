"""Perturbing a function with a double zero into generic position.

The double zero is a non-hyperbolic node. Splitting it by an amount epsilon
creates an extra saddle between the two new zeros, and the certificate turns
stable. Adding a constant c instead moves the double zero by about
sqrt(|c| / |kappa|), where kappa is the leading Taylor coefficient.

    python3 demos/perturb_double_zero.py
"""

import math

from newtonflow import (
    EllipticFunction,
    Lattice,
    PerturbationConfig,
    add_constant,
    certify,
    perturb_to_generic,
    recover_zeros,
    validate_divisor,
)
from newtonflow.equilibria import taylor_coefficient


def main() -> None:
    L = Lattice(1, 1j)
    f = EllipticFunction(validate_divisor(L, [(0.0, 2)], [0.25, 0.75]))
    cert = certify(f)
    print(f"original: verdict={cert.verdict}  conditions={cert.conditions}")

    g, gcert = perturb_to_generic(f, PerturbationConfig(1e-3, seed=1))
    print(f"perturbed: verdict={gcert.verdict}")
    print(f"  zeros: {[f'{a:.5f}' for a, _ in g.divisor.zeros]}")
    print(f"  poles: {[f'{b:.5f}' for b, _ in g.divisor.poles]}")
    print(f"  lambda0 unchanged: {g.divisor.lambda0 == f.divisor.lambda0}")
    ns = sum(e.multiplicity for e in gcert.equilibria if e.kind == "critical")
    print(f"  saddles: {ns} (K = {g.divisor.K})")

    kappa = abs(taylor_coefficient(f, 0.0, 2))
    for c in (1e-4, 1e-6, 1e-8):
        h = add_constant(f, c)
        zs = recover_zeros(h)
        moved = max(L.distance(z, 0.0) for z in zs)
        print(f"c={c:.0e}: zero moved {moved:.3e}, sqrt(c/kappa)={math.sqrt(c / kappa):.3e}")


if __name__ == "__main__":
    main()
