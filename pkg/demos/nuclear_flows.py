"""Nuclear flows: one r-fold zero and one r-fold pole.

Such a flow has exactly two saddles. On a generic lattice they are not joined
and the flow is stable. On the square lattice the symmetry forces saddle
connections.

    python3 demos/nuclear_flows.py
"""

from newtonflow import EllipticFunction, FlowField, Lattice, certify, detect_saddle_connections, nuclear_divisor


def main() -> None:
    for L in (Lattice(1, 0.3 + 1.2j), Lattice(1, 1j)):
        for r in (2, 3):
            f = EllipticFunction(nuclear_divisor(L, r))
            cert = certify(f)
            saddles = [e for e in cert.equilibria if e.kind == "critical"]
            rep = detect_saddle_connections(FlowField(f), saddles, equilibria=cert.equilibria)
            print(
                f"tau={L.tau:.3g} r={r}: saddles={len(saddles)} "
                f"connections={len(rep.connections)} verdict={cert.verdict}"
            )


if __name__ == "__main__":
    main()
