"""Phase portraits of an sn-type function on two lattices.

On a rectangular lattice the four saddles are joined by separatrices and the
flow is degenerate. On the equiharmonic lattice the same divisor gives a
structurally stable flow. Both portraits are written as SVG.

    python3 demos/sn_portraits.py [outdir]
"""

import math
import pathlib
import sys

import numpy as np

from newtonflow import EllipticFunction, FlowField, Lattice, build_portrait, certify, export_svg, sn_divisor

LATTICES = {
    "rectangular": Lattice(1, 0.8j),
    "equiharmonic": Lattice(1, np.exp(1j * math.pi / 3) / math.sqrt(3)),
}


def main(outdir: str = ".") -> None:
    out = pathlib.Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, L in LATTICES.items():
        f = EllipticFunction(sn_divisor(L))
        cert = certify(f)
        saddles = [e for e in cert.equilibria if e.kind == "critical"]
        print(f"{name}: tau={L.tau:.4f}  verdict={cert.verdict}")
        for s in saddles:
            print(f"  saddle at {s.location:.4f}  f={s.value:.4f}")
        print(f"  saddle connections: {len(cert.connections)}")
        p = build_portrait(FlowField(f), density=6, certificate=cert)
        path = out / f"sn_{name}.svg"
        path.write_text(export_svg(p))
        print(f"  wrote {path}")


if __name__ == "__main__":
    main(*sys.argv[1:2])
