import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from newtonflow import EllipticFunction, FlowField, Lattice, build_portrait, certify, integrate, nuclear_divisor, sn_divisor
from newtonflow.portrait import export_json, export_svg, portrait_from_json, split_at_wraps

GENERIC = Lattice(1, 0.3 + 1.2j)
RECT = Lattice(1, 0.8j)
EQUI = Lattice(1, (1 / math.sqrt(3)) * np.exp(1j * math.pi / 3))
SVG = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def nuclear_portrait():
    f = EllipticFunction(nuclear_divisor(GENERIC, 2))
    return build_portrait(FlowField(f), density=4, certificate=certify(f))


@pytest.fixture(scope="module")
def rect_skeleton():
    return build_portrait(FlowField(EllipticFunction(sn_divisor(RECT))), density=0)


@pytest.fixture(scope="module")
def equi_skeleton():
    return build_portrait(FlowField(EllipticFunction(sn_divisor(EQUI))), density=0)


def test_nuclear_census_and_endpoints(nuclear_portrait):
    p = nuclear_portrait
    assert p.census()["critical"] == 2
    assert len(p.separatrices) == 8
    assert all(tr.endpoint is not None for tr in p.separatrices)
    assert not p.connections
    assert len(p.fillers) == 4


def test_fillers_interleave_separatrices(nuclear_portrait):
    p = nuclear_portrait
    for fl in p.fillers:
        zi = fl.meta["target"]
        arriving = [
            tr.argf[-1] for tr in p.separatrices
            if tr.meta["role"] == "unstable" and tr.endpoint is p.equilibria[zi]
        ]
        for a in arriving:
            assert abs(math.remainder(fl.arg_value - a, 2 * math.pi)) > 1e-4
        assert fl.endpoint is p.equilibria[zi]
        # a filler keeps its arg value along the whole orbit
        assert np.max(np.abs(fl.argf - fl.arg_value)) < 1e-5


def test_sn_skeletons(rect_skeleton, equi_skeleton):
    for p, connected in ((rect_skeleton, True), (equi_skeleton, False)):
        kinds = [e.kind for e in p.equilibria]
        assert kinds.count("zero") == 2 and kinds.count("pole") == 2 and kinds.count("critical") == 4
        assert len(p.separatrices) == 16
        assert bool(p.connections) is connected
        assert not p.fillers


def test_svg_structure(rect_skeleton):
    svg = export_svg(rect_skeleton)
    root = ET.fromstring(svg)
    assert root.tag == SVG + "svg"
    classes = [el.get("class") for el in root.iter()]
    assert classes.count("zero") == 2 and classes.count("pole") == 2 and classes.count("saddle") == 4
    assert "connection" in classes
    # deterministic output
    assert export_svg(rect_skeleton) == svg


def test_svg_polylines_stay_in_cell(equi_skeleton):
    svg = export_svg(equi_skeleton, labels=False)
    root = ET.fromstring(svg)
    cell = root.find(f".//{SVG}polygon[@class='cell']")
    c = [complex(*map(float, pt.split(","))) for pt in cell.get("points").split()]
    e1, e2 = c[1] - c[0], c[3] - c[0]
    n = 0
    for el in root.iter(SVG + "polyline"):
        if el.get("class") not in ("filler", "stable", "unstable", "connection"):
            continue
        for pt in el.get("points").split():
            w = complex(*map(float, pt.split(","))) - c[0]
            # barycentric coordinates in the pixel parallelogram (3 decimals printed)
            det = (e1.conjugate() * e2).imag
            s1 = (w.conjugate() * e2).imag / det
            s2 = (e1.conjugate() * w).imag / det
            assert -1e-4 <= s1 <= 1 + 1e-4 and -1e-4 <= s2 <= 1 + 1e-4
            n += 1
    assert n > 0


def test_json_round_trip(nuclear_portrait):
    d = export_json(nuclear_portrait)
    assert d["schema"] == "portrait/1"
    text = json.dumps(d)
    back = portrait_from_json(json.loads(text))
    for a, b in zip(nuclear_portrait.separatrices + nuclear_portrait.fillers, back.separatrices + back.fillers):
        assert np.array_equal(a.z, b.z) and np.array_equal(a.t, b.t) and np.array_equal(a.argf, b.argf)
        assert (a.endpoint is None) == (b.endpoint is None)
    assert export_json(back) == d


def test_wrap_splitting_gives_congruent_endpoints():
    L = Lattice(1, 0.3 + 1.2j)
    z = np.linspace(0.8 + 0.3j, 1.3 + 0.5j, 30)
    pieces = split_at_wraps(L, z)
    assert len(pieces) == 2
    assert L.congruent(pieces[0][-1], pieces[1][0])
    for p in pieces:
        t1, t2 = L.to_bary(p)
        assert np.all((t1 >= -1e-12) & (t1 <= 1 + 1e-12) & (t2 >= -1e-12) & (t2 <= 1 + 1e-12))
    # diagonal crossing through both edges
    z = np.linspace(0.9 + 1.1j, 1.2 + 1.5j, 50)
    pieces = split_at_wraps(L, z)
    assert len(pieces) >= 2
    for a, b in zip(pieces, pieces[1:]):
        assert L.congruent(a[-1], b[0])


def test_wrap_splitting_on_a_traced_orbit():
    L = GENERIC
    fld = FlowField(EllipticFunction(nuclear_divisor(L, 2)))
    tr = integrate(fld, complex(L.from_bary(0.8, 0.65)))
    assert tr.endpoint.kind == "zero"
    pieces = split_at_wraps(L, tr.closure())
    assert len(pieces) >= 2
    for a, b in zip(pieces, pieces[1:]):
        assert L.congruent(a[-1], b[0], 1e-9)
        t1, t2 = L.to_bary(a[-1])
        assert min(abs(t1), abs(t1 - 1), abs(t2), abs(t2 - 1)) < 1e-12


def test_negative_density_rejected():
    with pytest.raises(ValueError):
        build_portrait(FlowField(EllipticFunction(sn_divisor(RECT))), density=-1)
