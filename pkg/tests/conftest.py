import json
import math
import pathlib

import numpy as np
import pytest

from newtonflow import Lattice, build_closed

DATA = pathlib.Path(__file__).with_name("data")

# lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def random_tau(rng) -> complex:
    """A random point of the reduced fundamental domain, kept off the cusp."""
    while True:
        tau = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.87, 1.6))
        if abs(tau) >= 1.0:
            return tau


def random_lattice(rng, scaled: bool = False) -> Lattice:
    tau = random_tau(rng)
    w1 = 1.0
    if scaled:
        w1 = rng.uniform(0.6, 1.6) * np.exp(1j * rng.uniform(-math.pi, math.pi))
    return Lattice(w1, w1 * tau)


def _partition(rng, r, max_mult):
    parts = []
    while r > 0:
        m = int(rng.integers(1, min(r, max_mult) + 1))
        parts.append(m)
        r -= m
    return parts


def random_function(
    rng,
    lattice: Lattice | None = None,
    order: int | None = None,
    max_order: int = 4,
    max_mult: int = 3,
    min_sep: float = 0.05,
    degenerate: bool | None = None,
):
    """Random valid elliptic function, closed through its last pole.

    ``degenerate=True`` forces some multiplicity >= 2, ``False`` forbids it.
    """
    L = lattice if lattice is not None else random_lattice(rng)
    for _ in range(1000):
        r = order if order is not None else int(rng.integers(2, max_order + 1))
        mm = 1 if degenerate is False else max_mult
        zm = _partition(rng, r, mm)
        pm = _partition(rng, r, mm)
        if degenerate and max(zm + pm) < 2:
            continue
        pts = L.from_bary(rng.uniform(0, 1, len(zm) + len(pm) - 1), rng.uniform(0, 1, len(zm) + len(pm) - 1))
        zeros = list(zip(pts[: len(zm)], zm))
        head = list(zip(pts[len(zm) :], pm[:-1]))
        try:
            f = build_closed(L, zeros, head, pm[-1], 0.0)
        except ValueError:
            continue
        if f.divisor.min_separation() >= min_sep * L.scale_length:
            return f
    raise RuntimeError("could not draw a divisor")


def random_points(rng, f, n, min_dist=0.1):
    """``n`` points of the cell at least ``min_dist`` (cell-relative) from the divisor."""
    L = f.lattice
    pts = []
    while len(pts) < n:
        z = complex(L.from_bary(rng.uniform(), rng.uniform()))
        if np.min(L.distance(z, f.divisor.points)) >= min_dist * L.scale_length:
            pts.append(z)
    return np.array(pts)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def oracle_table():
    return json.loads((DATA / "weierstrass_oracle.json").read_text())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
