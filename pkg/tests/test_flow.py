import math

import numpy as np
import pytest

from conftest import random_function, random_points
from newtonflow import (
    EllipticFunction,
    FlowField,
    Lattice,
    field_at,
    integrate,
    jacobian_at,
    newton_step,
    nuclear_divisor,
    potential,
    sn_divisor,
)
from newtonflow.efun import validate_divisor
from newtonflow.flow import CriticalPointError, IntegrationError, hausdorff_distance, integrate_many
from newtonflow.weierstrass import PoleError

SQ = Lattice(1, 1j)


def nuclear(r=2, L=SQ):
    return EllipticFunction(nuclear_divisor(L, r))


def test_unknown_form_rejected():
    with pytest.raises(ValueError):
        FlowField(nuclear(), "euler")


def test_field_vanishes_at_zeros_and_poles():
    f = EllipticFunction(sn_divisor(Lattice(1, 0.8j)))
    fld = FlowField(f)
    for z in (0, 0.5, 0.4j, 0.5 + 0.4j):
        assert field_at(fld, z) == 0
    assert abs(fld.with_form("desingularized")(0.4j)) == 0
    for z in (0.25, 0.75 + 0.4j):
        assert abs(fld(z)) < 1e-12
    with pytest.raises(CriticalPointError):
        FlowField(f, "meromorphic")(0.25)


def test_duality_and_form_agreement(rng):
    for _ in range(5):
        f = random_function(rng, max_order=3)
        z = random_points(rng, f, 100, min_dist=0.02)
        a = FlowField(f)(z)
        b = FlowField(f.reciprocal())(z)
        assert np.max(np.abs(a + b) / np.abs(a)) < 1e-12
        d = FlowField(f, "desingularized")(z)
        assert np.max(np.abs(a - d) / np.abs(a)) < 1e-12


def test_double_periodicity_of_field(rng):
    f = random_function(rng)
    fld = FlowField(f)
    z = random_points(rng, f, 50)
    for om in f.lattice.periods:
        assert np.allclose(fld(z + om), fld(z), rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("form", ["pq", "desingularized", "meromorphic"])
def test_jacobian_matches_finite_differences(rng, form):
    f = random_function(rng)
    fld = FlowField(f, form)
    h = 1e-6
    for z in random_points(rng, f, 10, min_dist=0.05):
        J = jacobian_at(fld, z) if form != "desingularized" else None
        if J is None:
            # the desingularized form has no analytic Jacobian of its own
            J = jacobian_at(fld.with_form("pq"), z)
        dx = (fld(z + h) - fld(z - h)) / (2 * h)
        dy = (fld(z + 1j * h) - fld(z - 1j * h)) / (2 * h)
        fd = np.array([[dx.real, dy.real], [dx.imag, dy.imag]])
        assert np.max(np.abs(J - fd)) < 1e-5 * max(1, np.max(np.abs(fd)))


def test_jacobian_signs_at_simple_zero_and_pole():
    f = EllipticFunction(sn_divisor(Lattice(1, 0.8j)))
    fld = FlowField(f)
    assert np.all(np.linalg.eigvals(fld.jacobian(0.0)).real < 0)
    assert np.all(np.linalg.eigvals(fld.jacobian(0.4j)).real > 0)
    ev = np.linalg.eigvals(fld.jacobian(0.25))
    assert np.all(np.abs(ev.imag) < 1e-9) and ev.real.min() < 0 < ev.real.max()


def test_trajectory_near_zero_converges():
    fld = FlowField(nuclear(2, Lattice(1, 0.3 + 1.2j)))
    tr = integrate(fld, 0.04 + 0.02j)
    assert tr.status == "converged" and tr.endpoint.kind == "zero"
    assert tr.lattice.distance(tr.endpoint.location, 0) < 1e-12


def test_backward_trajectory_reaches_pole_and_invariants():
    L = Lattice(1, 0.3 + 1.2j)
    fld = FlowField(nuclear(2, L))
    tr = integrate(fld, 0.3 + 0.7j, "backward")
    assert tr.status == "converged" and tr.endpoint.kind == "pole"
    assert L.congruent(tr.endpoint.location, 0.5)
    assert np.all(np.diff(tr.absf) > 0)
    assert np.max(np.abs(tr.argf - tr.arg_value)) < 1e-5
    fwd = integrate(fld, 0.3 + 0.7j)
    assert np.all(np.diff(fwd.absf) < 0)


def test_meromorphic_exponential_decay(rng):
    f = random_function(rng, order=3)
    fld = FlowField(f, "meromorphic")
    z0 = random_points(rng, f, 1, min_dist=0.15)[0]
    tr = integrate(fld, z0, t_end=0.5)
    f0 = abs(f(z0))
    assert tr.t[-1] == pytest.approx(0.5)
    assert np.max(np.abs(tr.absf * np.exp(tr.t) - f0) / f0) < 1e-6


def test_integration_validates_arguments():
    fld = FlowField(nuclear())
    with pytest.raises(ValueError):
        integrate(fld, 0.3, "sideways")
    with pytest.raises(ValueError):
        integrate(fld, complex("nan"))


def test_budget_and_csv():
    fld = FlowField(nuclear(2, Lattice(1, 0.3 + 1.2j)))
    tr = integrate(fld, 0.3 + 0.7j, max_steps=5)
    assert tr.status == "budget" and tr.endpoint is None
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,re,im,absf,argf"
    assert len(lines) == len(tr.t) + 1
    assert all(len(l.split(",")) == 5 for l in lines[1:])


def test_integrate_many_is_order_independent():
    fld = FlowField(nuclear(2, Lattice(1, 0.3 + 1.2j)))
    seeds = [0.3 + 0.7j, 0.2 + 0.4j, 0.6 + 0.1j]
    a = integrate_many(fld, seeds)
    b = integrate_many(fld, seeds[::-1])[::-1]
    for x, y in zip(a, b):
        assert np.array_equal(x.z, y.z)


def test_newton_step():
    f = EllipticFunction(sn_divisor(Lattice(1, 0.8j)))
    assert newton_step(f, 0.5) == 0.5
    z = 0.05 + 0.03j
    res = []
    for _ in range(5):
        z = newton_step(f, z)
        res.append(abs(f(z)))
    # quadratic convergence: each residual is at most 10x the square of the previous
    for r0, r1 in zip(res, res[1:]):
        if r0 < 1e-14:
            break
        assert r1 <= 10 * r0**2 + 1e-15
    assert res[-1] < 1e-14
    # Euler consistency
    fld = FlowField(f, "meromorphic")
    z0, t = 0.3 + 0.2j, 1e-4
    step = newton_step(f, z0, t) - z0
    assert abs(step - t * fld(z0)) < 1e-12
    with pytest.raises(CriticalPointError):
        newton_step(f, 0.25)


def test_potential(rng):
    f = random_function(rng)
    for z in random_points(rng, f, 10):
        h = 1e-6
        dw = (potential(f, z + h) - potential(f, z - h)) / (2 * h)
        assert abs(dw - f.log_deriv(z)) < 1e-6 * max(1, abs(dw))
    with pytest.raises(PoleError):
        potential(f, f.divisor.zeros[0][0])
    g = f.with_multiplier(1 / f(0.123 + 0.321j))
    assert abs(potential(g, 0.123 + 0.321j).real) < 1e-12
    # Re w = -log|f| increases along forward orbits
    fld = FlowField(f)
    tr = integrate(fld, random_points(rng, f, 1)[0], max_steps=40)
    assert np.all(np.diff(-np.log(tr.absf)) > 0)


def test_tau0_continuity(rng):
    f = random_function(rng, degenerate=False)
    d = f.divisor
    L = f.lattice
    delta = 1e-6
    zeros = [(a + delta * np.exp(1j * rng.uniform(0, 2 * math.pi)), n) for a, n in d.zeros]
    heads = [(b + delta * np.exp(1j * rng.uniform(0, 2 * math.pi)), m) for b, m in d.poles[:-1]]
    bB, mB = d.poles[-1]
    last = (sum(n * a for a, n in zeros) - sum(m * b for b, m in heads) - d.lambda0) / mB
    assert abs(last - bB) < 10 * delta * len(d.points)
    g = EllipticFunction(validate_divisor(L, zeros, heads + [(last, mB)]), f.C)
    grid = L.from_bary(*np.meshgrid(np.linspace(0, 1, 40, endpoint=False), np.linspace(0, 1, 40, endpoint=False)))
    grid = grid.ravel()
    eq = np.array([e.location for e in FlowField(f).equilibria])
    grid = grid[np.min(L.distance(grid[:, None], eq[None, :]), axis=1) >= 0.05]
    assert np.max(np.abs(FlowField(g)(grid) - FlowField(f)(grid))) < 1e-3


def test_underflow_reports_partial_trajectory():
    # a double zero is non-hyperbolic for the desingularized field; with a tiny
    # step budget the integrator must not silently truncate
    f = EllipticFunction(validate_divisor(SQ, [(0.0, 2)], [0.25, 0.75]))
    fld = FlowField(f)
    tr = integrate(fld, 0.05 + 0.05j)
    assert tr.status in ("converged", "budget", "stalled")
    if tr.status == "converged":
        assert tr.endpoint.kind == "zero"


def test_hausdorff_identity_and_shift():
    fld = FlowField(nuclear(2, Lattice(1, 0.3 + 1.2j)))
    a = integrate(fld, 0.3 + 0.7j)
    assert hausdorff_distance(a, a) == 0
    assert hausdorff_distance(a, a, map_b=(1, 1e-3)) == pytest.approx(1e-3, rel=1e-6)
