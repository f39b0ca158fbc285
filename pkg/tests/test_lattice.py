import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newtonflow.lattice import (
    Lattice,
    LatticeError,
    apply_real_linear,
    canonical_map,
    congruent,
    is_reduced,
    normalize,
    reduce_basis,
    scale,
)
from oracles import brute_force_reduce

finite = st.floats(-3, 3, allow_nan=False)


def test_orientation_is_fixed_on_construction():
    L = Lattice(1j, 1)
    assert L.tau.imag > 0
    assert L.omega1 == 1 and L.omega2 == 1j


@pytest.mark.parametrize("w1,w2", [(0, 1j), (1, 2), (1, float("nan")), (1, 1 + 1e-17j)])
def test_degenerate_periods_rejected(w1, w2):
    with pytest.raises(LatticeError):
        Lattice(w1, w2)


@pytest.mark.parametrize(
    "w1,w2",
    [(1, 0.3 + 1.2j), (0.7 + 0.2j, 2.3 + 1.5j), (1, 5 + 0.1j), (2 - 1j, -3 + 4.5j), (1, 0.5 + 0.8660254037844386j)],
)
def test_reduction_matches_brute_force(w1, w2):
    red, M = reduce_basis(Lattice(w1, w2))
    u1, _, tau = brute_force_reduce(complex(w1), complex(w2), bound=20)
    assert is_reduced(red.tau)
    assert abs(red.tau - tau) < 1e-12
    assert abs(abs(red.omega1) - abs(u1)) < 1e-12
    # M is unimodular and maps the old basis to the new one
    assert round(np.linalg.det(M)) == 1
    assert abs(M[0, 0] * w1 + M[0, 1] * w2 - red.omega1) < 1e-12
    assert abs(M[1, 0] * w1 + M[1, 1] * w2 - red.omega2) < 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from("STt"), max_size=12), st.floats(-0.5, 0.49), st.floats(0.9, 3))
def test_reduction_is_basis_independent(word, x, y):
    tau0 = complex(x, y)
    if abs(tau0) < 1:
        tau0 = -1 / tau0
    # random unimodular change of basis as a word in S, T and T^-1
    M = np.eye(2, dtype=np.int64)
    gens = {"S": np.array([[0, -1], [1, 0]]), "T": np.array([[1, 1], [0, 1]]), "t": np.array([[1, -1], [0, 1]])}
    for g in word:
        M = gens[g] @ M
    w1 = M[0, 0] + M[0, 1] * tau0
    w2 = M[1, 0] + M[1, 1] * tau0
    red, _ = reduce_basis(Lattice(w1, w2))
    ref, _ = reduce_basis(Lattice(1, tau0))
    assert abs(red.tau - ref.tau) < 1e-9
    assert reduce_basis(red)[0] == red


@settings(max_examples=200, deadline=None)
@given(finite, finite, st.integers(-5, 5), st.integers(-5, 5))
def test_normalize_lands_in_cell_and_is_congruent(x, y, k1, k2):
    L = Lattice(1.1 + 0.1j, 0.4 + 0.9j)
    z = complex(x, y) + L.point(k1, k2)
    w = normalize(L, z)
    t1, t2 = L.to_bary(w)
    assert -1e-12 <= t1 < 1 and -1e-12 <= t2 < 1
    assert congruent(L, z, w, 1e-9)
    assert normalize(L, w) == pytest.approx(w, abs=1e-12)
    assert L.distance(z, w) < 1e-9


def test_distance_and_nearest_offset():
    L = Lattice(1, 1j)
    assert L.distance(0.9, 0.1) == pytest.approx(0.2)
    assert L.nearest_offset(0.9, 0.1) == pytest.approx(-0.2)
    assert L.distance(0.5 + 0.5j, 0) == pytest.approx(math.sqrt(0.5))
    # skewed basis: the nearest lattice point is 0.3+0.2i = omega2 - 7 omega1
    S = Lattice(1, 7.3 + 0.2j)
    assert S.distance(0.3 + 0.2j, 0) < 1e-12
    assert S.distance(0.16 + 0.1j, 0) == pytest.approx(abs(0.14 + 0.1j))


def test_congruent_rejects_bad_tol():
    with pytest.raises(ValueError):
        congruent(Lattice(1, 1j), 0, 1, tol=0)


def test_scaling_and_canonical_map():
    L = Lattice(1, 0.3 + 1.2j)
    S = scale(L, 2j)
    assert S.area == pytest.approx(4 * L.area)
    H = canonical_map(L)
    red, _ = L.reduced
    assert apply_real_linear(H, red.omega1) == pytest.approx(1)
    assert apply_real_linear(H, red.omega2) == pytest.approx(1j)
    with pytest.raises(LatticeError):
        scale(L, 0)


def test_json_round_trip_and_strict_keys():
    L = Lattice(0.7 + 0.2j, 2.3 + 1.5j)
    assert Lattice.from_json(L.to_json()) == L
    with pytest.raises(LatticeError):
        Lattice.from_json({"omega1": [1, 0], "omega2": [0, 1], "extra": 1})
    with pytest.raises(LatticeError):
        Lattice.from_json({"omega1": [1, 0], "omega2": [True, 1]})


@settings(max_examples=100, deadline=None)
@given(finite, finite, st.floats(0.2, 3), st.floats(-math.pi, math.pi))
def test_normalize_commutes_with_scaling(x, y, r, th):
    L = Lattice(1, 0.3 + 1.2j)
    alpha = r * complex(math.cos(th), math.sin(th))
    z = complex(x, y)
    S = scale(L, alpha)
    assert S.distance(alpha * normalize(L, z), normalize(S, alpha * z)) < 1e-9 * max(1, abs(alpha))


def test_spec_examples():
    L = Lattice(1, 1j)
    assert normalize(L, 1.3 + 0.2j) == pytest.approx(0.3 + 0.2j)
    assert normalize(L, 0) == 0
    assert normalize(L, -0.1 - 0.9j) == pytest.approx(0.9 + 0.1j)
    assert congruent(L, 0.1, 1.1)
    assert not congruent(L, 0.1, 0.4, 1e-9)
    assert congruent(L, 0.9999999999, 0, 1e-6)
    red, M = reduce_basis(Lattice(1, 1 + 1j))
    assert red.tau == pytest.approx(1j)
    red, M = reduce_basis(Lattice(2, 2j))
    assert red == Lattice(2, 2j) and (M == np.eye(2)).all()
    assert scale(L, 1j).tau == pytest.approx(1j)
    H = canonical_map(Lattice(1, 2j))
    assert np.allclose(H, [[1, 0], [0, 0.5]])
    tau = (1 / math.sqrt(3)) * complex(math.cos(math.pi / 3), math.sin(math.pi / 3))
    assert np.linalg.det(canonical_map(Lattice(1, tau))) > 0


def test_lattice_points_normalize_to_zero():
    L = Lattice(1.1 + 0.1j, 0.4 + 0.9j)
    for k1 in range(-5, 6):
        for k2 in range(-5, 6):
            assert abs(normalize(L, L.point(k1, k2))) < 1e-12
