import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gaussgraph.errors import ValidationError
from gaussgraph.exterior import (
    Stratified2Vector,
    cofactor,
    hodge_frame,
    psi_pair,
    vec6,
    wedge6,
)

E = np.eye(3)
finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vec6s = arrays(float, 6, elements=finite)
mat3s = arrays(float, (3, 3), elements=finite)


def test_wedge_horizontal():
    w = wedge6(vec6(E[0], 0 * E[0]), vec6(E[1], 0 * E[0]))
    np.testing.assert_array_equal(w.xi0, [1, 0, 0])
    np.testing.assert_array_equal(w.xi1, np.zeros((3, 3)))
    np.testing.assert_array_equal(w.xi2, np.zeros(3))


def test_wedge_mixed_hand_expansion():
    # (e1, e2) ^ (e2, -e1): mixed part e1 (x) (-e1) - e2 (x) e2
    w = wedge6(vec6(E[0], E[1]), vec6(E[1], -E[0]))
    expected = np.zeros((3, 3))
    expected[0, 0] = -1.0
    expected[1, 1] = -1.0
    np.testing.assert_array_equal(w.xi1, expected)
    np.testing.assert_array_equal(w.xi0, [1, 0, 0])
    np.testing.assert_array_equal(w.xi2, [1, 0, 0])


def test_wedge_self_is_zero():
    a = np.array([0.3, -1.2, 2.0, 0.7, 0.1, -0.5])
    w = wedge6(a, a)
    assert w.squared_norm() == 0.0


@settings(max_examples=200, deadline=None)
@given(vec6s, vec6s)
def test_wedge_antisymmetric(a, b):
    w, v = wedge6(a, b), wedge6(b, a)
    np.testing.assert_array_equal(w.xi0, -v.xi0)
    np.testing.assert_array_equal(w.xi1, -v.xi1)
    np.testing.assert_array_equal(w.xi2, -v.xi2)


@settings(max_examples=200, deadline=None)
@given(vec6s, vec6s)
def test_simple_two_vector_norm(a, b):
    lhs = wedge6(a, b).squared_norm()
    rhs = (a @ a) * (b @ b) - (a @ b) ** 2
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, (a @ a) * (b @ b))


def test_wedge_bilinear():
    rng = np.random.default_rng(1)
    a, b, c = rng.normal(size=(3, 6))
    s = 1.7
    lhs = wedge6(s * a + c, b)
    rhs = wedge6(a, b).scaled(s) + wedge6(c, b)
    assert lhs.allclose(rhs, atol=1e-12)


def test_stratification_round_trip():
    rng = np.random.default_rng(2)
    w = Stratified2Vector(rng.normal(size=3), rng.normal(size=(3, 3)), rng.normal(size=3))
    B = w.to_bivector()
    np.testing.assert_allclose(B, -B.T)
    assert Stratified2Vector.from_bivector(B).allclose(w, atol=0)


def test_bivector_matches_outer_product():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(2, 6))
    B = np.outer(a, b) - np.outer(b, a)
    assert Stratified2Vector.from_bivector(B).allclose(wedge6(a, b), atol=1e-14)


def test_norm_is_sum_of_strata():
    w = Stratified2Vector([1, 2, 0], np.arange(9.0).reshape(3, 3), [0, 0, 3])
    assert w.squared_norm() == 5 + np.sum(np.arange(9.0) ** 2) + 9


def test_strata_are_immutable():
    w = Stratified2Vector.zero()
    with pytest.raises(ValueError):
        w.xi1[0, 0] = 1.0


def test_hodge_frame_canonical():
    t1, t2 = hodge_frame(E[2])
    np.testing.assert_array_equal(t1, E[0])
    np.testing.assert_array_equal(t2, E[1])


@pytest.mark.parametrize("nu", [E[0], E[1], -E[2], np.ones(3) / np.sqrt(3), np.array([0.6, 0.0, -0.8])])
def test_hodge_frame_oriented(nu):
    t1, t2 = hodge_frame(nu)
    frame = np.array([t1, t2, nu])
    np.testing.assert_allclose(frame @ frame.T, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(np.cross(t1, t2), nu, atol=1e-12)


def test_hodge_frame_rejects_non_unit():
    with pytest.raises(ValidationError):
        hodge_frame([0, 0, 1.1])


def test_cofactor_examples():
    np.testing.assert_array_equal(cofactor(np.eye(3)), np.eye(3))
    np.testing.assert_array_equal(cofactor(np.diag([2.0, 3.0, 4.0])), np.diag([12.0, 8.0, 6.0]))
    m = np.array([[0, 1, 0], [-1, 0, 0], [0, 0, 0]], float)
    expected = np.zeros((3, 3))
    expected[2, 2] = 1.0
    np.testing.assert_array_equal(cofactor(m), expected)


@settings(max_examples=200, deadline=None)
@given(arrays(float, (3, 3), elements=st.floats(-1, 1)))
def test_cofactor_adjugate_identity(m):
    np.testing.assert_allclose(cofactor(m).T @ m, np.linalg.det(m) * np.eye(3), atol=1e-10)


def test_cofactor_batched():
    rng = np.random.default_rng(4)
    ms = rng.normal(size=(5, 3, 3))
    np.testing.assert_allclose(cofactor(ms), np.array([cofactor(m) for m in ms]))


def test_psi_pair_examples():
    z = np.zeros((3, 3))
    z[0, 1] = 1.0
    assert psi_pair(E[2], z) == 1.0
    z = np.zeros((3, 3))
    z[1, 2], z[2, 1] = 1.0, -1.0
    assert psi_pair(E[0], z) == 2.0
    z = np.outer(E[0], E[1]) - np.outer(E[1], E[0])
    assert psi_pair(E[2], z) == 2.0


def test_psi_pair_closed_form():
    rng = np.random.default_rng(5)
    y, z = rng.normal(size=3), rng.normal(size=(3, 3))
    expected = y[0] * (z[1, 2] - z[2, 1]) - y[1] * (z[0, 2] - z[2, 0]) + y[2] * (z[0, 1] - z[1, 0])
    assert psi_pair(y, z) == pytest.approx(expected, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(arrays(float, 3, elements=finite), mat3s, mat3s)
def test_psi_pair_linear_and_kills_symmetric(y, z1, z2):
    scale = 1.0 + np.abs(y).max() * (np.abs(z1).max() + np.abs(z2).max())
    assert abs(psi_pair(y, z1 + z2) - psi_pair(y, z1) - psi_pair(y, z2)) <= 1e-12 * scale
    assert abs(psi_pair(2 * y, z1) - 2 * psi_pair(y, z1)) <= 1e-12 * scale
    assert abs(psi_pair(y, z1 + z1.T)) <= 1e-12 * scale
