import numpy as np
import pytest

from gaussgraph.errors import SingularChartError, ValidationError
from gaussgraph.exterior import Stratified2Vector
from gaussgraph.graph_lift import (
    GaussGraphSample,
    SurfaceSample,
    gauss_curvature,
    lift_sample,
    mean_curvature,
    shape_operator_fd,
    validate_constraints,
)
from gaussgraph.surfaces import catalog as cat

E = np.eye(3)


def random_sample(rng, scale=2.0):
    nu = rng.normal(size=3)
    nu /= np.linalg.norm(nu)
    k1, k2 = rng.uniform(-scale, scale, size=2)
    d1 = rng.normal(size=3)
    return SurfaceSample.from_principal(rng.normal(size=3), nu, k1, k2, d1=d1, weight=1.0), k1, k2


def test_flat_sample():
    g = lift_sample(SurfaceSample.from_shape_operator(np.zeros(3), E[2], np.zeros((3, 3))))
    assert np.all(g.xi.xi1 == 0) and np.all(g.xi.xi2 == 0)
    assert g.xi_norm == 1.0
    assert g.eta.allclose(g.xi, atol=0)
    assert mean_curvature(g) == 0.0 and gauss_curvature(g) == 0.0


def test_sphere_north_pole_lift():
    s = SurfaceSample(E[2], E[2], E[0], E[1], np.diag([1.0, 1.0, 0.0]))
    g = lift_sample(s)
    np.testing.assert_array_equal(g.xi.xi1, np.outer(E[0], E[1]) - np.outer(E[1], E[0]))
    assert g.xi.xi2[0] == 1.0
    np.testing.assert_array_equal(g.xi.xi0, [1, 0, 0])


def test_cylinder_lift_has_no_vertical_part():
    s = SurfaceSample.from_principal(np.zeros(3), E[0], 1 / 3.0, 0.0)
    g = lift_sample(s)
    np.testing.assert_allclose(g.xi.xi2, 0, atol=1e-15)
    assert mean_curvature(g) == pytest.approx(1 / 3.0, abs=1e-12)


def test_lift_identities_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        s, k1, k2 = random_sample(rng)
        g = lift_sample(s)
        H, K = k1 + k2, k1 * k2
        assert np.linalg.norm(g.xi.xi0) == pytest.approx(1.0, abs=1e-12)
        L = s.L
        np.testing.assert_allclose(g.xi.xi1, np.outer(s.tau1, L @ s.tau2) - np.outer(s.tau2, L @ s.tau1), atol=1e-12)
        np.testing.assert_allclose(g.xi.xi2, K * g.xi.xi0, atol=1e-12)
        assert mean_curvature(g) == pytest.approx(H, abs=1e-9)
        assert gauss_curvature(g) == pytest.approx(K, abs=1e-9)
        assert g.eta.norm() == pytest.approx(1.0, abs=1e-12)
        assert g.xi_norm >= 1.0
        # norm identity, sum convention: |xi|^2 = (1 + k1^2)(1 + k2^2) = H^2 + (1 - K)^2
        assert g.xi.squared_norm() == pytest.approx((1 + k1**2) * (1 + k2**2), rel=1e-12)
        assert g.xi.squared_norm() == pytest.approx(H**2 + (1 - K) ** 2, rel=1e-9)
        assert g.eta0_norm == pytest.approx(1.0 / g.xi_norm, abs=1e-12)
        assert validate_constraints(g, 1e-10).passed


def test_four_h_squared_display_is_not_the_norm():
    # the variant sqrt(4H^2 + (1-K)^2) only bounds |xi| from above
    s = SurfaceSample.from_principal(np.zeros(3), E[2], 1.0, 1.0)
    g = lift_sample(s)
    assert g.xi_norm == pytest.approx(2.0, abs=1e-14)
    assert np.sqrt(4 * 2.0**2 + 0.0) > g.xi_norm


def test_frame_rotation_invariance():
    rng = np.random.default_rng(1)
    s, k1, k2 = random_sample(rng)
    g = lift_sample(s)
    for th in np.linspace(0.1, 3.0, 7):
        t1 = np.cos(th) * s.tau1 + np.sin(th) * s.tau2
        t2 = np.cross(s.nu, t1)
        h = lift_sample(SurfaceSample(s.x, s.nu, t1, t2, s.L))
        assert mean_curvature(h) == pytest.approx(mean_curvature(g), abs=1e-10)
        assert gauss_curvature(h) == pytest.approx(gauss_curvature(g), abs=1e-10)


def test_orientation_flip():
    rng = np.random.default_rng(2)
    s, k1, k2 = random_sample(rng)
    g = lift_sample(s)
    flipped = lift_sample(SurfaceSample(s.x, -s.nu, s.tau2, s.tau1, -s.L))
    assert mean_curvature(flipped) == pytest.approx(-mean_curvature(g), abs=1e-10)
    assert gauss_curvature(flipped) == pytest.approx(gauss_curvature(g), abs=1e-10)


def test_sample_invariants_rejected():
    with pytest.raises(ValidationError):
        SurfaceSample.from_shape_operator(np.zeros(3), E[2], np.diag([1.0, 1.0, 1.0])).check()
    L = np.zeros((3, 3))
    L[0, 1] = 1.0
    with pytest.raises(ValidationError):
        SurfaceSample.from_shape_operator(np.zeros(3), E[2], L).check()
    with pytest.raises(ValidationError):
        SurfaceSample(np.zeros(3), E[2], E[1], E[0], np.zeros((3, 3))).check()
    with pytest.raises(ValidationError):
        SurfaceSample(np.zeros(3), E[2], E[0], E[1], np.zeros((3, 3)), beta=0)


def _inject(zeta, y):
    return GaussGraphSample(np.zeros(3), y, Stratified2Vector.zero(), Stratified2Vector([1, 0, 0], zeta, [0, 0, 0]))


def test_validate_constraints_failures():
    rep = validate_constraints(_inject(np.eye(3), E[2]), 1e-10)
    assert not rep.passed and rep.trace == 3.0
    rep = validate_constraints(_inject(np.outer(E[2], E[2]), E[2]), 1e-10)
    assert not rep.passed and rep.left == 1.0 and rep.right == 1.0


def test_zeta_outside_g_star():
    g = _inject(np.zeros((3, 3)), E[2])
    g2 = GaussGraphSample(np.zeros(3), E[2], Stratified2Vector.zero(), Stratified2Vector.zero())
    assert g.in_g_star and not g2.in_g_star
    with pytest.raises(ValidationError):
        g2.zeta


# finite-difference oracle ---------------------------------------------------


def test_fd_sphere_equator():
    s = shape_operator_fd(cat.sphere(1.0), np.pi / 2, 0.3, h=1e-4)
    assert s.mean_curvature() == pytest.approx(2.0, abs=1e-6)
    assert s.gauss_curvature() == pytest.approx(1.0, abs=1e-6)
    assert s.weight == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("R", [0.5, 2.0, 3.0])
def test_fd_sphere_radius(R):
    g = lift_sample(shape_operator_fd(cat.sphere(R), 1.1, 2.0))
    assert mean_curvature(g) == pytest.approx(2 / R, rel=1e-6)
    assert gauss_curvature(g) == pytest.approx(1 / R**2, rel=1e-6)


def test_fd_cylinder():
    g = lift_sample(shape_operator_fd(cat.cylinder_patch(0.5, 2.0), 1.0, 1.0))
    assert mean_curvature(g) == pytest.approx(2.0, rel=1e-6)
    assert gauss_curvature(g) == pytest.approx(0.0, abs=1e-6)


def test_fd_plane():
    s = shape_operator_fd(cat.plane_patch(), 0.5, 0.5)
    np.testing.assert_allclose(s.L, 0, atol=1e-10)


def test_fd_torus_outer_equator_and_top_circle():
    T = cat.torus(2.0, 1.0)
    outer = lift_sample(shape_operator_fd(T, 0.4, 0.0))
    # k1 = 1/r = 1 and k2 = 1/(R + r) = 1/3
    assert mean_curvature(outer) == pytest.approx(4 / 3, abs=1e-6)
    assert gauss_curvature(outer) == pytest.approx(1 / 3, abs=1e-6)
    top = shape_operator_fd(T, 0.4, np.pi / 2)
    assert top.gauss_curvature() == pytest.approx(0.0, abs=1e-5)


def test_fd_matches_analytic_frame():
    for patch, (u, v) in ((cat.ellipsoid(1, 1.5, 0.8), (0.7, 1.3)), (cat.torus(), (1.0, 2.0))):
        _, n, L, _ = patch.frame(np.array(u), np.array(v))
        s = shape_operator_fd(patch, u, v)
        np.testing.assert_allclose(s.nu, n, atol=1e-9)
        np.testing.assert_allclose(s.L, L, atol=1e-6)


def test_fd_boundary_and_degenerate_chart():
    with pytest.raises(ValidationError):
        shape_operator_fd(cat.plane_patch(), 0.0, 0.5)

    class Collapsed:
        # rank-one chart: r(u, v) = (u, u, 0)
        domain = ((0.0, 1.0), (0.0, 1.0))
        scale = 1.0

        def position(self, u, v):
            return np.array([u, u, 0.0])

    with pytest.raises(SingularChartError):
        shape_operator_fd(Collapsed(), 0.5, 0.5)
