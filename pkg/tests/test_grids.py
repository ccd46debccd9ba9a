import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activedoi.grids import (NO_SLIP, PERIODIC, DomainGrid, OrientationGrid, angular_derivative,
                             laplace_beltrami, moments, sphere_integrate, surface_divergence,
                             surface_gradient)
from oracles import cot_diff_matrix


@pytest.fixture(scope="module")
def og32():
    return OrientationGrid(32)


def test_orientation_invariants(og32):
    assert og32.weight * og32.M == pytest.approx(2 * np.pi, abs=1e-14)
    S = og32.weight * og32.mm.sum(axis=0)
    assert np.allclose(S, np.pi * np.eye(2), atol=1e-14)
    assert np.allclose(np.einsum("ja,ja->j", og32.m, og32.t), 0)


@pytest.mark.parametrize("M", [5, 4, 7])
def test_orientation_rejects_bad_M(M):
    with pytest.raises(ValueError):
        OrientationGrid(M)


def test_sphere_integrate_examples(og32):
    phi = og32.angles
    assert sphere_integrate(np.ones(32), og32) == pytest.approx(2 * np.pi, abs=1e-14)
    assert sphere_integrate(np.cos(phi) ** 2, og32) == pytest.approx(np.pi, abs=1e-14)
    assert abs(sphere_integrate(np.cos(phi), og32)) <= 1e-14
    for k in range(1, 32):
        assert abs(sphere_integrate(np.exp(1j * k * phi), og32)) <= 1e-13


def test_sphere_integrate_wrong_size(og32):
    with pytest.raises(ValueError):
        sphere_integrate(np.ones(31), og32)


def test_diff_matrix_matches_closed_form():
    for M in (6, 8, 16, 32):
        og = OrientationGrid(M)
        assert np.abs(og.diff_matrix - cot_diff_matrix(M)).max() <= 1e-13
        assert np.array_equal(og.diff_matrix, -og.diff_matrix.T)


def test_surface_gradient_examples(og32):
    phi = og32.angles
    assert np.abs(surface_gradient(np.full(32, 3.0), og32)).max() <= 1e-13
    a = np.array([0.3, -1.2])
    g = surface_gradient(og32.m @ a, og32)
    expect = a - (og32.m @ a)[:, None] * og32.m
    assert np.abs(g - expect).max() <= 1e-13
    g = surface_gradient(np.cos(3 * phi), og32)
    assert np.abs(g - (-3 * np.sin(3 * phi))[:, None] * og32.t).max() <= 1e-12


def test_surface_divergence(og32):
    assert np.abs(surface_divergence(np.zeros((32, 2)), og32)).max() == 0
    assert np.abs(surface_divergence(og32.t, og32)).max() <= 1e-13
    a = np.array([0.7, 0.4])
    v = a - (og32.m @ a)[:, None] * og32.m
    f = np.cos(og32.angles)
    w = og32.weight
    lhs = w * np.sum(surface_divergence(v, og32) * f)
    rhs = -w * np.sum(v * surface_gradient(f, og32)) + w * np.sum((v * og32.m).sum(-1) * f)
    assert abs(lhs - rhs) <= 1e-12
    with pytest.raises(ValueError):
        surface_divergence(og32.m, og32)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=18, max_size=18), st.lists(st.floats(-2, 2), min_size=18, max_size=18))
def test_laplace_beltrami_duality(cf, cg):
    og = OrientationGrid(32)
    phi = og.angles

    def poly(c):
        out = np.full(32, c[0])
        for k in range(1, 9):
            out = out + c[2 * k - 1] * np.cos(k * phi) + c[2 * k] * np.sin(k * phi)
        return out + c[17] * np.cos(8 * phi)

    f, g = poly(cf), poly(cg)
    lhs = og.weight * np.sum(laplace_beltrami(f, og) * g)
    rhs = -og.weight * np.sum(angular_derivative(f, og) * angular_derivative(g, og))
    assert abs(lhs - rhs) <= 1e-11 * max(1.0, abs(lhs))


def test_moments_examples(og32, rng):
    c = 0.37
    om, S = moments(np.full((2, 3, 32), c), og32)
    assert np.allclose(om, 2 * np.pi * c, atol=1e-14)
    assert np.allclose(S, np.pi * c * np.eye(2), atol=1e-14)
    psi = c * (1 + np.cos(2 * og32.angles))
    om, S = moments(psi, og32)
    assert om == pytest.approx(2 * np.pi * c, abs=1e-14)
    assert np.allclose(S, np.pi * c * np.eye(2) + np.pi * c / 2 * np.diag([1, -1]), atol=1e-14)
    psi = rng.random((4, 5, 32))
    om, S = moments(psi, og32)
    assert np.abs(np.trace(S, axis1=-2, axis2=-1) - om).max() <= 1e-13
    assert np.array_equal(S, np.swapaxes(S, -1, -2))
    om2, S2 = moments(3 * psi, og32)
    assert np.allclose(om2, 3 * om) and np.allclose(S2, 3 * S)


@pytest.mark.parametrize("bc", [PERIODIC, NO_SLIP])
def test_grad_div_adjoint(bc, rng):
    g = DomainGrid(9, 7, Lx=1.3, Ly=0.8, bc_mode=bc)
    p, u = rng.standard_normal(g.ncells), rng.standard_normal(g.nvel)
    val = g.vol * (g.ops.grad_vector(p) @ u + p @ (g.ops.div @ u))
    assert abs(val) <= 1e-13 * (1 + g.vol * np.abs(p).sum() * np.abs(u).max() / g.hx)
    assert np.abs(g.ops.grad_vector(np.full(g.ncells, 2.0))).max() == 0


def test_laplacian_of_linear_periodic_and_5_point():
    g = DomainGrid(8, 8, bc_mode=PERIODIC)
    X, Y = g.cell_centers()
    p = np.sin(2 * np.pi * X)
    lap = g.ops.laplacian(p)
    expect = (np.roll(p, 1, 0) + np.roll(p, -1, 0) - 2 * p) / g.hx ** 2
    assert np.abs(lap - expect).max() <= 1e-10
    assert np.abs(g.ops.laplacian(np.ones(g.shape))).max() == 0


@pytest.mark.parametrize("bc", [PERIODIC, NO_SLIP])
def test_streamfunction_divergence_free(bc):
    g = DomainGrid(10, 12, bc_mode=bc)
    vel = g.velocity_from_streamfunction(lambda X, Y: np.sin(np.pi * X) ** 2 * np.sin(2 * np.pi * Y) ** 2)
    assert np.abs(g.ops.div @ vel).max() <= 1e-12
    G = g.ops.velocity_gradient(vel)
    assert np.abs(np.trace(G, axis1=-2, axis2=-1) - g.ops.divergence(vel)).max() <= 1e-12


@pytest.mark.parametrize("bc", [PERIODIC, NO_SLIP])
def test_velocity_gradient_matches_loop_oracle(bc, rng):
    from oracles import LoopGrid

    g = DomainGrid(5, 6, bc_mode=bc)
    lg = LoopGrid(5, 6, bc == PERIODIC)
    vel = rng.standard_normal(g.nvel)
    assert np.abs(g.ops.velocity_gradient(vel) - lg.gradient(vel)).max() <= 1e-12
    w = rng.standard_normal(g.nvel)
    assert w @ (g.ops.stiffness @ vel) == pytest.approx(lg.dirichlet(w, vel), rel=1e-12)


def test_velocity_gradient_adjoint(rng):
    g = DomainGrid(6, 5, bc_mode=NO_SLIP)
    T = rng.standard_normal(g.shape + (2, 2))
    x = rng.standard_normal(g.nvel)
    lhs = g.ops.velocity_gradient_adjoint(T) @ x
    rhs = np.sum(T * g.ops.velocity_gradient(x))
    assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.parametrize("bc", [PERIODIC, NO_SLIP])
def test_convection_skew(bc, rng):
    g = DomainGrid(8, 8, bc_mode=bc)
    b = g.velocity_from_streamfunction(lambda X, Y: np.sin(np.pi * X) ** 2 * np.sin(np.pi * Y) ** 2)
    C = g.ops.convection(b)
    u = rng.standard_normal(g.nvel)
    assert abs(u @ (C @ u)) <= 1e-13
    assert abs(C + C.T).max() == 0


def test_wall_velocity_unknowns_are_interior():
    g = DomainGrid(4, 5, bc_mode=NO_SLIP)
    X, _ = g.u_faces()
    assert X.min() > 0 and X.max() < g.Lx
    _, Y = g.v_faces()
    assert Y.min() > 0 and Y.max() < g.Ly


def test_domain_grid_validation():
    with pytest.raises(ValueError):
        DomainGrid(3, 8)
    with pytest.raises(ValueError):
        DomainGrid(8, 8, bc_mode="slip")
