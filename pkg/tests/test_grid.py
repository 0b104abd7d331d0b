import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pfmsim.grid import (BoundarySpec, ConfigurationError, FaceField, GridDescriptor, Outflow,
                         SolidWall, cfl_timestep, curl, divergence, enforce_boundary,
                         gradient_to_faces, laplacian_faces)
from pfmsim.poisson import laplacian_matrix

from conftest import periodic_grid, random_field


def _interior(a, k=1):
    return a[tuple(slice(k, -k) for _ in a.shape)]


def test_divergence_of_constant_is_zero():
    g, bc = periodic_grid(8)
    u = FaceField.constant(g, (1.0, 1.0))
    assert np.array_equal(divergence(u, g, bc), np.zeros(g.shape))


@pytest.mark.parametrize("sign,expected", [(-1.0, 0.0), (1.0, 2.0)])
def test_divergence_exact_on_linear_fields(sign, expected):
    g = GridDescriptor((8, 8), 0.125)
    bc = BoundarySpec.walls(2)
    u = FaceField.from_function(g, lambda p: np.stack([p[..., 0], sign * p[..., 1]], -1))
    np.testing.assert_allclose(divergence(u, g, bc), expected, atol=1e-12)


def test_gradient_of_linear_and_constant():
    g = GridDescriptor((8, 8), 0.125)
    bc = BoundarySpec.walls(2)
    phi = g.cell_centers()[..., 0]
    gr = gradient_to_faces(phi, g, bc)
    np.testing.assert_allclose(gr.comps[0][1:-1, :], 1.0, atol=1e-12)
    np.testing.assert_allclose(gr.comps[1], 0.0, atol=1e-12)
    assert gradient_to_faces(np.full(g.shape, 3.7), g, bc).max_abs() == 0.0


def test_gradient_divergence_adjoint(rng):
    g, bc = periodic_grid(8)
    phi = rng.standard_normal(g.shape)
    u = enforce_boundary(random_field(g, rng), g, bc)
    gr = gradient_to_faces(phi, g, bc)
    # unique faces only: the periodic duplicate face is dropped
    lhs = sum(float((gr.comps[c][tuple(slice(0, n) for n in g.shape)]
                     * u.comps[c][tuple(slice(0, n) for n in g.shape)]).sum()) for c in range(2))
    rhs = -float((phi * divergence(u, g, bc)).sum())
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("dim", [2, 3])
def test_div_grad_equals_cell_laplacian(dim, rng):
    g, bc = periodic_grid(4 if dim == 3 else 8, dim)
    phi = rng.standard_normal(g.shape)
    lhs = divergence(gradient_to_faces(phi, g, bc), g, bc).ravel()
    rhs = laplacian_matrix(g.shape, g.dx, bc) @ phi.ravel()
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-10)


def test_laplacian_constant_is_zero():
    g, bc = periodic_grid(16)
    w = FaceField.constant(g, (2.0, -1.0))
    assert laplacian_faces(w, g, bc).max_abs() < 1e-12


@pytest.mark.parametrize("order,bound", [(2, 8.1e-4), (4, 1e-5)])
def test_laplacian_of_sine(order, bound):
    g, bc = periodic_grid(64)
    w = FaceField.from_function(g, lambda p: np.stack([np.sin(p[..., 0]), np.zeros(p.shape[:-1])], -1))
    lap = laplacian_faces(w, g, bc, order)
    err = np.abs(lap.comps[0] + w.comps[0]).max()
    assert err <= bound
    # the Taylor remainder bound h^2/12 max|w''''| for order 2
    if order == 2:
        assert bound == pytest.approx(g.dx ** 2 / 12.0, rel=0.02)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2 ** 16))
def test_operators_are_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    g, bc = periodic_grid(8)
    u, v = random_field(g, rng), random_field(g, rng)
    u, v = enforce_boundary(u, g, bc), enforce_boundary(v, g, bc)
    w = u * a + v * b
    np.testing.assert_allclose(divergence(w, g, bc), a * divergence(u, g, bc) + b * divergence(v, g, bc),
                               atol=1e-11)
    for order in (2, 4):
        L = laplacian_faces(w, g, bc, order)
        Lu, Lv = laplacian_faces(u, g, bc, order), laplacian_faces(v, g, bc, order)
        for c in range(2):
            np.testing.assert_allclose(L.comps[c], a * Lu.comps[c] + b * Lv.comps[c], atol=1e-10)
    p, q = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    G = gradient_to_faces(a * p + b * q, g, bc)
    Gp, Gq = gradient_to_faces(p, g, bc), gradient_to_faces(q, g, bc)
    for c in range(2):
        np.testing.assert_allclose(G.comps[c], a * Gp.comps[c] + b * Gq.comps[c], atol=1e-11)


def test_affine_field_has_zero_laplacian_in_interior():
    g = GridDescriptor((12, 12), 0.1)
    bc = BoundarySpec(((Outflow(), Outflow()), (Outflow(), Outflow())))
    w = FaceField.from_function(g, lambda p: np.stack([1 + 2 * p[..., 0] - p[..., 1], 3 * p[..., 1]], -1))
    lap = laplacian_faces(w, g, bc)
    for c in range(2):
        assert np.abs(_interior(lap.comps[c], 2)).max() < 1e-10


def test_curl_of_rigid_rotation():
    g = GridDescriptor((16, 16), 1.0 / 16)
    bc = BoundarySpec.walls(2)
    om = 1.7
    u = FaceField.from_function(g, lambda p: om * np.stack([-(p[..., 1] - 0.5), p[..., 0] - 0.5], -1))
    w = curl(u, g, bc)
    np.testing.assert_allclose(w[1:-1, 1:-1], 2 * om, atol=1e-10)


def test_cfl_timestep():
    g = GridDescriptor((8, 8), 0.1)
    u = FaceField.constant(g, (2.0, 0.0))
    assert cfl_timestep(u, 0.1, 1.0) == pytest.approx(0.05)
    assert cfl_timestep(FaceField.zeros(g), 0.1, 1.0, dt_max=0.3) == 0.3
    big = FaceField.constant(g, (1e4, 0.0))
    assert cfl_timestep(big, 0.1, 1.0, 1e-5, 1e-3) == 1e-5
    assert cfl_timestep(FaceField.constant(g, (0.1, 0.0)), 0.1, 1.0, 1e-5, 1e-3) == 1e-3
    with pytest.raises(ConfigurationError):
        cfl_timestep(u, 0.1, 0.0)


def test_bad_grid_and_boundary_rejected():
    with pytest.raises(ConfigurationError):
        GridDescriptor((8,), 0.1)
    with pytest.raises(ConfigurationError):
        GridDescriptor((8, 2), 0.1)
    with pytest.raises(ConfigurationError):
        GridDescriptor((8, 8), -1.0)
    g = GridDescriptor((8, 8), 0.1)
    with pytest.raises(ConfigurationError):
        FaceField([np.zeros((8, 8)), np.zeros((8, 9))]).check(g)


def test_wall_enforcement_sets_normal_velocity():
    g = GridDescriptor((8, 8), 0.125)
    bc = BoundarySpec(((SolidWall(), SolidWall()), (SolidWall(), SolidWall((1.0, 0.0)))))
    u = enforce_boundary(FaceField.constant(g, (1.0, 1.0)), g, bc)
    assert np.all(u.comps[0][0] == 0) and np.all(u.comps[0][-1] == 0)
    assert np.all(u.comps[1][:, 0] == 0) and np.all(u.comps[1][:, -1] == 0)
