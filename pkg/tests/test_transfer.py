import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pfmsim.grid import BoundarySpec, FaceField, GridDescriptor
from pfmsim.particles import ReinitPolicy, seed_uniform
from pfmsim.transfer import (OutOfDomainError, SampledField, bspline_1d, g2p_vector, p2g_apic,
                             stencil_at)

from conftest import periodic_grid

A_MAT = np.array([[0.3, -1.2], [0.7, -0.3]])
B_VEC = np.array([0.5, -0.25])


def affine(p):
    return p @ A_MAT.T + B_VEC


def test_weights_on_a_node():
    _, w, dw = bspline_1d(np.array([3.0]))
    np.testing.assert_allclose(w[0], [0.125, 0.75, 0.125], atol=1e-15)
    np.testing.assert_allclose(dw[0], [-0.5, 0.0, 0.5], atol=1e-15)


def test_stencil_on_face_node():
    g = GridDescriptor((8, 8), 0.1)
    s = stencil_at([0.3, 0.45], g, 0)   # x-face node (3, 4)
    assert s.tensor_weights()[1, 1] == pytest.approx(0.5625)
    np.testing.assert_allclose(s.weights[:, 1], 0.75)
    with pytest.raises(OutOfDomainError):
        stencil_at([0.01, 0.4], g, 0)


def test_partition_of_unity_random(rng):
    s = rng.uniform(0, 50, 1000)
    _, w, dw = bspline_1d(s)
    np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(dw.sum(axis=1), 0.0, atol=1e-14)
    # first moment: linear reproduction
    base, w, _ = bspline_1d(s)
    nodes = base[:, None] + np.arange(3)
    np.testing.assert_allclose((w * nodes).sum(axis=1), s, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 100.0, allow_nan=False))
def test_partition_of_unity_property(s):
    _, w, dw = bspline_1d(np.array([s]))
    assert abs(w.sum() - 1.0) <= 1e-12
    assert abs(dw.sum()) <= 1e-12


def test_g2p_constant_and_affine(rng):
    g = GridDescriptor((16, 16), 1.0 / 16)
    bc = BoundarySpec.walls(2)
    X = rng.uniform(0.2, 0.8, (200, 2))
    k = np.array([1.5, -2.0])
    V, G = g2p_vector(FaceField.constant(g, k), g, bc, X)
    np.testing.assert_allclose(V, np.broadcast_to(k, V.shape), atol=1e-13)
    np.testing.assert_allclose(G, 0.0, atol=1e-12)
    V, G = g2p_vector(FaceField.from_function(g, affine), g, bc, X)
    np.testing.assert_allclose(V, affine(X), atol=1e-12)
    np.testing.assert_allclose(G, np.broadcast_to(A_MAT, G.shape), atol=1e-11)


def test_g2p_single_face_value():
    g, bc = periodic_grid(8, L=1.0)
    u = FaceField.zeros(g)
    u.comps[1][3, 4] = 2.0
    xn = g.node_origin(1) + g.dx * np.array([3, 4])
    X = xn + np.array([0.3, -0.2]) * g.dx
    V, _ = g2p_vector(u, g, bc, X[None])
    w = 1.0
    for a, t in enumerate([0.3, -0.2]):
        _, ww, _ = bspline_1d(np.array([4 + t]))   # any base, same offset
        w *= ww[0][1]
    assert V[0, 0] == 0.0
    assert V[0, 1] == pytest.approx(2.0 * w, rel=1e-13)


def test_single_particle_normalized_scatter():
    g, bc = periodic_grid(8, L=1.0)
    u, masks = p2g_apic(np.array([[0.43, 0.61]]), np.array([[1.0, 0.0]]), None, g, bc)
    assert masks[0].sum() == 9 and masks[1].sum() == 9
    np.testing.assert_array_equal(u.comps[0][masks[0]], 1.0)
    np.testing.assert_array_equal(u.comps[1][masks[1]], 0.0)
    assert np.all(u.comps[0][~masks[0]] == 0.0)


def test_apic_affine_reproduction_and_round_trip():
    g = GridDescriptor((16, 16), 1.0 / 16)
    bc = BoundarySpec.walls(2)
    ps = seed_uniform(g, ReinitPolicy(ppc=4))
    Q = affine(ps.x)
    A = np.broadcast_to(A_MAT, (len(ps), 2, 2)).copy()
    u, masks = p2g_apic(ps.x, Q, A, g, bc)
    ref = FaceField.from_function(g, affine)
    for c in range(2):
        np.testing.assert_allclose(u.comps[c][masks[c]], ref.comps[c][masks[c]], atol=1e-12)
    # wall faces are fully covered, so the grid field is the affine field itself
    inner = np.array([[0.3, 0.3], [0.55, 0.7], [0.71, 0.42]])
    V, G = g2p_vector(u, g, bc, inner)
    np.testing.assert_allclose(V, affine(inner), atol=1e-12)
    np.testing.assert_allclose(G, np.broadcast_to(A_MAT, G.shape), atol=1e-11)


def test_p2g_is_linear_in_values(rng):
    g, bc = periodic_grid(8, L=1.0)
    X = rng.uniform(0, 1, (300, 2))
    q1, q2 = rng.standard_normal((300, 2)), rng.standard_normal((300, 2))
    u1, _ = p2g_apic(X, q1, None, g, bc)
    u2, _ = p2g_apic(X, q2, None, g, bc)
    u3, _ = p2g_apic(X, 2.0 * q1 - 0.5 * q2, None, g, bc)
    for c in range(2):
        np.testing.assert_allclose(u3.comps[c], 2.0 * u1.comps[c] - 0.5 * u2.comps[c], atol=1e-12)


def test_uncovered_nodes_are_masked():
    g = GridDescriptor((16, 16), 1.0 / 16)
    bc = BoundarySpec.walls(2)
    u, masks = p2g_apic(np.array([[0.2, 0.2]]), np.array([[1.0, 1.0]]), None, g, bc)
    assert not masks[0][12, 12]
    assert u.comps[0][12, 12] == 0.0


def test_periodic_sampling_wraps(rng):
    g, bc = periodic_grid(16)
    u = FaceField.from_function(g, lambda p: np.stack([np.sin(p[..., 1]), np.cos(p[..., 0])], -1))
    s = SampledField(u, g, bc)
    X = rng.uniform(0, 2 * np.pi, (50, 2))
    V1, _ = s.sample(X)
    V2, _ = s.sample(X + 2 * np.pi * np.array([1.0, -1.0]))
    np.testing.assert_allclose(V1, V2, atol=1e-12)
