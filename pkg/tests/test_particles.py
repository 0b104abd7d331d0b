import numpy as np

from pfmsim.grid import BoundarySpec, FaceField, GridDescriptor
from pfmsim.particles import (ParticleSet, ReinitPolicy, advance_rk4, compute_impulse,
                              particles_from_csv, particles_to_csv, reinitialize_impulse,
                              seed_uniform)
from pfmsim.scenarios import flow_map_vortex
from pfmsim.transfer import SampledField

from conftest import periodic_grid


def rotation(th):
    c, s = np.cos(th), np.sin(th)
    return np.array([[c, -s], [s, c]])


def test_seeding_sub_lattice():
    g = GridDescriptor((4, 4), 1.0)
    ps = seed_uniform(g, ReinitPolicy(ppc=4))
    assert len(ps) == 64
    frac = np.unique(np.round(ps.x % 1.0, 12))
    np.testing.assert_allclose(frac, [0.25, 0.75])
    np.testing.assert_array_equal(ps.T, np.broadcast_to(np.eye(2), ps.T.shape))
    np.testing.assert_array_equal(ps.F, ps.T)
    assert not ps.gamma.any() and not ps.m0.any()


def test_seeding_is_deterministic():
    g = GridDescriptor((8, 8), 0.5)
    pol = ReinitPolicy(ppc=4, jitter=0.3)
    a, b = seed_uniform(g, pol, 7), seed_uniform(g, pol, 7)
    np.testing.assert_array_equal(a.x, b.x)
    assert not np.array_equal(a.x, seed_uniform(g, pol, 8).x)


def test_constant_velocity_translates_exactly():
    g, bc = periodic_grid(16, L=1.0)
    c = np.array([0.3, -0.7])
    ps = seed_uniform(g, ReinitPolicy())
    x0 = ps.x.copy()
    advance_rk4(ps, SampledField(FaceField.constant(g, c), g, bc), 0.01)
    np.testing.assert_allclose(ps.x, (x0 + 0.01 * c) % 1.0, atol=1e-14)
    np.testing.assert_array_equal(ps.F, np.broadcast_to(np.eye(2), ps.F.shape))
    np.testing.assert_array_equal(ps.T, ps.F)


def test_rigid_rotation_jacobians():
    g = GridDescriptor((32, 32), 1.0 / 32)
    bc = BoundarySpec.walls(2)
    om, dt = 1.0, 0.1
    u = FaceField.from_function(g, lambda p: om * np.stack([-(p[..., 1] - 0.5), p[..., 0] - 0.5], -1))
    ps = ParticleSet.at(np.array([[0.45, 0.5], [0.52, 0.41], [0.6, 0.55]]))
    advance_rk4(ps, SampledField(u, g, bc), dt)
    # RK4 on dF/dt = (om J) F: error is the Taylor tail of exp, about (om dt)^5 / 120
    K = 1.0 / 120.0 * 1.01
    bound = K * (om * dt) ** 5
    for p in range(3):
        assert np.abs(ps.F[p] - rotation(om * dt)).max() <= bound
        assert np.abs(ps.T[p] - rotation(-om * dt)).max() <= bound
    assert bound < 1e-7


def test_flow_map_identity_in_vortex():
    g = GridDescriptor((64, 64), 1.0 / 64)
    bc = BoundarySpec.walls(2)
    field = SampledField(FaceField.from_function(g, flow_map_vortex), g, bc)
    ps = seed_uniform(g, ReinitPolicy(ppc=4))
    for _ in range(200):
        advance_rk4(ps, field, 0.05)
    assert ps.identity_defect() <= 1e-5


def test_identity_defect_shrinks_with_dt():
    g, bc = periodic_grid(32)
    u = FaceField.from_function(g, lambda p: np.stack([np.sin(p[..., 0]) * np.cos(p[..., 1]),
                                                       -np.cos(p[..., 0]) * np.sin(p[..., 1])], -1))
    field = SampledField(u, g, bc)
    x0 = np.random.default_rng(3).uniform(0, 2 * np.pi, (200, 2))
    errs = []
    for dt, n in ((0.4, 10), (0.2, 20)):
        ps = ParticleSet.at(x0)
        for _ in range(n):
            advance_rk4(ps, field, dt)
        errs.append(ps.identity_defect())
    # local error O(dt^5), global O(dt^4): halving dt gains at least 2^3
    assert errs[1] <= errs[0] / 8.0


def test_time_reversal_returns_state():
    g, bc = periodic_grid(32)
    u = FaceField.from_function(g, lambda p: np.stack([np.sin(p[..., 0]) * np.cos(p[..., 1]),
                                                       -np.cos(p[..., 0]) * np.sin(p[..., 1])], -1))
    field = SampledField(u, g, bc)
    ps = ParticleSet.at(np.random.default_rng(5).uniform(1, 5, (100, 2)))
    x0 = ps.x.copy()
    advance_rk4(ps, field, 1e-3)
    advance_rk4(ps, field, -1e-3)
    np.testing.assert_allclose(ps.x, x0, atol=1e-10)
    np.testing.assert_allclose(ps.F, np.broadcast_to(np.eye(2), ps.F.shape), atol=1e-10)
    np.testing.assert_allclose(ps.T, np.broadcast_to(np.eye(2), ps.T.shape), atol=1e-10)


def test_volume_preserved_over_a_window():
    g, bc = periodic_grid(64)
    u = FaceField.from_function(g, lambda p: np.stack([np.sin(p[..., 0]) * np.cos(p[..., 1]),
                                                       -np.cos(p[..., 0]) * np.sin(p[..., 1])], -1))
    ps = seed_uniform(g, ReinitPolicy())
    field = SampledField(u, g, bc)
    for _ in range(20):
        advance_rk4(ps, field, g.dx)
    lo, hi = np.linalg.det(ps.F).min(), np.linalg.det(ps.F).max()
    assert max(1 - lo, hi - 1) <= 1e-3


def test_reinitialize_zero_and_affine():
    g = GridDescriptor((16, 16), 1.0 / 16)
    bc = BoundarySpec.walls(2)
    ps = reinitialize_impulse(g, bc, FaceField.zeros(g), ReinitPolicy())
    assert not ps.m0.any() and not ps.A.any()
    A = np.array([[0.4, 0.2], [-0.1, -0.4]])
    u = FaceField.from_function(g, lambda p: (p - 0.5) @ A.T)
    ps = reinitialize_impulse(g, bc, u, ReinitPolicy())
    inner = np.all((ps.x > 3 * g.dx) & (ps.x < 1 - 3 * g.dx), axis=1)
    np.testing.assert_allclose(ps.m0[inner], (ps.x[inner] - 0.5) @ A.T, atol=1e-12)
    np.testing.assert_array_equal(compute_impulse(ps), ps.m0)


def test_compute_impulse_rotation():
    th = np.pi / 4
    ps = ParticleSet.at(np.zeros((1, 2)))
    ps.T[0] = rotation(-th)
    ps.m0[0] = (1.0, 0.0)
    np.testing.assert_allclose(compute_impulse(ps)[0], [0.70710678, 0.70710678], atol=1e-8)
    ps = ParticleSet.at(np.zeros((1, 2)))
    ps.gamma[0] = (0.0, -9.8 * 0.5)
    np.testing.assert_array_equal(compute_impulse(ps)[0], [0.0, -4.9])


def test_particle_csv_round_trip(tmp_path):
    ps = seed_uniform(GridDescriptor((4, 4), 0.25), ReinitPolicy(jitter=0.2), 3)
    ps.m0[:] = np.random.default_rng(0).standard_normal(ps.m0.shape)
    particles_to_csv(ps, tmp_path / "p.csv")
    back = particles_from_csv(tmp_path / "p.csv")
    for name in ("x", "m0", "T", "F", "gamma", "A"):
        np.testing.assert_array_equal(getattr(back, name), getattr(ps, name))
