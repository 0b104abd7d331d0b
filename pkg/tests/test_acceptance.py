"""Acceptance gate: one test per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v``; add ``--long`` (or set
PFMSIM_LONG=1) for the cylinder drag run.
"""
import time

import numpy as np
import pytest

from pfmsim import bench
from pfmsim.grid import (BoundarySpec, FaceField, GridDescriptor, divergence, enforce_boundary,
                         inner)
from pfmsim.particles import ReinitPolicy, advance_rk4, seed_uniform
from pfmsim.poisson import build_system, project, solve_mgpcg
from pfmsim.scenarios import flow_map_vortex, taylor_green_2d
from pfmsim.solver import SolverConfig, init_state, run, step, step_euler
from pfmsim.transfer import SampledField, bspline_1d, p2g_apic

from conftest import record


def _convergence(scenario, res, t_end, **kw):
    rc = bench.RunConfig(scenario, tuple(res), t_end=t_end, **kw)
    return bench.run_convergence(rc)


def _orders(table):
    return (f"Linf {np.round(table.linf, 7).tolist()} L2 {np.round(table.l2, 7).tolist()}; "
            f"fitted Linf {table.fitted_linf:.3f}, L2 {table.fitted_l2:.3f}")


@pytest.mark.slow
def test_inviscid_taylor_green_order():
    table = _convergence("taylor_green_2d", (32, 64, 128), 5.0, nu=0.0, cfl=1.0, reinit=20)
    ok = table.fitted_linf >= 2.5 and table.fitted_l2 >= 2.5
    assert record("1 inviscid Taylor-Green order >= 2.5", ok, _orders(table))


@pytest.mark.slow
@pytest.mark.parametrize("nu", [5e-3, 5e-2])
def test_viscous_taylor_green_order(nu):
    table = _convergence("taylor_green_2d", (32, 64, 128), 5.0, nu=nu, cfl=0.5)
    ok = all(2.0 <= o <= 3.2 for o in (table.fitted_linf, table.fitted_l2))
    assert record(f"2 viscous Taylor-Green nu={nu:g} order in [2.0, 3.2]", ok, _orders(table))


def test_flow_map_identity():
    g = GridDescriptor((64, 64), 1.0 / 64)
    bc = BoundarySpec.walls(2)
    field = SampledField(FaceField.from_function(g, flow_map_vortex), g, bc)
    ps = seed_uniform(g, ReinitPolicy(ppc=4))
    for _ in range(200):
        advance_rk4(ps, field, 0.05)
    err = ps.identity_defect()
    assert record("3 flow-map identity ||FT - I|| <= 1e-5", err <= 1e-5,
                  f"max defect {err:.3e} over {len(ps)} particles, 200 steps")


@pytest.mark.slow
@pytest.mark.parametrize("Re,res,ladder,t_max,tol", [
    (100, 128, (64,), 30.0, 0.05),
    (1000, 256, (64, 128), 12.0, 0.06),
])
def test_cavity_profiles(Re, res, ladder, t_max, tol):
    r = bench.run_cavity(Re, res, ladder, t_max=t_max, t_coarse=40.0)
    ok = r.deviation <= tol
    assert record(f"4 cavity Re={Re} at {res}^2 deviation <= {tol}", ok,
                  f"max deviation {r.deviation:.4f} at t={r.t:.1f} "
                  f"(cycle-mean rate {r.rate:.1e}, steady={r.steady})")


@pytest.mark.long
def test_karman_drag():
    st, cfg = bench.run_karman(40.0, 256, 100.0)
    cd = cfg.ibm.series.mean_cd()
    ok = 1.42 <= cd <= 1.62
    assert record("5 Karman Re=40 mean Cd in [1.42, 1.62]", ok, f"mean Cd over the last third {cd:.4f}")


@pytest.mark.slow
def test_leapfrog_dissipation_ordering():
    out = bench.run_leapfrog(("pfm", "apic", "pic"), 128, 20.0)
    ke = {m: out[m]["ke"] for m in out}
    ok = ke["pfm"] >= ke["apic"] >= ke["pic"] and out["pfm"]["vortices"] >= 4
    detail = ", ".join(f"{m} KE {ke[m]:.6e} vortices {out[m]['vortices']}" for m in out)
    assert record("6 leapfrog KE(PFM) >= KE(APIC) >= KE(PIC), PFM keeps 4 vortices", ok, detail)


@pytest.mark.slow
def test_abc_order():
    table = _convergence("abc_3d", (16, 32, 48), 1.0, cfl=0.5)
    ok = table.fitted_linf >= 2.3 and table.fitted_l2 >= 2.3
    assert record("7 ABC order >= 2.3", ok, _orders(table))


def test_property_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    checks = {}

    _, w, dw = bspline_1d(rng.uniform(0, 64, 1000))
    checks["partition of unity"] = max(np.abs(w.sum(1) - 1).max(), np.abs(dw.sum(1)).max()) <= 1e-12
    g = GridDescriptor((16, 16), 1.0 / 16)
    walls = BoundarySpec.walls(2)
    A = np.array([[0.3, -1.2], [0.7, -0.3]])
    ps = seed_uniform(g, ReinitPolicy())
    u, masks = p2g_apic(ps.x, ps.x @ A.T, np.broadcast_to(A, (len(ps), 2, 2)).copy(), g, walls)
    ref = FaceField.from_function(g, lambda p: p @ A.T)
    checks["affine reproduction"] = max(np.abs(u.comps[c] - ref.comps[c])[masks[c]].max()
                                        for c in range(2)) <= 1e-12

    proj_ok = True
    for bc in (walls, BoundarySpec.periodic(2)):
        sys_ = build_system(g, bc)
        m = enforce_boundary(FaceField([rng.standard_normal(g.face_shape(c)) for c in range(2)]), g, bc)
        up, _, _ = project(m, sys_, 1e-10)
        u2, _, _ = project(up, sys_, 1e-10)
        proj_ok &= np.abs(divergence(up, g, bc)).max() <= 1e-6 * np.abs(divergence(m, g, bc)).max()
        proj_ok &= max(np.abs(a - b).max() for a, b in zip(u2.comps, up.comps)) <= 1e-9
        proj_ok &= inner(up, up, bc) <= inner(m, m, bc)
    checks["projection"] = bool(proj_ok)

    dense_ok = True
    for d in (2, 3):
        gd = GridDescriptor((16,) * d, 1.0 / 16)
        for bc in (BoundarySpec.walls(d), BoundarySpec.periodic(d)):
            sys_ = build_system(gd, bc)
            rhs = rng.standard_normal(gd.shape)
            phi, _ = solve_mgpcg(sys_, rhs, 1e-12, 500)
            b = rhs.ravel() - rhs.mean()
            x = np.linalg.solve(sys_.matrix.toarray() + 1.0, b)
            x -= x.mean()
            dense_ok &= np.abs(phi.ravel() - x).max() <= 1e-8 * np.abs(x).max()
    checks["MGPCG vs dense"] = bool(dense_ok)

    sc = taylor_green_2d(0.0, 32)
    cfg_a, cfg_b = SolverConfig(), SolverConfig(body_force=(0.0, 0.0))
    a = init_state(sc.grid, sc.bc, sc.initial_field(), cfg_a)
    b = init_state(sc.grid, sc.bc, sc.initial_field(), cfg_b)
    gamma_zero = True
    for _ in range(25):
        step_euler(a, cfg_a)
        step(b, cfg_b)
        gamma_zero &= not a.ps.gamma.any() and not b.ps.gamma.any()
    checks["gamma stays zero"] = bool(gamma_zero)
    checks["forced path bit-equals Euler path"] = all(np.array_equal(x, y) for x, y in zip(a.u.comps, b.u.comps))

    gp, bcp = GridDescriptor((16, 16), 1.0 / 16), BoundarySpec.periodic(2)
    gvec = np.array([0.0, -9.8])
    cfg = SolverConfig(body_force=tuple(gvec), dt_max=0.01, poisson_tol=1e-10)
    st = init_state(gp, bcp, FaceField.zeros(gp), cfg)
    run(st, cfg, 0.25)
    checks["gravity u = g t"] = max(np.abs(st.u.comps[c] - gvec[c] * st.t).max() for c in range(2)) <= 1e-8

    elapsed = time.perf_counter() - t0
    ok = all(checks.values()) and elapsed < 60.0
    failed = [k for k, v in checks.items() if not v]
    assert record("8 property suite", ok,
                  f"{len(checks) - len(failed)}/{len(checks)} checks in {elapsed:.1f}s"
                  + (f"; failed: {failed}" if failed else ""))
