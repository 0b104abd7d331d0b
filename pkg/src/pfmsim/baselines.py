"""PIC, FLIP and APIC velocity advection on the same grid and projection machinery.

Particles carry velocity in ``ps.m0`` (and the affine matrix in ``ps.A`` for
APIC); the Jacobian slots are integrated but unused.
"""
from __future__ import annotations

from .grid import enforce_boundary
from .particles import advance_rk4, reinitialize_impulse
from .poisson import project
from .solver import (SimState, SimulationError, SolverConfig, estimate_midpoint_velocity,
                     force_field, ib_force_field, timestep)
from .transfer import SampledField, p2g_apic


def _seed(state: SimState, cfg: SolverConfig) -> None:
    state.ps = reinitialize_impulse(state.grid, state.bc, state.u, cfg.policy, cfg.seed)
    state.reinit_count += 1


def step_baseline(state: SimState, cfg: SolverConfig, dt: float | None = None,
                  blend: float | None = None) -> SimState:
    method = cfg.method
    if state.ps is None:
        _seed(state, cfg)
    if dt is None:
        dt = timestep(state, cfg)
    grid, bc = state.grid, state.bc
    fib = ib_force_field(state, cfg, dt) if cfg.ibm is not None else None
    u_mid = estimate_midpoint_velocity(state.u, dt, grid, bc, state.sys, cfg.poisson_tol)
    ps = state.ps
    advance_rk4(ps, SampledField(u_mid, grid, bc), dt)
    A = ps.A if method == "apic" else None
    ug, masks = p2g_apic(ps.x, ps.m0, A, grid, bc)
    for c in range(grid.dim):
        miss = ~masks[c]
        ug.comps[c][miss] = state.u.comps[c][miss]
    enforce_boundary(ug, grid, bc)
    u_old = ug
    if cfg.has_forces():
        f = force_field(ug, cfg, state.t, grid, bc)
        if fib is not None:
            f = f + fib
        ug = enforce_boundary(ug + f * dt, grid, bc)
    u_new, phi, _ = project(ug, state.sys, cfg.poisson_tol, phi0=state.phi)
    if not u_new.is_finite():
        raise SimulationError(f"non-finite velocity at step {state.k}")
    snew = SampledField(u_new, grid, bc)
    v_new, g_new = snew.sample(ps.x, grad=(method == "apic"))
    if method == "flip":
        b = cfg.flip_blend if blend is None else blend
        if b > 0.0:
            v_old, _ = SampledField(u_old, grid, bc).sample(ps.x, grad=False)
            ps.m0 = b * (ps.m0 + v_new - v_old) + (1.0 - b) * v_new
        else:
            ps.m0 = v_new
    else:
        ps.m0 = v_new
        if method == "apic":
            ps.A = g_new
    state.u_prev = state.u
    state.u = u_new
    state.m = u_new
    state.phi = phi
    state.t += dt
    state.k += 1
    state.last_dt = dt
    return state


def _with_method(cfg: SolverConfig, method: str) -> SolverConfig:
    from dataclasses import replace
    return cfg if cfg.method == method else replace(cfg, method=method)


def step_pic(state: SimState, cfg: SolverConfig, dt: float | None = None) -> SimState:
    return step_baseline(state, _with_method(cfg, "pic"), dt)


def step_flip(state: SimState, cfg: SolverConfig, blend: float | None = None,
              dt: float | None = None) -> SimState:
    return step_baseline(state, _with_method(cfg, "flip"), dt, blend)


def step_apic(state: SimState, cfg: SolverConfig, dt: float | None = None) -> SimState:
    return step_baseline(state, _with_method(cfg, "apic"), dt)
