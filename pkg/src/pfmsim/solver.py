"""Impulse-based particle flow map stepping for the Euler and Navier-Stokes equations."""
from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .grid import (BoundarySpec, ConfigurationError, FaceField, GridDescriptor, curl,
                   cfl_timestep, divergence, enforce_boundary, face_to_cell, laplacian_faces)
from .ibm import DragLiftSeries, MarkerSet, drag_lift, recover_pressure, sample_ib_forces, spread_to_grid
from .io import ensure_dir, read_field_csv, write_field_csv, write_vtk
from .particles import (ParticleSet, ReinitPolicy, advance_rk4, compute_impulse, particles_from_csv,
                        particles_to_csv, reinitialize_impulse)
from .poisson import PoissonSystem, build_system, project
from .transfer import SampledField, p2g_apic, semi_lagrangian

METHODS = ("pfm", "pic", "flip", "apic")


class SimulationError(RuntimeError):
    pass


@dataclass
class IBMConfig:
    markers: MarkerSet
    rho: float = 1.0
    u_inf: float = 1.0
    diameter: float = 1.0
    drag_axis: int = 0
    series: DragLiftSeries | None = None

    def __post_init__(self):
        if self.series is None:
            self.series = DragLiftSeries(self.rho, self.u_inf, self.diameter)


@dataclass
class SolverConfig:
    cfl: float = 1.0
    nu: float = 0.0
    reinit: int = 20
    lap_order: int = 2
    body_force: object = None      # None, constant vector or callable t -> vector
    method: str = "pfm"
    poisson_tol: float = 1e-6
    dt_min: float = 0.0
    dt_max: float = math.inf
    viscous_cfl: float | None = None   # caps dt at viscous_cfl * dx^2 / nu
    ppc: int | None = None
    jitter: float = 0.0
    seed: int = 0
    flip_blend: float = 0.99
    det_bounds: tuple = (0.05, 20.0)
    ibm: IBMConfig | None = None

    def __post_init__(self):
        if not 0.0 < self.cfl <= 2.0:
            raise ConfigurationError("cfl must lie in (0, 2]")
        if self.nu < 0:
            raise ConfigurationError("viscosity must be non-negative")
        if self.reinit < 1:
            raise ConfigurationError("reinit interval must be >= 1")
        if self.lap_order not in (2, 4):
            raise ConfigurationError("lap_order must be 2 or 4")
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}")
        if not 0.0 <= self.flip_blend <= 1.0:
            raise ConfigurationError("flip blend must lie in [0, 1]")

    @property
    def policy(self) -> ReinitPolicy:
        return ReinitPolicy(self.reinit, self.ppc, self.jitter)

    def has_forces(self) -> bool:
        return self.nu > 0.0 or self.body_force is not None or self.ibm is not None

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("ibm", "body_force")}
        bf = self.body_force
        d["body_force"] = None if bf is None else (list(map(float, bf)) if not callable(bf) else repr(bf))
        d["ibm"] = None if self.ibm is None else {"markers": len(self.ibm.markers), "rho": self.ibm.rho,
                                                  "u_inf": self.ibm.u_inf, "diameter": self.ibm.diameter,
                                                  "drag_axis": self.ibm.drag_axis}
        if math.isinf(d["dt_max"]):
            d["dt_max"] = None
        d["det_bounds"] = list(d["det_bounds"])
        return d

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class SimState:
    grid: GridDescriptor
    bc: BoundarySpec
    sys: PoissonSystem
    u: FaceField
    m: FaceField
    t: float = 0.0
    k: int = 0
    ps: ParticleSet | None = None
    phi: np.ndarray | None = None
    m_ref: FaceField | None = None     # grid impulse whose gradient seeds A_p
    u_ref: FaceField | None = None     # velocity paired with m_ref (wall ghosts)
    u_prev: FaceField | None = None
    pressure: np.ndarray | None = None
    ib_force: FaceField | None = None
    f_prev: FaceField | None = None    # smooth force of the previous step
    last_dt: float = 0.0
    reinit_count: int = 0
    log: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def estimate_midpoint_velocity(u: FaceField, dt: float, grid: GridDescriptor, bc: BoundarySpec,
                               sys_: PoissonSystem, tol: float = 1e-6) -> FaceField:
    """Advect ``u`` by itself over ``dt / 2`` (RK4 back-trace) and project."""
    if dt == 0.0:
        return u.copy()
    half = semi_lagrangian(u, grid, bc, 0.5 * dt)
    enforce_boundary(half, grid, bc)
    out, _, _ = project(half, sys_, tol)
    return out


def body_force_vector(cfg: SolverConfig, t: float, dim: int) -> np.ndarray | None:
    bf = cfg.body_force
    if bf is None:
        return None
    v = bf(t) if callable(bf) else bf
    v = np.asarray(v, dtype=float)
    if v.shape != (dim,):
        raise ConfigurationError(f"body force must have {dim} components")
    return v


def force_field(m_grid: FaceField, cfg: SolverConfig, t: float, grid: GridDescriptor,
                bc: BoundarySpec, gauge: FaceField | None = None) -> FaceField:
    """nu * lap(m) + f(t) on the faces."""
    out = FaceField.zeros(grid)
    if cfg.nu > 0.0:
        out = laplacian_faces(m_grid, grid, bc, cfg.lap_order, gauge=gauge) * cfg.nu
    f = body_force_vector(cfg, t, grid.dim)
    if f is not None:
        for c in range(grid.dim):
            out.comps[c] += f[c]
    return out


def pulled_force(ps: ParticleSet, force: FaceField, grid: GridDescriptor, bc: BoundarySpec) -> np.ndarray:
    """F_p^T f(x_p), the integrand of the path buffer."""
    fp, _ = SampledField(force, grid, bc, mode="extrapolate").sample(ps.x, grad=False)
    return np.einsum("pji,pj->pi", ps.F, fp)


def accumulate_gamma(ps: ParticleSet, force: FaceField, dt: float, grid: GridDescriptor,
                     bc: BoundarySpec, prev: np.ndarray | None = None) -> np.ndarray:
    """Gamma_p += dt F_p^T f(x_p).

    Forward Euler by default; with ``prev`` (the integrand at the start of the
    step) the trapezoidal rule is used.  Returns the per-particle impulse
    increment ``T_p^T dGamma_p``.
    """
    g = pulled_force(ps, force, grid, bc)
    dgamma = dt * g if prev is None else 0.5 * dt * (prev + g)
    ps.gamma += dgamma
    return np.einsum("pji,pj->pi", ps.T, dgamma)


def init_state(grid: GridDescriptor, bc: BoundarySpec, u0: FaceField, cfg: SolverConfig | None = None,
               sys_: PoissonSystem | None = None) -> SimState:
    """Project the initial field and return a fresh state (particles seeded on the first step)."""
    bc.check(grid)
    u0.check(grid)
    cfg = cfg or SolverConfig()
    sys_ = sys_ or build_system(grid, bc)
    u = enforce_boundary(u0.copy(), grid, bc)
    # a field that is already discretely solenoidal is kept bit-exact
    div = np.abs(divergence(u, grid, bc)).max() * grid.dx
    if div > 64 * np.finfo(float).eps * max(u.max_abs(), 1e-300):
        u, _, _ = project(u, sys_, min(cfg.poisson_tol, 1e-10))
    return SimState(grid, bc, sys_, u, u.copy(), phi=np.zeros(grid.shape), u_prev=u.copy())


def timestep(state: SimState, cfg: SolverConfig) -> float:
    h = state.grid.dx
    dt = cfl_timestep(state.u, h, cfg.cfl, cfg.dt_min, cfg.dt_max)
    if cfg.viscous_cfl is not None and cfg.nu > 0.0:
        dt = min(dt, cfg.viscous_cfl * h * h / cfg.nu)
    if not dt > 1e-9 * h:
        # a CFL step this small means the velocity has run away
        raise SimulationError(f"time step collapsed to {dt:.3e} at step {state.k}, t={state.t:.6g}")
    return dt


def _needs_reinit(state: SimState, cfg: SolverConfig) -> bool:
    if state.ps is None or state.k % cfg.reinit == 0:
        return True
    lo, hi = state.ps.det_range()
    return lo <= cfg.det_bounds[0] or hi >= cfg.det_bounds[1]


def _reinit(state: SimState, cfg: SolverConfig) -> None:
    state.ps = reinitialize_impulse(state.grid, state.bc, state.u, cfg.policy, cfg.seed + state.k)
    state.m = state.u.copy()
    state.m_ref = state.u
    state.u_ref = state.u
    state.reinit_count += 1


def _transport(state: SimState, cfg: SolverConfig, dt: float) -> FaceField:
    """Midpoint velocity, flow-map advance, impulse reconstruction and P2G."""
    grid, bc = state.grid, state.bc
    u_mid = estimate_midpoint_velocity(state.u, dt, grid, bc, state.sys, cfg.poisson_tol)
    ps = state.ps
    advance_rk4(ps, SampledField(u_mid, grid, bc), dt)
    mp = compute_impulse(ps)
    gauge = state.m_ref - state.u_ref
    _, ps.A = SampledField(state.m_ref, grid, bc, gauge=gauge).sample(ps.x, grad=True)
    m_grid, masks = p2g_apic(ps.x, mp, ps.A, grid, bc)
    for c in range(grid.dim):
        miss = ~masks[c]
        if miss.any():
            m_grid.comps[c][miss] = state.m.comps[c][miss]
    return enforce_boundary(m_grid, grid, bc)


def _finish(state: SimState, cfg: SolverConfig, m_grid: FaceField, dt: float) -> SimState:
    u_new, phi, stats = project(m_grid, state.sys, cfg.poisson_tol, phi0=state.phi)
    if not u_new.is_finite():
        raise SimulationError(f"non-finite velocity after projection at step {state.k}, t={state.t:.6g}")
    state.u_prev = state.u
    state.u = u_new
    state.m = m_grid
    state.m_ref = m_grid
    state.u_ref = u_new
    state.phi = phi
    state.t += dt
    state.k += 1
    state.last_dt = dt
    return state


def step_euler(state: SimState, cfg: SolverConfig, dt: float | None = None) -> SimState:
    """One step of the inviscid, force-free flow map scheme."""
    if _needs_reinit(state, cfg):
        _reinit(state, cfg)
    if dt is None:
        dt = timestep(state, cfg)
    m_grid = _transport(state, cfg, dt)
    return _finish(state, cfg, m_grid, dt)


def ib_force_field(state: SimState, cfg: SolverConfig, dt: float) -> FaceField:
    """Body-on-fluid IB acceleration on the faces; records Cd/Cl."""
    ib = cfg.ibm
    grid = state.grid
    state.pressure = recover_pressure(state.u, dt, state.sys, ib.rho, 1e-8, p0=state.pressure)
    forces = sample_ib_forces(state.u, state.u_prev, state.pressure, dt, cfg.nu * ib.rho, ib.rho,
                              ib.markers, grid)
    # per-marker volume is ds * dx in 2D; spread_to_grid supplies the ds / dx^d factor
    F = spread_to_grid(ib.markers, forces.on_body * grid.dx, grid, state.bc)
    cd, cl = drag_lift(F, ib.rho, ib.u_inf, ib.diameter, grid.dx, ib.drag_axis, bc=state.bc)
    ib.series.append(state.t, cd, cl)
    state.ib_force = F
    return F * (1.0 / ib.rho)


def step(state: SimState, cfg: SolverConfig, dt: float | None = None) -> SimState:
    """One step of the flow map scheme with viscosity, body and IB forces."""
    if cfg.method != "pfm":
        from .baselines import step_baseline
        return step_baseline(state, cfg, dt)
    if not cfg.has_forces():
        return step_euler(state, cfg, dt)
    if _needs_reinit(state, cfg):
        _reinit(state, cfg)
    if dt is None:
        dt = timestep(state, cfg)
    grid, bc = state.grid, state.bc
    fib = ib_force_field(state, cfg, dt) if cfg.ibm is not None else None
    if state.f_prev is None:
        state.f_prev = force_field(state.m, cfg, state.t, grid, bc, gauge=state.m - state.u)
    g0 = pulled_force(state.ps, state.f_prev, grid, bc)
    m_grid = _transport(state, cfg, dt)
    gauge = m_grid - state.u
    # Heun: Euler predictor for the end-of-step force, then the trapezoidal rule
    dm0 = np.einsum("pji,pj->pi", state.ps.T, dt * g0)
    pred, _ = p2g_apic(state.ps.x, dm0, None, grid, bc)
    f1 = force_field(enforce_boundary(m_grid + pred, grid, bc), cfg, state.t + dt, grid, bc, gauge=gauge)
    dm = accumulate_gamma(state.ps, f1, dt, grid, bc, prev=g0)
    if fib is not None:
        # direct forcing acts on the current state only
        dm = dm + accumulate_gamma(state.ps, fib, dt, grid, bc)
    # the buffer update changes the particle impulses; carry that change to the grid
    dm_grid, _ = p2g_apic(state.ps.x, dm, None, grid, bc)
    m_grid = enforce_boundary(m_grid + dm_grid, grid, bc)
    _finish(state, cfg, m_grid, dt)
    state.f_prev = force_field(m_grid, cfg, state.t, grid, bc, gauge=m_grid - state.u)
    return state


def run(state: SimState, cfg: SolverConfig, t_end: float, callback: Callable | None = None,
        max_steps: int | None = None) -> SimState:
    """Advance to ``t_end``; the last step is shortened to land on it."""
    n = 0
    while state.t < t_end - 1e-12 * max(1.0, t_end):
        if max_steps is not None and n >= max_steps:
            break
        dt = timestep(state, cfg)
        if state.t + dt > t_end:
            dt = t_end - state.t
        step(state, cfg, dt)
        n += 1
        if callback is not None and callback(state) is False:
            break
    return state


def vorticity(state: SimState) -> np.ndarray:
    return curl(state.u, state.grid, state.bc)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(state: SimState, cfg: SolverConfig, path, extra: dict | None = None) -> str:
    """CSV/VTK field dumps, particle CSV and a JSON manifest."""
    ensure_dir(path)
    g = state.grid
    files = {}
    for name, fld in (("u", state.u), ("m", state.m)):
        for c, a in enumerate(fld.comps):
            fn = f"{name}{c}.csv"
            write_field_csv(os.path.join(path, fn), a, g.dx, g.origin)
            files[f"{name}{c}"] = fn
    if state.phi is not None:
        write_field_csv(os.path.join(path, "phi.csv"), state.phi, g.dx, g.origin)
        files["phi"] = "phi.csv"
    if state.ps is not None:
        particles_to_csv(state.ps, os.path.join(path, "particles.csv"))
        files["particles"] = "particles.csv"
    cells = np.stack(face_to_cell(state.u), axis=-1)
    w = vorticity(state)
    write_vtk(os.path.join(path, "fields.vtk"), g.shape, g.dx, g.origin,
              {"velocity": cells, "vorticity": w if g.dim == 2 else np.linalg.norm(w, axis=-1)})
    files["vtk"] = "fields.vtk"
    manifest = {"time": state.t, "step": state.k, "config": cfg.to_dict(), "config_hash": cfg.hash(),
                "grid": {"shape": list(g.shape), "dx": g.dx, "origin": list(g.origin)},
                "boundary": state.bc.to_dict(), "files": files, "written": time.time()}
    if extra:
        manifest.update(extra)
    with open(os.path.join(path, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    return path


def load_checkpoint(path) -> tuple[SimState, dict]:
    with open(os.path.join(path, "manifest.json")) as fh:
        man = json.load(fh)
    gd = man["grid"]
    grid = GridDescriptor(tuple(gd["shape"]), gd["dx"], tuple(gd["origin"]))
    bc = BoundarySpec.from_dict(man["boundary"])
    files = man["files"]

    def field_of(name):
        return FaceField([read_field_csv(os.path.join(path, files[f"{name}{c}"]))[0]
                          for c in range(grid.dim)])

    u, m = field_of("u"), field_of("m")
    state = SimState(grid, bc, build_system(grid, bc), u, m, t=man["time"], k=man["step"])
    if "phi" in files:
        state.phi = read_field_csv(os.path.join(path, files["phi"]))[0]
    if "particles" in files:
        state.ps = particles_from_csv(os.path.join(path, files["particles"]))
    state.m_ref, state.u_ref, state.u_prev = m, u, u
    return state, man
