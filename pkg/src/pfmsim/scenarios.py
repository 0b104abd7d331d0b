"""Benchmark setups: initial fields, boundaries and analytic references."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import BoundarySpec, FaceField, GridDescriptor, Inflow, Outflow, SolidWall
from .ibm import circle_markers


@dataclass
class Scenario:
    name: str
    grid: GridDescriptor
    bc: BoundarySpec
    sampler: Callable[[np.ndarray], np.ndarray]
    exact: Callable | None = None          # exact(points, t, nu) -> vectors
    overrides: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def initial_field(self) -> FaceField:
        return FaceField.from_function(self.grid, self.sampler)

    def exact_field(self, t: float, nu: float | None = None) -> FaceField:
        if self.exact is None:
            raise ValueError(f"scenario {self.name!r} has no analytic solution")
        nu = self.overrides.get("nu", 0.0) if nu is None else nu
        return FaceField.from_function(self.grid, lambda p: self.exact(p, t, nu))


# ---------------------------------------------------------------------------

def _tg2_exact(p, t, nu):
    x, y = p[..., 0], p[..., 1]
    e = np.exp(-2.0 * nu * t)
    return np.stack([np.sin(x) * np.cos(y) * e, -np.cos(x) * np.sin(y) * e], axis=-1)


def taylor_green_2d(nu: float = 0.0, res: int = 64) -> Scenario:
    if nu < 0:
        raise ValueError("nu must be non-negative")
    grid = GridDescriptor((res, res), 2.0 * np.pi / res)
    return Scenario("taylor_green_2d", grid, BoundarySpec.periodic(2),
                    lambda p: _tg2_exact(p, 0.0, nu), _tg2_exact,
                    overrides={"nu": nu, "cfl": 1.0 if nu == 0 else 0.5})


def _abc(p, t=0.0, nu=0.0):
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    return 0.5 * np.stack([np.cos(y) + np.sin(z), np.cos(z) + np.sin(x), np.cos(x) + np.sin(y)], axis=-1)


def abc_3d(res: int = 32) -> Scenario:
    """Steady Beltrami field; the reference at any time is the initial field."""
    L = 4.0 * np.pi
    grid = GridDescriptor((res,) * 3, L / res, (-2.0 * np.pi,) * 3)
    return Scenario("abc_3d", grid, BoundarySpec.periodic(3), _abc, _abc,
                    overrides={"cfl": 0.5, "nu": 0.0})


# -- 2D leapfrogging vortices -------------------------------------------------

LEAPFROG_VORTICES = ((0.25, 0.26, 0.005), (0.25, 0.38, 0.005),
                     (0.25, 0.62, -0.005), (0.25, 0.74, -0.005))
LEAPFROG_SIGMA = 0.02


def mollified_vortex_velocity(p, center, kappa, sigma):
    """(kappa / 2 pi) (-(y - cy), x - cx) / r^2 * (1 - exp(-r^2 / sigma^2))."""
    dx = p[..., 0] - center[0]
    dy = p[..., 1] - center[1]
    r2 = dx * dx + dy * dy
    with np.errstate(invalid="ignore", divide="ignore"):
        fac = np.where(r2 > 0, -np.expm1(-r2 / sigma ** 2) / r2, 1.0 / sigma ** 2)
    fac = kappa / (2.0 * np.pi) * fac
    return np.stack([-dy * fac, dx * fac], axis=-1)


def _leapfrog_velocity(p):
    u = np.zeros(p.shape[:-1] + (2,))
    for cx, cy, k in LEAPFROG_VORTICES:
        u += mollified_vortex_velocity(p, (cx, cy), k, LEAPFROG_SIGMA)
    return u


def leapfrog_2d(res: int = 128) -> Scenario:
    """Four vortices at x = 0.25 in a 3 x 1 walled box spanning x in [-2.5, 0.5].

    With the upper pair negative the group travels towards -x, so the long
    side of the box extends in that direction.
    """
    grid = GridDescriptor((3 * res, res), 1.0 / res, (-2.5, 0.0))
    return Scenario("leapfrog_2d", grid, BoundarySpec.walls(2), _leapfrog_velocity,
                    overrides={"cfl": 1.0, "reinit": 15, "nu": 0.0})


# -- steady vortex for flow-map checks ----------------------------------------

def flow_map_vortex(p, center=(0.5, 0.5), strength=0.01, core=0.02):
    """u = w(r) (-(y - cy), x - cx) with w(r) = -strength (1 - exp(-r^2 / core^2)) / r."""
    dx = p[..., 0] - center[0]
    dy = p[..., 1] - center[1]
    r = np.sqrt(dx * dx + dy * dy)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(r > 0, -strength * -np.expm1(-r * r / core ** 2) / r, 0.0)
    return np.stack([-dy * w, dx * w], axis=-1)


# -- lid-driven cavity -----------------------------------------------------------

def cavity(Re: float = 100.0, res: int = 128) -> Scenario:
    bc = BoundarySpec(((SolidWall(), SolidWall()),
                       (SolidWall(), SolidWall((1.0, 0.0)))))
    grid = GridDescriptor((res, res), 1.0 / res)
    # the lid corners shear particles hard; short flow-map windows keep them stable
    return Scenario("cavity", grid, bc, lambda p: np.zeros(p.shape),
                    overrides={"nu": 1.0 / Re, "cfl": 1.0, "viscous_cfl": 0.2, "reinit": 5},
                    extra={"Re": Re})


# -- Karman vortex street -------------------------------------------------------------

def karman(Re: float = 40.0, res: int = 256, u_inf: float = 1.0, diameter: float = 1.0 / 30.0,
           center=(0.5, 1.1), rho: float = 1.0) -> Scenario:
    """1 x 2 channel, inflow at y = 0, outflow at y = 2, free-slip side walls."""
    grid = GridDescriptor((res, 2 * res), 1.0 / res)
    bc = BoundarySpec(((SolidWall(slip=True), SolidWall(slip=True)),
                       (Inflow((0.0, u_inf)), Outflow())))
    mu = u_inf * rho * diameter / Re
    markers = circle_markers(center, diameter, grid.dx)
    return Scenario("karman", grid, bc, lambda p: np.broadcast_to(np.array([0.0, u_inf]), p.shape).copy(),
                    overrides={"nu": mu / rho, "cfl": 1.0, "dt_max": 1e-3, "dt_min": 1e-5, "reinit": 15},
                    extra={"Re": Re, "markers": markers, "rho": rho, "u_inf": u_inf,
                           "diameter": diameter, "mu": mu, "drag_axis": 1})


# -- 3D leapfrogging rings --------------------------------------------------------------

RING_CENTERS_X = (0.16, 0.29125)
RING_RADIUS = 0.21
RING_CORE = 0.0168
RING_STRENGTH = 0.2


def ring_filament(cx: float, radius: float = RING_RADIUS, segments: int = 128, yz=(0.5, 0.5)):
    """Segment midpoints and tangent vectors of a ring in the plane x = cx."""
    th = 2.0 * np.pi * (np.arange(segments) + 0.5) / segments
    dth = 2.0 * np.pi / segments
    mid = np.stack([np.full(segments, cx), yz[0] + radius * np.cos(th), yz[1] + radius * np.sin(th)], axis=1)
    # chord vectors keep the polygon closed
    th0, th1 = th - 0.5 * dth, th + 0.5 * dth
    dl = np.stack([np.zeros(segments), radius * (np.cos(th1) - np.cos(th0)),
                   radius * (np.sin(th1) - np.sin(th0))], axis=1)
    return mid, dl


def biot_savart_rings(p, strength=RING_STRENGTH, core=RING_CORE, segments=128, centers=RING_CENTERS_X):
    p = np.asarray(p, dtype=float)
    flat = p.reshape(-1, 3)
    out = np.zeros_like(flat)
    for cx in centers:
        mid, dl = ring_filament(cx, segments=segments)
        for s in range(segments):
            r = flat - mid[s]
            r2 = np.einsum("ij,ij->i", r, r)
            fac = -np.expm1(-r2 / core ** 2) / np.maximum(r2, 1e-300) ** 1.5
            out += strength / (4.0 * np.pi) * np.cross(dl[s], r) * fac[:, None]
    return out.reshape(p.shape)


def leapfrog_rings_3d(res: int = 64, strength: float = RING_STRENGTH, segments: int = 128) -> Scenario:
    grid = GridDescriptor((res,) * 3, 1.0 / res)
    return Scenario("leapfrog_rings_3d", grid, BoundarySpec.walls(3),
                    lambda p: biot_savart_rings(p, strength, segments=segments),
                    overrides={"cfl": 1.0, "reinit": 15, "nu": 0.0},
                    extra={"strength": strength})


# -- 3D Taylor-Green ----------------------------------------------------------------

def taylor_green_3d(Re: float = 1600.0, res: int = 64, V0: float = 1.0, L: float = 1.0) -> Scenario:
    grid = GridDescriptor((res,) * 3, 2.0 * np.pi * L / res)

    def u0(p):
        x, y, z = p[..., 0] / L, p[..., 1] / L, p[..., 2] / L
        return V0 * np.stack([np.sin(x) * np.cos(y) * np.cos(z),
                              -np.cos(x) * np.sin(y) * np.cos(z),
                              np.zeros_like(x)], axis=-1)

    return Scenario("taylor_green_3d", grid, BoundarySpec.periodic(3), u0,
                    overrides={"nu": V0 * L / Re, "cfl": 0.5}, extra={"Re": Re})


SCENARIOS = {
    "taylor_green_2d": taylor_green_2d,
    "abc_3d": abc_3d,
    "leapfrog_2d": leapfrog_2d,
    "cavity": cavity,
    "karman": karman,
    "leapfrog_rings_3d": leapfrog_rings_3d,
    "taylor_green_3d": taylor_green_3d,
}


def make(name: str, **params) -> Scenario:
    try:
        fn = SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    return fn(**params)
