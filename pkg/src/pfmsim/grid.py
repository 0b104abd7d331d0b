"""Staggered (MAC) grid geometry, boundary descriptions and discrete operators.

Velocity-like quantities live on cell faces: component ``c`` is stored on the
faces normal to axis ``c`` and has ``shape[c] + 1`` entries along that axis.
On a periodic axis the last face duplicates the first one; ``enforce_boundary``
keeps the copy in sync.  Scalars (pressure, gauge, divergence) live at cell
centres and are plain ``numpy`` arrays of ``grid.shape``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Raised for inconsistent grid/boundary/solver settings."""


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridDescriptor:
    shape: tuple[int, ...]
    dx: float
    origin: tuple[float, ...] = None

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "shape", shape)
        if len(shape) not in (2, 3):
            raise ConfigurationError(f"dimension must be 2 or 3, got {len(shape)}")
        if min(shape) < 4:
            raise ConfigurationError(f"every axis needs at least 4 cells, got {shape}")
        if not self.dx > 0:
            raise ConfigurationError("dx must be positive")
        origin = self.origin
        if origin is None:
            origin = (0.0,) * len(shape)
        origin = tuple(float(o) for o in origin)
        if len(origin) != len(shape):
            raise ConfigurationError("origin length must match dimension")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "dx", float(self.dx))

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def extent(self) -> np.ndarray:
        return np.array(self.shape, dtype=float) * self.dx

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + self.extent

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    def face_shape(self, c: int) -> tuple[int, ...]:
        s = list(self.shape)
        s[c] += 1
        return tuple(s)

    def node_origin(self, c: int | None) -> np.ndarray:
        """Position of lattice node 0 for face component ``c`` (None = cell centres)."""
        lo = self.lower + 0.5 * self.dx
        if c is not None:
            lo[c] -= 0.5 * self.dx
        return lo

    def axes(self, c: int | None) -> list[np.ndarray]:
        lo = self.node_origin(c)
        shp = self.shape if c is None else self.face_shape(c)
        return [lo[a] + self.dx * np.arange(shp[a]) for a in range(self.dim)]

    def points(self, c: int | None) -> np.ndarray:
        """All lattice node positions, shape ``(*lattice_shape, dim)``."""
        return np.stack(np.meshgrid(*self.axes(c), indexing="ij"), axis=-1)

    def cell_centers(self) -> np.ndarray:
        return self.points(None)


# ---------------------------------------------------------------------------
# boundary specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Periodic:
    pass


@dataclass(frozen=True)
class SolidWall:
    """No-penetration wall moving tangentially with ``velocity``.

    ``slip=True`` turns the tangential condition into zero normal gradient
    (free-slip), used for the lateral sides of the channel benchmarks.
    """
    velocity: tuple[float, ...] | None = None
    slip: bool = False


@dataclass(frozen=True)
class Inflow:
    velocity: tuple[float, ...]


@dataclass(frozen=True)
class Outflow:
    pass


Side = Periodic | SolidWall | Inflow | Outflow


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary condition per domain side: ``sides[axis] == (low, high)``."""
    sides: tuple[tuple[Side, Side], ...]

    def __post_init__(self):
        sides = tuple(tuple(pair) for pair in self.sides)
        object.__setattr__(self, "sides", sides)
        for axis, (lo, hi) in enumerate(sides):
            if isinstance(lo, Periodic) != isinstance(hi, Periodic):
                raise ConfigurationError(f"axis {axis}: periodic sides must come in pairs")
            for side in (lo, hi):
                if isinstance(side, SolidWall) and side.velocity is not None:
                    if len(side.velocity) != len(sides):
                        raise ConfigurationError("wall velocity has wrong length")
                    if side.velocity[axis] != 0.0:
                        raise ConfigurationError(
                            f"axis {axis}: wall velocity must be tangential")
                if isinstance(side, Inflow) and len(side.velocity) != len(sides):
                    raise ConfigurationError("inflow velocity has wrong length")

    @classmethod
    def periodic(cls, dim: int) -> "BoundarySpec":
        return cls(tuple((Periodic(), Periodic()) for _ in range(dim)))

    @classmethod
    def walls(cls, dim: int) -> "BoundarySpec":
        return cls(tuple((SolidWall(), SolidWall()) for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.sides)

    def is_periodic(self, axis: int) -> bool:
        return isinstance(self.sides[axis][0], Periodic)

    @property
    def periodic_mask(self) -> np.ndarray:
        return np.array([self.is_periodic(a) for a in range(self.dim)])

    @property
    def has_null_space(self) -> bool:
        """True when no side pins the gauge (all periodic / Neumann)."""
        return not any(isinstance(s, Outflow) for pair in self.sides for s in pair)

    def check(self, grid: GridDescriptor) -> None:
        if self.dim != grid.dim:
            raise ConfigurationError("boundary spec and grid disagree on dimension")

    def to_dict(self) -> list:
        def enc(s):
            if isinstance(s, Periodic):
                return {"type": "periodic"}
            if isinstance(s, SolidWall):
                return {"type": "wall", "velocity": None if s.velocity is None else list(s.velocity),
                        "slip": s.slip}
            if isinstance(s, Inflow):
                return {"type": "inflow", "velocity": list(s.velocity)}
            return {"type": "outflow"}
        return [[enc(lo), enc(hi)] for lo, hi in self.sides]

    @classmethod
    def from_dict(cls, data) -> "BoundarySpec":
        def dec(s):
            kind = s["type"]
            if kind == "periodic":
                return Periodic()
            if kind == "wall":
                v = s.get("velocity")
                return SolidWall(None if v is None else tuple(v), bool(s.get("slip", False)))
            if kind == "inflow":
                return Inflow(tuple(s["velocity"]))
            if kind == "outflow":
                return Outflow()
            raise ConfigurationError(f"unknown side type {kind!r}")
        return cls(tuple((dec(lo), dec(hi)) for lo, hi in data))


def _side_velocity(side: Side, dim: int) -> np.ndarray:
    if isinstance(side, Inflow):
        return np.asarray(side.velocity, dtype=float)
    if isinstance(side, SolidWall) and side.velocity is not None:
        return np.asarray(side.velocity, dtype=float)
    return np.zeros(dim)


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

class FaceField:
    """One lattice per velocity component on the faces of a MAC grid."""

    __slots__ = ("comps",)

    def __init__(self, comps: Sequence[np.ndarray]):
        self.comps = [np.asarray(a, dtype=float) for a in comps]

    @classmethod
    def zeros(cls, grid: GridDescriptor) -> "FaceField":
        return cls([np.zeros(grid.face_shape(c)) for c in range(grid.dim)])

    @classmethod
    def constant(cls, grid: GridDescriptor, value) -> "FaceField":
        return cls([np.full(grid.face_shape(c), float(value[c])) for c in range(grid.dim)])

    @classmethod
    def from_function(cls, grid: GridDescriptor, fn: Callable[[np.ndarray], np.ndarray]) -> "FaceField":
        """Sample ``fn(points) -> vectors`` component-wise at face centres."""
        comps = []
        for c in range(grid.dim):
            comps.append(np.asarray(fn(grid.points(c)))[..., c].copy())
        return cls(comps)

    @property
    def dim(self) -> int:
        return len(self.comps)

    def copy(self) -> "FaceField":
        return FaceField([a.copy() for a in self.comps])

    def check(self, grid: GridDescriptor) -> None:
        if self.dim != grid.dim:
            raise ConfigurationError("field dimension does not match grid")
        for c, a in enumerate(self.comps):
            if a.shape != grid.face_shape(c):
                raise ConfigurationError(
                    f"component {c} has shape {a.shape}, expected {grid.face_shape(c)}")

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(a))) for a in self.comps)

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.comps)

    def __add__(self, other: "FaceField") -> "FaceField":
        return FaceField([a + b for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other: "FaceField") -> "FaceField":
        return FaceField([a - b for a, b in zip(self.comps, other.comps)])

    def __mul__(self, s: float) -> "FaceField":
        return FaceField([a * s for a in self.comps])

    __rmul__ = __mul__

    def __neg__(self) -> "FaceField":
        return FaceField([-a for a in self.comps])


def unique_faces(u: FaceField, bc: BoundarySpec) -> list[np.ndarray]:
    """Component views without the duplicated periodic face."""
    out = []
    for c, a in enumerate(u.comps):
        if bc.is_periodic(c):
            a = np.take(a, np.arange(a.shape[c] - 1), axis=c)
        out.append(a)
    return out


def inner(u: FaceField, v: FaceField, bc: BoundarySpec) -> float:
    """Discrete L2 inner product over distinct faces (no volume factor)."""
    return float(sum(np.sum(a * b) for a, b in zip(unique_faces(u, bc), unique_faces(v, bc))))


def kinetic_energy(u: FaceField, grid: GridDescriptor, bc: BoundarySpec) -> float:
    return 0.5 * inner(u, u, bc) * grid.cell_volume


# ---------------------------------------------------------------------------
# boundary enforcement and ghost layers
# ---------------------------------------------------------------------------

def _index(axis: int, idx, ndim: int):
    sl = [slice(None)] * ndim
    sl[axis] = idx
    return tuple(sl)


def enforce_boundary(u: FaceField, grid: GridDescriptor, bc: BoundarySpec) -> FaceField:
    """Write prescribed normal components on the boundary faces (in place).

    Walls get their (zero) normal velocity, inflow faces the inflow normal
    velocity, outflow faces copy the adjacent interior face, and periodic axes
    have their duplicate face synchronised.
    """
    d = grid.dim
    for c in range(d):
        a = u.comps[c]
        n = grid.shape[c]
        lo, hi = bc.sides[c]
        if isinstance(lo, Periodic):
            a[_index(c, n, d)] = a[_index(c, 0, d)]
            continue
        for side, b, nb in ((lo, 0, 1), (hi, n, n - 1)):
            if isinstance(side, Outflow):
                a[_index(c, b, d)] = a[_index(c, nb, d)]
            else:
                a[_index(c, b, d)] = _side_velocity(side, d)[c]
    return u


def pad_component(a: np.ndarray, c: int, grid: GridDescriptor, bc: BoundarySpec,
                  layers: int = 2, mode: str = "velocity") -> np.ndarray:
    """Return component ``c`` with ``layers`` ghost nodes on every side.

    ``mode='velocity'`` applies the physical wall rules (normal component
    reflected about the boundary value, tangential component mirrored about
    the wall velocity, zero gradient on outflow and slip walls).
    ``mode='extrapolate'`` fills non-periodic ghosts by linear extrapolation;
    it is used for the gradient part of the impulse, which carries no wall
    condition of its own.
    """
    d = grid.dim
    out = a
    L = layers
    # the normal axis goes last so that its boundary plane, including the
    # ghost rows added by the tangential axes, carries the wall's normal
    # velocity; otherwise a moving lid leaks through the side walls at corners
    order = [ax for ax in range(d) if ax != c] + ([c] if c < d else [])
    for ax in order:
        n = out.shape[ax]
        if bc.is_periodic(ax):
            # the face lattice keeps its duplicate node, so n is period or period + 1
            idx = np.arange(-L, n + L) % grid.shape[ax]
            out = np.take(out, idx, axis=ax)
            continue
        pieces_lo, pieces_hi = [], []
        face = ax == c
        if face and mode == "velocity":
            out = out.copy() if out is a else out
            for end, side in enumerate(bc.sides[ax]):
                if not isinstance(side, Outflow):
                    out[_index(ax, 0 if end == 0 else n - 1, d)] = _side_velocity(side, d)[c]
        for end, side in enumerate(bc.sides[ax]):
            ghosts = []
            for k in range(1, L + 1):
                if face:
                    # boundary face index 0 (or n-1); ghost at distance k
                    b = 0 if end == 0 else n - 1
                    inner_k = k if end == 0 else n - 1 - k
                    vb = np.take(out, [b], axis=ax)
                    vk = np.take(out, [inner_k], axis=ax)
                    if mode == "extrapolate" or not isinstance(side, Outflow):
                        ghosts.append(2.0 * vb - vk)
                    else:
                        ghosts.append(vk)
                else:
                    m = k - 1 if end == 0 else n - k
                    vm = np.take(out, [m], axis=ax)
                    if mode == "extrapolate":
                        i0 = 0 if end == 0 else n - 1
                        i1 = 1 if end == 0 else n - 2
                        g0 = np.take(out, [i0], axis=ax)
                        g1 = np.take(out, [i1], axis=ax)
                        ghosts.append(g0 + k * (g0 - g1))
                    elif isinstance(side, Outflow) or (isinstance(side, SolidWall) and side.slip):
                        ghosts.append(vm)
                    else:
                        vw = _side_velocity(side, d)[c]
                        ghosts.append(2.0 * vw - vm)
            if end == 0:
                pieces_lo = ghosts[::-1]
            else:
                pieces_hi = ghosts
        out = np.concatenate(pieces_lo + [out] + pieces_hi, axis=ax)
    return out


def pad_field(u: FaceField, grid: GridDescriptor, bc: BoundarySpec, layers: int = 2,
              gauge: FaceField | None = None, mode: str = "velocity") -> list[np.ndarray]:
    """Ghost-padded copies of every component.

    When ``gauge`` (the gradient part ``m - u`` of an impulse field) is given,
    ``u - gauge`` is padded with the velocity rules and ``gauge`` with linear
    extrapolation, so wall conditions act on the velocity and not on the
    impulse.  ``mode='extrapolate'`` pads every component by extrapolation
    (forces and other fields without a wall condition).
    """
    if gauge is None or mode == "extrapolate":
        return [pad_component(a, c, grid, bc, layers, mode) for c, a in enumerate(u.comps)]
    out = []
    for c, (a, g) in enumerate(zip(u.comps, gauge.comps)):
        p = pad_component(a - g, c, grid, bc, layers) + pad_component(g, c, grid, bc, layers, "extrapolate")
        core = tuple(slice(layers, layers + s) for s in a.shape)
        p[core] = a
        out.append(p)
    return out


# ---------------------------------------------------------------------------
# differential operators
# ---------------------------------------------------------------------------

def divergence(u: FaceField, grid: GridDescriptor, bc: BoundarySpec | None = None) -> np.ndarray:
    """Cell-centred divergence ``sum_c (u_c[i+1] - u_c[i]) / dx``."""
    u.check(grid)
    out = np.zeros(grid.shape)
    for c, a in enumerate(u.comps):
        out += np.diff(a, axis=c)
    return out / grid.dx


def gradient_to_faces(phi: np.ndarray, grid: GridDescriptor, bc: BoundarySpec) -> FaceField:
    """Face-normal differences of a cell field.

    Wall and inflow faces get zero normal gradient, outflow faces see a ghost
    cell pinned to zero, periodic axes wrap.
    """
    if phi.shape != grid.shape:
        raise ConfigurationError(f"phi has shape {phi.shape}, expected {grid.shape}")
    d = grid.dim
    comps = []
    for c in range(d):
        n = grid.shape[c]
        g = np.zeros(grid.face_shape(c))
        g[_index(c, slice(1, n), d)] = np.diff(phi, axis=c)
        lo, hi = bc.sides[c]
        first = phi[_index(c, 0, d)]
        last = phi[_index(c, n - 1, d)]
        if isinstance(lo, Periodic):
            g[_index(c, 0, d)] = first - last
            g[_index(c, n, d)] = first - last
        else:
            if isinstance(lo, Outflow):
                g[_index(c, 0, d)] = first
            if isinstance(hi, Outflow):
                g[_index(c, n, d)] = -last
        comps.append(g / grid.dx)
    return FaceField(comps)


_LAP4 = np.array([-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0])


def laplacian_faces(w: FaceField, grid: GridDescriptor, bc: BoundarySpec, order: int = 2,
                    gauge: FaceField | None = None) -> FaceField:
    """Component-wise Laplacian at face centres (2nd or 4th order stencil)."""
    if order not in (2, 4):
        raise ConfigurationError(f"laplacian order must be 2 or 4, got {order}")
    w.check(grid)
    L = 2
    if order == 4 and min(grid.shape) < 2 * L:
        raise ConfigurationError("grid too small for the fourth-order stencil")
    padded = pad_field(w, grid, bc, L, gauge=gauge)
    inv_h2 = 1.0 / grid.dx ** 2
    comps = []
    for c, p in enumerate(padded):
        shp = w.comps[c].shape
        acc = np.zeros(shp)
        for ax in range(grid.dim):
            def sh(k):
                sl = [slice(L, L + s) for s in shp]
                sl[ax] = slice(L + k, L + k + shp[ax])
                return p[tuple(sl)]
            if order == 2:
                acc += sh(-1) - 2.0 * sh(0) + sh(1)
            else:
                acc += sum(coef * sh(k) for coef, k in zip(_LAP4, range(-2, 3)))
        comps.append(acc * inv_h2)
    return FaceField(comps)


def curl(u: FaceField, grid: GridDescriptor, bc: BoundarySpec) -> np.ndarray:
    """Vorticity at cell centres (scalar in 2D, vector ``(..., 3)`` in 3D).

    Face values are first averaged to cell centres, then differenced with
    central differences (one-sided at non-periodic boundaries).
    """
    cc = face_to_cell(u)
    h = grid.dx

    def d(f, ax):
        if bc.is_periodic(ax):
            return (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2 * h)
        return np.gradient(f, h, axis=ax)

    if grid.dim == 2:
        return d(cc[1], 0) - d(cc[0], 1)
    return np.stack([d(cc[2], 1) - d(cc[1], 2),
                     d(cc[0], 2) - d(cc[2], 0),
                     d(cc[1], 0) - d(cc[0], 1)], axis=-1)


def face_to_cell(u: FaceField) -> list[np.ndarray]:
    """Average each component onto cell centres."""
    out = []
    for c, a in enumerate(u.comps):
        n = a.shape[c] - 1
        out.append(0.5 * (np.take(a, np.arange(n), axis=c) + np.take(a, np.arange(1, n + 1), axis=c)))
    return out


def cfl_timestep(u: FaceField, dx: float, cfl: float, dt_min: float = 0.0,
                 dt_max: float = np.inf, eps: float = 1e-12) -> float:
    """``clamp(cfl * dx / max|u|, dt_min, dt_max)``."""
    if cfl <= 0:
        raise ConfigurationError("CFL number must be positive")
    if dt_min > dt_max:
        raise ConfigurationError("dt_min exceeds dt_max")
    dt = cfl * dx / max(u.max_abs(), eps)
    return float(min(max(dt, dt_min), dt_max))
