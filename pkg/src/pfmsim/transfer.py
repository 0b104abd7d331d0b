"""Quadratic B-spline transfers between particles and the staggered grid."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .grid import BoundarySpec, FaceField, GridDescriptor, pad_field

GHOST = 2
# particles on non-periodic axes are kept this many cells inside the walls
CLAMP_MARGIN = 0.25


class OutOfDomainError(ValueError):
    pass


@dataclass(frozen=True)
class KernelStencil:
    base: np.ndarray       # (d,) lowest node index per axis
    weights: np.ndarray    # (d, 3)
    dweights: np.ndarray   # (d, 3), per unit length

    def tensor_weights(self) -> np.ndarray:
        w = self.weights[0]
        for a in range(1, len(self.base)):
            w = np.multiply.outer(w, self.weights[a])
        return w


def bspline_1d(s):
    """Base index, weights and index-space derivatives at lattice coordinate ``s``."""
    s = np.asarray(s, dtype=float)
    base = np.floor(s - 0.5).astype(np.int64)
    fx = s - base
    w = np.stack([0.5 * (1.5 - fx) ** 2, 0.75 - (fx - 1.0) ** 2, 0.5 * (fx - 0.5) ** 2], axis=-1)
    dw = np.stack([fx - 1.5, -2.0 * (fx - 1.0), fx - 0.5], axis=-1)
    return base, w, dw


def stencil_at(x, grid: GridDescriptor, component: int | None, bc: BoundarySpec | None = None) -> KernelStencil:
    """Stencil of a point on the (unpadded) lattice of ``component``.

    ``component=None`` selects the cell-centred lattice.  Non-periodic axes
    require all three nodes to exist; periodic axes wrap.
    """
    x = np.asarray(x, dtype=float)
    org = grid.node_origin(component)
    shp = grid.shape if component is None else grid.face_shape(component)
    s = (x - org) / grid.dx
    base, w, dw = bspline_1d(s)
    base = base.copy()
    for a in range(grid.dim):
        if bc is not None and bc.is_periodic(a):
            base[a] %= grid.shape[a]
        elif base[a] < 0 or base[a] + 2 > shp[a] - 1:
            raise OutOfDomainError(f"position {x.tolist()} outside interpolation interior on axis {a}")
    return KernelStencil(base, w, dw / grid.dx)


class SampledField:
    """A face field padded with ghost layers, ready for particle queries."""

    def __init__(self, u: FaceField, grid: GridDescriptor, bc: BoundarySpec,
                 gauge: FaceField | None = None, margin: float = CLAMP_MARGIN, mode: str = "velocity"):
        self.grid = grid
        self.bc = bc
        padded = pad_field(u, grid, bc, GHOST, gauge=gauge, mode=mode)
        self.comps = tuple(np.ascontiguousarray(p) for p in padded)
        self.org = np.array([grid.node_origin(c) - GHOST * grid.dx for c in range(grid.dim)])
        self.lo = grid.lower
        self.ext = grid.extent
        self.periodic = bc.periodic_mask
        self.margin = margin * grid.dx

    def _args(self):
        return self.org, self.grid.dx, self.lo, self.ext, self.periodic, self.margin

    def sample(self, X: np.ndarray, grad: bool = True):
        X = np.ascontiguousarray(X, dtype=float)
        if self.grid.dim == 2:
            return K.sample2(*self.comps, *self._args(), X, grad)
        return K.sample3(*self.comps, *self._args(), X, grad)

    def sample_component(self, c: int, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        fn = K.sample_component2 if self.grid.dim == 2 else K.sample_component3
        return fn(self.comps[c], self.org[c], self.grid.dx, self.lo, self.ext, self.periodic, self.margin, X)

    def fold(self, X: np.ndarray) -> np.ndarray:
        return K.fold_points(np.ascontiguousarray(X, dtype=float), self.lo, self.ext, self.periodic, self.margin)


def g2p_vector(u: FaceField, grid: GridDescriptor, bc: BoundarySpec, X, gauge: FaceField | None = None):
    """Values ``(N, d)`` and gradients ``(N, d, d)`` (row = component) at ``X``."""
    return SampledField(u, grid, bc, gauge).sample(np.atleast_2d(X), grad=True)


def _fold_axis(a: np.ndarray, ax: int, period: int, duplicate: bool) -> np.ndarray:
    idx = (np.arange(a.shape[ax]) - GHOST) % period
    shp = list(a.shape)
    shp[ax] = period
    out = np.zeros(shp)
    for j, i in enumerate(idx):
        sl_out = [slice(None)] * a.ndim
        sl_in = [slice(None)] * a.ndim
        sl_out[ax] = i
        sl_in[ax] = j
        out[tuple(sl_out)] += a[tuple(sl_in)]
    if duplicate:
        out = np.concatenate([out, np.take(out, [0], axis=ax)], axis=ax)
    return out


def _crop_axis(a: np.ndarray, ax: int, n: int) -> np.ndarray:
    return np.take(a, np.arange(GHOST, GHOST + n), axis=ax)


def p2g_apic(X, Q, A, grid: GridDescriptor, bc: BoundarySpec):
    """Normalized APIC scatter.  Returns ``(FaceField, [coverage masks])``."""
    X = np.ascontiguousarray(X, dtype=float)
    Q = np.ascontiguousarray(Q, dtype=float)
    d = grid.dim
    if A is None:
        A = np.zeros((X.shape[0], d, d))
    A = np.ascontiguousarray(A, dtype=float)
    org = np.array([grid.node_origin(c) - GHOST * grid.dx for c in range(d)])
    shapes = [tuple(s + 2 * GHOST for s in grid.face_shape(c)) for c in range(d)]
    nums = [np.zeros(s) for s in shapes]
    dens = [np.zeros(s) for s in shapes]
    if d == 2:
        K.p2g2(X, Q, A, org, grid.dx, *nums, *dens)
    else:
        K.p2g3(X, Q, A, org, grid.dx, *nums, *dens)
    comps, masks = [], []
    for c in range(d):
        num, den = nums[c], dens[c]
        for ax in range(d):
            n = grid.face_shape(c)[ax]
            if bc.is_periodic(ax):
                num = _fold_axis(num, ax, grid.shape[ax], ax == c)
                den = _fold_axis(den, ax, grid.shape[ax], ax == c)
            else:
                num = _crop_axis(num, ax, n)
                den = _crop_axis(den, ax, n)
        mask = den > 0.0
        val = np.where(mask, num / np.where(mask, den, 1.0), 0.0)
        comps.append(val)
        masks.append(mask)
    return FaceField(comps), masks


def semi_lagrangian(u: FaceField, grid: GridDescriptor, bc: BoundarySpec, tau: float,
                    carried: FaceField | None = None) -> FaceField:
    """RK4 back-trace of every face centre through ``u`` over ``tau``.

    Returns ``carried`` (default ``u``) sampled at the departure points.
    """
    src = SampledField(u, grid, bc)
    tgt = src if carried is None else SampledField(carried, grid, bc)
    comps = []
    for c in range(grid.dim):
        x = grid.points(c).reshape(-1, grid.dim)
        k1 = src.sample(x, grad=False)[0]
        k2 = src.sample(x - 0.5 * tau * k1, grad=False)[0]
        k3 = src.sample(x - 0.5 * tau * k2, grad=False)[0]
        k4 = src.sample(x - tau * k3, grad=False)[0]
        xd = x - (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        comps.append(tgt.sample_component(c, xd).reshape(grid.face_shape(c)))
    return FaceField(comps)
