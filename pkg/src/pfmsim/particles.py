"""Particle flow-map state: positions, Jacobians, initial impulse and path buffer."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .grid import BoundarySpec, ConfigurationError, FaceField, GridDescriptor
from .transfer import SampledField


class IntegrationError(RuntimeError):
    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


@dataclass
class ReinitPolicy:
    n: int = 20
    ppc: int | None = None     # None -> 4 in 2D, 8 in 3D
    jitter: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("reinit interval must be >= 1")
        if self.ppc is not None and self.ppc < 1:
            raise ConfigurationError("ppc must be >= 1")
        if not 0.0 <= self.jitter <= 0.5:
            raise ConfigurationError("jitter must lie in [0, 0.5]")

    def particles_per_cell(self, dim: int) -> int:
        return self.ppc if self.ppc is not None else (4 if dim == 2 else 8)


@dataclass
class ParticleSet:
    x: np.ndarray       # (N, d)
    m0: np.ndarray      # (N, d)
    T: np.ndarray       # (N, d, d) backward-map Jacobian
    F: np.ndarray       # (N, d, d) forward-map Jacobian
    gamma: np.ndarray   # (N, d)
    A: np.ndarray       # (N, d, d) affine matrix, row = component

    @classmethod
    def at(cls, x: np.ndarray) -> "ParticleSet":
        x = np.ascontiguousarray(x, dtype=float)
        n, d = x.shape
        eye = np.broadcast_to(np.eye(d), (n, d, d))
        return cls(x, np.zeros((n, d)), eye.copy(), eye.copy(), np.zeros((n, d)), np.zeros((n, d, d)))

    def __len__(self):
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def copy(self) -> "ParticleSet":
        return ParticleSet(self.x.copy(), self.m0.copy(), self.T.copy(), self.F.copy(),
                           self.gamma.copy(), self.A.copy())

    def identity_defect(self) -> float:
        """max_p ||F_p T_p - I||_inf (max row sum)."""
        E = np.einsum("pij,pjk->pik", self.F, self.T) - np.eye(self.dim)
        return float(np.abs(E).sum(axis=2).max()) if len(self) else 0.0

    def det_range(self):
        dT = np.linalg.det(self.T)
        return float(dT.min()), float(dT.max())


def _per_axis(ppc: int, dim: int) -> int:
    k = round(ppc ** (1.0 / dim))
    if k ** dim != ppc:
        raise ConfigurationError(f"ppc={ppc} is not a perfect {dim}-th power")
    return k


def seed_uniform(grid: GridDescriptor, policy: ReinitPolicy, rng_seed: int = 0) -> ParticleSet:
    """ppc particles per cell on a regular sub-lattice, optionally jittered."""
    d = grid.dim
    k = _per_axis(policy.particles_per_cell(d), d)
    sub = (np.arange(k) + 0.5) / k
    axes = [grid.origin[a] + grid.dx * (np.repeat(np.arange(grid.shape[a]), k) + np.tile(sub, grid.shape[a]))
            for a in range(d)]
    x = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    if policy.jitter > 0:
        rng = np.random.default_rng(rng_seed)
        x += (rng.uniform(-1.0, 1.0, x.shape) * policy.jitter * grid.dx / k)
    return ParticleSet.at(x)


def advance_rk4(ps: ParticleSet, field: SampledField, dt: float) -> ParticleSet:
    """Joint RK4 step of x, F, T through a frozen velocity field (in place)."""
    d = ps.dim
    if d == 2:
        c2, c3 = field.comps, (np.zeros((1, 1, 1)),) * 3
    else:
        c2, c3 = (np.zeros((1, 1)),) * 2, field.comps
    bad = K.rk4_advance(c2, c3, field.org, field.grid.dx, field.lo, field.ext, field.periodic,
                        field.margin, ps.x, ps.F, ps.T, float(dt))
    if bad >= 0:
        raise IntegrationError(f"non-finite particle state at index {bad}", bad)
    return ps


def reinitialize_impulse(grid: GridDescriptor, bc: BoundarySpec, u: FaceField,
                         policy: ReinitPolicy, rng_seed: int = 0) -> ParticleSet:
    """Fresh particles with m0 and A sampled from the (projected) grid velocity."""
    ps = seed_uniform(grid, policy, rng_seed)
    V, G = SampledField(u, grid, bc).sample(ps.x, grad=True)
    ps.m0 = V
    ps.A = G
    return ps


def compute_impulse(ps: ParticleSet) -> np.ndarray:
    """m_p = T_p^T (m0_p + Gamma_p)."""
    return np.einsum("pji,pj->pi", ps.T, ps.m0 + ps.gamma)


def particles_to_csv(ps: ParticleSet, path) -> None:
    d = ps.dim
    ax = "xyz"[:d]
    cols = ["id"] + list(ax)
    cols += [f"m0_{a}" for a in ax]
    cols += [f"T_{i}{j}" for i in range(d) for j in range(d)]
    cols += [f"F_{i}{j}" for i in range(d) for j in range(d)]
    cols += [f"Gamma_{a}" for a in ax]
    n = len(ps)
    data = np.hstack([np.arange(n)[:, None], ps.x, ps.m0, ps.T.reshape(n, -1),
                      ps.F.reshape(n, -1), ps.gamma])
    fmt = ["%d"] + ["%.17g"] * (data.shape[1] - 1)
    np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt=fmt)


def particles_from_csv(path) -> ParticleSet:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    d = 2 if data.shape[1] == 1 + 2 + 2 + 4 + 4 + 2 else 3
    n = data.shape[0]
    o = 1
    x = data[:, o:o + d]; o += d
    m0 = data[:, o:o + d]; o += d
    T = data[:, o:o + d * d].reshape(n, d, d); o += d * d
    F = data[:, o:o + d * d].reshape(n, d, d); o += d * d
    gamma = data[:, o:o + d]
    return ParticleSet(np.ascontiguousarray(x), m0.copy(), T.copy(), F.copy(), gamma.copy(), np.zeros((n, d, d)))
