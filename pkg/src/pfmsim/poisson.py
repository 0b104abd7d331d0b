"""Pressure/gauge Poisson solve with multigrid-preconditioned CG, and projection."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numba import njit

from .grid import (BoundarySpec, FaceField, GridDescriptor, Outflow, Periodic, divergence,
                   gradient_to_faces)

DENSE_LIMIT = 4096


class SolverError(RuntimeError):
    def __init__(self, msg, stats=None):
        super().__init__(msg)
        self.stats = stats


@dataclass
class SolveStats:
    iterations: int = 0
    residual: float = 0.0
    rhs_mean: float = 0.0
    converged: bool = True


def _laplacian_1d(n: int, h: float, lo, hi) -> sp.csr_matrix:
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    D = sp.diags([off, main, off], [-1, 0, 1], shape=(n, n), format="lil")
    if isinstance(lo, Periodic):
        D[0, n - 1] = 1.0
        D[n - 1, 0] = 1.0
    else:
        D[0, 0] = -2.0 if isinstance(lo, Outflow) else -1.0
        D[n - 1, n - 1] = -2.0 if isinstance(hi, Outflow) else -1.0
    return (D / h ** 2).tocsr()


def laplacian_matrix(shape, h: float, bc: BoundarySpec) -> sp.csr_matrix:
    """Cell-centred Laplacian ``div(grad(.))`` in C order."""
    d = len(shape)
    L = None
    for a in range(d):
        mats = [sp.identity(shape[b], format="csr") for b in range(d)]
        mats[a] = _laplacian_1d(shape[a], h, *bc.sides[a])
        term = mats[0]
        for m in mats[1:]:
            term = sp.kron(term, m, format="csr")
        L = term if L is None else L + term
    return L.tocsr()


def _prolong_1d(nc: int, periodic: bool) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for i in range(nc):
        for f, nb in ((2 * i, i - 1), (2 * i + 1, i + 1)):
            if periodic:
                nb %= nc
            else:
                nb = min(max(nb, 0), nc - 1)
            rows += [f, f]
            cols += [i, nb]
            vals += [0.75, 0.25]
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 * nc, nc))


@njit(cache=True)
def _gs_color(indptr, indices, data, diag, x, b, nodes):
    for t in range(nodes.shape[0]):
        i = nodes[t]
        s = b[i]
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j != i:
                s -= data[k] * x[j]
        x[i] = s / diag[i]


class _Level:
    def __init__(self, shape, h, bc):
        self.shape = tuple(shape)
        self.h = h
        # K = -Laplacian is positive (semi-)definite
        self.K = (-laplacian_matrix(shape, h, bc)).tocsr()
        self.K.sort_indices()
        self.diag = self.K.diagonal().copy()
        parity = np.indices(shape).sum(axis=0).ravel() % 2
        self.red = np.flatnonzero(parity == 0).astype(np.int64)
        self.black = np.flatnonzero(parity == 1).astype(np.int64)
        self.P = None

    def smooth(self, x, b, order):
        K = self.K
        for nodes in order:
            _gs_color(K.indptr, K.indices, K.data, self.diag, x, b, nodes)


@dataclass
class PoissonSystem:
    grid: GridDescriptor
    bc: BoundarySpec
    matrix: sp.csr_matrix
    null_space: bool
    levels: list = field(repr=False, default_factory=list)
    coarse_solve: object = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return int(np.prod(self.grid.shape))


def build_system(grid: GridDescriptor, bc: BoundarySpec, pre_sweeps: int = 2) -> PoissonSystem:
    bc.check(grid)
    A = laplacian_matrix(grid.shape, grid.dx, bc)
    sys_ = PoissonSystem(grid, bc, A, bc.has_null_space)
    shape = list(grid.shape)
    h = grid.dx
    levels = [_Level(shape, h, bc)]
    while all(n % 2 == 0 and n >= 8 for n in shape):
        coarse = [n // 2 for n in shape]
        P = None
        for a in range(grid.dim):
            Pa = _prolong_1d(coarse[a], bc.is_periodic(a))
            P = Pa if P is None else sp.kron(P, Pa, format="csr")
        levels[-1].P = P.tocsr()
        levels[-1].R = (P.T / 2 ** grid.dim).tocsr()
        shape = coarse
        h *= 2.0
        levels.append(_Level(shape, h, bc))
    sys_.levels = levels
    sys_.coarse_solve = _coarse_solver(levels[-1].K, sys_.null_space)
    return sys_


def _coarse_solver(K, null_space):
    n = K.shape[0]
    if n <= DENSE_LIMIT:
        Kinv = np.linalg.pinv(K.toarray()) if null_space else np.linalg.inv(K.toarray())
        return lambda r: Kinv @ r
    if null_space:
        # pin one node; consistent right-hand sides make the dropped row redundant
        K = K.tolil()
        K[0, :] = 0.0
        K[:, 0] = 0.0
        K[0, 0] = 1.0
        lu = spla.splu(K.tocsc())

        def solve(r):
            r = r.copy()
            r[0] = 0.0
            z = lu.solve(r)
            return z - z.mean()
        return solve
    lu = spla.splu(K.tocsc())
    return lu.solve


def _vcycle(sys_: PoissonSystem, lvl: int, b: np.ndarray, sweeps: int = 2) -> np.ndarray:
    levels = sys_.levels
    L = levels[lvl]
    if lvl == len(levels) - 1:
        return sys_.coarse_solve(b)
    x = np.zeros_like(b)
    pre = [L.red, L.black] * sweeps
    L.smooth(x, b, pre)
    r = b - L.K @ x
    rc = L.R @ r
    if sys_.null_space:
        rc -= rc.mean()
    x += L.P @ _vcycle(sys_, lvl + 1, rc, sweeps)
    L.smooth(x, b, pre[::-1])
    return x


def apply_preconditioner(sys_: PoissonSystem, r: np.ndarray) -> np.ndarray:
    """One symmetric V-cycle approximating ``(-A)^{-1} r``."""
    z = _vcycle(sys_, 0, r)
    if sys_.null_space:
        z -= z.mean()
    return z


def solve_mgpcg(sys_: PoissonSystem, rhs: np.ndarray, tol: float = 1e-6, max_iter: int = 200,
                x0: np.ndarray | None = None):
    """Solve ``A phi = rhs``; returns ``(phi, SolveStats)``."""
    grid = sys_.grid
    if rhs.shape != grid.shape:
        raise ValueError(f"rhs has shape {rhs.shape}, expected {grid.shape}")
    b = -np.asarray(rhs, dtype=float).ravel()   # work with K = -A
    mean = 0.0
    if sys_.null_space:
        mean = float(b.mean())
        b = b - mean
    stats = SolveStats(rhs_mean=-mean)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(grid.shape), stats
    K = sys_.levels[0].K
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float).ravel()
    if sys_.null_space:
        x -= x.mean()
    r = b - K @ x
    rnorm = np.linalg.norm(r)
    it = 0
    if rnorm > tol * bnorm:
        z = apply_preconditioner(sys_, r)
        p = z.copy()
        rz = r @ z
        while it < max_iter:
            it += 1
            Kp = K @ p
            alpha = rz / (p @ Kp)
            x += alpha * p
            r -= alpha * Kp
            rnorm = np.linalg.norm(r)
            if rnorm <= tol * bnorm:
                break
            z = apply_preconditioner(sys_, r)
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
    stats.iterations = it
    stats.residual = float(rnorm / bnorm)
    stats.converged = rnorm <= tol * bnorm
    if not stats.converged:
        raise SolverError(f"MGPCG did not converge in {max_iter} iterations "
                          f"(relative residual {stats.residual:.3e})", stats)
    if sys_.null_space:
        x -= x.mean()
    return x.reshape(grid.shape), stats


def project(m: FaceField, sys_: PoissonSystem, tol: float = 1e-6, phi0=None, max_iter: int = 200):
    """Helmholtz split ``m = u + grad(phi)``.  Returns ``(u, phi, stats)``."""
    grid, bc = sys_.grid, sys_.bc
    rhs = divergence(m, grid, bc)
    phi, stats = solve_mgpcg(sys_, rhs, tol, max_iter, x0=phi0)
    u = m - gradient_to_faces(phi, grid, bc)
    return u, phi, stats
