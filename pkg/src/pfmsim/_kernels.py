"""Compiled particle/grid kernels.

Every face component is passed as a ghost-padded lattice together with the
world position of its node 0 (``org[c]``).  Positions are folded into the
domain before sampling: wrapped on periodic axes, clamped to
``[lo + margin, hi - margin]`` elsewhere.
"""
import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _bspline(s):
    # s: position in lattice index units
    base = int(np.floor(s - 0.5))
    fx = s - base
    w0 = 0.5 * (1.5 - fx) ** 2
    w1 = 0.75 - (fx - 1.0) ** 2
    w2 = 0.5 * (fx - 0.5) ** 2
    d0 = fx - 1.5
    d1 = -2.0 * (fx - 1.0)
    d2 = fx - 0.5
    return base, w0, w1, w2, d0, d1, d2


@njit(cache=True)
def fold_point(x, lo, ext, periodic, margin, out):
    for a in range(x.shape[0]):
        v = x[a]
        if periodic[a]:
            v = lo[a] + (v - lo[a]) % ext[a]
            if v >= lo[a] + ext[a]:
                v -= ext[a]
        else:
            v = min(max(v, lo[a] + margin), lo[a] + ext[a] - margin)
        out[a] = v


@njit(cache=True)
def fold_points(X, lo, ext, periodic, margin):
    out = np.empty_like(X)
    for p in range(X.shape[0]):
        fold_point(X[p], lo, ext, periodic, margin, out[p])
    return out


@njit(cache=True)
def _interp2(c0, c1, org, h, x, v, g, want_grad):
    inv_h = 1.0 / h
    for c in range(2):
        arr = c0 if c == 0 else c1
        bx, wx0, wx1, wx2, dx0, dx1, dx2 = _bspline((x[0] - org[c, 0]) * inv_h)
        by, wy0, wy1, wy2, dy0, dy1, dy2 = _bspline((x[1] - org[c, 1]) * inv_h)
        wx = (wx0, wx1, wx2)
        wy = (wy0, wy1, wy2)
        dx = (dx0 * inv_h, dx1 * inv_h, dx2 * inv_h)
        dy = (dy0 * inv_h, dy1 * inv_h, dy2 * inv_h)
        acc = 0.0
        gx = 0.0
        gy = 0.0
        # derivative weights sum to zero; differencing against the centre node
        # makes the gradient of a constant field exactly zero
        f0 = arr[bx + 1, by + 1]
        for i in range(3):
            for j in range(3):
                f = arr[bx + i, by + j]
                acc += wx[i] * wy[j] * f
                if want_grad:
                    gx += dx[i] * wy[j] * (f - f0)
                    gy += wx[i] * dy[j] * (f - f0)
        v[c] = acc
        if want_grad:
            g[c, 0] = gx
            g[c, 1] = gy


@njit(cache=True)
def _interp3(c0, c1, c2, org, h, x, v, g, want_grad):
    inv_h = 1.0 / h
    for c in range(3):
        if c == 0:
            arr = c0
        elif c == 1:
            arr = c1
        else:
            arr = c2
        bx, wx0, wx1, wx2, dx0, dx1, dx2 = _bspline((x[0] - org[c, 0]) * inv_h)
        by, wy0, wy1, wy2, dy0, dy1, dy2 = _bspline((x[1] - org[c, 1]) * inv_h)
        bz, wz0, wz1, wz2, dz0, dz1, dz2 = _bspline((x[2] - org[c, 2]) * inv_h)
        wx = (wx0, wx1, wx2)
        wy = (wy0, wy1, wy2)
        wz = (wz0, wz1, wz2)
        dx = (dx0 * inv_h, dx1 * inv_h, dx2 * inv_h)
        dy = (dy0 * inv_h, dy1 * inv_h, dy2 * inv_h)
        dz = (dz0 * inv_h, dz1 * inv_h, dz2 * inv_h)
        acc = 0.0
        gx = 0.0
        gy = 0.0
        gz = 0.0
        f0 = arr[bx + 1, by + 1, bz + 1]
        for i in range(3):
            for j in range(3):
                wij = wx[i] * wy[j]
                for k in range(3):
                    f = arr[bx + i, by + j, bz + k]
                    acc += wij * wz[k] * f
                    if want_grad:
                        df = f - f0
                        gx += dx[i] * wy[j] * wz[k] * df
                        gy += wx[i] * dy[j] * wz[k] * df
                        gz += wij * dz[k] * df
        v[c] = acc
        if want_grad:
            g[c, 0] = gx
            g[c, 1] = gy
            g[c, 2] = gz


@njit(cache=True)
def sample2(c0, c1, org, h, lo, ext, periodic, margin, X, want_grad):
    n = X.shape[0]
    V = np.empty((n, 2))
    G = np.zeros((n, 2, 2))
    xp = np.empty(2)
    for p in range(n):
        fold_point(X[p], lo, ext, periodic, margin, xp)
        _interp2(c0, c1, org, h, xp, V[p], G[p], want_grad)
    return V, G


@njit(cache=True)
def sample3(c0, c1, c2, org, h, lo, ext, periodic, margin, X, want_grad):
    n = X.shape[0]
    V = np.empty((n, 3))
    G = np.zeros((n, 3, 3))
    xp = np.empty(3)
    for p in range(n):
        fold_point(X[p], lo, ext, periodic, margin, xp)
        _interp3(c0, c1, c2, org, h, xp, V[p], G[p], want_grad)
    return V, G


@njit(cache=True)
def sample_component2(arr, org_c, h, lo, ext, periodic, margin, X):
    n = X.shape[0]
    out = np.empty(n)
    xp = np.empty(2)
    inv_h = 1.0 / h
    for p in range(n):
        fold_point(X[p], lo, ext, periodic, margin, xp)
        bx, wx0, wx1, wx2, _, _, _ = _bspline((xp[0] - org_c[0]) * inv_h)
        by, wy0, wy1, wy2, _, _, _ = _bspline((xp[1] - org_c[1]) * inv_h)
        wx = (wx0, wx1, wx2)
        wy = (wy0, wy1, wy2)
        acc = 0.0
        for i in range(3):
            for j in range(3):
                acc += wx[i] * wy[j] * arr[bx + i, by + j]
        out[p] = acc
    return out


@njit(cache=True)
def sample_component3(arr, org_c, h, lo, ext, periodic, margin, X):
    n = X.shape[0]
    out = np.empty(n)
    xp = np.empty(3)
    inv_h = 1.0 / h
    for p in range(n):
        fold_point(X[p], lo, ext, periodic, margin, xp)
        bx, wx0, wx1, wx2, _, _, _ = _bspline((xp[0] - org_c[0]) * inv_h)
        by, wy0, wy1, wy2, _, _, _ = _bspline((xp[1] - org_c[1]) * inv_h)
        bz, wz0, wz1, wz2, _, _, _ = _bspline((xp[2] - org_c[2]) * inv_h)
        wx = (wx0, wx1, wx2)
        wy = (wy0, wy1, wy2)
        wz = (wz0, wz1, wz2)
        acc = 0.0
        for i in range(3):
            for j in range(3):
                for k in range(3):
                    acc += wx[i] * wy[j] * wz[k] * arr[bx + i, by + j, bz + k]
        out[p] = acc
    return out


@njit(cache=True)
def _jac_rhs(G, M, sign, out):
    # sign > 0: out = G @ M ; sign < 0: out = -(M @ G)
    d = G.shape[0]
    for i in range(d):
        for j in range(d):
            s = 0.0
            if sign > 0:
                for k in range(d):
                    s += G[i, k] * M[k, j]
            else:
                for k in range(d):
                    s -= M[i, k] * G[k, j]
            out[i, j] = s


@njit(cache=True)
def _stage(comps2, comps3, org, h, lo, ext, periodic, margin, xs, v, g, d):
    xp = np.empty(d)
    fold_point(xs, lo, ext, periodic, margin, xp)
    if d == 2:
        _interp2(comps2[0], comps2[1], org, h, xp, v, g, True)
    else:
        _interp3(comps3[0], comps3[1], comps3[2], org, h, xp, v, g, True)


@njit(cache=True)
def rk4_advance(comps2, comps3, org, h, lo, ext, periodic, margin, X, F, T, dt):
    """Joint RK4 step of x, F and T in place.  Returns the first bad index or -1."""
    n, d = X.shape
    v = np.empty(d)
    g = np.empty((d, d))
    kx = np.empty((4, d))
    kF = np.empty((4, d, d))
    kT = np.empty((4, d, d))
    xs = np.empty(d)
    Fs = np.empty((d, d))
    Ts = np.empty((d, d))
    coef = (0.0, 0.5, 0.5, 1.0)
    bad = -1
    for p in range(n):
        for s in range(4):
            a = coef[s] * dt
            if s == 0:
                for i in range(d):
                    xs[i] = X[p, i]
                    for j in range(d):
                        Fs[i, j] = F[p, i, j]
                        Ts[i, j] = T[p, i, j]
            else:
                for i in range(d):
                    xs[i] = X[p, i] + a * kx[s - 1, i]
                    for j in range(d):
                        Fs[i, j] = F[p, i, j] + a * kF[s - 1, i, j]
                        Ts[i, j] = T[p, i, j] + a * kT[s - 1, i, j]
            _stage(comps2, comps3, org, h, lo, ext, periodic, margin, xs, v, g, d)
            for i in range(d):
                kx[s, i] = v[i]
            _jac_rhs(g, Fs, 1, kF[s])
            _jac_rhs(g, Ts, -1, kT[s])
        w = dt / 6.0
        for i in range(d):
            X[p, i] += w * (kx[0, i] + 2.0 * kx[1, i] + 2.0 * kx[2, i] + kx[3, i])
            for j in range(d):
                F[p, i, j] += w * (kF[0, i, j] + 2.0 * kF[1, i, j] + 2.0 * kF[2, i, j] + kF[3, i, j])
                T[p, i, j] += w * (kT[0, i, j] + 2.0 * kT[1, i, j] + 2.0 * kT[2, i, j] + kT[3, i, j])
        fold_point(X[p], lo, ext, periodic, margin, xs)
        ok = True
        for i in range(d):
            X[p, i] = xs[i]
            if not np.isfinite(xs[i]):
                ok = False
            for j in range(d):
                if not (np.isfinite(F[p, i, j]) and np.isfinite(T[p, i, j])):
                    ok = False
        if not ok and bad < 0:
            bad = p
    return bad


@njit(cache=True)
def p2g2(X, Q, A, org, h, num0, num1, den0, den1):
    """Serial APIC scatter into padded accumulators (no folding)."""
    inv_h = 1.0 / h
    for p in range(X.shape[0]):
        for c in range(2):
            num = num0 if c == 0 else num1
            den = den0 if c == 0 else den1
            bx, wx0, wx1, wx2, _, _, _ = _bspline((X[p, 0] - org[c, 0]) * inv_h)
            by, wy0, wy1, wy2, _, _, _ = _bspline((X[p, 1] - org[c, 1]) * inv_h)
            wx = (wx0, wx1, wx2)
            wy = (wy0, wy1, wy2)
            for i in range(3):
                rx = org[c, 0] + (bx + i) * h - X[p, 0]
                for j in range(3):
                    ry = org[c, 1] + (by + j) * h - X[p, 1]
                    w = wx[i] * wy[j]
                    q = Q[p, c] + A[p, c, 0] * rx + A[p, c, 1] * ry
                    num[bx + i, by + j] += w * q
                    den[bx + i, by + j] += w


@njit(cache=True)
def p2g3(X, Q, A, org, h, num0, num1, num2, den0, den1, den2):
    inv_h = 1.0 / h
    for p in range(X.shape[0]):
        for c in range(3):
            if c == 0:
                num = num0
                den = den0
            elif c == 1:
                num = num1
                den = den1
            else:
                num = num2
                den = den2
            bx, wx0, wx1, wx2, _, _, _ = _bspline((X[p, 0] - org[c, 0]) * inv_h)
            by, wy0, wy1, wy2, _, _, _ = _bspline((X[p, 1] - org[c, 1]) * inv_h)
            bz, wz0, wz1, wz2, _, _, _ = _bspline((X[p, 2] - org[c, 2]) * inv_h)
            wx = (wx0, wx1, wx2)
            wy = (wy0, wy1, wy2)
            wz = (wz0, wz1, wz2)
            for i in range(3):
                rx = org[c, 0] + (bx + i) * h - X[p, 0]
                for j in range(3):
                    ry = org[c, 1] + (by + j) * h - X[p, 1]
                    for k in range(3):
                        rz = org[c, 2] + (bz + k) * h - X[p, 2]
                        w = wx[i] * wy[j] * wz[k]
                        q = Q[p, c] + A[p, c, 0] * rx + A[p, c, 1] * ry + A[p, c, 2] * rz
                        num[bx + i, by + j, bz + k] += w * q
                        den[bx + i, by + j, bz + k] += w
