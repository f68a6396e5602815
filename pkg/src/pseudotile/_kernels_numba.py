"""numba-compiled raster kernels. Same contracts as ``_kernels_numpy``."""
from __future__ import annotations

import numpy as np
from numba import njit

INF = 1e20


@njit(cache=True)
def _edt_1d(f, d, v, z):
    n = f.shape[0]
    first = -1
    for i in range(n):
        if f[i] < INF:
            first = i
            break
    if first < 0:
        for i in range(n):
            d[i] = INF
        return
    k = 0
    v[0] = first
    z[0] = -np.inf
    z[1] = np.inf
    for q in range(first + 1, n):
        if f[q] >= INF:
            continue
        p = v[k]
        s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * q - 2.0 * p)
        while s <= z[k]:
            k -= 1
            p = v[k]
            s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * q - 2.0 * p)
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        p = v[k]
        d[q] = (q - p) * (q - p) + f[p]


@njit(cache=True)
def edt_rows(f):
    rows, n = f.shape
    out = np.empty((rows, n))
    v = np.zeros(n, dtype=np.int64)
    z = np.zeros(n + 1)
    for r in range(rows):
        _edt_1d(f[r], out[r], v, z)
    return out


@njit(cache=True)
def scatter_affine(points, A, b, origin, h, out):
    n, d = points.shape
    flat = out.reshape(-1)
    shape = out.shape
    strides = np.empty(d, dtype=np.int64)
    acc = 1
    for ax in range(d - 1, -1, -1):
        strides[ax] = acc
        acc *= shape[ax]
    missed = 0
    for i in range(n):
        pos = 0
        inside = True
        for r in range(d):
            y = b[r]
            for c in range(d):
                y += A[r, c] * points[i, c]
            j = int(np.floor((y - origin[r]) / h))
            if j < 0 or j >= shape[r]:
                inside = False
                break
            pos += j * strides[r]
        if inside:
            flat[pos] += 1
        else:
            missed += 1
    return missed


@njit(cache=True)
def _box_cover_count3(lo, hi, origin, h, counts):
    nb = lo.shape[0]
    s0, s1, s2 = counts.shape
    shape = (s0, s1, s2)
    for k in range(nb):
        f = np.empty(3, dtype=np.int64)
        l = np.empty(3, dtype=np.int64)
        empty = False
        for ax in range(3):
            a = int(np.ceil((lo[k, ax] - origin[ax]) / h - 0.5))
            c = int(np.floor((hi[k, ax] - origin[ax]) / h - 0.5))
            if a < 0:
                a = 0
            if c > shape[ax] - 1:
                c = shape[ax] - 1
            if c < a:
                empty = True
            f[ax] = a
            l[ax] = c
        if empty:
            continue
        for i in range(f[0], l[0] + 1):
            for j in range(f[1], l[1] + 1):
                for m in range(f[2], l[2] + 1):
                    counts[i, j, m] += 1


def box_cover_count(lo, hi, origin, h, counts):
    d = counts.ndim
    if d > 3:
        from ._kernels_numpy import box_cover_count as fallback
        fallback(lo, hi, origin, h, counts)
        return
    pad = 3 - d
    lo3 = np.concatenate([np.zeros((lo.shape[0], pad)), lo], axis=1)
    hi3 = np.concatenate([np.zeros((hi.shape[0], pad)), hi], axis=1)
    origin3 = np.concatenate([np.full(pad, -0.5 * h), origin])
    view = counts.reshape((1,) * pad + counts.shape)
    _box_cover_count3(lo3, hi3, origin3, h, view)


@njit(cache=True)
def locate_points(points, lo, hi, owner, table, gorigin, gsize, gshape, offsets, search):
    n, d = points.shape
    idx = np.full(n, -1, dtype=np.int64)
    clear = np.zeros(n)
    strides = np.empty(d, dtype=np.int64)
    acc = 1
    for ax in range(d - 1, -1, -1):
        strides[ax] = acc
        acc *= gshape[ax]
    nocc = table.shape[1]
    b = np.empty(d, dtype=np.int64)
    for p in range(n):
        for ax in range(d):
            b[ax] = int(np.floor((points[p, ax] - gorigin[ax]) / gsize))
        inside = -1
        ambiguous = False
        for pass_ in range(2):
            best = search * search
            for o in range(offsets.shape[0]):
                flat = 0
                valid = True
                for ax in range(d):
                    c = b[ax] + offsets[o, ax]
                    if c < 0 or c >= gshape[ax]:
                        valid = False
                        break
                    flat += c * strides[ax]
                if not valid:
                    continue
                for s in range(nocc):
                    bx = table[flat, s]
                    if bx < 0:
                        break
                    dist2 = 0.0
                    for ax in range(d):
                        g = 0.0
                        if lo[bx, ax] > points[p, ax]:
                            g = lo[bx, ax] - points[p, ax]
                        elif points[p, ax] > hi[bx, ax]:
                            g = points[p, ax] - hi[bx, ax]
                        dist2 += g * g
                    if pass_ == 0:
                        if dist2 == 0.0:
                            if inside < 0:
                                inside = owner[bx]
                            elif owner[bx] != inside:
                                ambiguous = True
                    elif owner[bx] != inside and dist2 < best:
                        best = dist2
            if pass_ == 1 and inside >= 0 and not ambiguous:
                idx[p] = inside
                clear[p] = np.sqrt(best)
            if pass_ == 0 and (inside < 0 or ambiguous):
                break
    return idx, clear
