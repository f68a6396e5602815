"""Pure-numpy reference versions of the raster kernels.

Each function here has a twin in ``_kernels_numba`` with the same signature
and the same output, bit for bit. The numpy versions are the fallback when
numba is unavailable or disabled with ``PSEUDOTILE_DISABLE_NUMBA=1``.
"""
from __future__ import annotations

import numpy as np

INF = 1e20


def edt_rows(f: np.ndarray) -> np.ndarray:
    """Squared 1D distance transform of every row of ``f`` (lower envelope of parabolas)."""
    f = np.asarray(f, dtype=np.float64)
    out = np.empty_like(f)
    for r in range(f.shape[0]):
        out[r] = _edt_1d(f[r])
    return out


def _edt_1d(f: np.ndarray) -> np.ndarray:
    n = f.shape[0]
    d = np.empty(n)
    finite = np.nonzero(f < INF)[0]
    if finite.size == 0:
        d[:] = INF
        return d
    v = np.zeros(n, dtype=np.int64)
    z = np.zeros(n + 1)
    k = 0
    v[0] = finite[0]
    z[0] = -np.inf
    z[1] = np.inf
    for q in finite[1:]:
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    q = np.arange(n, dtype=np.float64)
    idx = np.searchsorted(z[1:k + 1], q, side="left")
    p = v[idx]
    d[:] = (q - p) ** 2 + f[p]
    return d


def scatter_affine(points: np.ndarray, A: np.ndarray, b: np.ndarray,
                   origin: np.ndarray, h: float, out: np.ndarray) -> int:
    """Map ``points`` by ``x -> A x + b`` and add one to the cell of ``out`` holding each image.

    Returns the number of images falling outside the grid.
    """
    if points.shape[0] == 0:
        return 0
    y = points @ A.T + b
    idx = np.floor((y - origin) / h).astype(np.int64)
    shape = np.array(out.shape)
    ok = np.all((idx >= 0) & (idx < shape), axis=1)
    flat = np.ravel_multi_index(tuple(idx[ok].T), out.shape)
    np.add.at(out.reshape(-1), flat, 1)
    return int((~ok).sum())


def box_cover_count(lo: np.ndarray, hi: np.ndarray, origin: np.ndarray,
                    h: float, counts: np.ndarray) -> None:
    """Add one to every cell of ``counts`` whose center lies in a closed box [lo_k, hi_k]."""
    shape = np.array(counts.shape)
    first = np.ceil((lo - origin) / h - 0.5).astype(np.int64)
    last = np.floor((hi - origin) / h - 0.5).astype(np.int64)
    first = np.maximum(first, 0)
    last = np.minimum(last, shape - 1)
    for f, l in zip(first, last):
        if np.any(l < f):
            continue
        counts[tuple(slice(a, c + 1) for a, c in zip(f, l))] += 1


def locate_points(points, lo, hi, owner, table, gorigin, gsize, gshape, offsets, search):
    """Owning tile and clearance (capped at ``search``) of each point, via a bucket table.

    ``table[b]`` lists the boxes meeting bucket ``b`` (padded with -1); every
    box within ``search`` of a point lies in the 3^d block around its bucket.
    """
    n, d = points.shape
    idx = np.full(n, -1, dtype=np.int64)
    clear = np.zeros(n)
    if n == 0:
        return idx, clear
    gshape = np.asarray(gshape)
    strides = np.cumprod(np.concatenate([[1], gshape[::-1][:-1]]))[::-1]
    b = np.floor((points - gorigin) / gsize).astype(np.int64)
    inside_owner = np.full(n, -1, dtype=np.int64)
    ambiguous = np.zeros(n, dtype=bool)
    blocks = []
    for off in offsets:
        nb = b + off
        valid = np.all((nb >= 0) & (nb < gshape), axis=1)
        flat = np.where(valid, (np.clip(nb, 0, gshape - 1) * strides).sum(1), 0)
        boxes = np.where(valid[:, None], table[flat], -1)
        bx = np.maximum(boxes, 0)
        gap = np.maximum(lo[bx] - points[:, None], 0) + np.maximum(points[:, None] - hi[bx], 0)
        dist2 = (gap ** 2).sum(-1)
        own = np.where(boxes >= 0, owner[bx], -1)
        blocks.append((own, dist2))
        hit = (boxes >= 0) & (dist2 == 0.0)
        cand = np.where(hit, own, -1).max(1)
        cand_min = np.where(hit, own, np.iinfo(np.int64).max).min(1)
        ambiguous |= hit.any(1) & (cand != cand_min)
        first = (inside_owner < 0) & (cand >= 0)
        ambiguous |= (inside_owner >= 0) & (cand >= 0) & (cand != inside_owner)
        inside_owner = np.where(first, cand, inside_owner)
    other = np.full(n, search * search)
    for own, dist2 in blocks:
        m = (own >= 0) & (own != inside_owner[:, None])
        other = np.minimum(other, np.where(m, dist2, np.inf).min(1))
    ok = (inside_owner >= 0) & ~ambiguous
    idx[ok] = inside_owner[ok]
    clear[ok] = np.sqrt(other[ok])
    return idx, clear
