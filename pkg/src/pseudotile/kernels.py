"""Backend selection for the raster kernels.

The numba backend is used when numba imports and ``PSEUDOTILE_DISABLE_NUMBA``
is unset or ``0``. Both backends are importable directly for testing and
benchmarking via :func:`get_backend`.
"""
from __future__ import annotations

import os
from types import ModuleType

import numpy as np

from . import _kernels_numpy

_DISABLED = os.environ.get("PSEUDOTILE_DISABLE_NUMBA", "0") not in ("", "0", "false", "False")

try:
    if _DISABLED:
        raise ImportError("numba disabled by environment")
    from . import _kernels_numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    _kernels_numba = None
    HAVE_NUMBA = False

INF = _kernels_numpy.INF


def get_backend(name: str | None = None) -> ModuleType:
    if name is None:
        name = "numba" if HAVE_NUMBA else "numpy"
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but unavailable")
        return _kernels_numba
    if name == "numpy":
        return _kernels_numpy
    raise ValueError(f"unknown backend {name!r}")


BACKEND = "numba" if HAVE_NUMBA else "numpy"


def edt(mask: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Euclidean distance (in cells) from every cell to the nearest True cell of ``mask``.

    Exact squared distances are computed axis by axis; cells with no True
    cell anywhere get ``inf``.
    """
    kern = get_backend(backend)
    f = np.where(mask, 0.0, INF)
    for ax in range(mask.ndim):
        moved = np.moveaxis(f, ax, -1)
        shp = moved.shape
        rows = np.ascontiguousarray(moved.reshape(-1, shp[-1]))
        moved = kern.edt_rows(rows).reshape(shp)
        f = np.moveaxis(moved, -1, ax)
    f = np.minimum(f, INF)
    out = np.sqrt(f)
    out[f >= INF] = np.inf
    return np.ascontiguousarray(out)


def scatter_affine(points, A, b, origin, h, out, backend: str | None = None) -> int:
    """Add one to the cell of the integer array ``out`` holding each image ``A x + b``; return misses."""
    if not np.issubdtype(out.dtype, np.integer) or not out.flags.c_contiguous:
        raise TypeError("out must be a C-contiguous integer array")
    kern = get_backend(backend)
    return kern.scatter_affine(np.ascontiguousarray(points, dtype=np.float64),
                               np.ascontiguousarray(A, dtype=np.float64),
                               np.ascontiguousarray(b, dtype=np.float64),
                               np.ascontiguousarray(origin, dtype=np.float64),
                               float(h), out)


def box_cover_count(lo, hi, origin, h, counts, backend: str | None = None) -> None:
    kern = get_backend(backend)
    kern.box_cover_count(np.ascontiguousarray(lo, dtype=np.float64),
                         np.ascontiguousarray(hi, dtype=np.float64),
                         np.ascontiguousarray(origin, dtype=np.float64),
                         float(h), counts)


class BoxIndex:
    """Uniform bucket grid over boxes, sized so each point's 3^d bucket block holds
    every box within ``search`` of it."""

    def __init__(self, lo: np.ndarray, hi: np.ndarray, owner: np.ndarray, search: float):
        self.lo = np.ascontiguousarray(lo, dtype=np.float64)
        self.hi = np.ascontiguousarray(hi, dtype=np.float64)
        self.owner = np.ascontiguousarray(owner, dtype=np.int64)
        self.search = float(search)
        d = self.lo.shape[1]
        ext = float((self.hi - self.lo).max()) if self.lo.shape[0] else 1.0
        self.size = max(self.search, ext, 1e-12)
        self.origin = self.lo.min(0) - self.size if self.lo.shape[0] else np.zeros(d)
        top = self.hi.max(0) + self.size if self.lo.shape[0] else np.ones(d)
        self.shape = np.maximum(np.ceil((top - self.origin) / self.size).astype(np.int64), 1)
        first = np.floor((self.lo - self.origin) / self.size).astype(np.int64)
        last = np.floor((self.hi - self.origin) / self.size).astype(np.int64)
        strides = np.cumprod(np.concatenate([[1], self.shape[::-1][:-1]]))[::-1]
        pairs_b, pairs_x = [], []
        for corner in np.array(np.meshgrid(*([[0, 1]] * d), indexing="ij")).reshape(d, -1).T:
            c = np.where(corner == 1, last, first)
            pairs_b.append((c * strides).sum(1))
            pairs_x.append(np.arange(self.lo.shape[0]))
        pb = np.concatenate(pairs_b)
        px = np.concatenate(pairs_x)
        pairs = np.unique(np.stack([pb, px], 1), axis=0)
        nb = int(np.prod(self.shape))
        counts = np.bincount(pairs[:, 0], minlength=nb)
        self.table = np.full((nb, max(1, int(counts.max()) if counts.size else 1)), -1, dtype=np.int64)
        start = np.concatenate([[0], np.cumsum(counts)[:-1]])
        slot = np.arange(pairs.shape[0]) - start[pairs[:, 0]]
        self.table[pairs[:, 0], slot] = pairs[:, 1]
        self.offsets = np.array(np.meshgrid(*([[-1, 0, 1]] * d), indexing="ij")).reshape(d, -1).T.astype(np.int64)
        self.offsets = np.ascontiguousarray(self.offsets)

    def locate(self, points, backend: str | None = None):
        kern = get_backend(backend)
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        return kern.locate_points(pts, self.lo, self.hi, self.owner, self.table, self.origin,
                                  self.size, self.shape, self.offsets, self.search)
