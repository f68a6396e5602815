"""Expanding maps and compact regions.

A :class:`Region` carries an exact description as a union of closed
axis-aligned boxes with disjoint interiors, a raster (cell occupancy on a
regular grid), or both. Interval unions in one dimension are handled
exactly; in higher dimensions morphological operations run on rasters.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np

from . import config, kernels
from .errors import EmptyRegion, NotExpanding, PowerExhausted


# ---------------------------------------------------------------------------
# expanding maps


@dataclass(frozen=True, eq=False)
class ExpansionMap:
    """A linear expansion ``matrix**power`` with certified constant ``lam``.

    ``lam`` is the smallest singular value of ``matrix**power``, so
    ``|linear @ v| >= lam * |v|`` in the Euclidean norm.
    """

    matrix: np.ndarray
    power: int
    lam: float

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def linear(self) -> np.ndarray:
        return np.linalg.matrix_power(self.matrix, self.power)

    @cached_property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.linear)

    def pow(self, k: int) -> np.ndarray:
        """The matrix ``linear**k`` (negative ``k`` allowed)."""
        if k >= 0:
            return np.linalg.matrix_power(self.linear, k)
        return np.linalg.matrix_power(self.inverse, -k)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.linear, 2))

    @property
    def is_similitude(self) -> bool:
        s = np.linalg.svd(self.linear, compute_uv=False)
        return bool(np.isclose(s[0], s[-1], rtol=1e-12))

    def apply(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.linear.T


def adapted_expansion(matrix, max_power: int = 32, tol: float = 1e-9) -> ExpansionMap:
    """Find the least power of ``matrix`` that expands every vector in the Euclidean norm.

    Raises NotExpanding when some eigenvalue has modulus <= 1 + tol, and
    PowerExhausted when no power up to ``max_power`` has smallest singular
    value above one.
    """
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise ValueError("expansion matrix must be square")
    eig = np.abs(np.linalg.eigvals(m))
    if np.any(eig <= 1.0 + tol):
        raise NotExpanding(f"eigenvalue moduli {np.sort(eig)} not all > 1")
    p = np.eye(m.shape[0])
    for ell in range(1, max_power + 1):
        p = p @ m
        smin = np.linalg.svd(p, compute_uv=False)[-1]
        if smin > 1.0 + tol:
            return ExpansionMap(m, ell, float(smin))
    raise PowerExhausted(f"no power <= {max_power} expands in the Euclidean norm")


# ---------------------------------------------------------------------------
# rasters and regions


@dataclass(frozen=True, eq=False)
class Raster:
    """Cell occupancy. Cell ``idx`` covers ``origin + h*idx + [0, h]^d``."""

    origin: np.ndarray
    h: float
    occ: np.ndarray

    @property
    def dimension(self) -> int:
        return self.occ.ndim

    def centers(self, mask: np.ndarray | None = None) -> np.ndarray:
        m = self.occ if mask is None else mask
        idx = np.argwhere(m)
        return self.origin + (idx + 0.5) * self.h

    def count(self) -> int:
        return int(self.occ.sum())

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.argwhere(self.occ)
        if idx.size == 0:
            raise EmptyRegion("empty raster")
        return self.origin + idx.min(0) * self.h, self.origin + (idx.max(0) + 1) * self.h

    def cropped(self, pad: int = 0) -> "Raster":
        idx = np.argwhere(self.occ)
        if idx.size == 0:
            return self
        lo = np.maximum(idx.min(0) - pad, 0)
        hi = idx.max(0) + 1 + pad
        sl = tuple(slice(a, b) for a, b in zip(lo, hi))
        occ = np.zeros(tuple(hi - lo), dtype=bool)
        src = self.occ[sl]
        occ[tuple(slice(0, s) for s in src.shape)] = src
        return Raster(self.origin + lo * self.h, self.h, occ)


def _as_boxes(boxes, dimension=None) -> np.ndarray:
    b = np.asarray(boxes, dtype=float)
    if b.ndim == 2 and b.shape[1] == 2 and (dimension in (None, 1)):
        b = b[:, :, None]
    if b.ndim != 3 or b.shape[1] != 2:
        raise ValueError("boxes must have shape (n, 2, d)")
    lo = np.minimum(b[:, 0], b[:, 1])
    hi = np.maximum(b[:, 0], b[:, 1])
    return np.stack([lo, hi], axis=1)


def boxes_from_raster(r: Raster) -> np.ndarray:
    """Exact box decomposition of the occupied cells (row runs, merged across rows in 2D)."""
    occ = r.occ
    d = occ.ndim
    if not occ.any():
        return np.zeros((0, 2, d))
    flat = occ.reshape(-1, occ.shape[-1]).astype(np.int8)
    pad = np.zeros((flat.shape[0], 1), dtype=np.int8)
    diff = np.diff(np.concatenate([pad, flat, pad], axis=1), axis=1)
    rows_s, cols_s = np.nonzero(diff == 1)
    rows_e, cols_e = np.nonzero(diff == -1)
    lead = np.array(np.unravel_index(rows_s, occ.shape[:-1])).T if d > 1 else np.zeros((rows_s.size, 0), int)
    runs = []  # (lead idx..., start, stop) with stop exclusive, lead span (a, b)
    for k in range(rows_s.size):
        runs.append([tuple(lead[k]), cols_s[k], cols_e[k]])
    if d == 2:
        # merge identical runs on consecutive rows
        active: dict[tuple[int, int], list] = {}
        merged = []
        by_row: dict[int, list] = {}
        for lidx, s, e in runs:
            by_row.setdefault(lidx[0], []).append((s, e))
        for row in sorted(by_row):
            nxt = {}
            for s, e in by_row[row]:
                rec = active.get((s, e))
                if rec is not None and rec[1] == row:
                    rec[1] = row + 1
                    nxt[(s, e)] = rec
                else:
                    rec = [row, row + 1, s, e]
                    merged.append(rec)
                    nxt[(s, e)] = rec
            active = nxt
        lo = np.array([[a, s] for a, b, s, e in merged], dtype=float)
        hi = np.array([[b, e] for a, b, s, e in merged], dtype=float)
    else:
        lo = np.array([list(l) + [s] for l, s, e in runs], dtype=float)
        hi = np.array([[x + 1 for x in l] + [e] for l, s, e in runs], dtype=float)
    lo = r.origin + lo * r.h
    hi = r.origin + hi * r.h
    return np.stack([lo, hi], axis=1)


def merge_intervals(boxes: np.ndarray, touch_tol: float = 0.0) -> np.ndarray:
    """Union of 1D intervals (n, 2, 1) as sorted disjoint intervals."""
    if boxes.shape[0] == 0:
        return boxes
    iv = boxes[:, :, 0]
    iv = iv[np.argsort(iv[:, 0], kind="stable")]
    out = [list(iv[0])]
    for a, b in iv[1:]:
        if a <= out[-1][1] + touch_tol:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return np.array(out)[:, :, None]


class Region:
    """A compact subset of R^d with an exact box description, a raster, or both."""

    def __init__(self, boxes=None, raster: Raster | None = None, dimension: int | None = None,
                 empty: bool = False):
        if boxes is None and raster is None and not empty:
            raise ValueError("a region needs boxes or a raster")
        self._boxes = None if boxes is None else _as_boxes(boxes, dimension)
        self.raster = raster
        if self._boxes is not None:
            self._dim = self._boxes.shape[2]
        elif raster is not None:
            self._dim = raster.dimension
        else:
            self._dim = int(dimension or 1)
        self.empty = bool(empty) or (
            (self._boxes is not None and self._boxes.shape[0] == 0)
            or (self._boxes is None and raster is not None and not raster.occ.any()))

    # constructors
    @classmethod
    def interval(cls, a: float, b: float) -> "Region":
        return cls([[a, b]])

    @classmethod
    def box(cls, lo, hi) -> "Region":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        return cls(np.stack([lo, hi])[None])

    @classmethod
    def from_cells(cls, cells, size: float = 1.0) -> "Region":
        c = np.atleast_2d(np.asarray(cells, dtype=float))
        return cls(np.stack([c * size, (c + 1) * size], axis=1))

    @classmethod
    def from_raster(cls, r: Raster) -> "Region":
        return cls(raster=r)

    @classmethod
    def empty_region(cls, dimension: int) -> "Region":
        return cls(boxes=np.zeros((0, 2, dimension)), empty=True)

    # basic properties
    @property
    def dimension(self) -> int:
        return self._dim

    @property
    def kind(self) -> str:
        if self._boxes is not None and self.raster is not None:
            return "both"
        return "exact" if self._boxes is not None else "raster"

    @property
    def is_exact(self) -> bool:
        return self._boxes is not None

    @cached_property
    def boxes(self) -> np.ndarray:
        if self._boxes is not None:
            return self._boxes
        return boxes_from_raster(self.raster)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.empty:
            raise EmptyRegion("empty region has no bounds")
        b = self.boxes
        return b[:, 0].min(0), b[:, 1].max(0)

    def corners(self) -> np.ndarray:
        b = self.boxes
        d = self.dimension
        sel = np.array(list(product((0, 1), repeat=d)))
        out = b[:, sel, np.arange(d)]  # (n, 2^d, d)
        return out.reshape(-1, d)

    @property
    def volume(self) -> float:
        if self.empty:
            return 0.0
        if self._boxes is None:
            return self.raster.count() * self.raster.h ** self.dimension
        b = self._boxes
        if self.dimension == 1:
            b = merge_intervals(b)
        return float(np.prod(b[:, 1] - b[:, 0], axis=1).sum())

    def translate(self, v) -> "Region":
        v = np.asarray(v, dtype=float).reshape(self.dimension)
        boxes = None if self._boxes is None else self._boxes + v
        r = None if self.raster is None else Raster(self.raster.origin + v, self.raster.h, self.raster.occ)
        return Region(boxes, r, self.dimension, empty=self.empty)

    def linear_map(self, M, h: float | None = None) -> "Region":
        """Image under an invertible linear map.

        Diagonal maps keep the exact description; other maps resample onto
        a raster of cell size ``h``.
        """
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if self.empty:
            return self
        if np.allclose(M, np.diag(np.diag(M))):
            s = np.diag(M)
            boxes = None if self._boxes is None else self._boxes * s
            r = None
            if self.raster is not None and np.allclose(s, s[0]) and s[0] > 0:
                r = Raster(self.raster.origin * s[0], self.raster.h * s[0], self.raster.occ)
            if boxes is None and r is None:
                boxes = self.boxes * s
            return Region(boxes, r, self.dimension)
        h = h or config.get_h()
        c = self.corners()
        img = c @ M.T
        lo, hi = img.min(0) - h, img.max(0) + h
        shape = tuple(np.ceil((hi - lo) / h).astype(int))
        _check_cells(shape)
        grid = lo + (np.argwhere(np.ones(shape, bool)) + 0.5) * h
        pre = grid @ np.linalg.inv(M).T
        occ = self.contains(pre, tol=0.5 * h * np.sqrt(self.dimension) / max(
            np.linalg.svd(M, compute_uv=False)[-1], 1e-300)).reshape(shape)
        return Region(raster=Raster(lo, h, occ))

    # point queries
    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        """Points within distance ``tol`` of the region (closed test)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if self.empty:
            return np.zeros(p.shape[0], dtype=bool)
        return self.distance(p) <= tol

    def distance(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if p.shape[1] != self.dimension and self.dimension == 1:
            p = p.reshape(-1, 1)
        if self.empty:
            return np.full(p.shape[0], np.inf)
        return box_union_distance(self.boxes, p)

    def rasterize(self, h: float | None = None, origin=None, shape=None) -> Raster:
        """Outer approximation: cells whose interior meets the region."""
        h = h or config.get_h()
        if origin is None:
            lo, hi = self.bounds()
            origin = np.floor(lo / h) * h - h
            shape = tuple((np.ceil((hi - origin) / h) + 1).astype(int))
        origin = np.asarray(origin, dtype=float)
        if self.raster is not None and self._boxes is None and np.isclose(self.raster.h, h):
            r = _embed(self.raster, origin, shape)
            if r is not None:
                return r
        _check_cells(shape)
        occ = np.zeros(shape, dtype=bool)
        b = self.boxes
        if b.shape[0]:
            lo = b[:, 0]
            hi = b[:, 1]
            # open cell meets the box  <=>  center within the half-cell-dilated box;
            # strict on nondegenerate axes, closed on degenerate ones
            eps = np.where(hi - lo <= 0, 0.0, 1e-9 * h)
            counts = np.zeros(shape, dtype=np.int32)
            kernels.box_cover_count(lo - 0.5 * h + eps, hi + 0.5 * h - eps, origin, h, counts)
            occ = counts > 0
        return Raster(origin, h, occ)

    def with_raster(self, h: float | None = None) -> "Region":
        return Region(self._boxes, self.rasterize(h), self.dimension)

    def __repr__(self) -> str:
        if self.empty:
            return f"Region(empty, d={self.dimension})"
        lo, hi = self.bounds()
        return f"Region({self.kind}, d={self.dimension}, bounds={lo.tolist()}..{hi.tolist()})"


def _check_cells(shape) -> None:
    n = int(np.prod(np.asarray(shape, dtype=float)))
    if n > config.get().max_raster_cells:
        from .errors import RasterOverflow
        raise RasterOverflow(f"raster of {n} cells exceeds limit")


def _embed(r: Raster, origin: np.ndarray, shape) -> Raster | None:
    off = (r.origin - origin) / r.h
    ioff = np.rint(off)
    if not np.allclose(off, ioff, atol=1e-6):
        return None
    ioff = ioff.astype(int)
    occ = np.zeros(shape, dtype=bool)
    src_lo = np.maximum(-ioff, 0)
    dst_lo = np.maximum(ioff, 0)
    n = np.minimum(np.array(r.occ.shape) - src_lo, np.array(shape) - dst_lo)
    if np.any(n <= 0):
        if r.occ.any():
            return None
        return Raster(origin, r.h, occ)
    src = r.occ[tuple(slice(a, a + m) for a, m in zip(src_lo, n))]
    if src.sum() != r.occ.sum():
        return None
    occ[tuple(slice(a, a + m) for a, m in zip(dst_lo, n))] = src
    return Raster(origin, r.h, occ)


def box_union_distance(boxes: np.ndarray, points: np.ndarray, chunk: int = 1 << 20) -> np.ndarray:
    """Euclidean distance from each point to a union of closed boxes."""
    n = points.shape[0]
    out = np.empty(n)
    step = max(1, chunk // max(1, boxes.shape[0]))
    for s in range(0, n, step):
        p = points[s:s + step, None, :]
        gap = np.maximum(boxes[None, :, 0] - p, 0.0) + np.maximum(p - boxes[None, :, 1], 0.0)
        out[s:s + step] = np.sqrt((gap ** 2).sum(-1)).min(1)
    return out


def common_grid(regions, h: float, pad: float = 0.0):
    lo = np.min([r.bounds()[0] for r in regions], axis=0) - pad
    hi = np.max([r.bounds()[1] for r in regions], axis=0) + pad
    origin = np.floor(lo / h) * h - h
    # keep existing raster grids aligned when possible
    for r in regions:
        if r.raster is not None and np.isclose(r.raster.h, h):
            k = np.floor((origin - r.raster.origin) / h)
            origin = r.raster.origin + k * h
            break
    shape = tuple((np.ceil((hi - origin) / h) + 2).astype(int))
    return origin, shape


# ---------------------------------------------------------------------------
# operations


def neighborhood(F: Region, R: float, h: float | None = None) -> Region:
    """Closed ``R``-neighborhood; exact for intervals, raster (outer-rounded) otherwise."""
    if R < 0:
        raise ValueError("R must be >= 0")
    if F.empty:
        raise EmptyRegion("neighborhood of empty region")
    if R == 0:
        return F
    if F.dimension == 1 and F.is_exact:
        b = merge_intervals(F.boxes)
        b = b + np.array([-R, R])[None, :, None]
        return Region(merge_intervals(b))
    h = h or (F.raster.h if F.raster is not None else config.get_h())
    origin, shape = common_grid([F], h, pad=R + 2 * h)
    r = F.rasterize(h, origin, shape)
    dist = kernels.edt(r.occ) * h
    occ = dist <= R + 0.5 * h * np.sqrt(F.dimension) + 1e-12
    return Region(raster=Raster(origin, h, occ))


def erode(F: Region, r: float, h: float | None = None) -> Region:
    """``{x in F : dist(x, boundary F) >= r}``; may be empty (flagged by ``.empty``)."""
    if r < 0:
        raise ValueError("r must be >= 0")
    if F.empty or r == 0:
        return F
    if F.dimension == 1 and F.is_exact:
        b = merge_intervals(F.boxes)
        b = b + np.array([r, -r])[None, :, None]
        keep = b[:, 1, 0] >= b[:, 0, 0]
        if not keep.any():
            return Region.empty_region(1)
        return Region(b[keep])
    h = h or (F.raster.h if F.raster is not None else config.get_h())
    origin, shape = common_grid([F], h, pad=2 * h)
    ras = F.rasterize(h, origin, shape)
    dist_out = kernels.edt(~ras.occ) * h
    # every point of a kept cell is at least r from the complement
    occ = ras.occ & (dist_out - h * np.sqrt(F.dimension) >= r - 1e-12)
    if not occ.any():
        return Region.empty_region(F.dimension)
    return Region(raster=Raster(origin, h, occ))


def _interval_directed(A: np.ndarray, B: np.ndarray) -> float:
    """sup over a in A of dist(a, B) for sorted disjoint interval arrays (n, 2)."""
    cand = [A[:, 0], A[:, 1]]
    if B.shape[0] > 1:
        mids = 0.5 * (B[:-1, 1] + B[1:, 0])
        inside = np.any((mids[:, None] >= A[None, :, 0]) & (mids[:, None] <= A[None, :, 1]), axis=1)
        cand.append(mids[inside])
    x = np.concatenate(cand)
    gap = np.maximum(B[None, :, 0] - x[:, None], 0) + np.maximum(x[:, None] - B[None, :, 1], 0)
    return float(gap.min(1).max())


def hausdorff_distance(A: Region, B: Region, h: float | None = None) -> float:
    """Hausdorff distance; exact for interval unions, raster-accurate to a cell diagonal otherwise."""
    if A.empty or B.empty:
        raise EmptyRegion("Hausdorff distance needs nonempty regions")
    if A.dimension != B.dimension:
        raise ValueError("dimension mismatch")
    if A.dimension == 1 and A.is_exact and B.is_exact:
        a = merge_intervals(A.boxes)[:, :, 0]
        b = merge_intervals(B.boxes)[:, :, 0]
        return max(_interval_directed(a, b), _interval_directed(b, a))
    hs = [r.raster.h for r in (A, B) if r.raster is not None]
    h = h or (min(hs) if hs else config.get_h())
    origin, shape = common_grid([A, B], h, pad=2 * h)
    ra = A.rasterize(h, origin, shape).occ
    rb = B.rasterize(h, origin, shape).occ
    if np.array_equal(ra, rb):
        return 0.0
    da = kernels.edt(ra)
    db = kernels.edt(rb)
    return float(max(db[ra].max(), da[rb].max()) * h)


def directed_hausdorff(A: Region, B: Region, h: float | None = None) -> float:
    """sup over a in A of dist(a, B)."""
    if A.dimension == 1 and A.is_exact and B.is_exact:
        return _interval_directed(merge_intervals(A.boxes)[:, :, 0], merge_intervals(B.boxes)[:, :, 0])
    hs = [r.raster.h for r in (A, B) if r.raster is not None]
    h = h or (min(hs) if hs else config.get_h())
    origin, shape = common_grid([A, B], h, pad=2 * h)
    ra = A.rasterize(h, origin, shape).occ
    rb = B.rasterize(h, origin, shape).occ
    return float(kernels.edt(rb)[ra].max() * h)


def diameter(F: Region) -> float:
    c = F.corners()
    if F.dimension == 1:
        return float(c.max() - c.min())
    if c.shape[0] > 64:
        from scipy.spatial import ConvexHull
        try:
            c = c[ConvexHull(c).vertices]
        except Exception:  # degenerate hull
            pass
    diff = c[:, None, :] - c[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).max())


def inscribed_ball(F: Region, h: float | None = None) -> tuple[np.ndarray, float]:
    """Center and radius of a largest inscribed ball (exact in 1D, raster otherwise)."""
    if F.empty:
        raise EmptyRegion("empty region")
    if F.dimension == 1 and F.is_exact:
        b = merge_intervals(F.boxes)[:, :, 0]
        k = int(np.argmax(b[:, 1] - b[:, 0]))
        return np.array([0.5 * (b[k, 0] + b[k, 1])]), float(0.5 * (b[k, 1] - b[k, 0]))
    h = h or (F.raster.h if F.raster is not None else config.get_h())
    origin, shape = common_grid([F], h, pad=2 * h)
    ras = F.rasterize(h, origin, shape)
    dist_out = kernels.edt(~ras.occ) * h
    dist_out[~ras.occ] = 0.0
    idx = np.unravel_index(int(np.argmax(dist_out)), dist_out.shape)
    return origin + (np.array(idx) + 0.5) * h, float(dist_out[idx])


def region_metrics(F: Region, h: float | None = None) -> tuple[float, float, float]:
    """(diameter, inradius, volume)."""
    _, rad = inscribed_ball(F, h)
    return diameter(F), rad, F.volume
