"""Tiles, patches, finite tiling windows and their Delone multisets.

A tile is stored as (label, translation); its support is the label's
prototile shape shifted by the translation. A :class:`TilingWindow` is a
finite patch together with a ball inside which it is complete: every tile
of the underlying tiling meeting the ball belongs to the patch.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from . import config, kernels
from .errors import LabelGeometryMismatch, OutOfWindow, PatchNotFound
from .geometry import Region, diameter, inscribed_ball


def snap(values, tol: float | None = None) -> np.ndarray:
    """Replace each value by the smallest member of its tol-chained cluster.

    Used before hashing float offsets so that two computations of the same
    number land in the same bucket.
    """
    tol = config.get().key_tol if tol is None else tol
    v = np.asarray(values, dtype=float)
    flat = v.ravel()
    if flat.size == 0:
        return v.copy()
    order = np.argsort(flat, kind="stable")
    s = flat[order]
    cid = np.concatenate([[0], np.cumsum(np.diff(s) > tol)])
    first = np.concatenate([[0], np.nonzero(np.diff(cid))[0] + 1])
    out = np.empty_like(flat)
    out[order] = s[first][cid]
    out[out == 0.0] = 0.0  # drop negative zero
    return out.reshape(v.shape)


def canonical_keys(items, tol: float | None = None) -> list[tuple]:
    """Hashable keys for many (labels, relative offsets) pairs, snapped jointly.

    Snapping all offsets together means equal offsets computed along
    different float paths always land on the same representative.
    """
    if not items:
        return []
    d = items[0][1].shape[1] if items[0][1].ndim == 2 else 1
    rel = np.concatenate([np.asarray(o, dtype=float).reshape(-1, d) for _, o in items])
    snapped = np.round(snap(rel, tol), 9) if rel.size else rel
    keys = []
    pos = 0
    for labels, o in items:
        n = len(labels)
        block = snapped[pos:pos + n]
        pos += n
        keys.append(tuple(sorted(zip(np.asarray(labels).tolist(), map(tuple, block.tolist())))))
    return keys


@dataclass(frozen=True, eq=False)
class Tile:
    support: Region
    label: int
    translation: np.ndarray


def shape_key(region: Region, tol: float | None = None) -> tuple:
    """Translation-normalized key of a box union (anchored at its least corner)."""
    b = region.boxes
    anchor = b[:, 0].min(0)
    rel = snap(b - anchor, tol)
    rows = sorted(tuple(np.round(r.ravel(), 9)) for r in rel)
    return tuple(rows)


class Patch:
    """A finite set of tiles given by labels and translations over shared prototile shapes."""

    def __init__(self, labels, translations, prototiles: list[Region], marked: int | None = None,
                 names: list[str] | None = None):
        self.prototiles = list(prototiles)
        d = self.prototiles[0].dimension if self.prototiles else 1
        self.labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        self.translations = np.asarray(translations, dtype=float).reshape(-1, d)
        if self.labels.shape[0] != self.translations.shape[0]:
            raise ValueError("labels and translations differ in length")
        self.marked = marked
        self.names = names or [str(i) for i in range(len(self.prototiles))]
        self.meta: dict = {}

    # container protocol
    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def dimension(self) -> int:
        return self.translations.shape[1]

    @property
    def m(self) -> int:
        return len(self.prototiles)

    def support_of(self, i: int) -> Region:
        return self.prototiles[self.labels[i]].translate(self.translations[i])

    def tiles(self) -> list[Tile]:
        return [Tile(self.support_of(i), int(self.labels[i]), self.translations[i].copy())
                for i in range(len(self))]

    def support(self) -> Region:
        if len(self) == 0:
            return Region.empty_region(self.dimension)
        lo, hi, _ = self.flat_boxes
        return Region(np.stack([lo, hi], axis=1))

    def subset(self, idx, marked: int | None = None) -> "Patch":
        idx = np.asarray(idx, dtype=np.int64)
        return Patch(self.labels[idx], self.translations[idx], self.prototiles, marked, self.names)

    def translate(self, g) -> "Patch":
        p = Patch(self.labels, self.translations + np.asarray(g, dtype=float), self.prototiles,
                  self.marked, self.names)
        return p

    def sorted(self) -> "Patch":
        """Tiles ordered by (label, lexicographic translation)."""
        keys = [self.translations[:, k] for k in range(self.dimension - 1, -1, -1)] + [self.labels]
        order = np.lexsort(keys)
        marked = None if self.marked is None else int(np.nonzero(order == self.marked)[0][0])
        return Patch(self.labels[order], self.translations[order], self.prototiles, marked, self.names)

    @cached_property
    def flat_boxes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All tile boxes as (lo, hi, owner) arrays."""
        los, his, own = [], [], []
        for lab, shape in enumerate(self.prototiles):
            sel = np.nonzero(self.labels == lab)[0]
            if sel.size == 0:
                continue
            b = shape.boxes
            t = self.translations[sel]
            los.append((t[:, None, :] + b[None, :, 0]).reshape(-1, self.dimension))
            his.append((t[:, None, :] + b[None, :, 1]).reshape(-1, self.dimension))
            own.append(np.repeat(sel, b.shape[0]))
        if not los:
            z = np.zeros((0, self.dimension))
            return z, z, np.zeros(0, dtype=np.int64)
        return np.concatenate(los), np.concatenate(his), np.concatenate(own)

    def anchor_index(self) -> int:
        """Tile of the least label with the lexicographically least translation."""
        if len(self) == 0:
            raise PatchNotFound("empty patch has no anchor")
        lab = self.labels.min()
        sel = np.nonzero(self.labels == lab)[0]
        t = snap(self.translations[sel])
        keys = [t[:, k] for k in range(self.dimension - 1, -1, -1)]
        return int(sel[np.lexsort(keys)[0]])

    def key(self, origin=None) -> tuple:
        """Hashable class key of the patch relative to ``origin`` (default: its anchor)."""
        if origin is None:
            origin = self.translations[self.anchor_index()]
        rel = snap(self.translations - origin)
        rows = sorted(zip(self.labels.tolist(), map(tuple, np.round(rel, 9).tolist())))
        mark = None
        if self.marked is not None:
            mark = (int(self.labels[self.marked]), tuple(np.round(rel[self.marked], 9).tolist()))
        return tuple(rows), mark

    def __repr__(self) -> str:
        return f"Patch(n={len(self)}, m={self.m}, d={self.dimension})"


@dataclass
class DeloneMultiset:
    """Point sets Lambda_i indexed by tile type, with packing/covering radius estimates."""

    points: list[np.ndarray]
    r_pack: float = float("nan")
    r_cov: float = float("nan")

    @property
    def m(self) -> int:
        return len(self.points)

    @property
    def dimension(self) -> int:
        for p in self.points:
            if p.size:
                return p.shape[1]
        return 1

    def union(self) -> np.ndarray:
        return np.concatenate([p for p in self.points if p.size] or [np.zeros((0, self.dimension))])


class TilingWindow:
    """A patch that is complete inside the closed ball ``N_radius(center)``."""

    def __init__(self, patch: Patch, center, radius: float):
        self.patch = patch
        self.center = np.asarray(center, dtype=float).reshape(patch.dimension)
        self.radius = float(radius)
        self._box_index: dict = {}

    @property
    def prototiles(self) -> list[Region]:
        return self.patch.prototiles

    @property
    def names(self) -> list[str]:
        return self.patch.names

    @property
    def dimension(self) -> int:
        return self.patch.dimension

    @property
    def m(self) -> int:
        return self.patch.m

    def __len__(self) -> int:
        return len(self.patch)

    def in_ball(self, points, margin: float = 0.0) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.linalg.norm(p - self.center, axis=1) <= self.radius - margin + 1e-12

    @cached_property
    def _index(self):
        lo, hi, owner = self.patch.flat_boxes
        centers = 0.5 * (lo + hi)
        rmax = float(np.max(np.linalg.norm(hi - lo, axis=1)) * 0.5) if lo.shape[0] else 0.0
        return cKDTree(centers), lo, hi, owner, rmax

    @cached_property
    def multiset(self) -> DeloneMultiset:
        pts = [self.patch.translations[self.patch.labels == i] for i in range(self.m)]
        rp = np.inf
        for p in pts:
            if p.shape[0] > 1:
                dd, _ = cKDTree(p).query(p, k=2)
                rp = min(rp, 0.5 * float(dd[:, 1].min()))
        ms = DeloneMultiset(pts, rp, float("nan"))
        ms.r_cov = covering_radius(self)
        return ms

    @cached_property
    def metrics(self) -> tuple[float, float]:
        return tile_metrics(self)

    # spatial queries
    def tiles_within(self, points, R: float, tol: float = 1e-9) -> list[np.ndarray]:
        """For each point, indices of tiles whose support is within distance R."""
        tree, lo, hi, owner, rmax = self._index
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cand = tree.query_ball_point(pts, R + rmax + tol)
        out = []
        for x, c in zip(pts, cand):
            if not c:
                out.append(np.zeros(0, dtype=np.int64))
                continue
            c = np.asarray(c)
            gap = np.maximum(lo[c] - x, 0) + np.maximum(x - hi[c], 0)
            dist = np.sqrt((gap ** 2).sum(1))
            out.append(np.unique(owner[c[dist <= R + tol]]))
        return out

    def tile_distances(self, points, R: float) -> list[tuple[np.ndarray, np.ndarray]]:
        """For each point, (tile indices, distances) of tiles within R."""
        tree, lo, hi, owner, rmax = self._index
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cand = tree.query_ball_point(pts, R + rmax)
        out = []
        for x, c in zip(pts, cand):
            if not c:
                out.append((np.zeros(0, dtype=np.int64), np.zeros(0)))
                continue
            c = np.asarray(c)
            gap = np.maximum(lo[c] - x, 0) + np.maximum(x - hi[c], 0)
            dist = np.sqrt((gap ** 2).sum(1))
            own = owner[c]
            order = np.lexsort((dist, own))
            own, dist = own[order], dist[order]
            first = np.concatenate([[True], own[1:] != own[:-1]])
            own, dist = own[first], dist[first]
            keep = dist <= R
            out.append((own[keep], dist[keep]))
        return out

    def locate(self, points, search: float | None = None, backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Tile containing each point and the point's clearance to every other tile.

        Returns (index, clearance); index is -1 when no tile or more than one
        tile contains the point (clearance then 0). Clearance is capped at
        ``search`` (default d_M).
        """
        search = self.metrics[0] if search is None else float(search)
        key = round(search, 12)
        if key not in self._box_index:
            lo, hi, owner = self.patch.flat_boxes
            self._box_index[key] = kernels.BoxIndex(lo, hi, owner, search)
        return self._box_index[key].locate(points, backend)

    def tiles_meeting(self, F: Region, tol: float = 1e-9) -> np.ndarray:
        """Indices of tiles whose support meets the closed set F."""
        tree, lo, hi, owner, rmax = self._index
        fb = F.boxes
        c = 0.5 * (fb[:, 0] + fb[:, 1])
        r = 0.5 * np.linalg.norm(fb[:, 1] - fb[:, 0], axis=1)
        hits = set()
        for cc, rr, box in zip(c, r, fb):
            cand = tree.query_ball_point(cc, rr + rmax + tol)
            if not cand:
                continue
            cand = np.asarray(cand)
            ok = np.all((lo[cand] <= box[1] + tol) & (box[0] <= hi[cand] + tol), axis=1)
            hits.update(owner[cand[ok]].tolist())
        return np.array(sorted(hits), dtype=np.int64)

    def ball_patch(self, x, R: float, tol: float = 1e-9) -> Patch:
        """The patch [N_R(x)] of tiles within distance R of x."""
        idx = self.tiles_within(np.atleast_2d(x), R, tol)[0]
        return self.patch.subset(idx)

    def __repr__(self) -> str:
        return f"TilingWindow(n={len(self)}, m={self.m}, center={self.center.tolist()}, radius={self.radius:.6g})"


def covering_radius(window: TilingWindow, samples: int = 2000, seed: int = 0) -> float:
    """Largest distance from sampled points of the valid ball to the nearest control point."""
    pts = window.patch.translations
    if pts.shape[0] == 0:
        return float("inf")
    rng = np.random.default_rng(seed)
    d = window.dimension
    u = rng.normal(size=(samples, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    rad = window.radius * rng.random(samples) ** (1.0 / d)
    x = window.center + u * rad[:, None]
    dd, _ = cKDTree(pts).query(x)
    return float(dd.max())


# ---------------------------------------------------------------------------
# operations


def patch_of(window: TilingWindow, F: Region, band: float | None = None) -> Patch:
    """[F]: tiles whose support meets F. Requires F inside the valid ball.

    Tiles within ``band`` (default one raster cell) of F but not meeting it
    are counted in ``patch.meta['band']``.
    """
    lo, hi = F.bounds()
    corners = F.corners()
    if not np.all(window.in_ball(corners)):
        raise OutOfWindow("region not inside the window's valid ball")
    idx = window.tiles_meeting(F)
    band = config.get_h() if band is None else band
    near = window.tiles_meeting(Region(F.boxes + np.array([-band, band])[None, :, None]))
    p = window.patch.subset(idx)
    p.meta["band"] = int(len(set(near.tolist()) - set(idx.tolist())))
    return p


def prototile_decomposition(tiles: list[Tile]) -> tuple[list[Region], DeloneMultiset, Patch]:
    """Split tiles given with absolute supports into prototiles and control points.

    Each label's representative is its tile with the least anchor; shapes are
    stored relative to the anchor (least box corner), so translations are
    anchors. Raises LabelGeometryMismatch if two same-label tiles are not translates.
    """
    if not tiles:
        raise PatchNotFound("empty patch")
    labels = sorted({t.label for t in tiles})
    relabel = {lab: i for i, lab in enumerate(labels)}
    shapes: dict[int, Region] = {}
    keys: dict[int, tuple] = {}
    trans = []
    labs = []
    for t in tiles:
        anchor = t.support.boxes[:, 0].min(0)
        rel = t.support.translate(-anchor)
        k = shape_key(rel)
        i = relabel[t.label]
        if i not in shapes:
            shapes[i] = Region(rel.boxes)
            keys[i] = k
        elif keys[i] != k:
            raise LabelGeometryMismatch(f"label {t.label!r} carries two non-congruent supports")
        trans.append(anchor)
        labs.append(i)
    protos = [shapes[i] for i in range(len(labels))]
    patch = Patch(labs, np.array(trans), protos, names=[str(x) for x in labels])
    pts = [patch.translations[patch.labels == i] for i in range(len(protos))]
    return protos, DeloneMultiset(pts), patch


def tile_metrics(window: TilingWindow) -> tuple[float, float]:
    """(d_M, eta): largest prototile diameter and smallest prototile inradius."""
    present = np.unique(window.patch.labels)
    diam = max(diameter(window.prototiles[i]) for i in present)
    eta = min(inscribed_ball(window.prototiles[i])[1] for i in present)
    return diam, eta


def patch_equivalent(P1: Patch, P2: Patch, tol: float | None = None) -> np.ndarray | None:
    """Vector g with P2 = P1 + g (labels, supports and marked tiles), or None."""
    tol = config.get().key_tol * 10 if tol is None else tol
    if len(P1) != len(P2) or len(P1) == 0:
        return None
    if sorted(P1.labels.tolist()) != sorted(P2.labels.tolist()):
        return None
    for lab in np.unique(P1.labels):
        if P1.prototiles is not P2.prototiles and shape_key(P1.prototiles[lab]) != shape_key(P2.prototiles[lab]):
            return None
    g = P2.translations[P2.anchor_index()] - P1.translations[P1.anchor_index()]
    a = P1.translate(g).sorted()
    b = P2.sorted()
    if not np.array_equal(a.labels, b.labels):
        return None
    if not np.allclose(a.translations, b.translations, atol=tol, rtol=0):
        return None
    if (P1.marked is None) != (P2.marked is None):
        return None
    if P1.marked is not None:
        if P1.labels[P1.marked] != P2.labels[P2.marked]:
            return None
        if not np.allclose(P1.translations[P1.marked] + g, P2.translations[P2.marked], atol=tol):
            return None
    return g


def find_occurrences(window: TilingWindow, P: Patch, tol: float | None = None) -> np.ndarray:
    """All g such that P + g is a sub-patch of the window (anchor alignment, then full check)."""
    tol = config.get().key_tol * 10 if tol is None else tol
    a = P.anchor_index()
    lab = P.labels[a]
    cands = window.patch.translations[window.patch.labels == lab] - P.translations[a]
    if cands.shape[0] == 0:
        return np.zeros((0, P.dimension))
    tree = cKDTree(window.patch.translations)
    ok = np.ones(cands.shape[0], dtype=bool)
    wl = window.patch.labels
    for lab_k, t_k in zip(P.labels, P.translations):
        pts = cands + t_k
        dd, ii = tree.query(pts, k=min(4, len(window)))
        dd = np.atleast_2d(dd.reshape(pts.shape[0], -1))
        ii = np.atleast_2d(ii.reshape(pts.shape[0], -1))
        hit = np.zeros(pts.shape[0], dtype=bool)
        for col in range(dd.shape[1]):
            valid = ii[:, col] < len(window)
            lab_ok = np.zeros_like(hit)
            lab_ok[valid] = wl[ii[valid, col]] == lab_k
            hit |= (dd[:, col] <= tol) & lab_ok
        ok &= hit
    return cands[ok]


@dataclass
class RepetitivityEstimate:
    lower: float
    upper: float
    degenerate: bool
    samples: int
    occurrences: int
    window_relative: bool = field(default=True)


def repetitivity_radius(window: TilingWindow, P: Patch, spacing: float | None = None,
                        max_samples: int = 20000) -> RepetitivityEstimate:
    """Window-relative estimate of the repetitivity radius R(P).

    For sampled x, R(x) is the radius of the smallest ball around x holding
    an occurrence of P. Only x whose certified ball fits inside the valid
    ball are used; the estimate is the max over those samples, bracketed by
    the sample spacing.
    """
    occ = find_occurrences(window, P)
    if occ.shape[0] == 0:
        raise PatchNotFound("patch does not occur in the window")
    corners = P.support().corners()
    d = window.dimension
    if spacing is None:
        spacing = max(window.radius / 200.0, config.get_h())
    x = _ball_grid(window.center, window.radius, spacing, max_samples)
    # farthest corner of each occurrence from each sample, min over occurrences
    best = np.full(x.shape[0], np.inf)
    for g in occ:
        c = corners + g
        far = np.sqrt(((x[:, None, :] - c[None]) ** 2).sum(-1)).max(1)
        best = np.minimum(best, far)
    fits = np.linalg.norm(x - window.center, axis=1) + best <= window.radius
    if not fits.any():
        return RepetitivityEstimate(window.radius, window.radius, True, 0, int(occ.shape[0]))
    r = float(best[fits].max())
    return RepetitivityEstimate(r, r + spacing * np.sqrt(d) / 2, False, int(fits.sum()), int(occ.shape[0]))


def _ball_grid(center, radius, spacing, max_samples):
    d = center.shape[0]
    n = int(np.ceil(2 * radius / spacing)) + 1
    if n ** d > max_samples:
        n = max(2, int(max_samples ** (1.0 / d)))
        spacing = 2 * radius / (n - 1)
    axes = [center[k] - radius + spacing * np.arange(n) for k in range(d)]
    g = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
    return g[np.linalg.norm(g - center, axis=1) <= radius]


def transform_window(M, window: TilingWindow) -> TilingWindow:
    """Image of the window under an invertible linear map (labels preserved)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    protos = [p.linear_map(M) for p in window.prototiles]
    patch = Patch(window.patch.labels, window.patch.translations @ M.T, protos,
                  window.patch.marked, window.names)
    smin = float(np.linalg.svd(M, compute_uv=False)[-1])
    return TilingWindow(patch, M @ window.center, window.radius * smin)


def window_from_patch(patch: Patch, center=None, radius: float | None = None,
                      margin: float = 1e-9) -> TilingWindow:
    """Wrap a patch; in 1D the valid ball defaults to the covered interval."""
    if center is None or radius is None:
        if patch.dimension != 1:
            raise ValueError("valid ball must be given for d > 1")
        lo, hi, _ = patch.flat_boxes
        a, b = float(lo.min()), float(hi.max())
        center = np.array([(a + b) / 2])
        radius = (b - a) / 2 - margin
    return TilingWindow(patch, center, radius)
