"""Locator sets, derived Voronoi tilings and the psi-finiteness probe."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import config
from .errors import DegenerateLocators, OriginOutside, PatchNotFound
from .geometry import Raster, Region
from .report import FAIL, PASS, VerificationReport
from .tiling import Patch, TilingWindow, canonical_keys, find_occurrences, repetitivity_radius


@dataclass
class LocatorSet:
    r: float
    base: Patch  # [N_r(0)]
    points: np.ndarray  # (n, d)
    scan_radius: float  # locators are complete inside N_scan(center)
    center: np.ndarray


@dataclass
class DerivedVoronoiTiling:
    r: float
    R_r: float
    locators: np.ndarray  # the labelled locators, sorted
    labels: np.ndarray
    cells: list  # Region per locator, in absolute coordinates
    window: TilingWindow  # cells as a tiling window (cell relative to its locator)
    label_keys: list = field(default_factory=list)
    shape_splits: int = 0
    R_estimate: object = None

    @property
    def n_labels(self) -> int:
        return int(np.unique(self.labels).shape[0])


def _patch_extent(P: Patch) -> float:
    return float(np.linalg.norm(P.support().corners(), axis=1).max())


def locator_set(window: TilingWindow, r: float) -> LocatorSet:
    """All q with [N_r(0)] + q a sub-patch of the window, kept where the scan is complete."""
    d = window.dimension
    origin = np.zeros(d)
    if np.linalg.norm(window.center) + r > window.radius:
        raise OriginOutside(f"N_{r:.4g}(0) is not inside the valid ball")
    base = window.ball_patch(origin, r)
    if len(base) == 0:
        raise OriginOutside("no tile within r of the origin")
    # an occurrence q is certainly found when base + q lies inside the valid ball
    scan = window.radius - _patch_extent(base)
    if scan <= 0:
        raise OriginOutside("window too small for the base patch")
    q = find_occurrences(window, base)
    q = q[np.linalg.norm(q - window.center, axis=1) <= scan]
    order = np.lexsort([q[:, k] for k in range(d - 1, -1, -1)])
    return LocatorSet(r, base, q[order], scan, window.center.copy())


def recheck_locator(window: TilingWindow, L: LocatorSet, q) -> bool:
    """The base patch, translated by q, is tile-for-tile present in the window."""
    q = np.asarray(q, dtype=float)
    shifted = L.base.translate(q)
    p = window.patch
    for lab, t in zip(shifted.labels, shifted.translations):
        hit = (p.labels == lab) & np.all(np.abs(p.translations - t) <= 1e-6, axis=1)
        if not hit.any():
            return False
    return True


def _voronoi_cells_1d(q: np.ndarray) -> tuple[np.ndarray, list]:
    """Interior locators (both neighbours known) and their exact midpoint cells."""
    x = q[:, 0]
    mids = 0.5 * (x[1:] + x[:-1])
    cells = [Region.interval(mids[i - 1], mids[i]) for i in range(1, x.shape[0] - 1)]
    return np.arange(1, x.shape[0] - 1), cells


def _voronoi_cells_raster(q: np.ndarray, center, radius, h) -> tuple[np.ndarray, list]:
    """Nearest-locator cells on a raster; keep locators whose cell stays away from the border."""
    d = q.shape[1]
    lo = np.asarray(center) - radius
    n = int(np.ceil(2 * radius / h))
    if n ** d > config.get().max_raster_cells:
        from .errors import RasterOverflow
        raise RasterOverflow(f"{n ** d} raster cells")
    idx = np.indices((n,) * d).reshape(d, -1).T
    pts = lo + (idx + 0.5) * h
    inside = np.linalg.norm(pts - center, axis=1) <= radius
    _, near = cKDTree(q).query(pts)
    near[~inside] = -1
    grid = near.reshape((n,) * d)
    # cells touching the outside of the ball (or the grid edge) are not certified
    out = np.pad(grid == -1, 1, constant_values=True)
    dil = out.copy()
    for ax in range(d):
        dil |= np.roll(out, 1, ax) | np.roll(out, -1, ax)
    dil = dil[tuple(slice(1, -1) for _ in range(d))]
    bad = set(np.unique(grid[dil & (grid >= 0)]).tolist())
    keep = [i for i in range(q.shape[0]) if i not in bad and np.any(grid == i)]
    cells = []
    for i in keep:
        occ = grid == i
        cells.append(Region.from_raster(Raster(lo.copy(), h, occ)).with_raster(h))
    return np.array(keep, dtype=np.int64), cells


def derived_voronoi(window: TilingWindow, r: float, label_radius: float | None = None,
                    h: float | None = None) -> DerivedVoronoiTiling:
    """Voronoi tiling of the locator set, labelled by the class of [N_{2R_r}(q)]."""
    h = h or config.get_h()
    L = locator_set(window, r)
    if L.points.shape[0] < 2:
        raise DegenerateLocators(f"{L.points.shape[0]} locator(s) for r = {r:.4g}")
    est = None
    if label_radius is None:
        try:
            est = repetitivity_radius(window, L.base)
        except PatchNotFound as exc:
            raise DegenerateLocators(str(exc)) from None
        label_radius = 2.0 * est.upper
    d = window.dimension
    if d == 1:
        keep, cells = _voronoi_cells_1d(L.points)
    else:
        keep, cells = _voronoi_cells_raster(L.points, L.center, L.scan_radius, h)
    q = L.points[keep]
    # labels need the whole collar inside the valid ball
    ok = np.linalg.norm(q - window.center, axis=1) + label_radius <= window.radius
    q = q[ok]
    cells = [c for c, k in zip(cells, ok) if k]
    if q.shape[0] < 2:
        raise DegenerateLocators("fewer than two labelled cells fit in the window")
    p = window.patch
    items = []
    for t_idx, qq in zip(window.tiles_within(q, label_radius), q):
        items.append((p.labels[t_idx], p.translations[t_idx] - qq))
    keys = canonical_keys(items)
    # cell shape relative to its locator joins the label, so one label has one shape
    shapes = canonical_keys([(np.zeros(len(c.boxes), dtype=np.int64), c.boxes[:, 0] - qq)
                             for c, qq in zip(cells, q)])
    ext = canonical_keys([(np.zeros(len(c.boxes), dtype=np.int64), c.boxes[:, 1] - qq)
                          for c, qq in zip(cells, q)])
    full = list(zip(keys, shapes, ext))
    classes = sorted(set(full), key=repr)
    index = {c: i for i, c in enumerate(classes)}
    labels = np.array([index[c] for c in full], dtype=np.int64)
    splits = len(classes) - len(set(keys))
    protos = []
    for c in classes:
        j = full.index(c)
        protos.append(cells[j].translate(-q[j]))
    patch = Patch(labels, q, protos, names=[f"v{i}" for i in range(len(classes))])
    spread = max(float(np.abs(pr.corners()).max()) for pr in protos) * np.sqrt(d)
    vr = float(np.linalg.norm(q - window.center, axis=1).max()) - spread
    tw = TilingWindow(patch, window.center, max(vr, 0.0))
    return DerivedVoronoiTiling(r, label_radius / 2.0, q, labels, cells, tw, [c[0] for c in classes], splits, est)


def same_up_to_labels(A: DerivedVoronoiTiling, B: DerivedVoronoiTiling, scale: np.ndarray,
                      radius: float, center, tol: float = 1e-6) -> tuple[bool, str]:
    """Is A = scale * B on N_radius(center), up to a bijection of label sets?"""
    scale = np.atleast_2d(scale)
    qa, la = A.locators, A.labels
    qb, lb = B.locators @ scale.T, B.labels
    ina = np.linalg.norm(qa - center, axis=1) <= radius
    inb = np.linalg.norm(qb - center, axis=1) <= radius
    qa, la, qb, lb = qa[ina], la[ina], qb[inb], lb[inb]
    if qa.shape[0] != qb.shape[0]:
        return False, f"{qa.shape[0]} vs {qb.shape[0]} locators"
    if qa.shape[0] == 0:
        return False, "no locators in the comparison ball"
    dist, nn = cKDTree(qb).query(qa)
    if dist.max() > tol * max(1.0, float(np.abs(scale).max())):
        return False, f"locators differ by {dist.max():.3g}"
    fwd, back = {}, {}
    for a, b in zip(la.tolist(), lb[nn].tolist()):
        if fwd.setdefault(a, b) != b or back.setdefault(b, a) != a:
            return False, "labels admit no bijection"
    return True, "match"


def _match(T: DerivedVoronoiTiling, B: DerivedVoronoiTiling, psi: np.ndarray, s: float, max_power: int,
           center, tol: float) -> tuple[int | None, list[str]]:
    """Least |e| with T = psi^e B on the common certified ball, or None."""
    why = []
    for e in sorted(range(-max_power, max_power + 1), key=lambda e: (abs(e), e)):
        scale = np.linalg.matrix_power(psi, e) if e >= 0 else np.linalg.matrix_power(np.linalg.inv(psi), -e)
        rad = min(T.window.radius, B.window.radius * s ** e)
        ok, msg = same_up_to_labels(T, B, scale, rad, center, tol)
        if ok:
            return e, why
        why.append(f"power {e}: {msg}")
    return None, why


def psi_finiteness_probe(window: TilingWindow, psi, r0: float, levels: int = 3, M: int = 3,
                         tol: float = 1e-6) -> VerificationReport:
    """Match the derived tilings at r0 s^j, j = 0..levels, against at most M base tilings.

    Level j matches a base when it equals psi^e times that base, for some
    integer e, on the common certified ball and up to a label bijection.
    Bases are taken greedily from the unmatched levels.
    """
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    sv = np.linalg.svd(psi, compute_uv=False)
    if not np.isclose(sv[0], sv[-1], rtol=1e-9) or sv[-1] <= 1:
        raise ValueError("psi must be an expanding similitude")
    s = float(sv[0])
    tilings, matches, notes = [], [], []
    bases: list[int] = []
    unmatched = None
    for j in range(levels + 1):
        r = r0 * s ** j
        try:
            T = derived_voronoi(window, r)
        except (DegenerateLocators, OriginOutside) as exc:
            unmatched = {"level": j, "r": r, "reason": f"{type(exc).__name__}: {exc}"}
            break
        tilings.append(T)
        hit, power = None, 0
        for b in bases:
            e, why = _match(T, tilings[b], psi, s, levels + 1, window.center, tol)
            if e is not None:
                hit, power = b, e
                break
            notes += [f"level {j} vs base {b}, {w}" for w in why]
        if hit is None:
            if len(bases) >= M:
                unmatched = {"level": j, "r": r, "reason": f"no match among {M} bases"}
                break
            bases.append(j)
            hit = j
        matches.append({"level": j, "r": r, "base": hit, "power": power, "labels": T.n_labels,
                        "cells": len(T.labels), "label_radius": 2 * T.R_r})
    metrics = {"levels_checked": len(matches), "bases": len(bases), "M": M, "ratio": s,
               "det_sign": float(np.sign(np.linalg.det(psi)))}
    cfg = {"matches": matches, "notes": notes, "base_levels": bases}
    anchor = "derived Voronoi family up to powers of psi"
    if unmatched is not None:
        return VerificationReport("psi_finiteness", FAIL, metrics, [unmatched], config=cfg, anchor=anchor)
    return VerificationReport("psi_finiteness", PASS, metrics, [], config=cfg, anchor=anchor)


def recheck_probe_witness(window: TilingWindow, psi, r0: float, report: VerificationReport,
                          tol: float = 1e-6) -> bool:
    """Recompute the unmatched level from scratch and test it against every base again."""
    w = report.witnesses[0]
    j = w["level"]
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    s = float(np.linalg.svd(psi, compute_uv=False)[0])
    try:
        T = derived_voronoi(window, r0 * s ** j)
    except (DegenerateLocators, OriginOutside):
        return True
    levels = report.metrics["levels_checked"]
    for b in report.config["base_levels"]:
        B = derived_voronoi(window, r0 * s ** b)
        if _match(T, B, psi, s, max(levels, j) + 1, window.center, tol)[0] is not None:
            return False
    return True
