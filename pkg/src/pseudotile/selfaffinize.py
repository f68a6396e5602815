"""Collar recoding, reference points, the pseudo-substitution and digit extraction."""
from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import config
from .errors import (BoundaryTie, EmptyImage, InconsistentDigits, NoClearPoint, OutOfWindow,
                     TooManyLabels, WindowTooSmall)
from .report import FAIL, INCONCLUSIVE, PASS, VerificationReport, combine
from .substitution import DigitSystem
from .tiling import Patch, TilingWindow, canonical_keys


def choose_k(lam: float, eta: float, d_M: float) -> int:
    """Least k >= 1 with lam**k > 2 + d_M / eta."""
    if lam <= 1 or eta <= 0 or d_M <= 0:
        raise ValueError("need lam > 1, eta > 0, d_M > 0")
    threshold = 2.0 + d_M / eta
    k = max(1, math.ceil(math.log(threshold) / math.log(lam)))
    while lam ** k <= threshold:
        k += 1
    while k > 1 and lam ** (k - 1) > threshold:
        k -= 1
    return k


def collar_radius(R_ld: float, lam: float, d_M: float) -> float:
    """Infimum of admissible collar radii: R lam / (lam - 1)^2 + d_M / (lam - 1)."""
    if lam <= 1:
        raise ValueError("lam must exceed 1")
    return R_ld * lam / (lam - 1) ** 2 + d_M / (lam - 1)


def _label_hash(key) -> str:
    return hashlib.sha256(repr(key).encode()).hexdigest()[:8]


def collar_recode(window: TilingWindow, L: float, margin: float = 1e-9) -> TilingWindow:
    """Relabel every tile by the class of its marked collar [N_L(supp T)].

    The returned window keeps the supports, covers the ball shrunk by
    L + d_M, and names labels ``<old>.<hash>`` where the hash is taken over
    the collar's anchored form.
    """
    d_M = window.metrics[0]
    new_radius = window.radius - L - d_M - margin
    if new_radius <= 0:
        raise WindowTooSmall(f"valid radius {window.radius:.4g} too small for collar radius {L:.4g}")
    p = window.patch
    # tiles meeting the shrunk ball
    near = window.tiles_within(window.center, new_radius)[0]
    items = []
    for t in near:
        nbrs = _collar_members(window, t, L)
        rel = p.translations[nbrs] - p.translations[t]
        items.append((p.labels[nbrs], rel))
    keys = canonical_keys(items)
    full = [(int(p.labels[t]), k) for t, k in zip(near, keys)]
    classes = sorted(set(full), key=lambda c: (c[0], _label_hash(c[1])))
    if len(classes) > config.get().max_labels:
        raise TooManyLabels(f"{len(classes)} collared labels exceed the cap {config.get().max_labels}")
    index = {c: i for i, c in enumerate(classes)}
    labels = np.array([index[c] for c in full], dtype=np.int64)
    protos = [window.prototiles[c[0]] for c in classes]
    names = [f"{window.names[c[0]]}.{_label_hash(c[1])}" for c in classes]
    patch = Patch(labels, p.translations[near], protos, names=names).sorted()
    patch.meta["parent"] = [c[0] for c in classes]
    out = TilingWindow(patch, window.center, new_radius)
    out.collar = L
    return out


def _collar_members(window: TilingWindow, t: int, L: float) -> np.ndarray:
    """Tiles within distance L of the support of tile t (t included)."""
    p = window.patch
    support = window.prototiles[p.labels[t]].translate(p.translations[t])
    lo, hi = support.bounds()
    c = 0.5 * (lo + hi)
    reach = 0.5 * float(np.linalg.norm(hi - lo)) + L
    cand = window.tiles_within(c, reach)[0]
    keep = []
    sb = support.boxes
    for s in cand:
        ob = window.prototiles[p.labels[s]].boxes + p.translations[s]
        # box-box distance, min over pairs
        gap = np.maximum(ob[None, :, 0] - sb[:, None, 1], 0) + np.maximum(sb[:, None, 0] - ob[None, :, 1], 0)
        if np.sqrt((gap ** 2).sum(-1)).min() <= L + 1e-9:
            keep.append(s)
    return np.array(keep, dtype=np.int64)


# ---------------------------------------------------------------------------
# reference points


@dataclass
class ReferencePoints:
    points: np.ndarray  # (m, d), relative to each prototile's translation
    clearance: float
    per_label: np.ndarray
    certified_radius: float
    k: int


def _visible(window: TilingWindow, pts: np.ndarray, margin: float) -> np.ndarray:
    return np.linalg.norm(pts - window.center, axis=1) <= window.radius - margin


def _candidates(shape, spacing: float) -> np.ndarray:
    lo, hi = shape.bounds()
    d = lo.shape[0]
    n = np.maximum(np.ceil((hi - lo) / spacing).astype(int), 1)
    axes = [lo[a] + (np.arange(n[a]) + 0.5) * (hi[a] - lo[a]) / n[a] for a in range(d)]
    g = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
    return g[shape.contains(g)]


def choose_reference_points(window: TilingWindow, k: int, phi_k: np.ndarray, delta_min: float | None = None,
                            spacing: float | None = None, max_candidates: int | None = None,
                            chunk_points: int = 2_000_000) -> ReferencePoints:
    """Per prototile, the grid point of best clearance.

    Clearance of c for label i is the least of its distance to the
    prototile's boundary and, over every visible placement g, the distance
    from phi^-k (c + g) to the boundary of the tile containing it. The grid
    is deterministic; ties go to the first point in grid order.
    """
    h = config.get_h()
    delta_min = h if delta_min is None else delta_min
    d_M, eta = window.metrics
    inv = np.linalg.inv(np.atleast_2d(phi_k))
    lam_k = float(np.linalg.svd(np.atleast_2d(phi_k), compute_uv=False)[-1])
    p = window.patch
    m, d = window.m, window.dimension
    best_pts = np.zeros((m, d))
    best_clear = np.zeros(m)
    certified = np.inf
    if max_candidates is None:
        max_candidates = 2048 if d == 1 else 512
    for i in range(m):
        shape = window.prototiles[i]
        sp = spacing or h
        lo, hi = shape.bounds()
        vol = float(np.prod(hi - lo))
        if vol / sp ** d > max_candidates:
            sp = (vol / max_candidates) ** (1.0 / d)
        cand = _candidates(shape, sp)
        occ = p.translations[p.labels == i]
        # own clearance: place at a fully visible occurrence
        own_ok = _visible(window, occ, d_M)
        if not own_ok.any():
            raise WindowTooSmall(f"no fully visible placement of label {window.names[i]}")
        g0 = occ[own_ok][0]
        idx0, own_clear = window.locate(cand + g0)
        own_clear = np.where(idx0 >= 0, own_clear, 0.0)
        # scaled placements: need phi^-k (c + g) well inside the window
        scaled = occ @ inv.T
        vis = _visible(window, scaled, d_M / lam_k + d_M)
        g_vis = occ[vis]
        certified = min(certified, float(np.linalg.norm(g_vis - window.center, axis=1).max()) if vis.any() else 0.0)
        worst = own_clear.copy()
        per = max(1, chunk_points // max(1, g_vis.shape[0]))
        for s in range(0, cand.shape[0], per):
            c = cand[s:s + per]
            x = ((c[:, None, :] + g_vis[None]) @ inv.T).reshape(-1, d)
            idx, cl = window.locate(x)
            cl = np.where(idx >= 0, cl, 0.0).reshape(c.shape[0], -1)
            if cl.shape[1]:
                worst[s:s + per] = np.minimum(worst[s:s + per], cl.min(1))
        b = int(np.argmax(worst))
        best_pts[i] = cand[b]
        best_clear[i] = worst[b]
        if worst[b] < delta_min:
            raise NoClearPoint(f"label {window.names[i]}: best clearance {worst[b]:.3g} < {delta_min:.3g}")
        if worst[b] <= 2 * h:
            warnings.warn(f"label {window.names[i]}: clearance {worst[b]:.3g} within two raster cells",
                          BoundaryTie, stacklevel=2)
    return ReferencePoints(best_pts, float(best_clear.min()), best_clear, certified, k)


# ---------------------------------------------------------------------------
# pseudo-substitution


@dataclass
class PseudoSubstitution:
    k: int
    phi: np.ndarray  # phi^k
    refs: ReferencePoints
    window: TilingWindow
    qualifying: np.ndarray  # tile indices T whose expanded support lies in the window
    members: dict = field(default_factory=dict)  # T index -> indices S with phi^-k S in f(T)
    clearance: np.ndarray = field(default=None)  # per S, clearance of phi^-k c(S)
    owner: np.ndarray = field(default=None)  # per S, containing tile or -1

    def image(self, t: int) -> np.ndarray:
        if t not in self.members:
            raise OutOfWindow(f"tile {t} does not have a complete image in the window")
        return self.members[t]

    def expand(self, tiles, n: int = 1) -> np.ndarray:
        """Tile indices of (phi^k f)^n applied to the given tiles."""
        cur = np.asarray(tiles, dtype=np.int64)
        for _ in range(n):
            cur = np.unique(np.concatenate([self.image(int(t)) for t in cur])) if cur.size else cur
        return cur


def build_pseudo_substitution(window: TilingWindow, k: int, refs: ReferencePoints,
                              phi_k: np.ndarray) -> PseudoSubstitution:
    """Assign each tile S to the tile T containing phi^-k c(S); keep the T whose image is complete."""
    phi_k = np.atleast_2d(np.asarray(phi_k, dtype=float))
    inv = np.linalg.inv(phi_k)
    p = window.patch
    c = p.translations + refs.points[p.labels]
    x = c @ inv.T
    owner, clear = window.locate(x)
    h = config.get_h()
    ties = int(np.sum((owner >= 0) & (clear <= h)))
    if ties:
        warnings.warn(f"{ties} scaled reference points within one raster cell of a boundary",
                      BoundaryTie, stacklevel=2)
    # T qualifies if phi^k supp(T) lies inside the valid ball
    qual = []
    for t in range(len(p)):
        corners = window.prototiles[p.labels[t]].corners() + p.translations[t]
        if np.all(window.in_ball(corners @ phi_k.T)):
            qual.append(t)
    qual = np.array(qual, dtype=np.int64)
    members = {}
    order = np.argsort(owner, kind="stable")
    so = owner[order]
    for t in qual:
        a, b = np.searchsorted(so, [t, t + 1])
        members[int(t)] = np.sort(order[a:b])
        if b == a:
            raise EmptyImage(f"f(T) empty for tile {t} ({window.names[p.labels[t]]}); k too small?")
    return PseudoSubstitution(k, phi_k, refs, window, qual, members, clear, owner)


def _image_key_items(ps: PseudoSubstitution, tiles):
    p = ps.window.patch
    items = []
    for t in tiles:
        S = ps.members[int(t)]
        items.append((p.labels[S], p.translations[S] - p.translations[t] @ ps.phi.T))
    return items


def verify_S1_S4(ps: PseudoSubstitution, window: TilingWindow | None = None,
                 samples_per_tile: int = 5) -> VerificationReport:
    """Check equivariance, tiling, intersection and inclusion properties on the window."""
    window = window or ps.window
    p = window.patch
    inv = np.linalg.inv(ps.phi)
    qual = ps.qualifying
    # (S1): all same-label tiles carry the same anchored image
    items = _image_key_items(ps, qual)
    keys = canonical_keys(items)
    wit1 = []
    first = {}
    for t, key in zip(qual, keys):
        lab = int(p.labels[t])
        if lab not in first:
            first[lab] = (t, key)
        elif first[lab][1] != key:
            wit1.append({"property": "S1", "tiles": [int(first[lab][0]), int(t)], "label": lab,
                         "translations": [p.translations[first[lab][0]], p.translations[t]]})
    r1 = VerificationReport("S1", FAIL if wit1 else PASS,
                            {"tiles": len(qual), "classes": len(set(keys))}, wit1[:10],
                            anchor="image commutes with translation")
    # (S2): every scaled tile with its reference point in the checked zone
    # belongs to exactly one image
    qual_set = set(qual.tolist())
    zone = [S for S in range(len(p)) if ps.owner[S] in qual_set]
    inner_r = window.radius - window.metrics[0]
    c_scaled = (p.translations + ps.refs.points[p.labels]) @ inv.T
    probe = np.nonzero(np.linalg.norm(c_scaled - window.center, axis=1) <= inner_r)[0]
    wit2 = []
    for S in probe[ps.owner[probe] < 0]:
        wit2.append({"property": "S2", "tile": int(S), "point": c_scaled[S], "owner": -1})
    # coverage: the scaled supports of the zone tiles fill the union of qualifying supports
    vol_img = sum(window.prototiles[p.labels[S]].volume for S in zone) * abs(np.linalg.det(inv))
    vol_dom = sum(window.prototiles[p.labels[t]].volume for t in qual)
    r2 = VerificationReport("S2", FAIL if wit2 else PASS,
                            {"assigned": len(zone), "image_volume": vol_img, "domain_volume": vol_dom,
                             "min_clearance": float(ps.clearance[probe].min()) if probe.size else float("nan")},
                            wit2[:10], anchor="images tile space")
    # (S3) each member meets its tile; (S4) scaled tiles inside int supp T are members
    wit3, wit4 = [], []
    for t in qual:
        T = window.prototiles[p.labels[t]].translate(p.translations[t])
        for S in ps.members[int(t)]:
            pts = _sample_support(window, S, samples_per_tile) @ inv.T
            if not np.any(T.contains(pts, 1e-9)):
                wit3.append({"property": "S3", "tile": int(t), "member": int(S)})
    lo, hi, owner = p.flat_boxes
    for t in qual:
        T = window.prototiles[p.labels[t]].translate(p.translations[t])
        tl, th = T.bounds()
        mem = set(ps.members[int(t)].tolist())
        # candidates: tiles whose scaled translation lies near T
        cand = window.tiles_meeting(T.linear_map(ps.phi)) if window.dimension == 1 else \
            window.tiles_within((0.5 * (tl + th)) @ ps.phi.T, 0.5 * np.linalg.norm(th - tl) * np.linalg.norm(ps.phi, 2))[0]
        for S in cand:
            if S in mem:
                continue
            pts = _sample_support(window, S, samples_per_tile) @ inv.T
            d = T.distance(pts)
            inside = np.all(d <= 0)
            if inside and _strictly_inside(window, t, pts):
                wit4.append({"property": "S4", "tile": int(t), "nonmember": int(S)})
    r3 = VerificationReport("S3", FAIL if wit3 else PASS, {"violations": len(wit3)}, wit3[:10],
                            anchor="members meet their tile")
    r4 = VerificationReport("S4", FAIL if wit4 else PASS, {"violations": len(wit4)}, wit4[:10],
                            anchor="interior scaled tiles are members")
    return combine("S1_S4", [r1, r2, r3, r4], anchor="pseudo-substitution properties")


def _sample_support(window: TilingWindow, S: int, n: int) -> np.ndarray:
    p = window.patch
    b = window.prototiles[p.labels[S]].boxes + p.translations[S]
    d = window.dimension
    t = (np.arange(n) + 0.5) / n
    grids = np.stack(np.meshgrid(*([t] * d), indexing="ij"), -1).reshape(-1, d)
    pts = (b[:, None, 0] + grids[None] * (b[:, None, 1] - b[:, None, 0])).reshape(-1, d)
    return np.concatenate([pts, window.prototiles[p.labels[S]].corners() + p.translations[S]])


def _strictly_inside(window: TilingWindow, t: int, pts: np.ndarray) -> bool:
    idx, cl = window.locate(pts)
    return bool(np.all(idx == t) and np.all(cl > 1e-9))


def recheck_S1_witness(ps: PseudoSubstitution, w: dict) -> bool:
    """Recompute both images from raw point location and confirm they differ as anchored patches."""
    window = ps.window
    p = window.patch
    inv = np.linalg.inv(ps.phi)
    a, b = w["tiles"]
    if p.labels[a] != p.labels[b]:
        return False
    x = (p.translations + ps.refs.points[p.labels]) @ inv.T
    imgs = []
    for t in (a, b):
        T = window.prototiles[p.labels[t]].translate(p.translations[t])
        inside = T.distance(x) <= 0
        S = np.nonzero(inside)[0]
        imgs.append(sorted(zip(p.labels[S].tolist(),
                               np.round(p.translations[S] - p.translations[t] @ ps.phi.T, 6).ravel().tolist())))
    return imgs[0] != imgs[1]


def extract_digits(ps: PseudoSubstitution, window: TilingWindow | None = None) -> DigitSystem:
    """D_ij = {t_S - phi^k g : S a type-i member of f(T), T the type-j tile at g}."""
    window = window or ps.window
    p = window.patch
    m, d = window.m, window.dimension
    items = _image_key_items(ps, ps.qualifying)
    keys = canonical_keys(items)
    chosen: dict[int, tuple] = {}
    for t, item, key in zip(ps.qualifying, items, keys):
        j = int(p.labels[t])
        if j in chosen and chosen[j][1] != key:
            raise InconsistentDigits(f"label {window.names[j]} has two different images")
        chosen.setdefault(j, (item, key))
    missing = [window.names[j] for j in range(m) if j not in chosen]
    if missing:
        raise WindowTooSmall(f"no tile with a complete image for labels {missing}")
    digits = [[np.zeros((0, d)) for _ in range(m)] for _ in range(m)]
    for j, ((labels, rel), key) in chosen.items():
        # use the snapped offsets from the key so digits are canonical
        arr = np.array([o for _, o in key], dtype=float).reshape(-1, d)
        lab = np.array([lab for lab, _ in key], dtype=np.int64)
        for i in range(m):
            digits[i][j] = arr[lab == i]
    return DigitSystem(ps.phi, digits, k=ps.k, names=list(window.names))
