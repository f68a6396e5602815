"""Local derivability checks on finite windows, and the radius arithmetic around them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import config
from .errors import NoPassingRadius, WindowTooSmall
from .report import FAIL, INCONCLUSIVE, PASS
from .tiling import TilingWindow, canonical_keys


@dataclass
class LDReport:
    status: str
    radius: float
    spacing: float
    samples: int = 0
    buckets: int = 0
    compared: int = 0
    skipped: int = 0
    unconfirmed: int = 0
    witness: dict | None = None
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        from .report import _plain
        return _plain(self.__dict__)


def compose_ld_radius(R1: float, R2: float) -> float:
    """Radius of the composite derivation T1 -> T2 -> T3."""
    return R1 + R2


def scaled_ld_radii(R: float, lam: float, ell: int) -> tuple[float, float]:
    """(R lam^(-ell-1), R / (lam - 1)): one rescaled step, and the geometric total over all steps."""
    if lam <= 1 or ell < 0:
        raise ValueError("need lam > 1 and ell >= 0")
    return R * lam ** (-ell - 1), R / (lam - 1)


# ---------------------------------------------------------------------------
# sampling


def _sample_points(W1: TilingWindow, W2: TilingWindow, R: float, spacing: float,
                   max_samples: int) -> np.ndarray:
    d = W1.dimension
    r1 = W1.radius - R
    if r1 <= 0 or W2.radius <= 0:
        raise WindowTooSmall(f"valid radius {W1.radius:.4g} does not exceed R = {R:.4g}")
    c = W1.center
    n = int(np.ceil(2 * r1 / spacing)) + 1
    if n ** d > max_samples:
        n = int(max_samples ** (1.0 / d))
        spacing = 2 * r1 / max(n - 1, 1)
    axes = [c[a] - r1 + spacing * np.arange(n) for a in range(d)]
    g = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
    # tile centers of both windows as extra samples
    extra = []
    for W in (W1, W2):
        lo, hi, owner = W.patch.flat_boxes
        extra.append(0.5 * (lo + hi))
    g = np.concatenate([g] + extra)
    ok = (np.linalg.norm(g - c, axis=1) <= r1) & (np.linalg.norm(g - W2.center, axis=1) <= W2.radius)
    if not ok.any():
        raise WindowTooSmall("no sample point lies in both valid balls")
    return g[ok]


def _neighbor_sets(W: TilingWindow, pts: np.ndarray, R: float) -> tuple[list[tuple], np.ndarray]:
    """Distinct tile sets within distance R of the points, and each point's set index."""
    if W.dimension == 1:
        lo, hi, owner = W.patch.flat_boxes
        order = np.argsort(lo[:, 0], kind="stable")
        slo, shi, sown = lo[order, 0], hi[order, 0], owner[order]
        x = pts[:, 0]
        # interiors are disjoint, so sorting by left end sorts the right ends too
        i0 = np.searchsorted(shi, x - R - 1e-12, side="left")
        i1 = np.searchsorted(slo, x + R + 1e-12, side="right")
        pairs, inv = np.unique(np.stack([i0, i1], 1), axis=0, return_inverse=True)
        sets = [tuple(sorted(set(sown[a:b].tolist()))) for a, b in pairs]
    else:
        sig = _set_signatures(W, pts, R)
        _, rep, inv = np.unique(sig, return_index=True, return_inverse=True)
        # exact tile sets for one representative per signature
        sets = [tuple(t.tolist()) for t in W.tiles_within(pts[rep], R)]
    # distinct index ranges can still hold the same tiles; merge them
    uniq = sorted(set(sets))
    pos = {t: i for i, t in enumerate(uniq)}
    remap = np.array([pos[t] for t in sets], dtype=np.int64)
    return uniq, remap[np.asarray(inv).reshape(-1)]


def _set_signatures(W: TilingWindow, pts: np.ndarray, R: float, tol: float = 1e-9) -> np.ndarray:
    """XOR of random 64-bit tile weights over the tiles within R of each point.

    Equal tile sets give equal signatures; unequal sets collide with
    probability about 2^-64 per pair.
    """
    lo, hi, owner = W.patch.flat_boxes
    n = len(W.patch)
    weights = np.random.default_rng(0x5EED).integers(1, 2 ** 63 - 1, size=n, dtype=np.int64)
    sig = np.zeros(pts.shape[0], dtype=np.int64)
    # bucket the points on a coarse grid so each tile only visits nearby buckets
    cell = max(R, float(np.max(hi - lo)), 1e-9)
    base = pts.min(0)
    key = np.floor((pts - base) / cell).astype(np.int64)
    shape = key.max(0) + 1
    flat = np.ravel_multi_index(key.T, shape)
    order = np.argsort(flat, kind="stable")
    starts = np.searchsorted(flat[order], np.arange(int(np.prod(shape)) + 1))
    by_tile = np.argsort(owner, kind="stable")
    bounds = np.searchsorted(owner[by_tile], np.arange(n + 1))
    for t in range(n):
        bx = by_tile[bounds[t]:bounds[t + 1]]
        if bx.size == 0:
            continue
        tlo, thi = lo[bx].min(0) - R - tol, hi[bx].max(0) + R + tol
        klo = np.clip(np.floor((tlo - base) / cell).astype(np.int64), 0, shape - 1)
        khi = np.clip(np.floor((thi - base) / cell).astype(np.int64), 0, shape - 1)
        if np.any(thi < base) or np.any(tlo > base + shape * cell):
            continue
        cells = np.stack(np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(klo, khi)], indexing="ij"), -1)
        cid = np.ravel_multi_index(cells.reshape(-1, len(shape)).T, shape)
        idx = np.concatenate([order[starts[c]:starts[c + 1]] for c in cid])
        if idx.size == 0:
            continue
        x = pts[idx]
        gap = np.maximum(lo[bx][None] - x[:, None], 0) + np.maximum(x[:, None] - hi[bx][None], 0)
        dist = np.sqrt((gap ** 2).sum(2)).min(1)
        hit = idx[dist <= R + tol]
        sig[hit] ^= weights[t]
    return sig


def _anchor(W: TilingWindow, tiles: tuple) -> int:
    labels = W.patch.labels[list(tiles)]
    tr = W.patch.translations[list(tiles)]
    sel = np.nonzero(labels == labels.min())[0]
    keys = [np.round(tr[sel, k], 9) for k in range(tr.shape[1] - 1, -1, -1)]
    return tiles[sel[np.lexsort(keys)[0]]]


def check_ld(W1: TilingWindow, W2: TilingWindow, R: float, spacing: float | None = None,
             max_samples: int = 2_000_000, tol: float = 1e-6) -> LDReport:
    """Sampled check that the radius-R patch of W1 around x fixes the W2 tile at x.

    Samples are bucketed by the anchored class of [N_R(x)] in W1 and by
    x - anchor quantized to the raster cell; inside a bucket the W2 tile at
    x, relative to the anchor, must agree. Samples within two cells of a
    W2 boundary are skipped. Each disagreement is re-derived from scratch
    before it is reported as a witness.
    """
    h = config.get_h()
    spacing = spacing or h
    pts = _sample_points(W1, W2, R, spacing, max_samples)
    uniq, sid = _neighbor_sets(W1, pts, R)
    anchors = np.array([_anchor(W1, t) if t else -1 for t in uniq])
    p1 = W1.patch
    items = [(p1.labels[list(t)], p1.translations[list(t)] - p1.translations[a]) for t, a in zip(uniq, anchors)]
    keys = canonical_keys(items)
    key_id = np.unique(np.array([hash(k) for k in keys]), return_inverse=True)[1]
    owner2, clear2 = W2.locate(pts)
    a_t = p1.translations[anchors[sid]]
    q = np.floor((pts - a_t) / h).astype(np.int64)
    usable = (owner2 >= 0) & (clear2 > 2 * h) & (anchors[sid] >= 0)
    p2 = W2.patch
    rel2 = p2.translations[np.maximum(owner2, 0)] - a_t
    lab2 = p2.labels[np.maximum(owner2, 0)]
    use = np.nonzero(usable)[0]
    rows = np.concatenate([key_id[sid[use]][:, None], q[use]], axis=1)
    _, first, bucket = np.unique(rows, axis=0, return_index=True, return_inverse=True)
    bucket = bucket.reshape(-1)
    ref = use[first[bucket]]
    bad = (lab2[use] != lab2[ref]) | np.any(np.abs(rel2[use] - rel2[ref]) > tol, axis=1)
    compared = int(use.shape[0] - first.shape[0])
    unconfirmed = 0
    witness = None
    for n, f in zip(use[bad], ref[bad]):
        # align y so that its offset to the anchor equals x's exactly
        x = pts[f]
        y = pts[n] + (pts[f] - a_t[f]) - (pts[n] - a_t[n])
        w = {"x": x, "y": y, "radius": R}
        if recheck_ld_witness(W1, W2, w, tol):
            witness = _describe(W1, W2, w)
            break
        unconfirmed += 1
        if unconfirmed >= 50:
            break
    status = FAIL if witness is not None else (INCONCLUSIVE if unconfirmed else PASS)
    notes = [f"finite-window certificate: sampled at spacing {spacing:.3g}; offsets quantized at {h:.3g}"]
    return LDReport(status, R, spacing, int(pts.shape[0]), int(first.shape[0]), compared,
                    int((~usable).sum()), unconfirmed, witness, notes)


def check_mld(W1: TilingWindow, W2: TilingWindow, R1: float, R2: float,
              spacing: float | None = None, **kw) -> tuple[LDReport, LDReport]:
    return check_ld(W1, W2, R1, spacing, **kw), check_ld(W2, W1, R2, spacing, **kw)


# ---------------------------------------------------------------------------
# witness re-verification, by brute force over every tile


def _brute_ball_patch(W: TilingWindow, x: np.ndarray, R: float) -> list[tuple[int, np.ndarray]]:
    p = W.patch
    out = []
    for t in range(len(p)):
        dist = W.prototiles[p.labels[t]].translate(p.translations[t]).distance(x[None])[0]
        if dist <= R + 1e-9:
            out.append((int(p.labels[t]), p.translations[t]))
    return out


def _same_patch(A, B, shift, tol) -> bool:
    if len(A) != len(B):
        return False
    used = [False] * len(B)
    for lab, t in A:
        for k, (lab2, t2) in enumerate(B):
            if not used[k] and lab == lab2 and np.all(np.abs(t - (t2 + shift)) <= tol):
                used[k] = True
                break
        else:
            return False
    return True


def recheck_ld_witness(W1: TilingWindow, W2: TilingWindow, w: dict, tol: float = 1e-6) -> bool:
    """Antecedent holds at (x, y) and the consequent fails, recomputed tile by tile."""
    x = np.asarray(w["x"], dtype=float)
    y = np.asarray(w["y"], dtype=float)
    R = float(w["radius"])
    A = _brute_ball_patch(W1, x, R)
    B = _brute_ball_patch(W1, y, R)
    if not A or not _same_patch(A, B, x - y, tol):
        return False
    return not _same_patch(_brute_ball_patch(W2, x, 0.0), _brute_ball_patch(W2, y, 0.0), x - y, tol)


def _describe(W1, W2, w) -> dict:
    x, y = w["x"], w["y"]
    tx = _brute_ball_patch(W2, x, 0.0)
    ty = _brute_ball_patch(W2, y, 0.0)
    return {"x": x, "y": y, "radius": w["radius"],
            "tiles_at_x": [(W2.names[l], t) for l, t in tx],
            "tiles_at_y": [(W2.names[l], t) for l, t in ty]}


def estimate_min_ld_radius(W1: TilingWindow, W2: TilingWindow, R_max: float, steps: int = 12,
                           spacing: float | None = None, **kw) -> tuple[float, float]:
    """Bisection bracket (R_pass, R_fail) for the least passing radius; window-relative."""
    if not check_ld(W1, W2, R_max, spacing, **kw).passed:
        raise NoPassingRadius(f"check fails at R_max = {R_max:.4g}")
    if check_ld(W1, W2, 0.0, spacing, **kw).passed:
        return 0.0, float("-inf")
    lo, hi = 0.0, R_max
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if check_ld(W1, W2, mid, spacing, **kw).passed:
            hi = mid
        else:
            lo = mid
    return hi, lo
