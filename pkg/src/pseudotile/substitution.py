"""Digit systems, substitution matrices, the multiset map and patch expansion.

Conventions: ``digits[i][j]`` is the (n, d) array of translations placing
type-i prototiles inside the expanded type-j prototile, so a type-j tile at
``x`` expands to type-i tiles at ``phi @ x + d`` for ``d`` in ``digits[i][j]``.
"""
from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import config
from .errors import DuplicateCollision, UnknownLabel
from .report import FAIL, INCONCLUSIVE, PASS, VerificationReport
from .tiling import Patch, TilingWindow, snap


@dataclass(eq=False)
class DigitSystem:
    phi: np.ndarray  # the full expansion phi^k
    digits: list  # digits[i][j] -> (n, d) array
    k: int = 1
    names: list = field(default_factory=list)

    def __post_init__(self):
        self.phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        d = self.phi.shape[0]
        self.digits = [[np.asarray(D, dtype=float).reshape(-1, d) for D in row] for row in self.digits]
        if not self.names:
            self.names = [str(i) for i in range(self.m)]

    @property
    def m(self) -> int:
        return len(self.digits)

    @property
    def dimension(self) -> int:
        return self.phi.shape[0]

    @property
    def lam(self) -> float:
        """Smallest singular value of the expansion (per-application contraction is 1/lam)."""
        return float(np.linalg.svd(self.phi, compute_uv=False)[-1])

    @property
    def det(self) -> float:
        return float(abs(np.linalg.det(self.phi)))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.round(self.phi, 9).tobytes())
        for row in self.digits:
            for D in row:
                h.update(np.round(np.sort(snap(D), axis=0), 9).tobytes() + b"|")
        return h.hexdigest()[:16]

    def column_sums(self) -> np.ndarray:
        return substitution_matrix(self).sum(0)


def substitution_matrix(D: DigitSystem) -> np.ndarray:
    """S with S[i, j] = |D_ij|."""
    return np.array([[D.digits[i][j].shape[0] for j in range(D.m)] for i in range(D.m)], dtype=np.int64)


def is_primitive(S, max_power: int = 64) -> int | None:
    """Least power with all entries positive, or None if none up to ``max_power``."""
    B = (np.asarray(S) > 0).astype(np.int64)
    P = B.copy()
    for ell in range(1, max_power + 1):
        if np.all(P > 0):
            return ell
        P = np.minimum(P @ B, 1)
    return None


# ---------------------------------------------------------------------------
# point-set helpers


def unique_points(points: np.ndarray, tol: float | None = None) -> tuple[np.ndarray, int]:
    """Merge points closer than tol per coordinate; returns (sorted unique points, merged count)."""
    p = np.asarray(points, dtype=float)
    if p.shape[0] == 0:
        return p, 0
    _, idx = np.unique(np.round(snap(p, tol), 9), axis=0, return_index=True)
    return p[idx], p.shape[0] - idx.shape[0]


def same_points(A: np.ndarray, B: np.ndarray, tol: float = 1e-7) -> bool:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[0] != B.shape[0]:
        return False
    if A.shape[0] == 0:
        return True
    return bool(np.all(cKDTree(B).query(A)[0] <= tol) and np.all(cKDTree(A).query(B)[0] <= tol))


def contains_points(big: np.ndarray, small: np.ndarray, tol: float = 1e-7) -> np.ndarray:
    """Mask over ``small``: which of its points occur in ``big``."""
    if small.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    if big.shape[0] == 0:
        return np.zeros(small.shape[0], dtype=bool)
    return cKDTree(big).query(small)[0] <= tol


# ---------------------------------------------------------------------------
# clusters and the multiset map


@dataclass(eq=False)
class Cluster:
    points: list  # per-label (n_i, d) arrays

    @property
    def m(self) -> int:
        return len(self.points)

    @property
    def dimension(self) -> int:
        return self.points[0].shape[1]

    def size(self) -> int:
        return int(sum(p.shape[0] for p in self.points))

    def translate(self, g) -> "Cluster":
        return Cluster([p + np.asarray(g, dtype=float) for p in self.points])

    def equals(self, other: "Cluster", tol: float = 1e-7) -> bool:
        return self.m == other.m and all(same_points(a, b, tol) for a, b in zip(self.points, other.points))

    def within(self, other: "Cluster", tol: float = 1e-7) -> bool:
        """True if every point of self lies in the matching slot of other."""
        return all(contains_points(b, a, tol).all() for a, b in zip(self.points, other.points))

    @classmethod
    def unit(cls, j: int, m: int, d: int) -> "Cluster":
        """e^(j): the origin in slot j, empty elsewhere."""
        return cls([np.zeros((1 if i == j else 0, d)) for i in range(m)])


def apply_multiset_map(D: DigitSystem, X, warn: bool = True) -> list[np.ndarray]:
    """Y_i = union over j of (phi X_j + D_ij), duplicates merged."""
    X = X.points if isinstance(X, Cluster) else X
    d = D.dimension
    out = []
    merged_total = 0
    for i in range(D.m):
        parts = []
        for j in range(D.m):
            Xj = np.asarray(X[j], dtype=float).reshape(-1, d)
            Dij = D.digits[i][j]
            if Xj.shape[0] and Dij.shape[0]:
                parts.append(((Xj @ D.phi.T)[:, None, :] + Dij[None]).reshape(-1, d))
        if parts:
            pts, merged = unique_points(np.concatenate(parts))
            merged_total += merged
        else:
            pts = np.zeros((0, d))
        out.append(pts)
    if merged_total and warn:
        warnings.warn(f"{merged_total} coincident images merged", DuplicateCollision, stacklevel=2)
    return out


def iterate_unit(D: DigitSystem, j: int, ell: int) -> Cluster:
    """Phi^ell(e^(j))."""
    X = Cluster.unit(j, D.m, D.dimension).points
    for _ in range(ell):
        X = apply_multiset_map(D, X)
    return Cluster(X)


def expand_patch(D: DigitSystem, P: Patch, n: int = 1) -> Patch:
    """n-fold inflation: a type-j tile at x becomes type-i tiles at phi x + D_ij."""
    if len(P) and P.labels.max() >= D.m:
        raise UnknownLabel(f"label {int(P.labels.max())} outside the digit system's {D.m} labels")
    labels, trans = P.labels, P.translations
    for _ in range(n):
        new_l, new_t = [], []
        base = trans @ D.phi.T
        for j in range(D.m):
            sel = labels == j
            if not sel.any():
                continue
            for i in range(D.m):
                Dij = D.digits[i][j]
                if Dij.shape[0] == 0:
                    continue
                t = (base[sel][:, None, :] + Dij[None]).reshape(-1, D.dimension)
                new_l.append(np.full(t.shape[0], i, dtype=np.int64))
                new_t.append(t)
        if not new_l:
            labels, trans = np.zeros(0, dtype=np.int64), np.zeros((0, D.dimension))
            break
        labels, trans = np.concatenate(new_l), np.concatenate(new_t)
    return Patch(labels, trans, P.prototiles, names=P.names).sorted()


def cluster_of_patch(window: TilingWindow | None, P: Patch) -> Cluster:
    """Gamma(P): translations of the label-i tiles of P, per label."""
    m = window.m if window is not None else P.m
    return Cluster([P.translations[P.labels == i] for i in range(m)])


def patch_of_cluster(c: Cluster, prototiles, names=None) -> Patch:
    labels = np.concatenate([np.full(p.shape[0], i, dtype=np.int64) for i, p in enumerate(c.points)])
    trans = np.concatenate(c.points)
    return Patch(labels, trans, prototiles, names=names).sorted()


@dataclass
class LegalityWitness:
    j: int
    level: int
    offset: np.ndarray


def is_legal(c: Cluster, D: DigitSystem, max_level: int = 8, tol: float = 1e-7) -> LegalityWitness | None:
    """Search (j, level, offset) with c + offset inside Phi^level(e^(j)).

    Breadth-first in level, then j; offsets come from aligning the cluster's
    anchor point with same-label points of the candidate. None means no
    witness up to ``max_level`` (inconclusive, not a disproof).
    """
    if c.size() == 0:
        return LegalityWitness(0, 0, np.zeros(D.dimension))
    a_lab = next(i for i, p in enumerate(c.points) if p.shape[0])
    pts = c.points[a_lab]
    anchor = pts[np.lexsort(pts.T[::-1])[0]]
    levels = {j: Cluster.unit(j, D.m, D.dimension) for j in range(D.m)}
    for ell in range(max_level + 1):
        for j in range(D.m):
            X = levels[j]
            if X.size() >= c.size():
                for q in X.points[a_lab]:
                    off = q - anchor
                    if c.translate(off).within(X, tol):
                        return LegalityWitness(j, ell, off)
        levels = {j: Cluster(apply_multiset_map(D, levels[j].points, warn=False)) for j in range(D.m)}
    return None


def recheck_legality(c: Cluster, D: DigitSystem, w: LegalityWitness, tol: float = 1e-7) -> bool:
    """Independent recomputation of Phi^level(e^(j)) and containment of c + offset."""
    X = iterate_unit(D, w.j, w.level)
    return c.translate(w.offset).within(X, tol)


# ---------------------------------------------------------------------------
# fixed-point identity on a window


def verify_fixed_point(D: DigitSystem, window: TilingWindow, margin: float | None = None,
                       tol: float | None = None) -> VerificationReport:
    """Check that Lambda_i is the disjoint union of phi Lambda_j + D_ij inside the window.

    A control point x of type i inside the eroded ball is checked for
    exactly one representation x = phi g + d with g in Lambda_j, d in D_ij;
    points whose possible preimages fall outside the window are skipped.
    Images landing inside the eroded ball must be control points.
    """
    tol = 10 * config.get().key_tol if tol is None else tol
    if D.m != window.m:
        raise UnknownLabel(f"digit system has {D.m} labels, window has {window.m}")
    d_M = window.metrics[0]
    if margin is None:
        margin = d_M / D.lam + d_M
    inv = np.linalg.inv(D.phi)
    Lam = [window.patch.translations[window.patch.labels == i] for i in range(D.m)]
    dmax = max((np.linalg.norm(Dij, axis=1).max() for row in D.digits for Dij in row if Dij.shape[0]),
               default=0.0)
    pre_pad = (dmax + tol) / D.lam
    inner = window.radius - margin

    def pre_ok(x):
        # every preimage phi^-1 (x - d) lies well inside the window ball
        return np.linalg.norm(inv @ x - window.center) + pre_pad <= window.radius - d_M

    witnesses = []
    checked = 0
    images = [[] for _ in range(D.m)]
    for j in range(D.m):
        if Lam[j].shape[0] == 0:
            continue
        base = Lam[j] @ D.phi.T
        for i in range(D.m):
            for dvec in D.digits[i][j]:
                images[i].append((base + dvec, j, Lam[j], dvec))
    for i in range(D.m):
        allimg = np.concatenate([im[0] for im in images[i]]) if images[i] else np.zeros((0, D.dimension))
        src = [(j, g, dv) for im, j, L, dv in images[i] for g in L]
        tree_img = cKDTree(allimg) if allimg.shape[0] else None
        inside = np.linalg.norm(Lam[i] - window.center, axis=1) <= inner
        for x in Lam[i][inside]:
            if not pre_ok(x):
                continue
            checked += 1
            hits = tree_img.query_ball_point(x, tol) if tree_img is not None else []
            if len(hits) != 1:
                kind = "missing" if not hits else "duplicate"
                witnesses.append({"kind": kind, "label": i, "point": x,
                                  "sources": [(src[h][0], src[h][1], src[h][2]) for h in hits]})
        # extra images
        if allimg.shape[0]:
            ins = np.linalg.norm(allimg - window.center, axis=1) <= inner
            have = contains_points(Lam[i], allimg[ins], tol)
            for h in np.nonzero(ins)[0][~have]:
                witnesses.append({"kind": "extra", "label": i, "point": allimg[h],
                                  "sources": [(src[h][0], src[h][1], src[h][2])]})
    status = PASS if not witnesses else FAIL
    if not witnesses and checked == 0:
        status = INCONCLUSIVE
    witnesses.sort(key=lambda w: float(np.linalg.norm(w["point"])))
    return VerificationReport("fixed_point", status,
                              {"checked_points": checked, "violations": len(witnesses), "margin": margin},
                              witnesses[:20], anchor="control points are the disjoint union of expanded control points plus digits")


def recheck_fixed_point_witness(D: DigitSystem, window: TilingWindow, w: dict, tol: float = 1e-6) -> bool:
    """Re-derive a fixed-point witness by brute force over all (j, g, d)."""
    x = np.asarray(w["point"], dtype=float)
    i = w["label"]
    reps = 0
    for j in range(D.m):
        Lj = window.patch.translations[window.patch.labels == j]
        for dvec in D.digits[i][j]:
            reps += int(np.sum(np.linalg.norm(Lj @ D.phi.T + dvec - x, axis=1) <= tol))
    Li = window.patch.translations[window.patch.labels == i]
    is_ctrl = bool(np.any(np.linalg.norm(Li - x, axis=1) <= tol))
    if w["kind"] == "missing":
        return is_ctrl and reps == 0
    if w["kind"] == "duplicate":
        return is_ctrl and reps > 1
    if w["kind"] == "extra":
        return (not is_ctrl) and reps >= 1
    return False


def volume_identity(D: DigitSystem, volumes) -> np.ndarray:
    """Residuals |det phi| vol(F_j) - sum_i S(i,j) vol(F_i), one per j."""
    v = np.asarray(volumes, dtype=float)
    S = substitution_matrix(D)
    return D.det * v - S.T @ v
