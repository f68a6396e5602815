"""Solving the adjoint set equations phi F_j = U_i (F_i + D_ij) and checking the result."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import config, kernels
from .errors import IndexMismatch, MaxIterExceeded, RasterOverflow
from .geometry import Raster, Region, hausdorff_distance, merge_intervals
from .report import FAIL, PASS, VerificationReport, combine
from .substitution import DigitSystem, is_primitive, substitution_matrix
from .tiling import DeloneMultiset, Patch, TilingWindow


@dataclass
class PrototileSolution:
    F: list
    hausdorff_error: float
    iterations: int
    contraction: float
    mode: str = "exact"
    h: float = 0.0
    steps: list = field(default_factory=list)
    names: list = field(default_factory=list)
    digest: str = ""

    @property
    def m(self) -> int:
        return len(self.F)

    def volumes(self) -> np.ndarray:
        return np.array([f.volume for f in self.F])


def invariant_radius(D: DigitSystem) -> float:
    """Radius R of a ball about 0 mapped into itself by every branch: R = max|d| / (lam - 1)."""
    dmax = max((np.linalg.norm(x, axis=1).max() for row in D.digits for x in row if x.shape[0]), default=0.0)
    return dmax / (D.lam - 1.0)


def iteration_bound(tol: float, diam0: float, contraction: float) -> int:
    """ceil(log(tol (1 - c) / diam0) / log c): iterations after which the step is below tol (1 - c)."""
    if diam0 <= 0:
        return 0
    return max(0, math.ceil(math.log(tol * (1 - contraction) / diam0) / math.log(contraction)))


def _step_exact(D: DigitSystem, K: list[np.ndarray]) -> list[np.ndarray]:
    s = 1.0 / D.phi[0, 0]
    out = []
    for j in range(D.m):
        parts = [K[i][:, None, :] + D.digits[i][j][None, :, None, 0] for i in range(D.m)
                 if D.digits[i][j].shape[0] and K[i].shape[0]]
        iv = np.concatenate([p.reshape(-1, 2) for p in parts]) * s
        iv = np.sort(iv, axis=1)
        out.append(merge_intervals(iv[:, :, None])[:, :, 0])
    return out


def _hd_intervals(a: np.ndarray, b: np.ndarray) -> float:
    return hausdorff_distance(Region(a[:, :, None]), Region(b[:, :, None]))


def solve_adjoint(D: DigitSystem, init="balls", tol: float = 1e-6, max_iter: int = 500,
                  h: float | None = None, mode: str = "auto") -> PrototileSolution:
    """Iterate K_j <- phi^-1 (U_i K_i + D_ij) until the step certifies error <= tol.

    1D systems are iterated exactly on interval unions. Otherwise the
    iteration runs on a raster of cell size h covering the invariant ball;
    the certified error then includes a discretization term of one cell
    diagonal per contraction.
    """
    c = 1.0 / D.lam
    if is_primitive(substitution_matrix(D)) is None:
        warnings.warn("substitution matrix not primitive; interior checks are advisory", stacklevel=2)
    if mode == "auto":
        mode = "exact" if D.dimension == 1 else "raster"
    R = invariant_radius(D)
    if mode == "exact":
        if D.dimension != 1:
            raise ValueError("exact mode needs d = 1")
        if isinstance(init, str):
            K = [np.array([[-R, R]]) for _ in range(D.m)]
        else:
            K = [merge_intervals(r.boxes)[:, :, 0] for r in init]
        steps = []
        for it in range(1, max_iter + 1):
            K2 = _step_exact(D, K)
            step = max(_hd_intervals(a, b) for a, b in zip(K, K2))
            steps.append(step)
            K = K2
            if step <= tol * (1 - c):
                F = [Region(k[:, :, None]) for k in K]
                return PrototileSolution(F, step / (1 - c), it, c, "exact", 0.0, steps, D.names, D.digest())
        raise MaxIterExceeded(f"no convergence in {max_iter} iterations (last step {steps[-1]:.3g})")
    return _solve_raster(D, init, tol, max_iter, h or config.get_h(), R, c)


def _solve_raster(D, init, tol, max_iter, h, R, c) -> PrototileSolution:
    d = D.dimension
    reach = R
    if not isinstance(init, str):
        reach = max(R, max(float(np.abs(r.corners()).max()) * np.sqrt(d) for r in init))
    lo = np.floor((-reach - 2 * h) / h) * h
    n = int(np.ceil((2 * reach + 4 * h) / h)) + 1
    shape = (n,) * d
    if n ** d > config.get().max_raster_cells:
        raise RasterOverflow(f"raster of {n}^{d} cells exceeds the configured cap")
    origin = np.full(d, lo)
    if isinstance(init, str):
        ctr = origin + (np.argwhere(np.ones(shape, bool)) + 0.5) * h
        ball = (np.linalg.norm(ctr, axis=1) <= R + h).reshape(shape)
        K = [ball.copy() for _ in range(D.m)]
    else:
        K = [r.rasterize(h, origin, shape).occ for r in init]
    inv = np.linalg.inv(D.phi)
    # an interior target cell receives about |det phi| source centers; keep
    # cells covered by more than half of that, so boundary cells do not creep
    keep = max(1, int(np.floor(D.det / 2.0)) + 1) if D.det >= 2 else 1
    steps = []
    for it in range(1, max_iter + 1):
        K2 = []
        for j in range(D.m):
            out = np.zeros(shape, dtype=np.int32)
            for i in range(D.m):
                if not D.digits[i][j].shape[0] or not K[i].any():
                    continue
                pts = origin + (np.argwhere(K[i]) + 0.5) * h
                for dv in D.digits[i][j]:
                    missed = kernels.scatter_affine(pts, inv, inv @ dv, origin, h, out)
                    if missed:
                        raise RasterOverflow(f"{missed} image cells left the raster")
            K2.append(out >= keep)
        if all(np.array_equal(a, b) for a, b in zip(K, K2)):
            step = 0.0
        else:
            step = max(hausdorff_distance(Region(raster=Raster(origin, h, a)), Region(raster=Raster(origin, h, b)))
                       for a, b in zip(K, K2))
        steps.append(step)
        K = K2
        if step <= tol * (1 - c) or step == 0.0:
            disc = h * np.sqrt(d) / (1 - c)
            F = [Region(raster=Raster(origin, h, k)) for k in K]
            return PrototileSolution(F, step / (1 - c) + disc, it, c, "raster", h, steps, D.names, D.digest())
    raise MaxIterExceeded(f"no convergence in {max_iter} iterations (last step {steps[-1]:.3g})")


def build_tiling(sol: PrototileSolution, multiset: DeloneMultiset | TilingWindow, center=None,
                 radius: float | None = None, shrink: float = 0.0) -> TilingWindow:
    """T' = U_i (F_i + Lambda_i) as a window; the valid ball shrinks by ``shrink``."""
    if isinstance(multiset, TilingWindow):
        center = multiset.center if center is None else center
        radius = multiset.radius if radius is None else radius
        multiset = multiset.multiset
    labels = np.concatenate([np.full(p.shape[0], i, dtype=np.int64) for i, p in enumerate(multiset.points)])
    trans = np.concatenate(multiset.points)
    protos = [Region(f.boxes) for f in sol.F]
    patch = Patch(labels, trans, protos, names=sol.names or None).sorted()
    return TilingWindow(patch, center, radius - shrink)


def mld_radius_bound(original: list[Region], sol: PrototileSolution) -> float:
    """C = max_j d_H(A_j, F_j) with both in the digit coordinates."""
    if len(original) != sol.m:
        raise IndexMismatch(f"{len(original)} original prototiles vs {sol.m} solved")
    return max(hausdorff_distance(a, f, sol.h or None) for a, f in zip(original, sol.F))


# ---------------------------------------------------------------------------
# verification


def _paint(regions, points, origin, h, shape, half_open=True) -> np.ndarray:
    counts = np.zeros(shape, dtype=np.int32)
    for reg, pts in zip(regions, points):
        if pts.shape[0] == 0:
            continue
        b = reg.boxes
        lo = (pts[:, None, :] + b[None, :, 0]).reshape(-1, b.shape[2])
        hi = (pts[:, None, :] + b[None, :, 1]).reshape(-1, b.shape[2])
        if half_open:
            hi = hi - 1e-9 * h
        kernels.box_cover_count(lo, hi, origin, h, counts)
    return counts


def verify_representability(sol: PrototileSolution, multiset: DeloneMultiset, ball: Region,
                            h: float | None = None) -> VerificationReport:
    """Paint F_i + Lambda_i over the ball; report uncovered and multiply covered volume.

    Cells are counted by their centers against half-open boxes, so shared
    boundaries are not double counted. The tolerance is 4 h^d per painted tile.
    """
    h = h or sol.h or config.get_h()
    d = ball.dimension
    blo, bhi = ball.bounds()
    origin = np.floor(blo / h) * h
    shape = tuple(np.maximum(np.ceil((bhi - origin) / h).astype(int), 1))
    centers_idx = np.indices(shape).reshape(d, -1).T
    centers = origin + (centers_idx + 0.5) * h
    in_ball = ball.contains(centers).reshape(shape)
    reach = max(float(np.abs(f.corners()).max()) for f in sol.F) * np.sqrt(d)
    pts = []
    npieces = 0
    for p in multiset.points:
        near = ball.distance(p) <= reach + h if p.shape[0] else np.zeros(0, bool)
        pts.append(p[near])
        npieces += int(near.sum())
    counts = _paint(sol.F, pts, origin, h, shape)
    cell = h ** d
    hole = in_ball & (counts == 0)
    over = in_ball & (counts >= 2)
    deficiency = float(hole.sum() * cell)
    overlap = float((counts[over] - 1).sum() * cell)
    eps = 4.0 * cell * max(npieces, 1)
    wit = []
    if deficiency > eps:
        where = origin + (np.argwhere(hole) + 0.5) * h
        wit.append({"kind": "hole", "point": _cluster_center(where), "volume": deficiency})
    if overlap > eps:
        where = origin + (np.argwhere(over) + 0.5) * h
        wit.append({"kind": "overlap", "point": _cluster_center(where), "volume": overlap})
    return VerificationReport("representability", FAIL if wit else PASS,
                              {"deficiency": deficiency, "overlap": overlap, "epsilon": eps, "pieces": npieces,
                               "h": h}, wit, anchor="translates of the solved prototiles tile the ball")


def _cluster_center(pts: np.ndarray) -> np.ndarray:
    """Median of the largest offending group (points near the first offending point)."""
    p0 = pts[0]
    near = pts[np.linalg.norm(pts - p0, axis=1) <= 2.0]
    return np.median(near, axis=0)


def recheck_representability_witness(sol: PrototileSolution, multiset: DeloneMultiset, w: dict,
                                     probe: float = 0.0) -> bool:
    """Count covering tiles at the witness point directly from the box geometry."""
    x = np.atleast_2d(w["point"])
    n = 0
    for f, p in zip(sol.F, multiset.points):
        if p.shape[0]:
            n += int(np.sum([f.contains(x - g, tol=probe)[0] for g in p]))
    return n == 0 if w["kind"] == "hole" else n >= 2


def self_affine_mismatch(F: list[Region], D: DigitSystem, h: float | None = None) -> np.ndarray:
    """Per label j: d_H(F_j, phi^-1 U_i (F_i + D_ij))."""
    inv = np.linalg.inv(D.phi)
    out = []
    for j in range(D.m):
        boxes = []
        for i in range(D.m):
            for dv in D.digits[i][j]:
                boxes.append(F[i].boxes + dv)
        if not boxes:
            out.append(np.inf)
            continue
        U = Region(np.concatenate(boxes))
        img = U.linear_map(inv, h)
        out.append(hausdorff_distance(F[j], img, h))
    return np.array(out)


def verify_self_affine(sol: PrototileSolution | list, D: DigitSystem, window: TilingWindow,
                       tol: float | None = None) -> VerificationReport:
    """Inflated supports equal the digit images (within tol) and inflation commutes with translation."""
    from .substitution import verify_fixed_point
    F = sol.F if isinstance(sol, PrototileSolution) else list(sol)
    h = getattr(sol, "h", 0.0) or config.get_h()
    tol = 2 * h if tol is None else tol
    mism = self_affine_mismatch(F, D, h)
    wit = [{"property": "support", "label": int(j), "mismatch": float(mism[j])}
           for j in np.nonzero(mism > tol)[0]]
    r1 = VerificationReport("support", FAIL if wit else PASS,
                            {"max_mismatch": float(mism.max()), "tol": tol}, wit,
                            anchor="inflated support equals the union of its digit images")
    r2 = verify_fixed_point(D, window)
    r2.stage = "equivariance"
    return combine("self_affine", [r1, r2], anchor="expansion of each tile is a patch of the tiling")
