"""End-to-end run: window -> collar recoding -> digits -> solved prototiles -> T' and its checks."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config, io
from .derivability import check_mld, estimate_min_ld_radius
from .errors import NoPassingRadius
from .geometry import Region, adapted_expansion, diameter
from .gifs import (PrototileSolution, build_tiling, mld_radius_bound, self_affine_mismatch, solve_adjoint,
                   verify_representability, verify_self_affine)
from .report import FAIL, INCONCLUSIVE, PASS, VerificationReport
from .selfaffinize import (build_pseudo_substitution, choose_k, choose_reference_points, collar_radius,
                           collar_recode, extract_digits, verify_S1_S4)
from .substitution import DigitSystem, is_primitive, substitution_matrix, verify_fixed_point, volume_identity
from .tiling import TilingWindow, transform_window

log = logging.getLogger(__name__)

EXIT = {PASS: 0, FAIL: 1, INCONCLUSIVE: 3}


@dataclass
class PipelineResult:
    status: str
    reports: dict
    window: TilingWindow
    recoded: TilingWindow
    k: int
    L: float
    R_ld: float | None
    digits: DigitSystem
    solution: PrototileSolution
    tprime: TilingWindow
    C: float
    info: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT[self.status]

    def summary(self) -> dict:
        S = substitution_matrix(self.digits)
        return {"status": self.status, "k": self.k, "L": self.L, "R_ld": self.R_ld, "C": self.C,
                "labels": self.recoded.names, "substitution_matrix": S,
                "stages": {name: r.status for name, r in self.reports.items()}, **self.info}


def measure_ld_radius(window: TilingWindow, phi: np.ndarray, spacing: float | None = None,
                      steps: int = 10) -> float:
    """Least R' (bisected) with phi^-1 T derivable from T at R', scaled to phi T -> T: returns |phi| R'."""
    small = transform_window(np.linalg.inv(phi), window)
    d_M = window.metrics[0]
    R_max = max(d_M, config.get_h())
    while True:
        try:
            R_pass, _ = estimate_min_ld_radius(window, small, R_max, steps=steps, spacing=spacing)
            break
        except NoPassingRadius:
            R_max *= 2
            if R_max > small.radius / 2:
                raise
    return float(np.linalg.norm(phi, 2)) * R_pass


def _inner_box(center, radius, dimension) -> Region:
    a = radius / np.sqrt(dimension)
    return Region.box(np.asarray(center) - a, np.asarray(center) + a)


def run_pipeline(source, out_dir=None, k="auto", L="auto", h: float | None = None, tol: float = 1e-6,
                 expansion=None, ld_spacing: float | None = None, collar_margin: float = 1.01,
                 check_input_self_affine: bool = True) -> PipelineResult:
    """Turn a pseudo-self-affine window into a self-affine one and check every stage.

    ``source`` is a SystemSpec, spec text or a TilingWindow (then
    ``expansion`` is required). ``k`` and ``L`` are 'auto' or numbers;
    ``L=0`` skips collar recoding. Artifacts go to ``out_dir`` when given.
    Any stage error propagates unchanged.
    """
    if isinstance(source, str):
        source = io.parse_spec(source)
    if isinstance(source, io.SystemSpec):
        spec = source
        window = io.spec_window(spec)
        expansion = io.spec_expansion(spec) if expansion is None else expansion
        k = spec.config.get("k", k) if k == "auto" else k
        L = spec.config.get("L", L) if L == "auto" else L
        h = h or spec.config.get("h")
        tol = spec.config.get("tol", tol)
    else:
        window = source
    if expansion is None:
        raise ValueError("an expansion matrix is required")
    h = h or config.get_h()
    with config.override(h=h):
        return _run(window, expansion, k, L, h, tol, ld_spacing, collar_margin, check_input_self_affine, out_dir)


def _run(window, expansion, k, L, h, tol, ld_spacing, collar_margin, check_input, out_dir) -> PipelineResult:
    em = adapted_expansion(expansion)
    phi, lam = em.linear, em.lam
    info = {"h": h, "tol": tol, "expansion": phi, "lam": lam, "input_labels": list(window.names)}
    d_M, eta = window.metrics
    R_ld = None
    if L == "auto":
        R_ld = measure_ld_radius(window, phi, ld_spacing)
        L = collar_margin * collar_radius(R_ld, lam, d_M)
        log.info("measured LD radius %.4g, collar radius %.4g", R_ld, L)
    L = float(L)
    recoded = collar_recode(window, L) if L > 0 else window
    d_M, eta = recoded.metrics
    if k == "auto":
        k = choose_k(lam, eta, d_M)
    k = int(k)
    phi_k = np.linalg.matrix_power(phi, k)
    info.update(d_M=d_M, eta=eta)

    reports: dict[str, VerificationReport] = {}
    refs = choose_reference_points(recoded, k, phi_k)
    ps = build_pseudo_substitution(recoded, k, refs, phi_k)
    reports["S1_S4"] = verify_S1_S4(ps)
    D = extract_digits(ps)
    S = substitution_matrix(D)
    info["primitivity_power"] = is_primitive(S)
    reports["fixed_point"] = verify_fixed_point(D, recoded)

    sol = solve_adjoint(D, tol=tol, h=h)
    C = mld_radius_bound(recoded.prototiles, sol)
    vol = volume_identity(D, sol.volumes())
    info.update(gifs_iterations=sol.iterations, gifs_error=sol.hausdorff_error, volume_residual=vol,
                refs=refs.points, ref_clearance=refs.clearance)

    tprime = build_tiling(sol, recoded, shrink=C)
    reach = max(diameter(F) + float(np.abs(F.corners()).max()) for F in sol.F)
    ball = _inner_box(recoded.center, recoded.radius - reach, recoded.dimension)
    reports["representability"] = verify_representability(sol, recoded.multiset, ball, h)
    reports["self_affine"] = verify_self_affine(sol, D, tprime)
    if check_input:
        mism = self_affine_mismatch(recoded.prototiles, D, h)
        info["input_self_affine_mismatch"] = float(mism.max())
        info["input_self_affine"] = verify_self_affine(recoded.prototiles, D, recoded).status

    spacing = ld_spacing or h
    fwd, back = check_mld(recoded, tprime, C, C, spacing)
    reports["mld_forward"] = _ld_report("mld_forward", fwd, "T' is derivable from T at radius C")
    reports["mld_backward"] = _ld_report("mld_backward", back, "T is derivable from T' at radius C")

    statuses = [r.status for r in reports.values()]
    status = FAIL if FAIL in statuses else INCONCLUSIVE if INCONCLUSIVE in statuses else PASS
    res = PipelineResult(status, reports, window, recoded, k, L, R_ld, D, sol, tprime, C, info)
    if out_dir is not None:
        res.artifacts = write_artifacts(res, out_dir)
    return res


def _ld_report(stage, r, anchor) -> VerificationReport:
    m = {k: v for k, v in r.to_dict().items() if k not in ("status", "witness", "notes")}
    return VerificationReport(stage, r.status, m, [r.witness] if r.witness else [],
                              config={"notes": r.notes}, anchor=anchor)


def write_artifacts(res: PipelineResult, out_dir) -> dict:
    out = Path(out_dir)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    paths = {"recoded_window": out / "recoded_window.txt", "digits": out / "digits.txt",
             "tprime_window": out / "tprime_window.txt", "summary": out / "summary.json"}
    io.write_window(res.recoded, paths["recoded_window"])
    io.write_digits(res.digits, paths["digits"], res.recoded.prototiles)
    io.write_window(res.tprime, paths["tprime_window"])
    paths["solution"] = io.write_solution(res.solution, out / "solution")
    for name, r in res.reports.items():
        p = out / "reports" / f"{name}.json"
        io.write_json(r, p)
        paths[f"report:{name}"] = p
    io.write_json(res.summary(), paths["summary"])
    return {k: str(v) for k, v in paths.items()}
