"""Command line entry point.

Exit codes: 0 pass, 1 fail with a witness, 2 usage or parse error,
3 inconclusive (including a stage that stopped with an error).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config, io
from .errors import ParseError, PseudotileError, ValidationError
from .report import FAIL, INCONCLUSIVE, PASS, _plain

EXIT = {PASS: 0, FAIL: 1, INCONCLUSIVE: 3}
log = logging.getLogger("pseudotile")


def _auto_int(text: str):
    if text == "auto":
        return "auto"
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'auto' or an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError("k must be at least 1")
    return v


def _auto_float(text: str):
    if text == "auto":
        return "auto"
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'auto' or a number") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _matrix(text: str) -> np.ndarray:
    """'tau', '2', or a row-major list '2,0,0,2'."""
    try:
        vals = [io.number(t) for t in text.replace(";", ",").split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    n = int(round(len(vals) ** 0.5))
    if n * n != len(vals):
        raise argparse.ArgumentTypeError("matrix needs a square number of entries")
    return np.array(vals).reshape(n, n)


def _emit(obj, path=None) -> None:
    text = json.dumps(_plain(obj), indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    print(text)


def cmd_selfaffinize(a) -> int:
    from .pipeline import run_pipeline
    spec = io.parse_spec(Path(a.spec).read_text())
    k = a.k if a.k is not None else spec.config.get("k", "auto")
    L = a.L if a.L is not None else spec.config.get("L", "auto")
    res = run_pipeline(spec, a.out, k=k, L=L, h=a.h, tol=a.tol if a.tol is not None else spec.config.get("tol", 1e-6))
    _emit(res.summary())
    return res.exit_code


def cmd_verify_ld(a) -> int:
    from .derivability import check_ld
    A, B = io.read_window(a.winA), io.read_window(a.winB)
    with config.override(h=a.h or config.get_h()):
        r = check_ld(A, B, a.radius, a.spacing)
    _emit(r.to_dict(), a.report)
    return EXIT[r.status]


def cmd_voronoi(a) -> int:
    from .voronoi import derived_voronoi, psi_finiteness_probe
    window = io.spec_window(io.parse_spec(Path(a.spec).read_text()))
    T = derived_voronoi(window, a.r)
    out = {"r": a.r, "label_radius": 2 * T.R_r, "cells": len(T.labels), "labels": T.n_labels,
           "shape_splits": T.shape_splits}
    if a.out:
        io.write_window(T.window, a.out)
    status = PASS
    if a.probe is not None:
        rep = psi_finiteness_probe(window, a.probe, a.r, a.levels, a.M)
        out["probe"] = rep.to_dict()
        status = rep.status
    _emit(out, a.report)
    return EXIT[status]


def cmd_render(a) -> int:
    from .render import render_svg
    obj = io.load_artifact(a.artifact)
    if not hasattr(obj, "patch") and not hasattr(obj, "F"):
        raise ValidationError("render takes a window file or a solution manifest")
    render_svg(obj, a.out)
    print(a.out)
    return 0


def cmd_solve_gifs(a) -> int:
    from .gifs import solve_adjoint
    D = io.read_digits(a.digits)
    with config.override(h=a.h or config.get_h()):
        sol = solve_adjoint(D, tol=a.tol, h=a.h)
    sol.names = list(D.names)
    sol.digest = D.digest()
    if a.out:
        io.write_solution(sol, a.out)
    _emit({"iterations": sol.iterations, "hausdorff_error": sol.hausdorff_error, "mode": sol.mode,
           "volumes": sol.volumes(), "digit_digest": sol.digest})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pseudotile", description="Self-affine recoding of pseudo-self-affine tilings.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("selfaffinize", help="run the full pipeline on a spec")
    s.add_argument("spec")
    s.add_argument("--out", required=True)
    s.add_argument("--k", type=_auto_int, default=None)
    s.add_argument("--L", type=_auto_float, default=None)
    s.add_argument("--h", type=float, default=None)
    s.add_argument("--tol", type=float, default=None)
    s.set_defaults(func=cmd_selfaffinize)

    s = sub.add_parser("verify-ld", help="sampled local derivability check between two windows")
    s.add_argument("winA")
    s.add_argument("winB")
    s.add_argument("--radius", type=float, required=True)
    s.add_argument("--spacing", type=float, default=None)
    s.add_argument("--h", type=float, default=None)
    s.add_argument("--report")
    s.set_defaults(func=cmd_verify_ld)

    s = sub.add_parser("voronoi", help="derived Voronoi tiling and the psi-finiteness probe")
    s.add_argument("spec")
    s.add_argument("--r", type=float, required=True)
    s.add_argument("--probe", type=_matrix, default=None, help="similitude psi, e.g. 'tau' or '2,0,0,2'")
    s.add_argument("--levels", type=int, default=3)
    s.add_argument("--M", type=int, default=3)
    s.add_argument("--out", help="write the derived tiling as a window file")
    s.add_argument("--report")
    s.set_defaults(func=cmd_voronoi)

    s = sub.add_parser("render", help="draw a window file or a solution manifest as SVG")
    s.add_argument("artifact")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("solve-gifs", help="solve the set equations of a digit system")
    s.add_argument("digits")
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--h", type=float, default=None)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve_gifs)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return a.func(a)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PseudotileError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
