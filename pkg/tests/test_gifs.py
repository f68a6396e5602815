import math
from pathlib import Path

import numpy as np
import pytest

from pseudotile import config, io
from pseudotile.errors import IndexMismatch
from pseudotile.generators import TAU, fibonacci_prototiles
from pseudotile.geometry import Region, hausdorff_distance
from pseudotile.gifs import (build_tiling, invariant_radius, iteration_bound, mld_radius_bound,
                             recheck_representability_witness, self_affine_mismatch, solve_adjoint,
                             verify_representability)
from pseudotile.tiling import DeloneMultiset

SPECS = Path(__file__).resolve().parent.parent / "specs"


@pytest.fixture(scope="module")
def fibD():
    return io.read_digits(SPECS / "fibonacci.digits")


@pytest.fixture(scope="module")
def base3D():
    return io.read_digits(SPECS / "base3.digits")


@pytest.fixture(scope="module")
def fib_solution(fibD):
    return solve_adjoint(fibD, tol=1e-8)


def test_fibonacci_hand_solution(fib_solution):
    Fa, Fb = fib_solution.F
    assert hausdorff_distance(Fa, Region.interval(0, TAU)) <= 1e-7
    assert hausdorff_distance(Fb, Region.interval(0, 1)) <= 1e-7
    assert fib_solution.hausdorff_error <= 1e-8


def test_steps_contract(fib_solution):
    s = np.array(fib_solution.steps)
    c = fib_solution.contraction
    assert c == pytest.approx(1 / TAU)
    assert np.all(s[1:] <= c * s[:-1] + 1e-12)


def test_base3_unit_interval_and_bound(base3D):
    sol = solve_adjoint(base3D, tol=1e-6)
    assert hausdorff_distance(sol.F[0], Region.interval(0, 1)) <= 1e-6
    R = invariant_radius(base3D)
    assert R == pytest.approx(1.0)
    assert sol.iterations <= iteration_bound(1e-6, 2 * R, 1 / 3)


def test_iteration_bound_formula():
    assert iteration_bound(1e-6, 2.0, 1 / 3) == math.ceil(math.log(1e-6 * (2 / 3) / 2) / math.log(1 / 3))
    assert iteration_bound(1e-3, 0.0, 0.5) == 0


def test_two_initialisations_agree(fibD):
    a = solve_adjoint(fibD, tol=1e-7)
    b = solve_adjoint(fibD, init=[Region.interval(5, 9), Region.interval(-3, -2)], tol=1e-7)
    for x, y in zip(a.F, b.F):
        assert hausdorff_distance(x, y) <= 2e-7


def test_raster_mode_matches_exact(base3D):
    h = 1 / 256
    sol = solve_adjoint(base3D, tol=1e-3, h=h, mode="raster")
    assert sol.mode == "raster"
    assert hausdorff_distance(sol.F[0], Region.interval(0, 1), h) <= 2 * h


def test_chair_raster_solution_reproduces_prototiles():
    spec = io.parse_spec((SPECS / "chair.digits").read_text())
    D = io.spec_digits(spec)
    h = 1 / 32
    with config.override(h=h):
        sol = solve_adjoint(D, tol=1e-3, h=h)
        assert mld_radius_bound(io.spec_prototiles(spec), sol) <= 2 * h
    assert np.allclose(sol.volumes(), 3.0, atol=0.1)


def test_self_affine_mismatch_zero_on_solution(fibD):
    assert np.allclose(self_affine_mismatch(fibonacci_prototiles(), fibD), 0, atol=1e-12)
    wrong = [Region.interval(0, TAU + 0.1), Region.interval(0, 1)]
    assert self_affine_mismatch(wrong, fibD).max() > 0.05


def test_representability_and_deleted_point(fib, fib_solution):
    ball = Region.interval(fib.center[0] - 100, fib.center[0] + 100)
    ms = fib.multiset
    r = verify_representability(fib_solution, ms, ball, h=1e-3)
    assert r.status == "pass"
    assert r.metrics["deficiency"] <= r.metrics["epsilon"]
    pts = [p.copy() for p in ms.points]
    near = np.argmin(np.abs(pts[0][:, 0] - fib.center[0]))
    pts[0] = np.delete(pts[0], near, axis=0)
    holed = DeloneMultiset(pts)
    r = verify_representability(fib_solution, holed, ball, h=1e-3)
    assert r.status == "fail"
    assert all(recheck_representability_witness(fib_solution, holed, w) for w in r.witnesses)
    assert not any(recheck_representability_witness(fib_solution, ms, w) for w in r.witnesses)


def test_build_tiling_and_index_mismatch(fib, fib_solution):
    T = build_tiling(fib_solution, fib, shrink=1.0)
    assert len(T) == len(fib)
    assert T.radius == pytest.approx(fib.radius - 1.0)
    with pytest.raises(IndexMismatch):
        mld_radius_bound([Region.interval(0, 1)], fib_solution)
