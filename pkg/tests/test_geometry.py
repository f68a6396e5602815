import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudotile import config
from pseudotile.errors import EmptyRegion, NotExpanding, PowerExhausted
from pseudotile.geometry import (Region, adapted_expansion, diameter, erode, hausdorff_distance,
                                 inscribed_ball, merge_intervals, neighborhood, region_metrics)

H = 1 / 32


def boxes2d(draw, n_max=3):
    n = draw(st.integers(1, n_max))
    out = []
    for _ in range(n):
        x, y = draw(st.integers(-8, 8)), draw(st.integers(-8, 8))
        w, h = draw(st.integers(1, 6)), draw(st.integers(1, 6))
        out.append([[x * 0.25, y * 0.25], [(x + w) * 0.25, (y + h) * 0.25]])
    return Region(out)


region2d = st.composite(boxes2d)


@st.composite
def intervals(draw):
    n = draw(st.integers(1, 4))
    out = []
    for _ in range(n):
        a = draw(st.floats(-10, 10, allow_nan=False))
        out.append([a, a + draw(st.floats(0.01, 5))])
    return Region(np.array(out)[:, :, None])


def test_adapted_expansion_finds_power_for_shear():
    # eigenvalues 1.5 but sheared: the first expanding power is 7
    em = adapted_expansion([[1.5, 3.0], [0.0, 1.5]])
    assert em.power == 7
    assert em.lam > 1
    s = np.linalg.svd(em.linear, compute_uv=False)
    assert em.lam == pytest.approx(s[-1])


def test_adapted_expansion_errors():
    with pytest.raises(NotExpanding):
        adapted_expansion([[2.0, 0.0], [0.0, 1.0]])
    with pytest.raises(PowerExhausted):
        adapted_expansion([[1.5, 3.0], [0.0, 1.5]], max_power=6)


def test_expansion_lower_bound_random_vectors():
    rng = np.random.default_rng(1)
    for M in ([[2, 1], [0, 3]], [[1.5, 3.0], [0.0, 1.5]], [[0, 2], [-3, 1]]):
        em = adapted_expansion(M)
        v = rng.normal(size=(1000, 2))
        assert np.all(np.linalg.norm(em.apply(v), axis=1) >= em.lam * np.linalg.norm(v, axis=1) * (1 - 1e-12))


def test_interval_basics():
    F = Region([[0, 1], [2, 3], [0.5, 1.5]])
    assert F.volume == pytest.approx(2.5)
    assert diameter(F) == pytest.approx(3.0)
    c, r = inscribed_ball(F)
    assert r == pytest.approx(0.75)
    assert np.allclose(neighborhood(F, 0.25).boxes[:, :, 0], [[-0.25, 3.25]])
    assert erode(Region.interval(0, 1), 0.6).empty


def test_merge_intervals_touching():
    b = np.array([[[0.0], [1.0]], [[1.0], [2.0]], [[3.0], [4.0]]])
    assert merge_intervals(b).shape[0] == 2


def test_empty_region_errors():
    E = Region.empty_region(2)
    with pytest.raises(EmptyRegion):
        hausdorff_distance(E, Region.box([0, 0], [1, 1]))
    with pytest.raises(EmptyRegion):
        neighborhood(E, 1.0)
    assert erode(E, 1.0).empty


def test_square_metrics_raster():
    with config.override(h=H):
        d, r, v = region_metrics(Region.box([0, 0], [2, 1]))
    assert d == pytest.approx(np.sqrt(5))
    assert abs(r - 0.5) <= H
    assert v == pytest.approx(2.0)


def test_hausdorff_of_translate_2d():
    A = Region.box([0, 0], [1, 1])
    with config.override(h=H):
        d = hausdorff_distance(A, A.translate([0.3, 0.4]))
    assert abs(d - 0.5) <= 2 * H


@given(intervals(), st.floats(0, 2), st.floats(0, 2))
def test_neighborhood_monotone_1d(F, r1, r2):
    r1, r2 = sorted((r1, r2))
    A, B = neighborhood(F, r1), neighborhood(F, r2)
    lo, hi = F.bounds()
    pts = np.linspace(lo[0] - 3, hi[0] + 3, 400)[:, None]
    assert np.all(~A.contains(pts) | B.contains(pts))


@given(region2d(), st.floats(0, 1), st.floats(0, 1))
def test_neighborhood_monotone_erode_antitone_2d(F, r1, r2):
    r1, r2 = sorted((r1, r2))
    with config.override(h=H):
        A, B = neighborhood(F, r1), neighborhood(F, r2)
        pts = np.random.default_rng(0).uniform(-4, 6, size=(2000, 2))
        assert np.all(~A.contains(pts) | B.contains(pts))
        E1, E2 = erode(F, r1), erode(F, r2)
        if not E2.empty:
            assert not E1.empty
            assert np.all(~E2.contains(pts) | E1.contains(pts))


@given(intervals(), intervals(), intervals())
def test_hausdorff_triangle_1d(A, B, C):
    assert hausdorff_distance(A, C) <= hausdorff_distance(A, B) + hausdorff_distance(B, C) + 1e-9


@given(region2d(), region2d(), region2d())
def test_hausdorff_triangle_2d(A, B, C):
    with config.override(h=H):
        ac = hausdorff_distance(A, C)
        ab = hausdorff_distance(A, B)
        bc = hausdorff_distance(B, C)
    assert ac <= ab + bc + 1e-9


@given(region2d(), st.floats(0.0, 0.75), st.sampled_from([[[2.0, 0.0], [0.0, 2.0]], [[0.0, -3.0], [3.0, 0.0]]]))
def test_erosion_under_expansion(F, R, psi):
    # psi(F eroded by R/gamma) lies in (psi F) eroded by R, up to one raster cell
    psi = np.array(psi)
    gamma = np.linalg.svd(psi, compute_uv=False)[-1]
    with config.override(h=H):
        inner = erode(F, R / gamma)
        if inner.empty:
            return
        lhs = inner.linear_map(psi)
        rhs = erode(F.linear_map(psi), R)
        pts = lhs.boxes.mean(axis=1)
        if rhs.empty:
            assert lhs.volume <= (gamma * H) ** 2 * lhs.boxes.shape[0] * 4
            return
        assert np.all(rhs.distance(pts) <= 2 * gamma * H * np.sqrt(2))


def test_hausdorff_exact_vs_brute_force():
    # independent route: dense sampling with numpy
    A = Region([[0, 1], [3, 4]])
    B = Region([[0.5, 3.2]])
    xs = np.linspace(-1, 5, 60001)
    ina, inb = A.contains(xs[:, None]), B.contains(xs[:, None])
    da = np.abs(xs[ina][:, None] - xs[inb][None, ::50]).min(1).max()
    db = np.abs(xs[inb][:, None] - xs[ina][None, ::50]).min(1).max()
    assert hausdorff_distance(A, B) == pytest.approx(max(da, db), abs=1e-2)
