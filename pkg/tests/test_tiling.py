import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudotile.errors import LabelGeometryMismatch, OutOfWindow, PatchNotFound
from pseudotile.geometry import Region
from pseudotile.tiling import (Tile, covering_radius, find_occurrences, patch_equivalent, patch_of,
                               prototile_decomposition, repetitivity_radius, transform_window)


def _same(P, Q, tol=1e-7):
    a, b = P.sorted(), Q.sorted()
    return (np.array_equal(a.labels, b.labels)
            and np.allclose(a.translations, b.translations, atol=tol))


def _random_box(rng, W, scale):
    d = W.dimension
    scale = min(scale, 0.15 * W.radius)
    c = W.center + rng.uniform(-0.4, 0.4, d) * W.radius / np.sqrt(d)
    half = rng.uniform(0.1, 1.0, d) * scale
    return Region.box(c - half, c + half)


@pytest.mark.parametrize("name", ["fib", "chair"])
def test_decomposition_round_trip(name, request):
    W = request.getfixturevalue(name)
    tiles = [Tile(t.support, W.names[t.label], t.translation) for t in W.patch.tiles()]
    protos, ms, patch = prototile_decomposition(tiles)
    assert sum(len(p) for p in ms.points) == len(W)
    for t, i in zip(tiles, range(len(patch))):
        rebuilt = patch.support_of(i)
        assert np.allclose(np.sort(rebuilt.boxes, axis=0), np.sort(t.support.boxes, axis=0))


def test_decomposition_rejects_mismatched_label():
    tiles = [Tile(Region.interval(0, 1), "a", np.zeros(1)), Tile(Region.interval(2, 4), "a", np.zeros(1))]
    with pytest.raises(LabelGeometryMismatch):
        prototile_decomposition(tiles)
    with pytest.raises(PatchNotFound):
        prototile_decomposition([])


@pytest.mark.parametrize("name", ["fib", "chair"])
def test_transform_commutes_with_patch_of(name, request, tau_matrix):
    W = request.getfixturevalue(name)
    phi = tau_matrix if W.dimension == 1 else 2 * np.eye(2)
    WT = transform_window(phi, W)
    rng = np.random.default_rng(7)
    for _ in range(100):
        F = _random_box(rng, W, 3.0)
        lhs = patch_of(WT, F.linear_map(phi))
        P = patch_of(W, F)
        rhs_t = P.translations @ phi.T
        assert np.array_equal(np.sort(lhs.labels), np.sort(P.labels))
        assert np.allclose(np.sort(lhs.translations, axis=0), np.sort(rhs_t, axis=0))


def test_transform_inverse_is_identity(chair):
    M = np.diag([2.0, 1.5])
    back = transform_window(np.linalg.inv(M), transform_window(M, chair))
    assert _same(back.patch, chair.patch)
    assert back.radius <= chair.radius + 1e-9
    for a, b in zip(back.prototiles, chair.prototiles):
        assert abs(a.volume - b.volume) < 1e-6


@given(st.floats(-100, 100), st.floats(0.1, 5), st.floats(0, 5), st.floats(0, 5))
def test_patch_of_monotone(fib, c, w, e1, e2):
    c += float(fib.center[0])
    F1 = Region.interval(c - w, c + w)
    F2 = Region.interval(c - w - e1, c + w + e2)
    a = set(map(tuple, patch_of(fib, F1).translations))
    b = set(map(tuple, patch_of(fib, F2).translations))
    assert a <= b


def test_patch_of_vs_brute_force(chair):
    rng = np.random.default_rng(2)
    lo, hi, owner = chair.patch.flat_boxes
    for _ in range(30):
        F = _random_box(rng, chair, 2.0)
        flo, fhi = F.bounds()
        meet = np.all((lo <= fhi) & (hi >= flo), axis=1)
        got = set(map(tuple, patch_of(chair, F).translations.round(9)))
        assert got == set(map(tuple, chair.patch.translations[np.unique(owner[meet])].round(9)))


def test_patch_of_outside_window(fib):
    with pytest.raises(OutOfWindow):
        patch_of(fib, Region.interval(fib.center[0] + fib.radius - 1, fib.center[0] + fib.radius + 5))


def test_patch_equivalent_symmetric_and_transitive(fib):
    occ = None
    P = patch_of(fib, Region.interval(10.0, 14.0))
    occ = find_occurrences(fib, P)
    assert occ.shape[0] >= 3
    Ps = [P.translate(g) for g in occ[:3]]
    g01 = patch_equivalent(Ps[0], Ps[1])
    g10 = patch_equivalent(Ps[1], Ps[0])
    g12 = patch_equivalent(Ps[1], Ps[2])
    g02 = patch_equivalent(Ps[0], Ps[2])
    assert np.allclose(g01, -g10)
    assert np.allclose(g01 + g12, g02)


def test_patch_equivalent_rejects_different_patches(fib):
    P = patch_of(fib, Region.interval(10.0, 14.0))
    Q = patch_of(fib, Region.interval(10.0, 16.0))
    assert patch_equivalent(P, Q) is None


def test_occurrences_are_subpatches(fib):
    P = patch_of(fib, Region.interval(20.0, 25.0))
    keys = set(zip(fib.patch.labels.tolist(), map(tuple, fib.patch.translations.round(7))))
    for g in find_occurrences(fib, P):
        Q = P.translate(g)
        assert all((int(l), tuple(np.round(t, 7))) in keys for l, t in zip(Q.labels, Q.translations))


def test_repetitivity_bracket(fib):
    P = patch_of(fib, Region.interval(30.0, 31.0))
    est = repetitivity_radius(fib, P)
    assert 0 < est.lower <= est.upper < fib.radius
    assert est.occurrences > 10


def test_covering_radius_below_diameter(fib, chair):
    for W in (fib, chair):
        assert covering_radius(W) <= W.metrics[0] + 1e-9


def test_fibonacci_metrics(fib):
    d_M, eta = fib.metrics
    assert d_M == pytest.approx((1 + 5 ** 0.5) / 2)
    assert eta == pytest.approx(0.5)
