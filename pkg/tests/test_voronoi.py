import numpy as np
import pytest

from pseudotile import config
from pseudotile.errors import OriginOutside
from pseudotile.generators import TAU, chair_window, fibonacci_two_sided, random_window
from pseudotile.tiling import TilingWindow
from pseudotile.voronoi import (derived_voronoi, locator_set, psi_finiteness_probe, recheck_locator,
                                recheck_probe_witness, same_up_to_labels)


@pytest.fixture(scope="module")
def fib2():
    return fibonacci_two_sided(7)


@pytest.fixture(scope="module")
def chair_centered():
    c = chair_window(5)
    return TilingWindow(c.patch.translate(-c.center), np.zeros(2), c.radius)


def _nearest_ok(T, rng, per_cell=20):
    q = T.locators
    for cell, qi in zip(T.cells, q):
        lo, hi = cell.bounds()
        x = rng.uniform(lo, hi, size=(per_cell, q.shape[1]))
        x = x[cell.contains(x)]
        d_own = np.linalg.norm(x - qi, axis=1)
        d_all = np.linalg.norm(x[:, None] - q[None], axis=2).min(1)
        slack = 0 if cell.is_exact else cell.raster.h * np.sqrt(q.shape[1])
        assert np.all(d_own <= d_all + slack + 1e-9)


def test_every_locator_rechecks(fib2):
    L = locator_set(fib2, 2.0)
    assert L.points.shape[0] > 50
    assert all(recheck_locator(fib2, L, q) for q in L.points)
    assert not recheck_locator(fib2, L, L.points[0] + 0.3)


def test_cells_are_nearest_locator_regions_1d(fib2):
    T = derived_voronoi(fib2, 1.3)
    _nearest_ok(T, np.random.default_rng(0))
    # cells tile the span of the interior locators
    lo = min(c.bounds()[0][0] for c in T.cells)
    hi = max(c.bounds()[1][0] for c in T.cells)
    assert sum(c.volume for c in T.cells) == pytest.approx(hi - lo)


def test_finitely_many_cell_lengths(fib2):
    T = derived_voronoi(fib2, 1.3)
    lengths = np.unique(np.round([c.volume for c in T.cells], 6))
    assert len(lengths) <= 4
    assert T.n_labels <= len(T.labels) // 10


def test_cells_are_nearest_locator_regions_2d(chair_centered):
    with config.override(h=1 / 8):
        T = derived_voronoi(chair_centered, 0.5)
    assert len(T.cells) >= 2
    _nearest_ok(T, np.random.default_rng(1))


def test_same_up_to_labels_reflexive(fib2):
    T = derived_voronoi(fib2, 1.3)
    ok, msg = same_up_to_labels(T, T, np.eye(1), 100.0, fib2.center)
    assert ok, msg
    ok, _ = same_up_to_labels(T, T, np.array([[TAU]]), 100.0, fib2.center)
    assert not ok


def test_origin_outside(fib):
    with pytest.raises(OriginOutside):
        locator_set(fib, 1.0)


def test_probe_rejects_non_similitude(fib2):
    with pytest.raises(ValueError):
        psi_finiteness_probe(fib2, [[0.5]], 1.3)


def test_probe_self_similar_passes(fib2):
    r = psi_finiteness_probe(fib2, [[TAU]], 1.3, levels=3, M=3)
    assert r.status == "pass"
    assert r.metrics["levels_checked"] == 4
    assert r.metrics["bases"] <= 3


def test_probe_random_fails_and_rechecks():
    W = random_window(1600, seed=0)
    r = psi_finiteness_probe(W, [[TAU]], 1.3, levels=3, M=3)
    assert r.status == "fail"
    assert recheck_probe_witness(W, [[TAU]], 1.3, r)
