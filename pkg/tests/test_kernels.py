import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import ndimage

from pseudotile import kernels

BACKENDS = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba unavailable")


@pytest.mark.parametrize("backend", BACKENDS)
@given(st.integers(0, 2**32 - 1), st.sampled_from([(40,), (23, 31), (9, 11, 7)]), st.floats(0.01, 0.3))
def test_edt_matches_scipy(backend, seed, shape, density):
    mask = np.random.default_rng(seed).random(shape) < density
    mask.flat[0] = True
    ref = ndimage.distance_transform_edt(~mask)
    assert np.allclose(kernels.edt(mask, backend=backend), ref, atol=1e-9)


@pytest.mark.parametrize("backend", BACKENDS)
def test_edt_empty_mask_is_inf(backend):
    assert np.all(np.isinf(kernels.edt(np.zeros((5, 4), bool), backend=backend)))


@needs_numba
def test_scatter_parity():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1, 11, size=(20000, 2))
    A = np.array([[0.5, 0.1], [-0.2, 0.5]])
    b = np.array([0.3, 0.1])
    outs, misses = [], []
    for be in ("numpy", "numba"):
        out = np.zeros((64, 64), dtype=np.int32)
        misses.append(kernels.scatter_affine(pts, A, b, np.zeros(2), 6 / 64, out, backend=be))
        outs.append(out)
    assert misses[0] == misses[1]
    assert np.array_equal(outs[0], outs[1])
    # independent route: histogram of the images
    img = pts @ A.T + b
    idx = np.floor(img / (6 / 64)).astype(int)
    ok = np.all((idx >= 0) & (idx < 64), axis=1)
    ref = np.zeros((64, 64), int)
    np.add.at(ref, tuple(idx[ok].T), 1)
    assert np.array_equal(outs[0], ref)
    assert misses[0] == int((~ok).sum())


def test_scatter_rejects_float_out():
    with pytest.raises(TypeError):
        kernels.scatter_affine(np.zeros((1, 1)), np.eye(1), np.zeros(1), np.zeros(1), 1.0, np.zeros(3))


@pytest.mark.parametrize("backend", BACKENDS)
def test_box_cover_matches_centers(backend):
    rng = np.random.default_rng(5)
    lo = rng.uniform(0, 8, size=(200, 2))
    hi = lo + rng.uniform(0.1, 2, size=lo.shape)
    h = 10 / 128
    counts = np.zeros((128, 128), dtype=np.int32)
    kernels.box_cover_count(lo, hi, np.zeros(2), h, counts, backend=backend)
    c = (np.indices((128, 128)).reshape(2, -1).T + 0.5) * h
    inside = np.all((c[:, None] >= lo[None]) & (c[:, None] <= hi[None]), axis=2).sum(1)
    assert np.array_equal(counts.ravel(), inside)


@needs_numba
def test_locate_parity(chair):
    lo, hi, owner = chair.patch.flat_boxes
    index = kernels.BoxIndex(lo, hi, owner, chair.metrics[0])
    pts = chair.center + np.random.default_rng(0).uniform(-chair.radius, chair.radius, size=(5000, 2)) * 0.8
    o1, c1 = index.locate(pts, backend="numpy")
    o2, c2 = index.locate(pts, backend="numba")
    assert np.array_equal(o1, o2)
    assert np.allclose(c1, c2)
    # brute force owner
    inside = np.all((pts[:, None] >= lo[None]) & (pts[:, None] <= hi[None]), axis=2)
    strict = inside.sum(1) == 1
    assert np.array_equal(o1[strict], owner[inside[strict].argmax(1)])


def test_env_var_disables_numba():
    env = dict(os.environ, PSEUDOTILE_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from pseudotile import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("cuda")
