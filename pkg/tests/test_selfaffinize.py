import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudotile.errors import WindowTooSmall
from pseudotile.generators import TAU, context_shifted_fibonacci, fibonacci_window
from pseudotile.selfaffinize import (build_pseudo_substitution, choose_k, choose_reference_points, collar_radius,
                                     collar_recode, extract_digits, recheck_S1_witness, verify_S1_S4)
from pseudotile.substitution import substitution_matrix


def _ps(W, k):
    phik = np.array([[TAU ** k]])
    refs = choose_reference_points(W, k, phik)
    return build_pseudo_substitution(W, k, refs, phik)


@given(st.floats(1.05, 5.0), st.floats(0.05, 3.0), st.floats(0.1, 10.0))
def test_choose_k_is_least(lam, eta, d_M):
    k = choose_k(lam, eta, d_M)
    bound = 2 + d_M / eta
    assert lam ** k > bound
    assert k == 1 or lam ** (k - 1) <= bound


def test_choose_k_fibonacci():
    # d_M = tau, eta = 1/2: tau^k > 2 + 2 tau ~ 5.24 first at k = 4
    assert choose_k(TAU, 0.5, TAU) == 4
    with pytest.raises(ValueError):
        choose_k(1.0, 1.0, 1.0)


def test_collar_radius_values():
    assert collar_radius(0.0, 2.0, 3.0) == pytest.approx(3.0)
    assert collar_radius(1.0, 2.0, 0.0) == pytest.approx(2.0)
    # tau / (tau - 1)^2 = tau^3
    assert collar_radius(1.0, TAU, 0.0) == pytest.approx(TAU ** 3)


@given(st.floats(0, 5), st.floats(0, 5), st.floats(1.1, 4))
def test_collar_radius_monotone_in_R(r1, r2, lam):
    r1, r2 = sorted((r1, r2))
    assert collar_radius(r1, lam, 1.0) <= collar_radius(r2, lam, 1.0)


def test_reference_points_inside_with_clearance(fib):
    refs = choose_reference_points(fib, 1, np.array([[TAU]]))
    assert refs.clearance > 0
    for i, F in enumerate(fib.prototiles):
        assert F.contains(refs.points[i:i + 1])[0]


def test_image_counts_constant_per_label(fib):
    ps = _ps(fib, 1)
    counts = {}
    for t in ps.qualifying:
        lab = int(fib.patch.labels[t])
        counts.setdefault(lab, set()).add(len(ps.image(t)))
    assert all(len(v) == 1 for v in counts.values())
    assert verify_S1_S4(ps).status == "pass"


def test_digits_stable_under_window_enlargement():
    Ds = [extract_digits(_ps(fibonacci_window(n), 1)) for n in (11, 13)]
    assert Ds[0].digest() == Ds[1].digest()
    assert substitution_matrix(Ds[0]).tolist() == [[1, 1], [1, 0]]


def test_collar_recode_refines_labels(fib):
    rc = collar_recode(fib, 2.0)
    assert rc.m > fib.m
    parents = rc.patch.meta["parent"]
    for lab, name in enumerate(rc.names):
        assert name.split(".")[0] == fib.names[parents[lab]]
    # supports unchanged: every recoded tile is an original tile
    orig = set(map(tuple, np.round(fib.patch.translations, 9)))
    assert set(map(tuple, np.round(rc.patch.translations, 9))) <= orig
    assert rc.radius < fib.radius


def test_collar_recode_is_deterministic(fib):
    a, b = collar_recode(fib, 3.0), collar_recode(fib, 3.0)
    assert a.names == b.names
    assert np.array_equal(a.patch.labels, b.patch.labels)


def test_collar_too_large(fib_small):
    with pytest.raises(WindowTooSmall):
        collar_recode(fib_small, 10 * fib_small.radius)


def test_unrecoded_context_shift_violates_S1():
    W = context_shifted_fibonacci(13, 0.3, "bab")
    ps = _ps(W, 1)
    r = verify_S1_S4(ps)
    s1 = [w for w in r.witnesses if w.get("property") == "S1"]
    assert r.status == "fail" and s1
    assert all(recheck_S1_witness(ps, w) for w in s1)



@pytest.mark.parametrize("context", ["ab", "baa"])
def test_other_contexts_keep_S1(context):
    W = context_shifted_fibonacci(13, 0.1, context)
    assert verify_S1_S4(_ps(W, 1)).status == "pass"
