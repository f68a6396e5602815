import numpy as np
import pytest

from pseudotile.derivability import (check_ld, check_mld, compose_ld_radius, estimate_min_ld_radius,
                                     recheck_ld_witness, scaled_ld_radii)
from pseudotile.errors import NoPassingRadius, WindowTooSmall
from pseudotile.generators import TAU, random_window, shifted_fibonacci_window
from pseudotile.geometry import Region, neighborhood
from pseudotile.selfaffinize import collar_recode
from pseudotile.tiling import find_occurrences, patch_of

SP = 0.01


@pytest.fixture(scope="module")
def shifted():
    return shifted_fibonacci_window(13, 0.1)


@pytest.fixture(scope="module")
def bracket(fib, shifted):
    return estimate_min_ld_radius(fib, shifted, 4.0, steps=8, spacing=SP)


def test_radius_arithmetic():
    assert compose_ld_radius(1.5, 2.0) == 3.5
    one, total = scaled_ld_radii(2.0, 2.0, 1)
    assert one == pytest.approx(0.5)
    assert total == pytest.approx(2.0)
    with pytest.raises(ValueError):
        scaled_ld_radii(1.0, 1.0, 0)


def test_collar_recoding_is_mld(fib):
    L = 2.0
    rc = collar_recode(fib, L)
    fwd, back = check_mld(fib, rc, L + fib.metrics[0], 0.0, SP)
    assert fwd.passed and back.passed
    assert fwd.compared > 1000


def test_recoded_labels_not_derivable_at_zero(fib):
    rc = collar_recode(fib, 2.0)
    r = check_ld(fib, rc, 0.0, SP)
    assert r.status == "fail"
    assert recheck_ld_witness(fib, rc, r.witness)


def test_unrelated_pair_fails_with_witness(fib):
    other = random_window(1600, seed=3)
    r = check_ld(fib, other, 3.0, SP)
    assert r.status == "fail"
    assert recheck_ld_witness(fib, other, r.witness)
    # the same pair of points does not witness a failure of the identity
    assert not recheck_ld_witness(fib, fib, r.witness)


def test_monotone_in_radius(fib, shifted):
    status = [check_ld(fib, shifted, R, SP).passed for R in (0.0, 0.5, 1.0, 2.0, 3.0, 4.0)]
    assert not status[0] and status[-1]
    first = status.index(True)
    assert all(status[first:])


def test_bracket(fib, shifted, bracket):
    R_pass, R_fail = bracket
    assert R_fail < R_pass
    assert check_ld(fib, shifted, R_pass, SP).passed
    assert not check_ld(fib, shifted, R_fail, SP).passed


def test_no_passing_radius(fib):
    with pytest.raises(NoPassingRadius):
        estimate_min_ld_radius(fib, random_window(1600, seed=1), 2.0, spacing=SP)


def test_window_too_small(fib_small):
    with pytest.raises(WindowTooSmall):
        check_ld(fib_small, fib_small, 2 * fib_small.radius)


def test_derivation_transports_agreement(fib, shifted, bracket):
    # agreement of [N_L(F)] in the source at shift g gives agreement of [N_{L-R}(F)] in the target
    R = bracket[0]
    rng = np.random.default_rng(11)
    c0, rad = fib.center[0], fib.radius
    checked = 0
    while checked < 50:
        x = c0 + rng.uniform(-0.5, 0.5) * rad
        F = Region.interval(x, x + rng.uniform(0.1, 2.0))
        L = R + rng.uniform(0.2, 3.0)
        P = patch_of(fib, neighborhood(F, L))
        occ = find_occurrences(fib, P)
        occ = occ[(np.abs(x + occ[:, 0] - c0) < 0.7 * rad) & (np.abs(occ[:, 0]) > 1e-6)]
        for g in occ[rng.permutation(len(occ))[:3]]:
            Fg = F.translate(g)
            Q = patch_of(fib, neighborhood(Fg, L))
            if len(Q) != len(P) or not np.allclose(np.sort(Q.translations, 0), np.sort(P.translations + g, 0)):
                continue
            A = patch_of(shifted, neighborhood(F, L - R))
            B = patch_of(shifted, neighborhood(Fg, L - R))
            assert np.array_equal(np.sort(A.labels), np.sort(B.labels))
            assert np.allclose(np.sort(A.translations + g, 0), np.sort(B.translations, 0), atol=1e-7)
            checked += 1
