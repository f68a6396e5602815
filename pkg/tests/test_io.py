from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudotile import io
from pseudotile.errors import ParseError, ValidationError
from pseudotile.geometry import Raster, Region
from pseudotile.gifs import PrototileSolution
from pseudotile.report import VerificationReport

SPECS = Path(__file__).resolve().parent.parent / "specs"

names = st.sampled_from(["a", "b", "c", "X1"])
nums = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@st.composite
def window_specs(draw):
    d = draw(st.integers(1, 2))
    labels = draw(st.lists(names, min_size=1, max_size=3, unique=True))
    protos = []
    for n in labels:
        lo = np.array(draw(st.lists(nums, min_size=d, max_size=d)))
        protos.append((n, Region.box(lo, lo + draw(st.floats(0.1, 5)))))
    places = [(draw(st.sampled_from(labels)), np.array(draw(st.lists(nums, min_size=d, max_size=d))))
              for _ in range(draw(st.integers(1, 5)))]
    ball = (np.array(draw(st.lists(nums, min_size=d, max_size=d))), draw(st.floats(0.5, 100)))
    cfg = draw(st.dictionaries(st.sampled_from(["h", "tol"]), st.floats(1e-6, 1.0), max_size=2))
    if draw(st.booleans()):
        cfg["k"] = draw(st.one_of(st.just("auto"), st.integers(1, 6)))
    return io.SystemSpec(d, prototiles=protos, placements=places, ball=ball, config=cfg)


@given(window_specs())
def test_spec_round_trip(spec):
    text = io.serialize_spec(spec)
    again = io.parse_spec(text)
    assert io.spec_equal(spec, again)
    assert io.serialize_spec(again) == text


@pytest.mark.parametrize("text,value", [("tau", (1 + 5 ** 0.5) / 2), ("1/64", 1 / 64), ("-2*sqrt(2)", -2 * 2 ** 0.5),
                                        ("tau**2 - tau", 1.0), ("3", 3.0)])
def test_number(text, value):
    assert io.number(text) == pytest.approx(value)


@pytest.mark.parametrize("text", ["__import__('os')", "x", "1/0", "open('f')", "tau.real"])
def test_number_rejects(text):
    with pytest.raises(ValueError):
        io.number(text)


def test_parse_error_location():
    with pytest.raises(ParseError) as exc:
        io.parse_spec("dimension 1\nprototile a 0 1\nplace a zz\n")
    assert exc.value.line == 3


@pytest.mark.parametrize("text", [
    "dimension 1\nprototile a 0 1\nplace b 0\n",  # unknown label
    "dimension 1\nprototile a 0 1\n",  # no source
    "dimension 1\nprototile a 0 1\nplace a 0\ndigit a a 0\nexpansion 2\n",  # two sources
    "dimension 2\nprototile a 0 0 1 1\nplace a 0 0\n",  # no ball in 2D
    "dimension 1\nprototile a 0 1\ndigit a a 0\n",  # digits without expansion
])
def test_validation_errors(text):
    with pytest.raises(ValidationError):
        io.validate(io.parse_spec(text))


def test_window_round_trip(tmp_path, chair):
    io.write_window(chair, tmp_path / "w.txt")
    back = io.read_window(tmp_path / "w.txt")
    assert back.names == chair.names
    assert np.array_equal(back.patch.labels, chair.patch.labels)
    assert np.allclose(back.patch.translations, chair.patch.translations)
    assert back.radius == pytest.approx(chair.radius)


def test_digits_round_trip(tmp_path):
    D = io.read_digits(SPECS / "chair.digits")
    io.write_digits(D, tmp_path / "d.txt")
    assert io.read_digits(tmp_path / "d.txt").digest() == D.digest()


@pytest.mark.parametrize("shape", [(17,), (13, 9)])
def test_pgm_round_trip(tmp_path, shape):
    occ = np.random.default_rng(0).random(shape) < 0.4
    r = Raster(np.zeros(len(shape)), 0.25, occ)
    io.write_pgm(r, tmp_path / "r.pgm")
    back = io.read_pgm(tmp_path / "r.pgm", r.origin, r.h, len(shape))
    assert np.array_equal(back.occ, occ)


def test_solution_round_trip(tmp_path):
    occ = np.zeros((8, 8), bool)
    occ[2:5, 1:7] = True
    F = [Region([[0.0, 1.5]]),
         Region.from_raster(Raster(np.array([0.5, -1.0]), 0.125, occ))]
    sol = PrototileSolution(F[:1], 1e-7, 12, 0.5, names=["a"], digest="abc")
    io.write_solution(sol, tmp_path / "s1")
    back = io.load_artifact(tmp_path / "s1" / "solution.json")
    assert back.names == ["a"] and back.digest == "abc"
    assert np.allclose(back.F[0].boxes, F[0].boxes)
    sol2 = PrototileSolution(F[1:], 1e-3, 5, 0.5, mode="raster", h=0.125)
    io.write_solution(sol2, tmp_path / "s2")
    back = io.read_solution(tmp_path / "s2" / "solution.json")
    assert np.array_equal(back.F[0].raster.occ, occ)
    assert back.F[0].volume == pytest.approx(F[1].volume)


def test_failing_report_needs_witness():
    with pytest.raises(ValueError):
        VerificationReport("x", "fail")
    r = VerificationReport("x", "pass", {"v": np.float64(1.5), "inf": float("inf")})
    assert r.to_dict()["metrics"] == {"v": 1.5, "inf": "inf"}
