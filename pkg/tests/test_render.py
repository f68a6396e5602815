import xml.etree.ElementTree as ET

import numpy as np
import pytest

from pseudotile.errors import EmptyRegion, UnsupportedDimension
from pseudotile.geometry import Region
from pseudotile.gifs import PrototileSolution
from pseudotile.render import palette, regions_svg, render_svg, window_svg

NS = "{http://www.w3.org/2000/svg}"


def test_window_svg_is_valid_and_complete(chair):
    root = ET.fromstring(window_svg(chair))
    rects = root.findall(f"{NS}rect")
    n_boxes = sum(chair.prototiles[l].boxes.shape[0] for l in chair.patch.labels)
    assert len(rects) == 2 * n_boxes  # fill plus outline


def test_render_is_deterministic(tmp_path, fib_small):
    a = render_svg(fib_small, tmp_path / "a.svg").read_bytes()
    b = render_svg(fib_small, tmp_path / "b.svg").read_bytes()
    assert a == b


def test_solution_and_region_inputs(tmp_path):
    sol = PrototileSolution([Region([[0.0, 1.6]]), Region([[0.0, 1.0]])], 0.0, 1, 0.6)
    ET.parse(render_svg(sol, tmp_path / "s.svg"))
    ET.parse(render_svg(Region.box([0, 0], [1, 2]), tmp_path / "r.svg"))


def test_palette_distinct():
    p = palette(12)
    assert len(set(p)) == 12 and all(c.startswith("#") and len(c) == 7 for c in p)


def test_errors():
    with pytest.raises(UnsupportedDimension):
        regions_svg([Region.box(np.zeros(3), np.ones(3))])
    with pytest.raises(EmptyRegion):
        regions_svg([])
    with pytest.raises(EmptyRegion):
        regions_svg([Region.empty_region(2)])
