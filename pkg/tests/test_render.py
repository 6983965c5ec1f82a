import xml.etree.ElementTree as ET

import numpy as np
import pytest

from dryfriction.errors import ContractError
from dryfriction.obstacle_field import ObstacleField, ObstacleSpec
from dryfriction.render import render_profile_svg
from dryfriction.solver import State, TorusGrid

NS = "{http://www.w3.org/2000/svg}"


def _parse(text):
    return ET.fromstring(text.split("?>", 1)[1])


def test_empty_field_flat_profile(empty):
    text = render_profile_svg(State.zeros(TorusGrid(1, 32)), empty)
    root = _parse(text)
    assert root.findall(f".//{NS}circle") == []
    lines = root.findall(f".//{NS}polyline")
    assert len(lines) == 1
    ys = {p.split(",")[1] for p in lines[0].get("points").split()}
    assert len(ys) == 1


def test_rendering_is_byte_identical(default_field, tmp_path, rng):
    s = State(TorusGrid(1, 64), 0.1 * rng.normal(size=64))
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    render_profile_svg(s, default_field, str(a))
    render_profile_svg(s, default_field, str(b))
    assert a.read_bytes() == b.read_bytes()


def test_one_obstacle_one_disk():
    spec = ObstacleSpec(1.0, 0.1, 0.04, 1.0, 1, 0)
    field = ObstacleField(spec, np.array([[0.5, 0.2]]))
    root = _parse(render_profile_svg(State.zeros(TorusGrid(1, 16)), field))
    circles = root.findall(f".//{NS}circle")
    assert len(circles) == 1
    assert float(circles[0].get("r")) == pytest.approx(0.14 * 400, abs=1e-3)


def test_two_dimensional_rejected():
    spec = ObstacleSpec(1.0, 0.1, 0.04, 1.0, 2, 0)
    with pytest.raises(ContractError):
        render_profile_svg(State.zeros(TorusGrid(2, 8)), ObstacleField(spec, np.zeros((0, 3))))
