from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given

from torusflow import GridFunction, TorusGrid, lin_embed
from torusflow.serialization import (
    gridfunction_from_csv,
    gridfunction_from_json,
    gridfunction_to_csv,
    gridfunction_to_json,
    pwl_from_json,
    pwl_to_json,
    write_text,
)

from strategies import grid_functions


@given(grid_functions())
def test_json_roundtrip_is_bit_exact(u):
    back = gridfunction_from_json(gridfunction_to_json(u))
    assert back.grid == u.grid
    np.testing.assert_array_equal(back.values, u.values)


@given(grid_functions())
def test_csv_roundtrip_is_bit_exact(u):
    back = gridfunction_from_csv(gridfunction_to_csv(u), u.grid.n)
    assert back.grid == u.grid
    np.testing.assert_array_equal(back.values, u.values)


def test_json_envelope_layout():
    u = GridFunction(TorusGrid(2, 2), np.array([[1.0, 2.0], [3.0, 4.0]]))
    d = json.loads(gridfunction_to_json(u))
    assert d == {"n": 2, "k": 2, "values": [1.0, 2.0, 3.0, 4.0]}
    assert gridfunction_to_csv(u).splitlines()[:2] == ["index,value", "0,1"]


def test_pwl_envelope_is_tagged_and_not_confused_with_nodal():
    u = GridFunction(TorusGrid(1, 4), [0.0, 1.0, 0.5, -1.0])
    text = pwl_to_json(lin_embed(u))
    assert json.loads(text)["representation"] == "pwl"
    back = pwl_from_json(text)
    np.testing.assert_array_equal(back.nodal.values, u.values)
    with pytest.raises(ValueError):
        gridfunction_from_json(text)
    with pytest.raises(ValueError):
        pwl_from_json(gridfunction_to_json(u))


def test_bad_inputs():
    with pytest.raises(ValueError):
        gridfunction_from_json('{"n": 1, "values": [1, 2]}')
    with pytest.raises(ValueError):
        gridfunction_from_csv("index,value\n0,1\n0,2\n", 1)
    with pytest.raises(ValueError):
        gridfunction_from_csv("index,value\n0,1\n1,2\n2,3\n", 2)


def test_write_text_creates_parents(tmp_path):
    target = tmp_path / "a" / "b" / "u.csv"
    write_text(target, "index,value\n")
    assert target.read_text() == "index,value\n"
