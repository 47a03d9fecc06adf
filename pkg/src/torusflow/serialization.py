"""Flat-file formats for grid functions and piecewise-linear fields.

JSON envelope: ``{"n": .., "k": .., "values": [...]}`` with values in
row-major node order; piecewise-linear fields add
``"representation": "pwl"``. CSV: header ``index,value`` and one row per
node. Floats are written with 17 significant digits (CSV) or Python's
shortest round-trip repr (JSON), so reading back is bit-exact.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Union

import numpy as np

from .calculus import GridFunction
from .grid import TorusGrid

PathLike = Union[str, Path]


def gridfunction_to_dict(u: GridFunction, representation: str | None = None) -> dict:
    out = {"n": u.grid.n, "k": u.grid.k, "values": [float(v) for v in u.flat]}
    if representation is not None:
        out["representation"] = representation
    return out


def gridfunction_from_dict(d: dict) -> GridFunction:
    try:
        grid = TorusGrid(int(d["n"]), int(d["k"]))
        values = np.asarray(d["values"], dtype=float)
    except KeyError as exc:
        raise ValueError(f"grid function envelope is missing field {exc}") from None
    return GridFunction(grid, values)


def gridfunction_to_json(u: GridFunction) -> str:
    return json.dumps(gridfunction_to_dict(u))


def gridfunction_from_json(text: str) -> GridFunction:
    d = json.loads(text)
    if d.get("representation", "nodal") == "pwl":
        raise ValueError("envelope holds a piecewise-linear field; use pwl_from_json")
    return gridfunction_from_dict(d)


def gridfunction_to_csv(u: GridFunction) -> str:
    buf = io.StringIO()
    buf.write("index,value\n")
    for i, v in enumerate(u.flat):
        buf.write(f"{i},{format(float(v), '.17g')}\n")
    return buf.getvalue()


def gridfunction_from_csv(text: str, n: int) -> GridFunction:
    """Rows must list every node index once; ``n`` fixes the dimension."""
    rows = list(csv.DictReader(io.StringIO(text)))
    size = len(rows)
    k = round(size ** (1.0 / n))
    if k**n != size:
        raise ValueError(f"{size} rows do not form a k^{n} lattice")
    values = np.empty(size)
    seen = np.zeros(size, dtype=bool)
    for row in rows:
        i = int(row["index"])
        if not 0 <= i < size or seen[i]:
            raise ValueError(f"bad or repeated node index {i}")
        seen[i] = True
        values[i] = float(row["value"])
    return GridFunction(TorusGrid(n, k), values)


def pwl_to_json(field) -> str:
    """``field`` is a PiecewiseLinearField; its nodal values are stored."""
    return json.dumps(gridfunction_to_dict(field.nodal, representation="pwl"))


def pwl_from_json(text: str):
    from .interp import PiecewiseLinearField

    d = json.loads(text)
    if d.get("representation") != "pwl":
        raise ValueError("envelope is not tagged as a piecewise-linear field")
    return PiecewiseLinearField(gridfunction_from_dict(d))


def write_text(path: PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
