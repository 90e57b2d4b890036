import json
import math
import os
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from critwave.errors import ConfigError
from critwave.grids import BoxGrid3D, RadialGrid
from critwave.scenarios import RunContext, Summary, dumps, jsonable, make_profile, parse_grid, parse_solver
from critwave.svg import line_chart


def test_jsonable_handles_numpy_and_nonfinite():
    obj = {"a": np.float64(1.5), "b": np.arange(3), "c": (np.bool_(True), np.int64(4)), "d": [math.nan, math.inf, -math.inf]}
    assert jsonable(obj) == {"a": 1.5, "b": [0, 1, 2], "c": [True, 4], "d": ["nan", "inf", "-inf"]}
    text = dumps({"z": 1, "a": 2})
    assert text.index('"a"') < text.index('"z"') and text.endswith("\n")


def test_rng_streams_are_keyed_and_stable(tmp_path):
    ctx = RunContext(tmp_path, seed=5)
    a = ctx.rng("family").normal(size=4)
    b = RunContext(tmp_path, seed=5).rng("family").normal(size=4)
    c = ctx.rng("other").normal(size=4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert isinstance(ctx.rng("x").bit_generator, np.random.Philox)


def test_map_preserves_order(tmp_path):
    ctx = RunContext(tmp_path, threads=4)
    assert ctx.map(lambda x: x * x, range(10)) == [x * x for x in range(10)]


@pytest.mark.parametrize("value,tol,op,ok", [
    (1.0, 2.0, "<=", True), (3.0, 2.0, "<=", False), (3.0, 2.0, ">", True), (2.0, 2.0, "<", False),
    (4.0, [3.2, 4.8], "in", True), (5.0, [3.2, 4.8], "in", False), (True, True, "is", True),
    (None, 1.0, "<=", False), (math.nan, 1.0, ">=", False),
])
def test_summary_check(tmp_path, value, tol, op, ok):
    s = Summary("x", {}, 0, out=tmp_path)
    assert s.check("n", "a", value, tol, op) is ok
    assert s.passed is ok


def test_summary_unknown_op(tmp_path):
    with pytest.raises(ValueError):
        Summary("x", {}, 0, out=tmp_path).check("n", "a", 1.0, 1.0, "~")


def test_parse_grid():
    assert parse_grid({"kind": "radial", "r_max": 4, "n": 64}) == RadialGrid(4.0, 64)
    assert parse_grid({"kind": "box", "half_width": 4, "m": 16}) == BoxGrid3D(4.0, 16)
    assert parse_grid({"kind": "radial", "r_max": 4, "n": 64}, {"n": 127}).n == 127
    for bad in ({"kind": "radial"}, {"kind": "tri"}, {"kind": "box", "m": 8}, "grid"):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def test_parse_solver_and_profiles():
    assert parse_solver({"cfl_safety": 0.25}).cfl_safety == 0.25
    with pytest.raises(ConfigError):
        parse_solver({"cfl_safety": 3.0})
    g = RadialGrid(4.0, 401)
    b = make_profile({"kind": "bump", "amplitude": 2.0, "radius": 1.0}, g, 3)
    assert b[0] == 2.0 and np.all(b[g.r >= 1.0] == 0.0)
    assert np.all(make_profile({"kind": "zero"}, g, 3) == 0.0)
    with pytest.raises(ConfigError):
        make_profile({"kind": "spline"}, g, 3)


def test_svg_is_wellformed_and_deterministic():
    x = np.linspace(0, 1, 50)
    series = {"a": (x, np.exp(-x)), "b": (x, np.full(50, np.nan))}
    s1 = line_chart(series, title="t & <x>", logy=True)
    assert s1 == line_chart(series, title="t & <x>", logy=True)
    root = ET.fromstring(s1)
    assert root.tag.endswith("svg")
    assert len([e for e in root.iter() if e.tag.endswith("polyline")]) == 1


def test_pure_python_backend_selected_by_env():
    env = dict(os.environ, CRITWAVE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import critwave._backend as b; print(b.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
