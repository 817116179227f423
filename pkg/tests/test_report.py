import json
import math
from pathlib import Path

import jsonschema
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sphere_bubbling import report

ROOT = Path(__file__).resolve().parents[1]


@given(x=st.floats(allow_nan=False, allow_infinity=False))
def test_float_round_trip_is_exact(x):
    assert json.loads(report.dumps({"x": x}))["x"] == x


@given(xs=st.lists(st.floats(allow_nan=False, allow_infinity=False), max_size=8))
def test_list_round_trip(xs):
    assert json.loads(report.dumps(xs)) == xs


def test_non_finite_become_null():
    out = json.loads(report.dumps({"a": math.inf, "b": -math.inf, "c": math.nan, "d": [1.0, math.nan]}))
    assert out == {"a": None, "b": None, "c": None, "d": [1.0, None]}


def test_numpy_and_objects():
    class Thing:
        def to_dict(self):
            return {"v": np.float64(0.1)}

    text = report.dumps({"arr": np.array([1.0, 2.5]), "i": np.int64(3), "b": np.bool_(True),
                         "t": Thing(), "none": None, "tuple": (1, "x")})
    assert json.loads(text) == {"arr": [1.0, 2.5], "i": 3, "b": True, "t": {"v": 0.1},
                                "none": None, "tuple": [1, "x"]}
    assert "0.10000000000000001" in text  # 17 significant digits
    with pytest.raises(TypeError):
        report.dumps({"bad": object()})


def test_integral_floats_keep_a_decimal_point():
    assert report.dumps(2.0).strip() == "2.0"
    assert report.dumps(1e300).strip() == "1.0000000000000001e+300"


def test_dumps_is_deterministic():
    obj = {"b": [0.1, 0.2], "a": {"z": 1, "y": [{"k": 1.5}]}}
    assert report.dumps(obj) == report.dumps(json.loads(report.dumps(obj)))


def test_schema_accepts_minimal_report():
    rep = report.make_report("analyze", {}, "ok", 0, {"critical_points": []})
    report.validate_report(rep)


@pytest.mark.parametrize("patch", [{"status": "fine"}, {"exit_code": 7}, {"command": "run"},
                                   {"extra": 1}, {"results": {"euler_checksum": 1.5}}])
def test_schema_rejects_malformed(patch):
    rep = report.make_report("analyze", {}, "ok", 0, {})
    rep.update(patch)
    with pytest.raises(jsonschema.ValidationError):
        report.validate_report(rep)


def test_docs_schema_matches_package_schema():
    doc = json.loads((ROOT / "docs" / "report.schema.json").read_text(encoding="utf-8"))
    assert doc == report.load_schema()


def test_write_json(tmp_path):
    p = report.write_json({"x": 1.0}, tmp_path / "sub" / "r.json")
    assert json.loads(p.read_text()) == {"x": 1.0}
