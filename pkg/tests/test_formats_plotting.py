import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpmisspec.designs import gen_halton
from gpmisspec.errors import DomainError
from gpmisspec.experiments import RateFitReport
from gpmisspec.formats import (
    RunManifest,
    dumps_json,
    fmt,
    read_data,
    read_design,
    read_points,
    write_csv,
    write_data,
    write_points,
)
from gpmisspec.plotting import emit_svg


@settings(max_examples=300)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_roundtrips(x):
    assert float(fmt(x)) == x


def test_fmt_types():
    assert fmt(3) == "3"
    assert fmt(np.int64(7)) == "7"
    assert fmt(float("nan")) == "nan"
    assert fmt(True) == "true"


def test_points_roundtrip(tmp_path):
    h = gen_halton(3, 20)
    p = tmp_path / "h.txt"
    write_points(p, h)
    assert p.read_text().splitlines()[0] == "# d=3 n=20"
    assert np.array_equal(read_points(p), h.points)
    assert read_design(p).provenance == "user-supplied"


def test_points_header_mismatch(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("# d=1 n=3\n0.1\n0.2\n")
    with pytest.raises(DomainError):
        read_points(p)
    p.write_text("0.1 0.2\n0.3\n")
    with pytest.raises(DomainError):
        read_points(p)
    p.write_text("0.1\nabc\n")
    with pytest.raises(DomainError):
        read_points(p)


def test_data_roundtrip(tmp_path):
    v = np.random.default_rng(0).standard_normal(10)
    p = tmp_path / "y.txt"
    write_data(p, v)
    assert np.array_equal(read_data(p), v)


def test_csv(tmp_path):
    p = tmp_path / "t.csv"
    write_csv(p, ["n", "v"], [[1, 0.1], [2, 1 / 3]])
    lines = p.read_text().splitlines()
    assert lines == ["n,v", "1,0.10000000000000001", "2,0.33333333333333331"]
    assert float(lines[2].split(",")[1]) == 1 / 3


def test_json_nan_becomes_null():
    assert json.loads(dumps_json({"a": float("nan"), "b": np.float64(2.5)})) == {"a": None, "b": 2.5}


def test_manifest(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    inp = tmp_path / "in.txt"
    inp.write_text("0.5\n")
    out = tmp_path / "out.csv"
    out.write_text("n\n1\n")
    m = RunManifest("design stats", {"resolution": None}, ["design", "stats"], "0.1.0", seed=None)
    m.add_input(inp)
    m.add_output(out)
    written = m.finalize()
    data = json.loads(open(written[0]).read())
    assert data["started"] == "1970-01-01T00:00:00+00:00"
    assert data["inputs"][str(inp)] and data["outputs"][str(out)]
    assert data["version"] == "0.1.0"


def _report(slope=2.0, theory=2.0):
    sizes = (32, 64, 128, 256)
    values = tuple(3.0 * n**slope for n in sizes)
    return RateFitReport({"true": "a", "model": "b", "d": 1}, sizes, values, slope, np.log(3.0), 1.0,
                         theory, 0.3, True, True, slope)


def test_svg_legend_and_determinism(tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    emit_svg(_report(), a)
    emit_svg(_report(), b)
    text = a.read_text()
    assert "fit slope 2.00" in text and "theory slope 2.00" in text
    assert a.read_bytes() == b.read_bytes()
    assert "<script" not in text


def test_svg_without_theory(tmp_path):
    p = tmp_path / "c.svg"
    emit_svg(_report(theory=None), p)
    assert "theory slope" not in p.read_text()


def test_svg_needs_three_points(tmp_path):
    rep = RateFitReport({}, (32, 64), (1.0, 2.0), 1.0, 0.0, 1.0, 1.0, 0.3, True, True, 1.0)
    with pytest.raises(DomainError):
        emit_svg(rep, tmp_path / "d.svg")
