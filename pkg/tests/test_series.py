import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rvstar.errors import ParseError, ShapeMismatch
from rvstar.estimate import ThresholdRule, extremogram, hill
from rvstar.models import ar1_positive, simulate
from rvstar.series import SeriesPath, ingest, parse_space_header
from rvstar.starspace import Euclidean, PathSup


def test_round_trip_keeps_estimates(tmp_path):
    path = simulate(ar1_positive(0.5, 1), 20_000, 12)
    target = tmp_path / "x.csv"
    path.to_csv(target)
    back = ingest(target)
    assert back.space == path.space
    assert np.array_equal(back.points, path.points)
    assert hill(back.moduli(), 200) == hill(path.moduli(), 200)
    rule = ThresholdRule(quantile=0.99)
    assert np.array_equal(extremogram(back, [1, 2], rule).values, extremogram(path, [1, 2], rule).values)


@given(arrays(float, (7, 3), elements=st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False)))
def test_csv_is_lossless(x):
    buf = io.StringIO()
    SeriesPath(x, Euclidean(3)).to_csv(buf)
    buf.seek(0)
    assert np.array_equal(ingest(buf).points, x)


def test_nan_row_is_located(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("x0,x1\n1,2\n3,4\nnan,5\n")
    with pytest.raises(ParseError) as info:
        ingest(f, Euclidean(2))
    assert info.value.row == 3
    assert "row 3" in str(info.value)


def test_unparseable_row(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("x0\n1\nabc\n")
    with pytest.raises(ParseError) as info:
        ingest(f, Euclidean(1))
    assert info.value.row == 2


def test_column_mismatch(tmp_path):
    f = tmp_path / "wide.csv"
    f.write_text("a,b,c\n1,2,3\n4,5,6\n")
    with pytest.raises(ShapeMismatch):
        ingest(f, Euclidean(2))


def test_space_from_header_and_override(tmp_path):
    path = SeriesPath(np.ones((3, 16)), PathSup(16))
    path.to_csv(tmp_path / "p.csv")
    assert ingest(tmp_path / "p.csv").space == PathSup(16)
    assert parse_space_header('# space = { kind = "euclidean", dim = 2 }') == Euclidean(2)
    with pytest.raises(ShapeMismatch):
        ingest(tmp_path / "p.csv", {"kind": "euclidean", "dim": 2})


def test_missing_space():
    with pytest.raises(ParseError):
        ingest(io.StringIO("x0\n1\n"))
