import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from isodisc.raster import RasterFormatError, atomic_write, encode_pnm, parse_pnm, read_pnm, write_pnm


@given(
    st.one_of(
        arrays(np.uint8, st.tuples(st.integers(1, 8), st.integers(1, 8))),
        arrays(np.uint8, st.tuples(st.integers(1, 8), st.integers(1, 8), st.just(3))),
    )
)
def test_round_trip(img):
    np.testing.assert_array_equal(parse_pnm(encode_pnm(img)), img)


def test_header_comments_and_whitespace():
    data = b"P5 # comment\n2\t# w\n 1\n255\n\x01\x02"
    np.testing.assert_array_equal(parse_pnm(data), [[1, 2]])


@pytest.mark.parametrize(
    "data, offset",
    [
        (b"P2\n1 1\n255\n0", 0),
        (b"P5\n2 x\n255\n", 5),
        (b"P5\n2 2\n300\n", 7),
        (b"P5\n2 2\n255\n\x00", 12),
        (b"P5\n2 2", 6),
    ],
)
def test_parse_errors_report_offset(data, offset):
    with pytest.raises(RasterFormatError) as err:
        parse_pnm(data)
    assert err.value.offset == offset
    assert f"byte {offset}" in str(err.value)


def test_encode_rejects_bad_shapes_and_values():
    with pytest.raises(ValueError):
        encode_pnm(np.zeros((2, 2, 2), np.uint8))
    with pytest.raises(ValueError):
        encode_pnm(np.full((2, 2), 300))


def test_write_read_file(tmp_path):
    img = np.arange(12, dtype=np.uint8).reshape(3, 4)
    path = tmp_path / "a.pgm"
    write_pnm(path, img)
    np.testing.assert_array_equal(read_pnm(path), img)
    assert [p.name for p in tmp_path.iterdir()] == ["a.pgm"]


def test_atomic_write_unwritable_path_names_it(tmp_path):
    target = tmp_path / "missing" / "x.csv"
    with pytest.raises(OSError, match="missing"):
        atomic_write(target, "data")
