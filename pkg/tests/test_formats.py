import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from courtreg.formats import (HEADER_SIZE, BadMagicError, FormatError, NonFiniteError, SizeMismatchError,
                              UnsupportedDtypeError, UnsupportedVersionError, dumps_json, load_homography,
                              load_layout, read_tensor, save_homography, save_layout, write_tensor)
from courtreg.heatmaps import ClassMap, HeatmapTensor
from courtreg.court import KeypointLayout


def test_header_layout():
    t = HeatmapTensor(np.arange(4, dtype=np.float32).reshape(1, 2, 2))
    b = write_tensor(t)
    assert HEADER_SIZE == 24
    assert b[:4] == b"KCHM"
    assert struct.unpack("<I", b[4:8]) == (1,)
    assert b[8] == 0 and b[9:12] == b"\0\0\0"
    assert struct.unpack("<3I", b[12:24]) == (1, 2, 2)
    assert np.frombuffer(b[24:], "<f4").tolist() == [0, 1, 2, 3]


def test_float_roundtrip_small():
    t = HeatmapTensor(np.array([[[0.1, -2.5], [3e-30, 7.0]]], dtype=np.float32))
    back = read_tensor(write_tensor(t))
    assert back.scores.tobytes() == t.scores.tobytes()


@settings(max_examples=50, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 4), st.integers(1, 6), st.integers(1, 6)),
              elements=st.floats(width=32, allow_nan=False, allow_infinity=False)))
def test_float_roundtrip(a):
    back = read_tensor(write_tensor(HeatmapTensor(a)))
    assert back.scores.tobytes() == a.tobytes()
    assert write_tensor(back) == write_tensor(HeatmapTensor(a))


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint16, st.tuples(st.integers(1, 8), st.integers(1, 8))))
def test_label_roundtrip(a):
    back = read_tensor(write_tensor(ClassMap(a.astype(np.int64))))
    assert isinstance(back, ClassMap)
    np.testing.assert_array_equal(back.labels, a)


def test_declared_payload_size():
    # 960 x 540 input at stride 4, 94 classes
    header = struct.pack("<4sIB3s3I", b"KCHM", 1, 0, b"\0\0\0", 94, 135, 240)
    with pytest.raises(SizeMismatchError, match="12182400"):
        read_tensor(header)
    assert 94 * 135 * 240 * 4 == 12_182_400


def good_bytes():
    return write_tensor(HeatmapTensor(np.ones((2, 3, 3), np.float32)))


def test_truncated_payload():
    with pytest.raises(SizeMismatchError):
        read_tensor(good_bytes()[:-1])


def test_trailing_bytes():
    with pytest.raises(SizeMismatchError):
        read_tensor(good_bytes() + b"\0")


def test_short_header():
    with pytest.raises(SizeMismatchError):
        read_tensor(b"KCHM")


def test_bad_magic():
    b = bytearray(good_bytes())
    b[:4] = b"KCHX"
    with pytest.raises(BadMagicError):
        read_tensor(bytes(b))


def test_bad_version():
    b = bytearray(good_bytes())
    b[4:8] = struct.pack("<I", 2)
    with pytest.raises(UnsupportedVersionError):
        read_tensor(bytes(b))


def test_bad_dtype():
    b = bytearray(good_bytes())
    b[8] = 7
    with pytest.raises(UnsupportedDtypeError):
        read_tensor(bytes(b))


def test_reserved_nonzero():
    b = bytearray(good_bytes())
    b[10] = 1
    with pytest.raises(FormatError):
        read_tensor(bytes(b))


def test_nan_payload():
    b = bytearray(good_bytes())
    b[HEADER_SIZE:HEADER_SIZE + 4] = struct.pack("<f", float("nan"))
    with pytest.raises(NonFiniteError):
        read_tensor(bytes(b))
    with pytest.raises(NonFiniteError):
        write_tensor(np.full((1, 1, 1), np.inf, np.float32))


def test_error_classes_are_value_errors():
    for cls in (BadMagicError, UnsupportedVersionError, SizeMismatchError, NonFiniteError):
        assert issubclass(cls, FormatError) and issubclass(cls, ValueError)


def test_homography_json_roundtrip(tmp_path, views):
    for h in views:
        save_homography(tmp_path / "h.json", h)
        back = load_homography(tmp_path / "h.json")
        assert np.array_equal(back.h, h.h)
    doc = json.loads((tmp_path / "h.json").read_text())
    assert doc["direction"] == "court_to_image" and doc["units"] == "cm_to_px"
    assert doc["h"][2][2] == 1.0


def test_malformed_homography(tmp_path):
    (tmp_path / "h.json").write_text('{"h": [[1, 0], [0, 1]]}')
    with pytest.raises(FormatError):
        load_homography(tmp_path / "h.json")
    (tmp_path / "h.json").write_text("{not json")
    with pytest.raises(FormatError):
        load_homography(tmp_path / "h.json")


def test_layout_json_roundtrip(tmp_path, layout):
    save_layout(tmp_path / "l.json", layout)
    assert load_layout(tmp_path / "l.json") == layout
    doc = json.loads((tmp_path / "l.json").read_text())
    assert set(doc) == {"template", "spec", "entries"}
    assert doc["entries"][91] == {"id": 91, "xy_cm": None, "role": "basket", "usable": False}
    assert KeypointLayout.from_dict(json.loads(dumps_json(layout.to_dict()))) == layout


@settings(max_examples=200)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_json_doubles_exact(x):
    assert json.loads(dumps_json({"v": x}))["v"] == x
