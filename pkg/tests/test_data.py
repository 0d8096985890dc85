import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from scdl import data
from scdl.data import CodeMatrix, HsiCube, LabelMap
from scdl.errors import (ClassTooSmall, DuplicateCoordinate, HeaderParse, IndexOutOfRange,
                         MissingFile, NonFiniteValue, OutOfBounds, ParseError, SizeMismatch)


def write_raw_cube(folder, h, w, b, floats, **extra):
    (folder / "c.bin").write_bytes(np.asarray(floats, dtype="<f4").tobytes())
    header = {"height": h, "width": w, "bands": b, "dtype": "f32",
              "interleave": "bsq", "data": "c.bin", **extra}
    (folder / "c.json").write_text(json.dumps(header))
    return folder / "c.json"


# -- cubes ---------------------------------------------------------------

def test_load_cube_layout(tmp_path):
    cube = data.load_cube(write_raw_cube(tmp_path, 2, 2, 1, [1, 2, 3, 4]))
    assert cube.shape == (2, 2) and cube.bands == 1
    assert cube.pixel(0, 0).tolist() == [1.0]
    assert cube.pixel(0, 1).tolist() == [2.0]
    assert cube.pixel(1, 1).tolist() == [4.0]


def test_band_sequential_order(tmp_path):
    # band plane 0 is 0..5, band plane 1 is 10..15
    floats = list(range(6)) + list(range(10, 16))
    cube = data.load_cube(write_raw_cube(tmp_path, 2, 3, 2, floats))
    assert cube.pixel(1, 2).tolist() == [5.0, 15.0]
    assert cube.spectra()[:, 4].tolist() == [4.0, 14.0]


def test_short_payload(tmp_path):
    with pytest.raises(SizeMismatch):
        data.load_cube(write_raw_cube(tmp_path, 2, 2, 1, [1, 2, 3]))


def test_nan_reports_flat_index(tmp_path):
    with pytest.raises(NonFiniteValue) as err:
        data.load_cube(write_raw_cube(tmp_path, 2, 2, 1, [1, 2, np.nan, 4]))
    assert err.value.index == 2


def test_missing_and_malformed_headers(tmp_path):
    with pytest.raises(MissingFile):
        data.load_cube(tmp_path / "nope.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(HeaderParse):
        data.load_cube(tmp_path / "bad.json")
    with pytest.raises(HeaderParse):
        data.load_cube(write_raw_cube(tmp_path, 2, 2, 1, [1, 2, 3, 4], dtype="f64"))


def test_band_mask_selects_bands(tmp_path):
    floats = np.arange(12, dtype=float)  # 2x2 pixels, 3 bands
    path = write_raw_cube(tmp_path, 2, 2, 3, floats, band_mask=[0, 2])
    cube = data.load_cube(path)
    assert cube.bands == 2
    assert cube.pixel(0, 1).tolist() == [1.0, 9.0]
    assert data.load_cube(path, apply_band_mask=False).bands == 3


def test_cube_roundtrip_bitwise(tmp_path, rng):
    values = rng.normal(size=(3, 4, 5)).astype(np.float32)
    data.save_cube(tmp_path / "x.json", HsiCube(values))
    back = data.load_cube(tmp_path / "x.json")
    assert back.values.tobytes() == values.tobytes()
    assert (tmp_path / "x.bin").stat().st_size == 4 * 3 * 4 * 5


@given(hnp.arrays(np.float32, hnp.array_shapes(min_dims=3, max_dims=3, max_side=5),
                  elements=st.floats(-1e6, 1e6, width=32)))
def test_cube_roundtrip_property(tmp_path_factory, values):
    folder = tmp_path_factory.mktemp("cube")
    data.save_cube(folder / "c.json", HsiCube(values))
    assert data.load_cube(folder / "c.json").values.tobytes() == values.tobytes()


# -- labels --------------------------------------------------------------

def test_load_labels(tmp_path):
    (tmp_path / "l.csv").write_text("row,col,class\n0,0,1\n0,1,2\n")
    labels = data.load_labels(tmp_path / "l.csv", (2, 2))
    assert len(labels) == 2 and labels.num_classes == 2


def test_label_errors(tmp_path):
    path = tmp_path / "l.csv"
    path.write_text("row,col,class\n0,0,1\n5,0,1\n")
    with pytest.raises(OutOfBounds) as err:
        data.load_labels(path, (2, 2))
    assert err.value.line == 3
    path.write_text("row,col,class\n0,0,1\n0,0,2\n")
    with pytest.raises(DuplicateCoordinate):
        data.load_labels(path, (2, 2))
    path.write_text("row,col,class\n0,zero,1\n")
    with pytest.raises(ParseError) as err:
        data.load_labels(path, (2, 2))
    assert err.value.line == 2


def make_labels(counts):
    classes = np.repeat(np.arange(1, len(counts) + 1), counts)
    n = len(classes)
    return LabelMap(np.arange(n), np.zeros(n, dtype=int), classes)


def test_split_sizes():
    train, test = data.split_labels(make_labels([100]), 0.1, seed=7)
    assert (len(train), len(test)) == (10, 90)
    train, _ = data.split_labels(make_labels([4, 2]), 0.5, seed=0)
    assert train.class_counts() == {1: 2, 2: 1}


def test_split_deterministic_and_small_class():
    labels = make_labels([30, 11, 5])
    a = data.split_labels(labels, 0.1, seed=3)
    b = data.split_labels(labels, 0.1, seed=3)
    assert np.array_equal(a[0].rows, b[0].rows) and np.array_equal(a[1].rows, b[1].rows)
    with pytest.raises(ClassTooSmall):
        data.split_labels(make_labels([5, 1]), 0.5, seed=0)


@given(st.lists(st.integers(2, 40), min_size=1, max_size=5),
       st.floats(0.01, 0.99), st.integers(0, 2**32 - 1))
def test_split_is_stratified_partition(counts, fraction, seed):
    labels = make_labels(counts)
    train, test = data.split_labels(labels, fraction, seed)
    assert sorted(np.concatenate([train.rows, test.rows]).tolist()) == list(range(len(labels)))
    for k, n in enumerate(counts, start=1):
        n_train = int(np.sum(train.classes == k))
        expected = min(max(math.ceil(fraction * n - 1e-9), 1), n - 1)
        assert n_train == expected
        assert np.sum(test.classes == k) == n - n_train


# -- dictionaries and codes ---------------------------------------------

def test_dictionary_roundtrip_and_layout(tmp_path):
    D = np.array([[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]])
    data.save_dictionary(tmp_path / "d.json", D)
    raw = np.frombuffer((tmp_path / "d.bin").read_bytes(), dtype="<f4")
    assert raw.tolist() == [1, 2, 3, 4, 5, 6]      # atom-major
    assert data.load_dictionary(tmp_path / "d.json").tobytes() == D.tobytes()


def test_codes_roundtrip(tmp_path, rng):
    Y = rng.normal(size=(4, 6)).astype(np.float32).astype(np.float64)
    Y[rng.random(Y.shape) < 0.5] = 0.0
    codes = CodeMatrix(Y)
    data.save_codes(tmp_path / "y.json", codes)
    back = data.load_codes(tmp_path / "y.json")
    assert back == codes
    header = json.loads((tmp_path / "y.json").read_text())
    assert header["nnz"] == np.count_nonzero(Y)


def test_codes_triplets_sorted():
    Y = np.array([[0.0, 2.0], [1.0, 3.0]])
    s, a, v = CodeMatrix(Y).triplets()
    assert list(zip(s.tolist(), a.tolist(), v.tolist())) == [(0, 1, 1.0), (1, 0, 2.0), (1, 1, 3.0)]


def test_empty_codes(tmp_path):
    data.save_codes(tmp_path / "e.json", CodeMatrix.empty(3, 5))
    back = data.load_codes(tmp_path / "e.json")
    assert back.nnz == 0 and back.dense.shape == (3, 5)


def test_code_atom_out_of_range(tmp_path):
    rec = np.zeros(1, dtype=data.CODE_RECORD)
    rec["sample"], rec["atom"], rec["value"] = 0, 2, 1.0
    (tmp_path / "y.bin").write_bytes(rec.tobytes())
    (tmp_path / "y.json").write_text(json.dumps(
        {"atoms": 2, "n_samples": 1, "nnz": 1, "data": "y.bin"}))
    with pytest.raises(IndexOutOfRange):
        data.load_codes(tmp_path / "y.json")


def test_duplicate_triplets_rejected():
    with pytest.raises(Exception):
        CodeMatrix.from_triplets(2, 2, [0, 0], [1, 1], [1.0, 2.0])


def test_indian_pines_mask_is_one_based():
    mask = data.indian_pines_band_mask()
    assert len(mask) == 200
    assert 102 in mask and 103 not in mask and 107 not in mask and 108 in mask
    assert 148 in mask and 149 not in mask and 162 not in mask and 163 in mask
    assert mask[-1] == 218
