"""Hyperspectral cubes, label maps, splits and on-disk formats.

All binary payloads are little-endian. A file set is a small JSON header that
points (by relative path) to a raw payload next to it:

* cube        ``{height, width, bands, dtype: "f32", interleave: "bsq", data, band_mask?}``
                payload: ``height*width*bands`` float32, one full band plane
                (row-major) after another.
* dictionary  ``{bands, atoms, data}``; payload float32, atom-major.
* codes       ``{atoms, n_samples, nnz, data}``; payload ``nnz`` records of
                ``(u32 sample, u32 atom, f32 value)`` sorted by (sample, atom).

Values are stored in 32 bits; everything in memory is float64.
"""
import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (ClassTooSmall, DataError, DuplicateCoordinate,
                     HeaderParse, IndexOutOfRange, InvalidArgument,
                     MissingFile, NonFiniteValue, OutOfBounds, ParseError,
                     SizeMismatch)

CODE_RECORD = np.dtype([("sample", "<u4"), ("atom", "<u4"), ("value", "<f4")])

# Water-absorption and noisy bands of the 220-band Indian Pines scene,
# numbered from 1 as in the usual band tables.
INDIAN_PINES_NOISY_BANDS = tuple(range(104, 109)) + tuple(range(150, 164)) + (220,)


def indian_pines_band_mask(n_bands=220, noisy=INDIAN_PINES_NOISY_BANDS):
    """0-based indices of the bands to keep, for a cube header's ``band_mask``.

    ``noisy`` is read as 1-based, so band 104 is payload index 103.
    """
    drop = {b - 1 for b in noisy}
    return [i for i in range(n_bands) if i not in drop]


@dataclass
class HsiCube:
    """Reflectance volume of shape ``(height, width, bands)``.

    ``band_mask`` records which payload bands were retained (0-based payload
    indices); ``None`` means every band was kept.
    """

    values: np.ndarray
    band_mask: list = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 3:
            raise InvalidArgument("cube values must be (height, width, bands)")
        if not np.all(np.isfinite(self.values)):
            bad = int(np.flatnonzero(~np.isfinite(self.values.transpose(2, 0, 1).ravel()))[0])
            raise NonFiniteValue(bad)

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def bands(self):
        return self.values.shape[2]

    @property
    def shape(self):
        return self.values.shape[:2]

    @property
    def n_pixels(self):
        return self.height * self.width

    def spectra(self, rows=None, cols=None):
        """Return pixel spectra as a ``bands x n`` float64 matrix.

        Without arguments all pixels are returned in row-major order, i.e.
        column ``r * width + c`` holds pixel ``(r, c)``.
        """
        if rows is None:
            flat = self.values.reshape(-1, self.bands)
        else:
            flat = self.values[np.asarray(rows), np.asarray(cols)]
        return np.ascontiguousarray(flat.T, dtype=np.float64)

    def pixel(self, row, col):
        return self.values[row, col].astype(np.float64)


@dataclass
class LabelMap:
    """Labelled pixel coordinates. Class ids start at 1."""

    rows: np.ndarray
    cols: np.ndarray
    classes: np.ndarray
    num_classes: int = None

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64).reshape(-1)
        self.cols = np.asarray(self.cols, dtype=np.int64).reshape(-1)
        self.classes = np.asarray(self.classes, dtype=np.int64).reshape(-1)
        if not (len(self.rows) == len(self.cols) == len(self.classes)):
            raise InvalidArgument("rows, cols and classes must have equal length")
        if len(self.classes) and self.classes.min() < 1:
            raise InvalidArgument("class ids must be >= 1")
        if self.num_classes is None:
            self.num_classes = int(self.classes.max()) if len(self.classes) else 0

    def __len__(self):
        return len(self.classes)

    def pixel_indices(self, width):
        return self.rows * width + self.cols

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return LabelMap(self.rows[idx], self.cols[idx], self.classes[idx],
                        self.num_classes)

    def class_counts(self):
        return {int(c): int(n) for c, n in zip(*np.unique(self.classes, return_counts=True))}


@dataclass
class CodeMatrix:
    """Sparse codes, one column per sample, held densely as ``atoms x n_samples``."""

    dense: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.dense = np.asarray(self.dense, dtype=np.float64)
        if self.dense.ndim != 2:
            raise InvalidArgument("code matrix must be 2-D (atoms x samples)")

    @property
    def atoms(self):
        return self.dense.shape[0]

    @property
    def n_samples(self):
        return self.dense.shape[1]

    @property
    def nnz(self):
        return int(np.count_nonzero(self.dense))

    @classmethod
    def empty(cls, atoms, n_samples=0):
        return cls(np.zeros((atoms, n_samples)))

    @classmethod
    def from_triplets(cls, atoms, n_samples, sample, atom, value):
        sample = np.asarray(sample, dtype=np.int64)
        atom = np.asarray(atom, dtype=np.int64)
        if len(sample) and (sample.min() < 0 or sample.max() >= n_samples):
            raise IndexOutOfRange("sample index out of range")
        if len(atom) and (atom.min() < 0 or atom.max() >= atoms):
            raise IndexOutOfRange("atom index out of range")
        keys = sample * atoms + atom
        if len(np.unique(keys)) != len(keys):
            raise DataError("duplicate (sample, atom) pair in codes")
        dense = np.zeros((atoms, n_samples))
        dense[atom, sample] = np.asarray(value, dtype=np.float64)
        return cls(dense)

    def triplets(self):
        """Nonzero entries as ``(sample, atom, value)`` arrays sorted by (sample, atom)."""
        sample, atom = np.nonzero(self.dense.T)
        return sample, atom, self.dense[atom, sample]

    def columns(self, idx):
        return self.dense[:, np.asarray(idx)]

    def __eq__(self, other):
        if not isinstance(other, CodeMatrix):
            return NotImplemented
        return (self.dense.shape == other.dense.shape
                and self.dense.tobytes() == other.dense.tobytes())


# -- low-level helpers ----------------------------------------------------

def _read_header(path, required):
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFile(f"no such file: {path}")
    try:
        with open(path) as fh:
            header = json.load(fh)
    except (OSError, ValueError) as exc:
        raise HeaderParse(f"{path}: {exc}") from exc
    if not isinstance(header, dict):
        raise HeaderParse(f"{path}: header must be a JSON object")
    missing = [k for k in required if k not in header]
    if missing:
        raise HeaderParse(f"{path}: missing keys {missing}")
    for key in required:
        if key != "data" and key not in ("dtype", "interleave"):
            val = header[key]
            if not isinstance(val, int) or isinstance(val, bool) or val < 0:
                raise HeaderParse(f"{path}: '{key}' must be a non-negative integer")
    if not isinstance(header["data"], str):
        raise HeaderParse(f"{path}: 'data' must be a relative path string")
    return header


def _payload_path(header_path, header):
    return os.path.join(os.path.dirname(os.path.abspath(header_path)), header["data"])


def _read_payload(header_path, header, nbytes):
    data_path = _payload_path(header_path, header)
    if not os.path.isfile(data_path):
        raise MissingFile(f"no such file: {data_path}")
    size = os.path.getsize(data_path)
    if size != nbytes:
        raise SizeMismatch(f"{data_path}: expected {nbytes} bytes, found {size}")
    with open(data_path, "rb") as fh:
        return fh.read()


def _check_finite(values):
    bad = np.flatnonzero(~np.isfinite(values))
    if len(bad):
        raise NonFiniteValue(bad[0])


def _write_pair(header_path, header, payload):
    header_path = os.fspath(header_path)
    folder = os.path.dirname(os.path.abspath(header_path))
    os.makedirs(folder, exist_ok=True)
    with open(os.path.join(folder, header["data"]), "wb") as fh:
        fh.write(payload)
    with open(header_path, "w") as fh:
        json.dump(header, fh, indent=1)
        fh.write("\n")


def _default_data_name(header_path):
    base = os.path.basename(os.fspath(header_path))
    stem = base[:-5] if base.endswith(".json") else base
    return stem + ".bin"


# -- cubes ---------------------------------------------------------------

def load_cube(header_path, apply_band_mask=True):
    header = _read_header(header_path, ("height", "width", "bands", "dtype",
                                        "interleave", "data"))
    if header["dtype"] != "f32":
        raise HeaderParse(f"unsupported dtype {header['dtype']!r}")
    if header["interleave"] != "bsq":
        raise HeaderParse(f"unsupported interleave {header['interleave']!r}")
    h, w, b = header["height"], header["width"], header["bands"]
    raw = _read_payload(header_path, header, 4 * h * w * b)
    flat = np.frombuffer(raw, dtype="<f4")
    _check_finite(flat)
    values = flat.reshape(b, h, w).transpose(1, 2, 0)

    band_mask = header.get("band_mask")
    if band_mask is not None:
        if (not isinstance(band_mask, list)
                or not all(isinstance(i, int) and 0 <= i < b for i in band_mask)
                or len(set(band_mask)) != len(band_mask)):
            raise HeaderParse("band_mask must list distinct band indices in [0, bands)")
        if apply_band_mask:
            values = values[:, :, sorted(band_mask)]
    return HsiCube(values.astype(np.float32), band_mask)


def save_cube(header_path, cube, data_name=None):
    data_name = data_name or _default_data_name(header_path)
    header = {"height": cube.height, "width": cube.width, "bands": cube.bands,
              "dtype": "f32", "interleave": "bsq", "data": data_name}
    if cube.band_mask is not None:
        header["band_mask"] = list(map(int, cube.band_mask))
    payload = np.ascontiguousarray(cube.values.transpose(2, 0, 1), dtype="<f4").tobytes()
    _write_pair(header_path, header, payload)


# -- labels --------------------------------------------------------------

def load_labels(csv_path, shape=None):
    """Read ``row,col,class_id`` lines (one header line) into a :class:`LabelMap`.

    ``shape`` is the ``(height, width)`` of the cube the labels refer to; when
    given, coordinates are bounds-checked. Line numbers in errors are 1-based
    file lines.
    """
    csv_path = os.fspath(csv_path)
    if not os.path.isfile(csv_path):
        raise MissingFile(f"no such file: {csv_path}")
    rows, cols, classes = [], [], []
    seen = set()
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, rec in enumerate(reader, start=1):
            if lineno == 1 or not rec or all(not f.strip() for f in rec):
                continue
            try:
                r, c, k = (int(f) for f in rec)
            except ValueError:
                raise ParseError(lineno, f"expected three integers, got {rec!r}") from None
            if k < 1 or r < 0 or c < 0:
                raise ParseError(lineno, "row/col must be >= 0 and class_id >= 1")
            if shape is not None and (r >= shape[0] or c >= shape[1]):
                raise OutOfBounds(lineno, f"({r}, {c}) outside {shape[0]}x{shape[1]} cube")
            if (r, c) in seen:
                raise DuplicateCoordinate(lineno, f"({r}, {c}) listed twice")
            seen.add((r, c))
            rows.append(r)
            cols.append(c)
            classes.append(k)
    return LabelMap(rows, cols, classes)


def save_labels(csv_path, labels, header=("row", "col", "class")):
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(zip(labels.rows.tolist(), labels.cols.tolist(),
                             labels.classes.tolist()))


def split_labels(labels, fraction, seed):
    """Stratified random split into (train, test).

    Each class contributes ``ceil(fraction * count)`` samples to train, clamped
    so that both sides keep at least one sample.
    """
    if not 0.0 < fraction < 1.0:
        raise InvalidArgument("fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for k in np.unique(labels.classes):
        members = np.flatnonzero(labels.classes == k)
        if len(members) < 2:
            raise ClassTooSmall(k)
        # guard against e.g. 0.1 * 30 == 3.0000000000000004
        n_train = math.ceil(fraction * len(members) - 1e-9)
        n_train = min(max(n_train, 1), len(members) - 1)
        perm = rng.permutation(members)
        train_idx.append(np.sort(perm[:n_train]))
        test_idx.append(np.sort(perm[n_train:]))
    train_idx = np.concatenate(train_idx) if train_idx else np.zeros(0, np.int64)
    test_idx = np.concatenate(test_idx) if test_idx else np.zeros(0, np.int64)
    return labels.subset(train_idx), labels.subset(test_idx)


# -- dictionaries and codes ---------------------------------------------

def save_dictionary(path, D, data_name=None):
    D = np.asarray(D)
    bands, atoms = D.shape
    header = {"bands": bands, "atoms": atoms, "data": data_name or _default_data_name(path)}
    _write_pair(path, header, np.ascontiguousarray(D.T, dtype="<f4").tobytes())


def load_dictionary(path):
    """Return the stored dictionary as a float64 ``bands x atoms`` array."""
    header = _read_header(path, ("bands", "atoms", "data"))
    bands, atoms = header["bands"], header["atoms"]
    flat = np.frombuffer(_read_payload(path, header, 4 * bands * atoms), dtype="<f4")
    _check_finite(flat)
    return flat.reshape(atoms, bands).T.astype(np.float64)


def save_codes(path, codes, data_name=None):
    sample, atom, value = codes.triplets()
    value32 = value.astype("<f4")
    keep = value32 != 0
    rec = np.zeros(int(keep.sum()), dtype=CODE_RECORD)
    rec["sample"], rec["atom"], rec["value"] = sample[keep], atom[keep], value32[keep]
    header = {"atoms": codes.atoms, "n_samples": codes.n_samples, "nnz": len(rec),
              "data": data_name or _default_data_name(path)}
    _write_pair(path, header, rec.tobytes())


def load_codes(path):
    header = _read_header(path, ("atoms", "n_samples", "nnz", "data"))
    raw = _read_payload(path, header, CODE_RECORD.itemsize * header["nnz"])
    rec = np.frombuffer(raw, dtype=CODE_RECORD)
    _check_finite(rec["value"])
    if np.any(rec["atom"] >= header["atoms"]):
        raise IndexOutOfRange(f"atom index >= atoms ({header['atoms']})")
    if np.any(rec["sample"] >= header["n_samples"]):
        raise IndexOutOfRange(f"sample index >= n_samples ({header['n_samples']})")
    return CodeMatrix.from_triplets(header["atoms"], header["n_samples"],
                                    rec["sample"], rec["atom"],
                                    rec["value"].astype(np.float64))
