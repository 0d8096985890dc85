"""Simulated multispectral measurements by band binning, and coding them
against an HSI-resolution dictionary."""
import enum
import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, InvalidBinCount, RangeOutOfBounds
from .learning import Mode, RegSchedule
from .solvers import DEFAULT_CONFIG, MFOCUSS, code_groups, code_samples


class Coverage(enum.Enum):
    LOWER_HALF = "lower_half"
    FULL = "full"


@dataclass(frozen=True)
class BandBinner:
    """Sums the bands of each half-open ``(start, end)`` range."""

    n_bands: int
    ranges: tuple

    def __post_init__(self):
        ranges = tuple((int(s), int(e)) for s, e in self.ranges)
        object.__setattr__(self, "ranges", ranges)
        last = 0
        for s, e in ranges:
            if not (0 <= s < e <= self.n_bands) or s < last:
                raise RangeOutOfBounds(
                    f"bin [{s}, {e}) invalid for {self.n_bands} bands "
                    "(ranges must be ascending, disjoint and non-empty)")
            last = e

    @property
    def n_bins(self):
        return len(self.ranges)

    def matrix(self):
        M = np.zeros((self.n_bins, self.n_bands))
        for i, (s, e) in enumerate(self.ranges):
            M[i, s:e] = 1.0
        return M

    def to_dict(self):
        return {"n_bands": self.n_bands, "ranges": [list(r) for r in self.ranges]}

    @classmethod
    def from_dict(cls, obj):
        return cls(int(obj["n_bands"]), tuple(tuple(r) for r in obj["ranges"]))

    @classmethod
    def identity(cls, n_bands):
        return cls(n_bands, tuple((i, i + 1) for i in range(n_bands)))


def save_binner(path, binner):
    with open(path, "w") as fh:
        json.dump(binner.to_dict(), fh)


def load_binner(path):
    with open(path) as fh:
        return BandBinner.from_dict(json.load(fh))


def make_binner(n_bands, n_bins, coverage=Coverage.FULL):
    """Equal-width bins over the lower half or the full band range.

    Remainder bands are added to the last bin.
    """
    coverage = Coverage(coverage)
    covered = n_bands // 2 if coverage is Coverage.LOWER_HALF else n_bands
    if n_bins < 1 or n_bins > covered:
        raise InvalidBinCount(f"cannot make {n_bins} bins over {covered} bands")
    width = covered // n_bins
    edges = [i * width for i in range(n_bins)] + [covered]
    return BandBinner(n_bands, tuple(zip(edges[:-1], edges[1:])))


def apply_binner(binner, spectra):
    """Bin ``spectra`` (``bands x n`` or a single spectrum) into ``bins x n``."""
    X = np.asarray(spectra, dtype=np.float64)
    if X.shape[0] != binner.n_bands:
        raise RangeOutOfBounds(
            f"binner expects {binner.n_bands} bands, data has {X.shape[0]}")
    return np.stack([X[s:e].sum(axis=0) for s, e in binner.ranges])


def code_msi(D, binner, Z, mode, partition=None, schedule=None, gamma=1.0,
             nonneg=None, config=DEFAULT_CONFIG, solver=MFOCUSS, n_jobs=1,
             code_rtol=1e-4, code_max_iter=1000):
    """Sparse-code binned samples ``Z`` against the binned dictionary.

    The effective operator ``binner(D)`` is used as is; its columns are not
    renormalised. SDL codes are nonnegative by default; CDL and SCDL codes
    are unconstrained. ``code_rtol`` and ``code_max_iter`` are passed to the lasso as
    ``data_rtol`` and ``max_iter``.
    """
    mode = Mode(mode)
    D_eff = apply_binner(binner, D)
    Z = np.asarray(Z, dtype=np.float64)
    if mode is Mode.SCDL:
        if partition is None:
            raise InvalidArgument("SCDL coding needs a group partition")
        gammas = (schedule or RegSchedule()).gammas(partition)
        return code_groups(D_eff, Z, partition.groups, gammas, config, solver, n_jobs)
    if nonneg is None:
        nonneg = mode is Mode.SDL
    return code_samples(D_eff, Z, gamma, nonneg=nonneg, n_jobs=n_jobs,
                        data_rtol=code_rtol, max_iter=code_max_iter)
