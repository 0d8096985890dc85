"""Contextual groups (non-overlapping patches) and window-moment features."""
import enum
from dataclasses import dataclass

import numpy as np

from .errors import EmptyCenters, EvenWindow, InvalidPatchWidth


class Moments(enum.Enum):
    MEAN = "mean"
    MEAN_STD = "mean_std"


@dataclass
class GroupPartition:
    """Partition of the ``height * width`` pixel indices into rectangular groups.

    Pixel ``(r, c)`` has index ``r * width + c``.
    """

    groups: list
    patch_width: int
    height: int
    width: int

    def __len__(self):
        return len(self.groups)

    @property
    def n_pixels(self):
        return self.height * self.width

    def sizes(self):
        return np.array([len(g) for g in self.groups], dtype=np.int64)

    def group_of(self):
        """Array mapping each pixel index to its group number."""
        owner = np.empty(self.n_pixels, dtype=np.int64)
        for k, g in enumerate(self.groups):
            owner[g] = k
        return owner


def partition_into_patches(height, width, w):
    """Tile the image with ``w x w`` patches, clipping the right/bottom edges."""
    if w < 1:
        raise InvalidPatchWidth(f"patch width must be >= 1, got {w}")
    index = np.arange(height * width, dtype=np.int64).reshape(height, width)
    groups = []
    for r0 in range(0, height, w):
        for c0 in range(0, width, w):
            groups.append(index[r0:r0 + w, c0:c0 + w].ravel())
    return GroupPartition(groups, w, height, width)


def singleton_partition(n):
    """One group per sample, for coding unstructured sample sets."""
    return GroupPartition([np.array([i]) for i in range(n)], 1, 1, n)


@dataclass
class ContextFeatures:
    values: np.ndarray  # dim x n_samples
    order: Moments

    @property
    def dim(self):
        return self.values.shape[0]

    @property
    def n_samples(self):
        return self.values.shape[1]


def window_moments(cube, centers, w, order=Moments.MEAN):
    """Per-band moments over a ``w x w`` window around each center.

    Windows are clipped at the image border. ``Moments.MEAN_STD`` appends the
    population standard deviation to the mean, giving ``2 * bands`` features.
    """
    order = Moments(order)
    if w < 1 or w % 2 == 0:
        raise EvenWindow(f"window width must be odd and >= 1, got {w}")
    centers = np.asarray(centers, dtype=np.int64).reshape(-1, 2)
    if len(centers) == 0:
        raise EmptyCenters("no window centers given")

    vals = cube.values.astype(np.float64)
    h, wd, b = vals.shape
    half = w // 2
    r, c = centers[:, 0], centers[:, 1]
    r0, r1 = np.clip(r - half, 0, h), np.clip(r + half + 1, 0, h)
    c0, c1 = np.clip(c - half, 0, wd), np.clip(c + half + 1, 0, wd)

    out = np.empty((len(centers), 2 * b if order is Moments.MEAN_STD else b))
    for i in range(len(centers)):
        block = vals[r0[i]:r1[i], c0[i]:c1[i]].reshape(-1, b)
        mean = block.mean(axis=0)
        out[i, :b] = mean
        if order is Moments.MEAN_STD:
            out[i, b:] = np.sqrt(np.mean((block - mean) ** 2, axis=0))
    return ContextFeatures(np.ascontiguousarray(out.T), order)


def all_centers(height, width):
    rr, cc = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    return np.column_stack([rr.ravel(), cc.ravel()])
