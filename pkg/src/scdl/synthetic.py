"""Synthetic data with known structure, for tests, demos and smoke runs."""
from dataclasses import dataclass

import numpy as np

from .context import partition_into_patches
from .data import HsiCube, LabelMap


@dataclass
class PlantedModel:
    X: np.ndarray        # bands x n
    D: np.ndarray        # bands x atoms, unit columns
    Y: np.ndarray        # atoms x n, row-sparse per group
    groups: list         # column index arrays


def unit_columns(A):
    return A / np.linalg.norm(A, axis=0)


def planted_groups(n_bands=16, n_atoms=20, n_groups=50, group_size=8, support=3,
                   coef_range=(0.5, 1.5), noise_std=0.01, seed=0):
    """Groups of columns that share a random ``support``-atom support."""
    rng = np.random.default_rng(seed)
    D = unit_columns(rng.normal(size=(n_bands, n_atoms)))
    n = n_groups * group_size
    Y = np.zeros((n_atoms, n))
    groups = []
    for g in range(n_groups):
        idx = np.arange(g * group_size, (g + 1) * group_size)
        rows = rng.choice(n_atoms, size=support, replace=False)
        Y[np.ix_(rows, idx)] = rng.uniform(*coef_range, size=(support, group_size))
        groups.append(idx)
    X = D @ Y + noise_std * rng.normal(size=(n_bands, n))
    return PlantedModel(X, D, Y, groups)


def smooth_spectra(n_bands, n_spectra, rng, n_bumps=2, width=0.08):
    """Nonnegative smooth spectra built from a few Gaussian bumps.

    ``width`` is the bump standard deviation as a fraction of the band range.
    """
    t = np.linspace(0.0, 1.0, n_bands)
    out = np.zeros((n_bands, n_spectra))
    for k in range(n_spectra):
        centers = rng.uniform(0, 1, size=n_bumps)
        heights = rng.uniform(0.3, 1.0, size=n_bumps)
        for c, h in zip(centers, heights):
            out[:, k] += h * np.exp(-0.5 * ((t - c) / width) ** 2)
    return unit_columns(out + 0.05)


@dataclass
class Scene:
    cube: HsiCube
    labels: LabelMap      # every pixel, class ids 1..n_classes
    class_map: np.ndarray  # height x width
    atoms: np.ndarray     # bands x atoms used to synthesise the scene
    supports: list        # atom indices per class


def class_signatures(atoms, supports, binner=None):
    """Sum of each class's atoms, optionally band-binned (``bands x classes``)."""
    sig = np.stack([atoms[:, sup].sum(axis=1) for sup in supports], axis=1)
    if binner is not None:
        sig = binner.matrix() @ sig
    return sig


def max_cross_correlation(columns, owners):
    """Largest Pearson correlation between columns with different owners."""
    C = np.corrcoef(np.asarray(columns).T)
    owners = np.asarray(owners)
    cross = owners[:, None] != owners[None, :]
    return float(C[cross].max()) if cross.any() else -1.0


def distinct_class_atoms(n_bands, n_classes, atoms_per_class, rng, max_corr=0.9,
                         binner=None, attempts=200):
    """Draw class atom sets whose atoms and class signatures are not too alike.

    Draws are rejected while any two atoms of different classes, or any two
    class signatures (after ``binner`` when given), correlate above ``max_corr``.
    """
    owners = np.repeat(np.arange(n_classes), atoms_per_class)
    supports = [np.flatnonzero(owners == k) for k in range(n_classes)]
    for _ in range(attempts):
        atoms = smooth_spectra(n_bands, n_classes * atoms_per_class, rng)
        if n_classes < 2:
            return atoms
        sig = class_signatures(atoms, supports, binner)
        if (max_cross_correlation(atoms, owners) < max_corr
                and max_cross_correlation(sig, np.arange(n_classes)) < max_corr):
            return atoms
    raise RuntimeError(f"no atom draw met max_corr={max_corr} in {attempts} attempts")


def region_map(height, width, n_classes, rng):
    """Blob-shaped class regions: nearest of a few random seeds per class."""
    seeds = rng.uniform(0, 1, size=(3 * n_classes, 2)) * [height, width]
    owner = np.repeat(np.arange(n_classes), 3)
    rr, cc = np.meshgrid(np.arange(height) + 0.5, np.arange(width) + 0.5, indexing="ij")
    dist = (rr[..., None] - seeds[:, 0]) ** 2 + (cc[..., None] - seeds[:, 1]) ** 2
    return owner[np.argmin(dist, axis=-1)] + 1


def mixture_scene(height=32, width=32, n_bands=16, n_classes=2, atoms_per_class=3,
                  snr_db=20.0, amplitude=1000.0, seed=0, class_map=None, atoms=None,
                  max_corr=0.9, binner=None):
    """Scene whose classes are mixtures of disjoint atom triples plus noise.

    Each pixel is ``amplitude * sum_k a_k d_k`` over its class's atoms with
    abundances uniform in ``[0.2, 1]``; white Gaussian noise is added at the
    requested signal-to-noise ratio (mean signal power over noise power).
    Atoms are drawn by :func:`distinct_class_atoms` with ``max_corr`` and
    ``binner`` unless given.
    """
    rng = np.random.default_rng(seed)
    n_atoms = n_classes * atoms_per_class
    if atoms is None:
        atoms = distinct_class_atoms(n_bands, n_classes, atoms_per_class, rng,
                                     max_corr, binner)
    if class_map is None:
        class_map = region_map(height, width, n_classes, rng)
    supports = [np.arange(k * atoms_per_class, (k + 1) * atoms_per_class)
                for k in range(n_classes)]
    flat = class_map.ravel()
    Y = np.zeros((n_atoms, flat.size))
    for k, sup in enumerate(supports, start=1):
        cols = np.flatnonzero(flat == k)
        Y[np.ix_(sup, cols)] = rng.uniform(0.2, 1.0, size=(len(sup), len(cols)))
    clean = amplitude * (atoms @ Y)
    power = np.mean(clean ** 2)
    noise = np.sqrt(power / 10 ** (snr_db / 10)) * rng.normal(size=clean.shape)
    values = (clean + noise).T.reshape(height, width, n_bands)
    rr, cc = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    labels = LabelMap(rr.ravel(), cc.ravel(), flat, n_classes)
    return Scene(HsiCube(values), labels, class_map, atoms, supports)


def patch_partition(scene, w):
    return partition_into_patches(scene.cube.height, scene.cube.width, w)
