"""End-to-end SDL / CDL / SCDL classification runs.

The functions here are what the command line drives; they are plain library
calls and can be used directly from scripts.
"""
import json
import os
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import data as hsidata
from .context import Moments, all_centers, partition_into_patches, window_moments
from .errors import ConfigError, EmptyTestSet
from .learning import LearnConfig, Mode, RegSchedule, encode, learn
from .msi import Coverage, apply_binner, code_msi, make_binner
from .solvers import BCD, MFOCUSS, SolverConfig
from .svm import DEFAULT_C_GRID, cross_validate, evaluate, predict_batch, train_ovo

ATOM_FRACTIONS = (1 / 2, 1 / 4, 1 / 8, 1 / 16)
GAMMA_GRID = (0.1, 1.0, 10.0, 100.0)
WINDOW_GRID = (3, 5, 7, 9, 11)


@dataclass
class PipelineConfig:
    """Everything a run needs. ``None`` in a grid-backed field (``gamma``,
    ``atoms_frac`` for SDL/CDL, ``window``) means "choose by cross-validation"."""

    cube: str = None
    labels: str = None
    train: str = None
    test: str = None
    fraction: float = 0.1
    seed: int = 0
    mode: str = "SCDL"
    patch: int = 8
    window: int = None
    moments: str = "mean"
    atoms: int = None
    atoms_frac: float = None
    sigma2: float = 10.0
    gamma: float = None
    nonneg: bool = None
    gamma_grid: list = field(default_factory=lambda: list(GAMMA_GRID))
    atoms_frac_grid: list = field(default_factory=lambda: list(ATOM_FRACTIONS))
    window_grid: list = field(default_factory=lambda: list(WINDOW_GRID))
    C: float = None
    C_grid: list = field(default_factory=lambda: list(DEFAULT_C_GRID))
    folds: int = 5
    solver: str = MFOCUSS
    max_iters: int = 200
    rel_tol: float = 1e-6
    prune_tol: float = 1e-8
    outer_iters: int = 40
    outer_rel_tol: float = 1e-5
    threads: int = 1
    repeats: int = 1
    msi_bins: int = 8
    reuse_C: bool = False
    bench_threads: list = field(default_factory=lambda: [1, 2, 4])
    bench_iters: int = 100
    out: str = "out"

    @classmethod
    def from_file(cls, path, **overrides):
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config: no such file {path}") from None
        except ValueError as exc:
            raise ConfigError(f"config: {path} is not valid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError("config: top level must be a JSON object")
        return cls.from_dict({**raw, **overrides})

    @classmethod
    def from_dict(cls, raw):
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - names)
        if unknown:
            raise ConfigError(f"config: unknown field(s) {', '.join(unknown)}")
        return cls(**{k: v for k, v in raw.items() if v is not None})

    def to_dict(self):
        return asdict(self)

    def validate(self, need_labels=True):
        def bad(name, why):
            raise ConfigError(f"config field '{name}': {why}")

        if not self.cube:
            bad("cube", "path to the cube header is required")
        if need_labels and not self.labels and not (self.train and self.test):
            bad("labels", "give 'labels' (with 'fraction') or both 'train' and 'test'")
        try:
            Mode(self.mode)
        except ValueError:
            bad("mode", f"must be SDL, CDL or SCDL, got {self.mode!r}")
        try:
            Moments(self.moments)
        except ValueError:
            bad("moments", "must be 'mean' or 'mean_std'")
        if not 0 < self.fraction < 1:
            bad("fraction", "must lie in (0, 1)")
        if self.patch < 1:
            bad("patch", "must be >= 1")
        if self.window is not None and (self.window < 1 or self.window % 2 == 0):
            bad("window", "must be odd and >= 1")
        if self.atoms is not None and self.atoms < 1:
            bad("atoms", "must be >= 1")
        if self.atoms_frac is not None and not 0 < self.atoms_frac <= 1:
            bad("atoms_frac", "must lie in (0, 1]")
        if self.sigma2 <= 0:
            bad("sigma2", "must be > 0")
        if self.gamma is not None and self.gamma <= 0:
            bad("gamma", "must be > 0")
        if self.solver not in (MFOCUSS, BCD):
            bad("solver", f"must be '{MFOCUSS}' or '{BCD}'")
        if self.threads < 1:
            bad("threads", "must be >= 1")
        if self.repeats < 1:
            bad("repeats", "must be >= 1")
        if self.folds < 2:
            bad("folds", "must be >= 2")
        if self.outer_iters < 1:
            bad("outer_iters", "must be >= 1")
        if not self.C_grid:
            bad("C_grid", "must not be empty")
        return self

    @property
    def mode_enum(self):
        return Mode(self.mode)

    def solver_config(self):
        return SolverConfig(self.max_iters, self.rel_tol, self.prune_tol)

    def learn_config(self, gamma=None, atoms_frac=None, seed=None):
        mode = self.mode_enum
        if atoms_frac is None:
            atoms_frac = self.atoms_frac if self.atoms_frac is not None else 0.5
        return LearnConfig(
            mode=mode, n_atoms=self.atoms,
            atoms_fraction=None if self.atoms else atoms_frac,
            outer_iters=self.outer_iters, outer_rel_tol=self.outer_rel_tol,
            gamma=gamma if gamma is not None else (self.gamma or 1.0),
            nonneg=self.nonneg, solver=self.solver,
            solver_config=self.solver_config(),
            seed=self.seed if seed is None else seed, n_jobs=self.threads)


# -- data loading ---------------------------------------------------------

def load_inputs(cfg, seed=None):
    """Cube plus (train, test) label maps, from explicit CSVs or a seeded split."""
    cube = hsidata.load_cube(cfg.cube)
    if cfg.train and cfg.test:
        train = hsidata.load_labels(cfg.train, cube.shape)
        test = hsidata.load_labels(cfg.test, cube.shape)
        m = max(train.num_classes, test.num_classes)
        train.num_classes = test.num_classes = m
    else:
        labels = hsidata.load_labels(cfg.labels, cube.shape)
        train, test = hsidata.split_labels(labels, cfg.fraction,
                                           cfg.seed if seed is None else seed)
    return cube, train, test


def pixel_features(cube, mode, window=None, moments="mean", centers=None):
    """Spectra (SDL/SCDL) or window moments (CDL), ``dim x n``.

    Without ``centers`` every pixel is returned in row-major order.
    """
    if Mode(mode) is Mode.CDL:
        if centers is None:
            centers = all_centers(cube.height, cube.width)
        return window_moments(cube, centers, window, Moments(moments)).values
    if centers is None:
        return cube.spectra()
    centers = np.asarray(centers)
    return cube.spectra(centers[:, 0], centers[:, 1])


def _centers(labels):
    return np.column_stack([labels.rows, labels.cols])


# -- learning ------------------------------------------------------------

@dataclass
class LearnedModel:
    D: np.ndarray
    codes: object            # CodeMatrix over every pixel
    learn_config: LearnConfig
    report: object
    window: int = None
    gamma: float = None
    atoms_frac: float = None


def fit_dictionary(cube, train, cfg, gamma=None, atoms_frac=None, window=None):
    """Learn a dictionary for ``cfg.mode`` and code every pixel with it.

    SCDL learns from all pixels grouped into patches, starting from a random
    subset of the training spectra. SDL and CDL learn from the training
    samples only.
    """
    mode = cfg.mode_enum
    lc = cfg.learn_config(gamma=gamma, atoms_frac=atoms_frac)
    window = window or cfg.window
    if mode is Mode.SCDL:
        X = cube.spectra()
        part = partition_into_patches(cube.height, cube.width, cfg.patch)
        D, codes, report = learn(X, lc, part, RegSchedule(cfg.sigma2),
                                 init_samples=pixel_features(cube, mode, centers=_centers(train)))
        return LearnedModel(D, codes, lc, report, None, None, lc.atoms_fraction)
    Xtr = pixel_features(cube, mode, window, cfg.moments, _centers(train))
    D, _, report = learn(Xtr, lc)
    codes = encode(D, pixel_features(cube, mode, window, cfg.moments), lc)
    return LearnedModel(D, codes, lc, report, window, lc.gamma, lc.atoms_fraction)


def encode_cube(D, cube, cfg, window=None, gamma=None):
    """Code every pixel of ``cube`` against a fixed dictionary."""
    lc = cfg.learn_config(gamma=gamma)
    if lc.mode is Mode.SCDL:
        part = partition_into_patches(cube.height, cube.width, cfg.patch)
        return encode(D, cube.spectra(), lc, part, RegSchedule(cfg.sigma2))
    return encode(D, pixel_features(cube, lc.mode, window or cfg.window, cfg.moments), lc)


def select_and_fit(cube, train, cfg):
    """Fit the dictionary, cross-validating any unset SDL/CDL hyper-parameters.

    Each candidate (gamma, atom fraction, window) is learned on the training
    samples and scored by the best cross-validated SVM accuracy on their codes.
    """
    mode = cfg.mode_enum
    if mode is Mode.SCDL:
        return fit_dictionary(cube, train, cfg)
    gammas = [cfg.gamma] if cfg.gamma is not None else cfg.gamma_grid
    fracs = [cfg.atoms_frac] if (cfg.atoms_frac is not None or cfg.atoms) else cfg.atoms_frac_grid
    windows = [None]
    if mode is Mode.CDL:
        windows = [cfg.window] if cfg.window is not None else cfg.window_grid
    if len(gammas) * len(fracs) * len(windows) == 1:
        return fit_dictionary(cube, train, cfg, gammas[0], fracs[0], windows[0])

    best, best_key = -1.0, None
    for win in windows:
        Xtr = pixel_features(cube, mode, win, cfg.moments, _centers(train))
        for frac in fracs:
            for g in gammas:
                lc = cfg.learn_config(gamma=g, atoms_frac=frac)
                _, codes, _ = learn(Xtr, lc)
                cv = cross_validate(codes.dense.T, train.classes, cfg.C_grid, cfg.folds,
                                    cfg.seed, train.num_classes, n_jobs=cfg.threads)
                score = cv.scores[cv.C]
                if score > best:
                    best, best_key = score, (g, frac, win)
    return fit_dictionary(cube, train, cfg, *best_key)


# -- classification ---------------------------------------------------------

@dataclass
class ClassificationResult:
    model: object
    C: float
    report: object
    test_pred: np.ndarray
    class_map: np.ndarray        # predicted class for every pixel, height x width
    cv_scores: dict = None


def classify_codes(codes, cube_shape, train, test, cfg, model=None):
    """Train (or reuse) the one-vs-one SVM on training codes and score the test set."""
    if len(test) == 0:
        raise EmptyTestSet("the test set is empty")
    width = cube_shape[1]
    Y = codes.dense.T
    M = max(train.num_classes, test.num_classes)
    cv_scores = None
    if model is None:
        Xtr = Y[train.pixel_indices(width)]
        if cfg.C is not None:
            C = cfg.C
        else:
            cv = cross_validate(Xtr, train.classes, cfg.C_grid, cfg.folds, cfg.seed, M,
                                n_jobs=cfg.threads)
            C, cv_scores = cv.C, cv.scores
        model = train_ovo(Xtr, train.classes, C, num_classes=M, n_jobs=cfg.threads,
                          seed=cfg.seed)
    else:
        C = model.classifiers[0][2].C if model.classifiers else None
    all_pred = predict_batch(model, Y)
    test_pred = all_pred[test.pixel_indices(width)]
    report = evaluate(test_pred, test.classes, M)
    return ClassificationResult(model, C, report, test_pred,
                                all_pred.reshape(cube_shape), cv_scores)


def run_classification(cube, train, test, cfg):
    """Learn, code every pixel, cross-validate C and evaluate on ``test``."""
    learned = select_and_fit(cube, train, cfg)
    result = classify_codes(learned.codes, cube.shape, train, test, cfg)
    return learned, result


# -- MSI experiment ----------------------------------------------------------

def run_msi(cube, train, test, cfg, learned=None, hsi_result=None):
    """HSI-level baseline plus MSI (lower-half bins) and coarse-HSI (full bins) runs.

    The dictionary is learned once at HSI resolution; binned pixels are coded
    against the binned dictionary and classified with the same split.
    """
    mode = cfg.mode_enum
    if mode is Mode.CDL and Moments(cfg.moments) is not Moments.MEAN:
        raise ConfigError("config field 'moments': MSI simulation of CDL needs 'mean' "
                          "(standard deviations do not commute with band sums)")
    if learned is None:
        learned = select_and_fit(cube, train, cfg)
    if hsi_result is None:
        hsi_result = classify_codes(learned.codes, cube.shape, train, test, cfg)
    out = {"HSI": hsi_result}
    X = pixel_features(cube, mode, learned.window, cfg.moments)
    part = partition_into_patches(cube.height, cube.width, cfg.patch)
    for name, coverage in (("MSI", Coverage.LOWER_HALF), ("cHSI", Coverage.FULL)):
        binner = make_binner(X.shape[0], cfg.msi_bins, coverage)
        codes = code_msi(learned.D, binner, apply_binner(binner, X), mode, partition=part,
                         schedule=RegSchedule(cfg.sigma2), gamma=learned.learn_config.gamma,
                         nonneg=learned.learn_config.use_nonneg,
                         config=cfg.solver_config(), solver=cfg.solver, n_jobs=cfg.threads)
        level_cfg = cfg
        if cfg.reuse_C:
            level_cfg = PipelineConfig(**{**cfg.to_dict(), "C": hsi_result.C})
        out[name] = classify_codes(codes, cube.shape, train, test, level_cfg)
    return learned, out


# -- timing -----------------------------------------------------------------

def run_bench(cube, train, cfg):
    """Learn with each thread count for a fixed number of iterations."""
    runs = []
    for n in cfg.bench_threads:
        bench_cfg = PipelineConfig(**{**cfg.to_dict(), "threads": n,
                                      "outer_iters": cfg.bench_iters, "outer_rel_tol": 0.0})
        start = time.perf_counter()
        learned = fit_dictionary(cube, train, bench_cfg)
        total = time.perf_counter() - start
        runs.append({"threads": n, "total_seconds": total,
                     "iterations": learned.report.n_iter,
                     "seconds_per_iteration": learned.report.seconds})
    base = runs[0]["total_seconds"]
    for r in runs:
        r["speedup"] = base / r["total_seconds"] if r["total_seconds"] > 0 else float("nan")
    return runs


# -- outputs ----------------------------------------------------------------

# 16 visually distinct RGB colours; class k uses entry (k - 1) % 16, 0 is black
PALETTE = np.array([
    (255, 0, 0), (0, 255, 0), (0, 0, 255), (255, 255, 0),
    (255, 0, 255), (0, 255, 255), (176, 48, 96), (46, 139, 87),
    (160, 32, 240), (255, 127, 80), (127, 255, 212), (218, 112, 214),
    (160, 82, 45), (127, 255, 0), (216, 191, 216), (238, 0, 0),
], dtype=np.uint8)


def write_ppm(path, class_map):
    """Binary PPM of a class map; class ids < 1 are drawn black."""
    cm = np.asarray(class_map, dtype=np.int64)
    rgb = np.zeros(cm.shape + (3,), dtype=np.uint8)
    valid = cm >= 1
    rgb[valid] = PALETTE[(cm[valid] - 1) % len(PALETTE)]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (cm.shape[1], cm.shape[0]))
        fh.write(rgb.tobytes())


def read_ppm(path):
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        w, h = map(int, fh.readline().split())
        fh.readline()
        rgb = np.frombuffer(fh.read(), dtype=np.uint8).reshape(h, w, 3)
    if magic != b"P6":
        raise ValueError("not a binary PPM")
    return rgb


def write_predictions(path, test, predictions):
    pred = hsidata.LabelMap(test.rows, test.cols, predictions,
                            max(test.num_classes, int(np.max(predictions, initial=0))))
    hsidata.save_labels(path, pred, header=("row", "col", "predicted"))


def write_json(path, obj):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"{type(o).__name__} is not JSON serialisable")
