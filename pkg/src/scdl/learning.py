"""Dictionary learning by alternating sparse coding and BCD atom updates.

Three modes share the same loop:

* ``SDL``  -- per-sample lasso on spectra, nonnegative codes and atoms by default;
* ``CDL``  -- per-sample lasso on window-moment features;
* ``SCDL`` -- joint-sparse (l2/l1) coding of contextual pixel groups with a
  group-size dependent weight from :class:`RegSchedule`.
"""
import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .data import CodeMatrix
from .errors import (AllZeroSamples, DimensionMismatch, InvalidArgument,
                     NotEnoughSamples)
from .solvers import (DEFAULT_CONFIG, MFOCUSS, SolverConfig, code_groups,
                      code_samples, row_norms)


class Mode(enum.Enum):
    SDL = "SDL"
    CDL = "CDL"
    SCDL = "SCDL"


def compute_gamma(sigma2, group_size):
    """Weight of the l2/l1 penalty for a group of ``group_size`` pixels.

    ``sigma2 * lambda * (1/q + 1)`` with ``q = |G|`` and ``lambda = sqrt(|G|)``,
    i.e. ``sigma2 * (|G| + 1) / sqrt(|G|)``.
    """
    if not sigma2 > 0:
        raise InvalidArgument("sigma2 must be > 0")
    if group_size < 1:
        raise InvalidArgument("group_size must be >= 1")
    return sigma2 * math.sqrt(group_size) * (1.0 / group_size + 1.0)


@dataclass(frozen=True)
class RegSchedule:
    sigma2: float = 10.0

    def gamma(self, group_size):
        return compute_gamma(self.sigma2, group_size)

    def gammas(self, partition):
        sizes = partition.sizes() if hasattr(partition, "sizes") else [len(g) for g in partition]
        return np.array([self.gamma(int(s)) for s in sizes])


@dataclass
class LearnConfig:
    """Settings for :func:`learn`.

    Give either ``n_atoms`` or ``atoms_fraction`` (a fraction of the samples
    used for initialisation). ``gamma`` is the lasso weight for SDL/CDL;
    SCDL takes its weights from the schedule passed to :func:`learn`.
    ``nonneg=None`` means nonnegative for SDL and unconstrained otherwise.
    ``code_rtol`` stops per-sample lasso coding once the optimality violation
    is below that fraction of ``|D^T x|_inf`` and ``code_max_iter`` caps its
    sweeps; both keep coding of large-valued spectra with a small ``gamma``
    from crawling through ill-conditioned near-ties.
    """

    mode: Mode = Mode.SCDL
    n_atoms: int = None
    atoms_fraction: float = None
    outer_iters: int = 40
    outer_rel_tol: float = 1e-5
    gamma: float = 1.0
    nonneg: bool = None
    solver: str = MFOCUSS
    solver_config: SolverConfig = DEFAULT_CONFIG
    dict_sweeps: int = 1
    dict_tol: float = 1e-6
    code_rtol: float = 1e-4
    code_max_iter: int = 1000
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if self.outer_iters < 1:
            raise InvalidArgument("outer_iters must be >= 1")
        if self.n_atoms is not None and self.n_atoms < 1:
            raise InvalidArgument("n_atoms must be >= 1")
        if self.atoms_fraction is not None and not 0 < self.atoms_fraction <= 1:
            raise InvalidArgument("atoms_fraction must lie in (0, 1]")

    @property
    def use_nonneg(self):
        return self.mode is Mode.SDL if self.nonneg is None else bool(self.nonneg)

    def resolve_atoms(self, n_samples):
        if self.n_atoms is not None:
            return self.n_atoms
        if self.atoms_fraction is not None:
            return max(1, int(round(self.atoms_fraction * n_samples)))
        raise InvalidArgument("set n_atoms or atoms_fraction")


@dataclass
class LearnReport:
    """Per outer iteration: objective after the dictionary update, its fit and
    penalty parts, atoms replaced and wall time. ``half_steps`` lists the full
    objective after every coding and every dictionary half-step, ending with
    the final re-coding."""

    objective: list = field(default_factory=list)
    fit: list = field(default_factory=list)
    penalty: list = field(default_factory=list)
    replaced: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    half_steps: list = field(default_factory=list)
    converged: bool = False

    @property
    def n_iter(self):
        return len(self.objective)

    def records(self):
        return [{"iteration": i + 1, "objective": o, "fit": f, "penalty": p,
                 "replaced": r, "seconds": s}
                for i, (o, f, p, r, s) in enumerate(zip(
                    self.objective, self.fit, self.penalty, self.replaced, self.seconds))]


def init_dictionary(samples, n_atoms, seed, nonneg=False):
    """Pick ``n_atoms`` distinct samples at random and scale them to unit norm.

    ``samples`` is ``bands x n``. Zero samples are skipped in favour of the
    next random draw.
    """
    X = np.asarray(samples, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch("samples must be bands x n")
    n = X.shape[1]
    if n_atoms > n:
        raise NotEnoughSamples(f"{n_atoms} atoms requested from {n} samples")
    cand = np.clip(X, 0, None) if nonneg else X
    norms = np.linalg.norm(cand, axis=0)
    if not np.any(norms > 0):
        raise AllZeroSamples("every training sample is zero")
    order = np.random.default_rng(seed).permutation(n)
    picked = order[norms[order] > 0][:n_atoms]
    if len(picked) < n_atoms:
        raise NotEnoughSamples(f"only {len(picked)} nonzero samples for {n_atoms} atoms")
    return cand[:, picked] / norms[picked]


def _project(d, nonneg):
    if nonneg:
        d = np.maximum(d, 0.0)
    nrm = np.linalg.norm(d)
    return d / nrm if nrm > 1.0 else d


def update_dictionary(D, X, Y, nonneg=False, return_replaced=False):
    """One BCD sweep over the atoms with the codes ``Y`` held fixed.

    Atom ``j`` becomes the projection of ``R_j y_j / ||y_j||^2`` onto the unit
    ball (intersected with the nonnegative orthant when ``nonneg``), where
    ``y_j`` is row ``j`` of ``Y`` and ``R_j`` the residual without atom ``j``.
    Atoms whose row is entirely zero are replaced by the normalised sample
    with the largest current residual; distinct atoms get distinct samples.
    Dead atoms left over once the usable samples run out are only projected.
    """
    D = np.array(D, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    B, K = D.shape
    if X.shape[0] != B or Y.shape != (K, X.shape[1]):
        raise DimensionMismatch(
            f"D {D.shape}, X {X.shape}, Y {Y.shape} are inconsistent")
    R = X - D @ Y
    energy = np.sum(Y * Y, axis=1)
    dead = np.flatnonzero(energy == 0)
    spares = []
    if len(dead):
        res = np.sum(R * R, axis=0)
        cand = np.clip(X, 0, None) if nonneg else X
        ok = np.linalg.norm(cand, axis=0) > 0
        spares = [i for i in np.argsort(-res, kind="stable") if ok[i]]

    replaced = []
    for j in range(K):
        yj = Y[j]
        if energy[j] == 0:
            if len(replaced) < len(spares):
                col = cand[:, spares[len(replaced)]]
                D[:, j] = col / np.linalg.norm(col)
                replaced.append(j)
            else:
                # no sample left to take; the row is zero so R is unaffected
                D[:, j] = _project(D[:, j], nonneg)
            continue
        R += np.outer(D[:, j], yj)
        D[:, j] = _project((R @ yj) / energy[j], nonneg)
        R -= np.outer(D[:, j], yj)
    return (D, replaced) if return_replaced else D


def full_objective(D, X, codes, mode, gamma=None, groups=None, gammas=None):
    """Return ``(total, fit, penalty)`` for the learning objective."""
    Y = codes.dense if isinstance(codes, CodeMatrix) else codes
    R = X - D @ Y
    fit = 0.5 * float(np.sum(R * R))
    if Mode(mode) is Mode.SCDL:
        penalty = float(sum(g * row_norms(Y[:, idx]).sum() for idx, g in zip(groups, gammas)))
    else:
        penalty = float(gamma * np.abs(Y).sum())
    return fit + penalty, fit, penalty


def learn(X, config, partition=None, schedule=None, D_init=None, init_samples=None):
    """Alternate sparse coding and dictionary updates.

    Parameters
    ----------
    X : array (bands, n)
        Spectra (SDL, SCDL) or context features (CDL). For SCDL the columns
        are the image pixels indexed as in ``partition``.
    config : LearnConfig
    partition : GroupPartition
        Contextual groups; SCDL only.
    schedule : RegSchedule
        Per-group weights for SCDL (default ``sigma2 = 10``).
    D_init : array (bands, atoms), optional
        Starting dictionary; otherwise drawn from ``init_samples`` (or ``X``).

    Returns
    -------
    D, codes, report
    """
    X = np.asarray(X, dtype=np.float64)
    mode = config.mode
    nonneg = config.use_nonneg
    if mode is Mode.SCDL:
        if partition is None:
            raise InvalidArgument("SCDL needs a group partition")
        if partition.n_pixels != X.shape[1]:
            raise DimensionMismatch(
                f"partition covers {partition.n_pixels} pixels, X has {X.shape[1]} columns")
        schedule = schedule or RegSchedule()
        groups = partition.groups
        gammas = schedule.gammas(partition)
    else:
        groups = gammas = None

    if D_init is None:
        src = X if init_samples is None else np.asarray(init_samples, dtype=np.float64)
        D = init_dictionary(src, config.resolve_atoms(src.shape[1]), config.seed, nonneg)
    else:
        D = np.array(D_init, dtype=np.float64)
        if D.shape[0] != X.shape[0]:
            raise DimensionMismatch("initial dictionary and data disagree on bands")

    def code(D, warm):
        if mode is Mode.SCDL:
            return code_groups(D, X, groups, gammas, config.solver_config,
                               config.solver, config.n_jobs, warm_start=warm)
        return code_samples(D, X, config.gamma, nonneg=nonneg,
                            n_jobs=config.n_jobs, warm_start=warm,
                            data_rtol=config.code_rtol, max_iter=config.code_max_iter)

    def objective(D, codes):
        return full_objective(D, X, codes, mode, config.gamma, groups, gammas)

    report = LearnReport()
    codes = None
    prev = None
    for _ in range(config.outer_iters):
        start = time.perf_counter()
        codes = code(D, codes)
        report.half_steps.append(objective(D, codes)[0])
        D, replaced = update_dictionary(D, X, codes.dense, nonneg, return_replaced=True)
        for _ in range(config.dict_sweeps - 1):
            D_next = update_dictionary(D, X, codes.dense, nonneg)
            step = np.linalg.norm(D_next - D) / max(1.0, np.linalg.norm(D))
            D = D_next
            if step < config.dict_tol:
                break
        total, fit, penalty = objective(D, codes)
        report.half_steps.append(total)
        report.objective.append(total)
        report.fit.append(fit)
        report.penalty.append(penalty)
        report.replaced.append(len(replaced))
        report.seconds.append(time.perf_counter() - start)
        if prev is not None and abs(prev - total) <= config.outer_rel_tol * max(abs(prev), 1e-300):
            report.converged = True
            break
        prev = total
    codes = code(D, codes)
    report.half_steps.append(objective(D, codes)[0])
    return D, codes, report


def encode(D, X, config, partition=None, schedule=None, n_jobs=None):
    """Sparse-code ``X`` against a fixed dictionary using ``config``'s mode."""
    n_jobs = config.n_jobs if n_jobs is None else n_jobs
    if config.mode is Mode.SCDL:
        schedule = schedule or RegSchedule()
        return code_groups(D, X, partition.groups, schedule.gammas(partition),
                           config.solver_config, config.solver, n_jobs)
    return code_samples(D, X, config.gamma, nonneg=config.use_nonneg, n_jobs=n_jobs,
                        data_rtol=config.code_rtol, max_iter=config.code_max_iter)
