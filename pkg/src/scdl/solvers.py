"""Sparse coding solvers.

* :func:`lasso_cd` / :func:`lasso_cd_batch` -- l1-regularised least squares by
  cyclic coordinate descent with covariance (Gram) updates.
* :func:`mfocuss` -- regularised M-FOCUSS for the l2/l1 joint-sparse
  (multiple measurement vector) problem.
* :func:`mmv_bcd` -- the same problem by block coordinate descent over rows.
* :func:`code_groups` -- solve one joint-sparse problem per contextual group,
  optionally on a thread pool.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .data import CodeMatrix
from .errors import (DimensionMismatch, InvalidArgument, ZeroAtom,
                     ZeroInitRow)

MFOCUSS = "mfocuss"
BCD = "bcd"

# columns coded together by the batched lasso; fixed so that results do not
# depend on how many workers share the batches
LASSO_BLOCK = 256


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rule shared by the joint-sparse solvers.

    Iteration stops once ``||Y_new - Y_old||_F / max(1, ||Y_old||_F) < rel_tol``
    or after ``max_iters`` iterations. Rows whose l2 norm is below
    ``prune_tol`` times the largest row norm are zeroed on exit.
    """

    max_iters: int = 200
    rel_tol: float = 1e-6
    prune_tol: float = 1e-8

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidArgument("max_iters must be >= 1")
        if not (self.rel_tol > 0 and self.prune_tol > 0):
            raise InvalidArgument("tolerances must be > 0")


DEFAULT_CONFIG = SolverConfig()


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _check_dims(D, X):
    D = np.asarray(D, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if D.ndim != 2:
        raise DimensionMismatch("dictionary must be 2-D (bands x atoms)")
    squeeze = X.ndim == 1
    if squeeze:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != D.shape[0]:
        raise DimensionMismatch(
            f"signal has {X.shape[0]} bands, dictionary has {D.shape[0]}")
    return D, X, squeeze


def _check_gamma(gamma):
    if not np.all(np.asarray(gamma) > 0):
        raise InvalidArgument("regularisation weight must be > 0")


# -- objectives -----------------------------------------------------------

def lasso_objective(D, X, Y, gamma):
    """Per-column ``1/2 ||x - D y||^2 + gamma ||y||_1``."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim == 1:
        return float(0.5 * np.sum((X - D @ Y) ** 2) + gamma * np.abs(Y).sum())
    R = X - D @ Y
    return 0.5 * np.sum(R * R, axis=0) + np.asarray(gamma) * np.abs(Y).sum(axis=0)


def row_norms(Y):
    return np.sqrt(np.sum(Y * Y, axis=1))


def l21_norm(Y):
    return float(row_norms(Y).sum())


def group_objective(D, X, Y, gamma):
    """``1/2 ||X - D Y||_F^2 + gamma ||Y||_{2,1}``."""
    R = X - D @ Y
    return float(0.5 * np.sum(R * R) + gamma * l21_norm(Y))


def lasso_kkt_violation(D, x, y, gamma, nonneg=False):
    """Largest violation of the lasso optimality conditions, relative to gamma.

    With ``g = D^T (x - D y)`` the conditions are ``g_j = gamma * sign(y_j)``
    on the support and ``|g_j| <= gamma`` off it (``g_j <= gamma`` when the
    codes are constrained to be nonnegative).
    """
    D, X, _ = _check_dims(D, x)
    Y = np.asarray(y, dtype=np.float64).reshape(D.shape[1], -1)
    g = D.T @ (X - D @ Y)
    return float(np.max(_kkt(g, Y, gamma, nonneg), initial=0.0) / np.min(gamma))


def _kkt(g, Y, gamma, nonneg):
    on = Y != 0
    viol = np.where(on, np.abs(g - gamma * np.sign(Y)), 0.0)
    off = np.maximum(g - gamma, 0.0) if nonneg else np.maximum(np.abs(g) - gamma, 0.0)
    return np.where(on, viol, off)


def stationarity_residual(D, X, Y, gamma):
    """``||L D^T D Y - L D^T X + gamma Y||_F / max(1, ||Y||_F)`` over nonzero rows.

    ``L`` is the diagonal matrix of row norms of ``Y``; the expression vanishes
    at a minimiser of the joint-sparse objective.
    """
    lam = row_norms(Y)
    keep = lam > 0
    E = lam[:, None] * (D.T @ (D @ Y - X)) + gamma * Y
    return float(np.linalg.norm(E[keep]) / max(1.0, np.linalg.norm(Y)))


# -- lasso -----------------------------------------------------------------

REFINE_FIRST = 4


def _refine(G, c, y, gamma, nonneg, thr, max_steps):
    """Active-set (feature-sign) search from ``y`` in Gram form.

    Each step solves the sign-restricted quadratic on the current support and
    moves towards it up to the first sign change, so the objective never
    increases. Returns the refined vector if it meets the optimality
    conditions within ``thr``, else ``None`` (also as soon as a step stalls).
    """
    y = y.copy()
    f = lambda v: 0.5 * v @ G @ v - c @ v + gamma * np.abs(v).sum()
    for _ in range(max_steps):
        g = G @ y - c
        S = np.flatnonzero(y)
        theta = np.sign(y[S])
        if np.all(np.abs(g[S] + gamma * theta) <= thr):
            off = np.flatnonzero(y == 0)
            if len(off) == 0:
                return y
            viol = (-g[off] - gamma) if nonneg else (np.abs(g[off]) - gamma)
            k = int(np.argmax(viol))
            if viol[k] <= thr:
                return y
            j = off[k]
            S = np.sort(np.append(S, j))
            theta = np.where(S == j, -np.sign(g[j]), np.sign(y[S]))
        GSS = G[np.ix_(S, S)]
        rhs = c[S] - gamma * theta
        # least squares copes with supports wider than the number of bands
        z = np.linalg.lstsq(GSS, rhs, rcond=None)[0]
        if not np.all(np.isfinite(z)):
            return None
        cur = y[S]
        step = z - cur
        # first point where a coordinate leaves its sign orthant
        bad = (np.sign(z) != theta)
        t = 1.0
        cross = None
        if np.any(bad):
            with np.errstate(divide="ignore", invalid="ignore"):
                ts = np.where(bad, -cur / step, np.inf)
            ts[~(ts > 0)] = np.inf
            k = int(np.argmin(ts))
            if not np.isfinite(ts[k]):
                return None
            if ts[k] < 1.0:
                t, cross = ts[k], k
        new = np.zeros_like(y)
        new[S] = cur + t * step
        if cross is not None:
            new[S[cross]] = 0.0
        if nonneg:
            new = np.maximum(new, 0.0)
        if not f(new) < f(y):
            return None
        y = new
    return None


def lasso_cd_batch(D, X, gamma, nonneg=False, tol=1e-10, max_iter=10000, Y0=None,
                   data_rtol=0.0):
    """Solve one lasso per column of ``X`` by cyclic coordinate descent.

    Coordinates are visited in index order. A column stops being updated once
    its optimality-condition violation falls below ``tol * gamma`` (or below
    ``data_rtol * |D^T x|_inf`` when that is larger). After 4, 8, 16, ...
    sweeps each unfinished column is handed to an active-set search started
    from the current iterate; its result is kept only when it satisfies the
    optimality conditions, otherwise coordinate descent carries on.

    Parameters
    ----------
    D : array (bands, atoms)
    X : array (bands, n)
    gamma : float or array (n,)
    nonneg : bool
        Constrain codes to be nonnegative.
    Y0 : array (atoms, n), optional
        Warm start. Coordinate descent never increases the objective, so the
        result is at least as good as ``Y0``.

    Returns
    -------
    Y : array (atoms, n)
    objective : array (n,)
    """
    D, X, _ = _check_dims(D, X)
    _check_gamma(gamma)
    K, n = D.shape[1], X.shape[1]
    gamma_col = np.broadcast_to(np.asarray(gamma, dtype=np.float64), (n,))
    G = D.T @ D
    C = D.T @ X
    diag = np.diag(G).copy()
    Y = np.zeros((K, n)) if Y0 is None else np.array(Y0, dtype=np.float64).reshape(K, n)
    if nonneg:
        np.maximum(Y, 0.0, out=Y)
    Y[diag == 0] = 0.0

    thr = np.maximum(tol * gamma_col, data_rtol * np.abs(C).max(axis=0, initial=0.0))
    active = np.arange(n)
    for sweep in range(1, max_iter + 1):
        Ya, Ca, ga = Y[:, active], C[:, active], gamma_col[active]
        GY = G @ Ya
        for j in range(K):
            gjj = diag[j]
            if gjj == 0:
                continue
            rho = Ca[j] - GY[j] + gjj * Ya[j]
            if nonneg:
                new = np.maximum(rho - ga, 0.0) / gjj
            else:
                new = soft_threshold(rho, ga) / gjj
            delta = new - Ya[j]
            if np.any(delta):
                GY += np.outer(G[:, j], delta)
                Ya[j] = new
        Y[:, active] = Ya
        viol = _kkt(Ca - G @ Ya, Ya, ga, nonneg).max(axis=0) if K else np.zeros(len(active))
        active = active[viol > thr[active]]
        if len(active) and sweep >= REFINE_FIRST and sweep & (sweep - 1) == 0:
            done = np.zeros(len(active), dtype=bool)
            for n_, i in enumerate(active):
                y = _refine(G, C[:, i], Y[:, i], gamma_col[i], nonneg, thr[i], 4 * K + 8)
                if y is not None:
                    Y[:, i] = y
                    done[n_] = True
            active = active[~done]
        if len(active) == 0:
            break
    return Y, lasso_objective(D, X, Y, gamma_col)


def lasso_cd(D, x, gamma, nonneg=False, tol=1e-10, max_iter=10000, y0=None):
    """Lasso for a single signal; returns ``(y, objective)``."""
    D, X, _ = _check_dims(D, x)
    if X.shape[1] != 1:
        raise DimensionMismatch("lasso_cd expects a single signal vector")
    Y, obj = lasso_cd_batch(D, X, gamma, nonneg=nonneg, tol=tol,
                            max_iter=max_iter, Y0=y0)
    return Y[:, 0], float(obj[0])


# -- joint sparse coding --------------------------------------------------

def _prune(D, X, Y, gamma, prune_tol):
    """Zero negligible rows in place; return True if anything changed.

    Rows below ``prune_tol`` times the largest row norm are dropped. Then
    every remaining row whose exact minimiser with the other rows held fixed
    is zero (``||d_j^T R_j|| <= gamma``) is set to zero, one row at a time;
    both steps keep the objective from increasing by more than round-off.
    """
    lam = row_norms(Y)
    top = lam.max(initial=0.0)
    changed = False
    if top > 0:
        dead = (lam < prune_tol * top) & (lam > 0)
        if np.any(dead):
            Y[dead] = 0.0
            changed = True
    # P = D^T R is kept current so each test is a row lookup
    G = D.T @ D
    P = D.T @ X - G @ Y
    for j in np.flatnonzero(row_norms(Y) > 0):
        v = P[j] + G[j, j] * Y[j]
        if np.sqrt(v @ v) <= gamma:
            P += np.outer(G[:, j], Y[j])
            Y[j] = 0.0
            changed = True
    return changed


def default_init(D, X):
    """``D^T X`` with exactly-zero rows nudged to ``1e-12``."""
    Y = D.T @ X
    Y[row_norms(Y) == 0] += 1e-12
    return Y


def mfocuss(D, X, gamma, config=DEFAULT_CONFIG, Y_init=None):
    """Regularised M-FOCUSS for ``min 1/2||X - DY||_F^2 + gamma ||Y||_{2,1}``.

    Each step sets ``Y = L D^T (D L D^T + gamma I)^{-1} X`` where ``L`` holds
    the row norms of the previous iterate. This is a majorise-minimise step,
    so the objective never increases. Rows that reach zero stay zero; only
    the active rows enter the linear system, which is solved in whichever of
    the ``bands x bands`` or ``active x active`` forms is smaller.

    Returns ``(Y, objective_trace)``; the trace starts at the initial point
    and gains one last entry when pruning changes ``Y``.
    """
    D, X, squeeze = _check_dims(D, X)
    _check_gamma(gamma)
    B, K = D.shape
    if Y_init is None:
        Y = default_init(D, X)
    else:
        Y = np.array(Y_init, dtype=np.float64).reshape(K, X.shape[1])
        if np.any(row_norms(Y) == 0):
            raise ZeroInitRow("M-FOCUSS needs every initial row to be nonzero")

    G = D.T @ D
    C = D.T @ X
    trace = [group_objective(D, X, Y, gamma)]
    for _ in range(config.max_iters):
        lam = row_norms(Y)
        act = np.flatnonzero(lam > 0)
        Y_new = np.zeros_like(Y)
        if len(act):
            la = lam[act]
            if len(act) < B:
                s = np.sqrt(la)
                M = s[:, None] * G[np.ix_(act, act)] * s[None, :]
                M[np.diag_indices_from(M)] += gamma
                Z = linalg.cho_solve(linalg.cho_factor(M, check_finite=False),
                                     s[:, None] * C[act], check_finite=False)
                Y_new[act] = s[:, None] * Z
            else:
                Da = D[:, act]
                M = (Da * la) @ Da.T
                M[np.diag_indices_from(M)] += gamma
                Z = linalg.cho_solve(linalg.cho_factor(M, check_finite=False), X,
                                     check_finite=False)
                Y_new[act] = la[:, None] * (Da.T @ Z)
        change = np.linalg.norm(Y_new - Y) / max(1.0, np.linalg.norm(Y))
        Y = Y_new
        trace.append(group_objective(D, X, Y, gamma))
        if change < config.rel_tol:
            break
    if _prune(D, X, Y, gamma, config.prune_tol):
        trace.append(group_objective(D, X, Y, gamma))
    return (Y[:, 0] if squeeze else Y), trace


def mmv_bcd(D, X, gamma, config=DEFAULT_CONFIG, Y_init=None):
    """Joint-sparse coding by cyclic block coordinate descent over rows.

    Row ``j`` becomes ``(1 - gamma/||v||)_+ v / ||d_j||^2`` with
    ``v = R_j^T d_j`` and ``R_j`` the residual without atom ``j``.
    Returns ``(Y, objective_trace)``.
    """
    D, X, squeeze = _check_dims(D, X)
    _check_gamma(gamma)
    K, n = D.shape[1], X.shape[1]
    G = D.T @ D
    diag = np.diag(G).copy()
    if np.any(diag == 0):
        raise ZeroAtom(f"atom {int(np.flatnonzero(diag == 0)[0])} has zero norm")
    C = D.T @ X
    Y = np.zeros((K, n)) if Y_init is None else np.array(Y_init, dtype=np.float64).reshape(K, n)
    trace = [group_objective(D, X, Y, gamma)]
    for _ in range(config.max_iters):
        Y_old = Y.copy()
        GY = G @ Y
        for j in range(K):
            v = C[j] - GY[j] + diag[j] * Y[j]
            nv = np.sqrt(v @ v)
            new = (max(0.0, 1.0 - gamma / nv) / diag[j]) * v if nv > 0 else np.zeros(n)
            delta = new - Y[j]
            if np.any(delta):
                GY += np.outer(G[:, j], delta)
                Y[j] = new
        trace.append(group_objective(D, X, Y, gamma))
        if np.linalg.norm(Y - Y_old) / max(1.0, np.linalg.norm(Y_old)) < config.rel_tol:
            break
    if _prune(D, X, Y, gamma, config.prune_tol):
        trace.append(group_objective(D, X, Y, gamma))
    return (Y[:, 0] if squeeze else Y), trace


_SOLVERS = {MFOCUSS: mfocuss, BCD: mmv_bcd}


def _map(fn, items, n_jobs):
    if n_jobs is None or n_jobs <= 1:
        return list(map(fn, items))
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def code_groups(D, X, groups, gammas, config=DEFAULT_CONFIG, solver=MFOCUSS,
                n_jobs=1, warm_start=None):
    """Joint-sparse code every group of columns of ``X``.

    Parameters
    ----------
    D : array (bands, atoms)
    X : array (bands, n)
    groups : GroupPartition or list of index arrays
        Disjoint column index sets; columns outside every group stay zero.
    gammas : float or array (n_groups,)
        Per-group regularisation weight.
    solver : {"mfocuss", "bcd"}
    n_jobs : int
        Worker threads. Each group writes only its own columns, so the result
        is identical for any ``n_jobs`` and any processing order.
    warm_start : CodeMatrix, optional
        Previous codes. BCD starts from them; for M-FOCUSS (which cannot
        revive zero rows) they are kept for a group whenever they score a
        lower objective than the fresh solution, so re-coding after a
        dictionary change never increases the objective.
    """
    D, X, _ = _check_dims(D, X)
    groups = list(getattr(groups, "groups", groups))
    gammas = np.broadcast_to(np.asarray(gammas, dtype=np.float64), (len(groups),))
    if solver not in _SOLVERS:
        raise InvalidArgument(f"unknown solver {solver!r}")
    solve = _SOLVERS[solver]
    K, n = D.shape[1], X.shape[1]
    prev = None if warm_start is None else warm_start.dense

    def work(k):
        idx = groups[k]
        Xg = X[:, idx]
        if prev is not None and solver == BCD:
            return solve(D, Xg, gammas[k], config, Y_init=prev[:, idx])[0]
        Y = solve(D, Xg, gammas[k], config)[0]
        if prev is not None:
            Yp = prev[:, idx]
            if group_objective(D, Xg, Yp, gammas[k]) < group_objective(D, Xg, Y, gammas[k]):
                return Yp.copy()
        return Y

    out = np.zeros((K, n))
    for idx, Y in zip(groups, _map(work, range(len(groups)), n_jobs)):
        out[:, idx] = Y
    return CodeMatrix(out)


def code_samples(D, X, gamma, nonneg=False, n_jobs=1, warm_start=None,
                 tol=1e-10, max_iter=10000, data_rtol=0.0):
    """Independent lasso per column of ``X``, in fixed-size column blocks.

    See :func:`lasso_cd_batch` for ``tol`` and ``data_rtol``.
    """
    D, X, _ = _check_dims(D, X)
    n = X.shape[1]
    prev = None if warm_start is None else warm_start.dense
    blocks = [np.arange(s, min(s + LASSO_BLOCK, n)) for s in range(0, n, LASSO_BLOCK)]

    def work(idx):
        Y0 = None if prev is None else prev[:, idx]
        return lasso_cd_batch(D, X[:, idx], gamma, nonneg=nonneg, tol=tol,
                              max_iter=max_iter, Y0=Y0, data_rtol=data_rtol)[0]

    out = np.zeros((D.shape[1], n))
    for idx, Y in zip(blocks, _map(work, blocks, n_jobs)):
        out[:, idx] = Y
    return CodeMatrix(out)
