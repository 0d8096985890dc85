import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import unit_dictionary
from scdl import solvers
from scdl.context import singleton_partition
from scdl.data import CodeMatrix
from scdl.errors import DimensionMismatch, ZeroAtom, ZeroInitRow
from scdl.solvers import (BCD, MFOCUSS, SolverConfig, code_groups, code_samples,
                          group_objective, lasso_cd, lasso_cd_batch, lasso_kkt_violation,
                          mfocuss, mmv_bcd, soft_threshold, stationarity_residual)

TIGHT = SolverConfig(max_iters=5000, rel_tol=1e-12, prune_tol=1e-8)


def exhaustive_lasso(D, x, gamma, nonneg=False):
    """Minimum over every support and sign pattern of the sign-consistent
    closed form ``y_S = G_SS^{-1} (D_S^T x - gamma s)``."""
    K = D.shape[1]
    best, best_y = 0.5 * x @ x, np.zeros(K)
    for size in range(1, K + 1):
        for S in itertools.combinations(range(K), size):
            S = list(S)
            G = D[:, S].T @ D[:, S]
            patterns = [(1.0,) * size] if nonneg else itertools.product((-1.0, 1.0), repeat=size)
            for s in patterns:
                s = np.array(s)
                yS = np.linalg.solve(G, D[:, S].T @ x - gamma * s)
                if np.all(np.sign(yS) == s):
                    y = np.zeros(K)
                    y[S] = yS
                    obj = 0.5 * np.sum((x - D @ y) ** 2) + gamma * np.abs(y).sum()
                    if obj < best:
                        best, best_y = obj, y
    return best_y, best


# -- lasso -----------------------------------------------------------------

def test_identity_soft_threshold():
    y, obj = lasso_cd(np.eye(2), [3.0, 0.5], 1.0)
    assert y.tolist() == [2.0, 0.0]
    assert obj == pytest.approx(0.5 * 0.25 + 0.5 * 1 + 2.0)


def test_large_gamma_gives_zero(rng):
    D = unit_dictionary(rng, 6, 4)
    x = rng.normal(size=6)
    y, _ = lasso_cd(D, x, np.abs(D.T @ x).max() * 1.0001)
    assert not np.any(y)


@pytest.mark.parametrize("seed", range(5))
def test_matches_exhaustive_oracle(seed):
    rng = np.random.default_rng(seed)
    D = unit_dictionary(rng, 8, 5)
    x = rng.normal(size=8)
    y, obj = lasso_cd(D, x, 0.1)
    y_ref, obj_ref = exhaustive_lasso(D, x, 0.1)
    assert abs(obj - obj_ref) <= 1e-8
    assert np.allclose(y, y_ref, atol=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_nonneg_matches_exhaustive_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    D = np.abs(unit_dictionary(rng, 8, 5))
    x = np.abs(rng.normal(size=8))
    y, obj = lasso_cd(D, x, 0.05, nonneg=True)
    _, obj_ref = exhaustive_lasso(D, x, 0.05, nonneg=True)
    assert np.all(y >= 0)
    assert abs(obj - obj_ref) <= 1e-8


@given(st.integers(1, 12), st.floats(0.01, 2.0), st.integers(0, 10_000))
def test_orthonormal_is_soft_threshold(k, gamma, seed):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(k, k)))
    x = rng.normal(size=k)
    y, _ = lasso_cd(Q, x, gamma)
    assert np.allclose(y, soft_threshold(Q.T @ x, gamma), atol=1e-8, rtol=0)


@given(st.integers(2, 10), st.integers(1, 12), st.booleans(), st.integers(0, 10_000))
def test_kkt_holds(bands, atoms, nonneg, seed):
    rng = np.random.default_rng(seed)
    D = unit_dictionary(rng, bands, atoms)
    x = rng.normal(size=bands)
    gamma = rng.uniform(0.01, 1.0)
    y, obj = lasso_cd(D, x, gamma, nonneg=nonneg)
    assert lasso_kkt_violation(D, x, y, gamma, nonneg) <= 1e-6
    assert obj == pytest.approx(0.5 * np.sum((x - D @ y) ** 2) + gamma * np.abs(y).sum())
    if nonneg:
        assert np.all(y >= 0)


def test_batch_equals_single_columns(rng):
    D = unit_dictionary(rng, 6, 9)
    X = rng.normal(size=(6, 7))
    Y, obj = lasso_cd_batch(D, X, 0.2)
    for i in range(7):
        y, o = lasso_cd(D, X[:, i], 0.2)
        assert o == pytest.approx(obj[i], rel=1e-10)


def test_warm_start_does_not_hurt(rng):
    D = unit_dictionary(rng, 6, 9)
    X = rng.normal(size=(6, 5))
    Y0 = rng.normal(size=(9, 5))
    _, obj = lasso_cd_batch(D, X, 0.3, max_iter=2, Y0=Y0)
    assert np.all(obj <= solvers.lasso_objective(D, X, Y0, 0.3) + 1e-12)


def test_large_scale_data_tolerance(rng):
    # overcomplete, nearly collinear atoms and spectra around 1e3
    base = np.abs(rng.normal(size=(16, 6)))
    D = np.abs(base[:, rng.integers(0, 6, 40)] + 0.05 * rng.normal(size=(16, 40)))
    D /= np.linalg.norm(D, axis=0)
    X = 1000 * D[:, :6] @ rng.uniform(0.2, 1.0, size=(6, 30))
    Y, _ = lasso_cd_batch(D, X, 1.0, nonneg=True, data_rtol=1e-4, max_iter=20000)
    scale = np.abs(D.T @ X).max(axis=0)
    for i in range(30):
        viol = lasso_kkt_violation(D, X[:, i], Y[:, i], 1.0, nonneg=True)
        assert viol <= max(1e-10, 1e-4 * scale[i])


def test_lasso_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        lasso_cd(np.eye(3), np.ones(4), 1.0)


# -- joint sparse ------------------------------------------------------------

def test_mfocuss_single_column_matches_lasso(rng):
    for _ in range(5):
        D = unit_dictionary(rng, 10, 6)
        x = rng.normal(size=10)
        y, trace = mfocuss(D, x[:, None], 0.3)
        _, obj = lasso_cd(D, x, 0.3)
        assert trace[-1] == pytest.approx(obj, rel=1e-4)


def test_mfocuss_zero_for_large_gamma(rng):
    D = unit_dictionary(rng, 8, 5)
    X = rng.normal(size=(8, 4))
    gamma = 10 * np.abs(D.T @ X).max() * 2.0
    Y, _ = mfocuss(D, X, gamma)
    assert not np.any(Y)
    assert np.all(np.linalg.norm(D.T @ X, axis=1) <= gamma)


def test_two_identical_columns_closed_form():
    X = np.array([[5.0, 5.0], [0.0, 0.0], [0.0, 0.0]])
    gamma = 2.0
    # minimise 1/2 * 2 (5 - y)^2 + gamma sqrt(2) |y|  ->  y = 5 - gamma / sqrt(2)
    expected = 5.0 - gamma / np.sqrt(2.0)
    Y, _ = mfocuss(np.eye(3), X, gamma, TIGHT)
    assert np.count_nonzero(np.linalg.norm(Y, axis=1)) == 1
    assert Y[0, 0] == Y[0, 1]
    assert Y[0, 0] == pytest.approx(expected, abs=1e-6)
    Yb, _ = mmv_bcd(np.eye(3), X, gamma)
    assert Yb[0].tolist() == pytest.approx([expected] * 2, abs=1e-12)


def test_bcd_single_row_closed_form():
    Y, trace = mmv_bcd(np.array([[1.0], [0.0]]), np.array([[4.0], [0.0]]), 1.0)
    assert Y[0, 0] == pytest.approx(3.0)
    assert len(trace) == 3   # initial, first sweep, confirming sweep


def test_bcd_large_gamma_zero(rng):
    D = unit_dictionary(rng, 6, 4)
    X = rng.normal(size=(6, 3))
    Y, _ = mmv_bcd(D, X, 1e6)
    assert not np.any(Y)


@pytest.mark.parametrize("seed", range(10))
def test_mfocuss_agrees_with_bcd(seed):
    rng = np.random.default_rng(seed)
    D = unit_dictionary(rng, 12, 8)
    X = rng.normal(size=(12, 5))
    _, t1 = mfocuss(D, X, 0.5)
    _, t2 = mmv_bcd(D, X, 0.5)
    assert abs(t1[-1] - t2[-1]) <= 1e-6 * abs(t2[-1])


def test_mfocuss_against_cvxpy(rng):
    cp = pytest.importorskip("cvxpy")
    D = unit_dictionary(rng, 8, 6)
    X = rng.normal(size=(8, 4))
    gamma = 0.7
    Yv = cp.Variable((6, 4))
    cost = 0.5 * cp.sum_squares(X - D @ Yv) + gamma * cp.sum(cp.norm(Yv, 2, axis=1))
    cp.Problem(cp.Minimize(cost)).solve()
    _, trace = mfocuss(D, X, gamma, TIGHT)
    ref = group_objective(D, X, Yv.value, gamma)
    assert trace[-1] <= ref * (1 + 1e-6)
    assert trace[-1] >= ref * (1 - 1e-6)


@given(st.integers(2, 12), st.integers(1, 10), st.integers(1, 8), st.integers(0, 10_000))
def test_traces_monotone(bands, atoms, size, seed):
    rng = np.random.default_rng(seed)
    D = unit_dictionary(rng, bands, atoms)
    X = rng.normal(size=(bands, size))
    gamma = rng.uniform(0.05, 2.0)
    for solve in (mfocuss, mmv_bcd):
        _, trace = solve(D, X, gamma)
        assert np.all(np.diff(trace) <= 1e-10)


@given(st.integers(3, 12), st.integers(2, 8), st.integers(1, 8), st.integers(0, 10_000))
def test_row_sparsity_shared_support(bands, atoms, size, seed):
    rng = np.random.default_rng(seed)
    D = unit_dictionary(rng, bands, atoms)
    X = rng.normal(size=(bands, size))
    Y, _ = mfocuss(D, X, 1.0)
    rows = np.linalg.norm(Y, axis=1) > 0
    assert np.array_equal(Y[~rows], np.zeros_like(Y[~rows]))


def test_stationarity_at_fixed_point(rng):
    D = unit_dictionary(rng, 12, 8)
    X = rng.normal(size=(12, 6))
    Y, _ = mfocuss(D, X, 0.5)
    assert stationarity_residual(D, X, Y, 0.5) <= 1e-4


def test_solver_errors(rng):
    D = unit_dictionary(rng, 4, 3)
    X = rng.normal(size=(4, 2))
    Y0 = np.ones((3, 2))
    Y0[1] = 0
    with pytest.raises(ZeroInitRow):
        mfocuss(D, X, 1.0, Y_init=Y0)
    D0 = D.copy()
    D0[:, 2] = 0
    with pytest.raises(ZeroAtom):
        mmv_bcd(D0, X, 1.0)
    with pytest.raises(DimensionMismatch):
        mfocuss(D, np.ones((5, 2)), 1.0)


# -- batch coding -------------------------------------------------------------

def test_singleton_groups_match_lasso(rng):
    D = unit_dictionary(rng, 10, 6)
    X = rng.normal(size=(10, 12))
    codes = code_groups(D, X, singleton_partition(12), 0.3)
    _, ref = lasso_cd_batch(D, X, 0.3)
    got = solvers.lasso_objective(D, X, codes.dense, 0.3)
    assert np.allclose(got, ref, rtol=1e-4)


@pytest.mark.parametrize("solver", [MFOCUSS, BCD])
def test_thread_count_is_bitwise_irrelevant(rng, solver):
    D = unit_dictionary(rng, 10, 12)
    X = rng.normal(size=(10, 60))
    groups = np.array_split(np.arange(60), 15)
    ref = code_groups(D, X, groups, 0.5, solver=solver, n_jobs=1)
    for n in (2, 4):
        assert code_groups(D, X, groups, 0.5, solver=solver, n_jobs=n) == ref
    reordered = code_groups(D, X, groups[::-1], 0.5, solver=solver)
    assert reordered == ref


def test_lasso_blocks_thread_invariant(rng):
    D = unit_dictionary(rng, 8, 10)
    X = rng.normal(size=(8, 600))
    ref = code_samples(D, X, 0.2, n_jobs=1)
    assert code_samples(D, X, 0.2, n_jobs=3) == ref


def test_empty_group_list(rng):
    D = unit_dictionary(rng, 4, 3)
    codes = code_groups(D, np.zeros((4, 0)), [], 1.0)
    assert codes.dense.shape == (3, 0) and codes.nnz == 0


def test_warm_start_never_worse(rng):
    D = unit_dictionary(rng, 8, 10)
    X = rng.normal(size=(8, 24))
    groups = np.array_split(np.arange(24), 4)
    prev = CodeMatrix(rng.normal(size=(10, 24)) * 0.1)
    for solver in (MFOCUSS, BCD):
        codes = code_groups(D, X, groups, 0.4, solver=solver, warm_start=prev)
        for g in groups:
            assert (group_objective(D, X[:, g], codes.dense[:, g], 0.4)
                    <= group_objective(D, X[:, g], prev.dense[:, g], 0.4) + 1e-12)
