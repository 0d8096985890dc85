"""
Coding groups in parallel
=========================

Groups are independent given the dictionary, so they are farmed out to a
thread pool. Every group writes its own columns, so the result does not
depend on the number of threads, down to the last bit.
"""
import os
import time

import numpy as np

from scdl.solvers import code_groups

rng = np.random.default_rng(2)
bands, atoms, size, n_groups = 200, 64, 64, 256
D = rng.normal(size=(bands, atoms))
D /= np.linalg.norm(D, axis=0)
groups = [np.arange(g * size, (g + 1) * size) for g in range(n_groups)]
Y = np.zeros((atoms, size * n_groups))
for g in groups:
    Y[np.ix_(rng.choice(atoms, 4, replace=False), g)] = 1.0
X = D @ Y + 0.01 * rng.normal(size=(bands, size * n_groups))
gammas = np.full(n_groups, 1.0)

print("CPUs available:", os.cpu_count())
reference = None
for n_jobs in (1, 2, 4):
    t = time.perf_counter()
    codes = code_groups(D, X, groups, gammas, n_jobs=n_jobs)
    elapsed = time.perf_counter() - t
    if reference is None:
        reference = codes.dense.tobytes()
    same = codes.dense.tobytes() == reference
    print(f"{n_jobs} thread(s): {elapsed:.2f} s, identical to 1 thread: {same}")
