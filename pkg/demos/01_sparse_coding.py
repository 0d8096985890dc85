"""
Sparse coding with the lasso
============================

Coordinate descent on a single spectrum. With an orthonormal dictionary the
lasso has a closed form, soft thresholding of ``D^T x``, so we can see the
solver land on it. With an overcomplete dictionary we check the optimality
conditions instead.
"""
import numpy as np

from scdl.solvers import lasso_cd, lasso_kkt_violation, soft_threshold

rng = np.random.default_rng(0)

# an orthonormal basis of R^8
Q, _ = np.linalg.qr(rng.normal(size=(8, 8)))
x = rng.normal(size=8)
gamma = 0.5

y, obj = lasso_cd(Q, x, gamma)
print("coordinate descent :", np.round(y, 4))
print("soft threshold     :", np.round(soft_threshold(Q.T @ x, gamma), 4))
print("objective          :", round(obj, 6))

# overcomplete: 24 unit-norm atoms in R^8
D = rng.normal(size=(8, 24))
D /= np.linalg.norm(D, axis=0)
for gamma in (0.05, 0.5, 2.0):
    y, obj = lasso_cd(D, x, gamma)
    print(f"gamma {gamma:4}: {np.count_nonzero(y):2d} nonzeros, "
          f"KKT violation / gamma {lasso_kkt_violation(D, x, y, gamma):.1e}")

# nonnegative codes, as used for spectral-only learning
y, _ = lasso_cd(D, np.abs(x), 0.1, nonneg=True)
print("nonnegative code min:", y.min())
