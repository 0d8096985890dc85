"""
Joint sparsity over a group of pixels
=====================================

Neighbouring pixels of one material use the same few atoms. Coding them as a
group with the l2/l1 penalty makes them share a support, where independent
lasso codes pick their own atoms pixel by pixel.
"""
import numpy as np

from scdl.solvers import code_samples, mfocuss, mmv_bcd, row_norms

rng = np.random.default_rng(1)
D = rng.normal(size=(16, 30))
D /= np.linalg.norm(D, axis=0)

# eight pixels built from the same three atoms, plus noise
support = [3, 11, 25]
Y_true = np.zeros((30, 8))
Y_true[support] = rng.uniform(0.5, 1.5, size=(3, 8))
X = D @ Y_true + 0.05 * rng.normal(size=(16, 8))

gamma = 0.6
Y, trace = mfocuss(D, X, gamma)
print("M-FOCUSS active rows:", np.flatnonzero(row_norms(Y)).tolist(), "(planted", support, ")")
print("objective trace     :", np.round(trace[:4], 4).tolist(), "...", round(trace[-1], 6))

Yb, tb = mmv_bcd(D, X, gamma)
print("block coordinate descent reaches", round(tb[-1], 6))

# the lasso with a comparable per-pixel weight
codes = code_samples(D, X, gamma / np.sqrt(8))
per_pixel = [np.flatnonzero(c).tolist() for c in codes.dense.T]
print("lasso supports per pixel:")
for s in per_pixel:
    print("   ", s)
