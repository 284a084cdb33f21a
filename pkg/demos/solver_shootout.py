# One pixel, five solvers.  A planted kappa-sparse spectrum is measured
# through a random partial-Fourier dictionary (40% of the bands) and every
# recovery algorithm gets the same budget.  Prints a side-by-side table.

import time

import numpy as np

from hypercs import SolverConfig, build_dft_basis, build_dictionary, build_selection_mask
from hypercs.solvers import SOLVERS

n, ratio, kappa = 64, 0.4, 5
rng = np.random.default_rng(42)

# --- planted instance ----------------------------------------------------------
mask = build_selection_mask(n, ratio, seed=42)
dictionary = build_dictionary(build_dft_basis(n), mask)
support = rng.choice(n, size=kappa, replace=False)
x_true = np.zeros(n, dtype=np.complex128)
x_true[support] = np.exp(2j * np.pi * rng.uniform(size=kappa))
y = dictionary.matrix @ x_true
print(f"n={n}, m={mask.m}, kappa={kappa}, support={sorted(support.tolist())}")

# --- run every solver ----------------------------------------------------------
configs = {
    "fista": SolverConfig(lam=1e-3, epsilon=1e-10, time_limit=None, max_iter=200_000),
    "admm": SolverConfig(lam=1e-3, alpha=1.8, epsilon=1e-10, time_limit=None, max_iter=200_000),
    "gomp": SolverConfig(kappa=kappa, atoms_per_iter=1, time_limit=None, max_iter=200),
    "biht": SolverConfig(kappa=kappa, mu=2.5, time_limit=None, max_iter=200),
    "cosamp": SolverConfig(kappa=kappa, time_limit=None, max_iter=200),
}
# biht note: with unit-norm dictionary columns scaled by sqrt(m/n), the
# gradient step needs mu near n/m (= 2.5 here) to move the support; the
# 0.1 default suits unnormalized dictionaries.

print(f"\n{'solver':8s} {'rel l2 err':>12s} {'iters':>6s} {'converged':>9s} {'wall s':>8s}")
for name, config in configs.items():
    start = time.perf_counter()
    result = SOLVERS[name](y, dictionary, config)
    wall = time.perf_counter() - start
    rel = np.linalg.norm(result.x - x_true) / np.linalg.norm(x_true)
    print(f"{name:8s} {rel:12.3e} {result.iterations:6d} {str(result.converged):>9s} {wall:8.3f}")

# The convex solvers land near the lasso optimum, not on x_true itself: the
# l1 penalty biases magnitudes, so expect ~1e-3 relative error at lam=1e-3.
# The greedy solvers recover the planted support exactly and then refit by
# least squares, which drives the error to numerical precision.
