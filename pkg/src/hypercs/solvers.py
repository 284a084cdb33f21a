"""Per-pixel sparse recovery solvers.

All five solvers share the same contract: given measurements y (length m),
a Dictionary whose matrix A maps sparse-domain vectors to measurements, and
a SolverConfig, return a SolverResult whose x estimates the sparse-domain
vector from y ~ A x.  Iterations run until the l2 distance between
consecutive residuals y - A x drops below epsilon, a wall-clock budget runs
out, or an iteration cap is hit; the distance starts at 1 so every solver
performs at least one iteration (except for y = 0, which short-circuits to
the zero vector).

fista and admm minimize the lasso objective
    H(x) = 0.5 * ||A x - y||^2 + lam * ||x||_1;
gomp, biht and cosamp greedily build a support of at most kappa atoms.
Solvers draw no randomness, so results are reproducible bit for bit when
the time budget is disabled.
"""

import enum
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .kernels import argmax_k, least_squares, residual_delta, soft_threshold


class NumericalFailure(RuntimeError):
    """A solver produced non-finite values; iteration stores where."""

    def __init__(self, iteration):
        super().__init__(f"non-finite values at iteration {iteration}")
        self.iteration = iteration


@dataclass
class SolverConfig:
    """Shared solver parameters.

    lam            l1 weight of the lasso objective (fista, admm)
    kappa          target sparsity of the greedy solvers
    atoms_per_iter support indexes gomp adds per iteration; defaults to
                   max(1, kappa // 5)
    mu             gradient step factor of biht
    alpha          quadratic penalty of admm
    epsilon        residual-delta convergence threshold
    time_limit     wall-clock budget in seconds, None disables it
    max_iter       iteration cap, None means unlimited
    seed           reproducibility record; the solvers themselves draw no
                   randomness
    """

    lam: float = 0.1
    kappa: int = 1
    atoms_per_iter: int | None = None
    mu: float = 0.1
    alpha: float = 1.8
    epsilon: float = 1e-8
    time_limit: float | None = 2.0
    max_iter: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.atoms_per_iter is None:
            self.atoms_per_iter = max(1, self.kappa // 5)
        if not 1 <= self.atoms_per_iter <= self.kappa:
            raise ValueError("atoms_per_iter must be in [1, kappa]")
        if self.mu <= 0:
            raise ValueError("mu must be > 0")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time_limit must be > 0 or None")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be >= 1 or None")


@dataclass
class SolverResult:
    x: np.ndarray
    iterations: int
    converged: bool
    elapsed: float
    final_delta: float
    admm_gap: float | None = None  # ||x - z|| at termination, admm only


class StopDecision(enum.Enum):
    CONTINUE = "continue"
    CONVERGED = "converged"
    TIMEOUT = "timeout"
    ITER_CAP = "iter_cap"


@dataclass
class SolverState:
    """Residual bookkeeping consulted by the stop rule."""

    residual: np.ndarray
    residual_prev: np.ndarray | None = None
    delta: float = 1.0
    iterations: int = 0


def stop_check(state, config, elapsed):
    """Stop rule shared by every solver, checked before each iteration.

    Convergence (delta < epsilon, strictly) wins over the time budget,
    which wins over the iteration cap.
    """
    if state.delta < config.epsilon:
        return StopDecision.CONVERGED
    if config.time_limit is not None and elapsed >= config.time_limit:
        return StopDecision.TIMEOUT
    if config.max_iter is not None and state.iterations >= config.max_iter:
        return StopDecision.ITER_CAP
    return StopDecision.CONTINUE


def lasso_objective(x, y, dictionary, lam):
    """H(x) = 0.5 ||A x - y||^2 + lam * sum |x_i| (complex-safe)."""
    matrix = dictionary.matrix if hasattr(dictionary, "matrix") else np.asarray(dictionary)
    r = matrix @ x - y
    return 0.5 * float(np.real(np.vdot(r, r))) + lam * float(np.abs(x).sum())


def _prep(y, dictionary):
    a = dictionary.matrix
    y = np.asarray(y, dtype=np.complex128)
    if y.shape != (a.shape[0],):
        raise ValueError(f"measurement length {y.shape} does not match {a.shape[0]} rows")
    return a, y


def _zero_result(n, start):
    return SolverResult(
        x=np.zeros(n, dtype=np.complex128),
        iterations=0,
        converged=True,
        elapsed=time.perf_counter() - start,
        final_delta=0.0,
    )


def _check_finite(x, delta, iteration):
    if not (math.isfinite(delta) and np.isfinite(x).all()):
        raise NumericalFailure(iteration)


def _fista_momentum(t):
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))


def fista(y, dictionary, config):
    """Accelerated proximal-gradient lasso solve."""
    start = time.perf_counter()
    a, y = _prep(y, dictionary)
    n = a.shape[1]
    if not y.any():
        return _zero_result(n, start)
    ah = a.conj().T
    inv_l = 1.0 / dictionary.lipschitz
    threshold = config.lam * inv_l
    x = np.zeros(n, dtype=np.complex128)
    z = x
    t = 1.0
    state = SolverState(residual=y)
    while True:
        decision = stop_check(state, config, time.perf_counter() - start)
        if decision is not StopDecision.CONTINUE:
            break
        # 1. gradient step on the quadratic term at the extrapolated point
        aux = z - inv_l * (ah @ (a @ z - y))
        # 2. proximal shrinkage
        x_new = soft_threshold(aux, threshold)
        # 3. momentum weight update
        t_new = _fista_momentum(t)
        # 4. extrapolation
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
        # 5. residual delta feeds the stop rule
        state.residual_prev = state.residual
        state.residual = y - a @ x
        state.delta = residual_delta(state.residual, state.residual_prev)
        state.iterations += 1
        _check_finite(x, state.delta, state.iterations)
    return SolverResult(
        x=x,
        iterations=state.iterations,
        converged=decision is StopDecision.CONVERGED,
        elapsed=time.perf_counter() - start,
        final_delta=state.delta,
    )


def admm(y, dictionary, config):
    """Scaled-dual alternating-direction lasso solve; returns the sparse
    iterate z."""
    start = time.perf_counter()
    a, y = _prep(y, dictionary)
    n = a.shape[1]
    if not y.any():
        return _zero_result(n, start)
    factor = dictionary.admm_factor(config.alpha)
    aty = a.conj().T @ y
    # prox threshold of the l1 term under the scaled dual: lam / alpha
    threshold = config.lam / config.alpha
    x = np.zeros(n, dtype=np.complex128)
    z = np.zeros(n, dtype=np.complex128)
    w = np.zeros(n, dtype=np.complex128)
    state = SolverState(residual=y)
    while True:
        decision = stop_check(state, config, time.perf_counter() - start)
        if decision is not StopDecision.CONTINUE:
            break
        # 1. quadratic solve through the cached factorization
        x = scipy.linalg.cho_solve(factor, aty + config.alpha * (z - w))
        # 2. shrinkage step
        z = soft_threshold(x + w, threshold)
        # 3. dual update
        w = w + x - z
        # 4. residual delta from the x iterate
        state.residual_prev = state.residual
        state.residual = y - a @ x
        state.delta = residual_delta(state.residual, state.residual_prev)
        state.iterations += 1
        _check_finite(z, state.delta, state.iterations)
    return SolverResult(
        x=z.copy(),
        iterations=state.iterations,
        converged=decision is StopDecision.CONVERGED,
        elapsed=time.perf_counter() - start,
        final_delta=state.delta,
        admm_gap=float(np.linalg.norm(x - z)),
    )


def gomp(y, dictionary, config):
    """Generalized orthogonal matching pursuit with a kappa-prune re-solve.

    Grows the accumulated support by the atoms_per_iter strongest residual
    projections each iteration, then re-fits on the kappa strongest entries
    of the scattered least-squares solution.
    """
    start = time.perf_counter()
    a, y = _prep(y, dictionary)
    m, n = a.shape
    kappa = config.kappa
    if not config.atoms_per_iter <= kappa <= m:
        raise ValueError(f"need atoms_per_iter <= kappa <= {m}")
    if not y.any():
        return _zero_result(n, start)
    ah = a.conj().T
    support = np.empty(0, dtype=np.intp)
    x = np.zeros(n, dtype=np.complex128)
    state = SolverState(residual=y.copy())
    while True:
        decision = stop_check(state, config, time.perf_counter() - start)
        if decision is not StopDecision.CONTINUE:
            break
        # 1. strongest residual projections extend the accumulated support
        p = ah @ state.residual
        support = np.union1d(support, argmax_k(p, config.atoms_per_iter))
        if support.size > m:
            # support outgrew the measurement count: keep the last iterate
            break
        # 2. least squares on the accumulated atoms
        s = least_squares(a[:, support], y)
        # 3. prune to the kappa strongest entries and re-fit on those
        x = np.zeros(n, dtype=np.complex128)
        x[support] = s
        top = argmax_k(x, kappa)
        x = np.zeros(n, dtype=np.complex128)
        x[top] = least_squares(a[:, top], y)
        # 4. residual delta
        state.residual_prev = state.residual
        state.residual = y - a @ x
        state.delta = residual_delta(state.residual, state.residual_prev)
        state.iterations += 1
        _check_finite(x, state.delta, state.iterations)
    return SolverResult(
        x=x,
        iterations=state.iterations,
        converged=decision is StopDecision.CONVERGED,
        elapsed=time.perf_counter() - start,
        final_delta=state.delta,
    )


def biht(y, dictionary, config):
    """Iterative hard thresholding with a least-squares backtracking prune."""
    start = time.perf_counter()
    a, y = _prep(y, dictionary)
    m, n = a.shape
    kappa = config.kappa
    if kappa > m:
        raise ValueError(f"kappa must be <= {m}")
    if not y.any():
        return _zero_result(n, start)
    ah = a.conj().T
    x = np.zeros(n, dtype=np.complex128)
    state = SolverState(residual=y.copy())
    while True:
        decision = stop_check(state, config, time.perf_counter() - start)
        if decision is not StopDecision.CONTINUE:
            break
        # 1. gradient proxy, candidate support = top entries + current support
        u = x + config.mu * (ah @ (y - a @ x))
        support = np.union1d(argmax_k(u, kappa), np.flatnonzero(x))
        if support.size > m:
            break
        # 2. least squares on the candidates
        s = least_squares(a[:, support], y)
        # 3. keep the kappa strongest entries of s, zero the rest
        keep = argmax_k(s, min(kappa, s.size))
        pruned = np.zeros_like(s)
        pruned[keep] = s[keep]
        x = np.zeros(n, dtype=np.complex128)
        x[support] = pruned
        # 4. residual delta
        state.residual_prev = state.residual
        state.residual = y - a @ x
        state.delta = residual_delta(state.residual, state.residual_prev)
        state.iterations += 1
        _check_finite(x, state.delta, state.iterations)
    return SolverResult(
        x=x,
        iterations=state.iterations,
        converged=decision is StopDecision.CONVERGED,
        elapsed=time.perf_counter() - start,
        final_delta=state.delta,
    )


def cosamp(y, dictionary, config):
    """Compressive sampling matching pursuit.

    The candidate set joins the 2*kappa strongest residual projections with
    the support kept after the previous prune.
    """
    start = time.perf_counter()
    a, y = _prep(y, dictionary)
    m, n = a.shape
    kappa = config.kappa
    if 2 * kappa > n:
        raise ValueError(f"need 2 * kappa <= {n}")
    if kappa > m:
        raise ValueError(f"kappa must be <= {m}")
    if not y.any():
        return _zero_result(n, start)
    ah = a.conj().T
    support = np.empty(0, dtype=np.intp)
    x = np.zeros(n, dtype=np.complex128)
    state = SolverState(residual=y.copy())
    while True:
        decision = stop_check(state, config, time.perf_counter() - start)
        if decision is not StopDecision.CONTINUE:
            break
        # 1. candidate set: 2*kappa strongest projections + kept support
        p = ah @ state.residual
        support = np.union1d(support, argmax_k(p, 2 * kappa))
        if support.size > m:
            break
        # 2. least squares on the candidates
        s = least_squares(a[:, support], y)
        # 3. prune values and support to the kappa strongest
        keep = argmax_k(s, min(kappa, s.size))
        support = support[keep]
        s = s[keep]
        x = np.zeros(n, dtype=np.complex128)
        x[support] = s
        # 4. residual delta
        state.residual_prev = state.residual
        state.residual = y - a @ x
        state.delta = residual_delta(state.residual, state.residual_prev)
        state.iterations += 1
        _check_finite(x, state.delta, state.iterations)
    return SolverResult(
        x=x,
        iterations=state.iterations,
        converged=decision is StopDecision.CONVERGED,
        elapsed=time.perf_counter() - start,
        final_delta=state.delta,
    )


SOLVERS = {
    "fista": fista,
    "admm": admm,
    "gomp": gomp,
    "biht": biht,
    "cosamp": cosamp,
}
CONVEX_SOLVERS = ("fista", "admm")
GREEDY_SOLVERS = ("gomp", "biht", "cosamp")


def derive_pixel_seed(run_seed, pixel_index):
    """Stable per-pixel seed so results never depend on worker scheduling."""
    return (run_seed * 6364136223846793005 + pixel_index * 1442695040888963407) % (2**63)


@dataclass
class RecoveryStats:
    """Aggregate of a whole-cube recovery.

    results holds one SolverResult per pixel in raster order (x-major),
    None where the solver failed numerically; failed_pixels lists those
    (x, y, iteration) triples.
    """

    n_pixels: int
    n_converged: int
    n_failed: int
    n_zero_pixels: int
    total_iterations: int
    recovery_time_s: float
    results: list = field(repr=False, default_factory=list)
    failed_pixels: list = field(default_factory=list)

    @property
    def convergence_pct(self):
        return 100.0 * self.n_converged / self.n_pixels if self.n_pixels else 0.0


_POOL = {}


def _pool_init(dictionary, config, algorithm):
    _POOL["dictionary"] = dictionary
    _POOL["config"] = config
    _POOL["solver"] = SOLVERS[algorithm]


def _pool_solve(item):
    index, y = item
    config = _POOL["config"]
    pixel_config = replace(config, seed=derive_pixel_seed(config.seed, index))
    try:
        return index, _POOL["solver"](y, _POOL["dictionary"], pixel_config), None
    except NumericalFailure as exc:
        return index, None, exc.iteration


def recover_cube(measurements, dictionary, config, algorithm, jobs=1):
    """Solve every pixel of an (x, y, m) measurement array.

    Returns (sparse-domain cube of shape (x, y, n), RecoveryStats).  A pixel
    whose solver fails numerically is flagged and left at zero; the cube is
    never aborted.  With jobs > 1 pixels are distributed over worker
    processes; results are identical to the serial run because each pixel
    is solved independently with a seed derived from its index.
    """
    if algorithm not in SOLVERS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    meas = np.asarray(measurements, dtype=np.complex128)
    if meas.ndim != 3:
        raise ValueError("measurements must be (x, y, m)")
    x_dim, y_dim, m = meas.shape
    if m != dictionary.m:
        raise ValueError("measurement length does not match the dictionary")
    if algorithm == "admm":
        # build the factorization once, before any worker fork
        dictionary.admm_factor(config.alpha)
    if jobs is None or jobs < 1:
        jobs = os.cpu_count() or 1

    n_pixels = x_dim * y_dim
    flat = meas.reshape(n_pixels, m)
    results = [None] * n_pixels
    failures = []
    if jobs == 1:
        _pool_init(dictionary, config, algorithm)
        outcomes = map(_pool_solve, ((i, flat[i]) for i in range(n_pixels)))
        outcomes = list(outcomes)
        _POOL.clear()
    else:
        with ProcessPoolExecutor(
            max_workers=jobs,
            initializer=_pool_init,
            initargs=(dictionary, config, algorithm),
        ) as pool:
            outcomes = list(pool.map(_pool_solve, ((i, flat[i]) for i in range(n_pixels)), chunksize=8))

    cube = np.zeros((x_dim, y_dim, dictionary.n), dtype=np.complex128)
    for index, result, failed_at in outcomes:
        ix, iy = divmod(index, y_dim)
        if result is None:
            failures.append((ix, iy, failed_at))
        else:
            results[index] = result
            cube[ix, iy, :] = result.x
    solved = [r for r in results if r is not None]
    stats = RecoveryStats(
        n_pixels=n_pixels,
        n_converged=sum(r.converged for r in solved),
        n_failed=len(failures),
        n_zero_pixels=sum(r.iterations == 0 and r.converged for r in solved),
        total_iterations=sum(r.iterations for r in solved),
        recovery_time_s=sum(r.elapsed for r in solved),
        results=results,
        failed_pixels=failures,
    )
    return cube, stats
