"""Small dense linear-algebra kernels shared by the recovery solvers.

Vectors may be real or complex; everything is computed in double precision.
A "support" is a sorted 1-D integer array of distinct column indexes.
"""

import numpy as np
import scipy.linalg

# numerical rank cutoff, relative to the largest singular value
RANK_RTOL = 1e-10


def soft_threshold(v, t):
    """Complex soft threshold: shrink each magnitude by t, keep the phase.

    Entries with |v_i| <= t map to exactly 0.  For real input this is the
    usual sign(v) * max(|v| - t, 0).
    """
    if t < 0:
        raise ValueError("threshold must be >= 0")
    v = np.asarray(v)
    mags = np.abs(v)
    shrunk = np.maximum(mags - t, 0.0)
    scale = np.zeros_like(mags)
    nz = mags > 0
    scale[nz] = shrunk[nz] / mags[nz]
    return v * scale


def argmax_k(v, k):
    """Indexes of the k largest-magnitude entries of v, sorted ascending.

    Ties are broken toward the lowest index so the result is deterministic.
    """
    v = np.asarray(v)
    if not 1 <= k <= v.size:
        raise ValueError(f"k must be in [1, {v.size}], got {k}")
    # stable sort on -|v|: equal magnitudes keep their original (ascending) order
    order = np.argsort(-np.abs(v), kind="stable")
    return np.sort(order[:k])


def least_squares(b, y):
    """Solve min_s ||b s - y||_2 for a dense m x k matrix b.

    Full-rank systems go through a column-pivoted QR solve; if the numerical
    rank drops below k the SVD-based minimum-norm solution is returned
    instead (rank cutoff RANK_RTOL relative to the largest diagonal of R).
    """
    b = np.asarray(b)
    y = np.asarray(y)
    if b.ndim != 2:
        raise ValueError("matrix must be 2-D")
    if y.shape != (b.shape[0],):
        raise ValueError("right-hand side length does not match the matrix")
    k = b.shape[1]
    q, r, piv = scipy.linalg.qr(b, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if b.shape[0] >= k and diag.size == k and diag.min() > RANK_RTOL * diag.max():
        z = scipy.linalg.solve_triangular(r, q.conj().T @ y)
        s = np.empty_like(z)
        s[piv] = z
        return s
    # rank deficient (or underdetermined): minimum-norm solution
    s, *_ = scipy.linalg.lstsq(b, y, cond=RANK_RTOL, lapack_driver="gelsd")
    return s


def residual_delta(r, r_prev):
    """l2 distance between consecutive residuals, the solver stop signal."""
    r = np.asarray(r)
    r_prev = np.asarray(r_prev)
    if r.shape != r_prev.shape:
        raise ValueError("residual lengths differ")
    return float(np.linalg.norm(r - r_prev))


def gather_columns(a, support):
    """Columns of a (a matrix or anything with a .matrix) at the support indexes."""
    matrix = a.matrix if hasattr(a, "matrix") else np.asarray(a)
    support = np.asarray(support, dtype=np.intp)
    if support.size and (support.min() < 0 or support.max() >= matrix.shape[1]):
        raise IndexError("support index out of range")
    return matrix[:, support]
