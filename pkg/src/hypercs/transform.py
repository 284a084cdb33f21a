"""Unitary DFT dictionary, magnitude-based sparsification, and subsampling.

A length-N spectrum f and its inverse-DFT representation x are related by
f = basis.matrix @ x with the unitary DFT matrix (entry (j, k) is
exp(-2j*pi*j*k/N) / sqrt(N)).  Measurements keep a seeded random subset of
the spectral samples: y = f[mask.indices] = A x, where A holds the selected
rows of the basis.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

POWER_ITER_CAP = 1000
POWER_ITER_RTOL = 1e-10


@dataclass
class DftBasis:
    """Dense unitary DFT matrix of size n."""

    n: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("basis size must be >= 1")
        if self.matrix.shape != (self.n, self.n):
            raise ValueError("basis matrix shape mismatch")


def build_dft_basis(n):
    """Unitary DFT basis of size n (unitary to machine precision)."""
    if n < 1:
        raise ValueError("basis size must be >= 1")
    return DftBasis(n=n, matrix=scipy.linalg.dft(n, scale="sqrtn"))


def to_sparse_domain(f, basis):
    """Inverse-DFT representation x of a spectrum f (x = basis^H f)."""
    f = np.asarray(f)
    if f.shape != (basis.n,):
        raise ValueError("spectrum length does not match the basis")
    return basis.matrix.conj().T @ f


def from_sparse_domain(x, basis):
    """Spectrum for a sparse-domain vector x.

    Returns (real part of basis @ x, largest imaginary magnitude).  The
    imaginary residue is diagnostic: it stays near machine precision when x
    is conjugate-symmetric, i.e. came from a real spectrum.
    """
    x = np.asarray(x)
    if x.shape != (basis.n,):
        raise ValueError("vector length does not match the basis")
    f = basis.matrix @ x
    residue = float(np.abs(f.imag).max()) if basis.n else 0.0
    return f.real.copy(), residue


@dataclass
class SparsifyStats:
    """Magnitude statistics recorded while sparsifying one vector."""

    mean_magnitude: float
    std_magnitude: float
    zero_fraction: float
    threshold_factor: float


def sparsify(x, factor):
    """Zero the entries of x whose magnitude sits within factor standard
    deviations of the mean magnitude.

    Entry i is zeroed when |x_i| - mean < factor * std (population std of
    |x|).  Kept entries are returned bit-identical.  A constant-magnitude
    vector has std 0 and nothing is zeroed (strict inequality).
    """
    if factor < 0:
        raise ValueError("threshold factor must be >= 0")
    x = np.asarray(x)
    if x.size == 0:
        raise ValueError("cannot sparsify an empty vector")
    mags = np.abs(x)
    mean = float(mags.mean())
    std = float(mags.std())
    keep = (mags - mean) >= factor * std
    out = np.where(keep, x, 0)
    stats = SparsifyStats(
        mean_magnitude=mean,
        std_magnitude=std,
        zero_fraction=1.0 - float(keep.mean()),
        threshold_factor=factor,
    )
    return out, stats


@dataclass
class SelectionMask:
    """Sorted subset of spectral sample indexes kept by the measurement step."""

    n: int
    indices: np.ndarray
    seed: int

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.intp)
        if self.indices.ndim != 1 or self.indices.size == 0:
            raise ValueError("mask needs at least one index")
        if self.indices.min() < 0 or self.indices.max() >= self.n:
            raise ValueError("mask index out of range")
        if np.any(np.diff(self.indices) <= 0):
            raise ValueError("mask indices must be strictly increasing")

    @property
    def m(self):
        return int(self.indices.size)


def build_selection_mask(n, ratio, seed):
    """Seeded uniform selection of round(ratio * n) indexes without replacement.

    Rounding is half-away-from-zero, so ratio 0.4 over 224 bands keeps 90.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < ratio <= 1.0:
        raise ValueError("ratio must be in (0, 1]")
    m = int(np.floor(ratio * n + 0.5))
    if m < 1:
        raise ValueError("ratio keeps no samples")
    rng = np.random.default_rng(seed)
    indices = np.sort(rng.choice(n, size=m, replace=False))
    return SelectionMask(n=n, indices=indices, seed=seed)


def save_mask(mask, path):
    """Write a mask as plain text: seed, ambient size, then the index list."""
    lines = [
        f"seed={mask.seed}",
        f"n={mask.n}",
        "indices=" + ",".join(str(i) for i in mask.indices),
    ]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mask(path):
    fields = {}
    with open(path, encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    try:
        seed = int(fields["seed"])
        n = int(fields["n"])
        indices = np.array([int(tok) for tok in fields["indices"].split(",")], dtype=np.intp)
    except (KeyError, ValueError) as exc:
        raise ValueError(f"unreadable mask file {path}: {exc}") from None
    return SelectionMask(n=n, indices=indices, seed=seed)


def measure(f, mask):
    """Subsample a spectrum: y = f[mask.indices], promoted to complex."""
    f = np.asarray(f, dtype=np.complex128)
    if f.shape != (mask.n,):
        raise ValueError("spectrum length does not match the mask")
    return f[mask.indices]


def lipschitz_constant(matrix, max_iter=POWER_ITER_CAP, rtol=POWER_ITER_RTOL):
    """Largest eigenvalue of A^H A by power iteration.

    Deterministic: starts from the normalized all-ones vector and, if that
    start is annihilated by A^H A (it is orthogonal to the row space for
    any pure DFT-row selection that skips row 0), restarts from A^H 1 and
    then from a seeded random vector.
    """
    a = np.asarray(matrix)
    m, n = a.shape

    def gram_apply(v):
        return a.conj().T @ (a @ v)

    v = np.ones(n, dtype=np.complex128) / np.sqrt(n)
    w = gram_apply(v)
    norm_w = np.linalg.norm(w)
    if norm_w < 1e-300:
        v = a.conj().T @ np.ones(m, dtype=np.complex128)
        nv = np.linalg.norm(v)
        if nv < 1e-300:
            rng = np.random.default_rng(0)
            v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            nv = np.linalg.norm(v)
        v = v / nv
        w = gram_apply(v)
        norm_w = np.linalg.norm(w)
        if norm_w < 1e-300:
            return 0.0

    estimate = float(np.real(np.vdot(v, w)))
    for _ in range(max_iter):
        v = w / norm_w
        w = gram_apply(v)
        norm_w = np.linalg.norm(w)
        if norm_w < 1e-300:
            return 0.0
        new_estimate = float(np.real(np.vdot(v, w)))
        if abs(new_estimate - estimate) <= rtol * abs(new_estimate):
            return new_estimate
        estimate = new_estimate
    return estimate


@dataclass
class Dictionary:
    """Measurement dictionary A (selected DFT rows) with cached solver state.

    lipschitz holds the power-iteration estimate of the largest eigenvalue
    of A^H A; for any row selection of a unitary basis it equals 1.  The
    per-alpha factorizations used by the quadratic solve in ADMM are cached
    here and should be built before handing the dictionary to worker
    processes.
    """

    matrix: np.ndarray
    lipschitz: float
    mask: SelectionMask | None = None
    basis: DftBasis | None = None
    _admm_factors: dict = field(default_factory=dict, repr=False)

    @property
    def m(self):
        return int(self.matrix.shape[0])

    @property
    def n(self):
        return int(self.matrix.shape[1])

    @classmethod
    def from_matrix(cls, matrix):
        """Wrap an arbitrary dense matrix (testing and experiments)."""
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.ndim != 2:
            raise ValueError("dictionary matrix must be 2-D")
        return cls(matrix=matrix, lipschitz=lipschitz_constant(matrix))

    def admm_factor(self, alpha):
        """Cholesky factorization of (A^H A + alpha I), cached per alpha."""
        if alpha <= 0:
            raise ValueError("alpha must be > 0")
        factor = self._admm_factors.get(alpha)
        if factor is None:
            gram = self.matrix.conj().T @ self.matrix
            gram[np.diag_indices_from(gram)] += alpha
            # Hermitian positive definite for every alpha > 0
            factor = scipy.linalg.cho_factor(gram)
            self._admm_factors[alpha] = factor
        return factor


def build_dictionary(basis, mask, alpha=None):
    """Dictionary of the basis rows kept by the mask; optionally pre-factor
    the ADMM system for one alpha."""
    if mask.n != basis.n:
        raise ValueError("mask and basis sizes differ")
    rows = basis.matrix[mask.indices]
    d = Dictionary(
        matrix=rows,
        lipschitz=lipschitz_constant(rows),
        mask=mask,
        basis=basis,
    )
    if alpha is not None:
        d.admm_factor(alpha)
    return d
