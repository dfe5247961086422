"""Small complex linear-algebra kernel.

Vectors and matrices are plain ``numpy`` arrays of dtype ``complex128``;
the helpers here validate shapes/finiteness and provide the Hermitian
positive-definite solve used by every closed-form update.
"""

import numpy as np
import scipy.linalg

from airfl.errors import DimensionMismatch, NonHermitian, NotPositiveDefinite

HERMITIAN_RTOL = 1e-8


def as_vector(x, name="vector"):
    v = np.asarray(x, dtype=np.complex128).reshape(-1)
    if v.size == 0:
        raise DimensionMismatch(f"{name} must be non-empty")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def as_matrix(a, name="matrix"):
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.size == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def hermitian_asymmetry(a):
    """Relative Frobenius distance between ``a`` and its conjugate transpose."""
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - a.conj().T) / scale)


def cholesky(a):
    """Lower Cholesky factor of a Hermitian PD matrix, with library errors."""
    a = as_matrix(a, "A")
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"A must be square, got {a.shape}")
    if hermitian_asymmetry(a) > HERMITIAN_RTOL:
        raise NonHermitian(f"relative asymmetry {hermitian_asymmetry(a):.3e} exceeds {HERMITIAN_RTOL}")
    h = 0.5 * (a + a.conj().T)
    try:
        return scipy.linalg.cholesky(h, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def hermitian_solve(a, rhs):
    """Solve ``A x = rhs`` for Hermitian positive-definite ``A``.

    ``rhs`` may be a vector or a matrix of stacked right-hand sides.
    """
    low = cholesky(a)
    b = np.asarray(rhs, dtype=np.complex128)
    if b.shape[0] != low.shape[0]:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, A is {low.shape[0]}x{low.shape[0]}")
    return scipy.linalg.cho_solve((low, True), b, check_finite=False)


def hadamard_identity(a):
    """``A ⊙ I``: keep the diagonal, zero everything else."""
    return np.diag(np.diag(a))


def outer_sum(vectors, weights=None):
    """Σ_i w_i x_i x_i^H for rows x_i of ``vectors``."""
    x = np.asarray(vectors, dtype=np.complex128)
    if weights is not None:
        x = x * np.sqrt(np.asarray(weights, dtype=float))[:, None]
    return x.T @ x.conj()


def sample_complex_gaussian(n, variance, rng, size=None):
    """Circularly-symmetric complex Gaussian draws with per-entry variance ``variance``.

    Real and imaginary parts each carry ``variance / 2``. ``size`` overrides
    the output shape (``n`` is then ignored).
    """
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    shape = (n,) if size is None else size
    if variance == 0:
        return np.zeros(shape, dtype=np.complex128)
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
