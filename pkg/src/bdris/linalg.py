"""Small complex linear-algebra helpers shared across modules."""
import numpy as np

# Numerical rank: singular values above RANK_RTOL * sigma_max count.
RANK_RTOL = 1e-9


def complex_gaussian(rng: np.random.Generator, shape, var=1.0) -> np.ndarray:
    """Draw CN(0, var) entries: real/imag parts i.i.d. N(0, var/2)."""
    scale = np.sqrt(var / 2.0)
    return rng.normal(scale=scale, size=shape) + 1j * rng.normal(scale=scale, size=shape)


def numerical_rank(a: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Count singular values above rtol * largest."""
    if min(a.shape) == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def vec(a: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return a.reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return v.reshape((rows, cols), order="F")


def min_norm_lstsq(a: np.ndarray, b: np.ndarray, rtol: float = RANK_RTOL):
    """Minimum-norm least-squares solve with a relative singular-value cutoff.

    Equivalent to ``pinv(a, rtol) @ b`` but cheaper for wide systems, where
    the Gram matrix ``a a^H`` is small.  Returns ``(x, rank)``.
    """
    m, n = a.shape
    if m == 0 or n == 0:
        shape = (n,) if b.ndim == 1 else (n, b.shape[1])
        return np.zeros(shape, dtype=complex), 0
    if m < n:
        g = a @ a.conj().T
        w, u = np.linalg.eigh(g)          # ascending eigenvalues of a a^H
        w = np.clip(w, 0.0, None)
        s = np.sqrt(w)
        keep = s > rtol * s[-1] if s[-1] > 0 else np.zeros_like(s, bool)
        rank = int(np.count_nonzero(keep))
        uk = u[:, keep]
        x = a.conj().T @ (uk @ ((uk.conj().T @ b).T / w[keep]).T)
        return x, rank
    x, _, rank, _ = np.linalg.lstsq(a, b, rcond=rtol)
    return x, int(rank)
