"""Symmetric vectorization algebra.

``svec`` stacks the upper triangle of a symmetric matrix row by row,
scaling off-diagonal entries by sqrt(2) so that ``||svec(X)||_2`` equals
``||X||_F``. ``vec`` stacks columns. The duplication matrix ``D_n`` links the
two: ``vec(X) = D_n svec(X)`` and ``svec(X) = D_n^+ vec(X)``.
"""

from functools import lru_cache

import numpy as np

from .errors import AsymmetricInput, BadLength

SQRT2 = np.sqrt(2.0)
SYM_TOL = 1e-10


def svec_len(n):
    return n * (n + 1) // 2


def svec_order(length):
    """Return ``n`` with ``n(n+1)/2 == length``; raise :class:`BadLength` otherwise."""
    n = int(round((np.sqrt(8 * length + 1) - 1) / 2))
    if n < 0 or svec_len(n) != length:
        raise BadLength(f"length {length} is not a triangular number")
    return n


@lru_cache(maxsize=64)
def _svec_index(n):
    iu, ju = np.triu_indices(n)
    scale = np.where(iu == ju, 1.0, SQRT2)
    for arr in (iu, ju, scale):
        arr.setflags(write=False)
    return iu, ju, scale


def check_symmetric(X, tol=SYM_TOL, name="X"):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise AsymmetricInput(f"{name} must be square, got shape {X.shape}")
    scale = max(np.linalg.norm(X), 1.0)
    if np.linalg.norm(X - X.T) > tol * scale:
        raise AsymmetricInput(f"{name} is not symmetric within {tol:g} (relative)")
    return X


def sym(X):
    """Symmetric part ``(X + X^T) / 2``."""
    return 0.5 * (X + X.T)


def svec(X, tol=SYM_TOL, check=True):
    """Scaled upper-triangle vectorization of a symmetric matrix.

    >>> svec(np.array([[1.0, 2.0], [2.0, 3.0]]))
    array([1.        , 2.82842712, 3.        ])
    """
    X = check_symmetric(X, tol) if check else np.asarray(X, dtype=float)
    iu, ju, scale = _svec_index(X.shape[0])
    return X[iu, ju] * scale


def smat(v):
    """Inverse of :func:`svec`."""
    v = np.asarray(v, dtype=float).ravel()
    n = svec_order(v.size)
    iu, ju, scale = _svec_index(n)
    X = np.zeros((n, n))
    X[iu, ju] = v / scale
    X[ju, iu] = X[iu, ju]
    return X


def vec(X):
    """Column-stacking vectorization."""
    return np.asarray(X, dtype=float).reshape(-1, order="F")


def vec_inv(v, m, n=None):
    """Inverse of :func:`vec` for an ``m x n`` matrix (``n`` defaults to ``m``)."""
    n = m if n is None else n
    v = np.asarray(v, dtype=float).ravel()
    if v.size != m * n:
        raise BadLength(f"cannot reshape length {v.size} into {m}x{n}")
    return v.reshape((m, n), order="F")


@lru_cache(maxsize=64)
def _duplication(n):
    iu, ju, _ = _svec_index(n)
    D = np.zeros((n * n, svec_len(n)))
    for k, (i, j) in enumerate(zip(iu, ju)):
        if i == j:
            D[i * n + i, k] = 1.0
        else:
            D[j * n + i, k] = 1.0 / SQRT2
            D[i * n + j, k] = 1.0 / SQRT2
    D.setflags(write=False)
    return D


def duplication_matrix(n):
    """The ``n^2 x n(n+1)/2`` matrix with ``vec(X) = D @ svec(X)`` for symmetric X."""
    if n < 1:
        raise ValueError("order must be at least 1")
    return _duplication(n)


def duplication_pinv(n):
    # columns of D are orthonormal, so the pseudoinverse is the transpose
    return duplication_matrix(n).T


def pinv(M, rank_tol=1e-10):
    """Moore-Penrose pseudoinverse via SVD.

    Singular values below ``rank_tol * sigma_max`` are treated as zero.
    """
    M = np.asarray(M, dtype=float)
    if M.size == 0 or not np.any(M):
        return np.zeros(M.shape[::-1])
    return np.linalg.pinv(M, rcond=rank_tol)
