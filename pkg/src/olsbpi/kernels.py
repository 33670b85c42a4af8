"""Hot inner loops, each with a numba and a pure-numpy implementation.

The public names (``em_cascade``, ``sym_features``, ``affine_iterate``)
dispatch to whichever backend :mod:`olsbpi._backend` selected at import.
The ``*_numpy`` and ``*_numba`` variants stay importable so tests and the
benchmark can compare them directly.
"""

import numpy as np

from ._backend import BACKEND, HAVE_NUMBA, njit

__all__ = [
    "BACKEND",
    "em_cascade",
    "em_cascade_numpy",
    "sym_features",
    "sym_features_numpy",
    "affine_iterate",
    "affine_iterate_numpy",
]


# Euler-Maruyama for dv = F v dt + sum_l M_l v dW_l + G dW_add

def em_cascade_numpy(v0, drift, noise_mats, additive, dW, dt, limit, out):
    """Write ``len(dW) + 1`` Euler-Maruyama states into ``out``.

    ``dW`` holds one row per step: the ``q`` multiplicative increments
    first, then the additive ones. Returns the index of the first state whose
    max-abs entry exceeds ``limit`` (or is not finite), else -1.
    """
    q = noise_mats.shape[0]
    steps = dW.shape[0]
    v = v0.copy()
    out[0] = v
    add = dW[:, q:] @ additive.T
    dWm = dW[:, :q]
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            dv = (drift @ v) * dt + add[k]
            if q:
                dv += dWm[k] @ (noise_mats @ v)
            v = v + dv
            out[k + 1] = v
            amax = np.max(np.abs(v))
            if not amax <= limit:
                return k + 1
    return -1


def _em_cascade_loop(v0, drift, noise_mats, additive, dW, dt, limit, out):
    q = noise_mats.shape[0]
    nv = v0.shape[0]
    r = additive.shape[1]
    steps = dW.shape[0]
    v = v0.copy()
    nxt = np.empty(nv)
    for i in range(nv):
        out[0, i] = v[i]
    for k in range(steps):
        for i in range(nv):
            acc = 0.0
            for j in range(nv):
                acc += drift[i, j] * v[j]
            acc *= dt
            for l in range(q):
                w = dW[k, l]
                s = 0.0
                for j in range(nv):
                    s += noise_mats[l, i, j] * v[j]
                acc += s * w
            for l in range(r):
                acc += additive[i, l] * dW[k, q + l]
            nxt[i] = v[i] + acc
        amax = 0.0
        for i in range(nv):
            v[i] = nxt[i]
            out[k + 1, i] = v[i]
            a = abs(v[i])
            if a > amax or a != a:
                amax = a
        if not amax <= limit:
            return k + 1
    return -1


# svec(z z^T) for each row z of Z

def _triu_map(d):
    iu, ju = np.triu_indices(d)
    scale = np.where(iu == ju, 1.0, np.sqrt(2.0))
    return iu.astype(np.int64), ju.astype(np.int64), scale


def sym_features_numpy(Z, out=None):
    """Row-wise ``svec(z z^T)`` for a 2-D array ``Z``."""
    iu, ju, scale = _triu_map(Z.shape[1])
    res = Z[:, iu] * Z[:, ju] * scale
    if out is None:
        return res
    out[...] = res
    return out


def _sym_features_loop(Z, iu, ju, scale, out):
    rows = Z.shape[0]
    cols = iu.shape[0]
    for k in range(rows):
        for c in range(cols):
            out[k, c] = Z[k, iu[c]] * Z[k, ju[c]] * scale[c]


# p <- M p + c, repeated (one RK4 step of a linear ODE per iteration)

def affine_iterate_numpy(M, c, p0, steps, limit):
    """Apply ``p <- M p + c`` ``steps`` times.

    Returns ``(p, bad)`` where ``bad`` is the 1-based step at which
    ``max|p|`` first exceeded ``limit`` (0 if never).
    """
    p = p0.copy()
    for k in range(steps):
        p = M @ p + c
        if k % 64 == 63 or k == steps - 1:
            amax = np.max(np.abs(p))
            if not amax <= limit:
                return p, k + 1
    return p, 0


def _affine_iterate_loop(M, c, p0, steps, limit):
    d = p0.shape[0]
    p = p0.copy()
    nxt = np.empty(d)
    for k in range(steps):
        amax = 0.0
        for i in range(d):
            acc = c[i]
            for j in range(d):
                acc += M[i, j] * p[j]
            nxt[i] = acc
        for i in range(d):
            p[i] = nxt[i]
            a = abs(p[i])
            if a > amax or a != a:
                amax = a
        if not amax <= limit:
            return p, k + 1
    return p, 0


if HAVE_NUMBA:
    em_cascade_numba = njit(_em_cascade_loop)
    _sym_features_jit = njit(_sym_features_loop)
    affine_iterate_numba = njit(_affine_iterate_loop)

    def sym_features_numba(Z, out=None):
        Z = np.ascontiguousarray(Z, dtype=np.float64)
        iu, ju, scale = _triu_map(Z.shape[1])
        if out is None:
            out = np.empty((Z.shape[0], iu.shape[0]))
        _sym_features_jit(Z, iu, ju, scale, out)
        return out
else:  # pragma: no cover
    em_cascade_numba = sym_features_numba = affine_iterate_numba = None


if BACKEND == "numba":
    em_cascade = em_cascade_numba
    sym_features = sym_features_numba
    affine_iterate = affine_iterate_numba
else:
    em_cascade = em_cascade_numpy
    sym_features = sym_features_numpy
    affine_iterate = affine_iterate_numpy
