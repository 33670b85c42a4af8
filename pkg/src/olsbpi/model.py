"""Linear stochastic system with multiplicative noise and its operators.

The system is

    dx = (A x + B u) dt + sum_j D_j x dw1_j + sum_k F_k u dw2_k + C dw3

with running cost ``x'Qx + u'Ru``. All operator outputs are symmetrized.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, SingularGuu, SingularInner
from .linalg import sym

STAB_MARGIN = 1e-9
COND_LIMIT = 1e12


def _as_matrix(value, name):
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-D matrix, got ndim={arr.ndim}")
    arr.setflags(write=False)
    return arr


def _min_eig(S):
    return float(np.linalg.eigvalsh(sym(S))[0])


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Drift ``A``, input ``B``, noise gains ``D``/``F`` and additive noise ``C``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: tuple = ()
    F: tuple = ()

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        D = tuple(_as_matrix(d, f"D[{j}]") for j, d in enumerate(self.D))
        F = tuple(_as_matrix(f, f"F[{k}]") for k, f in enumerate(self.F))
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionMismatch(f"B must have {n} rows, got {B.shape}")
        if C.shape[0] != n:
            raise DimensionMismatch(f"C must have {n} rows, got {C.shape}")
        for j, d in enumerate(D):
            if d.shape != (n, n):
                raise DimensionMismatch(f"D[{j}] must be {n}x{n}, got {d.shape}")
        for k, f in enumerate(F):
            if f.shape != B.shape:
                raise DimensionMismatch(f"F[{k}] must be {B.shape}, got {f.shape}")
        if _min_eig(C @ C.T) <= 0.0:
            raise ValueError("C C^T must be positive definite")
        for name, value in zip("ABCDF", (A, B, C, D, F)):
            object.__setattr__(self, name, value)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def q1(self):
        return len(self.D)

    @property
    def q2(self):
        return len(self.F)

    @property
    def p(self):
        return self.C.shape[1]

    def __eq__(self, other):
        if not isinstance(other, SystemModel):
            return NotImplemented
        pairs = [(self.A, other.A), (self.B, other.B), (self.C, other.C)]
        if (self.q1, self.q2) != (other.q1, other.q2):
            return False
        pairs += list(zip(self.D, other.D)) + list(zip(self.F, other.F))
        return all(a.shape == b.shape and np.array_equal(a, b) for a, b in pairs)


@dataclass(frozen=True, eq=False)
class CostWeights:
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = _as_matrix(self.Q, "Q")
        R = _as_matrix(self.R, "R")
        for name, M in (("Q", Q), ("R", R)):
            if M.shape[0] != M.shape[1] or not np.allclose(M, M.T, atol=1e-12):
                raise ValueError(f"{name} must be square and symmetric")
            if _min_eig(M) <= 0.0:
                raise ValueError(f"{name} must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    def __eq__(self, other):
        if not isinstance(other, CostWeights):
            return NotImplemented
        return np.array_equal(self.Q, other.Q) and np.array_equal(self.R, other.R)


def _check_gain(K, model):
    K = np.asarray(K, dtype=float)
    if K.shape != (model.m, model.n):
        raise DimensionMismatch(f"gain must be {model.m}x{model.n}, got {K.shape}")
    return K


def _check_value(P, model):
    P = np.asarray(P, dtype=float)
    if P.shape != (model.n, model.n):
        raise DimensionMismatch(f"value matrix must be {model.n}x{model.n}, got {P.shape}")
    return P


def op_pi(P, model):
    """State-noise term ``sum_j D_j' P D_j``."""
    P = _check_value(P, model)
    out = np.zeros((model.n, model.n))
    for Dj in model.D:
        out += Dj.T @ P @ Dj
    return sym(out)


def op_sigma(P, model):
    """Input-noise term ``sum_k F_k' P F_k``."""
    P = _check_value(P, model)
    out = np.zeros((model.m, model.m))
    for Fk in model.F:
        out += Fk.T @ P @ Fk
    return sym(out)


def lyap_op(K, P, model):
    """Generalized Lyapunov operator applied to ``P`` for gain ``K``."""
    K = _check_gain(K, model)
    P = _check_value(P, model)
    Acl = model.A - model.B @ K
    out = Acl.T @ P + P @ Acl + op_pi(P, model) + K.T @ op_sigma(P, model) @ K
    return sym(out)


def big_a(K, model):
    """``n^2 x n^2`` matrix with ``vec(lyap_op(K, P)) = big_a(K) @ vec(P)``."""
    K = _check_gain(K, model)
    n = model.n
    AclT = (model.A - model.B @ K).T
    eye = np.eye(n)
    out = np.kron(eye, AclT) + np.kron(AclT, eye)
    for Dj in model.D:
        out += np.kron(Dj.T, Dj.T)
    for Fk in model.F:
        FK = (Fk @ K).T
        out += np.kron(FK, FK)
    return out


def spectral_abscissa(M):
    return float(np.max(np.linalg.eigvals(M).real))


def is_admissible(K, model, margin=STAB_MARGIN):
    """Return ``(admissible, abscissa)`` for the mean-square stability test."""
    abscissa = spectral_abscissa(big_a(K, model))
    return abscissa < -margin, abscissa


def g_of_p(P, model, weights):
    """Block matrix ``[[Q + A'P + PA + Pi(P), PB], [B'P, R + Sigma(P)]]``."""
    P = _check_value(P, model)
    A, B = model.A, model.B
    Gxx = weights.Q + A.T @ P + P @ A + op_pi(P, model)
    Gux = B.T @ P
    Guu = weights.R + op_sigma(P, model)
    return sym(np.block([[Gxx, Gux.T], [Gux, Guu]]))


def g_blocks(G, n):
    """Split ``G`` into ``(G_xx, G_ux, G_uu)`` with ``G_xx`` of order ``n``."""
    return G[:n, :n], G[n:, :n], G[n:, n:]


def h_op(G, K):
    """``[I, -K'] G [I, -K']'`` where ``I`` matches the column count of ``K``."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    r, k = K.shape
    if G.shape != (k + r, k + r):
        raise DimensionMismatch(f"G of shape {G.shape} does not fit gain of shape {K.shape}")
    S = np.hstack([np.eye(k), -K.T])
    return sym(S @ G @ S.T)


def improved_gain(G, n, cond_limit=COND_LIMIT):
    """Policy improvement ``G_uu^{-1} G_ux``."""
    _, Gux, Guu = g_blocks(G, n)
    if not np.isfinite(Guu).all() or np.linalg.cond(Guu) > cond_limit:
        raise SingularGuu(f"G_uu is singular or ill-conditioned (limit {cond_limit:g})")
    return np.linalg.solve(Guu, Gux)


def optimal_gain(P, model, weights, cond_limit=COND_LIMIT):
    """``(R + Sigma(P))^{-1} B' P``."""
    inner = weights.R + op_sigma(P, model)
    if np.linalg.cond(inner) > cond_limit:
        raise SingularInner("R + Sigma(P) is singular")
    return np.linalg.solve(inner, model.B.T @ P)


def riccati_residual(P, model, weights, cond_limit=COND_LIMIT):
    """Generalized Riccati residual; zero exactly at the optimal value matrix."""
    P = _check_value(P, model)
    A, B = model.A, model.B
    inner = weights.R + op_sigma(P, model)
    if not np.isfinite(inner).all() or np.linalg.cond(inner) > cond_limit:
        raise SingularInner("R + Sigma(P) is singular")
    BtP = B.T @ P
    out = weights.Q + A.T @ P + P @ A + op_pi(P, model) - BtP.T @ np.linalg.solve(inner, BtP)
    return sym(out)


def theta_of_p(P, model, weights):
    """``G(P)`` bordered by the scalar ``trace(C'PC)`` on the diagonal."""
    G = g_of_p(P, model, weights)
    d = G.shape[0]
    theta = np.zeros((d + 1, d + 1))
    theta[:d, :d] = G
    theta[d, d] = np.trace(model.C.T @ P @ model.C)
    return theta


def stationary_cost(P, model):
    """Expected running cost under the invariant measure: ``trace(C'PC)``."""
    return float(np.trace(model.C.T @ P @ model.C))
