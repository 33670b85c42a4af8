"""Off-policy least-squares policy iteration from one exploratory rollout.

From a trajectory we form, with ``z = [x; u; 1]``, ``zt = svec(z z')`` and
``xt = svec(x x')``,

    psi  = 1/t_f * sum_k zt_k zt_k' dt
    zeta = 1/t_f * sum_k zt_k (xt_{k+1} - xt_k)'
    xi   = 1/t_f * sum_k zt_k r(x_k, u_k) dt

so that ``psi @ svec(theta(P)) ~= zeta @ svec(P) + xi`` for every symmetric P.
The integrand is always taken at the left end of each step (Ito sum); any
other rule estimates a different stochastic integral and biases ``theta``.
"""

import math
import re
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from . import model as mc
from .errors import (
    IllConditionedWarning,
    NotHurwitz,
    NumericalFailure,
    OdeUnstable,
    TooFewSamples,
)
from .linalg import duplication_matrix, duplication_pinv, pinv, smat, svec, svec_len, sym
from .solvers import solve_generalized_lyapunov, standard_pi

COND_WARN = 1e10
ODE_LIMIT = 1e10
CHUNK = 1 << 15


@dataclass(eq=False)
class DataMatrices:
    psi: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray
    t_f: float
    n: int
    m: int
    rank_tol: float = 1e-10

    def __post_init__(self):
        d = svec_len(self.n + self.m + 1)
        if self.psi.shape != (d, d) or self.zeta.shape != (d, svec_len(self.n)) or self.xi.shape != (d,):
            raise ValueError("data matrix shapes do not match (n, m)")

    @cached_property
    def cond_psi(self):
        s = np.linalg.svd(self.psi, compute_uv=False)
        return float(s[0] / s[-1]) if s[-1] > 0 else math.inf

    @property
    def ill_conditioned(self):
        return self.cond_psi > COND_WARN

    @cached_property
    def psi_pinv(self):
        return pinv(self.psi, self.rank_tol)

    @cached_property
    def theta_map(self):
        return self.psi_pinv @ self.zeta

    @cached_property
    def theta_offset(self):
        return self.psi_pinv @ self.xi

    def estimate_theta(self, P):
        """Data-based estimate of ``theta(P)``."""
        return sym(smat(self.theta_map @ svec(P, check=False) + self.theta_offset))

    def save(self, path):
        """Write a plain-text file: one header line, then each matrix row-major.

        Layout::

            olsbpi-data-matrices 1
            n <n> m <m> t_f <t_f> rank_tol <tol>
            psi <rows> <cols>
            <row> ...
            zeta <rows> <cols>
            ...
            xi <len> 1
            ...

        Every number is written with 17 significant digits.
        """
        with open(path, "w") as fh:
            fh.write("olsbpi-data-matrices 1\n")
            fh.write(f"n {self.n} m {self.m} t_f {self.t_f:.17g} rank_tol {self.rank_tol:.17g}\n")
            for name, arr in (("psi", self.psi), ("zeta", self.zeta), ("xi", self.xi[:, None])):
                fh.write(f"{name} {arr.shape[0]} {arr.shape[1]}\n")
                for row in arr:
                    fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0].split()[0] != "olsbpi-data-matrices":
            raise ValueError(f"{path}: not a data-matrix file")
        head = lines[1].split()
        meta = dict(zip(head[::2], head[1::2]))
        pos = 2
        arrays = {}
        for _ in range(3):
            name, rows, cols = lines[pos].split()
            rows, cols = int(rows), int(cols)
            block = lines[pos + 1:pos + 1 + rows]
            arrays[name] = np.array([[float(v) for v in re.split(r"\s+", r.strip())] for r in block])
            arrays[name] = arrays[name].reshape(rows, cols)
            pos += 1 + rows
        return cls(arrays["psi"], arrays["zeta"], arrays["xi"][:, 0], float(meta["t_f"]),
                   int(meta["n"]), int(meta["m"]), float(meta["rank_tol"]))


def running_cost(states, inputs, weights):
    return (np.einsum("ij,jk,ik->i", states, weights.Q, states)
            + np.einsum("ij,jk,ik->i", inputs, weights.R, inputs))


def build_data_matrices(traj, weights, burn_in=0.0, rank_tol=1e-10, warn=True):
    """Accumulate ``(psi, zeta, xi)`` from a uniformly sampled trajectory."""
    X, U = traj.states, traj.inputs
    total = X.shape[0]
    if total < 2:
        raise TooFewSamples("need at least two samples", module="learning",
                            operation="build_data_matrices")
    start = int(burn_in * (total - 1))
    steps = total - 1 - start
    if steps < 1:
        raise TooFewSamples("burn-in leaves no samples", module="learning",
                            operation="build_data_matrices")
    n, m = X.shape[1], U.shape[1]
    dt = traj.dt
    d = svec_len(n + m + 1)
    psi = np.zeros((d, d))
    zeta = np.zeros((d, svec_len(n)))
    xi = np.zeros(d)
    for a in range(start, total - 1, CHUNK):
        b = min(a + CHUNK, total - 1)
        Z = np.hstack([X[a:b], U[a:b], np.ones((b - a, 1))])
        Zt = kernels.sym_features(Z)
        Xt = kernels.sym_features(X[a:b + 1])
        psi += Zt.T @ Zt
        zeta += Zt.T @ (Xt[1:] - Xt[:-1])
        xi += Zt.T @ running_cost(X[a:b], U[a:b], weights)
    t_f = steps * dt
    data = DataMatrices(sym(psi) * (dt / t_f), zeta / t_f, xi * (dt / t_f), t_f, n, m, rank_tol)
    if warn and data.ill_conditioned:
        warnings.warn(f"cond(psi) = {data.cond_psi:.3g} exceeds {COND_WARN:g}",
                      IllConditionedWarning, stacklevel=2)
    return data


def model_implied_data(model, weights):
    """Data matrices with ``psi = I`` whose least-squares map is exactly ``theta``."""
    n, m = model.n, model.m
    base = svec(mc.theta_of_p(np.zeros((n, n)), model, weights))
    cols = []
    for k in range(svec_len(n)):
        e = np.zeros(svec_len(n))
        e[k] = 1.0
        cols.append(svec(mc.theta_of_p(smat(e), model, weights)) - base)
    zeta = np.array(cols).T
    return DataMatrices(np.eye(len(base)), zeta, base, math.inf, n, m)


def _selector(K, n, m):
    # [I_n, -K', 0]: H(H(theta, 0), K) = S theta S'
    return np.hstack([np.eye(n), -np.asarray(K, dtype=float).T, np.zeros((n, 1))])


def evaluation_operator(data, K):
    """``(T1, T2)`` with ``d vec(P)/ds = T1 vec(P) + T2`` (``n^2`` coordinates)."""
    n, m = data.n, data.m
    S = _selector(K, n, m)
    gamma = np.kron(S, S)
    lift = gamma @ duplication_matrix(n + m + 1)
    T1 = lift @ data.theta_map @ duplication_pinv(n)
    T2 = lift @ data.theta_offset
    return T1, T2


def reduced_evaluation_operator(data, K):
    """The same flow written in ``svec`` coordinates of order ``n(n+1)/2``.

    The ``n^2`` form annihilates antisymmetric matrices, so its spectrum has
    ``n(n-1)/2`` structural zeros; stability and the equilibrium are read
    off this reduced form instead.
    """
    n, m = data.n, data.m
    S = _selector(K, n, m)
    lift = duplication_pinv(n) @ np.kron(S, S) @ duplication_matrix(n + m + 1)
    return lift @ data.theta_map, lift @ data.theta_offset


def rk4_affine_step(T, b, h):
    """``(M, c)`` such that one classical RK4 step of ``p' = T p + b`` is ``M p + c``."""
    Z = h * T
    eye = np.eye(T.shape[0])
    Z2 = Z @ Z
    Z3 = Z2 @ Z
    M = eye + Z + Z2 / 2 + Z3 / 6 + Z3 @ Z / 24
    c = h * ((eye + Z / 2 + Z2 / 6 + Z3 / 24) @ b)
    return M, c


def policy_evaluation_ode(data, K, s_f=100.0, step=None, P0=None):
    """Integrate the data-driven evaluation ODE from ``P0`` (default 0) to ``s_f``."""
    if not s_f > 0:
        raise ValueError("s_f must be positive")
    T1, T2 = reduced_evaluation_operator(data, K)
    h = step if step is not None else min(0.01, s_f / 1000)
    nsteps = int(math.ceil(s_f / h - 1e-9))
    h = s_f / nsteps
    M, c = rk4_affine_step(T1, T2, h)
    p0 = np.zeros(T1.shape[0]) if P0 is None else svec(P0, check=False)
    p, bad = kernels.affine_iterate(M, c, p0, nsteps, ODE_LIMIT)
    if bad:
        raise OdeUnstable(f"evaluation ODE exceeded {ODE_LIMIT:g} at s={bad * h:.4g}",
                          module="learning", operation="policy_evaluation_ode")
    return smat(p)


def equilibrium_policy_evaluation(data, K):
    """Fixed point of the evaluation ODE, solved directly."""
    T1, T2 = reduced_evaluation_operator(data, K)
    abscissa = float(np.max(np.linalg.eigvals(T1).real))
    if not abscissa < 0:
        raise NotHurwitz(f"evaluation operator is not Hurwitz (abscissa {abscissa:.3g})",
                         module="learning", operation="equilibrium_policy_evaluation")
    return smat(-np.linalg.solve(T1, T2))


@dataclass
class OlsbpiResult:
    gains: list = field(default_factory=list)
    p_estimates: list = field(default_factory=list)
    theta_estimates: list = field(default_factory=list)
    g_estimates: list = field(default_factory=list)
    diagnostics: list = None

    @property
    def final_gain(self):
        return self.gains[-1]


def olsbpi(data, K1, N=10, s_f=100.0, mode="ode", step=None):
    """Run ``N - 1`` data-driven evaluation/improvement rounds from ``K1``.

    Returns all gains ``K_1 .. K_N`` with the intermediate estimates.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    if mode not in ("ode", "equilibrium"):
        raise ValueError(f"unknown evaluation mode {mode!r}")
    n = data.n
    K = np.array(K1, dtype=float)
    res = OlsbpiResult(gains=[K])
    for i in range(1, N):
        try:
            if mode == "ode":
                P_hat = policy_evaluation_ode(data, K, s_f, step)
            else:
                P_hat = equilibrium_policy_evaluation(data, K)
            theta = data.estimate_theta(P_hat)
            G = theta[:-1, :-1].copy()
            K = mc.improved_gain(G, n)
        except NumericalFailure as err:
            raise err.add_context(module="learning", operation="olsbpi", iteration=i)
        res.p_estimates.append(P_hat)
        res.theta_estimates.append(theta)
        res.g_estimates.append(G)
        res.gains.append(K)
    return res


@dataclass
class Reference:
    """Optimal ``(P*, K*, J*)`` plus the model-based iterates used for comparison."""

    P: np.ndarray
    K: np.ndarray
    J: float
    trace: object = None

    @classmethod
    def from_model(cls, K1, model, weights, max_iter=100, tol=1e-12):
        trace = standard_pi(K1, model, weights, max_iter=max_iter, tol=tol)
        P = trace.P_final
        K = mc.optimal_gain(P, model, weights)
        return cls(P, K, mc.stationary_cost(P, model), trace)


@dataclass
class IterationRecord:
    index: int
    K: np.ndarray
    k_err: float
    admissible: bool
    abscissa: float
    P_tilde: np.ndarray = None
    p_err: float = math.nan
    J_tilde: float = math.nan
    j_err: float = math.nan
    dG: np.ndarray = None
    dG_rel: float = math.nan


def diagnose(result, model, weights, reference=None):
    """Compare each learned gain with model-based ground truth."""
    if reference is None:
        reference = Reference.from_model(result.gains[0], model, weights)
    records = []
    for i, K in enumerate(result.gains, start=1):
        ok, abscissa = mc.is_admissible(K, model)
        rec = IterationRecord(i, K, float(np.linalg.norm(K - reference.K)), ok, abscissa)
        if ok:
            P = solve_generalized_lyapunov(K, weights.Q + K.T @ weights.R @ K, model)
            rec.P_tilde = P
            rec.p_err = float(np.linalg.norm(P - reference.P))
            rec.J_tilde = mc.stationary_cost(P, model)
            rec.j_err = abs(rec.J_tilde - reference.J)
            if i <= len(result.g_estimates):
                G_true = mc.g_of_p(P, model, weights)
                rec.dG = result.g_estimates[i - 1] - G_true
                rec.dG_rel = float(np.linalg.norm(rec.dG) / np.linalg.norm(G_true))
        records.append(rec)
    result.diagnostics = records
    return records
