"""Model-based policy evaluation, policy iteration and a Riccati cross-check."""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import model as mc
from .errors import (
    MonotonicityWarning,
    NoConvergence,
    NotAdmissible,
    NumericalFailure,
    OracleDiverged,
    SingularOperator,
)
from .linalg import smat, svec, sym, vec, vec_inv

DISTURBANCE_MODES = ("none", "constant", "decaying", "random-bounded")


def solve_generalized_lyapunov(K, S, model, cond_limit=mc.COND_LIMIT):
    """Solve ``lyap_op(K, P) = -S`` through the dense ``n^2`` linear system."""
    bigA = mc.big_a(K, model)
    if not np.isfinite(bigA).all() or np.linalg.cond(bigA) > cond_limit:
        raise SingularOperator(
            f"generalized Lyapunov operator is singular (cond > {cond_limit:g})",
            module="solvers", operation="solve_generalized_lyapunov",
        )
    p = np.linalg.solve(bigA, -vec(S))
    return sym(vec_inv(p, model.n))


def policy_cost(K, model, weights):
    """Value matrix ``P_K`` and stationary cost ``trace(C' P_K C)`` of gain ``K``."""
    ok, abscissa = mc.is_admissible(K, model)
    if not ok:
        raise NotAdmissible(
            f"gain is not admissible (spectral abscissa {abscissa:.3g})",
            module="solvers", operation="policy_cost",
        )
    P = solve_generalized_lyapunov(K, weights.Q + K.T @ weights.R @ K, model)
    return P, mc.stationary_cost(P, model)


@dataclass
class DisturbanceSpec:
    """How the policy-evaluation disturbance is generated each iteration.

    ``constant`` draws one random symmetric direction and reuses it,
    ``random-bounded`` draws a fresh direction every iteration, and
    ``decaying`` draws a fresh direction scaled by ``magnitude / i**2``.
    All directions are normalized to unit Frobenius norm before scaling.
    """

    mode: str = "none"
    magnitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in DISTURBANCE_MODES:
            raise ValueError(f"unknown disturbance mode {self.mode!r}")
        if not self.magnitude >= 0:
            raise ValueError("disturbance magnitude must be nonnegative")

    def sampler(self, dim):
        """Return ``f(i) -> dim x dim`` symmetric disturbance for iteration ``i >= 1``."""
        rng = np.random.Generator(np.random.PCG64(self.seed))

        def direction():
            M = np.zeros((dim, dim))
            iu = np.triu_indices(dim)
            M[iu] = rng.standard_normal(len(iu[0]))
            M = sym(M + M.T)
            return M / np.linalg.norm(M)

        if self.mode == "none" or self.magnitude == 0.0:
            return lambda i: np.zeros((dim, dim))
        if self.mode == "constant":
            fixed = self.magnitude * direction()
            return lambda i: fixed
        if self.mode == "decaying":
            return lambda i: (self.magnitude / i**2) * direction()
        return lambda i: self.magnitude * direction()


@dataclass
class PiStep:
    """One policy-iteration step: evaluation of ``K`` and the resulting update."""

    index: int
    K: np.ndarray
    admissible: bool
    abscissa: float
    P: np.ndarray = None
    G: np.ndarray = None
    dG: np.ndarray = None
    residual_norm: float = float("nan")
    step_norm: float = float("nan")
    min_decrease_eig: float = float("nan")

    @property
    def cost_matrix(self):
        return self.P

    @property
    def dG_norm(self):
        return float("nan") if self.dG is None else float(np.linalg.norm(self.dG))


@dataclass
class PiTrace:
    steps: list = field(default_factory=list)
    converged: bool = False
    final_residual: float = float("nan")
    failure: str = None
    failure_iteration: int = None

    @property
    def gains(self):
        return [s.K for s in self.steps]

    @property
    def values(self):
        return [s.P for s in self.steps if s.P is not None]

    @property
    def P_final(self):
        return self.values[-1]

    @property
    def K_final(self):
        return self.steps[-1].K


def _iterate(K1, model, weights, max_iter, tol, disturb, check_monotone, halt_on_failure):
    ok, abscissa = mc.is_admissible(K1, model)
    if not ok:
        raise NotAdmissible(
            f"initial gain is not admissible (spectral abscissa {abscissa:.3g})",
            module="solvers", operation="policy_iteration", iteration=1,
        )
    trace = PiTrace()
    K = np.array(K1, dtype=float)
    P_prev = None
    n = model.n
    for i in range(1, max_iter + 1):
        if i > 1:
            ok, abscissa = mc.is_admissible(K, model)
        step = PiStep(index=i, K=K, admissible=ok, abscissa=abscissa)
        trace.steps.append(step)
        if not ok:
            err = NotAdmissible(
                f"iterate {i} is not admissible (spectral abscissa {abscissa:.3g})",
                module="solvers", operation="policy_iteration", iteration=i,
            )
            if not halt_on_failure:
                raise err
            trace.failure, trace.failure_iteration = str(err), i
            break
        try:
            P = solve_generalized_lyapunov(K, weights.Q + K.T @ weights.R @ K, model)
            G = mc.g_of_p(P, model, weights)
            step.P, step.G = P, G
            step.residual_norm = float(np.linalg.norm(mc.riccati_residual(P, model, weights)))
            if P_prev is not None:
                step.step_norm = float(np.linalg.norm(P - P_prev))
                step.min_decrease_eig = float(np.linalg.eigvalsh(sym(P_prev - P))[0])
                scale = max(1.0, np.linalg.norm(P_prev))
                if check_monotone and step.min_decrease_eig < -1e-8 * scale:
                    warnings.warn(
                        f"iteration {i}: lambda_min(P_prev - P) = {step.min_decrease_eig:.3g}",
                        MonotonicityWarning, stacklevel=3,
                    )
                if tol is not None and step.step_norm <= tol * max(1.0, np.linalg.norm(P)):
                    trace.converged = True
                    break
            if i == max_iter:
                break
            dG = disturb(i)
            step.dG = dG
            K = mc.improved_gain(G + dG, n)
        except NumericalFailure as err:
            err.add_context(module="solvers", operation="policy_iteration", iteration=i)
            if not halt_on_failure:
                raise
            trace.failure, trace.failure_iteration = str(err), i
            break
        P_prev = P
    values = trace.values
    if values:
        trace.final_residual = float(
            np.linalg.norm(mc.riccati_residual(values[-1], model, weights))
        )
    return trace


def standard_pi(K1, model, weights, max_iter=50, tol=1e-10, require_convergence=True):
    """Exact policy iteration from an admissible gain ``K1``.

    Iteration ``i`` solves for ``P_i`` with ``lyap_op(K_i, P_i) + Q + K_i'RK_i = 0``
    and sets ``K_{i+1} = G_uu^{-1} G_ux`` with ``G = g_of_p(P_i)``. Stops once
    ``||P_i - P_{i-1}||_F <= tol * max(1, ||P_i||_F)``. With ``tol=None`` it runs
    exactly ``max_iter`` evaluations.
    """
    zero = lambda i: np.zeros((model.n + model.m,) * 2)  # noqa: E731
    trace = _iterate(K1, model, weights, max_iter, tol, zero, True, False)
    if tol is not None and require_convergence and not trace.converged:
        raise NoConvergence(
            f"policy iteration did not converge in {max_iter} iterations",
            module="solvers", operation="standard_pi", iteration=max_iter,
        )
    return trace


def robust_pi(K1, model, weights, spec, max_iter=50, tol=None):
    """Policy iteration where each evaluated ``G`` is perturbed by a disturbance.

    A non-admissible intermediate gain halts the run; the failure and its
    iteration are recorded on the returned trace instead of raised.
    """
    disturb = spec.sampler(model.n + model.m)
    return _iterate(K1, model, weights, max_iter, tol, disturb, False, True)


def _initial_guess(model, weights):
    try:
        return scipy.linalg.solve_continuous_are(model.A, model.B, weights.Q, weights.R)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise OracleDiverged(f"no deterministic Riccati solution: {exc}") from exc


def riccati_oracle(model, weights, tol=1e-12, max_iter=200):
    """Solve ``riccati_residual(P) = 0`` by damped Gauss-Newton on ``svec(P)``.

    Independent of policy iteration: the Jacobian is formed by central finite
    differences, steps are backtracked on the residual norm, and the start is
    the noise-free Riccati solution.
    """
    P0 = _initial_guess(model, weights)
    scale = 1.0 + np.linalg.norm(weights.Q) + 2.0 * np.linalg.norm(model.A) * np.linalg.norm(P0)

    def resid(p):
        return svec(mc.riccati_residual(smat(p), model, weights), check=False)

    p = svec(sym(P0), check=False)
    r = resid(p)
    norm = np.linalg.norm(r)
    dim = p.size
    for _ in range(max_iter):
        if norm <= tol * scale:
            break
        J = np.empty((dim, dim))
        for j in range(dim):
            h = 1e-5 * max(1.0, abs(p[j]))
            e = np.zeros(dim)
            e[j] = h
            J[:, j] = (resid(p + e) - resid(p - e)) / (2 * h)
        delta = np.linalg.lstsq(J, -r, rcond=None)[0]
        alpha = 1.0
        while alpha > 1e-10:
            trial = p + alpha * delta
            try:
                r_trial = resid(trial)
            except NumericalFailure:
                r_trial = None
            if r_trial is not None and np.linalg.norm(r_trial) < (1 - 1e-4 * alpha) * norm:
                break
            alpha *= 0.5
        else:
            if norm <= 1e-8 * scale:
                break  # floating-point floor reached
            raise OracleDiverged(f"line search failed at residual {norm:.3g}",
                                 module="solvers", operation="riccati_oracle")
        p, r = trial, r_trial
        norm = np.linalg.norm(r)
    else:
        if norm > 1e-8 * scale:
            raise OracleDiverged(f"no convergence in {max_iter} steps (residual {norm:.3g})",
                                 module="solvers", operation="riccati_oracle")
    P = smat(p)
    K = mc.optimal_gain(P, model, weights)
    if np.linalg.eigvalsh(P)[0] <= 0 or not mc.is_admissible(K, model)[0]:
        raise OracleDiverged("converged to a non-stabilizing Riccati root",
                             module="solvers", operation="riccati_oracle")
    return P
