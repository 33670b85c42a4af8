import numpy as np
import pytest
from scipy.linalg import solve_continuous_are

from olsbpi.model import CostWeights, SystemModel, is_admissible


def random_spd(rng, n, floor=0.5):
    M = rng.normal(size=(n, n))
    return M @ M.T / n + floor * np.eye(n)


def controllability_margin(A, B):
    """Smallest ``sigma_min([A - lambda I, B])`` over the eigenvalues of ``A``."""
    n = A.shape[0]
    return min(np.linalg.svd(np.hstack([A - lam * np.eye(n), B]), compute_uv=False)[-1]
               for lam in np.linalg.eigvals(A))


def random_system(rng, n, m, q1=1, q2=1, noise=0.3, min_margin=0.0):
    """Random noisy system plus an admissible initial gain.

    ``(A, B)`` pairs closer than ``min_margin`` to an uncontrollable pair are
    redrawn. The gain comes from a shifted deterministic Riccati equation,
    which leaves a stability margin of at least 1; the multiplicative noise
    is halved until that gain stays mean-square stabilizing.
    """
    A = rng.normal(size=(n, n))
    B = rng.normal(size=(n, m))
    while controllability_margin(A, B) < min_margin:
        A = rng.normal(size=(n, n))
        B = rng.normal(size=(n, m))
    C = np.eye(n) + 0.2 * rng.normal(size=(n, n))
    while np.linalg.matrix_rank(C) < n:
        C = np.eye(n) + 0.2 * rng.normal(size=(n, n))
    P = solve_continuous_are(A + np.eye(n), B, np.eye(n), np.eye(m))
    K1 = B.T @ P
    D0 = [rng.normal(size=(n, n)) for _ in range(q1)]
    F0 = [rng.normal(size=(n, m)) for _ in range(q2)]
    scale = noise
    while True:
        model = SystemModel(A=A, B=B, C=C, D=tuple(scale * d for d in D0),
                            F=tuple(scale * f for f in F0))
        if is_admissible(K1, model)[0]:
            break
        scale /= 2
    weights = CostWeights(random_spd(rng, n), random_spd(rng, m))
    return model, weights, K1


def two_state_system(additive_only=False):
    """Damped oscillator with 0.01 multiplicative noise; ``K1 = 0`` is admissible."""
    A = [[0.0, 1.0], [-1.0, -2.0]]
    B = [[0.0], [1.0]]
    C = 0.1 * np.eye(2)
    if additive_only:
        model = SystemModel(A=A, B=B, C=C)
    else:
        model = SystemModel(A=A, B=B, C=C, D=(0.01 * np.ones((2, 2)),),
                            F=(0.01 * np.ones((2, 1)),))
    return model, CostWeights(np.eye(2), np.eye(1)), np.zeros((1, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def scalar():
    return (SystemModel(A=[[-1.0]], B=[[1.0]], C=[[1.0]]),
            CostWeights([[1.0]], [[1.0]]), np.zeros((1, 1)))


@pytest.fixture
def two_state():
    return two_state_system()


# acceptance lines, printed once at the end of the session

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
