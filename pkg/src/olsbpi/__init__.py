"""Policy iteration and off-policy least-squares learning for linear
stochastic systems with state-, input-dependent and additive noise."""

from .errors import *  # noqa: F401,F403
from .kernels import BACKEND
from .model import CostWeights, SystemModel
from .solvers import DisturbanceSpec, policy_cost, riccati_oracle, robust_pi, standard_pi
from .sim import SimConfig, Trajectory, simulate
from .learning import DataMatrices, Reference, build_data_matrices, diagnose, olsbpi

__version__ = "0.1.0"
