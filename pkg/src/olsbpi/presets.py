"""Built-in systems: a scalar sanity case and the triple inverted pendulum."""

import json
from importlib import resources

import numpy as np

from .errors import MissingABData
from .model import CostWeights, SystemModel

# initial stabilizing gain for the pendulum
PENDULUM_K1 = np.array([
    [-9.44, -3.11, -1.2, -3.11, -1.31, -0.58],
    [-32.5, -11.51, -3.87, -10.72, -4.41, -2.01],
])

# data-collection and learning settings used with the pendulum
PENDULUM_SETTINGS = {"sigma_u": 100.0, "t_f": 510.0, "s_f": 100.0, "N": 10, "dt": 1e-3}


def _load_ab(path=None):
    try:
        if path is None:
            text = resources.files("olsbpi").joinpath("data/triple_pendulum.json").read_text()
        else:
            with open(path) as fh:
                text = fh.read()
    except (FileNotFoundError, ModuleNotFoundError) as exc:
        raise MissingABData(f"pendulum A/B data file not found: {exc}",
                            module="presets", operation="preset_triple_pendulum") from exc
    blob = json.loads(text)
    return np.array(blob["A"], dtype=float), np.array(blob["B"], dtype=float)


def preset_triple_pendulum(path=None):
    """Return ``(model, weights, K1)`` for the noisy triple inverted pendulum.

    ``C = 0.1 I``, one state-noise gain with ``(6, 6)`` entry 0.01 and one
    input-noise gain with ``(4, 1)`` entry 0.01; ``Q = I_6`` and ``R = I_2``.
    ``A`` and ``B`` come from the bundled ``data/triple_pendulum.json``.
    """
    A, B = _load_ab(path)
    D1 = np.zeros((6, 6))
    D1[5, 5] = 0.01
    F1 = np.zeros((6, 2))
    F1[3, 0] = 0.01
    model = SystemModel(A=A, B=B, C=0.1 * np.eye(6), D=(D1,), F=(F1,))
    return model, CostWeights(np.eye(6), np.eye(2)), PENDULUM_K1.copy()


def preset_scalar():
    """``dx = (-x + u) dt + dw`` with unit weights and ``K1 = 0``."""
    model = SystemModel(A=[[-1.0]], B=[[1.0]], C=[[1.0]])
    return model, CostWeights([[1.0]], [[1.0]]), np.zeros((1, 1))


PRESETS = {
    "triple-pendulum": preset_triple_pendulum,
    "scalar": preset_scalar,
}
