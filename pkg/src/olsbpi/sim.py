"""Seeded Euler-Maruyama rollouts under the exploratory policy.

The data-collection input is ``u = -K1 x + sigma_u y`` where ``y`` is an
Ornstein-Uhlenbeck process ``dy = -y dt + dw4``. State and exploration are
integrated jointly as the cascade ``v = [x; y]``.

Random numbers come from numpy's ``PCG64`` bit generator seeded with the
64-bit ``seed``. Per step the standard normal draws are consumed in the
order: ``q1`` state-noise increments, ``q2`` input-noise increments, ``p``
additive increments, ``m`` exploration increments, each scaled by
``sqrt(dt)``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from . import model as mc
from .errors import Blowup, BadLength, NotAdmissible

CHUNK = 1 << 16


@dataclass
class SimConfig:
    t_f: float
    sigma_u: float = 1.0
    dt: float = 1e-3
    seed: int = 0
    x0: np.ndarray = None
    y0: np.ndarray = None
    blowup: float = 1e12

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_f >= self.dt:
            raise ValueError("t_f must be at least dt")
        if self.steps > 2**53:
            raise ValueError("t_f / dt is too large")

    @property
    def steps(self):
        return int(round(self.t_f / self.dt))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    exploration: np.ndarray
    dt: float = field(default=None)

    def __post_init__(self):
        rows = {a.shape[0] for a in (self.times, self.states, self.inputs, self.exploration)}
        if len(rows) != 1:
            raise BadLength("trajectory arrays must have equal row counts")
        if self.dt is None:
            self.dt = float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def n(self):
        return self.states.shape[1]

    @property
    def m(self):
        return self.inputs.shape[1]

    @property
    def horizon(self):
        return (len(self.times) - 1) * self.dt

    def to_csv(self, path):
        n, m = self.n, self.m
        header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
        header += [f"y{i + 1}" for i in range(m)]
        data = np.hstack([self.times[:, None], self.states, self.inputs, self.exploration])
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in data:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            header = next(csv.reader(fh))
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        n = sum(1 for h in header if h.startswith("x"))
        m = sum(1 for h in header if h.startswith("u"))
        times = data[:, 0]
        dt = float(times[1] - times[0]) if len(times) > 1 else None
        return cls(times, data[:, 1:1 + n], data[:, 1 + n:1 + n + m], data[:, 1 + n + m:], dt)


def cascade_matrices(model, K1, sigma_u):
    """Drift, stacked multiplicative gains and additive gain of ``v = [x; y]``."""
    n, m = model.n, model.m
    K1 = np.asarray(K1, dtype=float)
    drift = np.zeros((n + m, n + m))
    drift[:n, :n] = model.A - model.B @ K1
    drift[:n, n:] = sigma_u * model.B
    drift[n:, n:] = -np.eye(m)
    mats = []
    for Dj in model.D:
        M = np.zeros((n + m, n + m))
        M[:n, :n] = Dj
        mats.append(M)
    for Fk in model.F:
        M = np.zeros((n + m, n + m))
        M[:n, :n] = -Fk @ K1
        M[:n, n:] = sigma_u * Fk
        mats.append(M)
    noise = np.array(mats).reshape(len(mats), n + m, n + m)
    additive = np.zeros((n + m, model.p + m))
    additive[:n, :model.p] = model.C
    additive[n:, model.p:] = np.eye(m)
    return drift, noise, additive


def ou_noise_step(y, dt, dW):
    """One Euler-Maruyama step of ``dy = -y dt + dw``."""
    return y - y * dt + dW


def simulate(model, K1, cfg, check_admissible=True):
    """Roll out the cascade on the grid ``0, dt, ..., steps*dt``."""
    K1 = np.asarray(K1, dtype=float)
    if check_admissible:
        ok, abscissa = mc.is_admissible(K1, model)
        if not ok:
            raise NotAdmissible(
                f"exploration gain is not admissible (spectral abscissa {abscissa:.3g})",
                module="sim", operation="simulate", seed=cfg.seed,
            )
    n, m = model.n, model.m
    drift, noise, additive = cascade_matrices(model, K1, cfg.sigma_u)
    steps = cfg.steps
    width = noise.shape[0] + additive.shape[1]
    v = np.zeros(n + m)
    if cfg.x0 is not None:
        v[:n] = cfg.x0
    if cfg.y0 is not None:
        v[n:] = cfg.y0
    out = np.empty((steps + 1, n + m))
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    sq = np.sqrt(cfg.dt)
    done = 0
    while done < steps:
        size = min(CHUNK, steps - done)
        dW = rng.standard_normal((size, width)) * sq
        bad = kernels.em_cascade(v, drift, noise, additive, dW, cfg.dt, cfg.blowup,
                                 out[done:done + size + 1])
        if bad >= 0:
            raise Blowup(
                f"state exceeded {cfg.blowup:g} at t={(done + bad) * cfg.dt:.6g}",
                module="sim", operation="simulate", seed=cfg.seed,
            )
        done += size
        v = out[done].copy()
    states = out[:, :n].copy()
    expl = out[:, n:].copy()
    inputs = reconstruct_inputs(states, expl, K1, cfg.sigma_u)
    times = np.arange(steps + 1) * cfg.dt
    return Trajectory(times, states, inputs, expl, cfg.dt)


def reconstruct_inputs(states, exploration, K1, sigma_u):
    return -states @ np.asarray(K1, dtype=float).T + sigma_u * exploration


def estimate_stationary_moment(traj, p=2, burn_in=0.1):
    """Time average of ``||[x; y]||^p`` after discarding a burn-in fraction."""
    if p not in (2, 4):
        raise ValueError("moment order must be 2 or 4")
    v = np.hstack([traj.states, traj.exploration])
    start = int(burn_in * len(v))
    norms = np.einsum("ij,ij->i", v[start:], v[start:])
    return float(np.mean(norms ** (p // 2)))
