"""JSON experiment configuration.

Schema (version 1)::

    {
      "schema_version": 1,
      "algorithm": "solve" | "learn" | "robust" | "simulate",
      "model": {"preset": "triple-pendulum"}                      # or inline:
               {"A": [[..]], "B": [[..]], "C": [[..]], "D": [[[..]]], "F": [[[..]]]},
      "weights": {"Q": [[..]], "R": [[..]]},        # optional with a preset
      "initial_gain": [[..]],                       # optional with a preset
      "sim": {"dt": 0.001, "t_f": 510, "sigma_u": 100, "x0": null, "y0": null,
              "burn_in": 0.0, "blowup": 1e12},
      "olsbpi": {"N": 10, "s_f": 100, "mode": "ode", "step": null, "rank_tol": 1e-10},
      "pi": {"max_iter": 100, "tol": 1e-12},
      "disturbance": {"mode": "constant", "magnitudes": [1e-4, 1e-3], "max_iter": 50},
      "seeds": [0, 1, 2],
      "output_dir": "out",
      "workers": 1,
      "svg": false
    }

Matrices are row-major nested lists. Validation collects every problem
with its field path before raising :class:`ConfigValidationError`.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigParseError, ConfigValidationError
from .model import CostWeights, SystemModel
from .presets import PRESETS
from .solvers import DISTURBANCE_MODES

SCHEMA_VERSION = 1
ALGORITHMS = ("solve", "learn", "robust", "simulate")
SEED_MAX = 2**64 - 1


@dataclass
class SimSettings:
    t_f: float = 100.0
    sigma_u: float = 1.0
    dt: float = 1e-3
    x0: list = None
    y0: list = None
    burn_in: float = 0.0
    blowup: float = 1e12


@dataclass
class OlsbpiSettings:
    N: int = 10
    s_f: float = 100.0
    mode: str = "ode"
    step: float = None
    rank_tol: float = 1e-10


@dataclass
class PiSettings:
    max_iter: int = 100
    tol: float = 1e-12


@dataclass
class DisturbanceSettings:
    mode: str = "none"
    magnitudes: list = field(default_factory=lambda: [0.0])
    max_iter: int = 50


@dataclass(eq=False)
class ExperimentConfig:
    algorithm: str
    model: SystemModel
    weights: CostWeights
    initial_gain: np.ndarray
    preset: str = None
    sim: SimSettings = field(default_factory=SimSettings)
    olsbpi: OlsbpiSettings = field(default_factory=OlsbpiSettings)
    pi: PiSettings = field(default_factory=PiSettings)
    disturbance: DisturbanceSettings = field(default_factory=DisturbanceSettings)
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "out"
    workers: int = 1
    svg: bool = False

    def __eq__(self, other):
        if not isinstance(other, ExperimentConfig):
            return NotImplemented
        return config_to_dict(self) == config_to_dict(other)


class _Checker:
    def __init__(self):
        self.errors = []

    def fail(self, path, msg):
        self.errors.append((path, msg))

    def matrix(self, value, path, shape=None):
        try:
            arr = np.array(value, dtype=float)
        except (TypeError, ValueError):
            self.fail(path, "must be a numeric matrix (row-major nested lists)")
            return None
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        if arr.ndim != 2 or arr.size == 0:
            self.fail(path, f"must be a non-empty 2-D matrix, got ndim={arr.ndim}")
            return None
        if not np.isfinite(arr).all():
            self.fail(path, "contains non-finite entries")
            return None
        if shape is not None and arr.shape != shape:
            self.fail(path, f"must have shape {list(shape)}, got {list(arr.shape)}")
            return None
        return arr

    def number(self, section, key, path, default, positive=False, nonneg=False, integer=False):
        value = section.get(key, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"{path}.{key}", "must be a number")
            return default
        if integer and int(value) != value:
            self.fail(f"{path}.{key}", "must be an integer")
            return default
        if positive and not value > 0:
            self.fail(f"{path}.{key}", "must be positive")
        if nonneg and not value >= 0:
            self.fail(f"{path}.{key}", "must be nonnegative")
        return int(value) if integer else float(value)

    def section(self, raw, key):
        value = raw.get(key, {})
        if not isinstance(value, dict):
            self.fail(key, "must be an object")
            return {}
        return value

    def unknown(self, section, allowed, path):
        for key in section:
            if key not in allowed:
                self.fail(f"{path}.{key}" if path else key, "unknown field")


def _pd(checker, M, path):
    if M is None:
        return
    if M.shape[0] != M.shape[1] or not np.allclose(M, M.T, atol=1e-12):
        checker.fail(path, "must be square and symmetric")
    elif np.linalg.eigvalsh(M)[0] <= 0:
        checker.fail(path, "must be positive definite")


def config_from_dict(raw):
    """Validate a parsed JSON object and build an :class:`ExperimentConfig`."""
    ck = _Checker()
    if not isinstance(raw, dict):
        raise ConfigValidationError([("", "top level must be an object")])
    ck.unknown(raw, {"schema_version", "algorithm", "model", "weights", "initial_gain", "sim",
                     "olsbpi", "pi", "disturbance", "seeds", "output_dir", "workers", "svg"}, "")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        ck.fail("schema_version", f"unsupported version {version!r} (expected {SCHEMA_VERSION})")
    algorithm = raw.get("algorithm")
    if algorithm not in ALGORITHMS:
        ck.fail("algorithm", f"must be one of {list(ALGORITHMS)}, got {algorithm!r}")

    # model
    spec = ck.section(raw, "model")
    preset = spec.get("preset")
    model = weights = K1 = None
    if preset is not None:
        ck.unknown(spec, {"preset"}, "model")
        if preset not in PRESETS:
            ck.fail("model.preset", f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        else:
            model, weights, K1 = PRESETS[preset]()
    else:
        ck.unknown(spec, {"A", "B", "C", "D", "F"}, "model")
        for key in ("A", "B", "C"):
            if key not in spec:
                ck.fail(f"model.{key}", "required")
        A = ck.matrix(spec["A"], "model.A") if "A" in spec else None
        n = A.shape[0] if A is not None else None
        if A is not None and A.shape[0] != A.shape[1]:
            ck.fail("model.A", "must be square")
            A = None
        B = ck.matrix(spec["B"], "model.B") if "B" in spec else None
        if B is not None and n is not None and B.shape[0] != n:
            ck.fail("model.B", f"must have {n} rows")
            B = None
        C = ck.matrix(spec["C"], "model.C") if "C" in spec else None
        if C is not None and n is not None:
            if C.shape[0] != n:
                ck.fail("model.C", f"must have {n} rows")
                C = None
            elif np.linalg.eigvalsh(C @ C.T)[0] <= 0:
                ck.fail("model.C", "C C^T must be positive definite")
                C = None
        Ds, Fs = [], []
        for key, out, shape in (("D", Ds, (n, n) if n else None),
                                ("F", Fs, B.shape if B is not None else None)):
            items = spec.get(key, [])
            if not isinstance(items, list):
                ck.fail(f"model.{key}", "must be a list of matrices")
                continue
            for j, item in enumerate(items):
                M = ck.matrix(item, f"model.{key}[{j}]", shape)
                if M is not None:
                    out.append(M)
        if A is not None and B is not None and C is not None and len(ck.errors) == 0:
            model = SystemModel(A=A, B=B, C=C, D=tuple(Ds), F=tuple(Fs))

    n = model.n if model is not None else None
    m = model.m if model is not None else None
    if "weights" in raw or preset is None:
        wsec = ck.section(raw, "weights")
        ck.unknown(wsec, {"Q", "R"}, "weights")
        Q = ck.matrix(wsec["Q"], "weights.Q", (n, n) if n else None) if "Q" in wsec else None
        R = ck.matrix(wsec["R"], "weights.R", (m, m) if m else None) if "R" in wsec else None
        if "Q" not in wsec:
            ck.fail("weights.Q", "required")
        if "R" not in wsec:
            ck.fail("weights.R", "required")
        _pd(ck, Q, "weights.Q")
        _pd(ck, R, "weights.R")
        weights = None
        if Q is not None and R is not None and not any(p.startswith("weights") for p, _ in ck.errors):
            weights = CostWeights(Q, R)
    if "initial_gain" in raw or preset is None:
        if "initial_gain" not in raw:
            if n is not None:
                K1 = np.zeros((m, n))
        else:
            K1 = ck.matrix(raw["initial_gain"], "initial_gain", (m, n) if n else None)

    # numeric sections
    s = ck.section(raw, "sim")
    ck.unknown(s, set(SimSettings.__dataclass_fields__), "sim")
    sim = SimSettings(
        t_f=ck.number(s, "t_f", "sim", 100.0, positive=True),
        sigma_u=ck.number(s, "sigma_u", "sim", 1.0, nonneg=True),
        dt=ck.number(s, "dt", "sim", 1e-3, positive=True),
        burn_in=ck.number(s, "burn_in", "sim", 0.0, nonneg=True),
        blowup=ck.number(s, "blowup", "sim", 1e12, positive=True),
    )
    if sim.t_f is not None and sim.dt is not None and sim.t_f < sim.dt:
        ck.fail("sim.t_f", "must be at least sim.dt")
    if sim.burn_in is not None and sim.burn_in >= 1:
        ck.fail("sim.burn_in", "must be a fraction in [0, 1)")
    for key, size in (("x0", n), ("y0", m)):
        value = s.get(key)
        if value is not None:
            arr = np.array(value, dtype=float) if isinstance(value, list) else None
            if arr is None or arr.ndim != 1 or (size is not None and arr.size != size):
                ck.fail(f"sim.{key}", f"must be a list of {size} numbers")
            else:
                setattr(sim, key, [float(v) for v in arr])

    o = ck.section(raw, "olsbpi")
    ck.unknown(o, set(OlsbpiSettings.__dataclass_fields__), "olsbpi")
    ols = OlsbpiSettings(
        N=ck.number(o, "N", "olsbpi", 10, integer=True),
        s_f=ck.number(o, "s_f", "olsbpi", 100.0, positive=True),
        mode=o.get("mode", "ode"),
        step=ck.number(o, "step", "olsbpi", None, positive=True),
        rank_tol=ck.number(o, "rank_tol", "olsbpi", 1e-10, positive=True),
    )
    if ols.N is not None and ols.N < 2:
        ck.fail("olsbpi.N", "must be at least 2")
    if ols.mode not in ("ode", "equilibrium"):
        ck.fail("olsbpi.mode", "must be 'ode' or 'equilibrium'")

    p = ck.section(raw, "pi")
    ck.unknown(p, set(PiSettings.__dataclass_fields__), "pi")
    pi = PiSettings(
        max_iter=ck.number(p, "max_iter", "pi", 100, integer=True),
        tol=ck.number(p, "tol", "pi", 1e-12, positive=True),
    )
    if pi.max_iter is not None and pi.max_iter < 1:
        ck.fail("pi.max_iter", "must be at least 1")

    d = ck.section(raw, "disturbance")
    ck.unknown(d, set(DisturbanceSettings.__dataclass_fields__), "disturbance")
    dist = DisturbanceSettings(
        mode=d.get("mode", "none"),
        magnitudes=d.get("magnitudes", [0.0]),
        max_iter=ck.number(d, "max_iter", "disturbance", 50, integer=True),
    )
    if dist.mode not in DISTURBANCE_MODES:
        ck.fail("disturbance.mode", f"must be one of {list(DISTURBANCE_MODES)}")
    if (not isinstance(dist.magnitudes, list) or not dist.magnitudes
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0
                       for v in dist.magnitudes)):
        ck.fail("disturbance.magnitudes", "must be a non-empty list of nonnegative numbers")
    else:
        dist.magnitudes = [float(v) for v in dist.magnitudes]

    seeds = raw.get("seeds", [0])
    if (not isinstance(seeds, list) or not seeds
            or not all(isinstance(v, int) and not isinstance(v, bool) and 0 <= v <= SEED_MAX
                       for v in seeds)):
        ck.fail("seeds", "must be a non-empty list of unsigned 64-bit integers")
    elif len(set(seeds)) != len(seeds):
        ck.fail("seeds", "must not contain duplicates")
    output_dir = raw.get("output_dir", "out")
    if not isinstance(output_dir, str) or not output_dir:
        ck.fail("output_dir", "must be a non-empty string")
    workers = raw.get("workers", 1)
    if not isinstance(workers, int) or isinstance(workers, bool) or workers < 1:
        ck.fail("workers", "must be a positive integer")
    svg = raw.get("svg", False)
    if not isinstance(svg, bool):
        ck.fail("svg", "must be true or false")

    if ck.errors:
        raise ConfigValidationError(ck.errors)
    return ExperimentConfig(algorithm=algorithm, model=model, weights=weights, initial_gain=K1,
                            preset=preset, sim=sim, olsbpi=ols, pi=pi, disturbance=dist,
                            seeds=list(seeds), output_dir=output_dir, workers=workers, svg=svg)


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(raw)


def _listify(M):
    return np.asarray(M).tolist()


def config_to_dict(cfg):
    out = {"schema_version": SCHEMA_VERSION, "algorithm": cfg.algorithm}
    if cfg.preset is not None:
        out["model"] = {"preset": cfg.preset}
    else:
        mdl = cfg.model
        out["model"] = {"A": _listify(mdl.A), "B": _listify(mdl.B), "C": _listify(mdl.C),
                        "D": [_listify(d) for d in mdl.D], "F": [_listify(f) for f in mdl.F]}
    out["weights"] = {"Q": _listify(cfg.weights.Q), "R": _listify(cfg.weights.R)}
    out["initial_gain"] = _listify(cfg.initial_gain)
    out["sim"] = dict(vars(cfg.sim))
    out["olsbpi"] = dict(vars(cfg.olsbpi))
    out["pi"] = dict(vars(cfg.pi))
    out["disturbance"] = {"mode": cfg.disturbance.mode,
                          "magnitudes": list(cfg.disturbance.magnitudes),
                          "max_iter": cfg.disturbance.max_iter}
    out["seeds"] = list(cfg.seeds)
    out["output_dir"] = cfg.output_dir
    out["workers"] = cfg.workers
    out["svg"] = cfg.svg
    return out


def save_config(cfg, path):
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")
