"""Experiment orchestration, reports and plot-ready outputs."""

import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import model as mc
from .errors import EmptyReport, NumericalFailure, OlsbpiError
from .learning import Reference, build_data_matrices, diagnose, olsbpi
from .sim import SimConfig, estimate_stationary_moment, simulate
from .solvers import DisturbanceSpec, riccati_oracle, robust_pi, standard_pi

log = logging.getLogger("olsbpi")

REPORT_COLUMNS = ("seed", "magnitude", "iteration", "k_err", "p_err", "j_err", "dg_rel",
                  "admissible", "ref_k_err", "ref_p_err", "ref_j_err")
FIGURES = (
    ("fig1a", "k_err", "ref_k_err", "gain error ||K_i - K*||_F"),
    ("fig1b", "p_err", "ref_p_err", "value error ||P_i - P*||_F"),
    ("fig1c", "j_err", "ref_j_err", "cost error |J_i - J*|"),
    ("fig1d", "dg_rel", None, "relative estimation error ||dG_i||_F / ||G_i||_F"),
)
NAN = math.nan


@dataclass
class ReportRow:
    seed: int = None
    magnitude: float = None
    iteration: int = 0
    k_err: float = NAN
    p_err: float = NAN
    j_err: float = NAN
    dg_rel: float = NAN
    admissible: bool = True
    ref_k_err: float = NAN
    ref_p_err: float = NAN
    ref_j_err: float = NAN


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


@dataclass
class ConvergenceReport:
    rows: list = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(",".join(REPORT_COLUMNS) + "\n")
            for row in self.rows:
                fh.write(",".join(_fmt(getattr(row, c)) for c in REPORT_COLUMNS) + "\n")

    def select(self, **match):
        return ConvergenceReport([r for r in self.rows
                                  if all(getattr(r, k) == v for k, v in match.items())])


@dataclass
class ExperimentResult:
    report: ConvergenceReport
    summary: dict
    files: list
    failed: bool


def _reference_rows(ref, model, weights, K1, N):
    """Errors of the first ``N`` exact policy-iteration gains from ``K1``."""
    trace = standard_pi(K1, model, weights, max_iter=N, tol=None)
    out = []
    for step in trace.steps:
        out.append((float(np.linalg.norm(step.K - ref.K)),
                    float(np.linalg.norm(step.P - ref.P)),
                    abs(mc.stationary_cost(step.P, model) - ref.J)))
    while len(out) < N:
        out.append(out[-1])
    return out


def _sim_config(cfg, seed):
    s = cfg.sim
    return SimConfig(t_f=s.t_f, sigma_u=s.sigma_u, dt=s.dt, seed=seed,
                     x0=None if s.x0 is None else np.array(s.x0),
                     y0=None if s.y0 is None else np.array(s.y0), blowup=s.blowup)


def _failure(err, seed=None, magnitude=None):
    ctx = dict(getattr(err, "context", {}))
    if seed is not None:
        ctx.setdefault("seed", seed)
    if magnitude is not None:
        ctx.setdefault("magnitude", magnitude)
    return {"error": type(err).__name__, "message": getattr(err, "message", str(err)),
            "context": ctx}


def _learn_worker(args):
    cfg, seed, ref, ref_rows = args
    t0 = time.perf_counter()
    try:
        traj = simulate(cfg.model, cfg.initial_gain, _sim_config(cfg, seed))
        t_sim = time.perf_counter() - t0
        data = build_data_matrices(traj, cfg.weights, cfg.sim.burn_in, cfg.olsbpi.rank_tol,
                                   warn=False)
        res = olsbpi(data, cfg.initial_gain, cfg.olsbpi.N, cfg.olsbpi.s_f, cfg.olsbpi.mode,
                     cfg.olsbpi.step)
        recs = diagnose(res, cfg.model, cfg.weights, ref)
    except NumericalFailure as err:
        err.add_context(seed=seed)
        return seed, [], {"seed": seed, "failure": _failure(err, seed)}
    rows = []
    for rec, (rk, rp, rj) in zip(recs, ref_rows):
        rows.append(ReportRow(seed=seed, iteration=rec.index, k_err=rec.k_err, p_err=rec.p_err,
                              j_err=rec.j_err, dg_rel=rec.dG_rel, admissible=rec.admissible,
                              ref_k_err=rk, ref_p_err=rp, ref_j_err=rj))
    last = recs[-1]
    info = {
        "seed": seed,
        "cond_psi": data.cond_psi,
        "psi_ill_conditioned": data.ill_conditioned,
        "final_gain": last.K.tolist(),
        "final_k_err": last.k_err,
        "final_rel_k_err": last.k_err / float(np.linalg.norm(ref.K)),
        "final_p_err": last.p_err,
        "final_j_err": last.j_err,
        "all_admissible": all(r.admissible for r in recs),
        "runtime_sim_s": t_sim,
        "runtime_total_s": time.perf_counter() - t0,
    }
    return seed, rows, info


def _robust_worker(args):
    cfg, seed, magnitude, ref = args
    spec = DisturbanceSpec(cfg.disturbance.mode, magnitude, seed)
    trace = robust_pi(cfg.initial_gain, cfg.model, cfg.weights, spec, cfg.disturbance.max_iter)
    rows = []
    for step in trace.steps:
        row = ReportRow(seed=seed, magnitude=magnitude, iteration=step.index,
                        k_err=float(np.linalg.norm(step.K - ref.K)), admissible=step.admissible)
        if step.P is not None:
            row.p_err = float(np.linalg.norm(step.P - ref.P))
            row.j_err = abs(mc.stationary_cost(step.P, cfg.model) - ref.J)
            if step.dG is not None:
                row.dg_rel = step.dG_norm / float(np.linalg.norm(step.G))
        rows.append(row)
    finite = [r.p_err for r in rows if not math.isnan(r.p_err)]
    info = {"seed": seed, "magnitude": magnitude,
            "terminal_p_err": finite[-1] if finite else None,
            "iterations": len(trace.steps), "failure": trace.failure,
            "failure_iteration": trace.failure_iteration}
    return seed, rows, info


def _simulate_worker(args):
    cfg, seed, out_dir = args
    try:
        traj = simulate(cfg.model, cfg.initial_gain, _sim_config(cfg, seed))
    except NumericalFailure as err:
        return seed, [], {"seed": seed, "failure": _failure(err, seed)}
    path = os.path.join(out_dir, f"trajectory_{seed}.csv")
    traj.to_csv(path)
    return seed, [], {"seed": seed, "file": os.path.basename(path), "steps": len(traj.times) - 1,
                      "moment2": estimate_stationary_moment(traj, 2),
                      "moment4": estimate_stationary_moment(traj, 4)}


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def _dump_json(obj, path):
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer, np.bool_)):
            return o.item()
        raise TypeError(f"not serializable: {type(o)}")

    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return None
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return o

    with open(path, "w") as fh:
        json.dump(clean(json.loads(json.dumps(obj, default=default))), fh, indent=2,
                  sort_keys=True)
        fh.write("\n")


def run_experiment(cfg, out_dir=None):
    """Run the configured algorithm and write its artifacts into ``out_dir``."""
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    summary = {"algorithm": cfg.algorithm, "seeds": list(cfg.seeds), "failures": []}
    report = ConvergenceReport()
    files = []
    model, weights, K1 = cfg.model, cfg.weights, cfg.initial_gain
    try:
        if cfg.algorithm == "simulate":
            results = _map(_simulate_worker, [(cfg, s, out_dir) for s in cfg.seeds], cfg.workers)
            summary["runs"] = [info for _, _, info in results]
            files += [info["file"] for info in summary["runs"] if "file" in info]
        else:
            ref = Reference.from_model(K1, model, weights, cfg.pi.max_iter, cfg.pi.tol)
            summary["optimal"] = {"P": ref.P, "K": ref.K, "J": ref.J}
            if cfg.algorithm == "solve":
                _run_solve(cfg, ref, report, summary)
            elif cfg.algorithm == "learn":
                ref_rows = _reference_rows(ref, model, weights, K1, cfg.olsbpi.N)
                jobs = [(cfg, s, ref, ref_rows) for s in cfg.seeds]
                results = _map(_learn_worker, jobs, cfg.workers)
                for _, rows, _ in results:
                    report.rows.extend(rows)
                summary["runs"] = [info for _, _, info in results]
                if report.rows:
                    files += emit_plot_data(report, out_dir, svg=cfg.svg)
            elif cfg.algorithm == "robust":
                jobs = [(cfg, s, mag, ref) for mag in cfg.disturbance.magnitudes
                        for s in cfg.seeds]
                results = _map(_robust_worker, jobs, cfg.workers)
                for _, rows, _ in results:
                    report.rows.extend(rows)
                summary["runs"] = [info for _, _, info in results]
                summary["median_terminal_p_err"] = _robust_medians(summary["runs"])
                for k, mag in enumerate(cfg.disturbance.magnitudes):
                    name = f"report_magnitude_{k}.csv"
                    report.select(magnitude=mag).to_csv(os.path.join(out_dir, name))
                    files.append(name)
    except NumericalFailure as err:
        summary["failures"].append(_failure(err))
    for run in summary.get("runs", []):
        if isinstance(run.get("failure"), dict):
            summary["failures"].append(run["failure"])
    if cfg.algorithm != "simulate":
        report.to_csv(os.path.join(out_dir, "report.csv"))
        files.append("report.csv")
    summary["runtime_s"] = time.perf_counter() - t0
    _dump_json(summary, os.path.join(out_dir, "summary.json"))
    files.append("summary.json")
    return ExperimentResult(report, summary, files, bool(summary["failures"]))


def _run_solve(cfg, ref, report, summary):
    trace = ref.trace
    for step in trace.steps:
        report.rows.append(ReportRow(
            iteration=step.index,
            ref_k_err=float(np.linalg.norm(step.K - ref.K)),
            ref_p_err=float(np.linalg.norm(step.P - ref.P)),
            ref_j_err=abs(mc.stationary_cost(step.P, cfg.model) - ref.J),
            admissible=step.admissible))
    summary["iterations"] = len(trace.steps)
    summary["converged"] = trace.converged
    summary["final_residual"] = trace.final_residual
    try:
        P_oracle = riccati_oracle(cfg.model, cfg.weights)
        summary["oracle_agreement"] = float(np.linalg.norm(P_oracle - ref.P))
    except NumericalFailure as err:
        summary["oracle_agreement"] = None
        summary["oracle_failure"] = _failure(err)


def _robust_medians(runs):
    by_mag = {}
    for run in runs:
        if run["failure"] is None and run["terminal_p_err"] is not None:
            by_mag.setdefault(run["magnitude"], []).append(run["terminal_p_err"])
    return {repr(k): float(np.median(v)) for k, v in sorted(by_mag.items())}


def _quantiles(values):
    vals = np.array([v for v in values if not math.isnan(v)], dtype=float)
    if vals.size == 0:
        return NAN, NAN, NAN
    p10, med, p90 = np.percentile(vals, [10, 50, 90])
    return float(med), float(p10), float(p90)


def emit_plot_data(report, out_dir, svg=False):
    """Write ``fig1a.csv`` .. ``fig1d.csv`` (and optionally SVG charts)."""
    rows = [r for r in report.rows if r.seed is not None and r.magnitude is None]
    if not rows:
        raise EmptyReport("report has no learning rows", module="experiment",
                          operation="emit_plot_data")
    iterations = sorted({r.iteration for r in rows})
    written = []
    for name, col, ref_col, title in FIGURES:
        table = []
        for i in iterations:
            at = [r for r in rows if r.iteration == i]
            med, p10, p90 = _quantiles([getattr(r, col) for r in at])
            base = 0.0 if ref_col is None else getattr(at[0], ref_col)
            table.append((i, med, p10, p90, base))
        path = os.path.join(out_dir, f"{name}.csv")
        with open(path, "w", newline="") as fh:
            fh.write("iteration,olsbpi_median,olsbpi_p10,olsbpi_p90,model_based_pi\n")
            for i, *vals in table:
                fh.write(",".join([str(i)] + [_fmt(v) for v in vals]) + "\n")
        written.append(f"{name}.csv")
        if svg:
            with open(os.path.join(out_dir, f"{name}.svg"), "w") as fh:
                fh.write(render_svg(table, title))
            written.append(f"{name}.svg")
    return written


def render_svg(table, title, width=480, height=320):
    """Static log-scale line chart of the median band and the model-based curve."""
    pad = 50
    xs = [t[0] for t in table]
    ys = [v for t in table for v in t[1:] if v is not None and math.isfinite(v) and v > 0]
    lo = math.floor(math.log10(min(ys))) if ys else -1
    hi = math.ceil(math.log10(max(ys))) if ys else 1
    hi = max(hi, lo + 1)
    x0, x1 = min(xs), max(max(xs), min(xs) + 1)

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (math.log10(y) - lo) / (hi - lo) * (height - 2 * pad)

    def line(idx, style):
        pts = [(px(t[0]), py(t[idx])) for t in table
               if t[idx] is not None and math.isfinite(t[idx]) and t[idx] > 0]
        if not pts:
            return ""
        coords = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
        return f'<polyline fill="none" {style} points="{coords}"/>\n'

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n',
             f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="12">{title}</text>\n',
             f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
             'fill="none" stroke="#888"/>\n']
    for e in range(lo, hi + 1):
        y = py(10.0 ** e)
        parts.append(f'<text x="{pad - 5}" y="{y + 4:.1f}" text-anchor="end" '
                     f'font-size="10">1e{e}</text>\n')
    for x in xs:
        parts.append(f'<text x="{px(x):.1f}" y="{height - pad + 15}" text-anchor="middle" '
                     f'font-size="10">{x}</text>\n')
    parts.append(line(3, 'stroke="#9cf" stroke-width="1"'))
    parts.append(line(2, 'stroke="#9cf" stroke-width="1"'))
    parts.append(line(1, 'stroke="#c00" stroke-width="2"'))
    parts.append(line(4, 'stroke="#00c" stroke-width="2" stroke-dasharray="6,4"'))
    parts.append("</svg>\n")
    return "".join(parts)
