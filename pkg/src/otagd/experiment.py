"""Batch experiments: simulate, fit, evaluate bounds, write CSV + JSON (+ figures).

Files for one run land in a scratch directory first and are moved into
place only after everything succeeded, so a failed run leaves nothing
behind.
"""

from __future__ import annotations

import json
import logging
import os
import shutil
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from otagd.analysis import (
    ApplicabilityError,
    BoundConstants,
    calibrate_C,
    corollary_rate,
    default_window,
    fit_rate,
    generalization_bound,
    theorem1_bound,
    theorem2_bound,
)
from otagd.config import ExperimentConfig
from otagd.stable import RngStream
from otagd.trainer import TrajectoryStats, run_monte_carlo

log = logging.getLogger(__name__)

CSV_HEADER = "round,mean_alpha_err,median_alpha_err,mean_loss,n_trials"
OUTPUT_ENV = "OTAGD_OUTPUT_DIR"
SWEEP_AXES = ("alpha", "N", "rho", "beta")
# Stream id reserved for calibration draws, far from any trial id.
CALIBRATION_STREAM = 2**63


@dataclass
class RunResult:
    directory: Path
    stats: TrajectoryStats
    summary: dict
    files: list[Path] = field(default_factory=list)

    @property
    def slope(self) -> float | None:
        return self.summary["fit"]["slope"] if self.summary["fit"] else None


def output_root(cfg: ExperimentConfig, override=None) -> Path:
    if override is not None:
        return Path(override)
    env = os.environ.get(OUTPUT_ENV)
    return Path(env) if env else Path(cfg["output"]["directory"])


def _fmt(x) -> str:
    x = float(x)
    return repr(x) if np.isfinite(x) else "nan"


def thinned_rounds(K: int, thin_above: int = 1000, per_decade: int = 200) -> np.ndarray:
    """Every round up to ``thin_above``, log-spaced rounds after, always ``K``."""
    head = np.arange(0, min(K, thin_above) + 1)
    if K <= thin_above:
        return head
    decades = np.log10(K) - np.log10(thin_above)
    n = max(2, int(np.ceil(decades * per_decade)) + 1)
    tail = np.unique(np.round(np.logspace(np.log10(thin_above), np.log10(K), n)).astype(int))
    return np.unique(np.concatenate([head, tail, [K]]))


def trajectory_csv(stats: TrajectoryStats, rounds) -> str:
    lines = [CSV_HEADER]
    for k in rounds:
        lines.append(",".join([
            str(int(k)),
            _fmt(stats.mean_alpha_err[k]),
            _fmt(stats.median_alpha_err[k]),
            _fmt(stats.mean_loss[k]),
            str(int(stats.n_trials[k])),
        ]))
    return "\n".join(lines) + "\n"


def read_trajectory_csv(path) -> dict:
    """Parse a trajectory CSV back into arrays keyed by column name."""
    text = Path(path).read_text().splitlines()
    if text[0] != CSV_HEADER:
        raise ValueError(f"unexpected header {text[0]!r}")
    rows = [line.split(",") for line in text[1:] if line]
    cols = CSV_HEADER.split(",")
    out = {c: np.array([float(r[i]) for r in rows]) for i, c in enumerate(cols)}
    out["round"] = out["round"].astype(int)
    out["n_trials"] = out["n_trials"].astype(int)
    return out


def predicted_exponent(cfg: ExperimentConfig) -> float | None:
    if not cfg["channel"]["interference"]:
        return None
    t = cfg["training"]
    if t["schedule"] == "theta_over_k":
        return corollary_rate(1.0, cfg.alpha)
    if t["schedule"] == "power":
        return corollary_rate(t["rho"], cfg.alpha)
    return None


def bound_report(cfg: ExperimentConfig, problem=None, channel=None) -> dict:
    """Closed-form bound evaluations at the configured rounds."""
    problem = problem if problem is not None else cfg.build_problem()
    channel = channel if channel is not None else cfg.build_channel()
    a_cfg, t = cfg["analysis"], cfg["training"]
    report = {"k": list(a_cfg["bound_k"])}
    report["generalization"] = {
        "B": a_cfg["gen_B"],
        "alpha": cfg.alpha,
        "lambda": a_cfg["gen_lambda"] if a_cfg["gen_lambda"] is not None else problem.lam,
        "dataset_size": a_cfg["gen_dataset_size"],
        "p": a_cfg["gen_p"],
    }
    report["generalization"]["bound"] = generalization_bound(
        report["generalization"]["B"], cfg.alpha, report["generalization"]["lambda"],
        a_cfg["gen_dataset_size"], a_cfg["gen_p"])
    if channel.interference is None:
        report["gd_bound"] = report["momentum_bound"] = None
        report["note"] = "interference off: convergence bounds not applicable"
        return report
    if a_cfg["bound_C"] is not None:
        C = a_cfg["bound_C"]
        report["C"] = {"value": C, "source": "config"}
    else:
        cal = calibrate_C(channel.interference, problem.dim, a_cfg["calib_samples"],
                          RngStream(t["seed"], CALIBRATION_STREAM), a_cfg["calib_quantile"])
        C = cal.value
        report["C"] = {"value": C, "source": "calibrated", "truncation_quantile": cal.quantile,
                       "samples": cal.samples, "kept": cal.kept, "untruncated_mean": cal.untruncated_mean}
    radius = max(t["init_distance"], 1e-12)
    G = problem.gradient_bound(radius)
    report["constants"] = {"G": G, "G_region_radius": radius, "sigma": channel.sigma, "mu": channel.mu,
                           "L": a_cfg["bound_L"], "d": problem.dim, "N": channel.num_agents}
    if t["schedule"] != "theta_over_k":
        report["gd_bound"] = report["momentum_bound"] = None
        report["note"] = "closed-form bounds need the theta/k schedule"
        return report
    const = BoundConstants(C=C, G=G, sigma=channel.sigma, mu=channel.mu, L=a_cfg["bound_L"],
                           theta=t["theta"], d=problem.dim, N=channel.num_agents, alpha=cfg.alpha,
                           beta=t["beta"])
    for name, fn in (("gd_bound", theorem1_bound), ("momentum_bound", theorem2_bound)):
        try:
            report[name] = [fn(const, k) for k in a_cfg["bound_k"]]
        except ApplicabilityError as exc:
            report[name] = {"error": str(exc)}
    return report


def summarize_run(cfg: ExperimentConfig, stats: TrajectoryStats, problem, channel) -> dict:
    t, a = cfg["training"], cfg["analysis"]
    K = t["rounds"]
    fit = None
    if K >= 2:
        kmin, kmax = default_window(K)
        kmin = a["fit_kmin"] if a["fit_kmin"] is not None else kmin
        kmax = a["fit_kmax"] if a["fit_kmax"] is not None else kmax
        if kmin < kmax:
            try:
                fit = asdict(fit_rate(stats, kmin, kmax))
                fit["fit_window"] = list(fit["fit_window"])
            except ValueError as exc:
                fit = {"slope": None, "error": str(exc)}
    return {
        "fit": fit,
        "predicted_exponent": predicted_exponent(cfg),
        "initial_error": stats.initial_error,
        "final_mean_error": float(stats.mean_alpha_err[-1]),
        "final_median_error": float(stats.median_alpha_err[-1]),
        "final_trimmed_mean_error": float(stats.trimmed_mean_alpha_err[-1]),
        "final_n_trials": int(stats.n_trials[-1]),
        "flagged_trials": list(stats.flagged),
        "bounds": bound_report(cfg, problem, channel),
        "problem": problem.describe(),
        "config": cfg.to_dict(),
    }


def check_run(cfg: ExperimentConfig, summary: dict) -> tuple[bool, str]:
    """Fitted slope inside ``[pred - check_below, pred + check_above]``."""
    pred = summary["predicted_exponent"]
    fit = summary["fit"]
    if pred is None or not fit or fit.get("slope") is None:
        return False, "no rate prediction or fit available"
    lo = pred - cfg["analysis"]["check_below"]
    hi = pred + cfg["analysis"]["check_above"]
    ok = lo <= fit["slope"] <= hi and not summary["flagged_trials"]
    return ok, f"slope {fit['slope']:.4f} vs [{lo:.4f}, {hi:.4f}]"


class _Staging:
    """Scratch directory whose files are moved into ``target`` on commit."""

    def __init__(self, target: Path):
        self.target = target
        target.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=".staging-", dir=target))
        self.names: list[str] = []

    def write_text(self, name: str, text: str) -> None:
        (self.tmp / name).write_text(text)
        self.names.append(name)

    def path(self, name: str) -> Path:
        self.names.append(name)
        return self.tmp / name

    def commit(self) -> list[Path]:
        out = []
        for name in self.names:
            src = self.tmp / name
            if src.exists():
                dst = self.target / name
                os.replace(src, dst)
                out.append(dst)
        shutil.rmtree(self.tmp, ignore_errors=True)
        return out

    def abort(self) -> None:
        shutil.rmtree(self.tmp, ignore_errors=True)


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> RunResult:
    """Simulate, then write ``trajectory.csv``, ``summary.json`` and figures."""
    target = output_root(cfg, out_dir)
    stage = _Staging(target)
    try:
        start = time.perf_counter()
        problem = cfg.build_problem()
        channel = cfg.build_channel()
        stats = run_monte_carlo(problem, channel, cfg.build_train_config())
        summary = summarize_run(cfg, stats, problem, channel)
        o = cfg["output"]
        rounds = thinned_rounds(cfg["training"]["rounds"], o["thin_above"], o["points_per_decade"])
        stage.write_text("trajectory.csv", trajectory_csv(stats, rounds))
        if o["figures"]:
            from otagd import plotting
            plotting.plot_trajectory(stats, summary, stage.path("trajectory.png"))
        summary["wall_time_s"] = time.perf_counter() - start
        stage.write_text("summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
        files = stage.commit()
    except BaseException:
        stage.abort()
        raise
    log.info("wrote %s", ", ".join(str(f) for f in files))
    return RunResult(target, stats, summary, files)


def apply_axis(cfg: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    if axis == "alpha":
        return cfg.copy_with("channel", "alpha", float(value))
    if axis == "N":
        return cfg.copy_with("problem", "agents", int(value))
    if axis == "rho":
        out = cfg.copy_with("training", "rho", float(value))
        return out.copy_with("training", "schedule", "power")
    if axis == "beta":
        out = cfg.copy_with("training", "momentum", True)
        return out.copy_with("training", "beta", float(value))
    raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")


def _verdicts(axis: str, rows: list[dict]) -> dict:
    vals = [r["value"] for r in rows]
    slopes = [r["fitted_slope"] for r in rows]
    med = [r["final_median_error"] for r in rows]
    order = np.argsort(vals)
    s = [slopes[i] for i in order]
    m = [med[i] for i in order]
    have_slopes = all(x is not None for x in s)
    out = {}
    if axis in ("alpha", "rho"):
        # lighter tails / faster step decay -> steeper decay
        out["slopes_decreasing_in_value"] = bool(have_slopes and all(b < a for a, b in zip(s, s[1:])))
    if axis == "N":
        out["final_median_decreasing_in_value"] = all(b < a for a, b in zip(m, m[1:]))
    if axis == "beta":
        out["all_converged"] = all(r["final_median_error"] < 0.01 * r["initial_error"] for r in rows)
    out["passed"] = all(out.values())
    return out


def sweep(cfg: ExperimentConfig, axis: str, values, out_dir=None) -> dict:
    """One ``run_experiment`` per value plus ``comparison.csv``/``comparison.json``."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    root = output_root(cfg, out_dir)
    rows, runs = [], []
    for value in values:
        sub = apply_axis(cfg, axis, value)
        try:
            res = run_experiment(sub, root / f"{axis}_{value}")
        except Exception as exc:
            raise RuntimeError(f"sweep {axis}={value} failed: {exc}") from exc
        runs.append(res)
        rows.append({
            "value": float(value),
            "fitted_slope": res.slope,
            "predicted_exponent": res.summary["predicted_exponent"],
            "initial_error": res.summary["initial_error"],
            "final_median_error": res.summary["final_median_error"],
            "final_mean_error": res.summary["final_mean_error"],
            "flagged_trials": len(res.summary["flagged_trials"]),
            "directory": str(res.directory),
        })
    comparison = {"axis": axis, "rows": rows, "verdicts": _verdicts(axis, rows)}
    stage = _Staging(root)
    try:
        lines = ["value,fitted_slope,predicted_exponent,final_median_error,final_mean_error,flagged_trials"]
        for r in rows:
            lines.append(",".join([
                _fmt(r["value"]),
                "nan" if r["fitted_slope"] is None else _fmt(r["fitted_slope"]),
                "nan" if r["predicted_exponent"] is None else _fmt(r["predicted_exponent"]),
                _fmt(r["final_median_error"]),
                _fmt(r["final_mean_error"]),
                str(r["flagged_trials"]),
            ]))
        stage.write_text("comparison.csv", "\n".join(lines) + "\n")
        stage.write_text("comparison.json", json.dumps(comparison, indent=2, sort_keys=True) + "\n")
        if cfg["output"]["figures"]:
            from otagd import plotting
            plotting.plot_sweep(axis, [(r["value"], run.stats) for r, run in zip(rows, runs)],
                                stage.path("comparison.png"))
        stage.commit()
    except BaseException:
        stage.abort()
        raise
    return comparison
