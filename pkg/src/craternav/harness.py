"""Monte Carlo evaluation: run traverses, score them, aggregate over seeds."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import gmm, particle_filter as pf
from .association import default_gates
from .core import CraterDb
from .world import (
    ScenarioConfig, TrajectoryLog, build_trajectory, generate_crater_field, mask_orbital, observe,
    propagate, start_pose,
)

METHODS = ("dead_reckoning", "particle_filter", "gmm")
BASELINE_FRAC = 0.02
AGGREGATE_HEADER = ("method", "n", "mean_final_m", "median_final_m", "std_final_m", "win_rate")

# Independent generator streams per concern, so e.g. changing the map mask
# leaves the crater field, path and noise draws untouched.
_STREAMS = ("field", "trajectory", "mask", "motion", "observation", "filter")


def _streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.default_rng(s) for name, s in zip(_STREAMS, children)}


def scenario_maps(cfg: ScenarioConfig) -> tuple[CraterDb, CraterDb]:
    """The true crater field and the (possibly masked) orbital map for ``cfg``."""
    rngs = _streams(cfg.seed)
    truth_db = generate_crater_field(cfg, rngs["field"])
    return truth_db, mask_orbital(truth_db, cfg.orbital_mask_frac, rngs["mask"])


def run_scenario(cfg: ScenarioConfig) -> TrajectoryLog:
    """Simulate one traverse and run both localizers on the same observation stream."""
    rngs = _streams(cfg.seed)
    kpp = cfg.kpp
    truth_db = generate_crater_field(cfg, rngs["field"])
    map_db = mask_orbital(truth_db, cfg.orbital_mask_frac, rngs["mask"])
    commands = build_trajectory(cfg, rngs["trajectory"])
    opts = gmm.GmmOptions(grad_tol=cfg.grad_tol, max_iters=cfg.max_iters, hessian_step_m=cfg.hessian_step_m)
    gate_pos, gate_diam = default_gates(kpp, cfg.gate_motion_radius)
    gmm_gates = (gate_pos, gate_diam) if cfg.gmm_gate_obs else None
    max_correction = gate_pos if cfg.gmm_max_correction is None else cfg.gmm_max_correction

    truth = dr = gmm_pose = start_pose(cfg)
    particles = pf.initialize(truth, cfg.pf_init_pos_sigma, math.radians(cfg.pf_init_heading_sigma_deg),
                              cfg.n_particles, rngs["filter"])
    pf_pose, pf_cov = pf.estimate(particles)

    n = len(commands)
    tracks = {name: np.empty((n + 1, 3)) for name in ("truth", "dr", "pf", "gmm")}
    pf_covs = np.empty((n + 1, 2, 2))
    gmm_covs = np.full((n + 1, 2, 2), np.nan)
    gmm_ok = np.zeros(n + 1, dtype=bool)
    observations = [[]]
    tracks["truth"][0] = truth.as_array()
    tracks["dr"][0] = dr.as_array()
    tracks["pf"][0] = pf_pose.as_array()
    tracks["gmm"][0] = gmm_pose.as_array()
    pf_covs[0] = pf_cov
    gmm_covs[0] = 0.0

    for k, command in enumerate(commands, start=1):
        truth, odo = propagate(truth, command, cfg, rngs["motion"])
        dr = dr.advance(*odo)
        obs = observe(truth, truth_db, cfg, rngs["observation"])
        observations.append(obs)

        particles = pf.predict(particles, odo, kpp, rngs["filter"])
        particles = pf.update(particles, obs, map_db, kpp, gate_pos, gate_diam)
        pf_pose, pf_cov = pf.estimate(particles)
        particles = pf.resample(particles, rngs["filter"])

        prior = gmm_pose.advance(*odo) if cfg.gmm_feedback else dr
        gmm_pose = prior
        if len(obs) >= cfg.gmm_min_obs:
            corrected, result = gmm.localize(obs, prior, map_db, kpp, opts, gmm_gates)
            if result.converged and np.hypot(*result.translation) <= max_correction:
                gmm_pose = corrected
                gmm_covs[k] = result.stderr_cov
                gmm_ok[k] = True

        tracks["truth"][k] = truth.as_array()
        tracks["dr"][k] = dr.as_array()
        tracks["pf"][k] = pf_pose.as_array()
        tracks["gmm"][k] = gmm_pose.as_array()
        pf_covs[k] = pf_cov

    return TrajectoryLog(
        commands=commands, truth=tracks["truth"], dead_reckoning=tracks["dr"], pf=tracks["pf"],
        pf_cov=pf_covs, gmm=tracks["gmm"], gmm_cov=gmm_covs, observations=observations,
        gmm_converged=gmm_ok,
    )


@dataclass
class RunMetrics:
    """Per-step position errors (meters) for each method plus the 2% line."""

    errors: dict[str, np.ndarray]
    baseline_2pct: np.ndarray
    path_length: float

    def final(self, method: str) -> float:
        return float(self.errors[method][-1])

    def mean_error(self, method: str) -> float:
        """Mean error over steps 1..n (the start is known exactly)."""
        e = self.errors[method]
        return float(e[1:].mean()) if len(e) > 1 else float(e[0])

    def tail_mean(self, method: str, frac: float = 0.25) -> float:
        """Mean error over the last ``frac`` of the steps."""
        e = self.errors[method][1:]
        if not len(e):
            return float(self.errors[method][0])
        return float(e[-max(1, int(math.ceil(frac * len(e)))):].mean())

    def final_relative(self, method: str) -> float:
        return self.final(method) / self.path_length if self.path_length > 0 else 0.0


def compute_metrics(log: TrajectoryLog) -> RunMetrics:
    truth = log.truth[:, :2]
    errors = {}
    for method, track in zip(METHODS, (log.dead_reckoning, log.pf, log.gmm)):
        d = track[:, :2] - truth
        errors[method] = np.hypot(d[:, 0], d[:, 1])
    distance = np.concatenate([[0.0], np.cumsum([c[0] for c in log.commands])])
    return RunMetrics(errors, BASELINE_FRAC * distance, float(distance[-1]))


@dataclass
class MethodStats:
    mean_final: float
    median_final: float
    std_final: float
    win_rate: float
    finals: np.ndarray
    mean_error: float
    tail_mean: float
    mean_relative: float


@dataclass
class AggregateStats:
    n: int
    methods: dict[str, MethodStats]
    baseline_final: float
    mean_curves: dict[str, np.ndarray]
    baseline_curve: np.ndarray
    runs: list[RunMetrics] = field(repr=False, default_factory=list)


def aggregate(runs: Sequence[RunMetrics]) -> AggregateStats:
    """Fold run metrics in the given order.

    ``win_rate`` is the share of runs whose final error is below the 2% of
    distance line.
    """
    if not runs:
        raise ValueError("nothing to aggregate")
    methods = {}
    baseline_final = np.array([r.baseline_2pct[-1] for r in runs])
    for m in METHODS:
        finals = np.array([r.final(m) for r in runs])
        methods[m] = MethodStats(
            mean_final=float(finals.mean()),
            median_final=float(np.median(finals)),
            std_final=float(finals.std(ddof=1)) if len(finals) > 1 else 0.0,
            win_rate=float(np.mean(finals < baseline_final)),
            finals=finals,
            mean_error=float(np.mean([r.mean_error(m) for r in runs])),
            tail_mean=float(np.mean([r.tail_mean(m) for r in runs])),
            mean_relative=float(np.mean([r.final_relative(m) for r in runs])),
        )
    curves = {}
    lengths = {len(r.baseline_2pct) for r in runs}
    if len(lengths) == 1:
        curves = {m: np.mean([r.errors[m] for r in runs], axis=0) for m in METHODS}
    return AggregateStats(
        n=len(runs), methods=methods, baseline_final=float(baseline_final.mean()),
        mean_curves=curves, baseline_curve=runs[0].baseline_2pct, runs=list(runs),
    )


def _run_metrics(cfg: ScenarioConfig) -> RunMetrics:
    return compute_metrics(run_scenario(cfg))


def default_jobs() -> int:
    return os.cpu_count() or 1


def monte_carlo(cfg: ScenarioConfig, n: int, seed0: int | None = None, jobs: int = 1) -> AggregateStats:
    """``n`` independent runs with seeds ``seed0 + i`` (``seed0`` defaults to ``cfg.seed``)."""
    if n < 1:
        raise ValueError("need at least one run")
    seed0 = cfg.seed if seed0 is None else seed0
    configs = [cfg.with_seed(seed0 + i) for i in range(n)]
    if jobs > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            runs = list(ex.map(_run_metrics, configs))
    else:
        runs = [_run_metrics(c) for c in configs]
    return aggregate(runs)


def masking_sweep(cfg: ScenarioConfig, fractions: Sequence[float], n: int, seed0: int | None = None,
                  jobs: int = 1) -> dict[float, AggregateStats]:
    """Monte Carlo per orbital mask fraction, on the same seeds for every fraction."""
    for f in fractions:
        if not 0.0 <= f <= 1.0:
            raise ValueError(f"mask fraction {f} outside [0, 1]")
    return {
        float(f): monte_carlo(replace(cfg, orbital_mask_frac=float(f)), n, seed0, jobs) for f in fractions
    }


def write_aggregate_csv(stats: AggregateStats, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATE_HEADER)
        for m in METHODS:
            s = stats.methods[m]
            writer.writerow([m, stats.n, f"{s.mean_final:.6f}", f"{s.median_final:.6f}",
                             f"{s.std_final:.6f}", f"{s.win_rate:.6f}"])


def write_error_curves(stats: AggregateStats, path) -> None:
    """Whitespace-delimited ``step`` vs mean error per method, plus the 2% line."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("# step " + " ".join(METHODS) + " baseline_2pct\n")
        for k in range(len(stats.baseline_curve)):
            vals = [stats.mean_curves[m][k] for m in METHODS] + [stats.baseline_curve[k]]
            fh.write(f"{k} " + " ".join(f"{v:.6f}" for v in vals) + "\n")


def write_final_errors(stats: AggregateStats, path) -> None:
    """One row per run: final error per method (the samples behind the histograms)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("# run " + " ".join(METHODS) + " baseline_2pct\n")
        for i, run in enumerate(stats.runs):
            vals = [run.final(m) for m in METHODS] + [run.baseline_2pct[-1]]
            fh.write(f"{i} " + " ".join(f"{v:.6f}" for v in vals) + "\n")


def write_run_metrics(metrics: RunMetrics, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("step", *(f"{m}_err" for m in METHODS), "baseline_2pct"))
        for k in range(len(metrics.baseline_2pct)):
            writer.writerow([k, *(f"{metrics.errors[m][k]:.6f}" for m in METHODS),
                             f"{metrics.baseline_2pct[k]:.6f}"])


def summary_text(stats: AggregateStats, title: str, path_length: float) -> str:
    lines = [f"[{title}]", f"runs = {stats.n}", f"path_length_m = {path_length:.3f}",
             f"baseline_2pct_final_m = {stats.baseline_final:.6f}"]
    for m in METHODS:
        s = stats.methods[m]
        lines.append(
            f"{m}: mean_final_m={s.mean_final:.6f} median_final_m={s.median_final:.6f} "
            f"std_final_m={s.std_final:.6f} win_rate={s.win_rate:.6f} mean_step_err_m={s.mean_error:.6f} "
            f"tail25_err_m={s.tail_mean:.6f} mean_relative_final={s.mean_relative:.6f}"
        )
    return "\n".join(lines) + "\n"
