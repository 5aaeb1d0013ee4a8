"""2.5D simulation environment.

Craters are (x, y, diameter) disks on a flat plane. The rover drives a
commanded path, reports noisy odometry, and sees noisy body-frame copies of
the craters near it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import Crater, CraterDb, Extent, KppConfig, ObservedCrater, Pose2D, load_crater_db
from .geometry import world_to_body

MIN_OBSERVED_DIAMETER = 0.1

LOG_HEADER = (
    "step", "truth_x", "truth_y", "truth_h", "dr_x", "dr_y", "dr_h",
    "pf_x", "pf_y", "pf_h", "pf_err", "gmm_x", "gmm_y", "gmm_h", "gmm_err",
)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one simulated traverse.

    The field is ``[0, width] x [0, height]``. ``crater_diameters`` pins the
    crater sizes (positions still drawn uniformly) and ``crater_db`` loads a
    fixed map; with neither, ``n_craters`` are synthesized.
    """

    extent: tuple[float, float] = (400.0, 400.0)
    n_craters: int = 100
    kpp: KppConfig = field(default_factory=KppConfig)
    orbital_mask_frac: float = 0.0
    ground_mask_frac: float = 0.0
    step_length: float = 4.0
    n_steps: int = 100
    heading_change_bound: float = 2.0
    seed: int = 0
    crater_diameters: tuple[float, ...] | None = None
    crater_db: str | None = None
    # particle filter
    n_particles: int = 1000
    pf_init_pos_sigma: float = 1.0
    pf_init_heading_sigma_deg: float = 0.25
    gate_motion_radius: float = 2.0
    # gmm matcher
    gmm_feedback: bool = True
    gmm_min_obs: int = 1
    gmm_gate_obs: bool = True
    gmm_max_correction: float | None = None
    grad_tol: float = 1e-6
    max_iters: int = 500
    hessian_step_m: float = 1e-3

    def __post_init__(self):
        w, h = self.extent
        if not (w > 0 and h > 0):
            raise ValueError("extent must be positive")
        for name in ("orbital_mask_frac", "ground_mask_frac"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.n_craters < 0:
            raise ValueError("n_craters must be >= 0")
        if not self.step_length > 0:
            raise ValueError("step_length must be positive")
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.heading_change_bound < 0:
            raise ValueError("heading_change_bound must be >= 0")

    @property
    def bounds(self) -> Extent:
        return Extent(0.0, 0.0, float(self.extent[0]), float(self.extent[1]))

    @property
    def path_length(self) -> float:
        return self.n_steps * self.step_length

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)


def sample_diameter(u: float, kpp: KppConfig) -> float:
    """Inverse-CDF draw from the truncated power law p(d) ~ 1/d.

    With exponent 1 the law is log-uniform on ``[min_diameter, max_diameter]``.
    """
    if not 0.0 <= u < 1.0:
        raise ValueError(f"uniform draw must lie in [0, 1), got {u}")
    return kpp.min_diameter * (kpp.max_diameter / kpp.min_diameter) ** u


def generate_crater_field(cfg: ScenarioConfig, rng: np.random.Generator) -> CraterDb:
    bounds = cfg.bounds
    if cfg.crater_db is not None:
        return load_crater_db(cfg.crater_db)
    if cfg.crater_diameters is not None:
        diameters = np.asarray(cfg.crater_diameters, dtype=float)
        xy = rng.random((len(diameters), 2))
    else:
        draws = rng.random((cfg.n_craters, 3))
        xy = draws[:, :2]
        diameters = np.array([sample_diameter(u, cfg.kpp) for u in draws[:, 2]])
    xs = bounds.xmin + xy[:, 0] * bounds.width
    ys = bounds.ymin + xy[:, 1] * bounds.height
    craters = tuple(
        Crater(i + 1, float(x), float(y), float(d)) for i, (x, y, d) in enumerate(zip(xs, ys, diameters))
    )
    return CraterDb(craters, bounds)


def _withhold(n: int, frac: float, rng: np.random.Generator) -> np.ndarray:
    """Sorted indices that survive after withholding floor(frac * n) of n items."""
    n_drop = int(math.floor(frac * n + 1e-9))
    if n_drop == 0:
        return np.arange(n)
    drop = rng.choice(n, size=n_drop, replace=False)
    return np.setdiff1d(np.arange(n), drop)


def mask_orbital(db: CraterDb, frac: float, rng: np.random.Generator) -> CraterDb:
    """Drop floor(frac * n) map craters uniformly at random.

    Craters the rover sees but the map lacks then behave as false positives.
    """
    if not 0.0 <= frac <= 1.0:
        raise ValueError("mask fraction must lie in [0, 1]")
    return db.subset(_withhold(len(db), frac, rng).tolist())


def observe(truth: Pose2D, db: CraterDb, cfg: ScenarioConfig, rng: np.random.Generator) -> list[ObservedCrater]:
    """Noisy body-frame observations of the craters around ``truth``.

    Craters with centers inside the sensing range are seen, perturbed, and
    then a ``ground_mask_frac`` share is withheld (false negatives). Noisy
    detections landing beyond ``sensing_range + 3 * crater_pos_sigma`` are
    discarded.
    """
    kpp = cfg.kpp
    if len(db) == 0:
        return []
    d = np.hypot(db.centers[:, 0] - truth.x, db.centers[:, 1] - truth.y)
    visible = np.flatnonzero(d <= kpp.sensing_range)
    if visible.size == 0:
        return []
    noise = rng.standard_normal((visible.size, 3))
    max_range = kpp.sensing_range + 3.0 * kpp.crater_pos_sigma
    obs = []
    for i, (nx, ny, nd) in zip(visible, noise):
        c = db.craters[i]
        bx, by = world_to_body(truth, (c.x, c.y))
        bx += kpp.crater_pos_sigma * nx
        by += kpp.crater_pos_sigma * ny
        if math.hypot(bx, by) > max_range:
            continue
        diameter = max(c.diameter + kpp.crater_size_sigma * nd, MIN_OBSERVED_DIAMETER)
        obs.append(ObservedCrater(bx, by, diameter))
    keep = _withhold(len(obs), cfg.ground_mask_frac, rng)
    return [obs[i] for i in keep]


def propagate(truth: Pose2D, commanded: tuple[float, float], cfg: ScenarioConfig,
              rng: np.random.Generator) -> tuple[Pose2D, tuple[float, float]]:
    """Advance the true pose exactly and return the corrupted odometry delta."""
    dist, dheading = commanded
    if dist < 0:
        raise ValueError("commanded distance must be >= 0")
    z = rng.standard_normal(2)
    reported = (
        dist + cfg.kpp.motion_noise_frac * dist * z[0],
        dheading + cfg.kpp.heading_noise * z[1],
    )
    return truth.advance(dist, dheading), reported


def start_pose(cfg: ScenarioConfig) -> Pose2D:
    """Start of a path centered on the field diagonal, aimed along it."""
    w, h = cfg.extent
    heading = math.atan2(h, w)
    diag = math.hypot(w, h)
    offset = max(0.0, 0.5 * (diag - cfg.path_length))
    return Pose2D(offset * math.cos(heading), offset * math.sin(heading), heading)


def build_trajectory(cfg: ScenarioConfig, rng: np.random.Generator) -> list[tuple[float, float]]:
    bound = math.radians(cfg.heading_change_bound)
    turns = rng.uniform(-bound, bound, size=cfg.n_steps) if bound > 0 else np.zeros(cfg.n_steps)
    return [(float(cfg.step_length), float(t)) for t in turns]


@dataclass
class TrajectoryLog:
    """Per-step record of one run; every pose track has ``n_steps + 1`` rows.

    Covariances are 2x2 position covariances; ``gmm_cov`` rows are NaN at
    steps where the matcher had nothing to work with.
    """

    commands: list[tuple[float, float]]
    truth: np.ndarray
    dead_reckoning: np.ndarray
    pf: np.ndarray
    pf_cov: np.ndarray
    gmm: np.ndarray
    gmm_cov: np.ndarray
    observations: list[list[ObservedCrater]]
    gmm_converged: np.ndarray

    def __post_init__(self):
        n = len(self.commands) + 1
        for name in ("truth", "dead_reckoning", "pf", "pf_cov", "gmm", "gmm_cov", "gmm_converged"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} rows, expected {n}")

    @property
    def n_steps(self) -> int:
        return len(self.commands)

    def rows(self):
        pf_err = np.sqrt(np.trace(self.pf_cov, axis1=1, axis2=2))
        gmm_err = np.sqrt(np.trace(self.gmm_cov, axis1=1, axis2=2))
        for k in range(self.n_steps + 1):
            yield (k, *self.truth[k], *self.dead_reckoning[k], *self.pf[k], pf_err[k], *self.gmm[k], gmm_err[k])

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(LOG_HEADER)
            for row in self.rows():
                writer.writerow([row[0], *(f"{v:.6f}" for v in row[1:])])


def read_log_csv(path) -> dict[str, np.ndarray]:
    """Column arrays from a trajectory CSV written by :meth:`TrajectoryLog.to_csv`."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != LOG_HEADER:
            raise ValueError(f"{path}: unexpected trajectory header")
        data = np.array([[float(v) for v in row] for row in reader], dtype=float).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}
