"""Crater-matching particle filter.

Each particle is a pose hypothesis. Its measurement score is the average
area IoU between the observed craters (placed in the world through that
particle's pose) and the map craters they associate with. In-range map
craters that went unobserved fill the average with ``1 - P_d`` each, so a
hypothesis is not punished much for craters a detector is expected to miss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .association import default_gates, gated_costs, greedy_match
from .core import CraterDb, KppConfig, ObservedCrater, Pose2D, wrap_angle
from .geometry import body_to_world_batch, disk_iou

log = logging.getLogger(__name__)

WEIGHT_FLOOR = 1e-6
DEFAULT_PARTICLES = 1000


@dataclass(frozen=True)
class ParticleSet:
    """``poses`` is (n, 3) as ``[x, y, heading]``; ``weights`` is (n,)."""

    poses: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        poses = np.asarray(self.poses, dtype=float).reshape(-1, 3)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(poses) < 1:
            raise ValueError("a particle set needs at least one particle")
        if len(weights) != len(poses):
            raise ValueError("one weight per particle")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.weights)


def initialize(prior: Pose2D, pos_sigma: float, heading_sigma: float, n: int,
               rng: np.random.Generator) -> ParticleSet:
    if n < 1:
        raise ValueError("need at least one particle")
    z = rng.standard_normal((n, 3))
    poses = np.empty((n, 3))
    poses[:, 0] = prior.x + pos_sigma * z[:, 0]
    poses[:, 1] = prior.y + pos_sigma * z[:, 1]
    poses[:, 2] = wrap_angle(prior.heading + heading_sigma * z[:, 2])
    return ParticleSet(poses, np.full(n, 1.0 / n))


def predict(ps: ParticleSet, odometry: tuple[float, float], kpp: KppConfig,
            rng: np.random.Generator) -> ParticleSet:
    """Move every particle by the odometry delta plus its own motion noise."""
    dist, dheading = odometry
    if dist < 0:
        raise ValueError("odometry distance must be >= 0")
    n = len(ps)
    z = rng.standard_normal((n, 2))
    step = dist * (1.0 + kpp.motion_noise_frac * z[:, 0])
    heading = ps.poses[:, 2] + dheading + kpp.heading_noise * z[:, 1]
    poses = np.column_stack([
        ps.poses[:, 0] + step * np.cos(heading),
        ps.poses[:, 1] + step * np.sin(heading),
        wrap_angle(heading),
    ])
    return ParticleSet(poses, ps.weights.copy())


def measurement_scores(poses: np.ndarray, obs: Sequence[ObservedCrater], db: CraterDb, kpp: KppConfig,
                       gate_pos: float, gate_diam: float) -> np.ndarray:
    """Score in [0, 1] for each pose in ``poses`` (n, 3).

    A pose with no observations and no map craters in range scores 1 (no
    information either way).
    """
    poses = np.atleast_2d(poses)
    n, k = len(poses), len(obs)
    if len(db):
        # only map craters some particle could possibly see or associate with
        lo = poses[:, :2].min(axis=0) - (kpp.sensing_range + gate_pos)
        hi = poses[:, :2].max(axis=0) + (kpp.sensing_range + gate_pos)
        near = np.all((db.centers >= lo) & (db.centers <= hi), axis=1)
        order = np.flatnonzero(near)
        order = order[np.argsort(db.ids[order], kind="stable")]
    else:
        order = np.zeros(0, dtype=np.int64)
    db_xy = db.centers[order]
    db_d = db.diameters[order]
    m = len(order)

    rel = poses[:, None, :2] - db_xy[None, :, :]
    in_range = np.hypot(rel[..., 0], rel[..., 1]) <= kpp.sensing_range  # (n, m)

    iou_sum = np.zeros(n)
    matched_db = np.zeros((n, m), dtype=bool)
    if k and m:
        obs_xy = np.array([(o.x_body, o.y_body) for o in obs], dtype=float)
        obs_d = np.array([o.diameter for o in obs], dtype=float)
        world = body_to_world_batch(poses, obs_xy)  # (n, k, 2)
        cost = gated_costs(world, obs_d, db_xy, db_d, gate_pos, gate_diam)
        match = greedy_match(cost)  # (n, k)
        rows, cols = np.nonzero(match >= 0)
        mi = match[rows, cols]
        dist = cost[rows, mi, cols]
        iou = disk_iou(dist, 0.5 * obs_d[cols], 0.5 * db_d[mi])
        np.add.at(iou_sum, rows, iou)
        matched_db[rows, mi] = True

    n_undetected = np.count_nonzero(in_range & ~matched_db, axis=1)
    denom = k + n_undetected
    numer = iou_sum + n_undetected * (1.0 - kpp.detection_prob_pd)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, numer / np.maximum(denom, 1), 1.0)
    return np.clip(s, 0.0, 1.0)


def update(ps: ParticleSet, obs: Sequence[ObservedCrater], db: CraterDb, kpp: KppConfig,
           gate_pos: float | None = None, gate_diam: float | None = None) -> ParticleSet:
    if not obs and not len(db):
        return ps
    default_pos, default_diam = default_gates(kpp)
    gate_pos = default_pos if gate_pos is None else gate_pos
    gate_diam = default_diam if gate_diam is None else gate_diam
    s = measurement_scores(ps.poses, obs, db, kpp, gate_pos, gate_diam)
    w = ps.weights * (s + WEIGHT_FLOOR)
    total = w.sum()
    if not total > 0:
        w = np.full(len(ps), 1.0 / len(ps))
    else:
        w = w / total
    return ParticleSet(ps.poses, w)


def systematic_indices(weights: np.ndarray, offset: float) -> np.ndarray:
    """Low-variance resampling cursor.

    Selects the particle under each of the n evenly spaced pointers
    ``(offset + i) / n``, ``offset`` in [0, 1).
    """
    weights = np.asarray(weights, dtype=float)
    n = len(weights)
    cumulative = np.cumsum(weights)
    cumulative /= cumulative[-1]
    cumulative[-1] = 1.0
    pointers = (offset + np.arange(n)) / n
    return np.minimum(np.searchsorted(cumulative, pointers, side="right"), n - 1)


def resample(ps: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    n = len(ps)
    weights = ps.weights
    if not weights.sum() > 0:
        log.warning("all particle weights are zero; resampling from uniform")
        weights = np.full(n, 1.0 / n)
    idx = systematic_indices(weights, rng.random())
    return ParticleSet(ps.poses[idx].copy(), np.full(n, 1.0 / n))


def estimate(ps: ParticleSet) -> tuple[Pose2D, np.ndarray]:
    """Weighted mean pose (circular mean heading) and 2x2 position covariance."""
    w = ps.weights / ps.weights.sum()
    xy = ps.poses[:, :2]
    mean = w @ xy
    heading = np.arctan2(w @ np.sin(ps.poses[:, 2]), w @ np.cos(ps.poses[:, 2]))
    centered = xy - mean
    cov = (centered * w[:, None]).T @ centered
    return Pose2D(float(mean[0]), float(mean[1]), float(heading)), 0.5 * (cov + cov.T)
