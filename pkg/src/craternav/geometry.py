"""Planar circle geometry and rigid 2-D frame transforms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Pose2D

# Center distances this close to a regime boundary snap onto it.
_SNAP = 1e-12


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"circle radius must be positive, got {self.r}")

    @property
    def area(self) -> float:
        return math.pi * self.r * self.r


def lens_area(d, r1, r2):
    """Intersection area of disks with radii ``r1``, ``r2`` and center distance ``d``.

    Broadcasts over numpy arrays. Radii must already be positive.
    """
    d, r1, r2 = np.broadcast_arrays(
        np.asarray(d, dtype=float), np.asarray(r1, dtype=float), np.asarray(r2, dtype=float)
    )
    rsum = r1 + r2
    rdiff = np.abs(r1 - r2)
    rmin = np.minimum(r1, r2)

    disjoint = d >= rsum - _SNAP
    contained = d <= rdiff + _SNAP
    partial = ~(disjoint | contained)

    out = np.where(contained & ~disjoint, np.pi * rmin * rmin, 0.0)
    if np.any(partial):
        dp, a, b = d[partial], r1[partial], r2[partial]
        c1 = np.clip((dp * dp + a * a - b * b) / (2.0 * dp * a), -1.0, 1.0)
        c2 = np.clip((dp * dp + b * b - a * a) / (2.0 * dp * b), -1.0, 1.0)
        k = (-dp + a + b) * (dp + a - b) * (dp - a + b) * (dp + a + b)
        out = np.array(out, dtype=float)
        out[partial] = a * a * np.arccos(c1) + b * b * np.arccos(c2) - 0.5 * np.sqrt(np.maximum(k, 0.0))
    return out if out.ndim else float(out)


def disk_iou(d, r1, r2):
    """Vectorized area IoU of two disks; see :func:`lens_area`."""
    inter = lens_area(d, r1, r2)
    union = np.pi * (np.asarray(r1, dtype=float) ** 2 + np.asarray(r2, dtype=float) ** 2) - inter
    iou = np.clip(inter / union, 0.0, 1.0)
    return iou if np.ndim(iou) else float(iou)


def _center_distance(a: Circle, b: Circle) -> float:
    return math.hypot(a.cx - b.cx, a.cy - b.cy)


def circle_intersection_area(a: Circle, b: Circle) -> float:
    if not (a.r > 0 and b.r > 0):
        raise ValueError("circle radii must be positive")
    return lens_area(_center_distance(a, b), a.r, b.r)


def circle_iou(a: Circle, b: Circle) -> float:
    """Intersection over union of two disks, in [0, 1].

    Symmetric: the lens formula is evaluated with the pair in a fixed
    (sorted) order so ``circle_iou(a, b) == circle_iou(b, a)`` bit for bit.
    """
    if not (a.r > 0 and b.r > 0):
        raise ValueError("circle radii must be positive")
    r1, r2 = sorted((a.r, b.r))
    return disk_iou(_center_distance(a, b), r1, r2)


def body_to_world(pose: Pose2D, p) -> tuple[float, float]:
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    bx, by = p
    return (pose.x + c * bx - s * by, pose.y + s * bx + c * by)


def world_to_body(pose: Pose2D, p) -> tuple[float, float]:
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    dx, dy = p[0] - pose.x, p[1] - pose.y
    return (c * dx + s * dy, -s * dx + c * dy)


def body_to_world_batch(poses: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Map body-frame ``points`` (K, 2) through every pose in ``poses`` (P, 3).

    Returns an array of shape (P, K, 2).
    """
    poses = np.atleast_2d(poses)
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    c = np.cos(poses[:, 2])[:, None]
    s = np.sin(poses[:, 2])[:, None]
    bx, by = points[:, 0][None, :], points[:, 1][None, :]
    wx = poses[:, 0][:, None] + c * bx - s * by
    wy = poses[:, 1][:, None] + s * bx + c * by
    return np.stack([wx, wy], axis=-1)
