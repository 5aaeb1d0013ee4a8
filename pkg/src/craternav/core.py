"""Shared domain types and the crater database file format.

Everything here is an immutable value type. Diameters are what gets stored;
radii are derived where they are needed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CSV_HEADER = ("id", "x_m", "y_m", "diameter_m", "depth_m")


class CraterDbError(ValueError):
    """Invalid crater database contents."""


class CraterDbParseError(CraterDbError):
    def __init__(self, path, line: int, reason: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {reason}")


def wrap_angle(a):
    """Wrap an angle (scalar or array) to (-pi, pi]."""
    two_pi = 2.0 * math.pi
    if np.ndim(a) == 0:
        return math.pi - (math.pi - float(a)) % two_pi
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=float), two_pi)


@dataclass(frozen=True)
class Crater:
    id: int
    x: float
    y: float
    diameter: float
    depth: float | None = None

    def __post_init__(self):
        if not self.diameter > 0:
            raise CraterDbError(f"crater {self.id}: diameter must be positive, got {self.diameter}")
        if self.depth is not None and not self.depth >= 0:
            raise CraterDbError(f"crater {self.id}: depth must be >= 0, got {self.depth}")

    @property
    def radius(self) -> float:
        return 0.5 * self.diameter


@dataclass(frozen=True)
class Extent:
    """Axis-aligned rectangle ``[xmin, xmax] x [ymin, ymax]`` in meters."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax


@dataclass(frozen=True)
class CraterDb:
    """Orbital crater landmark map.

    Array views (``ids``, ``centers``, ``diameters``) are cached for the
    vectorized localizers.
    """

    craters: tuple[Crater, ...]
    extent: Extent

    def __post_init__(self):
        object.__setattr__(self, "craters", tuple(self.craters))
        seen = set()
        for c in self.craters:
            if c.id in seen:
                raise CraterDbError(f"duplicate crater id {c.id}")
            seen.add(c.id)
            if not self.extent.contains(c.x, c.y):
                raise CraterDbError(f"crater {c.id} center ({c.x}, {c.y}) lies outside the extent")

    @classmethod
    def from_craters(cls, craters: Iterable[Crater], extent: Extent | None = None) -> "CraterDb":
        craters = tuple(craters)
        if extent is None:
            extent = tight_extent(craters)
        return cls(craters, extent)

    def __len__(self) -> int:
        return len(self.craters)

    def __iter__(self):
        return iter(self.craters)

    @cached_property
    def ids(self) -> np.ndarray:
        return np.array([c.id for c in self.craters], dtype=np.int64)

    @cached_property
    def centers(self) -> np.ndarray:
        return np.array([(c.x, c.y) for c in self.craters], dtype=float).reshape(-1, 2)

    @cached_property
    def diameters(self) -> np.ndarray:
        return np.array([c.diameter for c in self.craters], dtype=float)

    def within(self, x: float, y: float, radius: float) -> "CraterDb":
        """Sub-database of craters whose centers lie within ``radius`` of (x, y)."""
        if not self.craters:
            return self
        d = np.hypot(self.centers[:, 0] - x, self.centers[:, 1] - y)
        keep = np.flatnonzero(d <= radius)
        return CraterDb(tuple(self.craters[i] for i in keep), self.extent)

    def subset(self, indices: Sequence[int]) -> "CraterDb":
        return CraterDb(tuple(self.craters[i] for i in sorted(indices)), self.extent)


def tight_extent(craters: Sequence[Crater]) -> Extent:
    """Bounding box of the centers, padded by the largest radius."""
    if not craters:
        return Extent(0.0, 0.0, 0.0, 0.0)
    pad = max(c.radius for c in craters)
    xs = [c.x for c in craters]
    ys = [c.y for c in craters]
    return Extent(min(xs) - pad, min(ys) - pad, max(xs) + pad, max(ys) + pad)


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    def advance(self, distance: float, dheading: float) -> "Pose2D":
        """Turn by ``dheading`` then drive ``distance`` along the new heading."""
        h = self.heading + dheading
        return Pose2D(self.x + distance * math.cos(h), self.y + distance * math.sin(h), h)

    def translated(self, dx: float, dy: float) -> "Pose2D":
        return Pose2D(self.x + dx, self.y + dy, self.heading)

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading], dtype=float)


@dataclass(frozen=True)
class ObservedCrater:
    """A crater seen from the rover, in the body frame (x forward, y left).

    The sensing-range gate is applied by the observation model, not here.
    """

    x_body: float
    y_body: float
    diameter: float

    def __post_init__(self):
        if not self.diameter > 0:
            raise ValueError(f"observed diameter must be positive, got {self.diameter}")

    @property
    def range(self) -> float:
        return math.hypot(self.x_body, self.y_body)


@dataclass(frozen=True)
class KppConfig:
    """Sensor and map performance parameters.

    ``heading_noise_deg`` is the per-step odometry heading noise; both the
    simulator and the particle filter motion model read it.
    """

    detection_prob_pd: float = 0.5
    sensing_range: float = 40.0
    crater_pos_sigma: float = 3.0
    crater_size_sigma: float = 1.0
    motion_noise_frac: float = 0.02
    min_diameter: float = 5.0
    max_diameter: float = 20.0
    heading_noise_deg: float = 0.25

    def __post_init__(self):
        if not 0.0 <= self.detection_prob_pd <= 1.0:
            raise ValueError("detection_prob_pd must lie in [0, 1]")
        for name in ("crater_pos_sigma", "crater_size_sigma", "motion_noise_frac", "heading_noise_deg"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.sensing_range > 0:
            raise ValueError("sensing_range must be positive")
        if not 0 < self.min_diameter < self.max_diameter:
            raise ValueError("need 0 < min_diameter < max_diameter")

    @property
    def heading_noise(self) -> float:
        return math.radians(self.heading_noise_deg)


def _parse_float(text: str, path, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CraterDbParseError(path, line, f"column {column!r}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise CraterDbParseError(path, line, f"column {column!r}: non-finite value {text!r}")
    return value


def load_crater_db(path) -> CraterDb:
    """Read a crater CSV (``id,x_m,y_m,diameter_m,depth_m``; depth may be empty).

    The extent is the tight bounding box of the centers padded by the
    largest radius.
    """
    path = Path(path)
    craters = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CraterDbParseError(path, 1, "missing header")
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise CraterDbParseError(path, 1, f"expected header {','.join(CSV_HEADER)}")
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) not in (4, 5):
                raise CraterDbParseError(path, line, f"expected 4 or 5 fields, got {len(row)}")
            try:
                cid = int(row[0])
            except ValueError:
                raise CraterDbParseError(path, line, f"column 'id': not an integer: {row[0]!r}") from None
            x = _parse_float(row[1], path, line, "x_m")
            y = _parse_float(row[2], path, line, "y_m")
            d = _parse_float(row[3], path, line, "diameter_m")
            depth = None
            if len(row) == 5 and row[4].strip():
                depth = _parse_float(row[4], path, line, "depth_m")
            try:
                craters.append(Crater(cid, x, y, d, depth))
            except CraterDbError as exc:
                raise CraterDbError(f"{path}:{line}: {exc}") from None
    return CraterDb.from_craters(craters)


def save_crater_db(db: CraterDb, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for c in db.craters:
            depth = "" if c.depth is None else repr(float(c.depth))
            writer.writerow([int(c.id), repr(float(c.x)), repr(float(c.y)), repr(float(c.diameter)), depth])
