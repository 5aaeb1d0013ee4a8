"""Greedy nearest-neighbor association of world-frame observations to the map."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Crater, CraterDb, KppConfig


@dataclass(frozen=True)
class MatchSet:
    pairs: tuple[tuple[int, int], ...]
    unmatched_obs: tuple[int, ...]
    unmatched_db_in_range: tuple[int, ...]

    def __post_init__(self):
        obs = [o for o, _ in self.pairs]
        ids = [c for _, c in self.pairs]
        if len(set(obs)) != len(obs) or len(set(ids)) != len(ids):
            raise ValueError("match set is not one-to-one")


def default_gates(kpp: KppConfig, motion_radius: float = 0.0) -> tuple[float, float]:
    """3-sigma gates on center distance and diameter difference.

    Both are floored at a tiny positive value so a noiseless configuration
    still admits exact matches.
    """
    gate_pos = max(3.0 * kpp.crater_pos_sigma + motion_radius, 1e-6)
    gate_diam = max(3.0 * kpp.crater_size_sigma, 1e-6)
    return gate_pos, gate_diam


def greedy_match(cost: np.ndarray) -> np.ndarray:
    """Batched greedy one-to-one assignment.

    ``cost`` has shape (B, M, K) for M map craters and K observations per
    batch, with ``inf`` marking inadmissible pairs. Pairs are taken in
    ascending cost; ties go to the lowest map index, then the lowest
    observation index. Returns ``match`` of shape (B, K) holding the map
    index for each observation, or -1.
    """
    cost = np.array(cost, dtype=float, copy=True)
    B, M, K = cost.shape
    match = np.full((B, K), -1, dtype=np.int64)
    if M == 0 or K == 0:
        return match
    rows = np.arange(B)
    flat = cost.reshape(B, M * K)
    for _ in range(min(M, K)):
        best = np.argmin(flat, axis=1)
        ok = np.isfinite(flat[rows, best])
        if not ok.any():
            break
        b = rows[ok]
        m, k = np.divmod(best[ok], K)
        match[b, k] = m
        cost[b, m, :] = np.inf
        cost[b, :, k] = np.inf
    return match


def gated_costs(obs_xy: np.ndarray, obs_d: np.ndarray, db_xy: np.ndarray, db_d: np.ndarray,
                gate_pos: float, gate_diam: float) -> np.ndarray:
    """Center distances (B, M, K) with ``inf`` outside either gate.

    ``obs_xy`` is (B, K, 2) (one observation set per batch), ``db_xy`` is (M, 2).
    """
    diff = obs_xy[:, None, :, :] - db_xy[None, :, None, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    diam_ok = np.abs(obs_d[None, :] - db_d[:, None]) <= gate_diam  # (M, K)
    return np.where((dist <= gate_pos) & diam_ok[None], dist, np.inf)


def associate(world_obs: Sequence[Crater], db: CraterDb, gate_pos: float, gate_diam: float) -> MatchSet:
    """Match world-frame observations to ``db`` craters one-to-one.

    ``db`` is taken to be the in-range map subset; its unmatched craters are
    reported in ``unmatched_db_in_range``.
    """
    if not (gate_pos > 0 and gate_diam > 0):
        raise ValueError("gates must be positive")
    order = np.argsort(db.ids, kind="stable") if len(db) else np.zeros(0, dtype=np.int64)
    ids = db.ids[order] if len(db) else db.ids
    db_xy = db.centers[order]
    db_d = db.diameters[order]
    obs_xy = np.array([(o.x, o.y) for o in world_obs], dtype=float).reshape(1, -1, 2)
    obs_d = np.array([o.diameter for o in world_obs], dtype=float)

    match = greedy_match(gated_costs(obs_xy, obs_d, db_xy, db_d, gate_pos, gate_diam))[0]
    pairs = tuple((int(k), int(ids[m])) for k, m in enumerate(match) if m >= 0)
    matched_ids = {cid for _, cid in pairs}
    return MatchSet(
        pairs=pairs,
        unmatched_obs=tuple(int(k) for k in np.flatnonzero(match < 0)),
        unmatched_db_in_range=tuple(int(i) for i in ids if int(i) not in matched_ids),
    )
