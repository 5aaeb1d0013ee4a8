"""Crater-landmark absolute localization for planetary rovers."""

from .core import Crater, CraterDb, Extent, KppConfig, ObservedCrater, Pose2D, load_crater_db, save_crater_db
from .world import ScenarioConfig

__all__ = [
    "Crater", "CraterDb", "Extent", "KppConfig", "ObservedCrater", "Pose2D", "ScenarioConfig",
    "load_crater_db", "save_crater_db",
]
