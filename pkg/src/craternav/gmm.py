"""Gaussian-mixture crater matching.

Each crater becomes an isotropic Gaussian centred on the crater with a
standard deviation of half its radius. The rover position correction is the
2-D translation of the ground mixture that minimizes a matching-based
approximation of KL(ground || orbital); the inverse Hessian of that loss at
the optimum is reported as the standard-error covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .association import associate
from .core import Crater, CraterDb, KppConfig, ObservedCrater, Pose2D
from .geometry import body_to_world


class OptimizerError(RuntimeError):
    """The loss went non-finite; ``last_t`` is the last finite iterate."""

    def __init__(self, message: str, last_t: np.ndarray):
        super().__init__(message)
        self.last_t = np.array(last_t, dtype=float)


@dataclass(frozen=True)
class GaussianComponent:
    mu: tuple[float, float]
    sigma: float
    pi: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("component sigma must be positive")
        if not self.pi > 0:
            raise ValueError("component weight must be positive")


@dataclass(frozen=True)
class GaussianMixture:
    """Isotropic 2-D mixture stored as arrays: ``means`` (k, 2), ``sigmas`` (k,), ``weights`` (k,)."""

    means: np.ndarray
    sigmas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float).reshape(-1, 2)
        sigmas = np.asarray(self.sigmas, dtype=float).reshape(-1)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(means) < 1:
            raise ValueError("a mixture needs at least one component")
        if not len(means) == len(sigmas) == len(weights):
            raise ValueError("component arrays differ in length")
        if np.any(sigmas <= 0) or np.any(weights <= 0):
            raise ValueError("sigmas and weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sigmas", sigmas)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_components(cls, components: Sequence[GaussianComponent]) -> "GaussianMixture":
        return cls(
            np.array([c.mu for c in components], dtype=float),
            np.array([c.sigma for c in components], dtype=float),
            np.array([c.pi for c in components], dtype=float),
        )

    @property
    def components(self) -> list[GaussianComponent]:
        return [
            GaussianComponent((float(m[0]), float(m[1])), float(s), float(p))
            for m, s, p in zip(self.means, self.sigmas, self.weights)
        ]

    def __len__(self) -> int:
        return len(self.sigmas)

    def shifted(self, t) -> "GaussianMixture":
        return GaussianMixture(self.means + np.asarray(t, dtype=float), self.sigmas, self.weights)


@dataclass(frozen=True)
class GmmOptions:
    grad_tol: float = 1e-6
    max_iters: int = 500
    hessian_step_m: float = 1e-3
    min_step: float = 1e-10
    armijo: float = 1e-4


@dataclass
class MatchResult:
    translation: np.ndarray
    loss: float
    stderr_cov: np.ndarray
    converged: bool
    iterations: int


def build_gmm(craters: Sequence[Crater]) -> GaussianMixture:
    """One component per crater: mean at the center, sigma = diameter / 4, equal weights."""
    if not craters:
        raise ValueError("cannot build a mixture from zero craters")
    k = len(craters)
    return GaussianMixture(
        np.array([(c.x, c.y) for c in craters], dtype=float),
        np.array([c.diameter / 4.0 for c in craters], dtype=float),
        np.full(k, 1.0 / k),
    )


def gaussian_kl(a: GaussianComponent, b: GaussianComponent) -> float:
    """KL(a || b) for isotropic 2-D Gaussians, in nats."""
    if not (a.sigma > 0 and b.sigma > 0):
        raise ValueError("sigmas must be positive")
    d2 = (a.mu[0] - b.mu[0]) ** 2 + (a.mu[1] - b.mu[1]) ** 2
    ratio = a.sigma**2 / b.sigma**2
    return ratio + d2 / (2.0 * b.sigma**2) - 1.0 + 2.0 * math.log(b.sigma / a.sigma)


def _kl_matrix(f: GaussianMixture, g: GaussianMixture, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise KL(f_a + t || g_b), shape (len(f), len(g)), and the offsets mu_a + t - mu_b."""
    diff = (f.means + t)[:, None, :] - g.means[None, :, :]
    d2 = np.einsum("abi,abi->ab", diff, diff)
    sa2 = f.sigmas[:, None] ** 2
    sb2 = g.sigmas[None, :] ** 2
    kl = sa2 / sb2 + d2 / (2.0 * sb2) - 1.0 + np.log(sb2 / sa2)
    return kl, diff


def match_components(f: GaussianMixture, g: GaussianMixture, t=(0.0, 0.0)) -> np.ndarray:
    """For each component of ``f`` (shifted by ``t``), the index of its best partner in ``g``."""
    kl, _ = _kl_matrix(f, g, np.asarray(t, dtype=float))
    return np.argmin(kl - np.log(g.weights)[None, :], axis=1)


def translation_loss(f: GaussianMixture, g: GaussianMixture, t, matching: np.ndarray | None = None
                     ) -> tuple[float, np.ndarray, np.ndarray]:
    """Approximate KL(f shifted by t || g) with its gradient in ``t``.

    With ``matching=None`` each component picks its best partner at ``t``;
    otherwise the given assignment is held fixed. Returns
    ``(loss, gradient, matching)``.
    """
    t = np.asarray(t, dtype=float)
    kl, diff = _kl_matrix(f, g, t)
    if matching is None:
        matching = np.argmin(kl - np.log(g.weights)[None, :], axis=1)
    rows = np.arange(len(f))
    terms = kl[rows, matching] + np.log(f.weights) - np.log(g.weights[matching])
    loss = float(f.weights @ terms)
    grad = (f.weights / g.sigmas[matching] ** 2) @ diff[rows, matching]
    return loss, grad, matching


def gmm_kl_approx(f: GaussianMixture, g: GaussianMixture) -> float:
    return translation_loss(f, g, (0.0, 0.0))[0]


def _loss(f, g, t):
    return translation_loss(f, g, t)[0]


def numerical_hessian(f: GaussianMixture, g: GaussianMixture, t, h: float) -> np.ndarray:
    """Central-difference Hessian of the translation loss at ``t``."""
    t = np.asarray(t, dtype=float)
    e = np.eye(2) * h
    H = np.empty((2, 2))
    l0 = _loss(f, g, t)
    for i in range(2):
        H[i, i] = (_loss(f, g, t + e[i]) - 2.0 * l0 + _loss(f, g, t - e[i])) / h**2
    H[0, 1] = H[1, 0] = (
        _loss(f, g, t + e[0] + e[1]) - _loss(f, g, t + e[0] - e[1])
        - _loss(f, g, t - e[0] + e[1]) + _loss(f, g, t - e[0] - e[1])
    ) / (4.0 * h**2)
    return H


def match_translation(ground: GaussianMixture, orbital: GaussianMixture, t0=(0.0, 0.0),
                      opts: GmmOptions | None = None) -> MatchResult:
    """Gradient descent with backtracking line search over the translation.

    The component matching is redone at every trial point, so the line
    search works on the true (piecewise quadratic) loss and never accepts an
    increase. Each descent step starts from the Newton length for the
    current matching, which makes the fixed-matching subproblem a one-step
    solve.
    """
    opts = opts or GmmOptions()
    t = np.array(t0, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("initial translation must be finite")
    loss, grad, matching = translation_loss(ground, orbital, t)
    if not math.isfinite(loss):
        raise OptimizerError("non-finite loss at the initial translation", t)

    converged = False
    iterations = 0
    while iterations < opts.max_iters:
        gnorm = float(np.hypot(*grad))
        if gnorm < opts.grad_tol:
            converged = True
            break
        iterations += 1
        curvature = float(ground.weights @ (1.0 / orbital.sigmas[matching] ** 2))
        alpha = 1.0 / curvature
        while True:
            trial = t - alpha * grad
            trial_loss, trial_grad, trial_matching = translation_loss(ground, orbital, trial)
            if not math.isfinite(trial_loss):
                raise OptimizerError("non-finite loss during line search", t)
            if trial_loss <= loss - opts.armijo * alpha * gnorm**2:
                break
            alpha *= 0.5
            if alpha * gnorm < opts.min_step:
                break
        step = alpha * gnorm
        if step < opts.min_step:
            converged = True
            break
        t, loss, grad, matching = trial, trial_loss, trial_grad, trial_matching

    H = numerical_hessian(ground, orbital, t, opts.hessian_step_m)
    H = 0.5 * (H + H.T)
    try:
        cov = np.linalg.inv(H)
        cov = 0.5 * (cov + cov.T)
    except np.linalg.LinAlgError:
        cov = np.full((2, 2), np.inf)
    return MatchResult(t, loss, cov, converged, iterations)


def in_range_orbital(db: CraterDb, pose: Pose2D, kpp: KppConfig) -> list[Crater]:
    radius = kpp.sensing_range + 3.0 * kpp.crater_pos_sigma
    return list(db.within(pose.x, pose.y, radius).craters)


def _no_information(pose: Pose2D) -> tuple[Pose2D, MatchResult]:
    return pose, MatchResult(np.zeros(2), float("nan"), np.full((2, 2), np.nan), False, 0)


def localize(obs: Sequence[ObservedCrater], dr_pose: Pose2D, db: CraterDb, kpp: KppConfig,
             opts: GmmOptions | None = None, gates: tuple[float, float] | None = None
             ) -> tuple[Pose2D, MatchResult]:
    """Correct ``dr_pose`` by the translation that best aligns the observations with the map.

    Heading is left as dead reckoning has it. With no map craters in range
    the pose comes back unchanged and the result is flagged unconverged.

    ``gates`` = (position, diameter) first runs the observations through
    :func:`~craternav.association.associate` against the in-range map and
    keeps only those with a map partner, treating the rest as detections the
    map cannot explain.
    """
    if not obs:
        raise ValueError("need at least one observation")
    orbital = in_range_orbital(db, dr_pose, kpp)
    if not orbital:
        return _no_information(dr_pose)
    ground = [
        Crater(i, *body_to_world(dr_pose, (o.x_body, o.y_body)), o.diameter) for i, o in enumerate(obs)
    ]
    if gates is not None:
        matches = associate(ground, CraterDb(tuple(orbital), db.extent), *gates)
        keep = sorted(k for k, _ in matches.pairs)
        if not keep:
            return _no_information(dr_pose)
        ground = [ground[k] for k in keep]
    result = match_translation(build_gmm(ground), build_gmm(orbital), (0.0, 0.0), opts)
    tx, ty = result.translation
    return dr_pose.translated(float(tx), float(ty)), result
