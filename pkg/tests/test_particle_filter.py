import logging
import math

import numpy as np
import pytest

from craternav.core import Crater, CraterDb, Extent, KppConfig, ObservedCrater, Pose2D
from craternav.geometry import world_to_body
from craternav.particle_filter import (
    WEIGHT_FLOOR, ParticleSet, estimate, initialize, measurement_scores, predict, resample,
    systematic_indices, update,
)
from craternav.world import ScenarioConfig, observe, propagate

UNIT_LENS_IOU = 0.2430104
EXT = Extent(-500, -500, 500, 500)
NOISELESS = KppConfig(crater_pos_sigma=0.0, crater_size_sigma=0.0, motion_noise_frac=0.0, heading_noise_deg=0.0)


def _obs_from(pose, craters):
    out = []
    for c in craters:
        bx, by = world_to_body(pose, (c.x, c.y))
        out.append(ObservedCrater(bx, by, c.diameter))
    return out


def test_initialize_single():
    ps = initialize(Pose2D(3, 4, 0.5), 0.0, 0.0, 1, np.random.default_rng(0))
    assert ps.poses.tolist() == [[3, 4, 0.5]]
    assert ps.weights.tolist() == [1.0]


def test_initialize_spread(rng):
    ps = initialize(Pose2D(0, 0, 0), 2.0, 0.01, 1000, rng)
    assert np.std(ps.poses[:, 0]) == pytest.approx(2.0, abs=0.2)
    assert ps.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_initialize_needs_particles(rng):
    with pytest.raises(ValueError):
        initialize(Pose2D(0, 0, 0), 1.0, 0.0, 0, rng)


def test_particle_set_validation():
    with pytest.raises(ValueError):
        ParticleSet(np.zeros((2, 3)), np.array([0.5, -0.5]))
    with pytest.raises(ValueError):
        ParticleSet(np.zeros((0, 3)), np.zeros(0))


def test_predict_noiseless(rng):
    ps = initialize(Pose2D(0, 0, 0), 1.0, 0.1, 50, rng)
    moved = predict(ps, (2.0, 0.3), NOISELESS, rng)
    h = ps.poses[:, 2] + 0.3
    expected = ps.poses[:, :2] + 2.0 * np.column_stack([np.cos(h), np.sin(h)])
    assert np.allclose(moved.poses[:, :2], expected)


def test_predict_zero_distance(rng):
    ps = initialize(Pose2D(0, 0, 0), 1.0, 0.1, 50, rng)
    moved = predict(ps, (0.0, 0.0), KppConfig(), rng)
    assert np.array_equal(moved.poses[:, :2], ps.poses[:, :2])


def test_predict_along_track_spread(rng):
    ps = initialize(Pose2D(0, 0, 0), 0.0, 0.0, 1000, rng)
    moved = predict(ps, (10.0, 0.0), KppConfig(), rng)
    assert np.std(moved.poses[:, 0]) == pytest.approx(0.2, rel=0.15)


def test_score_perfect_alignment():
    craters = [Crater(1, 10, 0, 8), Crater(2, -5, 12, 10), Crater(3, 0, -15, 6)]
    db = CraterDb(tuple(craters), EXT)
    kpp = KppConfig(detection_prob_pd=1.0)
    pose = Pose2D(1, 1, 0.2)
    s = measurement_scores(np.array([[1, 1, 0.2]]), _obs_from(pose, craters), db, kpp, 9.0, 3.0)
    assert s[0] == pytest.approx(1.0)


def test_score_far_displaced_particle():
    craters = [Crater(1, 10, 0, 8), Crater(2, -5, 12, 10), Crater(3, 0, -15, 6)]
    db = CraterDb(tuple(craters), EXT)
    kpp = KppConfig(detection_prob_pd=1.0)
    obs = _obs_from(Pose2D(0, 0, 0), craters)
    poses = np.array([[0, 0, 0], [100, 0, 0]])
    ps = update(ParticleSet(poses, np.full(2, 0.5)), obs, db, kpp, 9.0, 3.0)
    assert measurement_scores(poses[1:], obs, db, kpp, 9.0, 3.0)[0] == 0.0
    assert ps.weights[1] / ps.weights[0] == pytest.approx(WEIGHT_FLOOR / (1 + WEIGHT_FLOOR))


def test_weight_ratio_one_radius_offset():
    db = CraterDb((Crater(1, 10, 0, 2.0),), EXT)
    kpp = KppConfig(detection_prob_pd=1.0)
    obs = _obs_from(Pose2D(0, 0, 0), db.craters)
    ps = ParticleSet(np.array([[0, 0, 0], [1, 0, 0]]), np.full(2, 0.5))
    w = update(ps, obs, db, kpp, 9.0, 3.0).weights
    assert w[0] / w[1] == pytest.approx((1 + WEIGHT_FLOOR) / (UNIT_LENS_IOU + WEIGHT_FLOOR), rel=1e-5)


def test_update_with_nothing_keeps_weights():
    ps = ParticleSet(np.zeros((3, 3)), np.array([0.2, 0.3, 0.5]))
    out = update(ps, [], CraterDb((), EXT), KppConfig())
    assert np.array_equal(out.weights, ps.weights)


def test_score_bounds(rng):
    cfg = ScenarioConfig()
    from craternav.world import generate_crater_field

    db = generate_crater_field(cfg, rng)
    for _ in range(20):
        truth = Pose2D(*rng.uniform(50, 350, 2), rng.uniform(-math.pi, math.pi))
        obs = observe(truth, db, cfg, rng)
        ps = initialize(truth, 10.0, 0.2, 200, rng)
        s = measurement_scores(ps.poses, obs, db, cfg.kpp, 11.0, 3.0)
        assert np.all((s >= 0) & (s <= 1))


def test_systematic_hand_trace():
    w = np.array([0.5, 0.25, 0.25, 0.0])
    # cumulative (0.5, 0.75, 1, 1); pointers (u, u+1, u+2, u+3) / 4
    for u in (0.0, 0.3, 0.999):
        counts = np.bincount(systematic_indices(w, u), minlength=4)
        assert counts.tolist() == [2, 1, 1, 0]


def test_resample_with_seeded_offset():
    ps = ParticleSet(np.arange(12.0).reshape(4, 3), np.array([0.5, 0.25, 0.25, 0.0]))
    out = resample(ps, np.random.default_rng(2024))
    counts = [int(np.sum(out.poses[:, 0] == x)) for x in (0, 3, 6, 9)]
    assert counts == [2, 1, 1, 0]
    assert np.allclose(out.weights, 0.25)


def test_resample_degenerate(rng):
    ps = ParticleSet(np.arange(15.0).reshape(5, 3), np.array([0, 0, 1.0, 0, 0]))
    out = resample(ps, rng)
    assert np.all(out.poses == ps.poses[2])


def test_resample_uniform_is_permutation(rng):
    ps = ParticleSet(np.arange(300.0).reshape(100, 3), np.full(100, 0.01))
    out = resample(ps, rng)
    assert sorted(out.poses[:, 0].tolist()) == sorted(ps.poses[:, 0].tolist())


def test_resample_zero_weights_warns(rng, caplog):
    ps = ParticleSet(np.arange(9.0).reshape(3, 3), np.zeros(3))
    with caplog.at_level(logging.WARNING):
        out = resample(ps, rng)
    assert "zero" in caplog.text
    assert len(out) == 3 and out.weights.sum() == pytest.approx(1.0)


def test_estimate_identical():
    ps = ParticleSet(np.tile([1.0, 2.0, 0.3], (5, 1)), np.full(5, 0.2))
    pose, cov = estimate(ps)
    assert (pose.x, pose.y, pose.heading) == pytest.approx((1, 2, 0.3))
    assert np.allclose(cov, 0)


def test_estimate_symmetric_pair():
    pose, cov = estimate(ParticleSet(np.array([[0, 0, 0], [2, 0, 0]]), np.full(2, 0.5)))
    assert (pose.x, pose.y) == pytest.approx((1, 0))
    assert cov[0, 0] == pytest.approx(1.0)


def test_estimate_circular_heading():
    h = math.radians(170)
    pose, _ = estimate(ParticleSet(np.array([[0, 0, h], [0, 0, -h]]), np.full(2, 0.5)))
    assert abs(pose.heading) == pytest.approx(math.pi)


def _run_filter(cfg, db, steps, rng, ps=None, truth=None):
    truth = truth or Pose2D(0, 0, 0)
    ps = ps or initialize(truth, cfg.pf_init_pos_sigma, 0.0, cfg.n_particles, rng)
    history = []
    for _ in range(steps):
        truth, odo = propagate(truth, (2.0, 0.05), cfg, rng)
        ps = predict(ps, odo, cfg.kpp, rng)
        ps = update(ps, observe(truth, db, cfg, rng), db, cfg.kpp, 11.0, 3.0)
        history.append((ps, truth))
        ps = resample(ps, rng)
    return history


def test_normalization_and_count_over_a_run(rng):
    cfg = ScenarioConfig(n_particles=300)
    craters = tuple(Crater(i + 1, *rng.uniform(-100, 100, 2), rng.uniform(5, 20)) for i in range(60))
    db = CraterDb(craters, EXT)
    for ps, _ in _run_filter(cfg, db, 50, rng):
        assert abs(ps.weights.sum() - 1.0) < 1e-9
        assert len(ps) == 300


def test_translation_equivariance(rng):
    craters = [Crater(1, 10, 0, 8), Crater(2, -5, 12, 10), Crater(3, 0, -15, 6)]
    shift = np.array([123.0, -45.0])
    db = CraterDb(tuple(craters), EXT)
    db_shifted = CraterDb(tuple(Crater(c.id, c.x + shift[0], c.y + shift[1], c.diameter) for c in craters), EXT)
    obs = observe(Pose2D(0, 0, 0.1), db, ScenarioConfig(), rng)
    poses = np.column_stack([rng.normal(0, 3, (100, 2)), rng.normal(0.1, 0.02, 100)])
    moved = poses + np.array([*shift, 0.0])
    a = update(ParticleSet(poses, np.full(100, 0.01)), obs, db, KppConfig(), 11.0, 3.0).weights
    b = update(ParticleSet(moved, np.full(100, 0.01)), obs, db_shifted, KppConfig(), 11.0, 3.0).weights
    assert np.allclose(a, b, atol=1e-6)


def test_noiseless_world_converges(rng):
    cfg = ScenarioConfig(kpp=NOISELESS, n_particles=500, pf_init_pos_sigma=2.0)
    db = CraterDb((Crater(1, 15, 5, 10), Crater(2, 5, -20, 14), Crater(3, -12, 8, 8)), EXT)
    truth = Pose2D(0, 0, 0)
    ps = initialize(truth, 2.0, 0.0, 500, rng)
    err = []
    for ps_k, truth_k in _run_filter(cfg, db, 5, rng, ps=ps, truth=truth):
        est, _ = estimate(ps_k)
        err.append(est.distance_to(truth_k))
    assert err[-1] < 2.0
