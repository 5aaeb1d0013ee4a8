from dataclasses import replace

import numpy as np
import pytest

from craternav import harness
from craternav.config import bundled, load_config
from craternav.world import ScenarioConfig, TrajectoryLog


@pytest.fixture(scope="module")
def noiseless_cfg():
    return load_config(bundled("noiseless"))


@pytest.fixture(scope="module")
def small_cfg():
    return replace(load_config(bundled("sim400")), n_particles=200, n_steps=30)


def test_noiseless_world_tracks_truth(noiseless_cfg):
    log = harness.run_scenario(noiseless_cfg)
    for track in (log.dead_reckoning, log.pf, log.gmm):
        assert np.max(np.hypot(*(track[:, :2] - log.truth[:, :2]).T)) <= 1e-6


def test_run_is_deterministic(small_cfg, tmp_path):
    harness.run_scenario(small_cfg).to_csv(tmp_path / "a.csv")
    harness.run_scenario(small_cfg).to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_seeds_differ(small_cfg):
    a = harness.run_scenario(small_cfg)
    b = harness.run_scenario(small_cfg.with_seed(small_cfg.seed + 1))
    assert not np.array_equal(a.truth, b.truth)


def test_rumker_log_length():
    log = harness.run_scenario(load_config(bundled("rumker")))
    assert isinstance(log, TrajectoryLog)
    for track in (log.truth, log.dead_reckoning, log.pf, log.gmm):
        assert len(track) == 51


def _log_with(truth, dr=None):
    n = len(truth)
    cov = np.zeros((n, 2, 2))
    return TrajectoryLog(
        commands=[(1.0, 0.0)] * (n - 1), truth=truth, dead_reckoning=truth if dr is None else dr, pf=truth,
        pf_cov=cov, gmm=truth, gmm_cov=cov, observations=[[] for _ in range(n)],
        gmm_converged=np.zeros(n, dtype=bool),
    )


def test_metrics_examples():
    truth = np.column_stack([np.arange(51.0), np.zeros(51), np.zeros(51)])
    m = harness.compute_metrics(_log_with(truth, dr=truth + np.array([0.0, 3.0, 0.0])))
    assert m.baseline_2pct[-1] == pytest.approx(1.0)
    assert np.allclose(m.errors["dead_reckoning"], 3.0)
    assert np.all(m.errors["particle_filter"] == 0)
    assert np.all(np.diff(m.baseline_2pct) >= 0)
    assert m.baseline_2pct == pytest.approx(0.02 * np.arange(51.0))


def test_metrics_translation_invariant(small_cfg):
    log = harness.run_scenario(small_cfg)
    shift = np.array([1000.0, -250.0, 0.0])
    moved = TrajectoryLog(
        log.commands, log.truth + shift, log.dead_reckoning + shift, log.pf + shift, log.pf_cov,
        log.gmm + shift, log.gmm_cov, log.observations, log.gmm_converged,
    )
    a, b = harness.compute_metrics(log), harness.compute_metrics(moved)
    for m in harness.METHODS:
        assert np.allclose(a.errors[m], b.errors[m], atol=1e-9)


def test_single_run_aggregate(small_cfg):
    stats = harness.monte_carlo(small_cfg, 1)
    run = harness.compute_metrics(harness.run_scenario(small_cfg))
    for m in harness.METHODS:
        s = stats.methods[m]
        assert s.mean_final == s.median_final == run.final(m)
        assert s.std_final == 0.0
        assert s.win_rate in (0.0, 1.0)
    assert stats.n == 1


def test_monte_carlo_deterministic_and_parallel(small_cfg):
    a = harness.monte_carlo(small_cfg, 3, 10)
    b = harness.monte_carlo(small_cfg, 3, 10, jobs=2)
    for m in harness.METHODS:
        assert np.array_equal(a.methods[m].finals, b.methods[m].finals)
        assert 0.0 <= a.methods[m].win_rate <= 1.0


def test_masking_zero_equals_plain_monte_carlo(small_cfg):
    table = harness.masking_sweep(small_cfg, [0.0], 2, 5)
    plain = harness.monte_carlo(small_cfg, 2, 5)
    assert list(table) == [0.0]
    for m in harness.METHODS:
        assert np.array_equal(table[0.0].methods[m].finals, plain.methods[m].finals)


def test_full_masking_degrades_to_dead_reckoning(small_cfg):
    stats = harness.masking_sweep(small_cfg, [1.0], 10, 0)[1.0]
    dr = stats.methods["dead_reckoning"]
    assert np.array_equal(stats.methods["gmm"].finals, dr.finals)
    pf = stats.methods["particle_filter"]
    # the cloud drifts with the same odometry; its mean differs only by particle noise
    assert pf.mean_final == pytest.approx(dr.mean_final, rel=0.25)


def test_masking_rejects_bad_fraction(small_cfg):
    with pytest.raises(ValueError):
        harness.masking_sweep(small_cfg, [1.5], 1)


def test_aggregate_needs_runs():
    with pytest.raises(ValueError):
        harness.aggregate([])


def test_writers(tmp_path, small_cfg):
    stats = harness.monte_carlo(small_cfg, 2)
    harness.write_aggregate_csv(stats, tmp_path / "a.csv")
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "method,n,mean_final_m,median_final_m,std_final_m,win_rate"
    assert [l.split(",")[0] for l in lines[1:]] == list(harness.METHODS)
    harness.write_error_curves(stats, tmp_path / "c.dat")
    data = np.loadtxt(tmp_path / "c.dat")
    assert data.shape == (small_cfg.n_steps + 1, 5)
    harness.write_final_errors(stats, tmp_path / "f.dat")
    assert np.loadtxt(tmp_path / "f.dat").shape == (2, 5)


def test_default_config_is_the_400m_field():
    cfg = ScenarioConfig()
    assert cfg.extent == (400.0, 400.0) and cfg.n_craters == 100
    assert cfg.path_length == pytest.approx(400.0)
