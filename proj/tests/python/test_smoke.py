import numpy as np
import pytest

import dmpkit


def test_fit_rollout_reaches_goal():
    demo = dmpkit.min_jerk(np.zeros(2), np.array([0.4, -0.2]), 2.0, 0.004)
    model = dmpkit.fit(demo)
    assert model.tau == pytest.approx(2.0)
    replay = dmpkit.rollout(model, demo.duration, demo.dt)
    assert replay.rows == demo.rows
    rmse = np.sqrt(np.mean((replay.samples - demo.samples) ** 2, axis=0))
    ranges = demo.samples.max(axis=0) - demo.samples.min(axis=0)
    assert (rmse <= 0.02 * ranges).all()
    final = dmpkit.rollout(model, 3.0 * model.tau).samples[-1]
    assert np.linalg.norm(final - model.goal) < 1e-2 * 0.45 + 1e-3


def test_merge_keeps_corrective_tail():
    deficient = dmpkit.min_jerk(np.zeros(2), np.ones(2), 1.0, 0.004)
    start = deficient.samples[150].copy()
    start[0] += 0.002
    corrective = dmpkit.min_jerk(start, np.array([0.8, 1.1]), 0.5, 0.004)
    res, refit = dmpkit.merge_and_refit(deficient, corrective)
    s = res.split_index
    assert s == 150
    assert np.array_equal(res.merged.samples[s + 1 :], corrective.samples[1:])
    assert refit.goal == pytest.approx([0.8, 1.1])


def test_controller_margins():
    proposed = dmpkit.proposed_gains()
    p1, p2 = dmpkit.closed_loop_poles(proposed)
    assert p1 == -5.0 and p2 == -5.0
    assert dmpkit.delay_margin(proposed) == pytest.approx(0.130, abs=0.002)
    assert dmpkit.delay_margin(dmpkit.legacy_gains()) == pytest.approx(
        0.012, abs=0.0005
    )


def test_simulated_stop_recovery_is_reproducible():
    demo = dmpkit.min_jerk(np.zeros(1), np.array([0.5]), 4.0, 0.004)
    model = dmpkit.fit(demo)
    res = dmpkit.run_scenario(
        model, dmpkit.proposed_gains(), scenario="stop", seed=42
    )
    assert not res.diverged
    assert res.metrics.max_abs_acceleration == pytest.approx(
        2.5127932354944003, rel=1e-12
    )
    assert res.metrics.final_goal_error == pytest.approx(
        0.000952714187320236, rel=1e-12
    )
    assert res.metrics.recovery_time == pytest.approx(0.912, abs=1e-9)
    assert res.log.y_a.shape == res.log.y_c.shape


def test_detector_sweep_and_streaming():
    recs = dmpkit.synth_transients(
        n_recordings=10, n_samples=300, n_ch=3, seed=7
    )
    swept = dmpkit.sweep_window(
        recs, ratio=5.0, final_ratio=25.0, window_cap=6, steps=600, seed=1
    )
    assert swept.reached_perfect
    assert swept.final_test.f1 == 1.0
    rec = recs[1]  # odd index: unseen during training
    hits = dmpkit.detect_stream(swept.model, rec.torques)
    assert len(hits) == 1
    assert rec.peak_index - swept.n_pre <= hits[0] <= rec.peak_index + swept.n_post


def test_metrics_arithmetic():
    m = dmpkit.classification_metrics(20, 500, 0, 5)
    assert m.precision == 1.0
    assert m.recall == pytest.approx(0.8)
    assert round(m.f1, 2) == 0.89


def test_file_roundtrips(tmp_path):
    demo = dmpkit.min_jerk(np.zeros(1), np.ones(1), 1.0, 0.004)
    model = dmpkit.fit(demo)
    dmpkit.save_dmp(tmp_path / "m.json", model)
    back = dmpkit.load_dmp(tmp_path / "m.json")
    assert np.array_equal(back.weights, model.weights)
    assert back.tau == model.tau

    dmpkit.save_trajectory_csv(tmp_path / "d.csv", demo)
    again = dmpkit.load_trajectory_csv(tmp_path / "d.csv")
    assert np.array_equal(again.samples, demo.samples)
    assert again.dt == demo.dt
