import numpy as np
import pytest

from wandcal.exceptions import InvalidArgumentError
from wandcal.residuals import eval_P, wand_length_stats
from wandcal.simulate import SceneSpec, generate_scene, perturb_state


def test_same_seed_same_scene():
    a_truth, a_obs = generate_scene(SceneSpec(n_frames=30, noise=0.5, seed=7))
    b_truth, b_obs = generate_scene(SceneSpec(n_frames=30, noise=0.5, seed=7))
    np.testing.assert_array_equal(a_obs.fps, b_obs.fps)
    np.testing.assert_array_equal(a_truth.state.markers, b_truth.state.markers)
    _, c_obs = generate_scene(SceneSpec(n_frames=30, noise=0.5, seed=8))
    assert not np.array_equal(np.nan_to_num(a_obs.fps), np.nan_to_num(c_obs.fps))


def test_wand_has_exact_length(small_scene):
    truth, _ = small_scene
    np.testing.assert_allclose(wand_length_stats(truth.state.markers).lengths, 0.5, rtol=1e-12)


def test_low_start_markers_below_every_camera():
    truth, obs = generate_scene(SceneSpec(n_frames=60, m_cal=50, seed=3))
    assert truth.low_start_markers == 50
    heights = truth.state.centers()[:, 2]
    assert np.all(truth.state.markers[:50, 2] < heights.min())


def test_every_marker_seen_twice(small_scene):
    _, obs = small_scene
    assert np.all(obs.mask.sum(axis=1) >= 2)


def test_noise_level():
    truth, obs = generate_scene(SceneSpec(n_frames=150, noise=0.5, seed=1))
    sigma = np.sqrt(eval_P(truth.state, obs) / (2 * obs.mask.sum()))
    assert sigma == pytest.approx(0.5, rel=0.05)


def test_dropout_statistics():
    spec = SceneSpec(n_cameras=10, n_frames=150, dropout=0.3, seed=4)
    truth, obs = generate_scene(spec)
    kept = obs.mask.sum() / truth.frustum_mask.sum()
    # resampling frames with fewer than two views biases this up slightly
    assert kept == pytest.approx(0.7, abs=0.03)
    assert not np.any(obs.mask & ~truth.frustum_mask)


def test_invalid_specs():
    with pytest.raises(InvalidArgumentError, match="at least 2 cameras"):
        SceneSpec(n_cameras=1)
    with pytest.raises(InvalidArgumentError):
        SceneSpec(dropout=1.0)
    with pytest.raises(InvalidArgumentError, match="ceiling"):
        SceneSpec(height_range=(0.5, 1.0))


def test_perturbation_is_bounded(small_scene):
    truth, _ = small_scene
    p = perturb_state(truth.state, 0.1, 0.2, 0.05, seed=0)
    assert np.max(np.abs(p.angles - truth.state.angles)) <= 0.1
    assert np.max(np.abs(p.t_prime - truth.state.t_prime)) <= 0.2
    assert np.max(np.abs(p.markers - truth.state.markers)) <= 0.05
