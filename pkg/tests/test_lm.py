import numpy as np
import pytest

from wandcal.exceptions import InsufficientObservationsError, InvalidArgumentError
from wandcal.geometry import wrap_angle
from wandcal.lm import LmConfig, angle_jacobian, angle_residuals, solve_angles


def _central_difference(n, state, fpn, mask, h=1e-6):
    cols = []
    for k in range(3):
        plus, minus = state.copy(), state.copy()
        plus.angles[n, k] += h
        minus.angles[n, k] -= h
        cols.append((angle_residuals(n, plus, fpn, mask) - angle_residuals(n, minus, fpn, mask)) / (2 * h))
    return np.stack(cols, axis=1)


def test_jacobian_matches_central_difference(noisy_small_scene, rng):
    truth, obs = noisy_small_scene
    fpn = obs.normalized()
    for _ in range(5):
        st = truth.state.copy()
        st.angles += rng.uniform(-0.2, 0.2, st.angles.shape)
        for n in range(st.n_cameras):
            jac = angle_jacobian(n, st, fpn, obs.mask)
            fd = _central_difference(n, st, fpn, obs.mask)
            assert np.max(np.abs(jac - fd)) <= 1e-6 * np.max(np.abs(fd))


def test_recovers_true_angles_noise_free(small_scene, rng):
    truth, obs = small_scene
    st = truth.state.copy()
    st.angles[1] += rng.uniform(-0.08, 0.08, 3)
    angles, rep = solve_angles(1, st, obs.normalized(), obs.mask)
    np.testing.assert_allclose(angles, wrap_angle(truth.state.angles[1]), atol=1e-9)
    assert rep.final_cost < 1e-20
    assert rep.final_cost <= rep.initial_cost


def test_cost_never_increases(noisy_small_scene, rng):
    truth, obs = noisy_small_scene
    st = truth.state.copy()
    st.angles += rng.uniform(-0.1, 0.1, st.angles.shape)
    for n in range(st.n_cameras):
        _, rep = solve_angles(n, st, obs.normalized(), obs.mask, LmConfig(max_iter=3))
        assert rep.final_cost <= rep.initial_cost


def test_does_not_modify_state(small_scene):
    truth, obs = small_scene
    st = truth.state.copy()
    before = st.angles.copy()
    solve_angles(0, st, obs.normalized(), obs.mask)
    assert np.array_equal(st.angles, before)


def test_too_few_markers(small_scene):
    truth, obs = small_scene
    mask = obs.mask.copy()
    mask[2:, 0] = False
    with pytest.raises(InsufficientObservationsError):
        solve_angles(0, truth.state, obs.normalized(), mask)


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        LmConfig(lambda0=0.0)
    with pytest.raises(InvalidArgumentError):
        LmConfig(lambda_up=1.0)
