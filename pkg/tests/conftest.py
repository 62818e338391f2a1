import numpy as np
import pytest

from wandcal.simulate import SceneSpec, generate_scene

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_scene():
    """Three cameras, 40 frames, noise free. Returns ``(truth, obs)``."""
    return generate_scene(SceneSpec(n_cameras=3, n_frames=40, m_cal=40, seed=7))


@pytest.fixture(scope="session")
def noisy_small_scene():
    return generate_scene(SceneSpec(n_cameras=3, n_frames=40, m_cal=40, noise=0.5, seed=7))
