import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

_ACCEPTANCE_OUTCOMES = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _ACCEPTANCE_OUTCOMES[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_OUTCOMES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for nodeid in sorted(_ACCEPTANCE_OUTCOMES):
        outcome = _ACCEPTANCE_OUTCOMES[nodeid]
        tag = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"[{tag}] {nodeid.split('::')[-1]}")


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def make_photo(rng, h=96, w=128):
    """Smooth structured test image: blurred noise plus gradients.

    Looks enough like a downscaled photograph for JPEG/blur behavior
    (low-frequency content, full value range, no hard synthetic edges).
    """
    base = rng.normal(size=(h, w, 3))
    base = gaussian_filter(base, sigma=(6, 6, 0))
    ramp = np.linspace(0, 1, w)[None, :, None] + np.linspace(0, 0.5, h)[:, None, None]
    img = base / (np.abs(base).max() + 1e-9) + ramp
    img -= img.min()
    img /= img.max()
    return (img * 255).astype(np.uint8)


@pytest.fixture
def photo_factory(rng):
    def factory(h=96, w=128):
        return make_photo(rng, h, w)
    return factory
