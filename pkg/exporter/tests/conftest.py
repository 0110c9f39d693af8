import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def make_image(rng, h=60, w=80):
    """Synthetic photo-like uint8 RGB: smoothed noise plus gradients."""
    base = rng.random((h, w, 3))
    for _ in range(2):
        base = 0.25 * (np.roll(base, 1, 0) + np.roll(base, -1, 0)
                       + np.roll(base, 1, 1) + np.roll(base, -1, 1))
    ramp = np.linspace(0.0, 1.0, w)[None, :, None]
    img = 0.6 * base + 0.4 * ramp
    return (img * 255.0).astype(np.uint8)


@pytest.fixture
def image_factory(rng):
    def factory(h=60, w=80):
        return make_image(rng, h, w)
    return factory
