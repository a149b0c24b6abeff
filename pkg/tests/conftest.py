import numpy as np
import pytest

import tabletop_lfd as T


def _streamed_demos(n, seed):
    """Generate demos one scene at a time and drop the rendered images.

    Consumes the generator exactly like a single n-sample call, but never
    holds more than one 240x240 float image in memory.
    """
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n):
        demo = T.generate_synthetic_demos(1, "mixed", rng).samples[0]
        demo.image = None
        samples.append(demo)
    return T.Dataset(scale_h=240.0, image_size=240, samples=samples)


@pytest.fixture(scope="session")
def mixed_demos():
    """100 synthetic demonstrations, half wiping and half sweeping."""
    return _streamed_demos(100, seed=3)


@pytest.fixture(scope="session")
def trained_model(mixed_demos):
    return T.em_fit(mixed_demos.samples, 5, T.EmConfig(seed=0))


@pytest.fixture(scope="session")
def demos659():
    """The full-size synthetic dataset used by the long-running checks."""
    return _streamed_demos(659, seed=17)
