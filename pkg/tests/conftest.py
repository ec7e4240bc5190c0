import numpy as np
import pytest

from quatcomplete import QMatrix

# Lines recorded by the acceptance suite, echoed in the terminal summary so
# they are visible even when pytest captures stdout.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rand_q(rng, m, n, scale=1.0):
    return QMatrix.random(m, n, rng, scale=scale)


def rand_low_rank(rng, m, n, r):
    return QMatrix.random(m, r, rng) @ QMatrix.random(n, r, rng).H


def rel(a, b):
    """Relative Frobenius distance of two QMatrices."""
    den = max(b.norm(), 1e-300)
    return (a - b).norm() / den


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def natural_image():
    """A 256x256 natural color photograph in [0, 1]."""
    data = pytest.importorskip("skimage.data")
    transform = pytest.importorskip("skimage.transform")
    img = transform.resize(data.astronaut(), (256, 256), anti_aliasing=True)
    return np.clip(img, 0.0, 1.0)


@pytest.fixture(scope="session")
def small_image(natural_image):
    transform = pytest.importorskip("skimage.transform")
    return np.clip(transform.resize(natural_image, (48, 48), anti_aliasing=True), 0.0, 1.0)
