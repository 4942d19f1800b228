import functools

import numpy as np
import pytest

RESULTS: list[str] = []


def record(line: str):
    """Keep a criterion verdict for the end-of-run summary."""
    print(line)
    RESULTS.append(line)


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)


@functools.lru_cache(maxsize=None)
def suite_images() -> dict[str, np.ndarray]:
    """Five standard grayscale test images on [0, 1] (scikit-image sample data)."""
    data = pytest.importorskip("skimage.data")
    from skimage.color import rgb2gray

    imgs = {
        "camera": data.camera() / 255.0,
        "coins": data.coins() / 255.0,
        "astronaut": rgb2gray(data.astronaut()),
        "coffee": rgb2gray(data.coffee()),
        "chelsea": rgb2gray(data.chelsea()),
    }
    return {k: np.ascontiguousarray(v, dtype=np.float64) for k, v in imgs.items()}


@pytest.fixture(scope="session")
def images():
    return suite_images()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
