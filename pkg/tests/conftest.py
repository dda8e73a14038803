import numpy as np
import pytest
from skimage import data
from skimage.transform import resize


def natural(name, size=None):
    """A bundled photo as a float image in [0, 1], optionally resized."""
    img = getattr(data, name)()
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=2)
    img = img[..., :3].astype(np.float64) / 255.0
    if size is not None:
        img = resize(img, size, anti_aliasing=True)
    return np.clip(img, 0.0, 1.0)


@pytest.fixture(scope="session")
def astronaut64():
    return natural("astronaut", (64, 64))


@pytest.fixture(scope="session")
def coffee64():
    return natural("coffee", (64, 64))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_REPORT = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_REPORT] = []


@pytest.fixture
def report(request):
    """Record one pass/fail line for the terminal summary and return the verdict."""
    lines = request.config.stash[_REPORT]

    def record(name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_REPORT, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
