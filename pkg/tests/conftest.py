import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from nestchase.geom import ConvexBody

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def random_body(rng, d, m=4, radius=1.0):
    """Unit-ish ball cut by ``m`` random halfspaces that keep a small ball around the witness."""
    w = rng.uniform(-0.3, 0.3, d)
    U = rng.standard_normal((m, d))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    b = U @ w + rng.uniform(0.05, 0.6, m)
    return ConvexBody(U, b, np.zeros(d), radius, w)


@st.composite
def bodies(draw, dims=(2, 3, 4), max_cuts=5):
    d = draw(st.sampled_from(dims))
    m = draw(st.integers(0, max_cuts))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return random_body(np.random.default_rng(seed), d, m)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one status line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
