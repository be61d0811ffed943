import numpy as np
import pytest
from hypothesis import strategies as st

from coveval.geometry import Box

coord = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)
extent = st.floats(min_value=1e-2, max_value=5e2, allow_nan=False, allow_infinity=False)


@st.composite
def boxes(draw):
    x, y = draw(coord), draw(coord)
    w, h = draw(extent), draw(extent)
    if x + w <= x or y + h <= y:
        w, h = 1.0, 1.0
    return Box(x, y, x + w, y + h)


def random_boxes(rng: np.random.Generator, count: int) -> list[Box]:
    """Boxes on a small canvas so that a good share of pairs overlap."""
    xy = rng.uniform(0, 100, size=(count, 2))
    wh = rng.uniform(0.5, 60, size=(count, 2))
    return [Box(x, y, x + w, y + h) for (x, y), (w, h) in zip(xy, wh)]


def clamped_intersection(a: Box, b: Box) -> float:
    """Independent oracle for the intersection area."""
    w = max(0.0, min(a.x2, b.x2) - max(a.x1, b.x1))
    h = max(0.0, min(a.y2, b.y2) - max(a.y1, b.y1))
    return w * h


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion, printed in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  [{detail}]" if detail else "")
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
