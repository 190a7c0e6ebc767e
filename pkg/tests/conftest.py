import os

import numpy as np
import pytest
from hypothesis import strategies as st

from chainsnn.events import EVENT_DTYPE, EventStream, StreamMeta


@st.composite
def event_streams(draw, min_size=1, max_size=200, max_span=10_000_000):
    width = draw(st.integers(1, 40))
    height = draw(st.integers(1, 40))
    n = draw(st.integers(min_size, max_size))
    t = sorted(draw(st.lists(st.integers(0, max_span), min_size=n, max_size=n)))
    x = draw(st.lists(st.integers(0, width - 1), min_size=n, max_size=n))
    y = draw(st.lists(st.integers(0, height - 1), min_size=n, max_size=n))
    p = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    return EventStream.from_arrays(t, x, y, p, width, height, StreamMeta("u", "l", 0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance reporting ---------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_collection_modifyitems(config, items):
    if os.environ.get("CHAINSNN_EXTENDED") == "1":
        return
    skip = pytest.mark.skip(reason="extended criterion; set CHAINSNN_EXTENDED=1")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
