from fractions import Fraction

import pytest
from hypothesis import settings, strategies as st

from bellpa.box import mix, ns_vertices_binary, tensor

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

VERTICES = ns_vertices_binary()


@st.composite
def vertex_mixtures(draw, pairs=1, max_components=4):
    """Exact convex mixture of products of single-pair vertices."""
    k = draw(st.integers(1, max_components))
    parts = []
    for _ in range(k):
        idx = [draw(st.integers(0, len(VERTICES) - 1)) for _ in range(pairs)]
        parts.append(tensor([VERTICES[i] for i in idx]))
    raw = [draw(st.integers(1, 30)) for _ in range(k)]
    total = sum(raw)
    return mix(parts, [Fraction(r, total) for r in raw])


@pytest.fixture(scope="session")
def vertices():
    return VERTICES


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
