import numpy as np
import pytest
from hypothesis import settings

from overhang_forge.grid import GridSpec, make_field
from overhang_forge.shapes import sdf_sphere

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def sphere_field(n=40, r=1.0, dim=3, center=None, lo=-2.0, hi=2.0):
    g = GridSpec.from_box((lo,) * dim, (hi,) * dim, (n,) * dim)
    c = (0.0,) * dim if center is None else center
    return make_field(g, sdf_sphere(c, r))


@pytest.fixture
def sphere40():
    return sphere_field(40)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}
ACCEPTANCE_COUNT = 8


@pytest.fixture
def acceptance():
    """Record one pass/fail line for an acceptance criterion and fail the test on a miss."""

    def record(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE_RESULTS[number] = (bool(ok), detail)
        assert ok, f"criterion {number} failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, ACCEPTANCE_COUNT + 1):
        if n not in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(f"criterion {n}: NOT RUN")
            continue
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
