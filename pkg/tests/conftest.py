import os

import numpy as np
import pytest

from pfmsim.grid import BoundarySpec, FaceField, GridDescriptor


def pytest_addoption(parser):
    parser.addoption("--long", action="store_true", default=False,
                     help="run tests marked long (hours of CPU time)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--long") or os.environ.get("PFMSIM_LONG") == "1":
        return
    skip = pytest.mark.skip(reason="needs --long or PFMSIM_LONG=1")
    for item in items:
        if "long" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def periodic_grid(n=8, dim=2, L=2.0 * np.pi):
    return GridDescriptor((n,) * dim, L / n), BoundarySpec.periodic(dim)


def random_field(grid, rng):
    return FaceField([rng.standard_normal(grid.face_shape(c)) for c in range(grid.dim)])


# one line per acceptance criterion, printed after the run whatever the capture mode
ACCEPTANCE_LINES = []


def record(criterion: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
