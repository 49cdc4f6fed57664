from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"

# First 8 rows of Fisher's iris data: sepal length/width, petal length/width.
IRIS8 = np.array(
    [
        [5.1, 3.5, 1.4, 0.2],
        [4.9, 3.0, 1.4, 0.2],
        [4.7, 3.2, 1.3, 0.2],
        [4.6, 3.1, 1.5, 0.2],
        [5.0, 3.6, 1.4, 0.2],
        [5.4, 3.9, 1.7, 0.4],
        [4.6, 3.4, 1.4, 0.3],
        [5.0, 3.4, 1.5, 0.2],
    ]
)

# Published Haar transform of IRIS8 on its median-linkage tree:
# columns s7, d7, d6, ..., d1; rows are the four variables.
IRIS8_HAAR = np.array(
    [
        [5.146875, 0.253125, 0.13125, 0.1375, -0.025, 0.05, -0.025, 0.05],
        [3.603125, 0.296875, 0.16875, -0.1375, 0.125, 0.05, -0.075, -0.05],
        [1.562500, 0.137500, 0.02500, 0.0000, 0.000, -0.10, 0.050, 0.00],
        [0.306250, 0.093750, -0.01250, -0.0250, 0.050, 0.00, 0.000, 0.00],
    ]
)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def random_table(rng, max_rows=10, max_cols=8, min_size=2):
    """Random positive-marginal integer table."""
    while True:
        r = int(rng.integers(min_size, max_rows + 1))
        c = int(rng.integers(min_size, max_cols + 1))
        k = rng.integers(0, 20, size=(r, c)).astype(float)
        if np.all(k.sum(axis=1) > 0) and np.all(k.sum(axis=0) > 0):
            return k


ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{ACCEPTANCE_RESULTS[name]}  {name}")
