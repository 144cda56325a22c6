import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240617)


def brute_force_extreme_points(points):
    """Points not in the hull of the others, by a tiny LP per point."""
    from scipy.optimize import linprog

    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    extreme = []
    for i, p in enumerate(pts):
        others = np.delete(pts, i, axis=0)
        if len(others) == 0:
            extreme.append(p)
            continue
        A_eq = np.vstack([others.T, np.ones(len(others))])
        b_eq = np.append(p, 1.0)
        res = linprog(np.zeros(len(others)), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        if res.status != 0:
            extreme.append(p)
    return np.array(extreme)


def sorted_rows(a):
    a = np.asarray(a)
    return a[np.lexsort(a.T[::-1])]


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
