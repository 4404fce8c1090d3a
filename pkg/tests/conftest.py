import math
import time

import numpy as np
import pytest
from hypothesis import strategies as st

from mvemocp.mesh import generate

FAMILIES = ("square", "random", "nonconvex")
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)


@st.composite
def star_polygons(draw, min_vertices=3, max_vertices=9):
    """Counter-clockwise polygons that are star-shaped about a random center,
    hence simple; possibly nonconvex. Angular gaps stay below pi so the
    center is strictly inside."""
    m = draw(st.integers(min_vertices, max_vertices))
    gaps = np.array(draw(st.lists(st.floats(0.6, 1.0), min_size=m, max_size=m)))
    angles = np.cumsum(gaps / gaps.sum() * 2.0 * math.pi)
    radii = np.array(draw(st.lists(st.floats(0.3, 1.0), min_size=m, max_size=m)))
    center = np.array(draw(st.tuples(st.floats(-2, 2), st.floats(-2, 2))))
    scale = draw(st.floats(0.05, 3.0))
    return center + scale * np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])


def random_star_polygon(rng, m=None):
    m = m or int(rng.integers(3, 10))
    gaps = rng.uniform(0.6, 1.0, m)
    angles = np.cumsum(gaps / gaps.sum() * 2.0 * math.pi)
    radii = rng.uniform(0.3, 1.0, m)
    return rng.uniform(-2, 2, 2) + rng.uniform(0.05, 3.0) * np.column_stack(
        [radii * np.cos(angles), radii * np.sin(angles)])


def monomial_integral(xy, a, b, npoints=10):
    """int_E x^a y^b = 1/(a+1) * boundary integral of x^(a+1) y^b n_x (divergence theorem)."""
    total = 0.0
    t, w = np.polynomial.legendre.leggauss(npoints)
    t, w = 0.5 * (t + 1), 0.5 * w
    for p, q in zip(xy, np.roll(xy, -1, axis=0)):
        pts = p + np.outer(t, q - p)
        # n_x ds = (q - p)_y dt
        total += np.sum(w * pts[:, 0] ** (a + 1) * pts[:, 1] ** b) * (q[1] - p[1])
    return total / (a + 1)


@pytest.fixture(scope="session")
def meshes8():
    return {fam: generate(fam, 8) for fam in FAMILIES}


@pytest.fixture(scope="session")
def example2_reference():
    """Reference fields for the rough-source problem on a 200 x 200 square grid."""
    from mvemocp.study import StudyConfig, compute_reference, resolve_problem
    config = StudyConfig(problem="example2", ref_n=200)
    t0 = time.perf_counter()
    ref = compute_reference(resolve_problem(config), config)
    ref.elapsed = time.perf_counter() - t0
    return ref
