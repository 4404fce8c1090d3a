import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from mvemocp.local import (LocalElement, constant_dofs, flux_dofs, local_boundary_load, local_div,
                           local_div_matrix, local_flux_matrix, local_projector)
from mvemocp.mesh import gen_nonconvex_grid, gen_square_grid, generate
from mvemocp.problems import example1
from mvemocp.quadrature import integrate_cell

from conftest import FAMILIES, random_star_polygon, star_polygons

UNIT = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
TRI = np.array([[0, 0], [1, 0], [0, 1]], float)


def const(c):
    return lambda x, y: np.stack([np.full(np.shape(x), c[0]), np.full(np.shape(x), c[1])], axis=-1)


def ident(x, y):
    return np.stack([x, y], axis=-1)


def test_dofs_constant_field_unit_square():
    assert np.allclose(flux_dofs(const((1, 0)), UNIT), [0, 1, 0, -1], atol=1e-15)


def test_dofs_identity_field_unit_square():
    assert np.allclose(flux_dofs(ident, UNIT), [0, 1, 1, 0], atol=1e-15)


def test_dofs_hypotenuse():
    d = flux_dofs(lambda x, y: np.stack([y, x], axis=-1), TRI)
    # (1-s, s) for s in [0,1]: v.n = 1/sqrt2, length sqrt2
    assert d[1] == pytest.approx(1.0, abs=1e-14)
    assert d[0] == pytest.approx(-0.5) and d[2] == pytest.approx(-0.5)


def test_local_div():
    assert local_div(np.array([0, 1, 1, 0.0]), UNIT) == pytest.approx(2.0)
    assert local_div(flux_dofs(const((0.3, -2)), UNIT), UNIT) == pytest.approx(0.0, abs=1e-15)
    d = np.array([0.2, -1.0, 0.5, 3.0])
    assert local_div(7.5 * d, UNIT) == pytest.approx(7.5 * local_div(d, UNIT))


def test_projector_examples():
    P = local_projector(UNIT)
    assert np.allclose(P @ flux_dofs(const((1, 0)), UNIT), [1, 0], atol=1e-15)
    assert np.allclose(P @ flux_dofs(ident, UNIT), [0.5, 0.5], atol=1e-15)
    P = local_projector(TRI)
    d = flux_dofs(lambda x, y: np.stack([x - 1 / 3, y - 1 / 3], axis=-1), TRI)
    assert np.allclose(P @ d, [0, 0], atol=1e-15)


def rt0(a, beta):
    """a + beta*x: v.n is constant on every straight edge, so v lies in the local space."""
    return lambda x, y: np.stack([a[0] + beta * x, a[1] + beta * y], axis=-1)


def test_projector_is_cell_mean_for_rt0_fields():
    rng = np.random.default_rng(3)
    for _ in range(30):
        xy = random_star_polygon(rng)
        v = rt0(rng.normal(size=2), rng.normal())
        area = integrate_cell(lambda x, y: np.ones_like(x), xy, 1)
        mean = [integrate_cell(lambda x, y, k=k: v(x, y)[..., k], xy, 2) / area for k in range(2)]
        assert np.allclose(local_projector(xy) @ flux_dofs(v, xy), mean, rtol=1e-11, atol=1e-12)


def test_constant_reproduction_100_polygons():
    rng = np.random.default_rng(100)
    worst = 0.0
    for _ in range(100):
        xy = random_star_polygon(rng)
        P = local_projector(xy)
        for c in [(1, 0), (0, 1), (0.3, -0.7)]:
            worst = max(worst, np.abs(P @ flux_dofs(const(c), xy) - c).max())
    assert worst <= 1e-12


@settings(max_examples=60, deadline=None)
@given(xy=star_polygons(), c=st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_constant_reproduction_property(xy, c):
    P = local_projector(xy)
    assert np.allclose(P @ constant_dofs(xy), np.eye(2), atol=1e-12)
    assert np.allclose(P @ flux_dofs(const(c), xy), c, atol=1e-12 * (1 + max(map(abs, c))))


def test_a_unit_square_constant_field():
    a = local_flux_matrix(UNIT, np.eye(2))
    d = flux_dofs(const((1, 0)), UNIT)
    assert d @ a @ d == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("stabilization", ["scaled", "raw"])
def test_stabilization_vanishes_on_constants(stabilization):
    rng = np.random.default_rng(8)
    for _ in range(20):
        xy = random_star_polygon(rng)
        area = integrate_cell(lambda x, y: np.ones_like(x), xy, 1)
        a = local_flux_matrix(xy, area * np.eye(2), stabilization)
        cons = local_projector(xy).T @ (area * np.eye(2)) @ local_projector(xy)
        D = constant_dofs(xy)
        assert np.allclose((a - cons) @ D, 0.0, atol=1e-12 * np.abs(a).max())


@settings(max_examples=40, deadline=None)
@given(xy=star_polygons(), q=st.tuples(st.floats(-3, 3), st.floats(-3, 3)),
       M=st.lists(st.floats(-2, 2), min_size=3, max_size=3),
       stabilization=st.sampled_from(["scaled", "raw"]))
def test_consistency_property(xy, q, M, stabilization):
    """a_h(q0, v_I) = int_E A^{-1} q0 . v for constant q0 and v = a + beta*x (constant A)."""
    A = np.array([[2.0, 0.3], [0.3, 1.0]])
    Ainv = np.linalg.inv(A)
    area = integrate_cell(lambda x, y: np.ones_like(x), xy, 1)
    a = local_flux_matrix(xy, area * Ainv, stabilization)

    v = rt0(M[:2], M[2])
    q = np.array(q)
    lhs = flux_dofs(const(q), xy) @ a @ flux_dofs(v, xy)
    mean_v = [integrate_cell(lambda x, y, k=k: v(x, y)[..., k], xy, 2) for k in range(2)]
    rhs = q @ Ainv @ np.array(mean_v)
    scale = np.linalg.norm(q) * (np.abs(M).sum() * (1 + np.abs(xy).max()) + 1) * area
    assert abs(lhs - rhs) <= 1e-11 * scale


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("stabilization", ["scaled", "raw"])
def test_a_local_spd_on_generated_cells(family, stabilization):
    m = generate(family, 8)
    for c in range(m.n_cells):
        xy = m.cell_xy(c)
        a = local_flux_matrix(xy, m.areas[c] * np.eye(2), stabilization)
        assert np.array_equal(a, a.T)
        assert np.linalg.eigvalsh(a).min() > 0


def test_stabilization_positive_on_projector_kernel():
    rng = np.random.default_rng(5)
    for _ in range(30):
        xy = random_star_polygon(rng)
        area = integrate_cell(lambda x, y: np.ones_like(x), xy, 1)
        P = local_projector(xy)
        S = local_flux_matrix(xy, area * np.eye(2)) - P.T @ (area * np.eye(2)) @ P
        K = sla.null_space(P)
        lam = np.linalg.eigvalsh(K.T @ S @ K)
        assert lam.min() > 0


def test_weighted_stabilization_scales():
    A = np.array([[4.0, 0], [0, 4.0]])
    a1 = local_flux_matrix(UNIT, A, weighted=False)
    a2 = local_flux_matrix(UNIT, A, weighted=True)
    P = local_projector(UNIT)
    cons = P.T @ A @ P
    assert np.allclose(a2 - cons, 4.0 * (a1 - cons))


def test_rejects_non_spd_coefficient():
    with pytest.raises(ValueError):
        local_flux_matrix(UNIT, np.array([[1.0, 0], [0, -1.0]]))
    with pytest.raises(ValueError):
        local_flux_matrix(UNIT, np.eye(2), stabilization="bogus")


def test_div_matrix_examples():
    b = local_div_matrix(UNIT)
    assert b @ flux_dofs(ident, UNIT) == pytest.approx(2.0)
    assert b @ flux_dofs(const((1, 2)), UNIT) == pytest.approx(0.0, abs=1e-15)
    m = gen_nonconvex_grid(1)
    for c in range(2):
        xy = m.cell_xy(c)
        assert local_div_matrix(xy) @ flux_dofs(ident, xy) == pytest.approx(1.0, abs=1e-14)


def test_commuting_diagram():
    rng = np.random.default_rng(6)

    def v(x, y):
        return np.stack([np.sin(x) * y**2, np.exp(x - y)], axis=-1)

    def div(x, y):
        return np.cos(x) * y**2 - np.exp(x - y)
    for _ in range(20):
        xy = random_star_polygon(rng) * 0.3
        area = integrate_cell(lambda x, y: np.ones_like(x), xy, 1)
        mean = integrate_cell(div, xy, 10) / area
        assert local_div(flux_dofs(v, xy, 8), xy) == pytest.approx(mean, rel=1e-9, abs=1e-10)


def test_boundary_load_examples():
    # data == 1: l @ d recovers the edge flux itself
    l1 = local_boundary_load(lambda x, y: np.ones_like(x), UNIT, [0, 2])
    assert np.allclose(l1, [1, 0, 1, 0])
    lx = local_boundary_load(lambda x, y: x, UNIT, [0])
    assert lx[0] == pytest.approx(0.5)
    # a half-size square: (1/h) int x ds over the bottom edge
    small = 0.5 * UNIT
    assert local_boundary_load(lambda x, y: x, small, [0])[0] == pytest.approx(0.125 / 0.5)


def test_example1_boundary_data_is_one():
    g = example1().g
    t = np.linspace(0, 1, 101)
    for x, y in [(t, 0 * t), (t, 0 * t + 1), (0 * t, t), (0 * t + 1, t)]:
        assert np.allclose(g(x, y), 1.0, atol=1e-14)
    m = gen_square_grid(4)
    xy = m.cell_xy(0)
    l = local_boundary_load(g, xy, [0, 3])
    d = np.array([0.3, -0.2, 0.7, 1.1])
    assert l @ d == pytest.approx(d[0] + d[3])


def test_local_element_global_orientation():
    m = gen_square_grid(3)
    for c in range(m.n_cells):
        el = LocalElement.build(m, c)
        assert el.m == 4
        assert np.allclose(el.a_global(), el.a_global().T)
        # global dofs of the field (1, 0) give zero divergence
        glob = el.signs * flux_dofs(const((1, 0)), m.cell_xy(c))
        assert el.b_global() @ glob == pytest.approx(0.0, abs=1e-15)
