import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from h3surf.charts import GraphChart, ParametricChart, S1Chart, S2Chart, TransformedChart, cylinder
from h3surf.core import Isometry, frame_dot
from h3surf.expr import parse
from h3surf.geometry import (
    DegenerateChartError,
    christoffel,
    first_form,
    graph_mean_curvature,
    mean_curvature,
    minimal_residual_e3,
    minimal_residual_h3,
    s2_h1_diagnostic,
    second_form,
    shape_operator,
    surface_data,
    tangent_basis,
    tension_field,
    unit_normal,
)

XY_HALF = GraphChart("x*y/2")
PLANE0 = GraphChart("0")
coord = st.floats(-1.5, 1.5)


def test_tangent_basis_examples():
    ru, rv = tangent_basis(PLANE0, 0.0, 0.0)
    assert np.allclose(ru, [1, 0, 0]) and np.allclose(rv, [0, 1, 0])
    ru, rv = tangent_basis(XY_HALF, 1.0, 2.0)
    assert np.allclose(ru, [1, 0, 2]) and np.allclose(rv, [0, 1, 0])


@given(coord, coord)
def test_graph_tangent_third_component_is_P(x, y):
    ch = GraphChart("sin(x)*y + x^2")
    d = surface_data(ch, x, y)
    assert d.r_u[2] == pytest.approx(float(d.P), abs=1e-12)
    assert d.r_v[2] == pytest.approx(float(d.Q), abs=1e-12)
    assert d.W2 == pytest.approx(1 + d.P**2 + d.Q**2, abs=1e-10)


def test_first_form_examples():
    assert np.allclose(first_form(XY_HALF, 1.0, 2.0), (5, 0, 1, 5))
    assert np.allclose(first_form(PLANE0, 2.0, 0.0), (1, 0, 2, 2))


@given(st.floats(-1.5, 1.5), st.floats(-3, 3))
def test_s1_first_form_closed_form(t, s):
    E, F, G, W2 = first_form(S1Chart("sin(t) + t^2"), t, s)
    a, a1 = math.sin(t) + t * t, math.cos(t) + 2 * t
    k = a - t * a1
    assert E == pytest.approx(1 + a1 * a1 + 0.25 * k * k)
    assert F == pytest.approx(0.5 * k)
    assert G == pytest.approx(1.0)
    assert W2 == pytest.approx(1 + a1 * a1)


def test_unit_normal_examples():
    assert np.allclose(unit_normal(PLANE0, 0.0, 0.0), [0, 0, -1])
    assert np.allclose(unit_normal(XY_HALF, 1.0, 2.0), np.array([2, 0, -1]) / math.sqrt(5))


CHARTS = [
    GraphChart("sin(x) + x*y^2"),
    S1Chart("t^2"),
    S2Chart("t^3", "t"),
    ParametricChart("t + s", "t*s", "cos(t) + s^2"),
]


@pytest.mark.parametrize("ch", CHARTS, ids=lambda c: c.kind)
def test_normal_orthonormal(ch):
    u, v = np.meshgrid(np.linspace(-0.8, 0.8, 7), np.linspace(0.1, 0.9, 5))
    d = surface_data(ch, u, v)
    assert np.allclose(np.linalg.norm(d.normal, axis=-1), 1.0, atol=1e-10)
    assert np.allclose(frame_dot(d.normal, d.r_u), 0.0, atol=1e-12)
    assert np.allclose(frame_dot(d.normal, d.r_v), 0.0, atol=1e-12)


@given(coord, coord)
def test_graph_second_form_closed_form(x, y):
    ch = GraphChart("x^2*y - sin(y)")
    d = surface_data(ch, x, y)
    fxx, fxy, fyy = 2 * y, 2 * x, math.sin(y)
    P, Q, W = float(d.P), float(d.Q), math.sqrt(float(d.W2))
    assert d.L == pytest.approx((fxx + P * Q) / W, abs=1e-12)
    assert d.M == pytest.approx((fxy + 0.5 * (Q * Q - P * P)) / W, abs=1e-12)
    assert d.N == pytest.approx((fyy - P * Q) / W, abs=1e-12)


def test_second_form_examples():
    assert np.allclose(second_form(PLANE0, 0.0, 0.0), 0.0)
    L, M, N = second_form(XY_HALF, 1.0, 2.0)
    assert L == pytest.approx(0.0, abs=1e-15)
    assert M == pytest.approx(-3 / (2 * math.sqrt(5)))
    assert N == pytest.approx(0.0, abs=1e-15)


def test_mean_curvature_examples():
    assert mean_curvature(PLANE0, 0.0, 0.0) == 0.0
    x, y = np.meshgrid(np.linspace(-2, 2, 9), np.linspace(-2, 2, 9))
    assert np.abs(mean_curvature(XY_HALF, x, y)).max() <= 1e-14


def test_cylinder_mean_curvature():
    # H = 1/(2 sqrt(c)) with the unit normal; the closed form a''/(2 W^2)
    # equals -1/(2a) and is a different quantity (see ruled.s1_closed_form)
    for c in (1.0, 4.0, 9.0):
        t = np.linspace(-0.9, 0.9, 11) * math.sqrt(c)
        H = mean_curvature(cylinder(c), t, 0.7)
        assert np.allclose(H, 1 / (2 * math.sqrt(c)), atol=1e-12)
    assert mean_curvature(cylinder(4.0), 1.0, 0.0) == pytest.approx(0.25)


def test_s1_parabola_mean_curvature():
    assert mean_curvature(S1Chart("t^2"), 0.0, 3.0) == pytest.approx(-1.0)


@given(coord, coord)
def test_general_and_graph_mean_curvature_agree(x, y):
    f = parse("x^3/3 - x*y^2 + cos(x)")
    general = surface_data(GraphChart(f), x, y).H
    assert general == pytest.approx(graph_mean_curvature(f, x, y), rel=1e-9, abs=1e-14)


def test_mean_curvature_asserts_on_graphs():
    mean_curvature(GraphChart("exp(x)*sin(y)"), np.linspace(-1, 1, 5), 0.3)


def test_shape_operator_examples():
    assert np.allclose(shape_operator(PLANE0, 0.0, 0.0), 0.0)
    assert np.trace(shape_operator(XY_HALF, 1.0, 2.0)) == pytest.approx(0.0, abs=1e-14)
    A = shape_operator(cylinder(4.0), 1.0, 0.0)
    assert 0.5 * np.trace(A) == pytest.approx(mean_curvature(cylinder(4.0), 1.0, 0.0), abs=1e-12)


@pytest.mark.parametrize("ch", CHARTS, ids=lambda c: c.kind)
def test_half_trace_is_mean_curvature(ch):
    u, v = np.meshgrid(np.linspace(-0.8, 0.8, 5), np.linspace(0.1, 0.9, 5))
    A = shape_operator(ch, u, v)
    H = surface_data(ch, u, v).H
    assert np.allclose(0.5 * np.trace(A, axis1=-2, axis2=-1), H, atol=1e-10)


def test_christoffel_plane_and_symmetry():
    g = christoffel(PLANE0, np.array([0.3, -0.4]), np.array([0.1, 0.9]))
    assert np.allclose(g, np.swapaxes(g, -1, -2))
    # f = 0: E = 1 + y^2/4, F = -xy/4, G = 1 + x^2/4
    x, y = 0.3, 0.1
    E, F, G = 1 + y * y / 4, -x * y / 4, 1 + x * x / 4
    assert christoffel(PLANE0, x, y).shape == (2, 2, 2)
    W2 = E * G - F * F
    # Gamma^1_11 = (G E_x - 2 F F_x + F E_y) / (2 W2)
    E_x, E_y, F_x = 0.0, y / 2, -y / 4
    expected = (G * E_x - 2 * F * F_x + F * E_y) / (2 * W2)
    assert christoffel(PLANE0, x, y)[0, 0, 0] == pytest.approx(expected, abs=1e-8)


def test_tension_field_examples():
    assert np.allclose(tension_field(PLANE0, 0.0, 0.0), 0.0, atol=1e-8)
    x, y = np.meshgrid(np.linspace(-1, 1, 5), np.linspace(-1, 1, 5))
    assert np.linalg.norm(tension_field(XY_HALF, x, y), axis=-1).max() <= 1e-6
    tau = tension_field(cylinder(4.0), 1.0, 0.0)
    d = surface_data(cylinder(4.0), 1.0, 0.0)
    assert np.linalg.norm(tau) == pytest.approx(2 * abs(float(d.H)), abs=1e-6)
    assert abs(frame_dot(tau, d.normal)) == pytest.approx(np.linalg.norm(tau), abs=1e-6)


@pytest.mark.parametrize("ch", CHARTS, ids=lambda c: c.kind)
def test_tension_is_twice_mean_curvature_normal(ch):
    u, v = np.meshgrid(np.linspace(-0.8, 0.8, 6), np.linspace(0.1, 0.9, 6))
    d = surface_data(ch, u, v, with_tension=True)
    # FD Christoffels: error scales with how curved the chart is
    scale = 1 + np.abs(d.H).max()
    assert np.abs(d.tension - 2 * d.H[..., None] * d.normal).max() <= 1e-6 * scale


def test_minimal_residual_examples():
    f = parse("x*y/2")
    x, y = np.meshgrid(np.linspace(-2, 2, 5), np.linspace(-2, 2, 5))
    assert np.abs(minimal_residual_h3(f, x, y)).max() == 0.0
    assert minimal_residual_e3(f, 1.0, 1.0) == pytest.approx(-0.25, abs=1e-10)
    plane = parse("0.3*x - 2*y + 1")
    assert np.abs(minimal_residual_h3(plane, x, y)).max() == 0.0
    assert np.abs(minimal_residual_e3(plane, x, y)).max() == 0.0


@given(coord, coord)
def test_residual_zero_iff_H_zero(x, y):
    f = parse("x^2 - y^3/3 + x*y/2")
    r = minimal_residual_h3(f, x, y)
    H = surface_data(GraphChart(f), x, y).H
    W = math.sqrt(float(surface_data(GraphChart(f), x, y).W2))
    assert H == pytest.approx(r / (2 * W**3), abs=1e-12)


@given(
    st.floats(-math.pi, math.pi),
    st.floats(-2, 2),
    st.floats(-2, 2),
    st.floats(-2, 2),
)
def test_isometry_invariance_of_H(theta, a, b, c):
    g = Isometry(theta, a, b, c)
    for ch in (S1Chart("t^2 + sin(t)"), GraphChart("x^2 - x*y")):
        u, v = np.meshgrid(np.linspace(-0.7, 0.7, 4), np.linspace(0.1, 0.8, 4))
        H0 = surface_data(ch, u, v).H
        H1 = surface_data(TransformedChart(ch, g), u, v).H
        assert np.allclose(H1, H0, atol=1e-8)


def test_degenerate_chart_rejected():
    ch = ParametricChart("t", "t", "t")
    with pytest.raises(DegenerateChartError):
        surface_data(ch, 0.3, 0.2)


def test_s2_h1_diagnostic():
    d = s2_h1_diagnostic(parse("x*y/2"), np.array([0.5, -1.0]), np.array([1.0, 2.0]))
    assert np.allclose(d["general"], 0.0) and np.allclose(d["simplified"], 0.0)
    d = s2_h1_diagnostic(parse("x^2"), 0.5, 1.0)
    assert abs(d["difference"]) > 1e-3  # the short form is not the general numerator
