import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ifelab.quadrature import (
    integrate_cut_edge,
    integrate_polygon,
    integrate_segment,
    polygon_area,
    reference_square_rule,
    reference_triangle_rule,
    segment_rule,
)


def monomial_integral_triangle(a, b):
    # int over reference triangle of x^a y^b = a! b! / (a+b+2)!
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@pytest.mark.parametrize("degree", range(1, 11))
def test_reference_triangle_rule_exactness(degree):
    rule = reference_triangle_rule(degree)
    assert abs(rule.weights.sum() - 0.5) <= 1e-14
    assert np.all(rule.weights > 0)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            val = np.dot(rule.weights, rule.points[:, 0] ** a * rule.points[:, 1] ** b)
            exact = monomial_integral_triangle(a, b)
            assert abs(val - exact) <= 1e-12 * max(1.0, abs(exact))


@pytest.mark.parametrize("degree", range(1, 11))
def test_reference_square_rule_exactness(degree):
    rule = reference_square_rule(degree)
    assert abs(rule.weights.sum() - 1.0) <= 1e-14
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            val = np.dot(rule.weights, rule.points[:, 0] ** a * rule.points[:, 1] ** b)
            exact = 1.0 / ((a + 1) * (b + 1))
            assert abs(val - exact) <= 1e-12


def test_segment_rule_weights_sum_to_measure():
    for n in range(1, 8):
        assert abs(segment_rule(n).weights.sum() - 1.0) <= 1e-14


def test_segment_cubic_two_points():
    val = integrate_segment(lambda p: p[:, 0] ** 3, (0, 0), (1, 0), npts=2)
    assert abs(val - 0.25) <= 1e-14


def test_segment_constant_gives_length():
    val = integrate_segment(lambda p: np.ones(len(p)), (1, 2), (4, 6), npts=1)
    assert abs(val - 5.0) <= 1e-14


def test_segment_sine():
    # Gauss-5 error for sin over [0, pi] is ~1.1e-7 (analytic oracle: exactly 2)
    val = integrate_segment(lambda p: np.sin(p[:, 0]), (0, 0), (np.pi, 0), npts=5)
    assert abs(val - 2.0) <= 1e-6
    val7 = integrate_segment(lambda p: np.sin(p[:, 0]), (0, 0), (np.pi, 0), npts=7)
    assert abs(val7 - 2.0) <= 1e-11


def test_polygon_constant_unit_square():
    square = [(0, 0), (1, 0), (1, 1), (0, 1)]
    assert abs(integrate_polygon(lambda p: np.ones(len(p)), square) - 1.0) <= 1e-14


def test_polygon_linear_on_triangle():
    tri = [(0, 0), (1, 0), (0, 1)]
    val = integrate_polygon(lambda p: p[:, 0], tri)
    assert abs(val - 1.0 / 6.0) <= 1e-14


def test_polygon_quartic_on_square():
    square = [(0, 0), (1, 0), (1, 1), (0, 1)]
    val = integrate_polygon(lambda p: p[:, 0] ** 2 * p[:, 1] ** 2, square, degree=6)
    assert abs(val - 1.0 / 9.0) <= 1e-13


def test_degenerate_polygon_warns_and_returns_zero():
    sliver = [(0, 0), (1, 0), (0.5, 1e-17)]
    with pytest.warns(RuntimeWarning):
        assert integrate_polygon(lambda p: np.ones(len(p)), sliver) == 0.0


def test_cut_edge_constant_is_length():
    val = integrate_cut_edge(
        lambda p: np.ones(len(p)), lambda p: np.ones(len(p)),
        (0, 0), (2, 0), split=None, classify=lambda m: 1)
    assert abs(val - 2.0) <= 1e-14


def test_cut_edge_split_piecewise_constant():
    val = integrate_cut_edge(
        lambda p: 2.0 * np.ones(len(p)), lambda p: np.ones(len(p)),
        (0, 0), (1, 0), split=(0.5, 0),
        classify=lambda m: 1 if m[0] > 0.5 else -1)
    assert abs(val - 1.5) <= 1e-14


def test_cut_edge_matches_composite_midpoint_oracle():
    # piecewise-linear integrand split at the edge midpoint (the straight-line
    # benchmark configuration): the 256-panel midpoint oracle is then exact
    a, b = np.array([0.25, 0.0]), np.array([0.0, 0.25])
    split = 0.5 * (a + b)
    fp = lambda p: 2.0 * (3.0 * p[..., 0] - p[..., 1] + 0.5)
    fm = lambda p: 1.0 * (-p[..., 0] + 2.0 * p[..., 1] - 0.25)
    classify = lambda m: 1 if m[0] > m[1] else -1
    val = integrate_cut_edge(fp, fm, a, b, split=split, classify=classify, npts=5)

    n = 256
    ts = (np.arange(n) + 0.5) / n
    pts = a + ts[:, None] * (b - a)
    length = np.linalg.norm(b - a)
    vals = np.where(pts[:, 0] > pts[:, 1], fp(pts), fm(pts))
    oracle = vals.sum() * length / n
    assert abs(val - oracle) <= 1e-10 * max(1.0, abs(oracle))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.05, 0.95), min_size=2, max_size=2),
       st.integers(0, 2), st.integers(0, 2))
def test_polygon_additivity_under_chord_split(ts, i, j):
    """Splitting a triangle by a chord conserves the integral of a smooth f."""
    from ifelab.geometry import cut_from_chord

    if i == j:
        j = (j + 1) % 3
    tri = np.array([(0.0, 0.0), (1.3, 0.2), (0.4, 1.1)])
    cut = cut_from_chord(tri, ("edge", i), ts[0], ("edge", j), ts[1])
    f = lambda p: np.sin(p[:, 0]) * np.cos(p[:, 1]) + p[:, 0] ** 2

    whole = integrate_polygon(f, tri, degree=8)
    parts = integrate_polygon(f, cut.poly_plus, degree=8) + \
        integrate_polygon(f, cut.poly_minus, degree=8)
    assert abs(whole - parts) <= 1e-10 * max(1.0, abs(whole))
    assert abs(polygon_area(cut.poly_plus) + polygon_area(cut.poly_minus)
               - polygon_area(tri)) <= 1e-12 * polygon_area(tri)
