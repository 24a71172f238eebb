import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudoherm.grid import Grid
from pseudoherm.quadrature import (
    QuadratureError,
    adaptive_simpson,
    cumulative_integral,
    integrate_intervals,
)


def test_cubic_is_exact():
    assert adaptive_simpson(lambda t: t**3 - 2 * t, 0.0, 2.0) == pytest.approx(0.0, abs=1e-14)


def test_smooth_integrals():
    assert adaptive_simpson(np.exp, 0.0, 1.0) == pytest.approx(math.e - 1, abs=1e-10)
    gauss = adaptive_simpson(lambda t: np.exp(-t * t), -6.0, 6.0)
    assert gauss == pytest.approx(math.sqrt(math.pi), abs=1e-10)
    assert adaptive_simpson(np.sin, 0.0, math.pi, tol=1e-13) == pytest.approx(2.0, abs=1e-12)


def test_reversed_and_empty_intervals():
    assert adaptive_simpson(np.cos, 1.0, 0.0) == pytest.approx(-math.sin(1.0), abs=1e-10)
    assert adaptive_simpson(np.cos, 1.0, 1.0) == 0.0


def test_batched_intervals():
    a = np.array([0.0, 1.0, 2.0])
    b = a + 1.0
    out = integrate_intervals(lambda t: t**4, a, b, 1e-12)
    np.testing.assert_allclose(out, (b**5 - a**5) / 5, atol=1e-11)


def test_depth_limit_raises():
    with pytest.raises(QuadratureError):
        adaptive_simpson(lambda t: np.sin(1.0 / t), 1e-4, 1.0, tol=1e-14, max_depth=4)


def test_cumulative_anchor_at_midpoint():
    g = Grid(-2.0, 3.0, 51)
    x0 = 0.5
    table = cumulative_integral(lambda t: np.exp(-t * t), g.nodes, x0)
    want = np.array([math.sqrt(math.pi) / 2 * (math.erf(v) - math.erf(x0)) for v in g.nodes])
    np.testing.assert_allclose(table, want, atol=1e-10)
    assert table[np.argmin(np.abs(g.nodes - x0))] == pytest.approx(0.0, abs=1e-10)


def test_cumulative_rejects_unsorted_nodes():
    with pytest.raises(ValueError):
        cumulative_integral(np.exp, [0.0, 2.0, 1.0], 0.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 4), st.floats(-2, 2))
def test_cumulative_matches_antiderivative(lo, width, k):
    nodes = np.linspace(lo, lo + width, 17)
    table = cumulative_integral(lambda t: np.cos(k * t) + t**2, nodes, nodes[0])

    def F(t):
        return (np.sin(k * t) / k if k != 0 else t) + t**3 / 3

    np.testing.assert_allclose(table, F(nodes) - F(nodes[0]), atol=1e-9)


def test_grid_basics():
    g = Grid(0.0, 1.0, 11)
    assert g.h == pytest.approx(0.1)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    assert g.refined().n == 21 and g.refined().h == pytest.approx(0.05)
    assert g.to_dict() == {"xmin": 0.0, "xmax": 1.0, "n": 11, "h": g.h}
    with pytest.raises(ValueError):
        Grid(1.0, 0.0, 11)
    with pytest.raises(ValueError):
        Grid(0.0, 1.0, 8)
