import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudoherm.expr import parse
from pseudoherm.grid import Grid
from pseudoherm.model import PseudoScenario, ScenarioError, pseudo_F
from pseudoherm.transform import (
    MapError,
    Pullback,
    build_map,
    complementarity_residual,
    end_to_end_residual,
    eq34_consistency,
    map_roundtrip_residual,
    mass_identity_residual,
    master_equation_residual,
    similarity_shift,
    transform_scenario,
    transformed_weak_scenario,
    xi_grid_for,
)
from pseudoherm.verify import fit_order

MAPS = {
    "identity": ("1 + x^2", "1", (-1.0, 1.0)),
    "exponential": ("1", "exp(x)", (0.0, 3.0)),
    "rational": ("1", "1/(1 + x^2)", (0.0, 2.0)),
}


def _scenario(key):
    U, G, dom = MAPS[key]
    return PseudoScenario(U=U, G=G, domain=dom)


@pytest.fixture(scope="module", params=sorted(MAPS))
def mapped(request):
    s = _scenario(request.param)
    return s, build_map(s)


# --- the map ---------------------------------------------------------------


def test_exponential_map_matches_closed_form():
    cmap = build_map(_scenario("exponential"))
    x = np.linspace(0, 3, 50)
    np.testing.assert_allclose(cmap.xi_of_x(x), 1 - np.exp(-x), atol=1e-12)
    xi = np.linspace(0, 1 - math.exp(-3), 50)
    np.testing.assert_allclose(cmap.x_of_xi(xi), -np.log1p(-xi), atol=1e-10)
    assert cmap.xi_domain[1] == pytest.approx(1 - math.exp(-3), abs=1e-13)


def test_rational_map_matches_closed_form():
    cmap = build_map(_scenario("rational"))
    x = np.linspace(0, 2, 50)
    np.testing.assert_allclose(cmap.xi_of_x(x), x + x**3 / 3, atol=1e-12)
    assert cmap.xi_domain == pytest.approx((0.0, 2 + 8 / 3), abs=1e-12)


def test_identity_map():
    cmap = build_map(_scenario("identity"))
    x = np.linspace(-1, 1, 21)
    np.testing.assert_allclose(cmap.xi_of_x(x), x + 1, atol=1e-13)
    np.testing.assert_allclose(cmap.x_of_xi(x + 1), x, atol=1e-13)


def test_round_trip(mapped):
    s, cmap = mapped
    assert map_roundtrip_residual(cmap).norm <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0))
def test_inverse_map_is_monotone_inverse(t):
    cmap = build_map(_scenario("rational"))
    lo, hi = cmap.xi_domain
    xi = lo + t * (hi - lo)
    x = float(cmap.x_of_xi(np.array([xi]))[0])
    assert 0.0 <= x <= 2.0
    assert float(cmap.xi_of_x(np.array([x]))[0]) == pytest.approx(xi, abs=1e-10)


def test_inverse_outside_image_raises():
    cmap = build_map(_scenario("exponential"))
    with pytest.raises(MapError):
        cmap.x_of_xi(np.array([2.0]))


def test_nonpositive_generator_is_rejected():
    with pytest.raises(ScenarioError):
        build_map(PseudoScenario(U="1", G="x", domain=(-1, 1)))


def test_xi_grid_spacing():
    cmap = build_map(_scenario("rational"))
    g = xi_grid_for(cmap, 1e-3)
    assert g.h <= 1e-3
    assert (g.xmin, g.xmax) == cmap.xi_domain


# --- transformed quantities --------------------------------------------------


def test_mass_identity(mapped):
    s, cmap = mapped
    assert mass_identity_residual(s, cmap).relative <= 1e-10


def test_complementarity(mapped):
    s, cmap = mapped
    rep = complementarity_residual(s, cmap, xi_grid_for(cmap, 1e-3))
    assert rep.norm <= 1e-6


def test_printed_scaling_fails_complementarity():
    s = _scenario("exponential")
    cmap = build_map(s)
    rep = complementarity_residual(s, cmap, xi_grid_for(cmap, 1e-3))
    assert rep.details["printed_variant"] > 0.1


def test_master_equation_frames(mapped):
    s, cmap = mapped
    res = master_equation_residual(s, cmap, xi_grid_for(cmap, 1e-3))
    assert res["x_frame"].relative <= 1e-12
    assert res["xi_frame"].relative <= 1e-5


def test_master_equation_xi_frame_is_second_order():
    s = _scenario("rational")
    cmap = build_map(s)
    grids = [xi_grid_for(cmap, h) for h in (0.02, 0.01, 0.005)]
    grids = [grids[0], grids[0].refined(), grids[0].refined().refined()]
    reps = [master_equation_residual(s, cmap, g)["xi_frame"] for g in grids]
    assert 1.6 <= fit_order(grids, reps).estimated_order <= 2.4


def test_transformed_partner_function():
    s = _scenario("exponential")
    cmap = build_map(s)
    t = transform_scenario(s, cmap)
    xi = np.linspace(0.1, 0.9, 9)
    x = cmap.x_of_xi(xi)
    np.testing.assert_allclose(t.U_bar.eval(xi), np.exp(-x), rtol=1e-12)
    np.testing.assert_allclose(t.f_of_xi.eval(xi), pseudo_F(s).eval(x), atol=1e-10)
    np.testing.assert_allclose(t.F_pull.eval(xi), -0.5, atol=1e-14)


def test_pullback_derivative_uses_chain_rule():
    s = _scenario("rational")
    cmap = build_map(s)
    p = Pullback(parse("x^2"), cmap)
    xi = np.linspace(0.5, 4.0, 8)
    x = cmap.x_of_xi(xi)
    np.testing.assert_allclose(p.diff().eval(xi), 2 * x / (1 + x**2), rtol=1e-12)
    assert not p.is_zero()
    np.testing.assert_allclose((2 * p + 1).eval(xi), 2 * x**2 + 1, rtol=1e-12)


# --- similarity shift ---------------------------------------------------------


def test_similarity_shift_examples():
    sh = similarity_shift(parse("-0.5"), parse("1"), parse("exp(-2*x)"))
    assert sh.f.eval(0.3) == pytest.approx(-1.5, abs=1e-15)
    sh = similarity_shift(parse("x"), parse("1"), parse("exp(x^2)"))
    pts = np.linspace(-1, 1, 11)
    np.testing.assert_allclose(sh.f.eval(pts), 2 * pts, atol=1e-14)
    S, zero = sh.implied_scaling(parse("x"), pts)
    assert zero.sum() == 1
    np.testing.assert_allclose(S[~zero], 2.0)


def test_similarity_shift_requires_positive_scaling():
    with pytest.raises(ScenarioError):
        similarity_shift(parse("1"), parse("1"), parse("x"), domain=(-1, 1))


@pytest.mark.parametrize("key, R", [("exponential", "exp(-2*x)"), ("rational", "exp(x^2)"),
                                    ("exponential", "1 + x^2")])
def test_eq34_self_consistency(key, R):
    s = _scenario(key)
    assert eq34_consistency(s, R).relative <= 1e-12


def test_eq34_flags_zeros_of_partner_function():
    s = PseudoScenario(U="1", G="exp(-x^2)", domain=(-1, 1))
    rep = eq34_consistency(s, "exp(x)", points=np.array([-0.5, 0.0, 0.5]))
    assert rep.details["flagged_F_zero"] == 1


# --- end to end -------------------------------------------------------------


def test_transformed_weak_scenario_domain():
    s = _scenario("rational")
    cmap = build_map(s)
    ws = transformed_weak_scenario(s, cmap)
    assert ws.domain == cmap.xi_domain


@pytest.mark.parametrize("key", sorted(MAPS))
def test_end_to_end_weak_intertwining_converges(key):
    s = _scenario(key)
    cmap = build_map(s)
    base = Grid(*cmap.xi_domain, 101)
    grids = [base, base.refined(), base.refined().refined()]
    reps = [end_to_end_residual(s, cmap, g) for g in grids]
    conv = fit_order(grids, reps)
    assert max(conv.relatives) <= 1e-10 or 1.6 <= conv.estimated_order <= 2.4
    assert reps[-1].relative <= 1e-3
