import math

import numpy as np
import pytest

from pseudoherm.expr import DomainError
from pseudoherm.grid import Grid
from pseudoherm.model import PseudoScenario, ScenarioError, VonRoosSpec, WeakScenario
from pseudoherm.operators import (
    AssemblyKind,
    adjoint,
    assemble,
    derivative_matrix,
    diagonal_matrix,
    interior_view,
)
from pseudoherm.verify import (
    DEFAULT_TRIM,
    default_test_vector,
    difference_residual,
    factorization_residual,
    fit_order,
)


def _gauss(U="1", G="exp(-x^2)", a="0", domain=(-6.0, 6.0)):
    return PseudoScenario(U=U, G=G, a=a, delta=0.0, domain=domain)


# --- stencils ------------------------------------------------------------


@pytest.mark.parametrize("order", [1, 2])
def test_stencils_exact_on_quadratics(order):
    g = Grid(-1.0, 2.0, 31)
    x = g.nodes
    D = derivative_matrix(g, order).real
    for coeffs in ([1.0], [0.0, 1.0], [2.0, -1.0, 3.0]):
        p = np.polynomial.Polynomial(coeffs)
        np.testing.assert_allclose(D @ p(x), p.deriv(order)(x), atol=1e-10)


def test_second_difference_exact_on_cubics_in_the_interior():
    g = Grid(0.0, 1.0, 21)
    x = g.nodes
    got = (derivative_matrix(g, 2).real @ x**3)[1:-1]
    np.testing.assert_allclose(got, 6 * x[1:-1], atol=1e-9)


def test_first_derivative_error_bound_on_exponential():
    # Interior error of the centered stencil is h^2/6 |f'''|, at most h^2 e^0.5 / 6 here.
    g = Grid(-0.5, 0.5, 101)
    x = g.nodes
    err = np.abs(derivative_matrix(g, 1).real @ np.exp(x) - np.exp(x))[1:-1]
    assert err.max() <= g.h**2 * math.exp(0.5) / 6 * 1.01


def test_derivative_order_rejected():
    with pytest.raises(ValueError):
        derivative_matrix(Grid(0, 1, 11), 3)


def test_dirichlet_second_difference_lowest_eigenvalue():
    g = Grid(0.0, 1.0, 201)
    block = interior_view(-derivative_matrix(g, 2), 1)
    lowest = np.sort(np.linalg.eigvals(block).real)[0]
    assert lowest == pytest.approx(math.pi**2, rel=1e-4)


# --- helpers -------------------------------------------------------------


def test_diagonal_matrix_and_pole_location():
    g = Grid(-1.0, 1.0, 11)
    from pseudoherm.expr import parse

    M = diagonal_matrix(parse("x^2"), g)
    np.testing.assert_allclose(np.diag(M), g.nodes**2)
    assert np.count_nonzero(M - np.diag(np.diag(M))) == 0
    with pytest.raises(DomainError) as info:
        diagonal_matrix(parse("1/x"), g)
    assert info.value.index == 5
    assert "grid node 5" in str(info.value)


def test_adjoint_examples():
    A = np.array([[1, 2j], [3, 4 - 1j]])
    np.testing.assert_array_equal(adjoint(A), np.array([[1, 3], [-2j, 4 + 1j]]))
    np.testing.assert_array_equal(adjoint(adjoint(A)), A)
    with pytest.raises(ValueError):
        adjoint(np.zeros((2, 3)))


def test_interior_view_shapes():
    M = np.arange(100).reshape(10, 10)
    assert interior_view(M, 0).shape == (10, 10)
    assert interior_view(M, 2).shape == (6, 6)
    assert interior_view(M, 2)[0, 0] == M[2, 2]
    for bad in (-1, 5):
        with pytest.raises(ValueError):
            interior_view(M, bad)


# --- assembly ------------------------------------------------------------


def test_assembly_rejects_wrong_scenario_type():
    w = WeakScenario(U="1", g="x", domain=(-1, 1))
    with pytest.raises(TypeError):
        assemble(AssemblyKind.D, w, Grid(-1, 1, 21))
    with pytest.raises(TypeError):
        assemble(AssemblyKind.ETA_MINUS, _gauss(), Grid(-1, 1, 21))
    with pytest.raises(ValueError):
        assemble("nonsense", _gauss(), Grid(-1, 1, 21))


def test_hamiltonian_product_matches_coefficient_form():
    s = _gauss(U="1 + x^2", a="sin(x)", domain=(-3, 3))
    grids = [Grid(-3, 3, n) for n in (201, 401, 801)]
    reps = [
        difference_residual(assemble("H_product", s, g), assemble("H_coeff", s, g), g)
        for g in grids
    ]
    conv = fit_order(grids, reps)
    assert 1.6 <= conv.estimated_order <= 2.4
    assert reps[-1].relative < 1e-3


def test_d_dagger_is_the_adjoint_up_to_truncation():
    s = _gauss(U="1 + x^2", domain=(-3, 3))
    g = Grid(-3, 3, 401)
    A = assemble(AssemblyKind.D_DAGGER, s, g)
    B = adjoint(assemble(AssemblyKind.D, s, g))
    rep = difference_residual(A, B, g, trim=3)
    assert rep.relative < 1e-3


def test_factorization_is_exact_for_constant_generator():
    s = _gauss(G="1.5")
    g = Grid(-6, 6, 401)
    rep = factorization_residual(s, g)
    assert rep.relative <= 1e-10
    assert rep.details["compact_relative"] > 1e-6


def test_coefficient_stencil_choice():
    s = _gauss()
    g = Grid(-6, 6, 101)
    a = assemble("EtaPlus_coeff", s, g)
    b = assemble("EtaPlus_coeff", s, g, second_derivative="composed")
    c = assemble("EtaPlus_coeff", s, g, second_derivative="compact")
    np.testing.assert_array_equal(a, b)
    assert np.max(np.abs(a - c)) > 0
    with pytest.raises(ValueError):
        assemble("H_coeff", s, g, second_derivative="spectral")


def test_weak_eta_minus_structure():
    w = WeakScenario(U="1 + x^2", g="0", domain=(-3, 3))
    g = Grid(-3, 3, 61)
    E = assemble(AssemblyKind.ETA_MINUS, w, g)
    x = g.nodes
    np.testing.assert_allclose(np.diag(E)[1:-1], x[1:-1] + 0j, atol=1e-14)
    np.testing.assert_allclose(E[10, 11], (1 + x[10] ** 2) / (2 * g.h))


# --- von Roos --------------------------------------------------------------


def test_von_roos_half_mass_is_composed_second_difference():
    vr = VonRoosSpec(m="0.5", alpha=0, beta=-1, gamma=0, domain=(0, 1))
    g = Grid(0, 1, 41)
    D1 = derivative_matrix(g, 1)
    M = assemble(AssemblyKind.VON_ROOS, vr, g)
    np.testing.assert_allclose(M, -(D1 @ D1), atol=1e-12 * np.max(np.abs(M)))


def test_von_roos_half_mass_approximates_second_difference():
    vr = VonRoosSpec(m="0.5", alpha=-0.25, beta=-0.5, gamma=-0.25, domain=(0, 1))
    grids = [Grid(0, 1, n) for n in (41, 81, 161)]
    reps = []
    for g in grids:
        w = np.sin(math.pi * g.nodes) + 0j
        M = assemble(AssemblyKind.VON_ROOS, vr, g)
        reps.append(difference_residual(M, -derivative_matrix(g, 2), g, trim=2, w=w))
    assert 1.6 <= fit_order(grids, reps).estimated_order <= 2.4


def test_von_roos_restricted_ordering_entrywise():
    vr = VonRoosSpec(m="1 + 0.5*x^2", alpha=0, beta=-1, gamma=0, V="x^2", domain=(-2, 2))
    g = Grid(-2, 2, 81)
    M = assemble(AssemblyKind.VON_ROOS, vr, g)
    P = -1j * derivative_matrix(g, 1)
    inv_m = 1.0 / (1 + 0.5 * g.nodes**2)
    ref = 0.5 * P @ np.diag(inv_m) @ P + np.diag(g.nodes**2)
    assert np.max(np.abs(M - ref)) <= 1e-14 * np.max(np.abs(ref))


def test_von_roos_is_affine_in_the_potential():
    g = Grid(-2, 2, 41)
    base = dict(m="1 + 0.5*x^2", alpha=-0.5, beta=0, gamma=-0.5, domain=(-2, 2))
    M0 = assemble("VonRoos", VonRoosSpec(**base), g)
    M1 = assemble("VonRoos", VonRoosSpec(V="x", **base), g)
    M2 = assemble("VonRoos", VonRoosSpec(V="3*x", **base), g)
    np.testing.assert_allclose(M2 - M0, 3 * (M1 - M0), atol=1e-12)
    np.testing.assert_allclose(np.diag(M1 - M0), g.nodes + 0j, atol=1e-12)


def test_von_roos_ordering_constraint():
    with pytest.raises(ScenarioError):
        VonRoosSpec(m="1", alpha=0, beta=0, gamma=0, domain=(0, 1))


def test_test_vector_default():
    g = Grid(-1, 1, 11)
    np.testing.assert_allclose(default_test_vector(g), np.exp(-g.nodes**2))
    assert DEFAULT_TRIM == 5
