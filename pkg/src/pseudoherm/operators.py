"""Dense finite-difference realizations of the operators.

Matrices are plain complex ``numpy`` arrays indexed by grid node.  The
momentum is ``p = -i D1``.  Product forms multiply matrices exactly as the
operator is written.  Coefficient forms realize ``d^2/dx^2`` either by the
compact second difference ``D2`` or by the composed ``D1 @ D1``; the
Hamiltonian defaults to the compact stencil and ``eta_plus`` to the composed
one, which coincides with ``adjoint(D) @ D`` on interior rows whenever the
coefficients are constant.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .expr import Const, DomainError, Pow
from .grid import Grid
from .model import (
    ComplexFunction,
    PseudoScenario,
    ScenarioError,
    VonRoosSpec,
    WeakScenario,
    eta_plus_coefficients,
    hamiltonian_coefficients,
    potential,
    pseudo_F,
    weak_f,
)


class AssemblyKind(str, Enum):
    H_PRODUCT = "H_product"
    H_COEFF = "H_coeff"
    ETA_PLUS_PRODUCT = "EtaPlus_product"
    ETA_PLUS_COEFF = "EtaPlus_coeff"
    D = "D"
    D_DAGGER = "D_dagger"
    ETA_MINUS = "EtaMinus"
    VON_ROOS = "VonRoos"


def derivative_matrix(grid: Grid, order: int) -> np.ndarray:
    """Second-order accurate first or second derivative.

    Interior rows are centered; the first and last rows use one-sided
    stencils of the same order.
    """
    n, h = grid.n, grid.h
    M = np.zeros((n, n), dtype=complex)
    i = np.arange(1, n - 1)
    if order == 1:
        M[i, i - 1] = -1.0
        M[i, i + 1] = 1.0
        M[0, :3] = [-3.0, 4.0, -1.0]
        M[-1, -3:] = [1.0, -4.0, 3.0]
        return M / (2.0 * h)
    if order == 2:
        M[i, i - 1] = 1.0
        M[i, i] = -2.0
        M[i, i + 1] = 1.0
        M[0, :4] = [2.0, -5.0, 4.0, -1.0]
        M[-1, -4:] = [-1.0, 4.0, -5.0, 2.0]
        return M / h**2
    raise ValueError(f"derivative order must be 1 or 2, got {order}")


def node_values(e, grid: Grid) -> np.ndarray:
    """Values of an expression or :class:`ComplexFunction` at the grid nodes."""
    x = grid.nodes
    try:
        return np.asarray(e.eval(x), dtype=complex)
    except DomainError as exc:
        if exc.index is None:
            raise
        raise DomainError(
            exc.expr, f"{exc.reason} at grid node {exc.index} (x={x[exc.index]:.17g})", exc.index
        ) from exc


def diagonal_matrix(e, grid: Grid) -> np.ndarray:
    return np.diag(node_values(e, grid))


def adjoint(M: np.ndarray) -> np.ndarray:
    """Conjugate transpose, the adjoint for the uniform-weight inner product."""
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"adjoint needs a square matrix, got shape {M.shape}")
    return np.ascontiguousarray(M.conj().T)


def interior_view(M: np.ndarray, trim: int) -> np.ndarray:
    n = M.shape[0]
    if trim < 0 or 2 * trim >= n:
        raise ValueError(f"trim {trim} too large for {n} nodes")
    if trim == 0:
        return M
    return M[trim:n - trim, trim:n - trim]


def _rows(v: np.ndarray, M: np.ndarray) -> np.ndarray:
    """``diag(v) @ M`` without forming the diagonal."""
    return v[:, None] * M


SECOND_DERIVATIVE = ("compact", "composed")


def _second_order_form(U2, first, zeroth, grid, second_derivative) -> np.ndarray:
    """``-U^2 d^2 - 2 c1 d + c0`` in coefficient form."""
    if second_derivative not in SECOND_DERIVATIVE:
        raise ValueError(f"second_derivative must be one of {SECOND_DERIVATIVE}, got {second_derivative!r}")
    D1 = derivative_matrix(grid, 1)
    D2 = derivative_matrix(grid, 2) if second_derivative == "compact" else D1 @ D1
    M = -_rows(U2, D2) - 2.0 * _rows(first, D1)
    M[np.diag_indices_from(M)] += zeroth
    return M


def _expect(kind, scenario, *types):
    if not isinstance(scenario, types):
        names = " or ".join(t.__name__ for t in types)
        raise TypeError(f"{kind.value} needs a {names}, got {type(scenario).__name__}")


def _gauged_momentum(s, grid) -> np.ndarray:
    P = -1j * derivative_matrix(grid, 1)
    P[np.diag_indices_from(P)] -= node_values((s.a / s.U).simplify(), grid)
    return P


def assemble(kind, scenario, grid: Grid, *, second_derivative: str | None = None) -> np.ndarray:
    """Matrix of the operator ``kind`` built from ``scenario`` on ``grid``.

    ``second_derivative`` selects the stencil of the coefficient forms
    (``"compact"`` or ``"composed"``); it is ignored by the other kinds.
    """
    kind = AssemblyKind(kind)
    validate = getattr(scenario, "validate", None)
    if validate is not None:
        validate(grid.nodes)

    if kind is AssemblyKind.H_PRODUCT:
        _expect(kind, scenario, PseudoScenario, WeakScenario)
        P = _gauged_momentum(scenario, grid)
        U2 = node_values(scenario.U * scenario.U, grid)
        M = P @ _rows(U2, P)
        M[np.diag_indices_from(M)] += node_values(potential(scenario), grid)
        return M

    if kind is AssemblyKind.H_COEFF:
        _expect(kind, scenario, PseudoScenario, WeakScenario)
        M1, N1 = hamiltonian_coefficients(scenario)
        V = potential(scenario)
        return _second_order_form(
            node_values(scenario.U * scenario.U, grid),
            node_values(M1, grid),
            node_values(N1, grid) + node_values(V, grid),
            grid,
            second_derivative or "compact",
        )

    if kind is AssemblyKind.ETA_PLUS_PRODUCT:
        _expect(kind, scenario, PseudoScenario)
        D = assemble(AssemblyKind.D, scenario, grid)
        return adjoint(D) @ D

    if kind is AssemblyKind.ETA_PLUS_COEFF:
        _expect(kind, scenario, PseudoScenario)
        K, L = eta_plus_coefficients(scenario)
        return _second_order_form(
            node_values(scenario.U * scenario.U, grid),
            node_values(K, grid),
            node_values(L, grid),
            grid,
            second_derivative or "composed",
        )

    if kind is AssemblyKind.D:
        _expect(kind, scenario, PseudoScenario)
        s = scenario
        phi = ComplexFunction(pseudo_F(s), (s.G - s.a).simplify())
        M = _rows(node_values(s.U, grid), derivative_matrix(grid, 1))
        M[np.diag_indices_from(M)] += node_values(phi, grid)
        return M

    if kind is AssemblyKind.D_DAGGER:
        _expect(kind, scenario, PseudoScenario)
        s = scenario
        phi_conj = ComplexFunction(pseudo_F(s), (s.a - s.G).simplify())
        M = -_rows(node_values(s.U, grid), derivative_matrix(grid, 1))
        M[np.diag_indices_from(M)] += node_values(phi_conj, grid) - node_values(s.U.diff(), grid)
        return M

    if kind is AssemblyKind.ETA_MINUS:
        _expect(kind, scenario, WeakScenario)
        s = scenario
        phi = ComplexFunction(weak_f(s), (s.g - s.a).simplify())
        M = _rows(node_values(s.U, grid), derivative_matrix(grid, 1))
        M[np.diag_indices_from(M)] += node_values(phi, grid)
        return M

    if kind is AssemblyKind.VON_ROOS:
        _expect(kind, scenario, VonRoosSpec)
        s = scenario
        total = s.alpha + s.beta + s.gamma
        if abs(total + 1.0) > 1e-12:
            raise ScenarioError(f"alpha + beta + gamma must be -1, got {total!r}")
        p = -1j * derivative_matrix(grid, 1)
        ma, mb, mg = (node_values(Pow(s.m, Const(e)), grid) for e in (s.alpha, s.beta, s.gamma))
        inner = p @ _rows(mb, p)
        M = 0.25 * (_rows(ma, inner) * mg[None, :] + _rows(mg, inner) * ma[None, :])
        M[np.diag_indices_from(M)] += node_values(s.V, grid)
        return M

    raise ValueError(f"unknown assembly kind {kind!r}")
