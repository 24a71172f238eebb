"""Scenario data and the closed-form constructions built from it.

A pseudo-Hermitian scenario is fixed by a velocity profile ``U`` (with
``U^2 = 1/(2m)``), an imaginary generating function ``G``, a real gauge
component ``a`` and the constant ``delta``.  A weak scenario replaces ``G``
by ``g`` and ``delta`` by ``epsilon``.  Everything else (partner functions,
potentials, operator coefficients) is derived symbolically.

Profiles are usually :class:`~pseudoherm.expr.Expr` trees, but any object
with ``eval``, ``diff``, ``simplify`` and arithmetic works; the coordinate
transform module relies on this.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import Apply, Const, DomainError, Expr, as_expr
from .grid import Grid
from .quadrature import DEFAULT_TOL, cumulative_integral

ZERO = Const(0.0)
VALIDATION_SAMPLES = 1001
CANCELLATION_TOL = 1e-12


class ScenarioError(ValueError):
    """A scenario violates one of its invariants."""


def _profile(value):
    if isinstance(value, (str, int, float)):
        return as_expr(value)
    if hasattr(value, "eval") and hasattr(value, "diff"):
        return value
    raise TypeError(f"not a profile: {value!r}")


def _domain(value) -> tuple[float, float]:
    lo, hi = (float(v) for v in value)
    if not hi > lo:
        raise ScenarioError(f"domain must satisfy xmin < xmax, got [{lo}, {hi}]")
    return lo, hi


def _samples(domain, n=VALIDATION_SAMPLES):
    return np.linspace(domain[0], domain[1], n)


def _values(name, prof, pts):
    try:
        return prof.eval(pts)
    except DomainError as exc:
        where = "" if exc.index is None else f" at x={pts[exc.index]:.17g}"
        raise ScenarioError(f"{name} is not defined on the domain{where}: {exc}") from exc


def _require_positive(name, prof, pts):
    v = _values(name, prof, pts)
    bad = np.flatnonzero(~(v > 0))
    if bad.size:
        raise ScenarioError(f"{name} must be positive on the domain; {name}({pts[bad[0]]:.17g}) = {v[bad[0]]:.17g}")
    return v


@dataclass(frozen=True)
class ComplexFunction:
    """``re + i*im`` with real-valued profile components."""

    re: Expr
    im: Expr = ZERO

    def eval(self, x):
        return np.asarray(self.re.eval(x)) + 1j * np.asarray(self.im.eval(x))

    __call__ = eval

    def simplify(self) -> "ComplexFunction":
        return ComplexFunction(self.re.simplify(), self.im.simplify())

    def conj(self) -> "ComplexFunction":
        return ComplexFunction(self.re, (-self.im).simplify())

    def to_text(self) -> dict:
        return {"re": self.re.to_text(), "im": self.im.to_text()}


@dataclass(frozen=True, kw_only=True)
class PseudoScenario:
    U: Expr
    G: Expr
    a: Expr = ZERO
    delta: float = 0.0
    domain: tuple[float, float]

    def __post_init__(self):
        for name in ("U", "G", "a"):
            object.__setattr__(self, name, _profile(getattr(self, name)))
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "domain", _domain(self.domain))
        self.validate(_samples(self.domain))

    def validate(self, points) -> None:
        """Check the invariants at ``points`` (grid nodes, sample points)."""
        points = np.asarray(points, dtype=float)
        _require_positive("U", self.U, points)
        g = _values("G", self.G, points)
        zero = np.flatnonzero(g == 0)
        if zero.size:
            raise ScenarioError(f"G vanishes at x={points[zero[0]]:.17g}")
        _values("a", self.a, points)


@dataclass(frozen=True, kw_only=True)
class WeakScenario:
    U: Expr
    g: Expr
    a: Expr = ZERO
    epsilon: float = 0.0
    domain: tuple[float, float]

    def __post_init__(self):
        for name in ("U", "g", "a"):
            object.__setattr__(self, name, _profile(getattr(self, name)))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "domain", _domain(self.domain))
        self.validate(_samples(self.domain))

    def validate(self, points) -> None:
        points = np.asarray(points, dtype=float)
        _require_positive("U", self.U, points)
        _values("g", self.g, points)
        _values("a", self.a, points)


@dataclass(frozen=True, kw_only=True)
class VonRoosSpec:
    """Mass profile, ordering parameters and potential of the von Roos form."""

    m: Expr
    alpha: float
    beta: float
    gamma: float
    V: ComplexFunction = field(default_factory=lambda: ComplexFunction(ZERO, ZERO))
    domain: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "m", _profile(self.m))
        V = self.V
        if not isinstance(V, ComplexFunction):
            V = ComplexFunction(_profile(V))
        object.__setattr__(self, "V", V)
        for name in ("alpha", "beta", "gamma"):
            object.__setattr__(self, name, float(getattr(self, name)))
        total = self.alpha + self.beta + self.gamma
        if abs(total + 1.0) > 1e-12:
            raise ScenarioError(
                f"ordering parameters must satisfy alpha + beta + gamma = -1, got {total!r}"
            )
        object.__setattr__(self, "domain", _domain(self.domain))
        self.validate(_samples(self.domain))

    def validate(self, points) -> None:
        points = np.asarray(points, dtype=float)
        _require_positive("m", self.m, points)
        _values("V.re", self.V.re, points)
        _values("V.im", self.V.im, points)

    @property
    def restricted(self) -> bool:
        return self.alpha == 0 and self.gamma == 0 and self.beta == -1


# --- constructions -----------------------------------------------------------


def mass_to_velocity(m, domain=None) -> Expr:
    """``U = 1/sqrt(2 m)``."""
    m = _profile(m)
    if domain is not None:
        _require_positive("m", m, _samples(_domain(domain)))
    return (Const(1.0) / Apply("sqrt", Const(2.0) * m)).simplify()


def pseudo_F(s: PseudoScenario):
    """Partner function ``F = (G/2) d/dx (U/G)``."""
    return ((s.G / 2.0) * (s.U / s.G).diff()).simplify()


def pseudo_potential(s: PseudoScenario) -> ComplexFunction:
    """``V = F^2 - G^2 - (U F)' - 2i U G' + delta``."""
    F = pseudo_F(s)
    re = F * F - s.G * s.G - (s.U * F).diff() + s.delta
    im = -2.0 * s.U * s.G.diff()
    return ComplexFunction(re, im).simplify()


def eta_plus_coefficients(s: PseudoScenario) -> tuple[ComplexFunction, ComplexFunction]:
    """First- and zeroth-order coefficients ``(K, L)`` of ``D^dagger D``.

    With ``phi = F + i(G - a)`` the product expands to
    ``-U^2 d^2 - 2K d + L`` where ``K = U U' + i U (G - a)`` and
    ``L = |phi|^2 - (U phi)'``.
    """
    F = pseudo_F(s)
    U, U1 = s.U, s.U.diff()
    Gm = s.G - s.a
    K = ComplexFunction(U * U1, U * Gm)
    L = ComplexFunction(F * F + Gm * Gm - (U * F).diff(), -(U * Gm).diff())
    return K.simplify(), L.simplify()


def hamiltonian_coefficients(s) -> tuple[ComplexFunction, ComplexFunction]:
    """``(M1, N1)`` of the expanded gauged kinetic term.

    ``M1 = U U' - i U a`` and ``N1 = i (U a)' + a^2``; the potential is not
    included.
    """
    U, a = s.U, s.a
    M1 = ComplexFunction(U * U.diff(), -(U * a))
    N1 = ComplexFunction(a * a, (U * a).diff())
    return M1.simplify(), N1.simplify()


def weak_f(s: WeakScenario):
    """``f = U'/2``."""
    return (0.5 * s.U.diff()).simplify()


def eq25_cancellation(s: WeakScenario):
    """Coefficient of the i-bearing terms ``i U f' - (i/2) U U''``, simplified."""
    f = weak_f(s)
    U2 = s.U.diff().diff()
    return (s.U * f.diff() - 0.5 * (s.U * U2)).simplify()


def _assert_cancels(expr, domain) -> None:
    if expr.is_zero():
        return
    pts = _samples(domain, 101)
    residual = np.max(np.abs(expr.eval(pts)))
    if not residual <= CANCELLATION_TOL:
        raise AssertionError(
            f"i U f' - (i/2) U U'' does not cancel (max {residual:.3e}): {expr.to_text()}"
        )


def weak_potential(s: WeakScenario) -> ComplexFunction:
    """``V = -g^2 - i U g' - U U''/2 - U'^2/4 + epsilon``.

    The imaginary-part terms containing ``f`` are checked to cancel before the
    potential is returned.
    """
    _assert_cancels(eq25_cancellation(s), s.domain)
    U1 = s.U.diff()
    re = -(s.g * s.g) - 0.5 * (s.U * U1.diff()) - 0.25 * (U1 * U1) + s.epsilon
    im = -(s.U * s.g.diff())
    return ComplexFunction(re, im).simplify()


def potential(s) -> ComplexFunction:
    if isinstance(s, PseudoScenario):
        return pseudo_potential(s)
    if isinstance(s, WeakScenario):
        return weak_potential(s)
    if isinstance(s, VonRoosSpec):
        return s.V
    raise TypeError(f"no potential for {type(s).__name__}")


# --- ground state ------------------------------------------------------------


@dataclass(frozen=True)
class GroundState:
    """Zero mode ``Psi = N0 exp(-P - iQ)`` tabulated on grid nodes."""

    N0: float
    x0: float
    x: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    values: np.ndarray


def ground_state(s: PseudoScenario, grid: Grid, N0: float = 1.0,
                 normalize: bool = False, tol: float = DEFAULT_TOL) -> GroundState:
    """Solve ``D Psi = 0`` by quadrature.

    ``P = int_{x0}^x F/U`` and ``Q = int_{x0}^x (G - a)/U`` are tabulated from
    the grid midpoint ``x0``.  With ``normalize`` the trapezoid norm of
    ``|Psi|^2`` over the grid is scaled to one.
    """
    x = grid.nodes
    s.validate(x)
    F = pseudo_F(s)
    amp = (F / s.U).simplify()
    phase = ((s.G - s.a) / s.U).simplify()
    x0 = 0.5 * (grid.xmin + grid.xmax)
    P = cumulative_integral(amp.eval, x, x0, tol)
    Q = cumulative_integral(phase.eval, x, x0, tol)
    shape = np.exp(-P - 1j * Q)
    if normalize:
        norm2 = np.trapezoid(np.abs(N0 * shape) ** 2, x)
        N0 = N0 / np.sqrt(norm2)
    return GroundState(float(N0), x0, x, P, Q, N0 * shape)
