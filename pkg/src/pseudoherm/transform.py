"""Coordinate maps ``xi(x)`` with ``dx/dxi = G`` and the transformed data.

Functions of ``xi`` are represented as :class:`Pullback` objects, an
expression in ``x`` composed with the numerical inverse ``x(xi)``.  Their
``xi``-derivatives are exact through the chain rule ``d/dxi = G d/dx``, so
only the inversion of the map is numerical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expr import Const, as_expr
from .grid import Grid
from .model import (
    PseudoScenario,
    ScenarioError,
    WeakScenario,
    pseudo_F,
)
from .quadrature import cumulative_integral
from .verify import ResidualReport, _report, default_sample_points

TABLE_NODES = 2049
ROOT_TOL = 1e-12
TABLE_TOL = 1e-12
DEFAULT_H_XI = 1e-3


class MapError(ScenarioError):
    pass


def _hermite(t, y0, y1, m0, m1, dx):
    t2, t3 = t * t, t * t * t
    return ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * dx * m0
            + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * dx * m1)


def _hermite_slope(t, y0, y1, m0, m1, dx):
    t2 = t * t
    return ((6 * t2 - 6 * t) * y0 / dx + (3 * t2 - 4 * t + 1) * m0
            + (-6 * t2 + 6 * t) * y1 / dx + (3 * t2 - 2 * t) * m1)


@dataclass(eq=False)
class CoordinateMap:
    """Monotone map ``xi(x) = int_{xmin}^x S`` with ``S = dxi/dx = 1/G``.

    ``xi_of_x`` is a cubic Hermite interpolant of the quadrature table using
    the exact slopes ``S``; ``x_of_xi`` inverts that same interpolant.
    """

    S: object
    dx_dxi: object
    x_table: np.ndarray
    xi_table: np.ndarray
    slope_table: np.ndarray

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.x_table[0]), float(self.x_table[-1])

    @property
    def xi_domain(self) -> tuple[float, float]:
        return float(self.xi_table[0]), float(self.xi_table[-1])

    def xi_of_x(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        slack = 1e-12 * max(1.0, hi - lo)
        if np.any((x < lo - slack) | (x > hi + slack)):
            raise MapError(f"x outside map domain [{lo}, {hi}]")
        xs = np.clip(x, lo, hi)
        k = np.clip(np.searchsorted(self.x_table, xs, side="right") - 1, 0, self.x_table.size - 2)
        dx = self.x_table[k + 1] - self.x_table[k]
        t = (xs - self.x_table[k]) / dx
        out = _hermite(t, self.xi_table[k], self.xi_table[k + 1],
                       self.slope_table[k], self.slope_table[k + 1], dx)
        return float(out) if out.ndim == 0 else out

    def x_of_xi(self, xi):
        """Inverse by safeguarded Newton within the bracketing table cell."""
        xi = np.asarray(xi, dtype=float)
        lo, hi = self.xi_domain
        slack = 1e-12 * max(1.0, hi - lo)
        if np.any((xi < lo - slack) | (xi > hi + slack)):
            raise MapError(f"xi outside image interval [{lo}, {hi}]")
        target = np.clip(xi, lo, hi)
        flat = np.atleast_1d(target).ravel()
        k = np.clip(np.searchsorted(self.xi_table, flat, side="right") - 1, 0, self.xi_table.size - 2)
        x0, dx = self.x_table[k], self.x_table[k + 1] - self.x_table[k]
        y0, y1 = self.xi_table[k], self.xi_table[k + 1]
        m0, m1 = self.slope_table[k], self.slope_table[k + 1]
        a, b = np.zeros_like(flat), np.ones_like(flat)
        t = np.clip((flat - y0) / (y1 - y0), 0.0, 1.0)
        for _ in range(100):
            f = _hermite(t, y0, y1, m0, m1, dx) - flat
            a = np.where(f < 0, t, a)
            b = np.where(f > 0, t, b)
            slope = _hermite_slope(t, y0, y1, m0, m1, dx) * dx
            with np.errstate(divide="ignore", invalid="ignore"):
                step = f / slope
            t_new = t - step
            bad = ~np.isfinite(t_new) | (t_new <= a) | (t_new >= b)
            t_new = np.where(bad, 0.5 * (a + b), t_new)
            moved = np.abs(t_new - t) * dx
            t = np.where(f == 0, t, t_new)
            if np.all((moved <= ROOT_TOL) | (f == 0)):
                break
        else:
            raise MapError("inverse map did not converge")
        out = (x0 + t * dx).reshape(np.shape(target))
        return float(out) if out.ndim == 0 else out


def build_map(s: PseudoScenario, table_nodes: int = TABLE_NODES) -> CoordinateMap:
    """Map with ``dx/dxi = G``, anchored at ``xi(xmin) = 0``.

    ``G`` must be positive on the domain; sign changes would make the map
    non-invertible and negative ``G`` a reversed orientation, neither of
    which is supported.
    """
    lo, hi = s.domain
    x = np.linspace(lo, hi, table_nodes)
    g = s.G.eval(x)
    if np.any(g <= 0):
        k = int(np.flatnonzero(g <= 0)[0])
        raise MapError(f"G must be positive on the domain; G({x[k]:.17g}) = {g[k]:.17g}")
    S = (Const(1.0) / s.G).simplify()
    xi = cumulative_integral(S.eval, x, lo, TABLE_TOL)
    return CoordinateMap(S=S, dx_dxi=s.G, x_table=x, xi_table=xi, slope_table=S.eval(x))


@dataclass(frozen=True)
class Pullback:
    """``h(x(xi))`` for an expression ``h`` in ``x``."""

    inner: object
    map: CoordinateMap

    def _wrap(self, other):
        if isinstance(other, Pullback):
            if other.map is not self.map:
                raise ValueError("cannot combine functions pulled back along different maps")
            return other.inner
        if isinstance(other, (int, float, np.integer, np.floating)):
            return Const(float(other))
        return None

    def eval(self, xi):
        return self.inner.eval(self.map.x_of_xi(xi))

    __call__ = eval

    def diff(self) -> "Pullback":
        return Pullback((self.map.dx_dxi * self.inner.diff()).simplify(), self.map)

    def simplify(self) -> "Pullback":
        return Pullback(self.inner.simplify(), self.map)

    def is_zero(self) -> bool:
        return self.inner.is_zero()

    def to_text(self) -> str:
        return f"[{self.inner.to_text()}] at x = x(xi)"

    __str__ = to_text

    def _binary(self, other, op, reverse=False):
        o = self._wrap(other)
        if o is None:
            return NotImplemented
        left, right = (o, self.inner) if reverse else (self.inner, o)
        return Pullback(op(left, right), self.map)

    def __add__(self, o):
        return self._binary(o, lambda a, b: a + b)

    def __radd__(self, o):
        return self._binary(o, lambda a, b: a + b, True)

    def __sub__(self, o):
        return self._binary(o, lambda a, b: a - b)

    def __rsub__(self, o):
        return self._binary(o, lambda a, b: a - b, True)

    def __mul__(self, o):
        return self._binary(o, lambda a, b: a * b)

    def __rmul__(self, o):
        return self._binary(o, lambda a, b: a * b, True)

    def __truediv__(self, o):
        return self._binary(o, lambda a, b: a / b)

    def __rtruediv__(self, o):
        return self._binary(o, lambda a, b: a / b, True)

    def __neg__(self):
        return Pullback(-self.inner, self.map)


@dataclass(frozen=True)
class TransformedScenario:
    """Data carried to the ``xi`` frame.

    ``F_bar`` follows the printed scaling ``F * S``; ``F_pull`` is the plain
    pullback ``F(x(xi))``, the scaling consistent with ``R = 1``.
    """

    map: CoordinateMap
    U_bar: Pullback
    F_bar: Pullback
    F_pull: Pullback
    Z: object
    Z_bar: Pullback
    f_of_xi: Pullback


def transform_scenario(s: PseudoScenario, cmap: CoordinateMap) -> TransformedScenario:
    F = pseudo_F(s)
    Z = (s.U / s.G).simplify()
    U_bar = Pullback((s.U * cmap.S).simplify(), cmap)
    return TransformedScenario(
        map=cmap,
        U_bar=U_bar,
        F_bar=Pullback((F * cmap.S).simplify(), cmap),
        F_pull=Pullback(F, cmap),
        Z=Z,
        Z_bar=Pullback(Z, cmap),
        f_of_xi=(0.5 * U_bar.diff()).simplify(),
    )


@dataclass(frozen=True)
class GaugeScaling:
    R: object
    S: object


def xi_grid_for(cmap: CoordinateMap, h_xi: float = DEFAULT_H_XI) -> Grid:
    """Uniform grid over the image interval with spacing at most ``h_xi``."""
    lo, hi = cmap.xi_domain
    n = max(9, int(math.ceil((hi - lo) / h_xi)) + 1)
    return Grid(lo, hi, n)


def _xi_nodes(cmap, xi_grid):
    if xi_grid is None:
        xi_grid = xi_grid_for(cmap)
    if isinstance(xi_grid, Grid):
        return xi_grid, xi_grid.nodes
    nodes = np.asarray(xi_grid, dtype=float)
    return None, nodes


def transform_mass(s: PseudoScenario, cmap: CoordinateMap, xi_grid=None) -> np.ndarray:
    """``U_bar(xi) = U(x(xi)) S(x(xi))`` at the nodes of ``xi_grid``."""
    _, xi = _xi_nodes(cmap, xi_grid)
    x = cmap.x_of_xi(xi)
    return s.U.eval(x) * cmap.S.eval(x)


def _centered(values, h):
    return (values[2:] - values[:-2]) / (2.0 * h)


def complementarity_residual(s: PseudoScenario, cmap: CoordinateMap, xi_grid=None) -> ResidualReport:
    """``max |U_bar'(xi)/2 - F(x(xi))|`` with a centered ``xi``-difference.

    ``details['printed_variant']`` holds the same residual against
    ``F(x(xi)) S(x(xi))`` for comparison.
    """
    grid, xi = _xi_nodes(cmap, xi_grid)
    if grid is None:
        raise ValueError("complementarity_residual needs a uniform Grid in xi")
    U_bar = transform_mass(s, cmap, grid)
    half_slope = 0.5 * _centered(U_bar, grid.h)
    x_in = cmap.x_of_xi(xi[1:-1])
    F = pseudo_F(s).eval(x_in)
    printed = F * cmap.S.eval(x_in)
    rep = _report("complementarity", grid, 0, half_slope - F, np.maximum(np.abs(F), np.abs(half_slope)))
    rep.details["printed_variant"] = float(np.max(np.abs(half_slope - printed)))
    return rep


def master_equation_residual(s: PseudoScenario, cmap: CoordinateMap, xi_grid=None,
                             points=None) -> dict[str, ResidualReport]:
    """Invariance of ``U dZ/dx = 2 F Z`` under the map.

    ``x_frame`` uses exact derivatives.  ``xi_frame`` checks
    ``U_bar dZ_bar/dxi = 2 F_bar Z_bar`` with ``Z_bar = Z(x(xi))`` (R = 1) and
    ``F_bar = F(x(xi))``, the only scaling compatible with R = 1.
    ``xi_frame_printed`` repeats the check with ``F_bar = (F S)(x(xi))``.
    """
    F = pseudo_F(s)
    Z = (s.U / s.G).simplify()
    pts = default_sample_points(s.domain) if points is None else np.asarray(points, float)
    lhs = (s.U * Z.diff()).eval(pts)
    rhs = (2.0 * F * Z).eval(pts)
    out = {"x_frame": _report("master_x_frame", None, 0, lhs - rhs, np.maximum(np.abs(lhs), np.abs(rhs)))}

    grid, xi = _xi_nodes(cmap, xi_grid)
    if grid is None:
        raise ValueError("master_equation_residual needs a uniform Grid in xi")
    x = cmap.x_of_xi(xi)
    Zb = Z.eval(x)
    Ub = transform_mass(s, cmap, grid)
    lhs_xi = Ub[1:-1] * _centered(Zb, grid.h)
    xin = x[1:-1]
    for key, Fb in (("xi_frame", F.eval(xin)), ("xi_frame_printed", (F * cmap.S).eval(xin))):
        rhs_xi = 2.0 * Fb * Zb[1:-1]
        out[key] = _report(f"master_{key}", grid, 0, lhs_xi - rhs_xi,
                           np.maximum(np.abs(lhs_xi), np.abs(rhs_xi)))
    return out


@dataclass(frozen=True)
class SimilarityShift:
    f: object
    S: object

    def implied_scaling(self, F, points, floor: float = 1e-12):
        """Values of ``S = f/F`` and a mask of points where ``F`` vanishes."""
        Fv = F.eval(points)
        zero = np.abs(Fv) <= floor
        vals = np.full(np.shape(Fv), np.nan)
        vals[~zero] = self.f.eval(points[~zero]) / Fv[~zero]
        return vals, zero


def similarity_shift(F, U, R, domain=None) -> SimilarityShift:
    """``f = F + U (ln sqrt R)' = F + (U/2) R'/R`` and the implied ``S = f/F``."""
    F, U, R = as_expr(F), as_expr(U), as_expr(R)
    if domain is not None:
        r = R.eval(np.linspace(domain[0], domain[1], 1001))
        if np.any(r <= 0):
            raise ScenarioError("R must be positive on the domain")
    f = (F + 0.5 * U * R.diff() / R).simplify()
    return SimilarityShift(f=f, S=(f / F).simplify())


def eq34_consistency(s: PseudoScenario, R, points=None) -> ResidualReport:
    """Feed ``f`` and ``S = f/F`` back into the shifted master equation.

    Checks ``U Z' = 2 (S F - U (ln sqrt R)') Z`` pointwise at points where
    ``F`` does not vanish.
    """
    R = as_expr(R)
    F = pseudo_F(s)
    Z = (s.U / s.G).simplify()
    shift = similarity_shift(F, s.U, R, s.domain)
    pts = default_sample_points(s.domain) if points is None else np.asarray(points, float)
    S_vals, zero = shift.implied_scaling(F, pts)
    keep = ~zero
    p = pts[keep]
    lhs = (s.U * Z.diff()).eval(p)
    log_slope = (0.5 * R.diff() / R).eval(p)
    rhs = 2.0 * (S_vals[keep] * F.eval(p) - s.U.eval(p) * log_slope) * Z.eval(p)
    rep = _report("eq34", None, 0, lhs - rhs, np.maximum(np.abs(lhs), np.abs(rhs)))
    rep.details["flagged_F_zero"] = int(zero.sum())
    return rep


def map_roundtrip_residual(cmap: CoordinateMap, samples: int = 1001) -> ResidualReport:
    x = np.linspace(*cmap.domain, samples)
    back = cmap.x_of_xi(cmap.xi_of_x(x))
    return _report("map_roundtrip", None, 0, back - x, x)


def mass_identity_residual(s: PseudoScenario, cmap: CoordinateMap, xi_grid=None) -> ResidualReport:
    """``U_bar = Z(x(xi))`` when ``S = 1/G``."""
    _, xi = _xi_nodes(cmap, xi_grid)
    Ub = transform_mass(s, cmap, xi)
    Zx = (s.U / s.G).simplify().eval(cmap.x_of_xi(xi))
    return _report("mass_identity", None, 0, Ub - Zx, Zx)


def transformed_weak_scenario(s: PseudoScenario, cmap: CoordinateMap, g=None,
                              epsilon: float = 0.0) -> WeakScenario:
    """Weak scenario in the ``xi`` frame with ``U = U_bar``.

    The imaginary generating function defaults to ``(G - a)(x(xi))``; this
    is a convention, any real profile is admissible.
    """
    t = transform_scenario(s, cmap)
    if g is None:
        g = Pullback((s.G - s.a).simplify(), cmap)
    elif not isinstance(g, Pullback):
        g = Pullback(as_expr(g), cmap)
    return WeakScenario(U=t.U_bar, g=g, a=Pullback(Const(0.0), cmap),
                        epsilon=epsilon, domain=cmap.xi_domain)


def bump(grid: Grid) -> np.ndarray:
    """Gaussian test vector centered on the grid, width a sixth of its length."""
    mid = 0.5 * (grid.xmin + grid.xmax)
    width = (grid.xmax - grid.xmin) / 6.0
    return np.exp(-((grid.nodes - mid) / width) ** 2).astype(complex)


def end_to_end_residual(s: PseudoScenario, cmap: CoordinateMap, xi_grid: Grid,
                        g=None, trim: int | None = None) -> ResidualReport:
    """Weak intertwining for the ``xi``-frame scenario built from ``s``."""
    from .operators import AssemblyKind, assemble
    from .verify import DEFAULT_TRIM, intertwining_residual

    trim = DEFAULT_TRIM if trim is None else trim
    ws = transformed_weak_scenario(s, cmap, g)
    eta = assemble(AssemblyKind.ETA_MINUS, ws, xi_grid)
    H = assemble(AssemblyKind.H_PRODUCT, ws, xi_grid)
    return intertwining_residual(eta, H, xi_grid, trim, bump(xi_grid), name="end_to_end")
