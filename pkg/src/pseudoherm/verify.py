"""Residual checks for the identities satisfied by the constructed operators.

Operator identities are tested on a smooth test vector and measured by the
max-norm over interior nodes, so that the one-sided boundary rows do not
dominate.  Symbolic identities are evaluated pointwise from exact derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid
from .model import (
    PseudoScenario,
    WeakScenario,
    eq25_cancellation,
    ground_state,
    pseudo_F,
    pseudo_potential,
    weak_f,
    weak_potential,
)
from .operators import AssemblyKind, adjoint, assemble

# Rows polluted by the transposed one-sided boundary stencils: three for the
# adjoint of a single first-order matrix, two more for each extra factor.
DEFAULT_TRIM = 5
FIRST_ORDER_TRIM = 3
G_PRIME_FLOOR = 1e-8
MAX_SPECTRUM_DIM = 1200
EXACT_FLOOR = 1e-12


class VerificationError(RuntimeError):
    pass


@dataclass
class ResidualReport:
    name: str
    grid: Grid | None
    trim: int
    norm: float
    reference_scale: float
    relative: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "grid": None if self.grid is None else self.grid.to_dict(),
            "trim": self.trim,
            "norm": self.norm,
            "reference_scale": self.reference_scale,
            "relative": self.relative,
            "details": self.details,
        }


@dataclass
class ConvergenceReport:
    name: str
    grids: list
    norms: list
    relatives: list
    estimated_order: float | None
    exact: bool = False

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "grids": [g.to_dict() for g in self.grids],
            "norms": list(self.norms),
            "relatives": list(self.relatives),
            "estimated_order": self.estimated_order,
            "exact": self.exact,
        }


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    conjugate_asymmetry: float
    nearest_to_delta: complex
    delta: float = 0.0

    def to_dict(self) -> dict:
        return {
            "count": int(self.eigenvalues.size),
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "conjugate_asymmetry": self.conjugate_asymmetry,
            "nearest_to_delta": [float(self.nearest_to_delta.real), float(self.nearest_to_delta.imag)],
            "delta": self.delta,
        }


def _report(name, grid, trim, residual, reference, **details) -> ResidualReport:
    residual = np.abs(np.asarray(residual))
    reference = np.abs(np.asarray(reference))
    if trim:
        residual = residual[trim:-trim]
        reference = reference[trim:-trim]
    norm = float(residual.max()) if residual.size else 0.0
    scale = float(reference.max()) if reference.size else 0.0
    relative = norm / scale if scale > 0 else (0.0 if norm == 0 else float("inf"))
    return ResidualReport(name, grid, trim, norm, scale, relative, details)


def default_test_vector(grid: Grid) -> np.ndarray:
    """``exp(-x^2)`` sampled on the grid."""
    return np.exp(-grid.nodes**2).astype(complex)


def _hermitian_apply(M, v):
    """``adjoint(M) @ v`` without materializing the adjoint."""
    return np.conj(np.conj(v) @ M)


def intertwining_residual(eta, H, grid: Grid, trim: int = DEFAULT_TRIM, w=None,
                          name: str = "intertwining") -> ResidualReport:
    """``(eta H - H^dagger eta) w`` against ``eta H w``."""
    if eta.shape != H.shape or eta.shape[0] != grid.n:
        raise ValueError(f"shape mismatch: eta {eta.shape}, H {H.shape}, grid n={grid.n}")
    w = default_test_vector(grid) if w is None else np.asarray(w, dtype=complex)
    lhs = eta @ (H @ w)
    rhs = _hermitian_apply(H, eta @ w)
    return _report(name, grid, trim, lhs - rhs, lhs)


def difference_residual(A, B, grid: Grid, trim: int = DEFAULT_TRIM, w=None,
                        name: str = "difference") -> ResidualReport:
    """``(A - B) w`` against ``A w``; used for cross-form agreement."""
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    w = default_test_vector(grid) if w is None else np.asarray(w, dtype=complex)
    Aw = A @ w
    return _report(name, grid, trim, Aw - B @ w, Aw)


def antihermiticity_residual(eta, grid: Grid, trim: int = FIRST_ORDER_TRIM, w=None,
                             name: str = "antihermiticity") -> ResidualReport:
    """``(eta + eta^dagger) w`` against ``eta w``."""
    w = default_test_vector(grid) if w is None else np.asarray(w, dtype=complex)
    ew = eta @ w
    return _report(name, grid, trim, ew + _hermitian_apply(eta, w), ew)


def hermiticity_defect(M) -> float:
    """``max |M - adjoint(M)| / max |M|`` over all entries."""
    scale = float(np.max(np.abs(M)))
    diff = float(np.max(np.abs(M - adjoint(M))))
    return diff / scale if scale else diff


def factorization_residual(s: PseudoScenario, grid: Grid, trim: int = DEFAULT_TRIM,
                           w=None) -> ResidualReport:
    """Coefficient form of ``eta_plus`` against ``adjoint(D) D``.

    ``details['compact_relative']`` repeats the comparison with the compact
    second difference in the coefficient form.
    """
    w = default_test_vector(grid) if w is None else np.asarray(w, dtype=complex)
    D = assemble(AssemblyKind.D, s, grid)
    product = _hermitian_apply(D, D @ w)
    out = {}
    for stencil in ("composed", "compact"):
        cw = assemble(AssemblyKind.ETA_PLUS_COEFF, s, grid, second_derivative=stencil) @ w
        out[stencil] = _report("factorization", grid, trim, cw - product, cw)
    rep = out["composed"]
    rep.details["compact_relative"] = out["compact"].relative
    return rep


# --- symbolic identities -----------------------------------------------------


def default_sample_points(domain, count: int = 101) -> np.ndarray:
    """``count`` equispaced points strictly inside ``domain``."""
    return np.linspace(domain[0], domain[1], count + 2)[1:-1]


def eq15_sides(s: PseudoScenario, printed: bool = False):
    """Left and right sides of the zeroth-order condition as expressions.

    The right side divides by ``G'``.  With ``printed=True`` the third term
    of the bracket carries ``U' U / 4`` instead of ``U' U^2 / 4``; the two
    agree whenever ``U' = 0``.
    """
    U, G = s.U, s.G
    F = pseudo_F(s)
    U1, U2 = U.diff(), U.diff().diff()
    G1, G2 = G.diff(), G.diff().diff()
    UF = U * F
    GU = G / U
    lhs = F * F - UF.diff()
    weight = U1 * U if printed else U1 * U * U
    bracket = (
        0.25 * (U * U * G2).diff()
        - 0.25 * G * (U * U2).diff()
        + 0.25 * weight * GU.diff().diff()
        + 0.5 * U1 * U1 * U * GU.diff()
    )
    rhs = (G / G1) * (-(F * F.diff()) + 0.5 * UF.diff().diff()) + bracket / G1 - 0.25 * U2 * U
    return lhs.simplify(), rhs.simplify()


def _sides(kind: str, scenario, points):
    details = {}
    if kind == "eq13":
        s = scenario
        V = pseudo_potential(s)
        lhs = 2j * V.im.eval(points)
        rhs = -4j * (s.U * s.G.diff()).eval(points)
        return lhs, rhs, details
    if kind in ("eq15", "eq15_printed"):
        s = scenario
        g1 = s.G.diff().eval(points)
        keep = np.abs(g1) > G_PRIME_FLOOR
        details["skipped_points"] = int((~keep).sum())
        details["form"] = "printed" if kind == "eq15_printed" else "derived"
        pts = points[keep]
        if pts.size == 0:
            return np.zeros(0), np.zeros(0), details
        lhs, rhs = eq15_sides(s, printed=kind == "eq15_printed")
        return lhs.eval(pts), rhs.eval(pts), details
    if kind == "eq18":
        s = scenario
        F = pseudo_F(s)
        lhs = (2.0 * F * s.G).eval(points)
        rhs = (s.U.diff() * s.G - s.U * s.G.diff()).eval(points)
        return lhs, rhs, details
    if kind == "eq23":
        s = scenario
        return s.U.diff().eval(points), (2.0 * weak_f(s)).eval(points), details
    if kind == "eq25":
        s = scenario
        cancel = eq25_cancellation(s)
        details["cancellation"] = cancel.to_text()
        details["cancellation_symbolic"] = cancel.is_zero()
        details["cancellation_max"] = float(np.max(np.abs(cancel.eval(points))))
        V = weak_potential(s)
        return V.im.eval(points), (-(s.U * s.g.diff())).eval(points), details
    raise ValueError(f"unknown symbolic identity {kind!r}")


_SYMBOLIC_TYPES = {
    "eq13": PseudoScenario,
    "eq15": PseudoScenario,
    "eq15_printed": PseudoScenario,
    "eq18": PseudoScenario,
    "eq23": WeakScenario,
    "eq25": WeakScenario,
}


def symbolic_residual(kind: str, scenario, points=None) -> ResidualReport:
    """Pointwise ``max |lhs - rhs|`` of a named identity.

    Kinds: ``eq13`` (``V - V* + 4i U G' = 0``), ``eq15`` (zeroth-order
    intertwining condition with ``F`` substituted), ``eq15_printed``,
    ``eq18`` (``2FG + U G' - U' G = 0``), ``eq23`` (``U' = 2f``) and ``eq25``
    (``Im V = -U g'`` after the f-terms cancel).
    """
    if kind not in _SYMBOLIC_TYPES:
        raise ValueError(f"unknown symbolic identity {kind!r}")
    if not isinstance(scenario, _SYMBOLIC_TYPES[kind]):
        raise TypeError(f"{kind} needs a {_SYMBOLIC_TYPES[kind].__name__}")
    points = default_sample_points(scenario.domain) if points is None else np.asarray(points, float)
    lhs, rhs, details = _sides(kind, scenario, points)
    details["points"] = int(points.size)
    ref = np.maximum(np.abs(lhs), np.abs(rhs))
    return _report(kind, None, 0, np.asarray(lhs) - np.asarray(rhs), ref, **details)


# --- ground state ------------------------------------------------------------


def ground_state_residual(s: PseudoScenario, grid: Grid, trim: int = DEFAULT_TRIM,
                          hamiltonian: str = AssemblyKind.H_PRODUCT) -> dict[str, ResidualReport]:
    """Residuals of ``D Psi``, ``H Psi - delta Psi`` and ``eta_plus Psi``.

    Each is scaled by the interior max of ``|Psi|``.
    """
    psi = ground_state(s, grid).values
    D = assemble(AssemblyKind.D, s, grid)
    H = assemble(hamiltonian, s, grid)
    eta = assemble(AssemblyKind.ETA_PLUS_PRODUCT, s, grid)
    out = {}
    for name, vec in (
        ("D_psi", D @ psi),
        ("H_psi", H @ psi - s.delta * psi),
        ("eta_psi", eta @ psi),
    ):
        out[name] = _report(name, grid, trim, vec, psi)
    return out


# --- spectra -----------------------------------------------------------------


def spectrum(H, grid: Grid, trim: int = 1, delta: float = 0.0) -> SpectrumReport:
    """All eigenvalues of the interior block (Dirichlet realization for trim=1)."""
    n = H.shape[0]
    if 2 * trim >= n:
        raise ValueError(f"trim {trim} too large for {n} nodes")
    block = H[trim:n - trim, trim:n - trim] if trim else H
    if block.shape[0] > MAX_SPECTRUM_DIM:
        raise ValueError(f"interior dimension {block.shape[0]} exceeds {MAX_SPECTRUM_DIM}")
    try:
        ev = np.linalg.eigvals(block)
    except np.linalg.LinAlgError as exc:
        raise VerificationError(f"eigenvalue iteration did not converge: {exc}") from exc
    ev = ev[np.lexsort((ev.imag, ev.real))]
    dist = np.abs(np.conj(ev)[:, None] - ev[None, :]).min(axis=1)
    asym = float(np.max(dist / (1.0 + np.abs(ev)))) if ev.size else 0.0
    nearest = complex(ev[np.argmin(np.abs(ev - delta))]) if ev.size else complex("nan")
    return SpectrumReport(ev, asym, nearest, float(delta))


# --- convergence -------------------------------------------------------------


def convergence_order(test, grids, name: str | None = None) -> ConvergenceReport:
    """Run ``test(grid) -> ResidualReport`` on each grid and fit log norm vs log h."""
    grids = list(grids)
    return fit_order(grids, [test(g) for g in grids], name)


def fit_order(grids, reports, name: str | None = None) -> ConvergenceReport:
    """Least-squares slope of log norm against log h for precomputed reports."""
    grids = list(grids)
    if len(grids) < 3 or len(reports) != len(grids):
        raise ValueError("convergence needs at least three grids, one report each")
    for coarse, fine in zip(grids, grids[1:]):
        if abs(coarse.h / fine.h - 2.0) > 1e-9:
            raise ValueError("grids must refine by a factor of two")
    norms = [r.norm for r in reports]
    rel = [r.relative for r in reports]
    label = name or reports[0].name
    if max(rel) <= EXACT_FLOOR:
        return ConvergenceReport(label, grids, norms, rel, None, exact=True)
    if min(norms) <= 0:
        raise VerificationError(f"{label}: zero residual on some but not all grids")
    hs = np.log([g.h for g in grids])
    slope = float(np.polyfit(hs, np.log(norms), 1)[0])
    return ConvergenceReport(label, grids, norms, rel, slope)
