"""Execute a validated scenario file and collect a :class:`RunReport`."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .grid import Grid
from .model import (
    PseudoScenario,
    WeakScenario,
    eta_plus_coefficients,
    ground_state,
    hamiltonian_coefficients,
    potential,
    pseudo_F,
    weak_f,
)
from .operators import AssemblyKind, assemble, derivative_matrix, node_values
from .scenario import (
    CONVERGENT_CHECKS,
    DIAGNOSTIC_CHECKS,
    ScenarioFile,
    ValidationError,
)
from .transform import (
    build_map,
    complementarity_residual,
    end_to_end_residual,
    eq34_consistency,
    map_roundtrip_residual,
    mass_identity_residual,
    master_equation_residual,
    transform_scenario,
    xi_grid_for,
)
from .verify import (
    DEFAULT_TRIM,
    FIRST_ORDER_TRIM,
    antihermiticity_residual,
    difference_residual,
    factorization_residual,
    fit_order,
    ground_state_residual,
    hermiticity_defect,
    intertwining_residual,
    spectrum,
    symbolic_residual,
)

COMMANDS = ("construct", "verify", "transform", "spectrum", "convergence")


@dataclass
class CheckResult:
    name: str
    criteria: list[dict]
    result: dict
    status: str = ""
    seconds: float = 0.0

    def __post_init__(self):
        if not self.status:
            ok = all(c["status"] == "pass" for c in self.criteria)
            self.status = "pass" if ok else "fail"
        if self.name in DIAGNOSTIC_CHECKS and self.status != "skipped":
            self.status = "diagnostic"

    def to_dict(self, timings: bool = True) -> dict:
        out = {"name": self.name, "status": self.status, "criteria": self.criteria,
               "result": self.result}
        if timings:
            out["seconds"] = self.seconds
        return out


@dataclass
class RunReport:
    command: str
    scenario: ScenarioFile
    checks: list[CheckResult] = field(default_factory=list)
    expressions: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def failed(self) -> bool:
        return any(c.status == "fail" for c in self.checks)

    def summary(self) -> dict:
        counts = {k: 0 for k in ("pass", "fail", "diagnostic", "skipped")}
        for c in self.checks:
            counts[c.status] += 1
        counts["status"] = "fail" if self.failed else "pass"
        return counts

    def to_dict(self, timings: bool = True) -> dict:
        out = {
            "artifact": "pseudoherm",
            "version": __version__,
            "command": self.command,
            "scenario": self.scenario.document,
            "checks": [c.to_dict(timings) for c in self.checks],
            "summary": self.summary(),
            "expressions": self.expressions,
            "tables": {name: {"columns": list(cols), "data": cols} for name, cols in self.tables.items()},
        }
        if timings:
            out["seconds"] = self.seconds
        return out


def _criterion(label, value, tolerance) -> dict:
    value = float(value)
    ok = math.isfinite(value) and value <= tolerance
    return {"label": label, "value": value, "tolerance": tolerance,
            "status": "pass" if ok else "fail"}


def _order_criterion(label, conv, tol) -> dict:
    # Residuals at rounding level carry no order information.
    if conv.exact or max(conv.relatives) <= tol["exact"]:
        return _criterion(label + ".exact", max(conv.relatives), tol["exact"])
    order = conv.estimated_order
    ok = tol["order_min"] <= order <= tol["order_max"]
    return {"label": label + ".order", "value": order,
            "bounds": [tol["order_min"], tol["order_max"]], "status": "pass" if ok else "fail"}


class Runner:
    def __init__(self, sf: ScenarioFile):
        self.sf = sf
        self.model = sf.model
        self.tol = sf.tolerances
        self._map = None

    # --- shared pieces -------------------------------------------------------

    def trim(self, first_order=False) -> int:
        if self.sf.trim is not None:
            return self.sf.trim
        return FIRST_ORDER_TRIM if first_order else DEFAULT_TRIM

    @property
    def cmap(self):
        if self._map is None:
            self._map = build_map(self.model)
        return self._map

    def xi_grids(self):
        lo, hi = self.cmap.xi_domain
        return [Grid(lo, hi, g.n) for g in self.sf.grids]

    # --- single-grid residual tests, keyed by check name ---------------------

    def residual_tests(self, name):
        """Functions ``grid -> {label: ResidualReport}`` for refinable checks."""
        m = self.model
        if name == "intertwine+":
            def test(g):
                eta = assemble(AssemblyKind.ETA_PLUS_PRODUCT, m, g)
                H = assemble(AssemblyKind.H_PRODUCT, m, g)
                return {"relative": intertwining_residual(eta, H, g, self.trim(), name="intertwine+")}
        elif name == "factorize":
            def test(g):
                return {"relative": factorization_residual(m, g, self.trim())}
        elif name == "groundstate":
            def test(g):
                gs = ground_state_residual(m, g, self.trim())
                return {"D_psi": gs["D_psi"], "H_psi": gs["H_psi"]}
        elif name == "antiherm":
            def test(g):
                eta = assemble(AssemblyKind.ETA_MINUS, m, g)
                return {"relative": antihermiticity_residual(eta, g, self.trim(True))}
        elif name == "intertwine-":
            def test(g):
                eta = assemble(AssemblyKind.ETA_MINUS, m, g)
                H = assemble(AssemblyKind.H_PRODUCT, m, g)
                return {"relative": intertwining_residual(eta, H, g, self.trim(), name="intertwine-")}
        elif name == "crossform":
            def test(g):
                A = assemble(AssemblyKind.H_PRODUCT, m, g)
                B = assemble(AssemblyKind.H_COEFF, m, g)
                return {"relative": difference_residual(A, B, g, self.trim(), name="crossform")}
        elif name == "endtoend":
            g_opt = self.sf.transform["g"]

            def test(g):
                return {"relative": end_to_end_residual(m, self.cmap, g, g=g_opt, trim=self.trim())}
        elif name == "complementarity":
            def test(g):
                return {"absolute": complementarity_residual(m, self.cmap, g)}
        elif name == "master":
            def test(g):
                return {"xi_frame": master_equation_residual(m, self.cmap, g)["xi_frame"]}
        else:
            raise KeyError(name)
        return test

    def _single(self, name, tol_key=None, grid=None) -> CheckResult:
        grid = grid or self.sf.grid
        reports = self.residual_tests(name)(grid)
        tol = self.tol[tol_key or name]
        crit = [_criterion(label, r.norm if label == "absolute" else r.relative, tol)
                for label, r in reports.items()]
        return CheckResult(name, crit, {k: r.to_dict() for k, r in reports.items()})

    # --- individual checks ---------------------------------------------------

    def check(self, name) -> CheckResult:
        m, tol = self.model, self.tol
        if name in ("eq13", "eq15", "eq15_printed", "eq18", "eq23"):
            r = symbolic_residual(name, m)
            return CheckResult(name, [_criterion("relative", r.relative, tol[name])], r.to_dict())
        if name == "eq25":
            r = symbolic_residual(name, m)
            crit = [_criterion("relative", r.relative, tol[name]),
                    _criterion("cancellation", r.details["cancellation_max"], tol[name])]
            return CheckResult(name, crit, r.to_dict())
        if name in ("intertwine+", "factorize", "groundstate", "antiherm", "intertwine-", "crossform"):
            return self._single(name)
        if name == "hermitian":
            g = self.sf.grid
            defect = hermiticity_defect(assemble(AssemblyKind.ETA_PLUS_PRODUCT, m, g))
            return CheckResult(name, [_criterion("relative_entrywise", defect, tol[name])],
                               {"relative_entrywise": defect, "grid": g.to_dict()})
        if name == "spectrum":
            return self.spectrum_check()
        if name == "restricted":
            return self.restricted_check()
        if name == "roundtrip":
            r = map_roundtrip_residual(self.cmap)
            return CheckResult(name, [_criterion("absolute", r.norm, tol[name])], r.to_dict())
        if name == "mass":
            r = mass_identity_residual(m, self.cmap, self._xi_grid())
            return CheckResult(name, [_criterion("absolute", r.norm, tol[name])], r.to_dict())
        if name == "complementarity":
            r = complementarity_residual(m, self.cmap, self._xi_grid())
            return CheckResult(name, [_criterion("absolute", r.norm, tol[name])], r.to_dict())
        if name == "master":
            reps = master_equation_residual(m, self.cmap, self._xi_grid())
            crit = [_criterion("x_frame", reps["x_frame"].relative, tol["master"]),
                    _criterion("xi_frame", reps["xi_frame"].relative, tol["master_xi"])]
            return CheckResult(name, crit, {k: r.to_dict() for k, r in reps.items()})
        if name == "eq34":
            r = eq34_consistency(m, self.sf.transform["R"])
            return CheckResult(name, [_criterion("relative", r.relative, tol[name])], r.to_dict())
        if name == "endtoend":
            lo, hi = self.cmap.xi_domain
            return self._single(name, grid=Grid(lo, hi, self.sf.transform["n_xi"]))
        raise ValidationError(f"no implementation for check {name!r}")

    def _xi_grid(self):
        return xi_grid_for(self.cmap, self.sf.transform["h_xi"])

    def spectrum_matrix(self):
        m, opts = self.model, self.sf.spectrum
        g = Grid(m.domain[0], m.domain[1], opts["n"])
        if isinstance(m, (PseudoScenario, WeakScenario)):
            kind = AssemblyKind.H_COEFF if opts["form"] == "coeff" else AssemblyKind.H_PRODUCT
        else:
            kind = AssemblyKind.VON_ROOS
        return assemble(kind, m, g), g

    def spectrum_report(self):
        H, g = self.spectrum_matrix()
        delta = getattr(self.model, "delta", 0.0)
        return spectrum(H, g, 1, delta)

    def spectrum_check(self, rep=None) -> CheckResult:
        rep = rep or self.spectrum_report()
        ev, opts, tol = rep.eigenvalues, self.sf.spectrum, self.tol["spectrum"]
        crit = []
        if isinstance(self.model, PseudoScenario):
            crit.append(_criterion("nearest_to_delta", abs(rep.nearest_to_delta - rep.delta), tol))
        for e in opts.get("expect", []):
            dist = float(np.min(np.abs(ev - e))) / max(1.0, abs(e))
            crit.append(_criterion(f"expect[{e!r}]", dist, tol))
        if "expect_imag" in opts:
            crit.append(_criterion("imag_offset", float(np.max(np.abs(ev.imag - opts["expect_imag"]))), tol))
        result = rep.to_dict()
        result["max_abs_imag"] = float(np.max(np.abs(ev.imag))) if ev.size else 0.0
        status = "" if crit else "diagnostic"
        return CheckResult("spectrum", crit, result, status=status)

    def restricted_check(self) -> CheckResult:
        m, g = self.model, self.sf.grid
        A = assemble(AssemblyKind.VON_ROOS, m, g)
        P = -1j * derivative_matrix(g, 1)
        kinetic = 0.5 / node_values(m.m, g)
        B = P @ (kinetic[:, None] * P)
        B[np.diag_indices_from(B)] += node_values(m.V, g)
        diff = float(np.max(np.abs(A - B)))
        scale = float(np.max(np.abs(A)))
        rel = diff / scale if scale else diff
        return CheckResult("restricted", [_criterion("relative_entrywise", rel, self.tol["restricted"])],
                           {"max_abs_difference": diff, "max_abs_entry": scale, "grid": g.to_dict()})

    def convergence_check(self, name) -> CheckResult:
        if name not in CONVERGENT_CHECKS:
            return CheckResult(name, [], {"reason": "not a grid-refinable check"}, status="skipped")
        grids = self.xi_grids() if self.sf.branch == "transform" else list(self.sf.grids)
        test = self.residual_tests(name)
        runs = [test(g) for g in grids]
        crit, result = [], {}
        for label in runs[0]:
            conv = fit_order(grids, [r[label] for r in runs], name=f"{name}.{label}")
            crit.append(_order_criterion(label, conv, self.tol))
            result[label] = conv.to_dict()
        return CheckResult(name, crit, result)

    # --- tables --------------------------------------------------------------

    def construct(self, report: RunReport) -> None:
        m, g = self.model, self.sf.grid
        x = g.nodes
        if isinstance(m, PseudoScenario):
            V = potential(m)
            F = pseudo_F(m)
            K, L = eta_plus_coefficients(m)
            M1, N1 = hamiltonian_coefficients(m)
            report.expressions = {"F": F.to_text(), "V": V.to_text(), "K": K.to_text(),
                                  "L": L.to_text(), "M1": M1.to_text(), "N1": N1.to_text()}
            Vv = node_values(V, g)
            psi = ground_state(m, g, normalize=True).values
            report.tables["potential"] = {"x": x, "V_re": Vv.real, "V_im": Vv.imag}
            report.tables["partner"] = {"x": x, "F": F.eval(x) * np.ones_like(x)}
            report.tables["ground_state"] = {"x": x, "psi_re": psi.real, "psi_im": psi.imag}
            if self.sf.branch == "transform":
                self._map_table(report)
        elif isinstance(m, WeakScenario):
            V = potential(m)
            f = weak_f(m)
            M1, N1 = hamiltonian_coefficients(m)
            report.expressions = {"f": f.to_text(), "V": V.to_text(), "M1": M1.to_text(),
                                  "N1": N1.to_text()}
            Vv = node_values(V, g)
            report.tables["potential"] = {"x": x, "V_re": Vv.real, "V_im": Vv.imag}
            report.tables["partner"] = {"x": x, "f": f.eval(x) * np.ones_like(x)}
        else:
            Vv = node_values(m.V, g)
            report.expressions = {"m": m.m.to_text(), "V": m.V.to_text(),
                                  "ordering": [m.alpha, m.beta, m.gamma]}
            report.tables["potential"] = {"x": x, "m": m.m.eval(x) * np.ones_like(x),
                                          "V_re": Vv.real, "V_im": Vv.imag}

    def _map_table(self, report: RunReport) -> None:
        m, cmap = self.model, self.cmap
        t = transform_scenario(m, cmap)
        g = self._xi_grid()
        xi = g.nodes
        x = cmap.x_of_xi(xi)
        U_bar = t.U_bar.eval(xi)
        slope = np.gradient(U_bar, g.h, edge_order=2)
        report.expressions["U_bar"] = t.U_bar.to_text()
        report.expressions["Z"] = t.Z.to_text()
        report.expressions["xi_domain"] = list(cmap.xi_domain)
        report.tables["map"] = {
            "xi": xi,
            "x": x,
            "U_bar": U_bar,
            "half_dU_bar_dxi": 0.5 * slope,
            "F_of_x": t.F_pull.eval(xi),
            "F_S_of_x": t.F_bar.eval(xi),
        }

    def spectrum_table(self, report: RunReport, rep) -> None:
        ev = rep.eigenvalues
        report.tables["spectrum"] = {"k": np.arange(ev.size, dtype=float), "re": ev.real, "im": ev.imag}

    def convergence_table(self, report: RunReport) -> None:
        rows = {"check": [], "label": [], "n": [], "h": [], "norm": [], "relative": []}
        for c in report.checks:
            if c.name not in CONVERGENT_CHECKS:
                continue
            for label, conv in c.result.items():
                for gd, nm, rel in zip(conv["grids"], conv["norms"], conv["relatives"]):
                    rows["check"].append(c.name)
                    rows["label"].append(label)
                    rows["n"].append(float(gd["n"]))
                    rows["h"].append(gd["h"])
                    rows["norm"].append(nm)
                    rows["relative"].append(rel)
        report.tables["convergence"] = rows


def _timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    out.seconds = time.perf_counter() - t0
    return out


def run_scenario(sf: ScenarioFile, command: str = "verify") -> RunReport:
    """Execute ``command`` for the scenario; the result is deterministic
    apart from the recorded wall-clock times."""
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}")
    t0 = time.perf_counter()
    runner = Runner(sf)
    report = RunReport(command, sf)

    if command == "construct":
        runner.construct(report)
    elif command == "verify":
        report.checks = [_timed(runner.check, c) for c in sf.checks]
    elif command == "transform":
        if sf.branch != "transform":
            raise ValidationError("command 'transform' needs a scenario with branch 'transform'")
        runner.construct(report)
        report.checks = [_timed(runner.check, c) for c in sf.checks]
    elif command == "spectrum":
        if sf.branch == "transform":
            raise ValidationError("command 'spectrum' does not apply to branch 'transform'")
        rep = runner.spectrum_report()
        report.checks = [_timed(runner.spectrum_check, rep)]
        runner.spectrum_table(report, rep)
    else:
        if len(sf.grids) < 3:
            raise ValidationError("command 'convergence' needs a grid refinement list of at least three sizes")
        for coarse, fine in zip(sf.grids, sf.grids[1:]):
            if fine.n != 2 * (coarse.n - 1) + 1:
                raise ValidationError("grid refinement list must halve the spacing, e.g. [201, 401, 801]")
        report.checks = [_timed(runner.convergence_check, c) for c in sf.checks]
        runner.convergence_table(report)

    report.seconds = time.perf_counter() - t0
    return report
