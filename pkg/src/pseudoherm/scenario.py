"""Scenario files: JSON documents describing one model and the checks to run.

A file is validated into a :class:`ScenarioFile`, which keeps the normalized
document (echoed into reports) next to the constructed model objects.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .expr import ParseError, parse
from .grid import Grid
from .model import ComplexFunction, PseudoScenario, ScenarioError, VonRoosSpec, WeakScenario
from .verify import MAX_SPECTRUM_DIM

BRANCHES = ("pseudo", "weak", "vonroos", "transform")

PROFILES = {
    "pseudo": (("U", "G"), ("a",)),
    "weak": (("U", "g"), ("a",)),
    "vonroos": (("m",), ("V_re", "V_im")),
    "transform": (("U", "G"), ("a",)),
}

CONSTANTS = {
    "pseudo": {"delta": 0.0},
    "weak": {"epsilon": 0.0},
    "vonroos": {"alpha": None, "beta": None, "gamma": None},
    "transform": {"delta": 0.0},
}

CHECKS = {
    "pseudo": ("eq13", "eq15", "eq15_printed", "eq18", "intertwine+", "factorize",
               "groundstate", "hermitian", "crossform", "spectrum"),
    "weak": ("eq23", "eq25", "antiherm", "intertwine-", "crossform", "spectrum"),
    "vonroos": ("restricted", "spectrum"),
    "transform": ("roundtrip", "mass", "complementarity", "master", "eq34", "endtoend"),
}

DEFAULT_CHECKS = {
    "pseudo": ("eq13", "eq15", "eq18", "intertwine+", "factorize", "groundstate"),
    "weak": ("eq23", "eq25", "antiherm", "intertwine-"),
    "vonroos": ("spectrum",),
    "transform": ("roundtrip", "mass", "complementarity", "master"),
}

# Checks whose residual shrinks with the grid and can be refined.
CONVERGENT_CHECKS = ("intertwine+", "factorize", "groundstate", "antiherm",
                     "intertwine-", "crossform", "endtoend", "complementarity", "master")

DEFAULT_TOLERANCES = {
    "eq13": 1e-12,
    "eq15": 1e-9,
    "eq15_printed": 1e-9,
    "eq18": 1e-12,
    "eq23": 1e-12,
    "eq25": 1e-12,
    "intertwine+": 1e-3,
    "intertwine-": 1e-3,
    "factorize": 1e-3,
    "groundstate": 1e-3,
    "hermitian": 1e-13,
    "antiherm": 1e-3,
    "crossform": 1e-3,
    "spectrum": 1e-2,
    "restricted": 1e-14,
    "roundtrip": 1e-10,
    "mass": 1e-10,
    "complementarity": 1e-6,
    "master": 1e-12,
    "master_xi": 1e-5,
    "eq34": 1e-12,
    "endtoend": 1e-3,
    "order_min": 1.6,
    "order_max": 2.4,
    "exact": 1e-10,
}

# Checks reported for comparison only; they never fail a run.
DIAGNOSTIC_CHECKS = ("eq15_printed",)

TOP_LEVEL_KEYS = {"name", "branch", "profiles", "constants", "domain", "grid", "trim",
                  "tolerances", "checks", "spectrum", "transform", "output"}


class ValidationError(ValueError):
    """The scenario file is malformed; the CLI maps this to exit status 2."""


def _canonical_check(name: str) -> str:
    return name.replace("−", "-")


def _number(value, where) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where} must be a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ValidationError(f"{where} must be finite, got {value!r}")
    return v


def _int(value, where, minimum) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ValidationError(f"{where} must be an integer >= {minimum}, got {value!r}")
    return value


def _parse_profile(key, text):
    if not isinstance(text, (str, int, float)) or isinstance(text, bool):
        raise ValidationError(f"profiles.{key} must be an expression string, got {text!r}")
    try:
        return parse(str(text))
    except ParseError as exc:
        raise ValidationError(f"profiles.{key}: {exc}") from exc


@dataclass
class ScenarioFile:
    name: str
    branch: str
    document: dict
    model: object
    grids: list[Grid]
    trim: int | None
    tolerances: dict
    checks: list[str]
    spectrum: dict = field(default_factory=dict)
    transform: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        """Finest grid; single-grid checks run here."""
        return self.grids[-1]

    @property
    def domain(self) -> tuple[float, float]:
        return self.model.domain


def validate_document(doc, default_name: str = "scenario") -> ScenarioFile:
    if not isinstance(doc, dict):
        raise ValidationError("scenario file must contain a JSON object")
    unknown = set(doc) - TOP_LEVEL_KEYS
    if unknown:
        raise ValidationError(f"unknown top-level keys: {sorted(unknown)}")

    branch = doc.get("branch")
    if branch not in BRANCHES:
        raise ValidationError(f"branch must be one of {list(BRANCHES)}, got {branch!r}")
    name = doc.get("name", default_name)
    if not isinstance(name, str) or not name or "/" in name or "\\" in name:
        raise ValidationError(f"name must be a non-empty string without path separators, got {name!r}")

    profiles_in = doc.get("profiles")
    if not isinstance(profiles_in, dict):
        raise ValidationError("profiles must be an object of expression strings")
    required, optional = PROFILES[branch]
    missing = [k for k in required if k not in profiles_in]
    if missing:
        raise ValidationError(f"branch {branch!r} requires profiles {missing}")
    extra = set(profiles_in) - set(required) - set(optional)
    if extra:
        raise ValidationError(f"branch {branch!r} does not take profiles {sorted(extra)}")
    profiles = {k: _parse_profile(k, v) for k, v in profiles_in.items()}

    constants_in = doc.get("constants", {})
    if not isinstance(constants_in, dict):
        raise ValidationError("constants must be an object")
    extra = set(constants_in) - set(CONSTANTS[branch])
    if extra:
        raise ValidationError(f"branch {branch!r} does not take constants {sorted(extra)}")
    constants = {}
    for key, default in CONSTANTS[branch].items():
        if key in constants_in:
            constants[key] = _number(constants_in[key], f"constants.{key}")
        elif default is None:
            raise ValidationError(f"branch {branch!r} requires constant {key!r}")
        else:
            constants[key] = default

    dom = doc.get("domain")
    if not isinstance(dom, list) or len(dom) != 2:
        raise ValidationError("domain must be [xmin, xmax]")
    domain = (_number(dom[0], "domain[0]"), _number(dom[1], "domain[1]"))
    if not domain[1] > domain[0]:
        raise ValidationError(f"domain must satisfy xmin < xmax, got {list(domain)}")

    grid_in = doc.get("grid", 401)
    sizes = grid_in if isinstance(grid_in, list) else [grid_in]
    if not sizes:
        raise ValidationError("grid list must not be empty")
    sizes = [_int(n, "grid", 9) for n in sizes]
    if sizes != sorted(set(sizes)):
        raise ValidationError("grid refinement list must be strictly increasing")
    grids = [Grid(domain[0], domain[1], n) for n in sizes]

    trim = doc.get("trim")
    if trim is not None:
        trim = _int(trim, "trim", 0)
        if 2 * trim >= sizes[0] - 2:
            raise ValidationError(f"trim {trim} too large for {sizes[0]} nodes")

    tol_in = doc.get("tolerances", {})
    if not isinstance(tol_in, dict):
        raise ValidationError("tolerances must be an object")
    unknown = set(tol_in) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ValidationError(f"unknown tolerance keys: {sorted(unknown)}")
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update({k: _number(v, f"tolerances.{k}") for k, v in tol_in.items()})

    checks_in = doc.get("checks", list(DEFAULT_CHECKS[branch]))
    if not isinstance(checks_in, list) or not all(isinstance(c, str) for c in checks_in):
        raise ValidationError("checks must be a list of names")
    checks = [_canonical_check(c) for c in checks_in]
    bad = [c for c in checks if c not in CHECKS[branch]]
    if bad:
        raise ValidationError(f"unknown checks for branch {branch!r}: {bad}; "
                              f"available: {list(CHECKS[branch])}")
    if len(set(checks)) != len(checks):
        raise ValidationError("checks must not repeat")

    spectrum = _spectrum_options(doc.get("spectrum", {}), branch, sizes[-1])
    transform = _transform_options(doc.get("transform", {}), branch)
    output = doc.get("output", {})
    if not isinstance(output, dict) or set(output) - {"dir", "format"}:
        raise ValidationError("output must be an object with optional keys 'dir' and 'format'")

    try:
        model = _build_model(branch, profiles, constants, domain)
    except ScenarioError as exc:
        raise ValidationError(str(exc)) from exc

    if "restricted" in checks and not model.restricted:
        raise ValidationError("check 'restricted' needs alpha = gamma = 0 and beta = -1")

    document = {
        "name": name,
        "branch": branch,
        "profiles": {k: profiles[k].to_text() for k in sorted(profiles)},
        "constants": constants,
        "domain": list(domain),
        "grid": sizes,
        "trim": trim,
        "tolerances": tolerances,
        "checks": checks,
        "spectrum": spectrum,
        "transform": transform,
    }
    return ScenarioFile(name, branch, document, model, grids, trim, tolerances, checks,
                        spectrum, transform, output)


def _spectrum_options(opts, branch, n_default) -> dict:
    if not isinstance(opts, dict):
        raise ValidationError("spectrum must be an object")
    allowed = {"n", "form", "expect", "expect_imag"}
    if set(opts) - allowed:
        raise ValidationError(f"unknown spectrum keys: {sorted(set(opts) - allowed)}")
    out = {"n": _int(opts.get("n", min(n_default, 801)), "spectrum.n", 9)}
    if out["n"] - 2 > MAX_SPECTRUM_DIM:
        raise ValidationError(f"spectrum.n must leave at most {MAX_SPECTRUM_DIM} interior nodes")
    form = opts.get("form", "product" if branch == "vonroos" else "coeff")
    if form not in ("coeff", "product"):
        raise ValidationError(f"spectrum.form must be 'coeff' or 'product', got {form!r}")
    out["form"] = form
    if "expect" in opts:
        exp = opts["expect"]
        if not isinstance(exp, list) or not exp:
            raise ValidationError("spectrum.expect must be a non-empty list of numbers")
        out["expect"] = [_number(e, "spectrum.expect") for e in exp]
    if "expect_imag" in opts:
        out["expect_imag"] = _number(opts["expect_imag"], "spectrum.expect_imag")
    return out


def _transform_options(opts, branch) -> dict:
    if not isinstance(opts, dict):
        raise ValidationError("transform must be an object")
    if opts and branch != "transform":
        raise ValidationError("transform options are only valid for branch 'transform'")
    allowed = {"h_xi", "R", "g", "epsilon", "n_xi"}
    if set(opts) - allowed:
        raise ValidationError(f"unknown transform keys: {sorted(set(opts) - allowed)}")
    out = {
        "h_xi": _number(opts.get("h_xi", 1e-3), "transform.h_xi"),
        "R": _parse_profile("R", opts.get("R", "exp(x)")).to_text(),
        "g": None if opts.get("g") is None else _parse_profile("g", opts["g"]).to_text(),
        "epsilon": _number(opts.get("epsilon", 0.0), "transform.epsilon"),
        "n_xi": _int(opts.get("n_xi", 801), "transform.n_xi", 9),
    }
    if out["h_xi"] <= 0:
        raise ValidationError("transform.h_xi must be positive")
    return out


def _build_model(branch, profiles, constants, domain):
    if branch in ("pseudo", "transform"):
        return PseudoScenario(U=profiles["U"], G=profiles["G"], a=profiles.get("a", "0"),
                              delta=constants["delta"], domain=domain)
    if branch == "weak":
        return WeakScenario(U=profiles["U"], g=profiles["g"], a=profiles.get("a", "0"),
                            epsilon=constants["epsilon"], domain=domain)
    V = ComplexFunction(profiles.get("V_re", parse("0")), profiles.get("V_im", parse("0")))
    return VonRoosSpec(m=profiles["m"], alpha=constants["alpha"], beta=constants["beta"],
                       gamma=constants["gamma"], V=V, domain=domain)


def load_scenario(path) -> ScenarioFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return validate_document(doc, default_name=path.stem)
