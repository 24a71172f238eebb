"""Construction and numerical verification of pseudo-Hermitian and weakly
pseudo-Hermitian position-dependent-mass Hamiltonians."""

from .expr import Expr, ParseError, differentiate, evaluate, parse, simplify, to_text
from .grid import Grid
from .model import (
    ComplexFunction,
    PseudoScenario,
    ScenarioError,
    VonRoosSpec,
    WeakScenario,
    ground_state,
    potential,
    pseudo_F,
    weak_f,
)
from .operators import AssemblyKind, assemble

__version__ = "0.1.0"

__all__ = [
    "AssemblyKind",
    "ComplexFunction",
    "Expr",
    "Grid",
    "ParseError",
    "PseudoScenario",
    "ScenarioError",
    "VonRoosSpec",
    "WeakScenario",
    "assemble",
    "differentiate",
    "evaluate",
    "ground_state",
    "parse",
    "potential",
    "pseudo_F",
    "simplify",
    "to_text",
    "weak_f",
]
