"""Conversion of profile expressions to sympy, used as an independent oracle."""

import numpy as np
import sympy

x = sympy.Symbol("x", real=True)


def to_sympy(e):
    text = e if isinstance(e, str) else e.to_text()
    return sympy.sympify(text.replace("^", "**"), locals={"ln": sympy.log, "x": x, "pi": sympy.pi})


def values(expr, pts):
    f = sympy.lambdify(x, expr, "numpy")
    return np.broadcast_to(np.asarray(f(pts), dtype=complex), np.shape(pts))
