"""Polynomials in x and t used as problem data.

Problem coefficients and boundary/initial data are restricted to polynomials,
which gives exact corner derivatives for the compatibility constants and keeps
problem objects picklable for process-parallel sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from tokenize import TokenError
from typing import Mapping

import numpy as np

VARIABLES = ("x", "t")


@dataclass(frozen=True)
class Polynomial:
    """``sum c * x**i * t**j`` stored as ``{(i, j): c}``.

    ``args`` fixes the call signature: ``("x", "t")`` for f(x, t), ``("x",)``
    for phi(x), ``("t",)`` for boundary data g(t).
    """

    terms: Mapping[tuple[int, int], float]
    args: tuple[str, ...] = ("x", "t")
    _items: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        clean = {}
        for (i, j), c in self.terms.items():
            if i < 0 or j < 0:
                raise ValueError("negative exponent in polynomial term")
            if c != 0:
                clean[(int(i), int(j))] = clean.get((int(i), int(j)), 0.0) + float(c)
        if not set(self.args) <= set(VARIABLES) or not self.args:
            raise ValueError(f"bad argument spec {self.args!r}")
        used = {"x" for (i, _) in clean if i} | {"t" for (_, j) in clean if j}
        if not used <= set(self.args):
            raise ValueError(f"polynomial uses {sorted(used)} but takes {self.args}")
        object.__setattr__(self, "terms", dict(sorted(clean.items())))
        object.__setattr__(self, "_items", tuple(self.terms.items()))

    @classmethod
    def constant(cls, c: float, args: tuple[str, ...] = ("x", "t")) -> Polynomial:
        return cls({(0, 0): c}, args)

    @classmethod
    def from_sympy(cls, expr, args: tuple[str, ...] = ("x", "t")) -> Polynomial:
        import sympy

        x, t = sympy.symbols("x t")
        poly = sympy.Poly(sympy.expand(expr), x, t)
        terms = {}
        for (i, j), c in poly.terms():
            if not c.is_number:
                raise ValueError(f"non-numeric coefficient {c}")
            terms[(i, j)] = float(c)
        return cls(terms, args)

    def __call__(self, *values):
        if len(values) != len(self.args):
            raise TypeError(f"expected {len(self.args)} argument(s), got {len(values)}")
        env = dict(zip(self.args, values))
        x = env.get("x", 0.0)
        t = env.get("t", 0.0)
        shape = np.broadcast(np.asarray(x), np.asarray(t)).shape
        total = np.zeros(shape)
        for (i, j), c in self._items:
            total = total + c * np.power(x, i) * np.power(t, j)
        if total.ndim == 0:
            return float(total)
        return total

    def derivative(self, var: str, order: int = 1) -> Polynomial:
        k = VARIABLES.index(var)
        terms = dict(self.terms)
        for _ in range(order):
            new = {}
            for (i, j), c in terms.items():
                e = (i, j)[k]
                if e == 0:
                    continue
                key = (i - 1, j) if k == 0 else (i, j - 1)
                new[key] = new.get(key, 0.0) + c * e
            terms = new
        return Polynomial(terms, self.args)

    def depends_on(self, var: str) -> bool:
        k = VARIABLES.index(var)
        return any(key[k] > 0 for key in self.terms)

    def antiderivative_t(self) -> Polynomial:
        """Integral in t from 0; used for the characteristic of a = a(t)."""
        if self.depends_on("x"):
            raise ValueError("antiderivative_t needs a polynomial in t only")
        return Polynomial({(0, j + 1): c / (j + 1) for (_, j), c in self.terms.items()}, ("t",))

    def to_string(self) -> str:
        if not self.terms:
            return "0"
        text = ""
        for (i, j), c in self.terms.items():
            factors = [repr(abs(c))]
            if i:
                factors.append("x" if i == 1 else f"x^{i}")
            if j:
                factors.append("t" if j == 1 else f"t^{j}")
            term = "*".join(factors)
            if not text:
                text = term if c > 0 else f"-{term}"
            else:
                text += f" + {term}" if c > 0 else f" - {term}"
        return text

    def __str__(self) -> str:
        return self.to_string()


def parse_polynomial(text: str, args: tuple[str, ...] = ("x", "t")) -> Polynomial:
    """Parse ``"1 - t^2"``, ``"4*x*(1-x)"`` and similar into a Polynomial."""
    import sympy
    from sympy.parsing.sympy_parser import (
        convert_xor,
        implicit_multiplication,
        parse_expr,
        standard_transformations,
    )

    x, t = sympy.symbols("x t")
    transformations = standard_transformations + (convert_xor, implicit_multiplication)
    try:
        expr = parse_expr(text, local_dict={"x": x, "t": t}, transformations=transformations)
    except (SyntaxError, TypeError, sympy.SympifyError, TokenError) as exc:
        raise ValueError(f"cannot parse expression {text!r}: {exc}") from exc
    free = {str(s) for s in expr.free_symbols}
    if not free <= set(VARIABLES):
        raise ValueError(f"unknown symbols {sorted(free - set(VARIABLES))} in {text!r}")
    try:
        return Polynomial.from_sympy(expr, args)
    except sympy.PolynomialError as exc:
        raise ValueError(f"{text!r} is not a polynomial in x, t") from exc

