"""Singular basis functions that carry the corner incompatibility.

For a convection coefficient a = a(t) the functions

    psi-_n = (-1)^n 2^(n-1) n! (eps t)^(n/2) erfc_n(chi-)
    psi+_n = (-1)^n 2^(n-1) n! (eps t)^(n/2) exp(x d / (eps t)) erfc_n(chi+)
    chi+- = (x +- d(t)) / (2 sqrt(eps t))

combine into S_n = (psi+_n + (-1)^n psi-_n) / a(0, 0)^n. S_0 jumps from 0 to 1
at the corner and is subtracted (scaled by A0) before discretising.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .problem import CharacteristicData, ProblemSpec, compatibility
from .specfun import erfc_iter, hermite_eval, scaled_erfc_iter

logger = logging.getLogger(__name__)

MAX_PSI_ORDER = 6


@dataclass(frozen=True)
class SingularBasisContext:
    problem: ProblemSpec
    chardata: CharacteristicData
    a00: float
    gamma_diag: float = 0.9

    def __post_init__(self):
        if not self.problem.a_is_time_only:
            raise ValueError("singular functions need a convection coefficient a = a(t)")
        if self.a00 <= 0:
            raise ValueError("a(0, 0) must be positive")
        if not 0 < self.gamma_diag <= 1:
            raise ValueError("gamma_diag must lie in (0, 1]")

    @classmethod
    def for_problem(cls, problem: ProblemSpec, chardata: Optional[CharacteristicData] = None,
                    gamma_diag: float = 0.9) -> SingularBasisContext:
        if chardata is None:
            chardata = compatibility(problem)
        return cls(problem, chardata, chardata.a00, gamma_diag)

    @property
    def eps(self) -> float:
        return self.problem.eps

    @property
    def A0(self) -> float:
        return self.chardata.A0


def _psi(ctx: SingularBasisContext, sign: str, n: int, x, t) -> np.ndarray:
    # no domain checks; finite-difference stencils step slightly outside [0, 1]
    eps = ctx.eps
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    d = np.asarray(ctx.chardata.d(t), dtype=float)
    root = np.sqrt(eps * t)
    chi_minus = (x - d) / (2.0 * root)
    with np.errstate(under="ignore"):
        kernel = np.exp(-chi_minus * chi_minus)
    if n == -1:
        return -kernel / (2.0 * np.sqrt(eps * math.pi * t))
    coef = (-1) ** n * 2.0 ** (n - 1) * math.factorial(n) * root**n
    if sign == "+":
        chi_plus = (x + d) / (2.0 * root)
        scaled = np.asarray(scaled_erfc_iter(n, np.maximum(chi_plus, 0.0)), dtype=float)
        out = coef * kernel * scaled
        neg = chi_plus < 0
        if np.any(neg):
            # x + d < 0 only just outside the domain, where exp(x d / (eps t)) <= 1
            xb, db, tb, cb = (np.broadcast_to(v, chi_plus.shape) for v in (x, d, t, coef))
            direct = np.exp(xb[neg] * db[neg] / (eps * tb[neg])) * np.asarray(
                erfc_iter(n, chi_plus[neg]), dtype=float)
            out = np.array(out, copy=True)
            out[neg] = cb[neg] * direct
        return out
    return coef * np.asarray(erfc_iter(n, chi_minus), dtype=float)


def _check_sign_order(sign: str, n: int):
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    if not -1 <= n <= MAX_PSI_ORDER:
        raise ValueError(f"order must lie in -1..{MAX_PSI_ORDER}, got {n}")


def psi(ctx: SingularBasisContext, sign: str, n: int, x, t):
    """Basis function psi^sign_n at (x, t), t > 0.

    The + branch is evaluated as coef * E(x, t) * H_n(chi+), which never
    forms the overflowing factor exp(x d / (eps t)).
    """
    _check_sign_order(sign, n)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError("psi is defined for t > 0 only")
    out = _psi(ctx, sign, n, x, t)
    return float(out) if np.ndim(out) == 0 else out


def _S(ctx: SingularBasisContext, n: int, x, t) -> np.ndarray:
    plus = _psi(ctx, "+", n, x, t)
    minus = _psi(ctx, "-", n, x, t)
    return (plus + (-1) ** n * minus) / ctx.a00**n


def S_eval(ctx: SingularBasisContext, n: int, x, t):
    """S_n(x, t) on the closed domain; t = 0 uses the limit values."""
    if n < 0 or n > MAX_PSI_ORDER:
        raise ValueError(f"order must lie in 0..{MAX_PSI_ORDER}, got {n}")
    x_arr, t_arr = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("S_n is defined for t >= 0")
    initial = t_arr == 0
    if n == 0 and np.any(initial & (x_arr == 0)):
        raise ValueError("S_0 is undefined at the corner (0, 0)")
    out = np.zeros(x_arr.shape)
    live = ~initial
    if np.any(live):
        out[live] = _S(ctx, n, x_arr[live], t_arr[live])
    return float(out) if out.ndim == 0 else out


def modified_rhs(ctx: SingularBasisContext, x, t):
    """Right-hand side f - A0 L S0 of the problem for y = u - A0 S0.

    For a = a(t), L S0 = p(t) psi+_1 / (eps t^2).
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError("modified_rhs needs t > 0")
    f = np.asarray(ctx.problem.f(x, t), dtype=float)
    if ctx.A0 == 0:
        return float(f) if f.ndim == 0 else f
    factor = ctx.A0 * np.asarray(ctx.chardata.p(t_arr), dtype=float) / (ctx.eps * t_arr * t_arr)
    out = f - factor * _psi(ctx, "+", 1, x, t_arr)
    return float(out) if np.ndim(out) == 0 else out


def modified_boundary(ctx: SingularBasisContext, side: str, t):
    """Dirichlet data for y = u - A0 S0 on the left or right boundary."""
    problem = ctx.problem
    t_arr = np.asarray(t, dtype=float)
    if side == "left":
        out = np.asarray(problem.gL(t_arr), dtype=float) - ctx.A0
    elif side == "right":
        out = np.asarray(problem.gR(t_arr), dtype=float)
        if ctx.A0 != 0:
            out = out - ctx.A0 * np.asarray(S_eval(ctx, 0, np.ones_like(t_arr), t_arr))
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    out = out * np.ones_like(t_arr)
    return float(out) if out.ndim == 0 else out


# --- derivative bound diagnostics -------------------------------------------


def _fd(fn, x, t, var: str, order: int, h):
    """Central differences in ``var`` with one Richardson step (order 4)."""

    def raw(step):
        def at(k):
            if var == "x":
                return fn(x + k * step, t)
            return fn(x, t + k * step)

        if order == 1:
            return (at(1) - at(-1)) / (2 * step)
        if order == 2:
            return (at(1) - 2 * at(0) + at(-1)) / step**2
        if order == 3:
            return (at(2) - 2 * at(1) + 2 * at(-1) - at(-2)) / (2 * step**3)
        raise ValueError("derivative order must be 1..3")

    return (4.0 * raw(h / 2) - raw(h)) / 3.0


def _psi_minus_dx(ctx: SingularBasisContext, n: int, k: int, x, t) -> np.ndarray:
    """Exact k-th x-derivative of psi-_n.

    d/dx psi-_m = max(m, 1) psi-_{m-1} down to psi-_{-1}, whose further
    derivatives are Hermite multiples of the Gaussian kernel. Away from the
    layer psi-_n is numerically a polynomial, where differencing only
    amplifies rounding.
    """
    factor = 1.0
    m = n
    while k > 0 and m >= 0:
        factor *= max(m, 1)
        m -= 1
        k -= 1
    base = factor * _psi(ctx, "-", m, x, t)
    if k == 0:
        return base
    d = np.asarray(ctx.chardata.d(t), dtype=float)
    root2 = 2.0 * np.sqrt(ctx.eps * t)
    z = (x - d) / root2
    return base * (-1) ** k * hermite_eval(k, z) / root2**k


@dataclass(frozen=True)
class BoundSpec:
    bound_id: str
    function: str  # "S0", "S1", "S2" or "psi0+"
    var: str
    order: int
    expression: object  # callable(x, t, eps, d, E_gamma, E) -> bound profile


def _bound_set() -> list[BoundSpec]:
    def b(bid, fn, var, order, expr):
        return BoundSpec(bid, fn, var, order, expr)

    def q(t, eps):
        return np.sqrt(t / eps)

    return [
        # S0
        b("S0", "S0", "x", 0, lambda x, t, e, d, Eg, E: np.ones_like(x)),
        b("S0_t", "S0", "t", 1, lambda x, t, e, d, Eg, E: (1 + q(t, e)) / t * Eg),
        b("S0_tt", "S0", "t", 2, lambda x, t, e, d, Eg, E: ((1 + q(t, e)) / t) ** 2 * Eg),
        b("S0_x", "S0", "x", 1, lambda x, t, e, d, Eg, E: (e / t + np.sqrt(e / t)) / e * Eg),
        b("S0_xx", "S0", "x", 2, lambda x, t, e, d, Eg, E: (e / t + e / t) / e**2 * Eg),
        b("S0_xxx", "S0", "x", 3, lambda x, t, e, d, Eg, E: (e / t + (e / t) ** 1.5) / e**3 * Eg),
        # S1
        b("S1", "S1", "x", 0, lambda x, t, e, d, Eg, E: np.ones_like(x)),
        b("S1_t", "S1", "t", 1, lambda x, t, e, d, Eg, E: np.ones_like(x)),
        b("S1_tt", "S1", "t", 2, lambda x, t, e, d, Eg, E: (1 + q(t, e)) / t * Eg + 1),
        b("S1_x", "S1", "x", 1, lambda x, t, e, d, Eg, E: np.ones_like(x)),
        b("S1_xx", "S1", "x", 2, lambda x, t, e, d, Eg, E: Eg / e + 1),
        b("S1_xxx", "S1", "x", 3, lambda x, t, e, d, Eg, E: Eg / (e * np.sqrt(e * t)) + 1),
        # S2
        b("S2", "S2", "x", 0, lambda x, t, e, d, Eg, E: np.ones_like(x)),
        b("S2_x", "S2", "x", 1, lambda x, t, e, d, Eg, E: np.ones_like(x)),
        b("S2_t", "S2", "t", 1, lambda x, t, e, d, Eg, E: np.ones_like(x)),
        b("S2_tt", "S2", "t", 2, lambda x, t, e, d, Eg, E: (1 + e / t) * (1 + q(t, e)) * Eg + 1),
        b("S2_xx", "S2", "x", 2, lambda x, t, e, d, Eg, E: (1 + q(t, e)) * Eg),
        # left of the layer S2 ~ (x - d)^2 / a00^2, so the profile needs a constant
        b("S2_xx_c", "S2", "x", 2, lambda x, t, e, d, Eg, E: (1 + q(t, e)) * Eg + 1),
        b("S2_xxx", "S2", "x", 3,
          lambda x, t, e, d, Eg, E: (1 + q(t, e) + np.sqrt(e / t)) / e * Eg),
        # psi+_0
        b("psi0+_a", "psi0+", "x", 0,
          lambda x, t, e, d, Eg, E: np.minimum(1.0, np.sqrt(e * t) / (x + d)) * E),
        b("psi0+_b", "psi0+", "t", 1, lambda x, t, e, d, Eg, E: Eg / t),
        b("psi0+_c", "psi0+", "t", 2, lambda x, t, e, d, Eg, E: (1 + q(t, e)) / t**2 * Eg),
        b("psi0+_d", "psi0+", "x", 1, lambda x, t, e, d, Eg, E: Eg / (x + d)),
        b("psi0+_e", "psi0+", "x", 2, lambda x, t, e, d, Eg, E: Eg / (e * t)),
        b("psi0+_f", "psi0+", "x", 3,
          lambda x, t, e, d, Eg, E: (1 + np.sqrt(e / t)) / (e**2 * t) * Eg),
    ]


BOUND_SET = _bound_set()


@dataclass(frozen=True)
class DiagnosticRow:
    bound_id: str
    eps: float
    C_emp: float
    excluded: int = 0


def diagnostic_points(ctx: SingularBasisContext, mesh=None, n_times: int = 30,
                      n_layer: int = 41, t_min: float = 1e-6):
    """Sample points for the bound sweep.

    Mesh nodes (if given) plus, at geometrically spaced times down to
    ``t_min``, points across the interior layer in units of sqrt(eps t).
    """
    # leave room for time stencils of width <= 4% of t
    t_max = ctx.problem.T / 1.05
    times = np.geomspace(t_min, t_max, n_times)
    xs_base = np.linspace(0.0, 1.0, 21)
    if mesh is not None:
        times = np.union1d(times, mesh.ts[(mesh.ts >= t_min) & (mesh.ts <= t_max)])
        xs_base = np.union1d(xs_base, mesh.xs)
    pts_x, pts_t = [], []
    offsets = np.linspace(-5.0, 5.0, n_layer)
    for t in times:
        d = float(ctx.chardata.d(t))
        layer = d + 2.0 * math.sqrt(ctx.eps * t) * offsets
        xs = np.union1d(xs_base, np.clip(layer, 0.0, 1.0))
        pts_x.append(xs)
        pts_t.append(np.full_like(xs, t))
    return np.concatenate(pts_x), np.concatenate(pts_t)


def _function(ctx: SingularBasisContext, name: str):
    if name == "psi0+":
        return lambda x, t: _psi(ctx, "+", 0, x, t)
    n = int(name[1:])
    return lambda x, t: _S(ctx, n, x, t)


def bound_values(ctx: SingularBasisContext, spec: BoundSpec, x, t):
    """|derivative| and the bound profile at the sample points."""
    fn = _function(ctx, spec.function)
    eps = ctx.eps
    root = np.sqrt(eps * t)
    if spec.order == 0:
        deriv = fn(x, t)
    elif spec.var == "x" and spec.function != "psi0+":
        # difference only the + part; the - part is differentiated exactly
        n = int(spec.function[1:])
        plus = _fd(lambda xx, tt: _psi(ctx, "+", n, xx, tt), x, t, "x", spec.order, 0.02 * root)
        minus = _psi_minus_dx(ctx, n, spec.order, x, t)
        deriv = (plus + (-1) ** n * minus) / ctx.a00**n
    elif spec.var == "x":
        deriv = _fd(fn, x, t, "x", spec.order, 0.02 * root)
    else:
        deriv = _fd(fn, x, t, "t", spec.order, 0.02 * np.minimum(t, root))
    d = np.asarray(ctx.chardata.d(t), dtype=float)
    E = np.exp(-((x - d) ** 2) / (4.0 * eps * t))
    E_gamma = E**ctx.gamma_diag
    expr = spec.expression(x, t, eps, d, E_gamma, E)
    return np.abs(deriv), expr


def bound_diagnostics(ctx: SingularBasisContext, eps_set: Iterable[float], grid=None,
                      bounds: Optional[Sequence[BoundSpec]] = None) -> list[DiagnosticRow]:
    """Empirical constants C_emp(eps) = sup |derivative| / bound profile."""
    rows = []
    for eps in eps_set:
        sub = SingularBasisContext.for_problem(ctx.problem.with_eps(eps), gamma_diag=ctx.gamma_diag)
        x, t = diagnostic_points(sub, grid)
        for spec in bounds or BOUND_SET:
            deriv, expr = bound_values(sub, spec, x, t)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = deriv / expr
            bad = ~np.isfinite(ratio)
            if np.any(bad):
                logger.warning("%s at eps=%g: %d points with a vanishing bound profile excluded",
                               spec.bound_id, eps, int(bad.sum()))
            finite = ratio[~bad]
            rows.append(DiagnosticRow(spec.bound_id, eps, float(finite.max()) if finite.size else
                                      float("nan"), int(bad.sum())))
    return rows


def write_diagnostics_csv(rows: Sequence[DiagnosticRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bound_id", "eps", "C_emp"])
        for r in rows:
            writer.writerow([r.bound_id, repr(r.eps), repr(r.C_emp)])
