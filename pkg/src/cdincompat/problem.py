"""Problem data, characteristic curve and corner compatibility constants.

The model problem is

    -eps u_xx + a(x, t) u_x + u_t = f(x, t)   on (0, 1) x (0, T]
    u(0, t) = gL(t),  u(1, t) = gR(t),  u(x, 0) = phi(x)

with a >= alpha > 0. Incompatibility between gL and phi at the corner (0, 0)
travels along the characteristic x = d(t), d' = a(d, t), d(0) = 0.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .polynomial import Polynomial

logger = logging.getLogger(__name__)

# Zero test for compatibility constants computed in floating point.
COMPAT_ZERO_TOL = 1e-8
RK4_STEPS = 100_000
_VALIDATION_POINTS = 41
_FD_STEP = 1e-4
_FD_STEP_HIGH = 1e-2  # third and fourth derivatives

# Right-corner warnings already issued, so sweeps over eps warn once.
_WARNED: set = set()

# Keys accepted for user-supplied corner derivatives.
CORNER_DERIVATIVE_KEYS = ("phi1_0", "phi2_0", "phi3_0", "phi4_0", "gL1_0", "gL2_0")


@dataclass(frozen=True)
class ProblemSpec:
    a: Callable
    f: Callable
    phi: Callable
    gL: Callable
    gR: Callable
    eps: float
    alpha: float
    T: float
    a_is_time_only: Optional[bool] = None
    closed_form_d: Optional[Callable] = None
    corner_derivatives: Mapping[str, float] = field(default_factory=dict)
    name: str = "custom"

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.T <= 0:
            raise ValueError(f"final time must be positive, got {self.T}")
        unknown = set(self.corner_derivatives) - set(CORNER_DERIVATIVE_KEYS)
        if unknown:
            raise ValueError(f"unknown corner derivative keys {sorted(unknown)}")
        if self.a_is_time_only is None:
            flag = isinstance(self.a, Polynomial) and not self.a.depends_on("x")
            object.__setattr__(self, "a_is_time_only", flag)
        if self.closed_form_d is None and self.a_is_time_only and isinstance(self.a, Polynomial):
            object.__setattr__(self, "closed_form_d", self.a.antiderivative_t())
        self._check_positivity()

    def _check_positivity(self):
        xs = np.linspace(0.0, 1.0, _VALIDATION_POINTS)
        ts = np.linspace(0.0, self.T, _VALIDATION_POINTS)
        X, Tg = np.meshgrid(xs, ts, indexing="ij")
        values = np.asarray(self.a(X, Tg), dtype=float) * np.ones_like(X)
        bad = np.argwhere(~(values >= self.alpha))
        if bad.size:
            i, j = bad[0]
            raise ValueError(
                f"convection coefficient a({xs[i]:.4g}, {ts[j]:.4g}) = {values[i, j]:.6g} "
                f"is below alpha = {self.alpha}"
            )

    def with_eps(self, eps: float) -> ProblemSpec:
        return dataclasses.replace(self, eps=eps)

    @cached_property
    def _numeric_characteristic(self) -> CubicHermiteSpline:
        return _integrate_characteristic(self.a, self.T, RK4_STEPS, self.a_is_time_only)


@dataclass(frozen=True)
class CharacteristicData:
    d: Callable
    p: Callable
    Tstar: Optional[float]
    A0: float
    A1: float
    A2: float
    a00: float
    a_t00: float
    a_x00: float
    right_residuals: tuple[float, float, float]
    approximate: bool = False

    @property
    def incompatible(self) -> bool:
        return abs(self.A0) > COMPAT_ZERO_TOL

    @property
    def predicted_rate(self) -> str:
        """Convergence regime predicted by the error analysis of the scheme."""
        if abs(self.A1) > COMPAT_ZERO_TOL:
            return "N^-1/2"
        return "N^-1 ln N"


def _integrate_characteristic(a, T: float, steps: int, time_only: bool) -> CubicHermiteSpline:
    h = T / steps
    ts = np.linspace(0.0, T, steps + 1)
    if time_only:
        # d' = a(t): classical RK4 reduces to Simpson's rule per step
        zero = np.zeros_like(ts)
        left = np.asarray(a(zero, ts), dtype=float) * np.ones_like(ts)
        mids = ts[:-1] + 0.5 * h
        mid = np.asarray(a(np.zeros_like(mids), mids), dtype=float) * np.ones_like(mids)
        incr = h / 6.0 * (left[:-1] + 4.0 * mid + left[1:])
        ds = np.concatenate([[0.0], np.cumsum(incr)])
        slopes = left
    else:
        ds = np.empty_like(ts)
        slopes = np.empty_like(ts)
        d = 0.0
        for k, t in enumerate(ts):
            ds[k] = d
            k1 = float(a(d, t))
            slopes[k] = k1
            if k == steps:
                break
            k2 = float(a(d + 0.5 * h * k1, t + 0.5 * h))
            k3 = float(a(d + 0.5 * h * k2, t + 0.5 * h))
            k4 = float(a(d + h * k3, t + h))
            d += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return CubicHermiteSpline(ts, ds, slopes)


def _check_time(problem: ProblemSpec, t):
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > problem.T * (1 + 1e-12)):
        raise ValueError(f"time outside [0, {problem.T}]")
    return t_arr


def characteristic_d(problem: ProblemSpec, t):
    """Position d(t) of the characteristic leaving the corner (0, 0)."""
    t_arr = _check_time(problem, t)
    if problem.closed_form_d is not None:
        out = np.asarray(problem.closed_form_d(t_arr), dtype=float) * np.ones_like(t_arr)
    else:
        out = problem._numeric_characteristic(t_arr)
    return float(out) if out.ndim == 0 else out


def drift_defect_p(problem: ProblemSpec, t):
    """``p(t) = t a(d(t), t) - d(t)``; identically zero for constant a."""
    t_arr = _check_time(problem, t)
    if problem.a_is_time_only and isinstance(problem.a, Polynomial) and isinstance(
        problem.closed_form_d, Polynomial
    ):
        # exact polynomial cancellation avoids losing digits for small t
        out = _p_polynomial(problem)(t_arr)
    else:
        d = characteristic_d(problem, t_arr)
        out = t_arr * np.asarray(problem.a(d, t_arr), dtype=float) - d
    out = np.asarray(out, dtype=float) * np.ones_like(t_arr)
    return float(out) if out.ndim == 0 else out


def _p_polynomial(problem: ProblemSpec) -> Polynomial:
    terms = {(0, j + 1): c for (_, j), c in problem.a.terms.items()}
    for (_, j), c in problem.closed_form_d.terms.items():
        terms[(0, j)] = terms.get((0, j), 0.0) - c
    return Polynomial(terms, ("t",))


def exit_time(problem: ProblemSpec) -> Optional[float]:
    """Time T* with d(T*) = 1, or None when the characteristic stays inside."""
    if characteristic_d(problem, problem.T) < 1.0:
        return None
    lo, hi = 0.0, problem.T
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if characteristic_d(problem, mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class _Derivatives:
    """Corner derivatives, exact for polynomial data, else central differences."""

    def __init__(self, problem: ProblemSpec):
        self.problem = problem
        self.approximate = False

    def of(self, fn, var: str, order: int, x: float = 0.0, t: float = 0.0) -> float:
        if order == 0:
            return self._call(fn, x, t)
        if isinstance(fn, Polynomial):
            return self._call(fn.derivative(var, order), x, t)
        self.approximate = True
        h = _FD_STEP if order <= 2 else _FD_STEP_HIGH
        # central-difference weights for derivatives 1..4
        stencils = {
            1: (-1, 0, 1),
            2: (1, -2, 1),
            3: (-0.5, 1, 0, -1, 0.5),
            4: (1, -4, 6, -4, 1),
        }
        weights = stencils[order]
        half = len(weights) // 2
        total = 0.0
        for k, w in enumerate(weights):
            shift = (k - half) * h
            if var == "x":
                total += w * self._call(fn, x + shift, t)
            else:
                total += w * self._call(fn, x, t + shift)
        if order == 1:
            total /= 2.0
        return total / h**order

    @staticmethod
    def _call(fn, x, t):
        args = getattr(fn, "args", None)
        if args == ("x",):
            return float(fn(x))
        if args == ("t",):
            return float(fn(t))
        return float(fn(x, t))


def _as_x_fn(fn):
    if isinstance(fn, Polynomial):
        return fn
    wrapped = lambda x: fn(x)  # noqa: E731
    wrapped.args = ("x",)
    return wrapped


def _as_t_fn(fn):
    if isinstance(fn, Polynomial):
        return fn
    wrapped = lambda t: fn(t)  # noqa: E731
    wrapped.args = ("t",)
    return wrapped


def compatibility(problem: ProblemSpec) -> CharacteristicData:
    """Corner compatibility constants A0, A1, A2 plus characteristic data.

    A2 and the right-corner residuals are informational; nonzero right-corner
    residuals are logged as warnings.
    """
    D = _Derivatives(problem)
    eps = problem.eps
    a, f = problem.a, problem.f
    phi, gL, gR = _as_x_fn(problem.phi), _as_t_fn(problem.gL), _as_t_fn(problem.gR)
    user = problem.corner_derivatives

    def phi_d(order: int, x: float) -> float:
        key = f"phi{order}_0"
        if x == 0.0 and key in user:
            return float(user[key])
        return D.of(phi, "x", order, x=x)

    def gl_d(order: int) -> float:
        key = f"gL{order}_0"
        if key in user:
            return float(user[key])
        return D.of(gL, "t", order)

    a00 = D.of(a, "x", 0)
    a_x = D.of(a, "x", 1)
    a_xx = D.of(a, "x", 2)
    a_t = D.of(a, "t", 1)
    A0 = D.of(gL, "t", 0) - phi_d(0, 0.0)
    A1 = -eps * phi_d(2, 0.0) + a00 * phi_d(1, 0.0) + gl_d(1) - D.of(f, "x", 0)
    A2 = (
        -eps**2 * phi_d(4, 0.0)
        + 2 * eps * a00 * phi_d(3, 0.0)
        - a00**2 * phi_d(2, 0.0)
        + gl_d(2)
        + eps * (a_xx * phi_d(1, 0.0) + 2 * a_x * phi_d(2, 0.0))
        + (a_t - a00 * a_x) * phi_d(1, 0.0)
        - (D.of(f, "t", 1) + eps * D.of(f, "x", 2) - a00 * D.of(f, "x", 1))
    )

    # right corner (1, 0)
    a10 = D.of(a, "x", 0, x=1.0)
    a10_x = D.of(a, "x", 1, x=1.0)
    a10_xx = D.of(a, "x", 2, x=1.0)
    a10_t = D.of(a, "t", 1, x=1.0)
    p1 = [D.of(phi, "x", k, x=1.0) for k in range(5)]
    r0 = D.of(gR, "t", 0) - p1[0]
    r1 = -eps * p1[2] + a10 * p1[1] + D.of(gR, "t", 1) - D.of(f, "x", 0, x=1.0)
    r2 = (
        -eps**2 * p1[4]
        + 2 * eps * a10 * p1[3]
        - a10**2 * p1[2]
        + D.of(gR, "t", 2)
        + eps * (a10_xx * p1[1] + 2 * a10_x * p1[2])
        + (a10_t - a10 * a10_x) * p1[1]
        - (D.of(f, "t", 1, x=1.0) + eps * D.of(f, "x", 2, x=1.0) - a10 * D.of(f, "x", 1, x=1.0))
    )
    for label, value in (("zero-order", r0), ("first-order", r1), ("second-order", r2)):
        key = (problem.name, label, round(value, 6))
        if abs(value) > COMPAT_ZERO_TOL and key not in _WARNED:
            _WARNED.add(key)
            logger.warning("%s: %s compatibility at (1, 0) fails, residual %.3e",
                           problem.name, label, value)

    Tstar = exit_time(problem) if problem.a_is_time_only else None
    return CharacteristicData(
        d=lambda t: characteristic_d(problem, t),
        p=lambda t: drift_defect_p(problem, t),
        Tstar=Tstar,
        A0=A0,
        A1=A1,
        A2=A2,
        a00=a00,
        a_t00=a_t,
        a_x00=a_x,
        right_residuals=(r0, r1, r2),
        approximate=D.approximate,
    )


def _poly_x(terms):
    return Polynomial({(i, 0): c for i, c in terms.items()}, ("x",))


def _poly_t(terms):
    return Polynomial({(0, j): c for j, c in terms.items()}, ("t",))


# Shishkin transition parameter used for every built-in example. It is a valid
# lower bound for all five convection coefficients (min a = 2/3 in Example 3).
BUILTIN_ALPHA = 0.5


def builtin_example(k: int, eps: float = 1.0) -> ProblemSpec:
    """Test problems 1-5 from the numerical experiments."""
    if k not in (1, 2, 3, 4, 5):
        raise ValueError(f"example number must be in 1..5, got {k}")
    quad_x = Polynomial({(1, 0): 4.0, (2, 0): -4.0})  # 4x(1-x)
    if k == 1:
        return ProblemSpec(
            a=Polynomial({(0, 0): 1.0, (0, 2): -1.0}),
            f=Polynomial({(1, 1): 2.0}),
            phi=_poly_x({}),
            gL=_poly_t({0: 1.0, 1: 1.0}),
            gR=_poly_t({}),
            eps=eps, alpha=BUILTIN_ALPHA, T=0.5, name="example1",
        )
    if k == 2:
        return ProblemSpec(
            a=Polynomial({(0, 0): 1.0, (0, 2): -1.0}),
            f=Polynomial({(1, 1): 2.0}),
            phi=_poly_x({3: 1.0}),
            gL=_poly_t({0: 1.0, 2: 1.0}),
            gR=_poly_t({0: 1.0}),
            eps=eps, alpha=BUILTIN_ALPHA, T=0.5, name="example2",
        )
    if k == 3:
        return ProblemSpec(
            a=Polynomial({(0, 0): 1.0, (0, 2): 3.0, (0, 1): -2.0}),
            f=quad_x,
            phi=_poly_x({3: 1.0}),
            gL=_poly_t({0: 1.0, 2: 0.25}),
            gR=_poly_t({0: 1.0}),
            eps=eps, alpha=BUILTIN_ALPHA, T=1.5, name="example3",
        )
    if k == 4:
        return ProblemSpec(
            a=Polynomial({(0, 0): 1.0, (2, 0): 1.0}),
            f=quad_x,
            phi=_poly_x({}),
            gL=_poly_t({2: 1.0}),
            gR=_poly_t({2: 1.0}),
            eps=eps, alpha=BUILTIN_ALPHA, T=0.5, name="example4",
        )
    return ProblemSpec(
        a=Polynomial({(0, 0): 1.0, (1, 0): 1.0}),
        f=quad_x,
        phi=_poly_x({}),
        gL=_poly_t({1: 1.0}),
        gR=_poly_t({2: 1.0}),
        eps=eps, alpha=BUILTIN_ALPHA, T=0.5, name="example5",
    )


def describe(problem: ProblemSpec, data: CharacteristicData) -> str:
    lines = [
        f"problem {problem.name}: eps={problem.eps:g}, alpha={problem.alpha:g}, T={problem.T:g}",
        f"  A0={data.A0:.6g}  A1={data.A1:.6g}  A2={data.A2:.6g}"
        + ("  (finite-difference estimates)" if data.approximate else ""),
        f"  a(0,0)={data.a00:g}  a_t(0,0)={data.a_t00:g}  a_x(0,0)={data.a_x00:g}",
        f"  predicted rate: {data.predicted_rate}",
    ]
    if problem.a_is_time_only:
        dT = characteristic_d(problem, problem.T)
        lines.append(f"  d(T)={dT:.6g}" + (f", exit time T*={data.Tstar:.12g}" if data.Tstar else ""))
    if not math.isclose(data.a_t00, 0.0, abs_tol=COMPAT_ZERO_TOL) and problem.a_is_time_only:
        lines.append("  note: a_t(0) != 0, outside the hypotheses of the a(t) error bound")
    return "\n".join(lines)
