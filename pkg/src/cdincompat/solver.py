"""Upwind finite differences with backward Euler on a tensor mesh.

Each time level solves

    -eps delta2_x Y + a D-_x Y + D-_t Y = RHS

at the interior nodes, a tridiagonal M-matrix system handled by Thomas
elimination without pivoting.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .mesh import TensorMesh
from .problem import ProblemSpec, compatibility
from .singular import SingularBasisContext, S_eval, modified_boundary, modified_rhs

# Rounding slack on the dominance margin, in units of the row magnitude.
_DOMINANCE_SLACK = 64 * np.finfo(float).eps


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridFunction:
    """Nodal values ``values[i, j]`` at ``(mesh.xs[i], mesh.ts[j])``."""

    mesh: TensorMesh
    values: np.ndarray
    subtracted: bool = False
    A0: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        expected = (self.mesh.N + 1, self.mesh.M + 1)
        if values.shape != expected:
            raise ValueError(f"values have shape {values.shape}, mesh needs {expected}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def corner_discontinuous(self) -> bool:
        """True for a reconstructed U whose data jump at (0, 0)."""
        return not self.subtracted and self.A0 != 0.0

    def write_surface(self, path: str | Path) -> None:
        write_surface(self, path)


def _thomas(lower: list, diag: list, upper: list, rhs: list) -> list:
    # lower[0] and upper[-1] are unused
    n = len(diag)
    c = [0.0] * n
    d = [0.0] * n
    beta = diag[0]
    c[0] = upper[0] / beta
    d[0] = rhs[0] / beta
    for i in range(1, n):
        beta = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / beta
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta
    for i in range(n - 2, -1, -1):
        d[i] -= c[i] * d[i + 1]
    return d


def _boundary_data(problem: ProblemSpec, ctx: Optional[SingularBasisContext], ts: np.ndarray):
    if ctx is None:
        left = np.asarray(problem.gL(ts), dtype=float) * np.ones_like(ts)
        right = np.asarray(problem.gR(ts), dtype=float) * np.ones_like(ts)
    else:
        left = np.asarray(modified_boundary(ctx, "left", ts), dtype=float)
        right = np.asarray(modified_boundary(ctx, "right", ts), dtype=float)
    return left, right


def solve(
    problem: ProblemSpec,
    mesh: TensorMesh,
    subtract_singular: bool,
    ctx: Optional[SingularBasisContext] = None,
) -> GridFunction:
    """Discrete solution on ``mesh``; Y approximates u - A0 S0 when subtracting."""
    if subtract_singular:
        if not problem.a_is_time_only:
            raise ValueError("subtracting the singular part needs a = a(t)")
        if ctx is None:
            ctx = SingularBasisContext.for_problem(problem)
    else:
        ctx = None
    eps = problem.eps
    xs, ts = mesh.xs, mesh.ts
    N, M = mesh.N, mesh.M
    h = np.diff(xs)
    h_left, h_right = h[:-1], h[1:]
    x_in = xs[1:-1]
    Y = np.empty((N + 1, M + 1))
    Y[:, 0] = np.asarray(problem.phi(xs), dtype=float) * np.ones_like(xs)
    left, right = _boundary_data(problem, ctx, ts[1:])
    Y[0, 1:] = left
    Y[N, 1:] = right

    diff_lower = -2.0 * eps / ((h_left + h_right) * h_left)
    upper = -2.0 * eps / ((h_left + h_right) * h_right)
    for j in range(1, M + 1):
        t = float(ts[j])
        k = t - float(ts[j - 1])
        a_vals = np.asarray(problem.a(x_in, t), dtype=float) * np.ones_like(x_in)
        lower = diff_lower - a_vals / h_left
        diag = -(lower + upper) + 1.0 / k
        margin = diag - np.abs(lower) - np.abs(upper)
        slack = _DOMINANCE_SLACK * (diag + np.abs(lower) + np.abs(upper))
        if np.any(margin < 1.0 / k - slack):
            i = int(np.argmin(margin)) + 1
            raise SolverError(f"row {i} at time level {j} is not diagonally dominant")
        if ctx is None:
            source = np.asarray(problem.f(x_in, t), dtype=float) * np.ones_like(x_in)
        else:
            source = np.asarray(modified_rhs(ctx, x_in, t), dtype=float)
        rhs = source + Y[1:-1, j - 1] / k
        rhs[0] -= lower[0] * Y[0, j]
        rhs[-1] -= upper[-1] * Y[N, j]
        bad = ~np.isfinite(rhs)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0]) + 1
            raise ValueError(f"non-finite right-hand side at node (i={i}, j={j})")
        Y[1:-1, j] = _thomas(lower.tolist(), diag.tolist(), upper.tolist(), rhs.tolist())
    if not np.all(np.isfinite(Y)):
        raise SolverError("solution contains non-finite values")
    A0 = ctx.A0 if ctx is not None else 0.0
    return GridFunction(mesh, Y, subtracted=ctx is not None, A0=A0)


def bilinear_eval(g: GridFunction, x, t):
    """Tensor-product piecewise-bilinear interpolant of ``g`` at (x, t)."""
    xs, ts = g.mesh.xs, g.mesh.ts
    x_arr, t_arr = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    tol = 1e-12
    if (np.any(x_arr < xs[0] - tol) or np.any(x_arr > xs[-1] + tol)
            or np.any(t_arr < ts[0] - tol) or np.any(t_arr > ts[-1] + tol)):
        raise ValueError("point outside the mesh domain")
    i = np.clip(np.searchsorted(xs, x_arr, side="right") - 1, 0, len(xs) - 2)
    j = np.clip(np.searchsorted(ts, t_arr, side="right") - 1, 0, len(ts) - 2)
    sx = (x_arr - xs[i]) / (xs[i + 1] - xs[i])
    st = (t_arr - ts[j]) / (ts[j + 1] - ts[j])
    V = g.values
    out = ((1 - sx) * (1 - st) * V[i, j] + sx * (1 - st) * V[i + 1, j]
           + (1 - sx) * st * V[i, j + 1] + sx * st * V[i + 1, j + 1])
    return float(out) if out.ndim == 0 else out


def reconstruct_U(ctx: SingularBasisContext, y: GridFunction) -> GridFunction:
    """U = Y + A0 S0 at t > 0; the initial row keeps phi."""
    if not y.subtracted or ctx.A0 == 0:
        return GridFunction(y.mesh, y.values, subtracted=False, A0=0.0)
    mesh = y.mesh
    X, Tg = np.meshgrid(mesh.xs, mesh.ts[1:], indexing="ij")
    U = np.array(y.values, copy=True)
    U[:, 1:] += ctx.A0 * S_eval(ctx, 0, X, Tg)
    U[:, 0] = np.asarray(ctx.problem.phi(mesh.xs), dtype=float) * np.ones_like(mesh.xs)
    U[0, 0] = float(ctx.problem.gL(0.0))
    return GridFunction(mesh, U, subtracted=False, A0=ctx.A0)


def write_surface(g: GridFunction, path: str | Path) -> None:
    """``x t value`` triples, one block per time level, blank line between blocks."""
    xs, ts, V = g.mesh.xs, g.mesh.ts, g.values
    with open(path, "w") as fh:
        for j, t in enumerate(ts):
            if j:
                fh.write("\n")
            for i, x in enumerate(xs):
                fh.write(f"{float(x)!r} {float(t)!r} {float(V[i, j])!r}\n")


def solve_problem(problem: ProblemSpec, mesh: TensorMesh, subtract: Optional[bool] = None):
    """Solve, deciding on subtraction from A0 when ``subtract`` is None."""
    ctx = None
    if subtract is None:
        data = compatibility(problem)
        subtract = data.incompatible
        if subtract:
            ctx = SingularBasisContext(problem, data, data.a00)
    return solve(problem, mesh, subtract, ctx)
