"""Two-mesh estimates of uniform convergence.

For each eps the discrete solutions on the (N, N) and (2N, 2N) meshes are
compared through their bilinear interpolants at the nodes of both meshes:

    D_eps^N = max |Ybar^N - Ybar^2N|,   P_eps^N = log2(D_eps^N / D_eps^2N),

and the uniform quantities take the maximum of D over the eps set.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .mesh import build_mesh
from .problem import ProblemSpec, compatibility, exit_time
from .singular import SingularBasisContext
from .solver import GridFunction, bilinear_eval, solve

logger = logging.getLogger(__name__)

TABLE_EPS = tuple(2.0**-k for k in (0, 6, 12, 18, 24, 30))
FULL_EPS = tuple(2.0**-k for k in range(31))
TABLE_N = (16, 32, 64, 128, 256)
WORKERS_ENV = "CDINCOMPAT_WORKERS"


def order_from(dN: float, d2N: float) -> float:
    if not (dN > 0 and d2N > 0):
        raise ValueError(f"orders need positive differences, got {dN!r}, {d2N!r}")
    return math.log2(dN / d2N)


def _max_difference(coarse: GridFunction, fine: GridFunction) -> float:
    worst = 0.0
    for g in (coarse, fine):
        X, Tg = np.meshgrid(g.mesh.xs, g.mesh.ts, indexing="ij")
        diff = np.abs(bilinear_eval(coarse, X, Tg) - bilinear_eval(fine, X, Tg))
        worst = max(worst, float(diff.max()))
    return worst


class _Solver:
    """Solves one problem at several resolutions, caching by (N, M).

    The mesh at a given (N, M) depends only on (N, M, eps), so the fine solve
    of one two-mesh pair is exactly the coarse solve of the next.
    """

    def __init__(self, problem: ProblemSpec, subtract_singular: Optional[bool]):
        self.problem = problem
        data = compatibility(problem)
        if subtract_singular is None:
            subtract_singular = data.incompatible
        self.subtract = subtract_singular
        self.ctx = SingularBasisContext(problem, data, data.a00) if subtract_singular else None
        self.Tstar = exit_time(problem) if problem.a_is_time_only else None
        self._cache: dict[tuple[int, int], GridFunction] = {}

    def __call__(self, N: int, M: int) -> GridFunction:
        key = (N, M)
        if key not in self._cache:
            p = self.problem
            mesh = build_mesh(N, M, p.eps, p.alpha, p.T, self.Tstar)
            try:
                self._cache[key] = solve(p, mesh, self.subtract, self.ctx)
            except (ValueError, RuntimeError) as exc:
                raise type(exc)(f"{exc} (N={N}, M={M}, eps={p.eps:g})") from exc
        return self._cache[key]


def two_mesh_difference(problem: ProblemSpec, N: int, M: int,
                        subtract_singular: Optional[bool] = None) -> float:
    """D^{N,M}: max over the nodes of both meshes of the interpolant gap."""
    solver = _Solver(problem, subtract_singular)
    return _max_difference(solver(N, M), solver(2 * N, 2 * M))


def _eps_row(args) -> list[float]:
    problem, N_list, subtract = args
    solver = _Solver(problem, subtract)
    return [_max_difference(solver(N, N), solver(2 * N, 2 * N)) for N in N_list]


@dataclass
class ConvergenceReport:
    example: str
    N_list: list[int]
    eps_list: list[float]
    D: np.ndarray  # shape (len(eps_list), len(N_list))
    time_kind: str = "uniform"
    M_rule: str = "M=N"
    subtract: bool = False
    meta: dict = field(default_factory=dict)

    def _orders(self, row: Sequence[float]) -> list[Optional[float]]:
        out = []
        for k, N in enumerate(self.N_list):
            nxt = k + 1
            if nxt < len(self.N_list) and self.N_list[nxt] == 2 * N:
                out.append(order_from(row[k], row[nxt]))
            else:
                out.append(None)
        return out

    @property
    def P(self) -> list[list[Optional[float]]]:
        return [self._orders(row) for row in self.D]

    @property
    def uniform_D(self) -> np.ndarray:
        return self.D.max(axis=0)

    @property
    def uniform_P(self) -> list[Optional[float]]:
        return self._orders(self.uniform_D)

    def D_at(self, eps: float, N: int) -> float:
        return float(self.D[self.eps_list.index(eps), self.N_list.index(N)])

    def to_csv(self, path: Optional[str | Path] = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["example", "eps", "N", "M", "D", "P"])
        rows = list(zip(self.eps_list, self.D, self.P))
        rows.append(("uniform", self.uniform_D, self.uniform_P))
        for eps, drow, prow in rows:
            label = eps if isinstance(eps, str) else repr(eps)
            for N, d, p in zip(self.N_list, drow, prow):
                writer.writerow([self.example, label, N, N, repr(float(d)),
                                 "" if p is None else repr(p)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_markdown(self, path: Optional[str | Path] = None) -> str:
        head = "| eps | " + " | ".join(f"N={N}" for N in self.N_list) + " |"
        lines = [f"Two-mesh differences D and orders P for {self.example} "
                 f"({self.time_kind} time mesh, {self.M_rule})", "", head,
                 "|" + "---|" * (len(self.N_list) + 1)]

        def emit(label, drow, prow):
            lines.append(f"| {label} | " + " | ".join(f"{d:.3e}" for d in drow) + " |")
            lines.append("| | " + " | ".join("" if p is None else f"{p:.3f}" for p in prow)
                         + " |")

        for eps, drow, prow in zip(self.eps_list, self.D, self.P):
            emit(_eps_label(eps), drow, prow)
        emit("uniform", self.uniform_D, self.uniform_P)
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def _eps_label(eps: float) -> str:
    k = -math.log2(eps)
    if k == int(k):
        return f"2^-{int(k)}" if k else "2^0"
    return f"{eps:g}"


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    return max(1, n)


def sweep(problem: ProblemSpec, N_list: Sequence[int] = TABLE_N,
          eps_set: Sequence[float] = TABLE_EPS,
          subtract_singular: Optional[bool] = None,
          workers: Optional[int] = None) -> ConvergenceReport:
    """Two-mesh differences for every (eps, N); rows come back in eps order."""
    N_list = [int(N) for N in N_list]
    eps_list = [float(e) for e in eps_set]
    if not eps_list:
        raise ValueError("eps set is empty")
    if sorted(N_list) != N_list or len(set(N_list)) != len(N_list):
        raise ValueError("N list must be strictly increasing")
    if subtract_singular is None:
        subtract_singular = compatibility(problem).incompatible
    tasks = [(problem.with_eps(e), N_list, subtract_singular) for e in eps_list]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            rows = list(pool.map(_eps_row, tasks))
    else:
        rows = [_eps_row(task) for task in tasks]
    Tstar = exit_time(problem) if problem.a_is_time_only else None
    return ConvergenceReport(
        example=problem.name,
        N_list=N_list,
        eps_list=eps_list,
        D=np.array(rows),
        time_kind="interaction" if Tstar is not None else "uniform",
        subtract=bool(subtract_singular),
        meta={"Tstar": Tstar, "alpha": problem.alpha, "T": problem.T},
    )
