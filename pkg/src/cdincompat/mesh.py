"""Piecewise-uniform Shishkin meshes in space and time."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class TensorMesh:
    xs: np.ndarray
    ts: np.ndarray
    sigma: float
    time_kind: str = "uniform"
    Tstar: Optional[float] = None
    tau: Optional[float] = None

    def __post_init__(self):
        for arr in (self.xs, self.ts):
            arr.flags.writeable = False

    @property
    def N(self) -> int:
        return len(self.xs) - 1

    @property
    def M(self) -> int:
        return len(self.ts) - 1

    @property
    def h(self) -> np.ndarray:
        """Spatial steps; ``h[i-1]`` is h_i = x_i - x_{i-1}."""
        return np.diff(self.xs)

    @property
    def k(self) -> np.ndarray:
        return np.diff(self.ts)

    def steps_at(self, i: int) -> tuple[float, float]:
        """(h_i, h_{i+1}) around interior node i."""
        if not 0 < i < self.N:
            raise IndexError(f"node {i} is not interior")
        return float(self.xs[i] - self.xs[i - 1]), float(self.xs[i + 1] - self.xs[i])

    def write_csv(self, path: str | Path) -> None:
        """Dump both coordinate lists as (axis, index, coordinate) rows."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["axis", "index", "coordinate"])
            for axis, arr in (("x", self.xs), ("t", self.ts)):
                for i, v in enumerate(arr):
                    writer.writerow([axis, i, repr(float(v))])


def transition_parameter(N: int, eps: float, alpha: float) -> float:
    return min(0.5, eps / alpha * math.log(N))


def _piecewise(breaks: list[float], counts: list[int]) -> np.ndarray:
    pieces = [np.array([breaks[0]])]
    for a, b, n in zip(breaks[:-1], breaks[1:], counts):
        seg = a + (b - a) * np.arange(1, n + 1) / n
        seg[-1] = b
        pieces.append(seg)
    return np.concatenate(pieces)


def shishkin_space(N: int, eps: float, alpha: float) -> np.ndarray:
    """N/2 uniform cells on [0, 1 - sigma] and N/2 on [1 - sigma, 1]."""
    if N < 4 or N % 2:
        raise ValueError(f"N must be an even integer >= 4, got {N}")
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    sigma = transition_parameter(N, eps, alpha)
    return _piecewise([0.0, 1.0 - sigma, 1.0], [N // 2, N // 2])


def interaction_width(M: int, T: float, Tstar: float, eps: float) -> float:
    return min(Tstar / 2.0, (T - Tstar) / 2.0, math.sqrt(eps) * math.log(M))


def time_mesh(M: int, T: float, Tstar: Optional[float] = None, eps: float = 1.0) -> np.ndarray:
    """Uniform time levels, or a mesh refined either side of the exit time.

    With ``Tstar`` the intervals [0, T*-tau], [T*-tau, T*+tau], [T*+tau, T]
    receive M/4, M/2 and M/4 uniform steps.
    """
    if M < 4:
        raise ValueError(f"M must be >= 4, got {M}")
    if Tstar is None:
        if M % 2:
            raise ValueError(f"M must be even, got {M}")
        ts = T * np.arange(M + 1) / M
        ts[-1] = T
        return ts
    if not 0 < Tstar < T:
        raise ValueError(f"exit time {Tstar} outside (0, {T})")
    if M % 4:
        raise ValueError(f"interaction time mesh needs M divisible by 4, got {M}")
    tau = interaction_width(M, T, Tstar, eps)
    return _piecewise([0.0, Tstar - tau, Tstar + tau, T], [M // 4, M // 2, M // 4])


def build_mesh(
    N: int,
    M: int,
    eps: float,
    alpha: float,
    T: float,
    Tstar: Optional[float] = None,
) -> TensorMesh:
    xs = shishkin_space(N, eps, alpha)
    ts = time_mesh(M, T, Tstar, eps)
    if Tstar is None:
        return TensorMesh(xs, ts, transition_parameter(N, eps, alpha))
    return TensorMesh(
        xs, ts, transition_parameter(N, eps, alpha), "interaction", Tstar,
        interaction_width(M, T, Tstar, eps),
    )
