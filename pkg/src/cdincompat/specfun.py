"""Iterated complementary error functions and related kernels.

All functions accept scalars or numpy arrays and return the same shape.
The scaled family ``H_n(r) = exp(r**2) * erfc_n(r)`` is the workhorse: the
singular basis functions multiply huge exponentials by tiny tails, and the
product is only representable in the scaled form.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

SQRT_PI = math.sqrt(math.pi)
TWO_OVER_SQRT_PI = 2.0 / SQRT_PI

# e^{r^2} overflow guard: switch the Mill's ratio to its asymptotic series
# once the exponent r^2 reaches 300.
ASYMPTOTIC_THRESHOLD = math.sqrt(300.0)
MILLS_TERMS = 5

# Forward recurrence amplifies rounding by roughly (1 + 2 r^2)^n; it is used
# while that factor stays below _FORWARD_GROWTH, Miller's backward scheme
# beyond. Miller start offsets per argument band (lower edge, extra terms).
_FORWARD_GROWTH = 1e3
_MILLER_BANDS = ((1.0, 300), (1.5, 160), (2.5, 90), (5.0, 60))
MAX_ORDER = 8


def _as_float(x):
    return np.asarray(x, dtype=float)


def _unwrap(value, like):
    if np.ndim(like) == 0:
        return float(value)
    return value


def mills_ratio(r):
    """Mill's ratio ``H(r) = exp(r**2) * erfc(r)`` for ``r >= 0``.

    For ``r >= sqrt(300)`` the five-term partial sum of the asymptotic series
    is used; below that the scaled erfc is evaluated directly.
    """
    r_arr = _as_float(r)
    if np.any(r_arr < 0) or np.any(np.isnan(r_arr)):
        raise ValueError("mills_ratio requires r >= 0")
    out = np.empty_like(r_arr)
    big = r_arr >= ASYMPTOTIC_THRESHOLD
    small = ~big
    out[small] = special.erfcx(r_arr[small])
    if np.any(big):
        rb = r_arr[big]
        inv = 1.0 / (2.0 * rb * rb)
        total = np.ones_like(rb)
        term = np.ones_like(rb)
        for m in range(1, MILLS_TERMS + 1):
            term = -term * (2 * m - 1) * inv
            total += term
        out[big] = total / (rb * SQRT_PI)
    return _unwrap(out, r)


def _asymptotic_scaled(n: int, r: np.ndarray) -> np.ndarray:
    # H_n(r) ~ 2/(sqrt(pi) (2r)^{n+1}) * sum_m (-1)^m (2m+n)! / (n! m! (2r)^{2m})
    two_r = 2.0 * r
    inv_sq = 1.0 / (two_r * two_r)
    term = np.ones_like(r)
    total = np.ones_like(r)
    for m in range(1, 60):
        term = -term * (2 * m + n - 1) * (2 * m + n) / m * inv_sq
        total += term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return TWO_OVER_SQRT_PI * total / two_r ** (n + 1)


def _forward_limit(n: int) -> float:
    return max(1.0, math.sqrt(0.5 * (_FORWARD_GROWTH ** (1.0 / n) - 1.0)))


def _miller_scaled(n: int, r: np.ndarray, h0: np.ndarray, extra: int) -> np.ndarray:
    """Backward recurrence normalised by ``H_0``; stable for r > 0."""
    start = n + extra
    upper = np.zeros_like(r)
    current = np.full_like(r, 1e-300)
    kept = None
    # k H_k + r H_{k-1} = H_{k-2} / 2, run downwards from index ``start``
    for k in range(start + 1, 1, -1):
        upper, current = current, 2.0 * (k * upper + r * current)
        scale = np.where(np.abs(current) > 1e250, 1e-250, 1.0)
        current = current * scale
        upper = upper * scale
        if kept is not None:
            kept = kept * scale
        if k - 2 == n:
            kept = current.copy()
    return kept * (h0 / current)


def scaled_erfc_iter(n: int, r):
    """``exp(r**2) * erfc_n(r)`` for ``r >= 0`` without intermediate overflow."""
    if n < -1:
        raise ValueError(f"order must be >= -1, got {n}")
    r_arr = _as_float(r)
    if np.any(r_arr < 0) or np.any(np.isnan(r_arr)):
        raise ValueError("scaled_erfc_iter requires r >= 0")
    if n == -1:
        return _unwrap(np.full_like(r_arr, TWO_OVER_SQRT_PI), r)
    h0 = _as_float(mills_ratio(r_arr))
    if n == 0:
        return _unwrap(h0, r)

    out = np.empty_like(r_arr)
    low = r_arr < _forward_limit(n)
    high = r_arr >= ASYMPTOTIC_THRESHOLD
    mid = ~(low | high)
    if np.any(low):
        rl = r_arr[low]
        prev, cur = np.full_like(rl, TWO_OVER_SQRT_PI), h0[low]
        for k in range(1, n + 1):
            prev, cur = cur, (0.5 * prev - rl * cur) / k
        out[low] = cur
    if np.any(mid):
        edges = [edge for edge, _ in _MILLER_BANDS[1:]] + [np.inf]
        for (lo_edge, extra), hi_edge in zip(_MILLER_BANDS, edges):
            band = mid & (r_arr >= lo_edge) & (r_arr < hi_edge)
            if np.any(band):
                out[band] = _miller_scaled(n, r_arr[band], h0[band], extra)
    if np.any(high):
        out[high] = _asymptotic_scaled(n, r_arr[high])
    return _unwrap(out, r)


def _modified_hermite(n: int, y: np.ndarray) -> np.ndarray:
    # i^{-n} H_n(i y): K_0 = 1, K_1 = 2y, K_{k+1} = 2y K_k + 2k K_{k-1}
    prev = np.ones_like(y)
    if n == 0:
        return prev
    cur = 2.0 * y
    for k in range(1, n):
        prev, cur = cur, 2.0 * y * cur + 2.0 * k * prev
    return cur


def erfc_iter(n: int, x):
    """Iterated complementary error function ``erfc_n(x)``, ``n >= -1``.

    ``erfc_{-1}(x) = 2/sqrt(pi) exp(-x^2)`` and ``erfc_0 = erfc``. Negative
    arguments go through the Hermite reflection formula.
    """
    if n < -1:
        raise ValueError(f"order must be >= -1, got {n}")
    x_arr = _as_float(x)
    if not np.all(np.isfinite(x_arr)):
        raise ValueError("erfc_iter requires finite arguments")
    if n == -1:
        return _unwrap(TWO_OVER_SQRT_PI * np.exp(-x_arr * x_arr), x)
    if n == 0:
        return _unwrap(special.erfc(x_arr), x)

    out = np.empty_like(x_arr)
    pos = x_arr >= 0
    xp = x_arr[pos]
    with np.errstate(under="ignore"):
        out[pos] = _as_float(scaled_erfc_iter(n, xp)) * np.exp(-xp * xp)
    if np.any(~pos):
        y = -x_arr[~pos]
        with np.errstate(under="ignore"):
            mirror = _as_float(scaled_erfc_iter(n, y)) * np.exp(-y * y)
        poly = _modified_hermite(n, y) / (2.0 ** (n - 1) * math.factorial(n))
        out[~pos] = poly - (-1) ** n * mirror
    return _unwrap(out, x)


def layer_kernel(x, t, d_of_t, eps: float, gamma: float = 1.0):
    """Interior-layer kernel ``exp(-gamma (x - d(t))^2 / (4 eps t))``."""
    t_arr = _as_float(t)
    if np.any(t_arr <= 0):
        raise ValueError("layer_kernel requires t > 0")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    z = _as_float(x) - _as_float(d_of_t)
    out = np.exp(-gamma * z * z / (4.0 * eps * t_arr))
    if np.ndim(out) == 0:
        return float(out)
    return out


def hermite_eval(n: int, x):
    """Physicists' Hermite polynomial by three-term recurrence.

    Plain arithmetic only, so complex arguments work too.
    """
    if n < 0:
        raise ValueError("Hermite degree must be >= 0")
    prev = 1.0 + 0.0 * x
    if n == 0:
        return prev
    cur = 2.0 * x
    for k in range(1, n):
        prev, cur = cur, 2.0 * x * cur - 2.0 * k * prev
    return cur
