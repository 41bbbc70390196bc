"""Acceptance criteria 1-10.

Each criterion is a check function returning (passed, detail). Under pytest
every criterion is a test and a summary block with one PASS/FAIL line per
criterion is printed at the end of the run; running this file directly
prints the same block.
"""

from __future__ import annotations

import logging
import math
import time
from functools import lru_cache

import numpy as np
import pytest
from scipy import special

import reference_tables as ref
from cdincompat.analysis import TABLE_EPS, sweep
from cdincompat.mesh import build_mesh
from cdincompat.polynomial import Polynomial
from cdincompat.problem import ProblemSpec, builtin_example
from cdincompat.singular import BOUND_SET, SingularBasisContext, S_eval, bound_diagnostics, psi
from cdincompat.solver import solve
from cdincompat.specfun import erfc_iter, hermite_eval, mills_ratio, scaled_erfc_iter
from oracles import erfc_iter_ref, rel_err, scaled_erfc_iter_ref

logging.getLogger("cdincompat").setLevel(logging.ERROR)

D_RTOL = 0.02
P_ATOL = 0.02
N_CHECK = (16, 32, 64, 128, 256)
N_SWEEP = (16, 32, 64, 128, 256, 512)  # N = 512 supplies the order at N = 256
DIAG_EPS = tuple(2.0**-k for k in range(21))
DIAG_RATIO = 10.0
# Literal profile lacks an additive constant; see the ledger. Its "+C" variant is checked instead.
DIAG_KNOWN_INVALID = ("S2_xx",)

RESULTS: dict[int, tuple[bool, str]] = {}


@lru_cache(maxsize=None)
def report(k: int):
    return sweep(builtin_example(k), N_SWEEP, TABLE_EPS)


def _table_check(k: int) -> tuple[bool, str]:
    rep = report(k)
    ncol = len(N_CHECK)
    D = np.vstack([rep.D, rep.uniform_D])[:, :ncol]
    P = np.array([row[:ncol] for row in [*rep.P, rep.uniform_P]], dtype=float)
    D_ref = np.array(ref.D[k])[:, :ncol]
    P_ref = np.array(ref.P[k])[:, :ncol]
    dD = float(np.max(np.abs(D / D_ref - 1)))
    dP = float(np.max(np.abs(P - P_ref)))
    ok = dD <= D_RTOL and dP <= P_ATOL
    return ok, f"max rel dev D {dD:.2e} (tol {D_RTOL}), max abs dev P {dP:.4f} (tol {P_ATOL})"


def criterion_1():
    ok, detail = _table_check(1)
    rep = report(1)
    anchors = (rep.D_at(1.0, 16), rep.D_at(2.0**-30, 64), rep.uniform_P[3])
    ok = (ok and math.isclose(anchors[0], 2.593e-3, rel_tol=D_RTOL)
          and math.isclose(anchors[1], 1.609e-2, rel_tol=D_RTOL) and abs(anchors[2] - 0.516) <= P_ATOL)
    return ok, detail + f"; anchors {anchors[0]:.4e}, {anchors[1]:.4e}, P128={anchors[2]:.3f}"


def criterion_2():
    ok, detail = _table_check(2)
    rep = report(2)
    D16, P16 = rep.uniform_D[0], rep.uniform_P[0]
    ok = ok and math.isclose(D16, 6.969e-2, rel_tol=D_RTOL) and abs(P16 - 0.939) <= P_ATOL
    return ok, detail + f"; uniform N=16: D={D16:.4e}, P={P16:.3f}"


def criterion_3():
    ok, detail = _table_check(4)
    rep = report(4)
    D16, P16 = rep.uniform_D[0], rep.uniform_P[0]
    ok = ok and not rep.subtract and math.isclose(D16, 3.126e-2, rel_tol=D_RTOL) and abs(P16 - 0.637) <= P_ATOL
    return ok, detail + f"; uniform N=16: D={D16:.4e}, P={P16:.3f}"


def criterion_4():
    ok, detail = _table_check(5)
    P = report(5).uniform_P[: len(N_CHECK)]
    in_band = all(0.49 <= p <= 0.56 for p in P)
    return ok and in_band, detail + "; uniform P " + ", ".join(f"{p:.3f}" for p in P)


def criterion_5():
    rep = report(3)
    D = rep.uniform_D[: len(N_CHECK)]
    P = rep.uniform_P[: len(N_CHECK)]
    decreasing = bool(np.all(np.diff(rep.uniform_D) < 0))
    band = all(0.3 <= p <= 1.1 for p in P)
    late = all(p >= 0.6 for N, p in zip(N_CHECK, P) if N >= 64)
    detail = (f"time mesh {rep.time_kind}; uniform D " + ", ".join(f"{d:.3e}" for d in D)
              + "; P " + ", ".join(f"{p:.3f}" for p in P))
    return rep.time_kind == "interaction" and decreasing and band and late, detail


def criterion_6():
    parts, ok = [], True
    for k, lo, hi in ((1, 0.45, 0.56), (2, 0.82, 1.0), (4, 0.82, 1.0)):
        rep = report(k)
        P = [p for N, p in zip(rep.N_list, rep.uniform_P) if N >= 128 and p is not None]
        ok = ok and all(lo <= p <= hi for p in P)
        parts.append(f"ex{k} " + "/".join(f"{p:.3f}" for p in P) + f" in [{lo}, {hi}]")
    return ok, "; ".join(parts)


def criterion_7():
    start = time.perf_counter()
    worst = {}
    x = np.linspace(-5, 5, 200)
    worst["identity"] = max(
        float(np.max(np.abs(n * erfc_iter(n, x) + x * erfc_iter(n - 1, x) - 0.5 * erfc_iter(n - 2, x))
                     / np.maximum(1.0, np.abs(erfc_iter(n - 2, x)))))
        for n in range(1, 7))
    xr = np.linspace(0, 4, 81)
    worst["reflection"] = max(
        float(np.max(np.abs((-1) ** n * erfc_iter(n, xr) + erfc_iter(n, -xr)
                            - np.real(1j ** (-n) * hermite_eval(n, 1j * xr)) / (2.0 ** (n - 1) * math.factorial(n)))
                     / np.maximum(1.0, np.abs(np.real(1j ** (-n) * hermite_eval(n, 1j * xr))
                                                  / (2.0 ** (n - 1) * math.factorial(n))))))
        for n in range(0, 6))
    r = np.linspace(0, 50, 1000)[1:]
    H = mills_ratio(r)
    lower = 1 / ((math.pi - 1) / math.sqrt(math.pi) * r + np.sqrt(1 + r * r / math.pi))
    upper = 1 / (2 / math.sqrt(math.pi) * r + np.sqrt(1 + (math.pi - 2) ** 2 * r * r / math.pi))
    bracket = bool(np.all((H > lower) & (H < upper))) and mills_ratio(0.0) == 1.0
    worst["oracle erfc_n"] = max(rel_err(erfc_iter(n, v), erfc_iter_ref(n, v))
                                 for n in (1, 3, 5, 8) for v in (-7.5, -1.0, 0.3, 2.5, 6.0, 10.0))
    worst["oracle H_n"] = max(rel_err(scaled_erfc_iter(n, v), scaled_erfc_iter_ref(n, v))
                              for n in (0, 2, 5, 8) for v in (0.5, 1.3, 4.0, 17.0, 17.4, 50.0, 1e4))
    elapsed = time.perf_counter() - start
    tol = {"identity": 1e-12, "reflection": 1e-10, "oracle erfc_n": 1e-12, "oracle H_n": 1e-10}
    ok = bracket and elapsed < 10 and all(worst[k] <= tol[k] for k in tol)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    return ok, detail + f", Mill's bracket {'holds' if bracket else 'violated'}, {elapsed:.1f} s"


def _const_ctx():
    problem = ProblemSpec(
        a=Polynomial.constant(1.0), f=Polynomial({}), phi=Polynomial({}, ("x",)),
        gL=Polynomial.constant(1.0, ("t",)), gR=Polynomial({}, ("t",)), eps=0.1, alpha=1.0, T=0.5)
    return SingularBasisContext.for_problem(problem)


def criterion_8():
    rng = np.random.default_rng(11)
    worst_rec = 0.0
    for eps in (1.0, 2.0**-6, 2.0**-20):
        ctx = SingularBasisContext.for_problem(builtin_example(1, eps))
        x, t = rng.uniform(0, 1, 500), rng.uniform(1e-4, 0.5, 500)
        d = ctx.chardata.d(t)
        for sign, shift in (("+", x + d), ("-", x - d)):
            for n in range(2, 6):
                lhs = psi(ctx, sign, n, x, t)
                rhs = shift * psi(ctx, sign, n - 1, x, t) + 2 * (n - 1) * eps * t * psi(ctx, sign, n - 2, x, t)
                worst_rec = max(worst_rec, float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(lhs)))))
    ctx = _const_ctx()
    X, T = np.meshgrid(np.linspace(0.1, 0.9, 9), np.linspace(0.1, 0.45, 8))
    min_order = np.inf
    for sign in "+-":
        for n in range(3):
            def res(h):
                f = lambda x, t: psi(ctx, sign, n, x, t)
                return np.max(np.abs(-ctx.eps * (f(X + h, T) - 2 * f(X, T) + f(X - h, T)) / h**2
                                     + (f(X + h, T) - f(X - h, T)) / (2 * h)
                                     + (f(X, T + h) - f(X, T - h)) / (2 * h)))
            min_order = min(min_order, math.log2(res(5e-3) / res(2.5e-3)))
    ctx1 = SingularBasisContext.for_problem(builtin_example(1, 2.0**-10))
    t = np.geomspace(1e-6, 0.5, 50)
    left = float(np.max(np.abs(S_eval(ctx1, 0, 0.0, t) - 1.0)))
    initial = float(np.max(np.abs(S_eval(ctx1, 0, np.linspace(0.01, 1, 50), 1e-12))))
    ok = worst_rec <= 1e-10 and min_order >= 1.9 and left <= 1e-15 and initial <= 1e-15
    return ok, (f"recurrence residual {worst_rec:.1e}, L-annihilation order {min_order:.3f}, "
                f"|S0(0,t)-1| {left:.1e}, |S0(x,0+)| {initial:.1e}")


def criterion_9():
    from test_solver import linear_problem, random_nonnegative_problem

    rng = np.random.default_rng(2024)
    min_value = np.inf
    for _ in range(50):
        problem = random_nonnegative_problem(rng)
        mesh = build_mesh(int(rng.choice([8, 16, 32])), int(rng.choice([8, 16, 32])),
                          problem.eps, problem.alpha, problem.T)
        min_value = min(min_value, float(solve(problem, mesh, False).values.min()))
    lin_err = 0.0
    for eps in (1.0, 2.0**-10, 2.0**-30):
        for N, M in ((8, 8), (32, 16), (64, 128)):
            problem = linear_problem(0.3, -1.7, 2.2, a=1.5, eps=eps)
            mesh = build_mesh(N, M, eps, problem.alpha, problem.T)
            X, T = np.meshgrid(mesh.xs, mesh.ts, indexing="ij")
            Y = solve(problem, mesh, False).values
            lin_err = max(lin_err, float(np.max(np.abs(Y - (0.3 - 1.7 * X + 2.2 * T)))))
    problem = builtin_example(1, 2.0**-12)
    mesh = build_mesh(64, 64, problem.eps, problem.alpha, problem.T)
    same = solve(problem, mesh, True).values.tobytes() == solve(problem, mesh, True).values.tobytes()
    ok = min_value >= 0 and lin_err <= 1e-12 and same
    return ok, f"min over 50 nonnegative problems {min_value:.2e}, linear error {lin_err:.1e}, bit-identical {same}"


@lru_cache(maxsize=None)
def diagnostic_ratios() -> dict[str, float]:
    ctx = SingularBasisContext.for_problem(builtin_example(1))
    rows = bound_diagnostics(ctx, DIAG_EPS)
    table: dict[str, list[float]] = {}
    for row in rows:
        table.setdefault(row.bound_id, []).append(row.C_emp)
    return {bid: max(v) / min(v) for bid, v in table.items()}


def criterion_10():
    ratios = diagnostic_ratios()
    bad = sorted(b for b, r in ratios.items() if not r <= DIAG_RATIO)
    valid = {b: r for b, r in ratios.items() if b not in DIAG_KNOWN_INVALID}
    detail = (f"{len(ratios)} bounds over eps = 2^0..2^-20; worst ratio among the rest "
              f"{max((r for b, r in valid.items() if b not in bad), default=float('nan')):.2f}")
    if bad:
        detail += "; exceeding " + ", ".join(f"{b} ({ratios[b]:.1e})" for b in bad)
    return not bad, detail


CRITERIA = {
    1: ("Table 1 reproduction, example 1", criterion_1),
    2: ("Table 2 reproduction, example 2", criterion_2),
    3: ("Table 4 reproduction, example 4", criterion_3),
    4: ("Table 5 reproduction, example 5", criterion_4),
    5: ("Table 3 qualitative, example 3 with interaction time mesh", criterion_5),
    6: ("rate regimes for N >= 128", criterion_6),
    7: ("special-function suite", criterion_7),
    8: ("singular-function suite", criterion_8),
    9: ("solver property suite", criterion_9),
    10: ("uniformity of empirical bound constants", criterion_10),
}


def evaluate(k: int) -> tuple[bool, str]:
    if k not in RESULTS:
        RESULTS[k] = CRITERIA[k][1]()
    return RESULTS[k]


def summary_lines() -> list[str]:
    lines = []
    for k, (title, _) in CRITERIA.items():
        if k in RESULTS:
            ok, detail = RESULTS[k]
            lines.append(f"[{'PASS' if ok else 'FAIL'}] criterion {k}: {title} -- {detail}")
    return lines


@pytest.mark.parametrize("k", range(1, 10))
def test_criterion(k):
    ok, detail = evaluate(k)
    assert ok, detail


def test_criterion_10_valid_bounds():
    evaluate(10)
    ratios = diagnostic_ratios()
    bad = {b: r for b, r in ratios.items() if b not in DIAG_KNOWN_INVALID and not r <= DIAG_RATIO}
    assert not bad, bad
    assert ratios["S2_xx_c"] <= DIAG_RATIO


@pytest.mark.xfail(strict=True, reason="S2_xx profile as printed has no additive constant; "
                                       "S2 ~ (x - d)^2 / a(0,0)^2 behind the layer")
@pytest.mark.parametrize("bound_id", DIAG_KNOWN_INVALID)
def test_criterion_10_literal_profile(bound_id):
    assert diagnostic_ratios()[bound_id] <= DIAG_RATIO


def test_literal_S2_xx_counterexample():
    # behind the layer the second derivative tends to 2 / a(0,0)^2 while the profile vanishes
    ctx = SingularBasisContext.for_problem(builtin_example(1, 2.0**-16))
    t, h = 0.4, 1e-3
    x = 0.1
    second = (S_eval(ctx, 2, x + h, t) - 2 * S_eval(ctx, 2, x, t) + S_eval(ctx, 2, x - h, t)) / h**2
    assert second == pytest.approx(2.0 / ctx.a00**2, rel=1e-6)
    d = ctx.chardata.d(t)
    profile = (1 + math.sqrt(t / ctx.eps)) * math.exp(-0.9 * (x - d) ** 2 / (4 * ctx.eps * t))
    assert profile < 1e-100


if __name__ == "__main__":
    for k in CRITERIA:
        evaluate(k)
    print("\n".join(summary_lines()))
