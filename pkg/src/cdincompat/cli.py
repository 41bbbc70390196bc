"""Command-line front end.

    cdincompat run --example 1 --N 16..256 --surface-at 2^-10,64,64
    cdincompat run --problem-file my.cfg --eps 2^-4,2^-8
    cdincompat describe --example 3
    cdincompat diagnostics --example 1 --out-dir diag
"""

from __future__ import annotations

import argparse
import logging
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .analysis import FULL_EPS, TABLE_EPS, TABLE_N, sweep
from .mesh import build_mesh
from .polynomial import Polynomial, parse_polynomial
from .problem import (
    CORNER_DERIVATIVE_KEYS,
    ProblemSpec,
    builtin_example,
    compatibility,
    describe,
    exit_time,
)
from .singular import SingularBasisContext, bound_diagnostics, write_diagnostics_csv
from .solver import reconstruct_U, solve, write_surface

logger = logging.getLogger("cdincompat")

_POLY_KEYS = {"a": ("x", "t"), "f": ("x", "t"), "phi": ("x",), "gL": ("t",), "gR": ("t",)}
_REAL_KEYS = ("eps", "alpha", "T")
_FILE_CORNER_KEYS = ("phi2_0", "phi3_0", "phi4_0", "gL1_0")


class ConfigError(ValueError):
    pass


# --- problem files ------------------------------------------------------------


def parse_real(text: str) -> float:
    """A real number, also accepting ``2^-k`` / ``2**-k`` powers of two."""
    s = text.strip()
    m = re.fullmatch(r"2\s*(?:\^|\*\*)\s*\(?\s*(-?\d+)\s*\)?", s)
    if m:
        return 2.0 ** int(m.group(1))
    try:
        value = float(s)
    except ValueError as exc:
        raise ConfigError(f"not a number: {text!r}") from exc
    if not math.isfinite(value):
        raise ConfigError(f"not a finite number: {text!r}")
    return value


def parse_problem_text(text: str, source: str = "<string>") -> ProblemSpec:
    """Build a ProblemSpec from ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, object] = {}
    where: dict[str, int] = {}
    known = set(_POLY_KEYS) | set(_REAL_KEYS) | set(_FILE_CORNER_KEYS) | {"d", "name"}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"{source}:{lineno}: empty value for {key!r}")
        try:
            if key in _POLY_KEYS:
                values[key] = parse_polynomial(value, _POLY_KEYS[key])
            elif key == "d":
                values[key] = parse_polynomial(value, ("t",))
            elif key == "name":
                values[key] = value
            else:
                values[key] = parse_real(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from exc
        where[key] = lineno
    missing = [k for k in (*_POLY_KEYS, *_REAL_KEYS) if k not in values]
    if missing:
        raise ConfigError(f"{source}: missing required key(s): {', '.join(missing)}")
    corner = {k: values[k] for k in _FILE_CORNER_KEYS if k in values}
    try:
        return ProblemSpec(
            a=values["a"], f=values["f"], phi=values["phi"], gL=values["gL"], gR=values["gR"],
            eps=values["eps"], alpha=values["alpha"], T=values["T"],
            closed_form_d=values.get("d"), corner_derivatives=corner,
            name=str(values.get("name", "custom")),
        )
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def parse_problem_file(path: str | Path) -> ProblemSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: file not found") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read file ({exc.strerror})") from exc
    return parse_problem_text(text, str(path))


def format_problem(problem: ProblemSpec) -> str:
    """Serialize a polynomial-data problem in the problem-file format."""
    lines = [f"name = {problem.name}"]
    for key in _POLY_KEYS:
        poly = getattr(problem, key)
        if not isinstance(poly, Polynomial):
            raise ValueError(f"{key} is not a polynomial and cannot be written")
        lines.append(f"{key} = {poly.to_string()}")
    for key in _REAL_KEYS:
        lines.append(f"{key} = {getattr(problem, key)!r}")
    if isinstance(problem.closed_form_d, Polynomial):
        lines.append(f"d = {problem.closed_form_d.to_string()}")
    for key, value in problem.corner_derivatives.items():
        lines.append(f"{key} = {value!r}")
    return "\n".join(lines) + "\n"


# --- run configuration ----------------------------------------------------------


def parse_N_list(text: str) -> list[int]:
    """``16..256`` (doubling) or a comma list ``16,32,64``."""
    m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        if lo < 4 or hi < lo:
            raise ConfigError(f"bad N range {text!r}")
        out = [lo]
        while out[-1] * 2 <= hi:
            out.append(out[-1] * 2)
        return out
    try:
        out = [int(part) for part in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad N list {text!r}") from exc
    if sorted(set(out)) != out:
        raise ConfigError("N list must be strictly increasing")
    for N in out:
        if N < 4 or N % 4:
            raise ConfigError(f"N must be a multiple of 4 and >= 4, got {N}")
    return out


def parse_eps_list(text: str) -> list[float]:
    out = [parse_real(part) for part in text.split(",")]
    for e in out:
        if not 0 < e <= 1:
            raise ConfigError(f"eps must lie in (0, 1], got {e:g}")
    return out


def parse_surface_at(text: str) -> tuple[float, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"--surface-at expects eps,N,M, got {text!r}")
    try:
        return parse_eps_list(parts[0])[0], int(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"bad --surface-at value {text!r}: {exc}") from exc


@dataclass
class RunConfig:
    example: Optional[int] = None
    problem_file: Optional[Path] = None
    N_list: list[int] = field(default_factory=lambda: list(TABLE_N))
    eps_set: list[float] = field(default_factory=lambda: list(TABLE_EPS))
    subtract: str = "auto"
    outputs: tuple[str, ...] = ("csv", "markdown")
    surface_at: Optional[tuple[float, int, int]] = None
    out_dir: Path = Path("results")

    def validate(self) -> None:
        if (self.example is None) == (self.problem_file is None):
            raise ConfigError("give exactly one of --example and --problem-file")
        if self.example is not None and self.example not in range(1, 6):
            raise ConfigError(f"example must be 1..5, got {self.example}")
        if self.subtract not in ("auto", "on", "off"):
            raise ConfigError(f"--subtract must be auto, on or off, got {self.subtract!r}")
        bad = set(self.outputs) - {"csv", "markdown", "surface"}
        if bad:
            raise ConfigError(f"unknown output kind(s): {', '.join(sorted(bad))}")

    def load_problem(self) -> ProblemSpec:
        if self.example is not None:
            return builtin_example(self.example)
        return parse_problem_file(self.problem_file)


def resolve_subtract(mode: str, problem: ProblemSpec) -> bool:
    data = compatibility(problem)
    if mode == "auto":
        subtract = data.incompatible
    else:
        subtract = mode == "on"
    if subtract and not problem.a_is_time_only:
        if mode == "auto":
            raise ConfigError("A0 != 0 but the convection coefficient depends on x; "
                              "the singular part can only be removed for a = a(t)")
        raise ConfigError("--subtract on requires a convection coefficient a = a(t)")
    return subtract


def run(config: RunConfig) -> list[Path]:
    """Execute a run and return the written files."""
    config.validate()
    problem = config.load_problem()
    subtract = resolve_subtract(config.subtract, problem)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info("%s", describe(problem, compatibility(problem)))
    written = []
    if {"csv", "markdown"} & set(config.outputs):
        report = sweep(problem, config.N_list, config.eps_set, subtract)
        if "csv" in config.outputs:
            path = out_dir / f"{problem.name}_table.csv"
            report.to_csv(path)
            written.append(path)
        if "markdown" in config.outputs:
            path = out_dir / f"{problem.name}_table.md"
            report.to_markdown(path)
            written.append(path)
    if config.surface_at is not None:
        eps, N, M = config.surface_at
        sub = problem.with_eps(eps)
        Tstar = exit_time(sub) if sub.a_is_time_only else None
        mesh = build_mesh(N, M, eps, sub.alpha, sub.T, Tstar)
        ctx = SingularBasisContext.for_problem(sub) if subtract else None
        y = solve(sub, mesh, subtract, ctx)
        u = reconstruct_U(ctx, y) if ctx is not None else y
        for label, g in (("Y", y), ("U", u)):
            path = out_dir / f"{problem.name}_{label}_surface.dat"
            write_surface(g, path)
            written.append(path)
    return written


# --- argument parsing ---------------------------------------------------------------


def _add_problem_args(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--example", type=int, help="built-in test problem 1..5")
    group.add_argument("--problem-file", type=Path, help="key = value problem description")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdincompat",
        description="Convection-diffusion problems with incompatible corner data: "
                    "Shishkin-mesh solves and two-mesh convergence tables.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="two-mesh convergence table and optional surfaces")
    _add_problem_args(p)
    p.add_argument("--N", dest="N_list", default="16..256",
                   help="range 16..256 (doubling) or list 16,32,64 (default 16..256)")
    p.add_argument("--eps", dest="eps_set", default=None,
                   help="comma list such as 2^0,2^-6,1e-3 (default: six table values)")
    p.add_argument("--full-sweep", action="store_true", help="use eps = 2^0, 2^-1, ..., 2^-30")
    p.add_argument("--subtract", choices=("auto", "on", "off"), default="auto",
                   help="remove A0*S0 before solving (auto: iff A0 != 0)")
    p.add_argument("--outputs", default="csv,markdown",
                   help="comma list of csv, markdown, surface")
    p.add_argument("--surface-at", default=None, metavar="EPS,N,M",
                   help="also write Y and U surfaces, e.g. 2^-10,64,64")
    p.add_argument("--out-dir", type=Path, default=Path("results"))

    p = sub.add_parser("describe", help="compatibility constants and characteristic data")
    _add_problem_args(p)
    p.add_argument("--eps", default=None, help="override eps")

    p = sub.add_parser("diagnostics", help="empirical constants of the singular-function bounds")
    _add_problem_args(p)
    p.add_argument("--eps", dest="eps_set", default=None,
                   help="comma list (default 2^0, 2^-2, ..., 2^-20)")
    p.add_argument("--out-dir", type=Path, default=Path("results"))

    p = sub.add_parser("dump-problem", help="print a problem in the problem-file format")
    _add_problem_args(p)
    return parser


def _problem_from_args(args) -> ProblemSpec:
    if args.example is not None:
        if args.example not in range(1, 6):
            raise ConfigError(f"example must be 1..5, got {args.example}")
        return builtin_example(args.example)
    return parse_problem_file(args.problem_file)


def _config_from_args(args) -> RunConfig:
    if args.full_sweep and args.eps_set:
        raise ConfigError("--full-sweep and --eps are mutually exclusive")
    eps = list(FULL_EPS) if args.full_sweep else (
        parse_eps_list(args.eps_set) if args.eps_set else list(TABLE_EPS))
    outputs = tuple(s.strip() for s in args.outputs.split(",") if s.strip())
    surface = parse_surface_at(args.surface_at) if args.surface_at else None
    if "surface" in outputs and surface is None:
        raise ConfigError("output 'surface' needs --surface-at EPS,N,M")
    return RunConfig(
        example=args.example, problem_file=args.problem_file,
        N_list=parse_N_list(args.N_list), eps_set=eps, subtract=args.subtract,
        outputs=outputs, surface_at=surface, out_dir=args.out_dir,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            for path in run(_config_from_args(args)):
                print(path)
        elif args.command == "describe":
            problem = _problem_from_args(args)
            if args.eps:
                problem = problem.with_eps(parse_real(args.eps))
            print(describe(problem, compatibility(problem)))
        elif args.command == "diagnostics":
            problem = _problem_from_args(args)
            eps = parse_eps_list(args.eps_set) if args.eps_set else [
                2.0**-k for k in range(0, 21, 2)]
            ctx = SingularBasisContext.for_problem(problem)
            rows = bound_diagnostics(ctx, eps)
            args.out_dir.mkdir(parents=True, exist_ok=True)
            path = args.out_dir / f"{problem.name}_bounds.csv"
            write_diagnostics_csv(rows, path)
            print(path)
        elif args.command == "dump-problem":
            sys.stdout.write(format_problem(_problem_from_args(args)))
    except (ConfigError, ValueError, RuntimeError) as exc:
        print(f"cdincompat: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
