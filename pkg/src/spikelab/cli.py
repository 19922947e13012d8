"""Command line front end: analyze spikes, tabulate densities, run simulations.

Model files are JSON objects with the keys kind ("additive" or
"multiplicative"), sigma2 or c, nu = {"atoms": [[location, weight], ...]},
spikes = [[theta, multiplicity], ...], and optional N, seed, entry_law
("gaussian" or "rademacher") and field ("complex" or "real").

Exit codes: 0 success, 2 invalid spec or domain, 3 fixed-point
non-convergence, 4 numerical accuracy failure.  Output is a pure function
of the model file bytes, the flags and the seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import free_additive, free_multiplicative, verify
from .ensemble import SpikedModelSpec
from .errors import (
    ConvergenceError,
    DegenerateOutlierError,
    DomainError,
    NumericalError,
    SpecError,
    TheoryError,
)
from .measure import AtomicMeasure

MODEL_KEYS = {"kind", "sigma2", "c", "nu", "spikes", "N", "entry_law", "field", "seed"}
KIND_MAP = {"additive": "additive_wigner", "multiplicative": "multiplicative_wishart"}
FIELD_MAP = {"complex": "complex_hermitian", "real": "real_symmetric"}

DEFAULT_REPS = 5


@dataclass(frozen=True)
class RunConfig:
    """Parsed invocation: one command plus its fully validated knobs."""

    command: str
    spec_path: str
    output_path: str | None
    fmt: str
    grid: tuple[float, float, int] | None
    reps: int
    N: int | None
    seed: int | None
    eps: float
    tol: float

    def __post_init__(self):
        if self.fmt not in ("json", "csv"):
            raise SpecError(f"format must be json or csv, got {self.fmt!r}")
        if self.grid is not None and self.grid[2] < 2:
            raise SpecError(f"grid needs at least 2 points, got {self.grid[2]}")
        if self.reps < 1:
            raise SpecError(f"reps must be >= 1, got {self.reps}")
        if self.N is not None and self.N < 1:
            raise SpecError(f"N must be >= 1, got {self.N}")


def _parse_grid(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise SpecError(f"grid must look like LO:HI:N, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise SpecError(f"grid must look like LO:HI:N, got {text!r}") from None
    if not lo < hi:
        raise SpecError(f"grid needs LO < HI, got {text!r}")
    return lo, hi, n


def load_model(path: str) -> dict:
    """Read and normalize a JSON model file into canonical field names."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SpecError(f"model file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SpecError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise SpecError("model file must hold a JSON object")
    unknown = sorted(set(raw) - MODEL_KEYS)
    if unknown:
        raise SpecError(f"unknown model keys: {', '.join(unknown)}")
    kind = raw.get("kind")
    if kind not in KIND_MAP:
        raise SpecError(f"kind must be 'additive' or 'multiplicative', got {kind!r}")
    field = raw.get("field", "complex")
    if field not in FIELD_MAP:
        raise SpecError(f"field must be 'complex' or 'real', got {field!r}")

    nu_raw = raw.get("nu")
    if not isinstance(nu_raw, dict) or "atoms" not in nu_raw:
        raise SpecError("nu must be an object with an 'atoms' list")
    try:
        atoms = tuple((float(t), float(w)) for t, w in nu_raw["atoms"])
    except (TypeError, ValueError):
        raise SpecError("nu atoms must be [location, weight] pairs") from None
    nu = AtomicMeasure(atoms)

    spikes = []
    for entry in raw.get("spikes", []):
        try:
            theta, mult = entry
        except (TypeError, ValueError):
            raise SpecError(f"each spike must be a [theta, multiplicity] pair, got {entry!r}")
        if isinstance(mult, bool) or (
            not isinstance(mult, int) and not (isinstance(mult, float) and mult.is_integer())
        ):
            raise SpecError(f"spike multiplicity must be an integer, got {mult!r}")
        spikes.append((float(theta), int(mult)))

    for name in ("N", "seed"):
        value = raw.get(name)
        if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
            raise SpecError(f"{name} must be an integer, got {value!r}")

    return {
        "kind": KIND_MAP[kind],
        "nu": nu,
        "spikes": tuple(spikes),
        "sigma2": raw.get("sigma2"),
        "c": raw.get("c"),
        "N": raw.get("N"),
        "seed": raw.get("seed", 0),
        "entry_law": raw.get("entry_law", "gaussian"),
        "field": FIELD_MAP[field],
    }


def _build_context(model: dict):
    """Limiting-law context plus the module implementing it."""
    if model["kind"] == "additive_wigner":
        if model["sigma2"] is None:
            raise SpecError("additive model requires sigma2")
        if model["c"] is not None:
            raise SpecError("additive model does not take an aspect ratio c")
        return free_additive.AdditiveContext(model["nu"], model["sigma2"]), free_additive
    if model["c"] is None:
        raise SpecError("multiplicative model requires an aspect ratio c")
    if model["sigma2"] is not None:
        raise SpecError("multiplicative model does not take sigma2")
    return free_multiplicative.MultiplicativeContext(model["nu"], model["c"]), free_multiplicative


def _fmt_float(value: float) -> str:
    return format(float(value), ".17g")


def cmd_analyze(cfg: RunConfig) -> str:
    model = load_model(cfg.spec_path)
    ctx, mod = _build_context(model)
    verdicts = [mod.classify_spike(ctx, theta, mult) for theta, mult in model["spikes"]]
    sup = mod.support(ctx)
    if cfg.fmt == "json":
        doc = {
            "kind": model["kind"],
            "sigma2" if model["kind"] == "additive_wigner" else "c": (
                model["sigma2"] if model["kind"] == "additive_wigner" else model["c"]
            ),
            "support": [[lo, hi] for lo, hi in sup.intervals],
            "spikes": [
                {
                    "theta": v.theta,
                    "multiplicity": v.multiplicity,
                    "verdict": "outlier" if v.is_outlier else "sticking",
                    "criterion": v.criterion_value,
                    "rho": v.rho,
                    "tau": v.tau,
                }
                for v in verdicts
            ],
        }
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"
    lines = ["type,theta,multiplicity,verdict,criterion,rho,tau,lo,hi"]
    for v in verdicts:
        verdict = "outlier" if v.is_outlier else "sticking"
        rho = "" if v.rho is None else _fmt_float(v.rho)
        tau = "" if v.tau is None else _fmt_float(v.tau)
        lines.append(
            f"spike,{_fmt_float(v.theta)},{v.multiplicity},{verdict},"
            f"{_fmt_float(v.criterion_value)},{rho},{tau},,"
        )
    for lo, hi in sup.intervals:
        lines.append(f"support,,,,,,,{_fmt_float(lo)},{_fmt_float(hi)}")
    return "\n".join(lines) + "\n"


def cmd_density(cfg: RunConfig) -> str:
    if cfg.grid is None:
        raise SpecError("density requires --grid LO:HI:N")
    model = load_model(cfg.spec_path)
    ctx, mod = _build_context(model)
    lo, hi, n = cfg.grid
    xs = np.linspace(lo, hi, n)
    try:
        points = mod.density(ctx, xs, eps=cfg.eps, tol=cfg.tol)
    except ConvergenceError as exc:
        if exc.grid_index is not None:
            raise ConvergenceError(
                f"density did not converge at x={_fmt_float(xs[exc.grid_index])}"
                f" (residual {exc.residual:.3e} after {exc.iterations} iterations)",
                residual=exc.residual,
                iterations=exc.iterations,
                grid_index=exc.grid_index,
            ) from exc
        raise
    if cfg.fmt == "json":
        doc = {"x": [x for x, _ in points], "density": [f for _, f in points]}
        return json.dumps(doc, allow_nan=False) + "\n"
    lines = ["x,density"]
    lines.extend(f"{_fmt_float(x)},{_fmt_float(f)}" for x, f in points)
    return "\n".join(lines) + "\n"


def cmd_simulate(cfg: RunConfig) -> str:
    model = load_model(cfg.spec_path)
    N = cfg.N if cfg.N is not None else model["N"]
    if N is None:
        raise SpecError("simulate requires N (in the model file or via --N)")
    seed = cfg.seed if cfg.seed is not None else model["seed"]
    spec = SpikedModelSpec(
        kind=model["kind"],
        nu=model["nu"],
        spikes=model["spikes"],
        N=N,
        seed=seed,
        sigma2=model["sigma2"],
        c=model["c"],
        entry_law=model["entry_law"],
        field=model["field"],
    )
    result = verify.run(spec, cfg.reps, expect_sticking=verify.expected_sticking(spec))
    if cfg.fmt == "json":
        return json.dumps(verify.to_json_dict(result), indent=2, allow_nan=False) + "\n"
    return verify.to_csv_text(result)


_COMMANDS = {"analyze": cmd_analyze, "density": cmd_density, "simulate": cmd_simulate}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikelab",
        description="Spiked random matrix models: outlier analysis, densities, Monte Carlo checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, default_fmt in (("analyze", "json"), ("density", "csv"), ("simulate", "json")):
        cmd = sub.add_parser(name)
        cmd.add_argument("--spec", required=True, help="path to a JSON model file")
        cmd.add_argument("--out", default=None, help="output path (default: stdout)")
        cmd.add_argument("--format", choices=("json", "csv"), default=default_fmt)
        if name == "density":
            cmd.add_argument("--grid", required=True, help="evaluation grid LO:HI:N")
            cmd.add_argument("--eps", type=float, default=free_additive.DEFAULT_EPS)
            cmd.add_argument("--tol", type=float, default=free_additive.DEFAULT_TOL)
        if name == "simulate":
            cmd.add_argument("--reps", type=int, default=DEFAULT_REPS)
            cmd.add_argument("--N", type=int, default=None)
            cmd.add_argument("--seed", type=int, default=None)
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=args.command,
        spec_path=args.spec,
        output_path=args.out,
        fmt=args.format,
        grid=_parse_grid(args.grid) if getattr(args, "grid", None) else None,
        reps=getattr(args, "reps", DEFAULT_REPS),
        N=getattr(args, "N", None),
        seed=getattr(args, "seed", None),
        eps=getattr(args, "eps", free_additive.DEFAULT_EPS),
        tol=getattr(args, "tol", free_additive.DEFAULT_TOL),
    )


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        cfg = _config_from_args(args)
        text = _COMMANDS[cfg.command](cfg)
    except (SpecError, DomainError, TheoryError, DegenerateOutlierError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    if cfg.output_path is None:
        sys.stdout.write(text)
    else:
        with open(cfg.output_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
