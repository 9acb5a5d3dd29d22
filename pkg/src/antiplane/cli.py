"""Command-line entry point.

Exit codes: 0 success, 2 validation failure, 3 solver non-convergence,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import ConfigError, RunConfig, parse_config
from .constitutive import ConstitutiveError
from .continuation import HypothesisError, SeedSolveError, Termination, run_branch
from .diagnostics import ProfileError, diagnose, front_identity, limiting_profile
from .discretization import EllipticityExceeded, FieldError, GridError
from .reduced_ode import (
    FrontRegimeError,
    SeedParameters,
    closed_form_orbit,
    default_k,
    homoclinic_amplitude,
    homoclinic_seed,
    integrate_planar,
    stated_amplitude,
)
from .serialization import SerializationError, atomic_write_text, read_solution, write_branch, write_solution
from .solver import SolverError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NONCONVERGENCE = 3
EXIT_IO = 4

log = logging.getLogger("antiplane")


class UsageError(ValueError):
    pass


def _out_dir(args, cfg: Optional[RunConfig]) -> Path:
    if args.out is not None:
        return Path(args.out)
    return cfg.out_dir if cfg is not None else Path(".")


def _load(args) -> RunConfig:
    if args.config is None:
        raise UsageError("--config is required for this command")
    return parse_config(args.config)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_verify_model(args) -> int:
    cfg = _load(args)
    print(cfg.report.summary())
    return EXIT_OK


def cmd_seed(args) -> int:
    cfg = _load(args)
    params = SeedParameters.from_model(cfg.model, cfg.force, cfg.continuation.seed_epsilon)
    fld = homoclinic_seed(params, cfg.grid, cfg.model, cfg.force)
    rec = diagnose(fld, cfg.model.with_limits(xi1=cfg.report.xi1, q1=cfg.report.q1), cfg.force, cfg.sigma)
    path = _out_dir(args, cfg) / "seed.json"
    write_solution(fld, path, rec, cfg.model, cfg.force)
    print(f"seed eps={params.epsilon:g} alpha={params.alpha:.12g} lambda={params.lam:.12g} "
          f"(tabulated constant {stated_amplitude(cfg.model, cfg.force):.12g}) -> {path}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args)
    branch = run_branch(cfg.continuation, cfg.model, cfg.force, cfg.grid)
    out = _out_dir(args, cfg)
    write_branch(branch, out / cfg.branch_file)
    last = branch[-1]
    write_solution(last.field, out / cfg.solution_file, last.diagnostics, cfg.model, cfg.force)
    print(f"{len(branch)} points, termination={branch.termination.value}, "
          f"final lambda={last.field.lam:.12g}, e_min={last.diagnostics.e_min:.6g}, "
          f"width={last.diagnostics.width_half:.6g}")
    if branch.termination is Termination.DS_UNDERFLOW:
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_limit_profile(args) -> int:
    cfg = _load(args)
    if cfg.limit_lambda is None or cfg.limit_mu is None:
        raise UsageError("[limit] lambda and mu are required for limit-profile")
    prof = limiting_profile(cfg.model, cfg.force, cfg.limit_lambda, cfg.limit_mu, y=cfg.grid.y)
    val = front_identity(prof, cfg.model, cfg.force)
    path = _out_dir(args, cfg) / "limit_profile.csv"
    rows = [[format(a, ".17g"), format(b, ".17g"), format(c, ".17g")]
            for a, b, c in zip(prof.y, prof.values, prof.slopes)]
    atomic_write_text(path, _csv_text(["y", "U", "U_y"], rows))
    print(f"mu={prof.mu:.12g} trivial={prof.trivial} front_identity={val:.6e} -> {path}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    fld, _, model, force = read_solution(args.solution)
    if args.config is not None:
        cfg = parse_config(args.config)
        model, force = cfg.model, cfg.force
        sigma = cfg.sigma
    else:
        sigma = 0.5
    if model is None or force is None:
        raise UsageError("solution file carries no model; pass --config")
    rec = diagnose(fld, model, force, sigma)
    text = json.dumps(rec.to_dict(), indent=2, allow_nan=False)
    if args.out is not None:
        atomic_write_text(Path(args.out) / "diagnostics.json", text)
    print(text)
    return EXIT_OK


def cmd_reduce_ode(args) -> int:
    cfg = _load(args)
    alpha = homoclinic_amplitude(cfg.model, cfg.force)
    k = default_k(alpha)
    start = closed_form_orbit(cfg.ode_X0, k)
    traj = integrate_planar(start, cfg.continuation.seed_epsilon, k, cfg.ode_X_end, cfg.ode_h)
    end = traj[-1]
    exact = closed_form_orbit(end.X, k)
    err = math.hypot(end.V - exact.V, end.W - exact.W)
    rows = [[format(s.X, ".17g"), format(s.V, ".17g"), format(s.W, ".17g")] for s in traj]
    path = _out_dir(args, cfg) / "planar_orbit.csv"
    atomic_write_text(path, _csv_text(["X", "V", "W"], rows))
    print(f"k={k:.12g} alpha={alpha:.12g} endpoint=({end.V:.15g}, {end.W:.15g}) "
          f"error={err:.3e} -> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (INI format)")
    common.add_argument("--out", help="output directory (overrides [output] dir)")
    common.add_argument("--verbose", action="store_true", help="log progress to stderr")
    p = argparse.ArgumentParser(prog="antiplane", description="Anti-plane shear branch continuation.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("verify-model", parents=[common], help="check the structural hypotheses") \
        .set_defaults(func=cmd_verify_model)
    sub.add_parser("seed", parents=[common], help="write the homoclinic seed field") \
        .set_defaults(func=cmd_seed)
    sub.add_parser("run", parents=[common], help="trace the solution branch") \
        .set_defaults(func=cmd_run)
    sub.add_parser("limit-profile", parents=[common], help="solve the transversal limit problem") \
        .set_defaults(func=cmd_limit_profile)
    d = sub.add_parser("diagnose", parents=[common], help="diagnostics for a saved solution")
    d.add_argument("solution", help="solution JSON written by run or seed")
    d.set_defaults(func=cmd_diagnose)
    sub.add_parser("reduce-ode", parents=[common], help="integrate the planar reduced system") \
        .set_defaults(func=cmd_reduce_ode)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        if exc.report is not None and not exc.report.passed:
            print(exc.report.summary(), file=sys.stderr)
        return EXIT_VALIDATION
    except (UsageError, HypothesisError, FrontRegimeError, ConstitutiveError, GridError, FieldError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SerializationError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SeedSolveError, SolverError, EllipticityExceeded, ProfileError) as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
