"""INI-style run configuration with full validation.

Example::

    [model]
    kind = ModelI
    c1 = -0.3
    c2 = 0.2

    [force]
    b1 = -0.1

    [grid]
    L = 60
    Nx = 240
    Ny = 32

Every problem found is reported, not only the first one.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

from .constitutive import (
    BodyForce,
    ConstitutiveError,
    ConstitutiveModel,
    HypothesisReport,
    ModelKind,
    verify_hypotheses,
)
from .continuation import ContinuationConfig
from .discretization import GridError, StripGrid


class ConfigError(ValueError):
    """Collected validation failures for one configuration file."""

    def __init__(self, errors: List[str], report: Optional[HypothesisReport] = None):
        self.errors = list(errors)
        self.report = report
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass
class RunConfig:
    model: ConstitutiveModel
    force: BodyForce
    grid: StripGrid
    continuation: ContinuationConfig = field(default_factory=ContinuationConfig)
    hypothesis_samples: int = 400
    out_dir: Path = Path(".")
    branch_file: str = "branch.csv"
    solution_file: str = "solution.json"
    limit_lambda: Optional[float] = None
    limit_mu: Optional[float] = None
    ode_X0: float = -10.0
    ode_X_end: float = 0.0
    ode_h: float = 1e-3
    report: Optional[HypothesisReport] = None

    @property
    def sigma(self) -> float:
        return self.continuation.sigma


_CONT_FIELDS = {f.name: f for f in dataclasses.fields(ContinuationConfig)}
_CONT_KEYS = {k for k in _CONT_FIELDS if k not in ("seed_epsilon", "sigma")}

_SCHEMA: Dict[str, Dict[str, Callable]] = {
    "model": {"kind": str, "c1": float, "c2": float, "c3": float, "c4": float,
              "q_probe_max": float, "xi1": float},
    "force": {"b1": float, "b2": float, "b3": float},
    "grid": {"l": float, "nx": int, "ny": int},
    "seed": {"epsilon": float},
    "continuation": {k.lower(): (int if _CONT_FIELDS[k].type in (int, "int") else float) for k in _CONT_KEYS},
    "diagnostics": {"sigma": float, "hypothesis_samples": int},
    "output": {"dir": str, "branch": str, "solution": str},
    "limit": {"lambda": float, "mu": float},
    "reduce": {"x0": float, "x_end": float, "h": float},
}
_REQUIRED = {("model", "c1"), ("grid", "l"), ("grid", "nx"), ("grid", "ny")}


def _convert(raw: str, kind: Callable):
    if kind is int:
        value = float(raw)
        if not value.is_integer():
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(value)
    if kind is float:
        value = float(raw)
        if not math.isfinite(value):
            raise ValueError(f"expected a finite number, got {raw!r}")
        return value
    return raw.strip()


def _read(path: Path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    # keys are case-insensitive; optionxform lowercases them
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh, source=str(path))
    return parser


def parse_config(path) -> RunConfig:
    """Parse and validate ``path``.

    Raises
    ------
    FileNotFoundError, OSError
        The file cannot be read.
    ConfigError
        Malformed syntax, unknown sections or keys, bad values, or
        coefficients that violate the model hypotheses. All problems are
        listed in ``errors``.
    """
    path = Path(path)
    try:
        parser = _read(path)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from exc
    return config_from_parser(parser)


def parse_config_string(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from exc
    return config_from_parser(parser)


def config_from_parser(parser: configparser.ConfigParser) -> RunConfig:
    errors: List[str] = []
    values: Dict[str, Dict[str, object]] = {s: {} for s in _SCHEMA}
    for section in parser.sections():
        if section.lower() not in _SCHEMA:
            errors.append(f"[{section}]: unknown section")
            continue
        schema = _SCHEMA[section.lower()]
        for key, raw in parser.items(section):
            if key not in schema:
                errors.append(f"[{section}] {key}: unknown key")
                continue
            try:
                values[section.lower()][key] = _convert(raw, schema[key])
            except ValueError as exc:
                errors.append(f"[{section}] {key}: {exc}")
    for sec, key in sorted(_REQUIRED):
        if key not in values[sec] and not any(e.startswith(f"[{sec}] {key}:") for e in errors):
            errors.append(f"[{sec}] {key}: required key missing")

    model = force = grid = cont = None
    report = None
    m = values["model"]
    kind_raw = m.get("kind", ModelKind.MODEL_I.value)
    try:
        kind = ModelKind(kind_raw)
    except ValueError:
        errors.append(f"[model] kind: expected ModelI or ModelII, got {kind_raw!r}")
        kind = None
    if kind is not None and "c1" in m:
        higher = [m[k] for k in ("c3", "c4") if k in m]
        if higher and "c2" not in m:
            errors.append("[model] c2: required when c3/c4 are given")
        else:
            kw = {"model_kind": kind}
            if "q_probe_max" in m:
                kw["q_probe_max"] = m["q_probe_max"]
            if "xi1" in m:
                kw["xi1"] = m["xi1"]
            try:
                model = ConstitutiveModel.from_expansion(m["c1"], m.get("c2", 0.0), *higher, **kw)
            except (ConstitutiveError, ValueError) as exc:
                errors.append(f"[model]: {exc}")

    fvals = values["force"]
    coeffs = [fvals.get("b1", 0.0)] + [fvals[k] for k in ("b2", "b3") if k in fvals]
    try:
        force = BodyForce(tuple(coeffs))
    except (ConstitutiveError, ValueError) as exc:
        errors.append(f"[force]: {exc}")

    g = values["grid"]
    if all(k in g for k in ("l", "nx", "ny")):
        try:
            grid = StripGrid(g["l"], g["nx"], g["ny"])
        except GridError as exc:
            errors.append(f"[grid]: {exc}")

    ckw = {k: values["continuation"][k.lower()] for k in _CONT_KEYS if k.lower() in values["continuation"]}
    if "epsilon" in values["seed"]:
        ckw["seed_epsilon"] = values["seed"]["epsilon"]
    if "sigma" in values["diagnostics"]:
        ckw["sigma"] = values["diagnostics"]["sigma"]
    try:
        cont = ContinuationConfig(**ckw)
    except ValueError as exc:
        errors.append(f"[continuation]: {exc}")

    samples = values["diagnostics"].get("hypothesis_samples", 400)
    if samples < 100:
        errors.append("[diagnostics] hypothesis_samples: must be at least 100")

    red = values["reduce"]
    if "h" in red and not red["h"] > 0:
        errors.append("[reduce] h: must be positive")
    lim = values["limit"]
    if "lambda" in lim and not lim["lambda"] > 0:
        errors.append("[limit] lambda: must be positive")
    if "mu" in lim and lim["mu"] < 0:
        errors.append("[limit] mu: must be non-negative")

    if model is not None and force is not None and samples >= 100:
        report = verify_hypotheses(model, force, samples)
        if not report.passed:
            for cond, loc, val in report.violations[:10]:
                errors.append(f"[model] hypothesis {cond} violated at {loc:.6g} (value {val:.6g})")
            if len(report.violations) > 10:
                errors.append(f"[model] ... {len(report.violations) - 10} more hypothesis violations")

    if errors:
        raise ConfigError(errors, report)

    out = values["output"]
    return RunConfig(
        model=model, force=force, grid=grid, continuation=cont, hypothesis_samples=samples,
        out_dir=Path(out.get("dir", ".")), branch_file=out.get("branch", "branch.csv"),
        solution_file=out.get("solution", "solution.json"),
        limit_lambda=lim.get("lambda"), limit_mu=lim.get("mu"),
        ode_X0=red.get("x0", -10.0), ode_X_end=red.get("x_end", 0.0), ode_h=red.get("h", 1e-3),
        report=report,
    )
