"""Pseudo-arclength tracing of the solution branch from the small-amplitude seed."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .constitutive import (
    BodyForce,
    ConstitutiveModel,
    HypothesisReport,
    ModelKind,
    verify_hypotheses,
)
from .diagnostics import DiagnosticsRecord, diagnose
from .discretization import (
    EllipticityExceeded,
    SolutionField,
    StripGrid,
    extend_domain,
)
from .reduced_ode import SeedParameters, homoclinic_seed
from .solver import (
    ArclengthConstraint,
    NewtonSettings,
    SolverError,
    newton_arclength,
    newton_fixed_lambda,
)

log = logging.getLogger(__name__)


class Termination(str, enum.Enum):
    MARGIN_STOP = "margin_stop"
    WIDTH_STOP = "width_stop"
    LAMBDA_OUT_OF_BOUNDS = "lambda_out_of_bounds"
    MAX_STEPS = "max_steps"
    DS_UNDERFLOW = "ds_underflow"


class HypothesisError(ValueError):
    def __init__(self, report: HypothesisReport):
        self.report = report
        super().__init__("model hypotheses violated: " + report.summary())


class SeedSolveError(SolverError):
    pass


@dataclass(frozen=True)
class ContinuationConfig:
    """Step control, termination thresholds and truncation policy.

    ``width_stop`` is a multiple of the width of the first branch point.
    ``truncation_tol`` triggers a domain extension when
    ``|u(truncation_probe * L, 0)| > truncation_tol * u(0, 0)``.
    """

    seed_epsilon: float = 0.1
    ds_init: float = 0.05
    ds_min: float = 1e-5
    ds_max: float = 2.0
    max_steps: int = 500
    margin_stop: float = 0.2
    width_stop: float = 5.0
    lambda_max: float = 1.0
    tol_residual: float = 1e-10
    max_newton: int = 25
    fast_iterations: int = 3
    theta: float = 0.9
    sigma: float = 0.5
    truncation_tol: float = 1e-6
    truncation_probe: float = 0.9
    extend_factor: float = 1.5
    L_max: float = 600.0
    lambda_floor: float = 1e-3

    def __post_init__(self):
        if not 0 < self.ds_min <= self.ds_init <= self.ds_max:
            raise ValueError("need 0 < ds_min <= ds_init <= ds_max")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        if not self.seed_epsilon > 0:
            raise ValueError("seed_epsilon must be positive")
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must lie in (0, 1)")
        if not self.extend_factor > 1:
            raise ValueError("extend_factor must exceed 1")
        if not 0 < self.truncation_probe < 1:
            raise ValueError("truncation_probe must lie in (0, 1)")

    @property
    def newton(self) -> NewtonSettings:
        return NewtonSettings(tol_residual=self.tol_residual, max_iterations=self.max_newton)


@dataclass
class BranchPoint:
    field: SolutionField
    s: float
    diagnostics: DiagnosticsRecord
    newton_iterations: int
    ds: float = 0.0

    @property
    def lam(self) -> float:
        return self.field.lam


@dataclass
class Branch:
    points: List[BranchPoint]
    termination: Optional[Termination] = None
    nodal_rejections: List[int] = field(default_factory=list)
    extensions: List[Tuple[int, float]] = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, k):
        return self.points[k]


# ---------------------------------------------------------------------------
# tangents and prediction


def _normalize(du: np.ndarray, dl: float, grid: StripGrid, theta: float):
    n = math.sqrt(theta * grid.inner(du, du) + (1 - theta) * dl * dl)
    if not n > 0 or not math.isfinite(n):
        return None
    return du / n, dl / n


def lambda_tangent(grid: StripGrid, theta: float) -> Tuple[np.ndarray, float]:
    """Pure load increment, used when the secant degenerates."""
    return np.zeros(grid.size), 1.0 / math.sqrt(1 - theta) if theta < 1 else 0.0


def seed_tangent(params: SeedParameters, grid: StripGrid, theta: float = 0.9) -> Tuple[np.ndarray, float]:
    """Normalized difference of the seeds at ``eps`` and ``1.1 eps``."""
    a = homoclinic_seed(params, grid)
    p2 = SeedParameters(1.1 * params.epsilon, params.alpha, (1.1 * params.epsilon) ** 2)
    b = homoclinic_seed(p2, grid)
    t = _normalize((b.u - a.u).ravel(), b.lam - a.lam, grid, theta)
    if t is None:
        return lambda_tangent(grid, theta)
    return t


def secant_tangent(prev: SolutionField, last: SolutionField, theta: float = 0.9) -> Tuple[np.ndarray, float]:
    """Normalized ``last - prev``; falls back to a pure load increment if degenerate."""
    if prev.grid != last.grid:
        raise ValueError("secant needs both points on one grid")
    t = _normalize((last.u - prev.u).ravel(), last.lam - prev.lam, last.grid, theta)
    if t is None:
        log.debug("degenerate secant, using load tangent")
        return lambda_tangent(last.grid, theta)
    return t


def _pad_tangent(tangent, old: StripGrid, new: StripGrid, theta: float):
    """Carry a tangent onto an extended grid; new nodes get zero."""
    t_u = np.zeros(new.shape)
    t_u[:old.Nx + 1] = tangent[0].reshape(old.shape)
    t_u[old.Nx:] = 0.0
    t = _normalize(t_u.ravel(), tangent[1], new, theta)
    return t if t is not None else lambda_tangent(new, theta)


def predictor(tail: Sequence[SolutionField], ds: float, theta: float = 0.9,
              tangent: Optional[Tuple[np.ndarray, float]] = None):
    """Linear extrapolation ``last + ds * t`` along the secant of the tail.

    With one point and no explicit ``tangent`` the load tangent is used.
    Returns ``(guess_field, tangent)``.
    """
    if not tail:
        raise ValueError("predictor needs at least one point")
    last = tail[-1]
    if tangent is None:
        tangent = secant_tangent(tail[-2], last, theta) if len(tail) >= 2 else lambda_tangent(last.grid, theta)
    t_u, t_l = tangent
    u = last.u + ds * t_u.reshape(last.grid.shape)
    u[:, -1] = 0.0
    u[-1, :] = 0.0
    return SolutionField(last.grid, u, last.lam + ds * t_l), tangent


# ---------------------------------------------------------------------------
# branch loop


def _prepare_model(model: ConstitutiveModel, force: BodyForce) -> ConstitutiveModel:
    report = verify_hypotheses(model, force)
    if not report.passed:
        raise HypothesisError(report)
    if model.model_kind is ModelKind.MODEL_I:
        return model.with_limits(xi1=model.xi1 if model.xi1 is not None else report.xi1)
    return model.with_limits(q1=report.q1)


def solve_seed(config: ContinuationConfig, model: ConstitutiveModel, force: BodyForce,
               grid: StripGrid) -> Tuple[SolutionField, int, SeedParameters]:
    params = SeedParameters.from_model(model, force, config.seed_epsilon)
    seed = homoclinic_seed(params, grid, model, force)
    try:
        res = newton_fixed_lambda(seed, model, force, config.newton)
    except (SolverError, EllipticityExceeded) as exc:
        raise SeedSolveError(f"seed solve at eps={config.seed_epsilon} failed: {exc}") from exc
    return res.field, res.iterations, params


def _make_point(fld, s, iters, ds, model, force, config) -> BranchPoint:
    return BranchPoint(fld, s, diagnose(fld, model, force, config.sigma), iters, ds)


def run_branch(config: ContinuationConfig, model: ConstitutiveModel, force: BodyForce,
               grid: StripGrid) -> Branch:
    """Trace the branch from the homoclinic seed until a termination criterion fires."""
    model = _prepare_model(model, force)
    fld, iters, params = solve_seed(config, model, force, grid)
    first = _make_point(fld, 0.0, iters, 0.0, model, force, config)
    if not first.diagnostics.nodal.all_ok:
        log.warning("seed point fails the nodal check: %s", first.diagnostics.nodal)
    tangent = seed_tangent(params, grid, config.theta)
    return continue_branch([first], config, model, force, tangent=tangent,
                           ds=config.ds_init, width_ref=first.diagnostics.width_half)


def next_step(point: BranchPoint, config: ContinuationConfig) -> float:
    """Step size after accepting ``point`` (doubling after a fast corrector)."""
    if point.newton_iterations <= config.fast_iterations:
        return min(2.0 * point.ds, config.ds_max)
    return point.ds


def continue_branch(points: List[BranchPoint], config: ContinuationConfig, model: ConstitutiveModel,
                    force: BodyForce, tangent=None, ds: Optional[float] = None,
                    width_ref: Optional[float] = None) -> Branch:
    """Continue from the last one or two of ``points``.

    Restarting from saved points reproduces the original continuation:
    the step size is recovered from the last point's accepted ``ds`` and
    Newton count unless given.
    """
    if not points:
        raise ValueError("need at least one branch point")
    branch = Branch(list(points))
    if width_ref is None:
        width_ref = points[0].diagnostics.width_half
    if ds is None:
        ds = next_step(points[-1], config) if points[-1].ds > 0 else config.ds_init
    is_model_i = model.model_kind is ModelKind.MODEL_I
    tail = [p.field for p in points[-2:]]
    if len(tail) == 2 and tail[0].grid != tail[1].grid:
        tail[0] = extend_domain(tail[0], tail[1].grid.L, config.lambda_floor)
    step = 0
    while True:
        if step >= config.max_steps:
            branch.termination = Termination.MAX_STEPS
            break
        last = tail[-1]
        # truncation policy
        g = last.grid
        probe = int(round(config.truncation_probe * g.Nx))
        u00 = last.u[0, 0]
        if abs(last.u[probe, 0]) > config.truncation_tol * abs(u00) and g.L < config.L_max:
            L_new = min(g.L * config.extend_factor, config.L_max)
            tail = [extend_domain(f, L_new, config.lambda_floor) for f in tail]
            if len(tail) == 1 and tangent is not None:
                tangent = _pad_tangent(tangent, g, tail[-1].grid, config.theta)
            branch.extensions.append((len(branch.points) - 1, tail[-1].grid.L))
            log.info("truncation pressure at L=%.4g, extending to L=%.4g", g.L, tail[-1].grid.L)
        if len(tail) >= 2:
            tangent = secant_tangent(tail[-2], tail[-1], config.theta)
        elif tangent is None or tangent[0].size != tail[-1].grid.size:
            tangent = lambda_tangent(tail[-1].grid, config.theta)

        guess, tangent = predictor(tail, ds, config.theta, tangent)
        last = tail[-1]
        constraint = ArclengthConstraint(last.u.ravel(), last.lam, tangent[0], tangent[1], ds, config.theta)
        try:
            res = newton_arclength(guess, constraint, model, force, config.newton)
        except (SolverError, EllipticityExceeded) as exc:
            log.debug("corrector failed at ds=%.3g: %s", ds, exc)
            ds *= 0.5
            if ds < config.ds_min:
                branch.termination = Termination.DS_UNDERFLOW
                break
            continue
        fld = res.field
        if not 0 < fld.lam < config.lambda_max:
            branch.termination = Termination.LAMBDA_OUT_OF_BOUNDS
            break
        point = _make_point(fld, branch.points[-1].s + ds, res.iterations, ds, model, force, config)
        if not point.diagnostics.nodal.all_ok:
            branch.nodal_rejections.append(len(branch.points))
            log.info("nodal check failed at step %d, halving ds", len(branch.points))
            ds *= 0.5
            if ds < config.ds_min:
                branch.termination = Termination.DS_UNDERFLOW
                break
            continue
        branch.points.append(point)
        step += 1
        tail = [tail[-1], fld]
        d = point.diagnostics
        log.info("step %d s=%.6g lam=%.10g amp=%.6g width=%.6g e_min=%.4g its=%d ds=%.3g L=%.4g",
                 len(branch.points) - 1, point.s, fld.lam, d.amplitude, d.width_half, d.e_min,
                 res.iterations, ds, fld.grid.L)
        if is_model_i and len(branch.points) > 10 and fld.lam < config.lambda_floor:
            log.warning("lambda %.3g below floor %.3g", fld.lam, config.lambda_floor)
        if not is_model_i and d.e_min <= config.margin_stop:
            branch.termination = Termination.MARGIN_STOP
            break
        if is_model_i and width_ref > 0 and d.width_half >= config.width_stop * width_ref:
            branch.termination = Termination.WIDTH_STOP
            break
        ds = next_step(point, config)
    log.info("branch terminated: %s after %d points", branch.termination.value, len(branch.points))
    return branch
