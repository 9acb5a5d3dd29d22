"""Damped Newton correctors: fixed load and pseudo-arclength bordered form."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import List

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .constitutive import BodyForce, ConstitutiveModel
from .discretization import (
    EllipticityExceeded,
    SolutionField,
    assemble_jacobian,
    assemble_residual,
    residual_lambda_derivative,
)

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class NonConvergence(SolverError):
    def __init__(self, message: str, history: List[float]):
        self.history = list(history)
        super().__init__(f"{message}; residual history {['%.3e' % r for r in history]}")


class SingularJacobian(SolverError):
    """Linear sub-solve failed: fold or ellipticity loss suspected."""


class StepTooLarge(SolverError):
    """Backtracking exhausted without reducing the residual."""


@dataclass(frozen=True)
class NewtonSettings:
    tol_residual: float = 1e-10
    max_iterations: int = 25
    backtrack: float = 0.5
    min_step: float = 2.0 ** -10

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class ArclengthConstraint:
    """Pseudo-arclength equation ``theta<u-u*, t_u>_w + (1-theta)(lam-lam*)t_lam - ds = 0``."""

    u_ref: np.ndarray
    lam_ref: float
    t_u: np.ndarray
    t_lam: float
    ds: float
    theta: float = 0.9

    def norm(self, inner) -> float:
        return math.sqrt(self.theta * inner(self.t_u, self.t_u) + (1 - self.theta) * self.t_lam ** 2)

    def value(self, u: np.ndarray, lam: float, inner) -> float:
        return (self.theta * inner(u - self.u_ref, self.t_u)
                + (1 - self.theta) * (lam - self.lam_ref) * self.t_lam - self.ds)


@dataclass
class NewtonResult:
    field: SolutionField
    iterations: int
    residual: float
    history: List[float]


def scaled_residual(R: np.ndarray, u: np.ndarray) -> float:
    return float(np.max(np.abs(R)) / (1.0 + np.max(np.abs(u))))


def _factor(A: sp.spmatrix):
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            lu = spla.splu(A.tocsc())
        except (RuntimeError, spla.MatrixRankWarning) as exc:
            raise SingularJacobian(f"fold or ellipticity loss suspected: {exc}") from exc
    return lu


def _solve(lu, rhs: np.ndarray) -> np.ndarray:
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SingularJacobian("fold or ellipticity loss suspected: non-finite linear solve")
    return x


def newton_fixed_lambda(guess: SolutionField, model: ConstitutiveModel, force: BodyForce,
                        settings: NewtonSettings = NewtonSettings()) -> NewtonResult:
    """Solve ``R(u, lam) = 0`` at the load carried by ``guess``."""
    if not guess.lam > 0:
        raise ValueError(f"lambda must be positive, got {guess.lam}")
    grid = guess.grid
    free = ~grid.dirichlet_mask().ravel()
    u = guess.u.ravel().copy()
    lam = guess.lam

    def resid(vec):
        return assemble_residual(SolutionField(grid, vec.reshape(grid.shape), lam), model, force)

    R = resid(u)
    r = scaled_residual(R, u)
    history = [r]
    it = 0
    while r > settings.tol_residual:
        if it >= settings.max_iterations:
            raise NonConvergence(f"no convergence in {settings.max_iterations} iterations", history)
        J = assemble_jacobian(SolutionField(grid, u.reshape(grid.shape), lam), model, force)
        du = -_solve(_factor(J), R)
        du[~free] = 0.0
        step = 1.0
        while True:
            trial = u + step * du
            try:
                R_t = resid(trial)
                r_t = scaled_residual(R_t, trial)
            except EllipticityExceeded:
                r_t = math.inf
            if r_t < r or step <= settings.min_step:
                break
            step *= settings.backtrack
        if not math.isfinite(r_t):
            # re-raise the guard error from the best trial
            resid(trial)
        if r_t >= r:
            raise StepTooLarge(f"backtracking exhausted at residual {r:.3e}")
        u, R, r = trial, R_t, r_t
        it += 1
        history.append(r)
        log.debug("newton it=%d residual=%.3e step=%.3g", it, r, step)
    return NewtonResult(SolutionField(grid, u.reshape(grid.shape), lam), it, r, history)


def newton_arclength(guess: SolutionField, constraint: ArclengthConstraint, model: ConstitutiveModel,
                     force: BodyForce, settings: NewtonSettings = NewtonSettings()) -> NewtonResult:
    """Solve the bordered system ``[R(u, lam); N(u, lam)] = 0``.

    The bordered matrix ``[[J, R_lam], [theta*w*t_u^T, (1-theta) t_lam]]`` is
    factored directly, which stays well conditioned where ``J`` alone is
    nearly singular (folds, wide plateaus).
    """
    grid = guess.grid
    inner = grid.inner
    tnorm = constraint.norm(inner)
    if not math.isclose(tnorm, 1.0, rel_tol=1e-8):
        raise ValueError(f"arclength tangent must have unit weighted norm, got {tnorm}")
    free = ~grid.dirichlet_mask().ravel()
    w = grid.hx * grid.hy
    u = guess.u.ravel().copy()
    lam = guess.lam
    c = constraint.theta * w * constraint.t_u
    d = (1 - constraint.theta) * constraint.t_lam

    def full_residual(vec, lm):
        fld = SolutionField(grid, vec.reshape(grid.shape), lm)
        R = assemble_residual(fld, model, force)
        N = constraint.value(vec, lm, inner)
        return R, N

    def measure(R, N, vec):
        # the arclength row is scaled by the field amplitude like the PDE rows
        return max(scaled_residual(R, vec), abs(N) / (1.0 + np.max(np.abs(vec))))

    R, N = full_residual(u, lam)
    r = measure(R, N, u)
    history = [r]
    it = 0
    while r > settings.tol_residual:
        if it >= settings.max_iterations:
            raise NonConvergence(f"no convergence in {settings.max_iterations} iterations", history)
        fld = SolutionField(grid, u.reshape(grid.shape), lam)
        J = assemble_jacobian(fld, model, force)
        Rl = residual_lambda_derivative(fld, force)
        A = sp.bmat([[J, sp.csr_matrix(Rl[:, None])],
                     [sp.csr_matrix(c[None, :]), sp.csr_matrix([[d]])]], format="csc")
        sol = _solve(_factor(A), -np.concatenate([R, [N]]))
        du, dl = sol[:-1], float(sol[-1])
        du[~free] = 0.0
        step = 1.0
        while True:
            tu, tl = u + step * du, lam + step * dl
            try:
                R_t, N_t = full_residual(tu, tl)
                r_t = measure(R_t, N_t, tu)
            except EllipticityExceeded:
                r_t = math.inf
            if r_t < r or step <= settings.min_step:
                break
            step *= settings.backtrack
        if not math.isfinite(r_t):
            full_residual(tu, tl)
        if r_t >= r:
            raise StepTooLarge(f"step too large: backtracking exhausted at residual {r:.3e}")
        u, lam, R, N, r = tu, tl, R_t, N_t, r_t
        it += 1
        history.append(r)
        log.debug("arclength newton it=%d residual=%.3e lam=%.8g step=%.3g", it, r, lam, step)
    return NewtonResult(SolutionField(grid, u.reshape(grid.shape), lam), it, r, history)
