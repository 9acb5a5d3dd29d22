"""Invariants, shape metrics and a-priori bounds evaluated on a discrete solution.

All transversal integrals use the composite trapezoid rule on ``[0, pi/2]``
and are doubled by evenness.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .constitutive import BodyForce, ConstitutiveModel, ModelKind, sample_points
from .discretization import SolutionField, assemble_residual, margin_field, half_point_shear
from .solver import scaled_residual


class ProfileError(RuntimeError):
    """No nontrivial transversal state was found by shooting."""


class GridMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# nodal derivatives


def node_derivatives(field: SolutionField) -> Tuple[np.ndarray, np.ndarray]:
    """``(u_x, u_y)`` at nodes: centered inside, mirrored ghosts on symmetry
    lines, second-order one-sided differences on the Dirichlet lines."""
    u, g = field.u, field.grid
    ux = np.empty_like(u)
    uy = np.empty_like(u)
    ux[1:-1] = (u[2:] - u[:-2]) / (2 * g.hx)
    ux[0] = 0.0
    ux[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * g.hx)
    uy[:, 1:-1] = (u[:, 2:] - u[:, :-2]) / (2 * g.hy)
    uy[:, 0] = 0.0
    uy[:, -1] = (3 * u[:, -1] - 4 * u[:, -2] + u[:, -3]) / (2 * g.hy)
    return ux, uy


def _trapz_y(values: np.ndarray, hy: float) -> np.ndarray:
    """Trapezoid over the last axis on ``[0, pi/2]``, doubled to ``[-pi/2, pi/2]``."""
    return 2.0 * hy * (values[..., 1:-1].sum(axis=-1) + 0.5 * (values[..., 0] + values[..., -1]))


def hamiltonian_profile(field: SolutionField, model: ConstitutiveModel,
                        force: BodyForce) -> Tuple[np.ndarray, float]:
    """Per-column conserved quantity ``H(x_i)`` and ``max_i |H(x_i)|``."""
    ux, uy = node_derivatives(field)
    q = ux ** 2 + uy ** 2
    dens = 0.5 * model.W(q) - model.Wp(q) * ux ** 2 + force.B(field.u, field.lam)
    H = _trapz_y(dens, field.grid.hy)
    return H, float(np.max(np.abs(H)))


# ---------------------------------------------------------------------------
# nodal signs


@dataclass
class NodalFlags:
    ux_negative_interior: bool
    uy_negative_interior: bool
    uxx_negative_on_L: bool
    uxy_positive_on_T: bool
    uyy_negative_on_M: bool

    @property
    def all_ok(self) -> bool:
        return all(asdict(self).values())


def nodal_check(field: SolutionField) -> NodalFlags:
    """Strict sign pattern of a monotone, doubly even solution on the quarter strip.

    Interior: ``u_x < 0`` and ``u_y < 0``. On ``x = 0``: ``u_xx < 0``. On
    ``y = pi/2``: ``u_xy > 0``. On ``y = 0``: ``u_yy < 0``.
    """
    u, g = field.u, field.grid
    hx, hy = g.hx, g.hy
    inner = u[1:-1, 1:-1]
    ux = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * hx)
    uy = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * hy)
    # L: x = 0, 0 <= y < pi/2; mirrored ghost makes u_xx = 2(u_1 - u_0)/hx^2
    uxx_L = 2.0 * (u[1, :-1] - u[0, :-1]) / hx ** 2
    # T: y = pi/2, 0 < x < L; one-sided second order in y of the centered x-difference
    dx = (u[2:, :] - u[:-2, :]) / (2 * hx)
    uxy_T = (3 * dx[:, -1] - 4 * dx[:, -2] + dx[:, -3]) / (2 * hy)
    # M: y = 0, 0 <= x < L; u_yy = 2(u_{i,1} - u_{i,0})/hy^2
    uyy_M = 2.0 * (u[:-1, 1] - u[:-1, 0]) / hy ** 2
    return NodalFlags(
        ux_negative_interior=bool(inner.size and np.all(ux < 0)),
        uy_negative_interior=bool(inner.size and np.all(uy < 0)),
        uxx_negative_on_L=bool(np.all(uxx_L < 0)),
        uxy_positive_on_T=bool(np.all(uxy_T > 0)),
        uyy_negative_on_M=bool(np.all(uyy_M < 0)),
    )


# ---------------------------------------------------------------------------
# shape


def centerline_width(field: SolutionField, sigma: float = 0.5) -> float:
    """Twice the abscissa where ``u(x, 0)`` first drops to ``sigma * u(0, 0)``."""
    if not 0 < sigma < 1:
        raise ValueError("sigma must lie in (0, 1)")
    v = field.u[:, 0]
    top = v[0]
    if not top > 0:
        return 0.0
    level = sigma * top
    below = np.nonzero(v <= level)[0]
    if below.size == 0:
        return 2.0 * field.grid.L
    k = below[0]
    x = field.grid.x
    # linear interpolation between nodes k-1 and k
    x0, x1, v0, v1 = x[k - 1], x[k], v[k - 1], v[k]
    return float(2.0 * (x0 + (v0 - level) * (x1 - x0) / (v0 - v1)))


def shape_metrics(field: SolutionField, model: ConstitutiveModel,
                  sigma: float = 0.5) -> Tuple[float, float, float, float]:
    """``(amplitude, width_half, sup_grad_sq, e_min)`` with shear sampled at half points."""
    amplitude = float(np.max(field.u))
    width = centerline_width(field, sigma) if amplitude > 0 else 0.0
    qx, qy = half_point_shear(field)
    sup_q = float(max(qx.max(), qy.max()))
    _, _, e_min, _ = margin_field(field, model)
    return amplitude, width, sup_q, e_min


# ---------------------------------------------------------------------------
# a-priori bounds


def _l6_constant(model: ConstitutiveModel, force: BodyForce) -> float:
    return abs(model.c1 + 0.5 * force.b1 * math.pi) * math.pi ** (1.0 / 3.0) / model.c2


@dataclass
class BoundReport:
    l6_bound_lhs: Optional[float]
    l6_bound_rhs: Optional[float]
    l6_pass: Optional[bool]
    lambda_inequality_value: Optional[float]
    lambda_pass: Optional[bool]
    gradient_bound_lhs: float
    gradient_bound_rhs: float
    gradient_pass: bool
    gradient_bound_rhs_literal: float = float("nan")

    @property
    def all_pass(self) -> bool:
        return all(f is not False for f in (self.l6_pass, self.lambda_pass, self.gradient_pass))


def analytic_bound_checks(field: SolutionField, model: ConstitutiveModel, force: BodyForce,
                          xi1: Optional[float] = None) -> BoundReport:
    """Evaluate the L6 bound on ``u_y(0, .)``, the load inequality and the gradient bound.

    The load inequality value is ``(lam - 1)||u(0,.)||_2^2 + (b1/2)||u(0,.)||_4^4``
    and must be non-positive. The gradient bound is the one delivered by the
    Payne-Philippin function ``P = 2qW'(q) - W(q) - 2B(u, lam)``::

        sup |grad u|^2 <= 2 u(0,0) max|b(u, lam)| / xi1

    ``gradient_bound_rhs_literal`` records ``2 u(0,0)^2 max|b| / xi1`` for
    comparison; it is not used for the pass flag.
    """
    g = field.grid
    u = field.u
    ux, uy = node_derivatives(field)
    q_sup = float(np.max(ux ** 2 + uy ** 2))
    u00 = float(u[0, 0])
    bmax = float(np.max(np.abs(force.b(u, field.lam))))
    if xi1 is None:
        xi1 = model.xi1
    if xi1 is None and model.model_kind is ModelKind.MODEL_I:
        xi1 = float(np.min(model.margin(sample_points(0.0, model.q_probe_max, 400))))
    if model.model_kind is ModelKind.MODEL_II:
        # margin bounded below only away from q1; use the sampled minimum on the field
        _, _, xi1, _ = margin_field(field, model)
    if xi1 is None or xi1 <= 0:
        raise ValueError("a positive ellipticity floor xi1 is required for the gradient bound")
    grad_rhs = 2.0 * abs(u00) * bmax / xi1
    literal = 2.0 * u00 ** 2 * bmax / xi1
    grad_pass = q_sup <= grad_rhs

    if model.model_kind is ModelKind.MODEL_II or model.c2 <= 0:
        return BoundReport(None, None, None, None, None, q_sup, grad_rhs, grad_pass, literal)

    col_u = u[0]
    col_uy = uy[0]
    l6_lhs = float(_trapz_y(col_uy ** 6, g.hy)) ** (1.0 / 3.0)
    l6_rhs = _l6_constant(model, force)
    l2 = float(_trapz_y(col_u ** 2, g.hy))
    l4 = float(_trapz_y(col_u ** 4, g.hy))
    lam_val = (field.lam - 1.0) * l2 + 0.5 * force.b1 * l4
    lam_tol = 1e-8 * (1.0 + float(np.max(np.abs(u))) ** 2)
    return BoundReport(l6_lhs, l6_rhs, l6_lhs <= l6_rhs, lam_val, lam_val <= lam_tol,
                       q_sup, grad_rhs, grad_pass, literal)


# ---------------------------------------------------------------------------
# transversal limit state


@dataclass
class TransversalProfile:
    lam: float
    mu: float
    y: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    trivial: bool = False


def _shoot(model: ConstitutiveModel, force: BodyForce, lam: float, mu: float,
           y_nodes: np.ndarray, substeps: int):
    """RK4 for ``(U, U_y)`` with ``U_yy = b(U, lam) / margin(U_y^2)`` from ``y = 0``."""

    # scalar Horner forms; numpy calls dominate the cost otherwise
    ecoef = [float(c) for c in model.margin_coeffs()[::-1]]
    bcoef = [float(c) for c in force.odd_coeffs[::-1]]
    shift = lam - 1.0

    def f(U, P):
        q = P * P
        e = 0.0
        for c in ecoef:
            e = e * q + c
        if e <= 0:
            raise ProfileError("transversal profile left the elliptic range")
        z2 = U * U
        acc = 0.0
        for c in bcoef:
            acc = acc * z2 + c
        return P, (shift * U + acc * U * z2) / e

    U, P = mu, 0.0
    vals, slopes = [U], [P]
    for k in range(len(y_nodes) - 1):
        h = (y_nodes[k + 1] - y_nodes[k]) / substeps
        for _ in range(substeps):
            k1 = f(U, P)
            k2 = f(U + 0.5 * h * k1[0], P + 0.5 * h * k1[1])
            k3 = f(U + 0.5 * h * k2[0], P + 0.5 * h * k2[1])
            k4 = f(U + h * k3[0], P + h * k3[1])
            U += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            P += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            if not (math.isfinite(U) and math.isfinite(P)) or abs(U) + abs(P) > 1e6:
                raise ProfileError("shooting trajectory diverged")
        vals.append(U)
        slopes.append(P)
    return np.array(vals), np.array(slopes)


def limiting_profile(model: ConstitutiveModel, force: BodyForce, lam: float, mu_init: float,
                     y: Optional[np.ndarray] = None, substeps: int = 8,
                     tol: float = 1e-12) -> TransversalProfile:
    """Even nontrivial solution of ``(W'(U_y^2) U_y)_y = b(U, lam)``, ``U(pi/2) = 0``.

    Shoots from ``U(0) = mu``, ``U_y(0) = 0`` and corrects ``mu`` with a
    secant iteration, after bracketing a sign change of ``U(pi/2)`` around
    ``mu_init``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if y is None:
        y = np.linspace(0.0, 0.5 * math.pi, 257)
    y = np.asarray(y, dtype=float)
    if mu_init == 0:
        z = np.zeros_like(y)
        return TransversalProfile(lam, 0.0, y, z, z.copy(), trivial=True)
    if mu_init < 0:
        raise ValueError("mu_init must be non-negative")

    def end(mu):
        vals, _ = _shoot(model, force, lam, mu, y, substeps)
        return vals[-1]

    # bracket: expand geometrically around mu_init
    lo, hi = mu_init, mu_init
    f_lo = f_hi = end(mu_init)
    bracket = None
    if f_lo == 0:
        bracket = (mu_init, mu_init)
    for k in range(1, 40):
        if bracket:
            break
        fac = 1.0 + 0.05 * k
        for cand in (mu_init / fac, mu_init * fac):
            try:
                fc = end(cand)
            except ProfileError:
                continue
            if cand < lo:
                if np.sign(fc) != np.sign(f_lo):
                    bracket = (cand, lo)
                    break
                lo, f_lo = cand, fc
            else:
                if np.sign(fc) != np.sign(f_hi):
                    bracket = (hi, cand)
                    break
                hi, f_hi = cand, fc
    if bracket is None:
        raise ProfileError(f"no nontrivial transversal state near mu={mu_init} at lambda={lam}")
    a, b = bracket
    fa, fb = end(a), end(b)
    mu = a
    for _ in range(200):
        if fa == 0:
            mu = a
            break
        if fb == 0:
            mu = b
            break
        # Illinois-style regula falsi keeps the bracket
        mu = b - fb * (b - a) / (fb - fa)
        fm = end(mu)
        if abs(fm) <= tol or abs(b - a) <= 1e-15 * max(1.0, abs(mu)):
            break
        if np.sign(fm) == np.sign(fb):
            fa *= 0.5
        else:
            a, fa = b, fb
        b, fb = mu, fm
    vals, slopes = _shoot(model, force, lam, mu, y, substeps)
    vals[-1] = 0.0
    return TransversalProfile(lam, float(mu), y, vals, slopes, trivial=False)


def front_identity(profile: TransversalProfile, model: ConstitutiveModel, force: BodyForce) -> float:
    """``int (W'(U_y^2) U_y^2 - W(U_y^2) + b(U) U - 2 B(U)) dy`` over the full section."""
    U, P = profile.values, profile.slopes
    q = P * P
    dens = model.Wp(q) * q - model.W(q) + force.b(U, profile.lam) * U - 2.0 * force.B(U, profile.lam)
    hy = profile.y[1] - profile.y[0]
    if not np.allclose(np.diff(profile.y), hy):
        return float(2.0 * np.trapezoid(dens, profile.y))
    return float(_trapz_y(dens, hy))


def transversal_hamiltonian(profile: TransversalProfile, model: ConstitutiveModel, force: BodyForce) -> float:
    """``int (W(U_y^2)/2 + B(U)) dy``: the conserved quantity of an x-independent state."""
    q = profile.slopes ** 2
    dens = 0.5 * model.W(q) + force.B(profile.values, profile.lam)
    return float(2.0 * np.trapezoid(dens, profile.y))


def compare_center_profile(field: SolutionField, profile: TransversalProfile) -> float:
    """``max_j |u(0, y_j) - U(y_j)| / amplitude``."""
    if len(profile.y) != len(field.grid.y) or not np.allclose(profile.y, field.grid.y):
        raise GridMismatch("profile and field use different transversal grids")
    amp = float(np.max(np.abs(field.u)))
    gap = float(np.max(np.abs(field.u[0] - profile.values)))
    if amp == 0:
        return gap
    return gap / amp


# ---------------------------------------------------------------------------
# record


@dataclass
class DiagnosticsRecord:
    amplitude: float
    width_half: float
    sup_grad_sq: float
    e_min: float
    e_min_location: Tuple[float, float]
    H_max_dev: float
    residual_norm: float
    nodal: NodalFlags
    bounds: Optional[BoundReport]
    front_gap: Optional[float] = None

    def to_dict(self) -> Dict:
        d = asdict(self)
        d["nodal_ok"] = self.nodal.all_ok
        d["e_min_location"] = list(self.e_min_location)
        return d

    @classmethod
    def from_dict(cls, d: Dict) -> "DiagnosticsRecord":
        d = dict(d)
        d.pop("nodal_ok", None)
        nodal = NodalFlags(**d.pop("nodal"))
        b = d.pop("bounds")
        bounds = BoundReport(**b) if b is not None else None
        d["e_min_location"] = tuple(d["e_min_location"])
        return cls(nodal=nodal, bounds=bounds, **d)


def diagnose(field: SolutionField, model: ConstitutiveModel, force: BodyForce,
             sigma: float = 0.5, xi1: Optional[float] = None,
             with_bounds: bool = True) -> DiagnosticsRecord:
    amplitude, width, sup_q, _ = shape_metrics(field, model, sigma)
    _, _, e_min, loc = margin_field(field, model)
    _, hdev = hamiltonian_profile(field, model, force)
    R = assemble_residual(field, model, force)
    bounds = None
    if with_bounds and amplitude > 0:
        try:
            bounds = analytic_bound_checks(field, model, force, xi1)
        except ValueError:
            bounds = None
    return DiagnosticsRecord(amplitude, width, sup_q, e_min, loc, hdev,
                             scaled_residual(R, field.u), nodal_check(field), bounds)
