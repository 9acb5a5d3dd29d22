"""Finite-difference discretization of the anti-plane equilibrium equation.

The unknown lives on the quarter strip ``[0, L] x [0, pi/2]``. Evenness in
``x`` and ``y`` is imposed with reflected ghost nodes; ``x = L`` and
``y = pi/2`` carry homogeneous Dirichlet data. The residual is written in
conservative form::

    R_ij = (Fx[i+1/2, j] - Fx[i-1/2, j]) / hx
         + (Fy[i, j+1/2] - Fy[i, j-1/2]) / hy - b(u_ij, lam)

with half-point fluxes ``F = W'(q) * (normal difference quotient)``. At a
half point the transverse derivative is the mean of the two adjacent centered
quotients, so every residual row touches a 3x3 block of nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.sparse as sp

from .constitutive import BodyForce, ConstitutiveModel, ModelKind

MIN_CELLS = 16


class GridError(ValueError):
    pass


class FieldError(ValueError):
    pass


class EllipticityExceeded(RuntimeError):
    """A half-point shear reached the ellipticity-loss value ``q1``."""

    def __init__(self, q: float, q1: float, location: Tuple[float, float]):
        self.q, self.q1, self.location = q, q1, location
        super().__init__(f"ellipticity exceeded: |grad u|^2 = {q:.6g} >= q1 = {q1:.6g} "
                         f"at (x, y) = ({location[0]:.6g}, {location[1]:.6g})")


@dataclass(frozen=True)
class StripGrid:
    L: float
    Nx: int
    Ny: int

    def __post_init__(self):
        if not (isinstance(self.L, (int, float)) and math.isfinite(self.L) and self.L > 0):
            raise GridError(f"L must be positive and finite, got {self.L!r}")
        for name in ("Nx", "Ny"):
            n = getattr(self, name)
            if int(n) != n or n < MIN_CELLS:
                raise GridError(f"{name} must be an integer >= {MIN_CELLS}, got {n!r}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "Nx", int(self.Nx))
        object.__setattr__(self, "Ny", int(self.Ny))

    @property
    def hx(self) -> float:
        return self.L / self.Nx

    @property
    def hy(self) -> float:
        return 0.5 * math.pi / self.Ny

    @property
    def x(self) -> np.ndarray:
        x = np.arange(self.Nx + 1) * self.hx
        x[-1] = self.L
        return x

    @property
    def y(self) -> np.ndarray:
        y = np.arange(self.Ny + 1) * self.hy
        y[-1] = 0.5 * math.pi
        return y

    @property
    def shape(self) -> Tuple[int, int]:
        return self.Nx + 1, self.Ny + 1

    @property
    def size(self) -> int:
        return (self.Nx + 1) * (self.Ny + 1)

    def dirichlet_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[-1, :] = True
        m[:, -1] = True
        return m

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """Discrete ``hx*hy``-weighted inner product on the quarter grid."""
        return float(self.hx * self.hy * np.vdot(a, b))


def build_grid(L: float, Nx: int, Ny: int) -> StripGrid:
    return StripGrid(L, Nx, Ny)


@dataclass
class SolutionField:
    grid: StripGrid
    u: np.ndarray
    lam: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.shape != self.grid.shape:
            raise FieldError(f"field shape {u.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(u)):
            raise FieldError("field contains non-finite values")
        if np.any(u[:, -1] != 0.0):
            raise FieldError("field must vanish on the clamped boundary y = pi/2")
        if not math.isfinite(self.lam):
            raise FieldError("lambda must be finite")
        self.u = u
        self.lam = float(self.lam)

    def copy(self) -> "SolutionField":
        return SolutionField(self.grid, self.u.copy(), self.lam)

    @property
    def amplitude(self) -> float:
        return float(np.max(np.abs(self.u)))


# ---------------------------------------------------------------------------
# stencil bookkeeping


def _padded(u: np.ndarray) -> np.ndarray:
    """Add one reflected ghost layer at ``x = -hx`` and ``y = -hy``."""
    P = np.empty((u.shape[0] + 1, u.shape[1] + 1))
    P[1:, 1:] = u
    P[0, 1:] = u[1, :]
    P[1:, 0] = u[:, 1]
    P[0, 0] = u[1, 1]
    return P


def _padded_index(grid: StripGrid) -> np.ndarray:
    """Flat node index for every padded position (ghosts map to their mirror)."""
    i = np.abs(np.arange(grid.Nx + 2) - 1)
    j = np.abs(np.arange(grid.Ny + 2) - 1)
    return i[:, None] * (grid.Ny + 1) + j[None, :]


@dataclass
class _Fluxes:
    gx: np.ndarray  # (Nx+1, Ny) x-quotient at (i+1/2, j), i = -1..Nx-1
    ty: np.ndarray
    qx: np.ndarray
    gy: np.ndarray  # (Nx, Ny+1) y-quotient at (i, j+1/2), j = -1..Ny-1
    tx: np.ndarray
    qy: np.ndarray


def _fluxes(P: np.ndarray, grid: StripGrid) -> _Fluxes:
    hx, hy = grid.hx, grid.hy
    Nx, Ny = grid.Nx, grid.Ny
    # x half points: padded rows p = 0..Nx (left) / 1..Nx+1 (right), cols r = 1..Ny
    L_ = P[0:Nx + 1, 1:Ny + 1]
    R_ = P[1:Nx + 2, 1:Ny + 1]
    gx = (R_ - L_) / hx
    ty = ((P[0:Nx + 1, 2:Ny + 2] - P[0:Nx + 1, 0:Ny])
          + (P[1:Nx + 2, 2:Ny + 2] - P[1:Nx + 2, 0:Ny])) / (4.0 * hy)
    # y half points: padded rows p = 1..Nx, cols r = 0..Ny (lower) / 1..Ny+1 (upper)
    D_ = P[1:Nx + 1, 0:Ny + 1]
    U_ = P[1:Nx + 1, 1:Ny + 2]
    gy = (U_ - D_) / hy
    tx = ((P[2:Nx + 2, 0:Ny + 1] - P[0:Nx, 0:Ny + 1])
          + (P[2:Nx + 2, 1:Ny + 2] - P[0:Nx, 1:Ny + 2])) / (4.0 * hx)
    return _Fluxes(gx, ty, gx * gx + ty * ty, gy, tx, gy * gy + tx * tx)


def half_point_shear(field: SolutionField) -> Tuple[np.ndarray, np.ndarray]:
    """``|grad u|^2`` at x-half points ``(Nx+1, Ny)`` and y-half points ``(Nx, Ny+1)``."""
    fl = _fluxes(_padded(field.u), field.grid)
    return fl.qx, fl.qy


def half_point_coordinates(grid: StripGrid):
    x, y = grid.x, grid.y
    xh = np.concatenate([[-0.5 * grid.hx], 0.5 * (x[:-1] + x[1:])])
    yh = np.concatenate([[-0.5 * grid.hy], 0.5 * (y[:-1] + y[1:])])
    return (xh, y[:-1]), (x[:-1], yh)


def _guard(fl: _Fluxes, model: ConstitutiveModel, grid: StripGrid) -> None:
    if model.model_kind is not ModelKind.MODEL_II or model.q1 is None:
        return
    qxm, qym = float(fl.qx.max()), float(fl.qy.max())
    if max(qxm, qym) < model.q1:
        return
    (xa, ya), (xb, yb) = half_point_coordinates(grid)
    if qxm >= qym:
        i, j = np.unravel_index(np.argmax(fl.qx), fl.qx.shape)
        raise EllipticityExceeded(qxm, model.q1, (float(xa[i]), float(ya[j])))
    i, j = np.unravel_index(np.argmax(fl.qy), fl.qy.shape)
    raise EllipticityExceeded(qym, model.q1, (float(xb[i]), float(yb[j])))


def assemble_residual(field: SolutionField, model: ConstitutiveModel, force: BodyForce) -> np.ndarray:
    """Nodal residual as a flat vector (row-major over ``(i, j)``).

    Dirichlet rows hold the nodal value itself, so they vanish exactly when
    the boundary condition holds.
    """
    grid, u = field.grid, field.u
    fl = _fluxes(_padded(u), grid)
    _guard(fl, model, grid)
    Fx = model.Wp(fl.qx) * fl.gx
    Fy = model.Wp(fl.qy) * fl.gy
    R = u.copy()
    R[:-1, :-1] = ((Fx[1:, :] - Fx[:-1, :]) / grid.hx
                   + (Fy[:, 1:] - Fy[:, :-1]) / grid.hy
                   - force.b(u[:-1, :-1], field.lam))
    return R.ravel()


def residual_lambda_derivative(field: SolutionField, force: BodyForce) -> np.ndarray:
    """``dR/dlam = -db/dlam = -u`` on interior rows."""
    d = np.zeros(field.grid.shape)
    d[:-1, :-1] = -field.u[:-1, :-1]
    return d.ravel()


def assemble_jacobian(field: SolutionField, model: ConstitutiveModel, force: BodyForce) -> sp.csr_matrix:
    """Exact derivative of :func:`assemble_residual` with respect to nodal values."""
    grid, u = field.grid, field.u
    Nx, Ny = grid.Nx, grid.Ny
    hx, hy = grid.hx, grid.hy
    fl = _fluxes(_padded(u), grid)
    _guard(fl, model, grid)
    pidx = _padded_index(grid)
    node = np.arange(grid.size).reshape(grid.shape)

    rows, cols, vals = [], [], []

    def emit(dF, p, r, recv_plus, recv_minus, scale, shape):
        # dF: derivative of flux wrt the padded node (p, r), both arrays of flux shape.
        col = pidx[p, r]
        plus_rows, plus_mask = recv_plus
        minus_rows, minus_mask = recv_minus
        rows.append(plus_rows[plus_mask]); cols.append(col[plus_mask]); vals.append(dF[plus_mask] / scale)
        rows.append(minus_rows[minus_mask]); cols.append(col[minus_mask]); vals.append(-dF[minus_mask] / scale)

    # --- x fluxes, flux index h = 0..Nx stands for i+1/2 with i = h-1
    Wp, Wpp = model.Wp(fl.qx), model.Wpp(fl.qx)
    a_n = Wp + 2.0 * Wpp * fl.gx ** 2       # d F / d g
    a_t = 2.0 * Wpp * fl.gx * fl.ty          # d F / d t
    H, J = np.meshgrid(np.arange(Nx + 1), np.arange(Ny), indexing="ij")
    p_left, r_mid = H, J + 1                 # padded coords of node (h-1, j)
    # Fx[h] enters R[h-1] with + and R[h] with -
    plus = (node[np.clip(H - 1, 0, Nx), J], H - 1 >= 0)
    minus = (node[np.clip(H, 0, Nx), J], H <= Nx - 1)
    deps = [
        (a_n / hx, p_left + 1, r_mid),
        (-a_n / hx, p_left, r_mid),
        (a_t / (4 * hy), p_left, r_mid + 1),
        (-a_t / (4 * hy), p_left, r_mid - 1),
        (a_t / (4 * hy), p_left + 1, r_mid + 1),
        (-a_t / (4 * hy), p_left + 1, r_mid - 1),
    ]
    for dF, p, r in deps:
        emit(dF, p, r, plus, minus, hx, None)

    # --- y fluxes, flux index k = 0..Ny stands for j+1/2 with j = k-1
    Wp, Wpp = model.Wp(fl.qy), model.Wpp(fl.qy)
    a_n = Wp + 2.0 * Wpp * fl.gy ** 2
    a_t = 2.0 * Wpp * fl.gy * fl.tx
    I, K = np.meshgrid(np.arange(Nx), np.arange(Ny + 1), indexing="ij")
    p_mid, r_low = I + 1, K
    plus = (node[I, np.clip(K - 1, 0, Ny)], K - 1 >= 0)
    minus = (node[I, np.clip(K, 0, Ny)], K <= Ny - 1)
    deps = [
        (a_n / hy, p_mid, r_low + 1),
        (-a_n / hy, p_mid, r_low),
        (a_t / (4 * hx), p_mid + 1, r_low),
        (-a_t / (4 * hx), p_mid - 1, r_low),
        (a_t / (4 * hx), p_mid + 1, r_low + 1),
        (-a_t / (4 * hx), p_mid - 1, r_low + 1),
    ]
    for dF, p, r in deps:
        emit(dF, p, r, plus, minus, hy, None)

    # zeroth order and Dirichlet identity rows
    interior = node[:-1, :-1].ravel()
    rows.append(interior); cols.append(interior)
    vals.append(-force.bz(u[:-1, :-1], field.lam).ravel())
    dmask = grid.dirichlet_mask().ravel()
    bnd = np.nonzero(dmask)[0]
    rows.append(bnd); cols.append(bnd); vals.append(np.ones(bnd.size))

    Jm = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(grid.size, grid.size)).tocsr()
    Jm.sum_duplicates()
    return Jm


def margin_field(field: SolutionField, model: ConstitutiveModel):
    """Ellipticity margin at every half point, plus its minimum and location."""
    qx, qy = half_point_shear(field)
    ex, ey = model.margin(qx), model.margin(qy)
    (xa, ya), (xb, yb) = half_point_coordinates(field.grid)
    if ex.min() <= ey.min():
        i, j = np.unravel_index(np.argmin(ex), ex.shape)
        loc = (float(max(xa[i], 0.0)), float(ya[j]))
        return ex, ey, float(ex.min()), loc
    i, j = np.unravel_index(np.argmin(ey), ey.shape)
    return ex, ey, float(ey.min()), (float(xb[i]), float(max(yb[j], 0.0)))


def extend_domain(field: SolutionField, L_new: float, lam_floor: float = 1e-3) -> SolutionField:
    """Lengthen the strip to ``L_new`` keeping ``hx``.

    Old nodes are copied verbatim. New nodes get an exponential tail hung off
    the last interior column; the new ``x = L`` column is zero.
    """
    g = field.grid
    if not L_new > g.L:
        raise GridError(f"new length {L_new} must exceed current length {g.L}")
    Nx_new = int(round(L_new / g.hx))
    if Nx_new <= g.Nx:
        Nx_new = g.Nx + 1
    grid = StripGrid(Nx_new * g.hx, Nx_new, g.Ny)
    u = np.zeros(grid.shape)
    u[:g.Nx + 1] = field.u
    rate = math.sqrt(max(field.lam, lam_floor))
    anchor = field.u[g.Nx - 1]
    dx = grid.x[g.Nx + 1:] - g.x[g.Nx - 1]
    u[g.Nx + 1:] = anchor[None, :] * np.exp(-rate * dx)[:, None]
    u[-1, :] = 0.0
    u[:, -1] = 0.0
    return SolutionField(grid, u, field.lam)


def restrict_domain(field: SolutionField, Nx: int) -> SolutionField:
    """Keep the first ``Nx`` cells (inverse of :func:`extend_domain` on old nodes)."""
    g = field.grid
    grid = StripGrid(Nx * g.hx, Nx, g.Ny)
    return SolutionField(grid, field.u[:Nx + 1].copy(), field.lam)


def resample_field(field: SolutionField, grid: StripGrid) -> SolutionField:
    """Bilinear interpolation of ``field`` onto ``grid`` (zero beyond the old strip)."""
    from scipy.interpolate import RegularGridInterpolator

    g = field.grid
    interp = RegularGridInterpolator((g.x, g.y), field.u, bounds_error=False, fill_value=0.0)
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    u = interp(np.stack([X.ravel(), Y.ravel()], axis=1)).reshape(grid.shape)
    u[-1, :] = 0.0
    u[:, -1] = 0.0
    return SolutionField(grid, u, field.lam)


def assemble_full_strip_residual(u_full: np.ndarray, hx: float, hy: float, lam: float,
                                 model: ConstitutiveModel, force: BodyForce) -> np.ndarray:
    """Brute-force residual on a full rectangle with Dirichlet data on all sides.

    Used only to cross-check the symmetry-reduced assembler. ``u_full`` has
    shape ``(2Nx+1, 2Ny+1)`` covering ``[-L, L] x [-pi/2, pi/2]``.
    """
    n, m = u_full.shape
    R = u_full.copy()
    for i in range(1, n - 1):
        for j in range(1, m - 1):
            def fx(a, bcol):
                g = (u_full[bcol, j] - u_full[a, j]) / hx
                t = ((u_full[a, j + 1] - u_full[a, j - 1]) + (u_full[bcol, j + 1] - u_full[bcol, j - 1])) / (4 * hy)
                return float(model.Wp(g * g + t * t)) * g

            def fy(a, bcol):
                g = (u_full[i, bcol] - u_full[i, a]) / hy
                t = ((u_full[i + 1, a] - u_full[i - 1, a]) + (u_full[i + 1, bcol] - u_full[i - 1, bcol])) / (4 * hx)
                return float(model.Wp(g * g + t * t)) * g

            R[i, j] = ((fx(i, i + 1) - fx(i - 1, i)) / hx + (fy(j, j + 1) - fy(j - 1, j)) / hy
                       - float(force.b(u_full[i, j], lam)))
    return R
