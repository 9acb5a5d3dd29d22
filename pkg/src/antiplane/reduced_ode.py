"""Leading-order centerline dynamics and the small-amplitude seed field.

Near the reference configuration the centerline displacement ``v(x) = u(x, 0)``
obeys ``v'' = eps^2 v + (3/4)(b1 + 2 c1) v^3`` to leading order. With
``X = eps x``, ``v = eps V`` and ``v_x = eps^2 W`` this is the planar system::

    V_X = W,    W_X = V - k V^3,    k = 3|b1 + 2 c1| / 4

whose homoclinic orbit is ``V = sqrt(2/k) sech X``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .constitutive import BodyForce, ConstitutiveModel


class FrontRegimeError(ValueError):
    """``b1 + 2 c1 >= 0``: small solutions are fronts, not homoclinic pulses."""


class DivergenceError(RuntimeError):
    """Trajectory left the homoclinic neighborhood."""


@dataclass(frozen=True)
class PlanarState:
    V: float
    W: float
    X: float = 0.0


@dataclass(frozen=True)
class SeedParameters:
    epsilon: float
    alpha: float
    lam: float

    @classmethod
    def from_model(cls, model: ConstitutiveModel, force: BodyForce, epsilon: float) -> "SeedParameters":
        return cls(epsilon=epsilon, alpha=homoclinic_amplitude(model, force), lam=epsilon ** 2)


def cubic_coefficient(model: ConstitutiveModel, force: BodyForce) -> float:
    """``b1 + 2 c1``; must be negative for homoclinic small solutions."""
    return force.b1 + 2.0 * model.c1


def homoclinic_amplitude(model: ConstitutiveModel, force: BodyForce) -> float:
    """Amplitude ``alpha`` with ``alpha eps sech(eps x)`` solving the centerline ODE."""
    s = cubic_coefficient(model, force)
    if s >= 0:
        raise FrontRegimeError(f"b1 + 2 c1 = {s} >= 0: front regime, no homoclinic seed")
    return math.sqrt(8.0 / (3.0 * abs(s)))


def stated_amplitude(model: ConstitutiveModel, force: BodyForce) -> float:
    """The amplitude constant ``2 / sqrt(3 |b1 + 2 c1|)`` in its commonly tabulated form.

    It is a factor ``sqrt 2`` smaller than :func:`homoclinic_amplitude`; kept
    for run metadata only.
    """
    return 2.0 / math.sqrt(3.0 * abs(cubic_coefficient(model, force)))


def default_k(alpha: float) -> float:
    """Cubic coefficient ``k = 2 / alpha^2 = 3|b1 + 2 c1| / 4`` whose orbit has amplitude ``alpha``."""
    return 2.0 / alpha ** 2


def rhs_planar(s: PlanarState, eps: float, k: float) -> Tuple[float, float]:
    if k <= 0:
        raise ValueError("k must be positive")
    return s.W, s.V - k * s.V ** 3


def closed_form_orbit(X: float, k: float) -> PlanarState:
    if k <= 0:
        raise ValueError("k must be positive")
    a = math.sqrt(2.0 / k)
    if abs(X) > 700:
        return PlanarState(0.0, 0.0, X)
    sech = 1.0 / math.cosh(X)
    return PlanarState(a * sech, -a * sech * math.tanh(X), X)


def planar_energy(V, W, k):
    """First integral ``W^2/2 - V^2/2 + k V^4/4``; zero on the homoclinic orbit."""
    return 0.5 * W ** 2 - 0.5 * V ** 2 + 0.25 * k * V ** 4


def integrate_planar(s0: PlanarState, eps: float, k: float, X_end: float, h: float) -> List[PlanarState]:
    """Classical RK4 from ``s0`` to ``X_end``; the final step is shortened to land exactly."""
    if h <= 0:
        raise ValueError("step h must be positive")
    span = X_end - s0.X
    if abs(span) / h > 1e7:
        raise ValueError("too many steps requested")
    n = int(math.ceil(abs(span) / h - 1e-9))
    direction = 1.0 if span >= 0 else -1.0

    def f(y):
        return np.array([y[1], y[0] - k * y[0] ** 3])

    y = np.array([s0.V, s0.W], dtype=float)
    X = s0.X
    out = [PlanarState(float(y[0]), float(y[1]), X)]
    for i in range(1, n + 1):
        X_next = X_end if i == n else s0.X + i * direction * h
        step = X_next - X
        k1 = f(y)
        k2 = f(y + 0.5 * step * k1)
        k3 = f(y + 0.5 * step * k2)
        k4 = f(y + step * k3)
        y = y + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        X = X_next
        if not np.all(np.isfinite(y)) or np.hypot(y[0], y[1]) > 1e6:
            raise DivergenceError(f"state norm exceeded 1e6 at X={X}")
        out.append(PlanarState(float(y[0]), float(y[1]), X))
    return out


def seed_values(params: SeedParameters, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``alpha eps sech(eps x) cos(y)`` on the tensor grid ``x`` by ``y``."""
    eps = params.epsilon
    prof = params.alpha * eps / np.cosh(np.minimum(eps * x, 700.0))
    return np.outer(prof, np.cos(y))


def homoclinic_seed(params: SeedParameters, grid, model: ConstitutiveModel = None,
                    force: BodyForce = None):
    """Small-amplitude homoclinic field on ``grid`` with ``lambda = eps^2``.

    Dirichlet lines (``x = L`` and ``y = pi/2``) are set to exact zeros.
    If ``model`` and ``force`` are given, the front-regime precondition is checked.
    """
    from .discretization import SolutionField

    if model is not None and force is not None:
        homoclinic_amplitude(model, force)
    if not params.epsilon > 0:
        raise ValueError("epsilon must be positive")
    u = seed_values(params, grid.x, grid.y)
    u[-1, :] = 0.0
    u[:, -1] = 0.0
    return SolutionField(grid, u, params.lam)
