"""Strain-energy laws, live loads and the structural hypotheses they must satisfy.

The strain energy is a polynomial in the shear invariant ``q = |grad u|**2``::

    W(q) = C1*q + C2*q**2 + ... + Cn*q**n,     C1 = 1

and the body force is an odd polynomial in the displacement ``z``::

    b(z, lam) = (lam - 1)*z + b1*z**3 + b3*z**5 + b5*z**7

The quantity that controls ellipticity of the anti-plane equilibrium equation
is the margin ``e(q) = W'(q) + 2*q*W''(q)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

ROOT_TOL = 1e-12


class ModelKind(str, enum.Enum):
    MODEL_I = "ModelI"
    MODEL_II = "ModelII"


class ConstitutiveError(ValueError):
    """Raised for invalid inputs to the constitutive routines."""


class NotModelIIError(ConstitutiveError):
    """The ellipticity margin never vanishes on the probed range."""


@dataclass(frozen=True)
class ConstitutiveModel:
    """Polynomial strain-energy law ``W(q) = sum_i coeffs[i] * q**(i+1)``.

    Parameters
    ----------
    coeffs : sequence of float
        ``C1..Cn``; ``C1`` must equal 1.
    model_kind : ModelKind
        Which structural class the law is meant to belong to.
    q_probe_max : float
        Upper end of the interval on which hypotheses are sampled.
    xi1 : float, optional
        Ellipticity floor (Model I). Filled in by :func:`verify_hypotheses`
        unless supplied by the user.
    q1 : float, optional
        Shear at which ellipticity is lost (Model II).
    """

    coeffs: Tuple[float, ...]
    model_kind: ModelKind = ModelKind.MODEL_I
    q_probe_max: float = 10.0
    xi1: Optional[float] = None
    q1: Optional[float] = None

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs or coeffs[0] != 1.0:
            raise ConstitutiveError("strain energy must be normalized with C1 = 1")
        if not all(math.isfinite(c) for c in coeffs):
            raise ConstitutiveError("non-finite strain-energy coefficient")
        if not (self.q_probe_max > 0 and math.isfinite(self.q_probe_max)):
            raise ConstitutiveError("q_probe_max must be positive and finite")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "model_kind", ModelKind(self.model_kind))

    @classmethod
    def from_expansion(cls, c1: float, c2: float = 0.0, *more: float, **kwargs) -> "ConstitutiveModel":
        """Build ``W = q + c1 q^2 + c2 q^3 + ...``, trimming trailing zeros."""
        coeffs = [1.0, c1, c2, *more]
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs.pop()
        return cls(tuple(coeffs), **kwargs)

    @property
    def c1(self) -> float:
        return self.coeffs[1] if len(self.coeffs) > 1 else 0.0

    @property
    def c2(self) -> float:
        return self.coeffs[2] if len(self.coeffs) > 2 else 0.0

    def _derivative_coeffs(self):
        # ascending powers q^0.. for W, W', W''
        w = np.concatenate([[0.0], self.coeffs])
        wp = np.polynomial.polynomial.polyder(w)
        wpp = np.polynomial.polynomial.polyder(wp)
        return w, wp, wpp

    def W(self, q):
        return np.polynomial.polynomial.polyval(q, self._derivative_coeffs()[0])

    def Wp(self, q):
        return np.polynomial.polynomial.polyval(q, self._derivative_coeffs()[1])

    def Wpp(self, q):
        return np.polynomial.polynomial.polyval(q, self._derivative_coeffs()[2])

    def margin(self, q):
        _, wp, wpp = self._derivative_coeffs()
        P = np.polynomial.polynomial
        return P.polyval(q, wp) + 2.0 * q * P.polyval(q, wpp)

    def margin_coeffs(self) -> np.ndarray:
        """Ascending coefficients of ``e(q)``: ``(2i - 1) * i * C_i`` for ``q^(i-1)``."""
        return np.array([(2 * i - 1) * i * c for i, c in enumerate(self.coeffs, start=1)])

    def with_limits(self, xi1: Optional[float] = None, q1: Optional[float] = None) -> "ConstitutiveModel":
        return ConstitutiveModel(self.coeffs, self.model_kind, self.q_probe_max,
                                 self.xi1 if xi1 is None else xi1,
                                 self.q1 if q1 is None else q1)


@dataclass(frozen=True)
class BodyForce:
    """Odd live load ``b(z, lam) = (lam - 1) z + sum_k odd_coeffs[k] z^(2k+3)``.

    ``odd_coeffs[0]`` is the cubic coefficient ``b1``; at most three higher
    coefficients are allowed (degree <= 7).
    """

    odd_coeffs: Tuple[float, ...] = (0.0,)

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.odd_coeffs) or (0.0,)
        if len(coeffs) > 3:
            raise ConstitutiveError("body force limited to odd polynomials of degree <= 7")
        if not all(math.isfinite(c) for c in coeffs):
            raise ConstitutiveError("non-finite body-force coefficient")
        if coeffs[0] > 0:
            raise ConstitutiveError("cubic body-force coefficient b1 must be <= 0")
        object.__setattr__(self, "odd_coeffs", coeffs)

    @property
    def b1(self) -> float:
        return self.odd_coeffs[0]

    def b(self, z, lam):
        z2 = z * z
        acc = 0.0
        for c in reversed(self.odd_coeffs):
            acc = acc * z2 + c
        return (lam - 1.0) * z + acc * z * z2

    def bz(self, z, lam):
        z2 = z * z
        out = (lam - 1.0) + 0.0 * z
        for k, c in enumerate(self.odd_coeffs):
            p = 2 * k + 3
            out = out + p * c * z2 ** (k + 1)
        return out

    def bzz(self, z, lam):
        out = 0.0 * z
        for k, c in enumerate(self.odd_coeffs):
            p = 2 * k + 3
            out = out + p * (p - 1) * c * z ** (p - 2)
        return out

    def B(self, z, lam):
        """Antiderivative ``int_0^z b(t, lam) dt``."""
        z2 = z * z
        out = 0.5 * (lam - 1.0) * z2
        for k, c in enumerate(self.odd_coeffs):
            p = 2 * k + 3
            out = out + c * z2 ** (k + 2) / (p + 1)
        return out


@dataclass
class HypothesisReport:
    passed: bool
    violations: List[Tuple[str, float, float]] = field(default_factory=list)
    xi1: Optional[float] = None
    q1: Optional[float] = None

    def summary(self, limit: int = 10) -> str:
        lines = [f"passed={self.passed} xi1={self.xi1} q1={self.q1}"]
        for cid, loc, val in self.violations[:limit]:
            lines.append(f"  {cid}: at {loc:.6g} value {val:.6g}")
        if len(self.violations) > limit:
            lines.append(f"  ... {len(self.violations) - limit} more")
        return "\n".join(lines)


def _check_q(q) -> float:
    try:
        q = float(q)
    except (TypeError, ValueError) as exc:
        raise ConstitutiveError(f"q must be a real number, got {q!r}") from exc
    if not math.isfinite(q) or q < 0:
        raise ConstitutiveError(f"q must be finite and >= 0, got {q}")
    return q


def evaluate_energy(model: ConstitutiveModel, q: float) -> Tuple[float, float, float, float]:
    """Return ``(W, W', W'', margin)`` at shear invariant ``q``."""
    q = _check_q(q)
    W, Wp, Wpp = float(model.W(q)), float(model.Wp(q)), float(model.Wpp(q))
    return W, Wp, Wpp, Wp + 2.0 * q * Wpp


def evaluate_body_force(f: BodyForce, z: float, lam: float) -> Tuple[float, float, float]:
    """Return ``(b, b_z, B)`` at displacement ``z`` and load ``lam``."""
    z, lam = float(z), float(lam)
    if not (math.isfinite(z) and math.isfinite(lam)):
        raise ConstitutiveError("non-finite body-force argument")
    return float(f.b(z, lam)), float(f.bz(z, lam)), float(f.B(z, lam))


def sample_points(lo: float, hi: float, samples: int) -> np.ndarray:
    """Uniform grid plus Chebyshev-clustered points near both ends."""
    uniform = np.linspace(lo, hi, samples)
    theta = np.linspace(0.0, np.pi, samples)
    cheb = lo + 0.5 * (hi - lo) * (1.0 - np.cos(theta))
    return np.unique(np.concatenate([uniform, cheb]))


def find_ellipticity_root(model: ConstitutiveModel) -> float:
    """Smallest ``q1 > 0`` with ``margin(q1) = 0``.

    Bracketed on the sampled probe interval, then refined by bisection until
    ``|margin(q1)| <= 1e-12``. Raises :class:`NotModelIIError` when the margin
    never changes sign.
    """
    if model.margin(0.0) <= 0:
        raise ConstitutiveError("margin(0) must be positive")
    qs = sample_points(0.0, model.q_probe_max, 4000)
    e = model.margin(qs)
    bad = np.nonzero(e <= 0.0)[0]
    if bad.size == 0:
        raise NotModelIIError("not a Model II law: margin never vanishes on "
                              f"[0, {model.q_probe_max}]")
    k = bad[0]
    if e[k] == 0.0:
        return float(qs[k])
    lo, hi = float(qs[k - 1]), float(qs[k])
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        em = float(model.margin(mid))
        if em > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    # pick whichever end is closer to the root
    q1 = lo if abs(model.margin(lo)) <= abs(model.margin(hi)) else hi
    if abs(model.margin(q1)) > ROOT_TOL:
        # Newton polish for steep margins
        dcoef = np.polynomial.polynomial.polyder(model.margin_coeffs())
        for _ in range(20):
            d = np.polynomial.polynomial.polyval(q1, dcoef)
            if d == 0:
                break
            q1 -= float(model.margin(q1)) / d
            if abs(model.margin(q1)) <= ROOT_TOL:
                break
    return float(q1)


def verify_hypotheses(model: ConstitutiveModel, f: BodyForce, samples: int = 400) -> HypothesisReport:
    """Sample the structural conditions appropriate to ``model.model_kind``.

    Model I: uniform ellipticity (margin >= xi1 > 0), the cubic lower bound on
    ``W``, the cubic lower bound on ``b`` for ``z >= 0`` and ``-b_z(0, lam) < 1``.
    Model II: ellipticity up to a root ``q1``, ``q W'(q) - W(q) < 0`` and
    concavity of ``b`` for ``z >= 0``.
    """
    if samples < 100:
        raise ConstitutiveError("at least 100 samples are required")
    violations: List[Tuple[str, float, float]] = []
    qs = sample_points(0.0, model.q_probe_max, samples)
    # displacements large enough to cover any field whose gradient stays in range
    z_max = 0.5 * math.pi * math.sqrt(model.q_probe_max)
    zs = sample_points(0.0, z_max, samples)
    lams = (0.05, 0.5, 1.0)
    xi1 = q1 = None

    if f.b1 > 0:
        violations.append(("b1_nonpositive", 0.0, f.b1))

    if model.model_kind is ModelKind.MODEL_I:
        e = model.margin(qs)
        xi1 = float(e.min())
        for q, val in zip(qs, e):
            if val <= 0:
                violations.append(("ellipticity_margin", float(q), float(val)))
        cubic = qs + model.c1 * qs ** 2 + model.c2 * qs ** 3
        gap = model.W(qs) - cubic
        for q, val in zip(qs, gap):
            if val < -1e-12 * (1 + abs(cubic).max()):
                violations.append(("energy_growth", float(q), float(val)))
        for lam in lams:
            gap_b = f.b(zs, lam) - ((lam - 1.0) * zs + f.b1 * zs ** 3)
            for z, val in zip(zs, gap_b):
                if val < -1e-12:
                    violations.append((f"force_lower_bound[lam={lam}]", float(z), float(val)))
        if model.c1 >= 0:
            violations.append(("c1_negative", 0.0, model.c1))
        if model.xi1 is not None:
            xi1 = float(model.xi1)
            if xi1 > float(e.min()):
                violations.append(("user_xi1_above_margin", float(qs[e.argmin()]), float(e.min()) - xi1))
    else:
        try:
            q1 = find_ellipticity_root(model)
        except NotModelIIError:
            violations.append(("ellipticity_loss", float(model.q_probe_max),
                               float(model.margin(model.q_probe_max))))
        if q1 is not None:
            inside = np.linspace(0.0, q1 * (1 - 1e-6), samples)
            e = model.margin(inside)
            for q, val in zip(inside, e):
                if val <= 0:
                    violations.append(("ellipticity_before_root", float(q), float(val)))
            qd = np.linspace(0.0, q1, samples)[1:]
        else:
            qd = qs[1:]
        damp = qd * model.Wp(qd) - model.W(qd)
        for q, val in zip(qd, damp):
            if val >= 0:
                violations.append(("degenerate_damping", float(q), float(val)))
        for lam in lams:
            curv = f.bzz(zs, lam)
            for z, val in zip(zs, curv):
                if val > 1e-12:
                    violations.append((f"force_concavity[lam={lam}]", float(z), float(val)))

    # requirement of the local homoclinic theory: -b_z(0, lam) < 1 for lam > 0
    for lam in lams:
        if -f.bz(0.0, lam) >= 1.0:
            violations.append(("local_theory_bz", lam, float(-f.bz(0.0, lam))))

    return HypothesisReport(passed=not violations, violations=violations, xi1=xi1, q1=q1)
