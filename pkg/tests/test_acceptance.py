"""Acceptance gate.

Each test prints one ``PASS``/``FAIL`` line; the lines are repeated in the
pytest terminal summary.
"""

import math
import time

import numpy as np
import pytest

from antiplane.constitutive import (
    BodyForce,
    ConstitutiveModel,
    ModelKind,
    find_ellipticity_root,
    verify_hypotheses,
)
from antiplane.continuation import ContinuationConfig, Termination, run_branch
from antiplane.diagnostics import compare_center_profile, hamiltonian_profile, limiting_profile
from antiplane.discretization import SolutionField, assemble_jacobian, assemble_residual, build_grid
from antiplane.reduced_ode import (
    SeedParameters,
    closed_form_orbit,
    default_k,
    homoclinic_amplitude,
    homoclinic_seed,
    integrate_planar,
)
from antiplane.solver import newton_fixed_lambda, scaled_residual

REPORT = []

MODEL_I = ConstitutiveModel.from_expansion(-0.3, 0.2)
FORCE_I = BodyForce((-0.1,))
MODEL_II = ConstitutiveModel.from_expansion(-0.5, model_kind=ModelKind.MODEL_II)
FORCE_II = BodyForce((0.0,))
EPSILONS = (0.2, 0.1, 0.05)


def verdict(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    REPORT.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def seed_solves():
    """Converged fixed-load solutions from the seed on the coarse and the refined grid."""
    t0 = time.perf_counter()
    coarse, fine = {}, {}
    for eps in EPSILONS:
        params = SeedParameters.from_model(MODEL_I, FORCE_I, eps)
        for store, (Nx, Ny) in ((coarse, (240, 32)), (fine, (480, 64))):
            seed = homoclinic_seed(params, build_grid(60, Nx, Ny), MODEL_I, FORCE_I)
            res = newton_fixed_lambda(seed, MODEL_I, FORCE_I)
            store[eps] = (seed, res)
    return coarse, fine, time.perf_counter() - t0


@pytest.fixture(scope="module")
def model_i_branch():
    t0 = time.perf_counter()
    br = run_branch(ContinuationConfig(seed_epsilon=0.2), MODEL_I, FORCE_I, build_grid(60, 240, 32))
    return br, time.perf_counter() - t0


@pytest.fixture(scope="module")
def model_ii_branch():
    t0 = time.perf_counter()
    cfg = ContinuationConfig(seed_epsilon=0.06, ds_init=0.02, ds_max=0.05, margin_stop=0.2, L_max=40.0)
    br = run_branch(cfg, MODEL_II, FORCE_II, build_grid(40, 240, 32))
    return br, time.perf_counter() - t0


def test_criterion_1_seed_order(seed_solves):
    coarse, _, elapsed = seed_solves
    ratios, resid = [], []
    for eps in EPSILONS:
        seed, res = coarse[eps]
        R = assemble_residual(res.field, MODEL_I, FORCE_I)
        resid.append(scaled_residual(R, res.field.u))
        ratios.append(np.max(np.abs(res.field.u - seed.u)) / eps ** 2)
    band = max(ratios) / min(ratios)
    ok = max(resid) <= 1e-10 and band <= 4.0 and elapsed <= 120.0
    verdict(1, ok, f"ratios {', '.join(f'{r:.4g}' for r in ratios)} band {band:.3g} (<= 4), "
                   f"max residual {max(resid):.2e}, solve time {elapsed:.1f}s")


def test_criterion_2_hamiltonian(seed_solves):
    coarse, fine, _ = seed_solves
    parts, ok = [], True
    for eps in EPSILONS:
        f0, f1 = coarse[eps][1].field, fine[eps][1].field
        d0 = hamiltonian_profile(f0, MODEL_I, FORCE_I)[1]
        d1 = hamiltonian_profile(f1, MODEL_I, FORCE_I)[1]
        amp = np.max(np.abs(f0.u))
        ratio = d0 / d1
        ok &= d0 <= 1e-3 * (1 + amp) and ratio >= 3.0
        parts.append(f"eps={eps}: dev {d0:.2e}, refinement ratio {ratio:.3g}")
    verdict(2, ok, "; ".join(parts))


def test_criterion_3_reduced_ode():
    k = default_k(homoclinic_amplitude(MODEL_I, FORCE_I))
    peak = math.sqrt(2.0 / k)
    errs = []
    for h in (1e-3, 5e-4):
        end = integrate_planar(closed_form_orbit(-10.0, k), 0.2, k, 0.0, h)[-1]
        errs.append(math.hypot(end.V - peak, end.W))
    ratio = errs[0] / errs[1]
    ok = errs[0] <= 1e-6 and 12.0 <= ratio <= 20.0
    verdict(3, ok, f"endpoint error {errs[0]:.3e}, halving ratio {ratio:.3g} (in [12, 20])")


def test_criterion_4_nodal(model_i_branch, model_ii_branch):
    ok, parts = True, []
    for name, (br, _) in (("Model I", model_i_branch), ("Model II", model_ii_branch)):
        flags = all(p.diagnostics.nodal.all_ok for p in br)
        late = [k for k in br.nodal_rejections if k >= 5]
        ok &= flags and not late
        parts.append(f"{name}: {len(br)} points all flags {flags}, rejections after step 5: {len(late)}")
    verdict(4, ok, "; ".join(parts))


def test_criterion_5_model_ii_collapse(model_ii_branch):
    br, elapsed = model_ii_branch
    q1 = find_ellipticity_root(MODEL_II)
    last = br[-1].diagnostics
    tail = [p.diagnostics.e_min for p in br.points[-11:]]
    decreasing = all(b < a for a, b in zip(tail, tail[1:]))
    rel = abs(last.sup_grad_sq - q1) / q1
    ok = (br.termination is Termination.MARGIN_STOP and rel <= 0.15 and decreasing
          and len(br) >= 11 and elapsed <= 600.0)
    verdict(5, ok, f"termination {br.termination.value}, sup|grad u|^2 {last.sup_grad_sq:.4f} vs q1 {q1:.4f} "
                   f"({100 * rel:.1f}% off), e_min decreasing over last 10: {decreasing}, {elapsed:.1f}s")


def test_criterion_6_model_i_broadening(model_i_branch):
    br, elapsed = model_i_branch
    xi1 = verify_hypotheses(MODEL_I, FORCE_I).xi1
    amps = [p.diagnostics.amplitude for p in br]
    quarter = max(amps[: max(1, len(amps) // 4)])
    e_min = min(p.diagnostics.e_min for p in br)
    last = br[-1]
    prof = limiting_profile(MODEL_I, FORCE_I, last.lam, last.field.u[0, 0], y=last.field.grid.y)
    gap = compare_center_profile(last.field, prof)
    ok = (br.termination is Termination.WIDTH_STOP and amps[-1] <= 2 * quarter
          and e_min >= 0.9 * xi1 and gap <= 0.05 and elapsed <= 900.0)
    verdict(6, ok, f"termination {br.termination.value}, amplitude {amps[-1]:.4f} vs early max {quarter:.4f}, "
                   f"min e_min {e_min:.4f} (xi1 {xi1:.4f}), profile gap {gap:.2e}, "
                   f"{len(br.extensions)} extensions, {elapsed:.1f}s")


def test_criterion_7_bounds(model_i_branch):
    br, _ = model_i_branch
    ok, worst = True, {"l6": 0.0, "lam": -math.inf, "grad": 0.0, "grad_literal": 0.0}
    for p in br:
        b = p.diagnostics.bounds
        amp = p.diagnostics.amplitude
        ok &= bool(b.l6_pass and b.gradient_pass)
        ok &= b.lambda_inequality_value <= 1e-8 * (1 + amp ** 2)
        ok &= b.gradient_bound_lhs <= b.gradient_bound_rhs_literal
        worst["l6"] = max(worst["l6"], b.l6_bound_lhs / b.l6_bound_rhs)
        worst["lam"] = max(worst["lam"], b.lambda_inequality_value)
        worst["grad"] = max(worst["grad"], b.gradient_bound_lhs / b.gradient_bound_rhs)
        worst["grad_literal"] = max(worst["grad_literal"], b.gradient_bound_lhs / b.gradient_bound_rhs_literal)
    rhs = br[0].diagnostics.bounds.l6_bound_rhs
    verdict(7, ok, f"{len(br)} points, L6 rhs {rhs:.4f} worst lhs/rhs {worst['l6']:.3f}, "
                   f"max lambda-inequality value {worst['lam']:.3e}, gradient lhs/rhs {worst['grad']:.3f} "
                   f"(literal form {worst['grad_literal']:.3f})")


def _random_field(grid, rng):
    x, y = np.meshgrid(grid.x, grid.y, indexing="ij")
    u = rng.uniform(0.3, 1.2) * np.cos(y) * np.exp(-rng.uniform(0.5, 3) * (x / grid.L) ** 2)
    u += 0.01 * rng.standard_normal(grid.shape)
    u[:, -1] = 0.0
    u[-1, :] = 0.0
    return SolutionField(grid, u, rng.uniform(0.05, 0.9))


def test_criterion_8_jacobian():
    g = build_grid(8, 20, 16)
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        fld = _random_field(g, rng)
        v = rng.standard_normal(g.size)
        v[g.dirichlet_mask().ravel()] = 0.0
        v /= np.max(np.abs(v))
        d = 1e-6
        Rp = assemble_residual(SolutionField(g, fld.u + d * v.reshape(g.shape), fld.lam), MODEL_I, FORCE_I)
        Rm = assemble_residual(SolutionField(g, fld.u - d * v.reshape(g.shape), fld.lam), MODEL_I, FORCE_I)
        Jv = assemble_jacobian(fld, MODEL_I, FORCE_I) @ v
        worst = max(worst, np.max(np.abs((Rp - Rm) / (2 * d) - Jv)) / (1 + np.max(np.abs(Jv))))
    errs = []
    for Ny in (16, 32):
        grid = build_grid(10, 40, Ny)
        J = assemble_jacobian(SolutionField(grid, np.zeros(grid.shape), 0.0), MODEL_I, FORCE_I)
        c = np.repeat(np.cos(grid.y)[None, :], grid.Nx + 1, axis=0)
        c[:, -1] = 0.0
        errs.append(np.max(np.abs((J @ c.ravel()).reshape(grid.shape)[:-1, :-1])))
    order = errs[0] / errs[1]
    ok = worst <= 1e-5 and 3.5 <= order <= 4.5 and errs[1] <= grid.hy ** 2
    verdict(8, ok, f"max FD relative error {worst:.2e}, cos y residual {errs[0]:.2e} -> {errs[1]:.2e} "
                   f"(ratio {order:.3g} under halving hy)")


def test_criterion_9_gatekeeping():
    accepted = verify_hypotheses(MODEL_I, FORCE_I).passed
    rejected = not verify_hypotheses(ConstitutiveModel.from_expansion(-1.0, 0.2), FORCE_I).passed
    q1 = find_ellipticity_root(MODEL_II)
    ok = accepted and rejected and abs(q1 - 1 / 3) <= 1e-12
    verdict(9, ok, f"(-0.3, 0.2) accepted {accepted}, (-1, 0.2) rejected {rejected}, "
                   f"q1 = {q1:.16f}")
