import math

import numpy as np
import pytest

from antiplane.constitutive import BodyForce, ConstitutiveModel
from antiplane.diagnostics import (
    DiagnosticsRecord,
    GridMismatch,
    ProfileError,
    analytic_bound_checks,
    centerline_width,
    compare_center_profile,
    diagnose,
    front_identity,
    hamiltonian_profile,
    limiting_profile,
    nodal_check,
    shape_metrics,
    transversal_hamiltonian,
)
from antiplane.discretization import SolutionField, build_grid
from antiplane.reduced_ode import SeedParameters, homoclinic_seed
from antiplane.solver import newton_fixed_lambda


def x_independent(grid, values, lam):
    u = np.repeat(np.asarray(values)[None, :], grid.Nx + 1, axis=0)
    u[:, -1] = 0.0
    return SolutionField(grid, u, lam)


def test_hamiltonian_of_zero_field(small_grid, model_i, force_i):
    H, dev = hamiltonian_profile(SolutionField(small_grid, np.zeros(small_grid.shape), 0.3), model_i, force_i)
    assert np.all(H == 0) and dev == 0


def test_hamiltonian_constant_for_x_independent_field(small_grid, model_i, force_i):
    fld = x_independent(small_grid, 0.7 * np.cos(small_grid.y), 0.2)
    H, _ = hamiltonian_profile(fld, model_i, force_i)
    assert np.ptp(H) <= 1e-14


def test_hamiltonian_second_order(model_i, force_i):
    devs = []
    for Nx, Ny in ((240, 32), (480, 64)):
        g = build_grid(60, Nx, Ny)
        res = newton_fixed_lambda(homoclinic_seed(SeedParameters.from_model(model_i, force_i, 0.2), g),
                                  model_i, force_i)
        devs.append(hamiltonian_profile(res.field, model_i, force_i)[1])
    assert 3 <= devs[0] / devs[1] <= 6


def test_nodal_flags_seed_and_constant(model_i, force_i):
    g = build_grid(60, 240, 32)
    assert nodal_check(homoclinic_seed(SeedParameters.from_model(model_i, force_i, 0.1), g)).all_ok
    u = np.ones(g.shape)
    u[:, -1] = 0.0
    u[-1, :] = 0.0
    flags = nodal_check(SolutionField(g, u, 0.1))
    assert not flags.ux_negative_interior
    assert not flags.all_ok


def test_shape_metrics(model_i, force_i):
    g = build_grid(60, 240, 32)
    seed = homoclinic_seed(SeedParameters.from_model(model_i, force_i, 0.1), g)
    amp, width, q, e = shape_metrics(seed, model_i)
    assert amp == pytest.approx(0.195180, abs=1e-6)
    assert width == pytest.approx(26.339, abs=2e-2)
    assert 0 < e < 1
    zero = SolutionField(g, np.zeros(g.shape), 0.1)
    assert shape_metrics(zero, model_i) == (0.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        centerline_width(seed, 1.5)


def test_bounds_zero_field(small_grid, model_i, force_i):
    rep = analytic_bound_checks(SolutionField(small_grid, np.zeros(small_grid.shape), 0.3), model_i, force_i, xi1=0.73)
    assert rep.all_pass
    assert rep.l6_bound_lhs == 0 and rep.gradient_bound_lhs == 0 and rep.lambda_inequality_value == 0


def test_l6_constant(small_grid, model_i, force_i):
    rep = analytic_bound_checks(SolutionField(small_grid, np.zeros(small_grid.shape), 0.3), model_i, force_i)
    expected = abs(-0.3 - 0.05 * math.pi) * math.pi ** (1 / 3) / 0.2
    assert rep.l6_bound_rhs == pytest.approx(expected)
    assert rep.l6_bound_rhs == pytest.approx(3.347, abs=1e-3)


def test_lambda_inequality_quadrature(model_i):
    g = build_grid(10, 40, 64)
    X, Y = np.meshgrid(g.x, g.y, indexing="ij")
    u = 10 * np.cos(Y) / np.cosh(X)
    u[:, -1] = 0.0
    # with lam < 1 and b1 <= 0 both terms are negative
    rep = analytic_bound_checks(SolutionField(g, u, 0.5), model_i, BodyForce((-0.1,)), xi1=0.73)
    exact = -0.5 * 100 * math.pi / 2 - 0.05 * 1e4 * 3 * math.pi / 8
    assert rep.lambda_inequality_value == pytest.approx(exact, rel=1e-3)
    assert rep.lambda_pass
    # past lam = 1 without cubic softening the inequality is violated and flagged
    rep = analytic_bound_checks(SolutionField(g, u, 1.5), model_i, BodyForce((0.0,)), xi1=0.73)
    assert rep.lambda_inequality_value == pytest.approx(0.5 * 100 * math.pi / 2, rel=1e-3)
    assert not rep.lambda_pass and not rep.all_pass


def test_model_ii_skips_norm_bounds(small_grid, model_ii, force_ii):
    fld = homoclinic_seed(SeedParameters(0.1, 1.0, 0.01), small_grid)
    rep = analytic_bound_checks(fld, model_ii.with_limits(q1=1 / 3), force_ii)
    assert rep.l6_pass is None and rep.lambda_pass is None
    assert rep.gradient_bound_lhs > 0


def test_trivial_profile(model_i, force_i):
    prof = limiting_profile(model_i, force_i, 0.1, 0.0)
    assert prof.trivial and np.all(prof.values == 0)
    assert front_identity(prof, model_i, force_i) == 0.0


def test_linear_law_has_no_nontrivial_profile():
    with pytest.raises(ProfileError):
        limiting_profile(ConstitutiveModel((1.0,)), BodyForce((0.0,)), 0.1, 0.5)


def test_profile_preconditions(model_i, force_i):
    with pytest.raises(ValueError):
        limiting_profile(model_i, force_i, 0.0, 1.0)
    with pytest.raises(ValueError):
        limiting_profile(model_i, force_i, 0.1, -1.0)


@pytest.mark.parametrize("lam", [0.02, 0.05, 0.1])
def test_softening_front_identity_negative(lam, model_ii, force_ii):
    prof = limiting_profile(model_ii, force_ii, lam, 0.3)
    assert not prof.trivial
    assert prof.values[-1] == 0.0 and prof.slopes[0] == 0.0
    assert front_identity(prof, model_ii, force_ii) < 0


def test_front_identity_matches_transversal_hamiltonian(model_i, force_i):
    # multiplying the transversal ODE by U and integrating gives front = -2 H
    prof = limiting_profile(model_i, force_i, 0.1432, 1.1)
    assert front_identity(prof, model_i, force_i) == pytest.approx(
        -2 * transversal_hamiltonian(prof, model_i, force_i), abs=1e-8)


def test_compare_center_profile(small_grid, model_i, force_i):
    prof = limiting_profile(model_i, force_i, 0.1432, 1.1, y=small_grid.y)
    fld = x_independent(small_grid, prof.values, prof.lam)
    assert compare_center_profile(fld, prof) == 0.0
    zero = SolutionField(small_grid, np.zeros(small_grid.shape), 0.1)
    trivial = limiting_profile(model_i, force_i, 0.1, 0.0, y=small_grid.y)
    assert compare_center_profile(zero, trivial) == 0.0
    other = limiting_profile(model_i, force_i, 0.1432, 1.1)
    with pytest.raises(GridMismatch):
        compare_center_profile(fld, other)


def test_record_round_trip(model_i, force_i):
    g = build_grid(30, 120, 16)
    seed = homoclinic_seed(SeedParameters.from_model(model_i, force_i, 0.2), g)
    rec = diagnose(seed, model_i, force_i)
    assert DiagnosticsRecord.from_dict(rec.to_dict()) == rec
    assert rec.to_dict()["nodal_ok"] is True
