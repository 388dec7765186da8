from __future__ import annotations

import math

import numpy as np
import pytest

from logbranch import (
    BranchingMechanism,
    DiffusionModel,
    GammaTail,
    Logistic,
    ModelSpec,
    RiccatiConfig,
    Stable,
    omega,
    solve_y,
    solve_ybar,
    time_scale,
)
from logbranch.analytic import MFunction, TimeScale, r_coeff
from logbranch.diffusion import Linear
from logbranch.errors import DomainError
from logbranch.riccati import solve_backward


@pytest.fixture(scope="module")
def feller_y1(feller):
    return solve_y(feller, 1.0)


def extreme_decades(sol):
    z = sol.grid
    lo = z <= z[0] * 10
    hi = z >= z[-1] / 10
    return lo, hi


def test_lambda_to_zero_gives_zero(feller):
    sol = solve_y(feller, 1e-12)
    assert np.max(sol.values) < 1e-8


def test_residual_and_nonnegativity(feller_y1):
    sol = feller_y1
    assert np.all(sol.values >= 0)
    mids = np.sqrt(sol.pre_grid[1:] * sol.pre_grid[:-1])
    assert np.max(sol.pre.residual(mids)) < 1e-7
    assert np.all(np.diff(sol.cumulative) >= 0)


def test_residual_in_original_variable(feller, feller_y1):
    # y(z) = q(v) e^{-m(v)} at z = I(v), so dy/dz = (q'(v) - q(v) m'(v)) e^{-2 m(v)} with m' = psi/omega
    sol = feller_y1
    m = MFunction(feller, lam_max=1e3)
    ts = TimeScale(m)
    for v in (1e-6, 1e-2, 0.5, 3.0, 20.0):
        h = 1e-4 * v
        q = float(sol.pre.q(v))
        dq = (float(sol.pre.q(v + h)) - float(sol.pre.q(v - h))) / (2 * h)
        mv = m(v)
        dy = (dq - q * float(m.derivative(v))) * math.exp(-2 * mv)
        y = q * math.exp(-mv)
        r = r_coeff(feller, ts, ts(v))
        assert abs(dy - y ** 2 + r ** 2) <= 1e-6 * (y ** 2 + r ** 2)


def test_bound_on_extreme_decades(feller_y1):
    sol = feller_y1
    lo, hi = extreme_decades(sol)
    assert np.all(sol.values[lo] <= sol.bound[lo])
    assert np.all(sol.values[hi] <= sol.bound[hi])


def test_decreasing_initially_and_ultimately(feller_y1):
    sol = feller_y1
    lo, hi = extreme_decades(sol)
    assert np.all(np.diff(sol.values[lo]) <= 0)
    assert np.all(np.diff(sol.values[hi]) <= 0)


def test_far_point_doubling_insensitive(feller, feller_y1):
    base = feller_y1
    doubled = solve_y(feller, 1.0, RiccatiConfig(v_far=2 * base.pre.v_far))
    v = base.pre_grid[base.pre_grid <= base.pre.v_far]
    rel = np.abs(doubled.pre.q(v) / base.pre.q(v) - 1)
    assert np.max(rel) < 1e-6
    assert doubled.total_integral == pytest.approx(base.total_integral, rel=1e-6)


def test_shoot_factor_insensitive(feller, feller_y1):
    other = solve_y(feller, 1.0, RiccatiConfig(eps_shoot=1e-2, tail_eps=1e-9))
    assert other.total_integral == pytest.approx(feller_y1.total_integral, rel=1e-6)


def test_monotone_in_lambda(feller):
    totals = [solve_y(feller, lam).total_integral for lam in (0.25, 1.0, 4.0)]
    assert totals[0] < totals[1] < totals[2]


def test_r_coefficient(feller):
    ts = time_scale(feller, lam_max=1e3)
    u = 1.3
    expected = math.exp(-ts.m(u)) / math.sqrt(float(omega(feller, u)))
    assert r_coeff(feller, ts, ts(u)) == pytest.approx(expected, rel=1e-10)
    z = 1e-8
    assert r_coeff(feller, ts, z) * math.sqrt(z) == pytest.approx(1.0, rel=1e-3)
    assert all(r_coeff(feller, ts, t) > 0 for t in np.geomspace(1e-6, 50, 9))
    with pytest.raises(DomainError):
        r_coeff(feller, ts, 0.0)


@pytest.mark.parametrize(
    "model",
    [
        ModelSpec(BranchingMechanism.stable(1.5, 1.0), sigma=1.0, c=1.0),
        ModelSpec(BranchingMechanism(b=0.5, gamma2=0.5, levy=GammaTail(1.0, 1.0)), sigma=0.7, c=2.0),
        ModelSpec(BranchingMechanism(b=0.0, gamma2=1.0), sigma=0.0, c=1.0),
    ],
)
def test_contract_other_models(model):
    sol = solve_y(model, 2.0)
    assert np.all(sol.values >= 0)
    mids = np.sqrt(sol.pre_grid[1:] * sol.pre_grid[:-1])
    assert np.max(sol.pre.residual(mids)) < 1e-7
    lo, hi = extreme_decades(sol)
    assert np.all(sol.values[lo] <= sol.bound[lo]) and np.all(sol.values[hi] <= sol.bound[hi])


def test_solve_y_rejects_subordinator(linear_drift):
    with pytest.raises(DomainError):
        solve_y(linear_drift, 1.0)


def test_ybar_identity_scale():
    diff = DiffusionModel(b=0.0, gamma2=1.0, sigma=1.0, g=Linear(0.0))
    sol = solve_ybar(diff, 1.0)
    np.testing.assert_allclose(sol.grid, sol.pre_grid, rtol=1e-10)
    mids = np.sqrt(sol.pre_grid[1:] * sol.pre_grid[:-1])
    assert np.max(sol.pre.residual(mids)) < 1e-7
    # rbar(z) = 1/sqrt(z + z^2/2)
    z = sol.grid
    np.testing.assert_allclose(sol.bound, np.sqrt(1.0 / (z + z * z / 2)), rtol=1e-10)


def test_ybar_lambda_to_zero():
    diff = DiffusionModel(b=0.0, gamma2=1.0, sigma=1.0, g=Logistic(1.0))
    assert np.max(solve_ybar(diff, 1e-12).values) < 1e-8


def test_ybar_needs_gamma():
    with pytest.raises(DomainError):
        solve_ybar(DiffusionModel(b=0.0, gamma2=0.0, sigma=1.0, g=Logistic(1.0)), 1.0)


def test_backward_solver_constant_coefficients():
    # q' = q^2 + q - 2 with q(inf) = 0 has the constant root q = 1
    sol = solve_backward(lambda v: np.ones_like(np.asarray(v, dtype=float)),
                         lambda v: 2.0 * np.ones_like(np.asarray(v, dtype=float)), 1.0,
                         RiccatiConfig(v_far=40.0, eps_shoot=0.0))
    assert float(sol.q(5.0)) == pytest.approx(1.0, rel=1e-9)


def test_solve_y_stable_jump_model_bounds():
    model = ModelSpec(BranchingMechanism(b=0.0, gamma2=1.0, levy=Stable(0.5, 1.0)), sigma=1.0, c=1.0)
    sol = solve_y(model, 1.0)
    assert math.isfinite(sol.total_integral) and sol.total_integral > 0
