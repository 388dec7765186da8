from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from logbranch import (
    BranchingMechanism,
    CompoundPoissonExp,
    ModelSpec,
    cbi_laplace,
    f_lambda,
    invariant_law,
    m_direct,
    m_levy_rep,
    time_scale,
    total_pop_laplace,
)
from logbranch.analytic import MFunction, cbi_flow, chi, pi_density, tt_inv
from logbranch.errors import DomainError, NonIntegrableError

from .conftest import subordinator_models


def test_m_zero(linear_drift):
    assert m_direct(linear_drift, 0.0) == 0.0
    assert m_levy_rep(linear_drift, 0.0) == 0.0


def test_m_linear_drift_closed_form(linear_drift):
    assert m_direct(linear_drift, 2.0) == pytest.approx(-2 * math.log(2), rel=1e-10)
    assert m_levy_rep(linear_drift, 2.0) == pytest.approx(-2 * math.log(2), rel=1e-8)


def test_m_quadratic_closed_form(feller):
    assert m_direct(feller, 1.0) == pytest.approx(2 * (1 - 2 * math.log(1.5)), rel=1e-10)


def test_m_compound_poisson_routes_agree():
    model = ModelSpec(BranchingMechanism.from_delta(1.0, CompoundPoissonExp(1.0, 1.0)), sigma=1.0, c=1.0)
    assert m_levy_rep(model, 1.0) == pytest.approx(m_direct(model, 1.0), rel=1e-6)


def test_m_errors(linear_drift):
    with pytest.raises(DomainError):
        m_direct(linear_drift, -1.0)
    with pytest.raises(DomainError):
        m_direct(ModelSpec(BranchingMechanism(b=1.0), sigma=1.0, c=0.0), 1.0)


def test_m_log_moment_failure():
    from logbranch import TabulatedTail

    x = np.geomspace(1e-3, 1e3, 7)
    levy = TabulatedTail(tuple(x), tuple(1 / (1 + np.log1p(x))), 0.0, 0.0)
    model = ModelSpec(BranchingMechanism(b=5.0, levy=levy), sigma=1.0, c=1.0)
    with pytest.raises(NonIntegrableError):
        m_direct(model, 1.0)


def test_mfunction_matches_direct(feller):
    mf = MFunction(feller, lam_max=1e4)
    for lam in (1e-9, 0.37, 5.0, 2e4):
        assert mf(lam) == pytest.approx(m_direct(feller, lam), rel=1e-9, abs=1e-15)


def test_pi_density_examples():
    model = ModelSpec(BranchingMechanism(b=1.0), sigma=math.sqrt(2.0), c=1.0)
    assert pi_density(model, 1.0) == pytest.approx(math.exp(-1), rel=1e-12)
    assert pi_density(model, 50.0) < 1e-12
    cp = ModelSpec(BranchingMechanism.from_delta(0.0, CompoundPoissonExp(1.0, 1.0)), sigma=math.sqrt(2.0), c=1.0)
    assert pi_density(cp, 1.0) == pytest.approx(math.exp(-1), rel=1e-9)
    with pytest.raises(DomainError):
        pi_density(model, 0.0)


def test_pi_integrability():
    model = ModelSpec(BranchingMechanism.from_delta(0.5, CompoundPoissonExp(1.0, 1.0)), sigma=1.0, c=1.0)
    near = integrate.quad(lambda z: z * pi_density(model, z), 1e-12, 1.0)[0]
    far = integrate.quad(lambda z: pi_density(model, z), 1.0, math.inf)[0]
    assert math.isfinite(near) and math.isfinite(far)


def test_self_decomposable_density_monotone():
    # mubar(0) = 0.5 <= delta = 1
    model = ModelSpec(BranchingMechanism.from_delta(1.0, CompoundPoissonExp(0.5, 2.0)), sigma=1.0, c=1.0)
    z = np.geomspace(1e-3, 20, 60)
    k = np.array([t * pi_density(model, t) for t in z])
    assert np.all(np.diff(k) <= 1e-12)


def test_time_scale_linear_drift(linear_drift):
    ts = time_scale(linear_drift)
    assert ts(0.0) == 0.0 and tt_inv(ts, 0.0) == 0.0
    for lam in (0.3, 1.0, 7.0):
        assert ts(lam) == pytest.approx(lam / (1 + lam / 2), rel=1e-10)
    assert tt_inv(ts, 1.0) == pytest.approx(2.0, rel=1e-10)
    assert ts.limit == pytest.approx(2.0, rel=1e-8)
    with pytest.raises(DomainError):
        tt_inv(ts, 2.5)


def test_time_scale_round_trip(feller):
    ts = time_scale(feller)
    assert tt_inv(ts, ts(3.7)) == pytest.approx(3.7, rel=1e-10)
    vals = ts(np.geomspace(1e-6, 300, 50))
    assert np.all(np.diff(vals) > 0)


def test_invariant_law_linear_drift(linear_drift):
    law = invariant_law(linear_drift)
    lams = np.linspace(0.0, 5.0, 11)
    np.testing.assert_allclose(law.nu_laplace(lams), (1 + lams / 2) ** -2, rtol=1e-8)
    np.testing.assert_allclose([law.rho_laplace(t) for t in lams], 2 / (2 + lams), rtol=1e-8)
    assert law.rho_laplace(0.0) == 1.0


def test_invariant_law_critical_is_infinite():
    model = ModelSpec(BranchingMechanism.from_delta(0.5, CompoundPoissonExp(1.0, 1.0)), sigma=1.0, c=1.0)
    law = invariant_law(model)
    assert math.isinf(law.normalizer)
    assert not law.rho_exists


def test_chi_is_nu_up_to_constant(linear_drift):
    ratio = [chi(linear_drift, lam) / math.exp(m_direct(linear_drift, lam)) for lam in (0.5, 2.0, 9.0)]
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-9)


def test_total_pop_basic():
    model = ModelSpec(BranchingMechanism(b=1.0), sigma=1.0, c=1.0)
    assert total_pop_laplace(model, 1.0, 1.0, 1.0) == 1.0
    vals = [total_pop_laplace(model, lam, 1.0, 0.5) for lam in (0.5, 1.0, 2.0)]
    assert all(0 < v < 1 for v in vals)
    assert vals[0] > vals[1] > vals[2]
    xs = [total_pop_laplace(model, 1.0, x, 0.5) for x in (0.5, 1.0, 2.0, 4.0)]
    assert all(a >= b for a, b in zip(xs, xs[1:]))
    with pytest.raises(DomainError):
        total_pop_laplace(model, 1.0, 0.2, 0.5)


def test_f_lambda_against_direct_quadrature():
    model = ModelSpec(BranchingMechanism(b=1.0), sigma=1.0, c=1.0)
    lam, x = 1.0, 0.7

    def integrand(z):
        # int_1^z (lam + u) / (u + u^2/2) du in closed form
        e = lam * (math.log(z / (1 + z / 2)) - math.log(1 / 1.5)) + 2 * (math.log(1 + z / 2) - math.log(1.5))
        return math.exp(-x * z + e) / (z + z * z / 2)

    ref = integrate.quad(integrand, 0, 1)[0] + integrate.quad(integrand, 1, math.inf)[0]
    assert f_lambda(model, lam, x) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_total_pop_ell_invariance(lam):
    model = ModelSpec(BranchingMechanism(b=1.0), sigma=1.0, c=1.0)
    vals = [total_pop_laplace(model, lam, 1.0, 0.5, ell=ell) for ell in (0.5, 1.0, 2.0)]
    np.testing.assert_allclose(vals, vals[1], rtol=1e-8)


def test_cbi_flow_examples():
    model = ModelSpec(BranchingMechanism(b=1.0), sigma=math.sqrt(2.0), c=1.0)
    assert cbi_flow(model, 0.0, 1.3) == 1.3
    assert cbi_flow(model, math.log(2), 1.0) == pytest.approx(1 / 3, rel=1e-12)
    assert cbi_laplace(model, 2.0, 0.0, 0.7) == pytest.approx(math.exp(-1.4))
    zero_c = ModelSpec(BranchingMechanism(b=1.0), sigma=1.0, c=0.0)
    assert cbi_flow(zero_c, 2.0, 1.0) == pytest.approx(1 / (1 + 1.0))
    with pytest.raises(DomainError):
        cbi_flow(model, -1.0, 1.0)


def test_cbi_flow_solves_ode():
    model = ModelSpec(BranchingMechanism(b=1.0), sigma=0.8, c=1.3)
    sol = integrate.solve_ivp(lambda t, v: -(1.3 * v + 0.32 * v * v), (0, 2.0), [1.7], rtol=1e-12, atol=1e-14)
    assert cbi_flow(model, 2.0, 1.7) == pytest.approx(sol.y[0, -1], rel=1e-9)


@pytest.mark.parametrize("model", subordinator_models()[:3])
def test_m_routes_agree(model):
    for lam in (0.1, 1.0, 10.0):
        assert m_levy_rep(model, lam) == pytest.approx(m_direct(model, lam), rel=1e-6)


@given(st.floats(0.01, 20), st.floats(0.01, 20))
def test_nu_laplace_decreasing_and_log_is_m(a, b):
    model = ModelSpec(BranchingMechanism.from_delta(1.0, CompoundPoissonExp(1.0, 1.0)), sigma=1.0, c=1.0)
    lo, hi = min(a, b), max(a, b)
    assert m_direct(model, hi) <= m_direct(model, lo) + 1e-12


def test_nu_laplace_completely_monotone():
    model = ModelSpec(BranchingMechanism.from_delta(1.0, CompoundPoissonExp(1.0, 1.0)), sigma=1.0, c=1.0)
    law = invariant_law(model)
    h = 0.25
    for lam in (0.1, 1.0, 4.0):
        f = np.array([law.nu_laplace(lam + k * h) for k in range(4)])
        d1, d2, d3 = np.diff(f), np.diff(f, 2), np.diff(f, 3)
        assert np.all(d1 < 0) and np.all(d2 > 0) and np.all(d3 < 0)
