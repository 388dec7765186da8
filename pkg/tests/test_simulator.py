from __future__ import annotations

import math

import numpy as np
import pytest

from logbranch import (
    BranchingMechanism,
    CompoundPoissonExp,
    ModelSpec,
    Scheme,
    SimConfig,
    Stable,
    estimate_hitting,
    estimate_laplace,
    estimate_total_pop,
    ks_two_sample,
    simulate,
    total_pop_laplace,
)
from logbranch.analytic import cbi_laplace
from logbranch.errors import DomainError, UnreliableEstimateError
from logbranch.simulator import estimate_cbi_laplace, ks_critical


def within(est, value, stderr, k=3.0):
    return abs(est - value) < k * stderr


@pytest.mark.parametrize("scheme", [Scheme.DIRECT, Scheme.LAMPERTI])
def test_noiseless_logistic_decay(scheme):
    # z(t) = 1 / (1 + t) reaches 1/2 at t = 1
    model = ModelSpec(BranchingMechanism(b=0.0), sigma=0.0, c=1.0)
    res = simulate(model, 1.0, SimConfig(n_paths=3, scheme=scheme, t_max=5.0), a=0.5)
    np.testing.assert_allclose(res.hit_time, 1.0, atol=2e-3)


@pytest.mark.parametrize("scheme", [Scheme.DIRECT, Scheme.LAMPERTI])
def test_noiseless_descent_from_large_start(scheme):
    # z(t) = 100 / (1 + 100 t) reaches 1 at t = 0.99; a fixed Euler step would overshoot near z = 100
    model = ModelSpec(BranchingMechanism(b=0.0), sigma=0.0, c=1.0)
    res = simulate(model, 100.0, SimConfig(n_paths=2, scheme=scheme), a=1.0)
    np.testing.assert_allclose(res.hit_time, 0.99, atol=2e-3)


def test_start_at_level_gives_zero(feller):
    est = estimate_hitting(feller, 1.0, 1.0, SimConfig(n_paths=50))
    assert est.mean == 0.0 and est.stderr == 0.0


def test_determinism_across_workers(feller):
    base = SimConfig(n_paths=3000, block_size=700, seed=11, t_max=20.0)
    one = estimate_laplace(feller, 1.0, 0.0, 1.0, base)
    many = estimate_laplace(feller, 1.0, 0.0, 1.0, SimConfig(n_paths=3000, block_size=700, seed=11, t_max=20.0,
                                                            workers=3))
    assert one == many
    other = estimate_laplace(feller, 1.0, 0.0, 1.0, SimConfig(n_paths=3000, block_size=700, seed=12, t_max=20.0))
    assert other != one


def test_censoring_error(feller):
    with pytest.raises(UnreliableEstimateError):
        estimate_hitting(feller, 1.0, 0.0, SimConfig(n_paths=500, t_max=0.05))


def test_start_below_level_rejected(feller):
    with pytest.raises(DomainError):
        estimate_hitting(feller, 0.5, 1.0, SimConfig(n_paths=10))


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0)
    with pytest.raises(ValueError):
        SimConfig(n_paths=0)
    with pytest.raises(ValueError):
        SimConfig(extinction_eps=-1.0)


def test_dt_refinement(feller):
    coarse = estimate_hitting(feller, 1.0, 0.0, SimConfig(dt=2e-3, n_paths=20000, seed=3))
    fine = estimate_hitting(feller, 1.0, 0.0, SimConfig(dt=1e-3, n_paths=20000, seed=3))
    assert abs(coarse.mean - fine.mean) < 2 * fine.stderr


def test_extinction_threshold_refinement(feller):
    a = estimate_hitting(feller, 1.0, 0.0, SimConfig(extinction_eps=2e-6, n_paths=10000, seed=5))
    b = estimate_hitting(feller, 1.0, 0.0, SimConfig(extinction_eps=1e-6, n_paths=10000, seed=5))
    assert abs(a.mean - b.mean) < 2 * b.stderr


def test_stable_jump_truncation_and_total_population():
    model = ModelSpec(BranchingMechanism.from_delta(0.0, Stable(0.5, 0.5)), sigma=1.0, c=1.0)
    coarse = estimate_total_pop(model, 1.0, 0.5, 1.0, SimConfig(n_paths=10000, jump_eps=2e-3, seed=5))
    fine = estimate_total_pop(model, 1.0, 0.5, 1.0, SimConfig(n_paths=10000, jump_eps=1e-3, seed=5))
    assert abs(coarse.value - fine.value) < 2 * fine.stderr
    assert within(fine.value, total_pop_laplace(model, 1.0, 1.0, 0.5), fine.stderr)


def test_cbi_against_flow():
    model = ModelSpec(BranchingMechanism.from_delta(0.5, CompoundPoissonExp(1.0, 1.0)), sigma=1.0, c=1.0)
    est = estimate_cbi_laplace(model, 1.0, 1.0, 1.0, SimConfig(n_paths=10000))
    assert within(est.value, cbi_laplace(model, 1.0, 1.0, 1.0), est.stderr)


def test_ks_helper():
    rng = np.random.default_rng(0)
    res = ks_two_sample(rng.exponential(size=2000), rng.exponential(size=2000))
    assert res["passed"] and res["statistic"] < res["critical"]
    shifted = ks_two_sample(rng.exponential(size=2000), 0.5 + rng.exponential(size=2000))
    assert not shifted["passed"]
    assert ks_critical(10000, 10000) == pytest.approx(1.6276 * math.sqrt(2 / 10000), rel=1e-3)


def test_result_arrays(feller):
    res = simulate(feller, 1.0, SimConfig(n_paths=200, seed=1))
    assert res.n == 200
    assert res.hit_time.shape == res.integral.shape == (200,)
    assert np.all(res.integral[np.isfinite(res.hit_time)] >= 0)
    assert res.censored_fraction == 0.0
