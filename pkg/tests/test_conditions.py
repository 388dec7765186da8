from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from logbranch import (
    BranchingMechanism,
    CompoundPoissonExp,
    GammaTail,
    ModelSpec,
    NoJumps,
    Recurrence,
    Stable,
    TabulatedTail,
    Trilean,
    analyze,
    conservativeness,
    polarity,
    recurrence,
)
from logbranch.conditions import ClassificationReport, explosion_integral_lambert, iterated_log_profile
from logbranch.errors import DomainError


def sqrt_sub(c, sigma=1.0):
    """psi(z) = -z^{1/2}."""
    return ModelSpec(BranchingMechanism.stable(0.5, 1.0), sigma=sigma, c=c)


def test_stable_conservativeness_flips_with_c():
    assert conservativeness(sqrt_sub(1.0)).value is Trilean.YES
    assert conservativeness(sqrt_sub(0.0)).value is Trilean.NO


def test_linear_drift_conservative():
    model = ModelSpec(BranchingMechanism(b=1.0), sigma=1.0, c=1.0)
    assert conservativeness(model).value is Trilean.YES


def test_conservativeness_needs_subordinator_and_sigma():
    with pytest.raises(DomainError):
        conservativeness(ModelSpec(BranchingMechanism(b=0.0, gamma2=1.0), sigma=1.0, c=1.0))
    with pytest.raises(DomainError):
        conservativeness(ModelSpec(BranchingMechanism(b=1.0), sigma=0.0, c=1.0))


@pytest.mark.parametrize("delta,expected", [(1.0, True), (0.4, False), (0.5, True)])
def test_polarity_boundary_inclusive(delta, expected):
    assert polarity(ModelSpec(BranchingMechanism(b=delta), sigma=1.0, c=1.0)) is expected


def test_recurrence_linear_drift_positive():
    rep = recurrence(ModelSpec(BranchingMechanism(b=1.0), sigma=1.0, c=1.0))
    assert rep.recurrence is Recurrence.POSITIVE
    assert rep.polar_at_zero is Trilean.YES
    assert rep.invariant_law is not None
    assert rep.invariant_law.normalizer == pytest.approx(2.0, rel=1e-8)


def test_recurrence_compound_poisson_critical_is_null():
    model = ModelSpec(BranchingMechanism.from_delta(0.5, CompoundPoissonExp(1.0, 1.0)), sigma=1.0, c=1.0)
    rep = recurrence(model)
    assert rep.recurrence is Recurrence.NULL


def test_recurrence_not_polar_is_not_applicable():
    rep = recurrence(ModelSpec(BranchingMechanism(b=0.2), sigma=1.0, c=1.0))
    assert rep.recurrence is Recurrence.NOT_APPLICABLE
    assert rep.polar_at_zero is Trilean.NO


def test_recurrence_requires_competition():
    with pytest.raises(DomainError):
        recurrence(sqrt_sub(0.0))


def test_report_invariants_enforced():
    with pytest.raises(ValueError):
        ClassificationReport(Trilean.YES, Trilean.YES, Recurrence.EXPLODES)
    with pytest.raises(ValueError):
        ClassificationReport(Trilean.YES, Trilean.NO, Recurrence.POSITIVE)


def test_profile_no_jumps_is_zero():
    prof = iterated_log_profile(ModelSpec(BranchingMechanism(b=1.0), sigma=1.0, c=1.0), 1, [1e-6, 1e-7])
    assert prof.samples[0] == (1e-6, 0.0)


def test_profile_compound_poisson_vanishes():
    model = ModelSpec(BranchingMechanism.from_delta(0.5, CompoundPoissonExp(1.0, 1.0)), sigma=1.0, c=1.0)
    prof = iterated_log_profile(model, 1)
    assert prof.adh_estimate[1] < 1e-100
    z, v = prof.samples[0]
    # I(z) = |ln z| (1 - e^{-z}) exactly
    assert v == pytest.approx(abs(math.log(z)) * -math.expm1(-z), rel=1e-9)


def test_profile_log_tail_matches_closed_form():
    # tail |ln w| near zero: int_0^z |ln w| dw = z (|ln z| + 1)
    w = np.geomspace(1e-250, 0.5, 600)
    levy = TabulatedTail(tuple(w), tuple(np.abs(np.log(w))), 0.0, 3.0)
    model = ModelSpec(BranchingMechanism(b=levy.small_jump_moment() + 0.5, levy=levy), sigma=1.0, c=1.0)
    grid = [1e-10, 1e-40, 1e-120]
    prof = iterated_log_profile(model, 1, grid)
    for z, v in prof.samples:
        L = abs(math.log(z))
        assert v == pytest.approx(L * z * (L + 1), rel=1e-3)


def test_profile_domain_error_for_large_z():
    with pytest.raises(DomainError):
        iterated_log_profile(ModelSpec(BranchingMechanism(b=1.0), sigma=1.0, c=1.0), 3, [0.5, 0.1])


def test_lambert_integral_examples():
    assert explosion_integral_lambert(BranchingMechanism(b=1.0), 1.0).value is Trilean.NO
    assert explosion_integral_lambert(BranchingMechanism.stable(0.5, 1.0), 1.0).value is Trilean.NO
    with pytest.raises(DomainError):
        explosion_integral_lambert(BranchingMechanism(b=1.0), 0.0)


def test_analyze_general_model(feller):
    rep = analyze(feller)
    assert rep.polar_at_zero is Trilean.NO
    assert not rep.undecidable
    d = rep.to_dict()
    assert set(d) >= {"conservative", "polar_at_zero", "recurrence", "diagnostics"}


finite_var = st.one_of(
    st.builds(CompoundPoissonExp, st.floats(0.1, 3), st.floats(0.2, 3)),
    st.builds(GammaTail, st.floats(0.1, 2), st.floats(0.2, 3)),
    st.builds(Stable, st.floats(0.1, 0.9), st.floats(0.1, 2)),
    st.just(NoJumps()),
)


@given(st.floats(0, 2), finite_var, st.floats(0.3, 2), st.floats(0.1, 3))
def test_log_moment_implies_conservative(delta, levy, sigma, c):
    model = ModelSpec(BranchingMechanism.from_delta(delta, levy), sigma=sigma, c=c)
    assert conservativeness(model).value is Trilean.YES


@given(st.floats(0, 2), finite_var, st.floats(0.3, 2), st.floats(0.1, 3))
def test_report_consistency(delta, levy, sigma, c):
    rep = recurrence(ModelSpec(BranchingMechanism.from_delta(delta, levy), sigma=sigma, c=c))
    if rep.recurrence is Recurrence.EXPLODES:
        assert rep.conservative is not Trilean.YES
    if rep.recurrence in (Recurrence.POSITIVE, Recurrence.NULL):
        assert rep.polar_at_zero is Trilean.YES
    mech_delta = rep_delta(delta, levy)
    assert rep.polar_at_zero is Trilean.of(2 * mech_delta >= sigma ** 2)


def rep_delta(delta, levy):
    # delta after the round trip through the Levy-Khintchine coefficient b
    return BranchingMechanism.from_delta(delta, levy).delta
