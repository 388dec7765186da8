"""Conservativeness, polarity, recurrence and the fixed-environment explosion test.

Every convergence decision is made from a local power-law exponent of
the integrand at the singular end.  When the first-order exponent sits
exactly at the critical value for structural reasons (``psi(0) = 0``),
the decision moves to the next order in ``t = ln(1/z)``: an integrand
behaving like ``t^{-kappa}`` in ``dt`` diverges iff ``kappa <= 1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .analytic import InvariantLaw, invariant_law
from .errors import DomainError, UndecidableError
from .iterated_log import (
    DEFAULT_PROFILE_GRID,
    IteratedLogProfile,
    critical_outcome,
    iterated_log_profile,
)
from .mechanisms import (
    BranchingMechanism,
    General,
    ModelSpec,
    Subordinator,
    check_grey,
    check_log_moment,
    classify,
    omega,
    psi,
    psi_prime_zero,
    satisfies_first_moment,
)
from .quadrature import DEFAULT_QUAD, QuadratureConfig, Trilean, Verdict, classify_exponent, gl_segments, jsonable

__all__ = [
    "ClassificationReport",
    "IteratedLogProfile",
    "Recurrence",
    "analyze",
    "conservativeness",
    "explosion_integral_lambert",
    "iterated_log_profile",
    "polarity",
    "recurrence",
]


class Recurrence(str, enum.Enum):
    POSITIVE = "positive_recurrent"
    NULL = "null_recurrent"
    RECURRENT = "recurrent_unrefined"
    EXPLODES = "explodes_as"
    TRANSIENT = "transient"
    NOT_APPLICABLE = "not_applicable"
    UNDECIDABLE = "undecidable"


@dataclass(frozen=True)
class ClassificationReport:
    """Outcome of the classification criteria with their numeric evidence.

    ``conservative`` and ``polar_at_zero`` are ``None`` when the criterion
    does not apply to the model (serialised as ``"not_applicable"``).
    """

    conservative: Trilean | None
    polar_at_zero: Trilean | None
    recurrence: Recurrence
    diagnostics: list = field(default_factory=list)
    invariant_law: InvariantLaw | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.recurrence is Recurrence.EXPLODES and self.conservative is Trilean.YES:
            raise ValueError("a model that explodes a.s. cannot be conservative")
        if self.recurrence in (Recurrence.POSITIVE, Recurrence.NULL) and self.polar_at_zero is not Trilean.YES:
            raise ValueError("positive or null recurrence requires 0 to be polar")

    @property
    def undecidable(self) -> bool:
        return (
            self.conservative is Trilean.UNDECIDABLE
            or self.polar_at_zero is Trilean.UNDECIDABLE
            or self.recurrence is Recurrence.UNDECIDABLE
        )

    def to_dict(self) -> dict:
        def tri(v):
            return "not_applicable" if v is None else v.value

        out = {
            "conservative": tri(self.conservative),
            "polar_at_zero": tri(self.polar_at_zero),
            "recurrence": self.recurrence.value,
            "diagnostics": [[name, jsonable(ev)] for name, ev in self.diagnostics],
        }
        if self.invariant_law is not None:
            out["invariant_normalizer"] = jsonable(self.invariant_law.normalizer)
        return out


def _subordinator(model: ModelSpec) -> Subordinator:
    cls = classify(model.mechanism)
    if not isinstance(cls, Subordinator):
        raise DomainError("this criterion concerns subordinator mechanisms only")
    return cls


def _log_moment_or_none(mech: BranchingMechanism) -> bool | None:
    try:
        return check_log_moment(mech)
    except UndecidableError:
        return None


def _second_order(kappa: float, band: float) -> bool | None:
    """Divergence of ``int^inf t^{-kappa} dt``: True, False or None in the band."""
    verdict = classify_exponent(-kappa, -1.0, band)
    return verdict


def _nested_partial_sums(inner, weight, lows, per_decade: int = 40):
    """Partial integrals ``int_lo^1 weight(z) exp(int_z^1 inner) dz`` for each ``lo``.

    Both layers use a log-spaced grid (Gauss-Legendre for the inner layer,
    Simpson in ``ln z`` for the outer one); the numbers serve as evidence.
    """
    lo_min = float(min(lows))
    n = int(per_decade * math.log10(1.0 / lo_min)) // 2 * 2 + 1
    z = np.geomspace(lo_min, 1.0, n)
    seg = gl_segments(inner, z[:-1], z[1:], 20)
    tail_from = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    with np.errstate(over="ignore"):
        g = z * weight(z) * np.exp(tail_from)
    lz = np.log(z)
    out = []
    for lo in lows:
        k = int(np.searchsorted(z, lo * (1 - 1e-12)))
        k -= k % 2
        val = integrate.simpson(g[k:], x=lz[k:]) if n - k >= 3 else 0.0
        out.append((float(lo), float(val)))
    return out


def conservativeness(model: ModelSpec, cfg: QuadratureConfig = DEFAULT_QUAD) -> Verdict:
    """Whether ``int_0^1 omega(z)^{-1} exp(int_z^1 psi/omega) dz`` diverges (YES = conservative)."""
    _subordinator(model)
    if model.sigma <= 0:
        raise DomainError("conservativeness criterion needs sigma > 0")
    mech = model.mechanism
    zs = cfg.z_min
    sums = _nested_partial_sums(lambda u: np.asarray(psi(mech, u)) / np.asarray(omega(model, u)),
                                lambda z: 1.0 / np.asarray(omega(model, z)), np.logspace(-2, -8, 4))
    evidence = {"partial_integrals": sums}
    if model.c > 0:
        # z * integrand -> const * exp(int_z^1 psi/omega): the first-order exponent is -1
        evidence["first_order_exponent"] = -1.0
        lm = _log_moment_or_none(mech)
        if lm:
            evidence["rule"] = "log-moment: inner integral converges, integrand ~ const/z"
            return Verdict(Trilean.YES, evidence)
        t = math.log(1.0 / zs)
        kappa = -t * zs * float(psi(mech, zs)) / float(omega(model, zs))
        evidence["second_order_exponent"] = kappa
        return Verdict(Trilean.of(_second_order(kappa, cfg.band)), evidence)
    slope = psi_prime_zero(mech)
    p = math.inf if not math.isfinite(slope) else -2.0 - 2.0 * slope / model.sigma2
    evidence["first_order_exponent"] = p
    conv = classify_exponent(p, -1.0, cfg.band)
    if conv is None:
        return Verdict(Trilean.UNDECIDABLE, evidence)
    return Verdict(Trilean.NO if conv else Trilean.YES, evidence)


def polarity(model: ModelSpec) -> bool:
    """Whether 0 is polar: ``2 delta >= sigma^2`` (inclusive)."""
    cls = _subordinator(model)
    return 2.0 * cls.delta >= model.sigma2


def _cond_rec(model: ModelSpec, cfg: QuadratureConfig) -> tuple[bool | None, dict]:
    """Divergence of ``int_0^1 z^{-1} exp(-int_z^1 (int (1-e^{-us}) mu(ds)) / omega(u) du) dz``."""
    mech = model.mechanism
    cls = classify(mech)
    lm = _log_moment_or_none(mech)
    evidence = {}
    if lm:
        evidence["rule"] = "log-moment implies divergence"
        return True, evidence
    zs = cfg.z_min
    jump = -float(psi(mech, zs)) - cls.delta * zs
    kappa = math.log(1.0 / zs) * zs * jump / float(omega(model, zs))
    evidence["second_order_exponent"] = kappa
    return _second_order(kappa, cfg.band), evidence


def recurrence(model: ModelSpec, cfg: QuadratureConfig = DEFAULT_QUAD,
               profile_depth: int = 4, profile_grid=DEFAULT_PROFILE_GRID) -> ClassificationReport:
    """Full classification of a subordinator model with ``sigma > 0`` and ``c > 0``."""
    cls = _subordinator(model)
    if model.sigma <= 0 or model.c <= 0:
        raise DomainError("recurrence classification needs sigma > 0 and c > 0")
    cons = conservativeness(model, cfg)
    polar = polarity(model)
    diags = [("conservativeness", cons.evidence), ("polarity", {"two_delta": 2 * cls.delta, "sigma2": model.sigma2})]
    if not polar:
        return ClassificationReport(cons.value, Trilean.NO, Recurrence.NOT_APPLICABLE, diags)
    div, ev = _cond_rec(model, cfg)
    diags.append(("recurrence_integral", ev))
    if div is None:
        return ClassificationReport(cons.value, Trilean.YES, Recurrence.UNDECIDABLE, diags)
    if not div:
        cons_value = Trilean.NO if cons.value is not Trilean.YES else Trilean.UNDECIDABLE
        return ClassificationReport(cons_value, Trilean.YES, Recurrence.EXPLODES, diags)
    lm = _log_moment_or_none(model.mechanism)
    critical = math.isclose(2.0 * cls.delta, model.sigma2, rel_tol=1e-12, abs_tol=0.0)
    if not critical:
        law = invariant_law(model, cfg) if lm else None
        if law is not None:
            diags.append(("invariant_law", law.evidence))
        return ClassificationReport(cons.value, Trilean.YES, Recurrence.POSITIVE, diags, law)
    if not lm:
        diags.append(("critical", {"note": "log-moment fails at 2 delta = sigma^2"}))
        return ClassificationReport(cons.value, Trilean.YES, Recurrence.RECURRENT, diags)
    outcome = critical_outcome(model, profile_depth, profile_grid)
    diags.append(("iterated_log", outcome.to_dict()))
    if outcome.kind == "lower":
        return ClassificationReport(cons.value, Trilean.YES, Recurrence.NULL, diags)
    if outcome.kind == "upper":
        return ClassificationReport(cons.value, Trilean.YES, Recurrence.POSITIVE, diags)
    return ClassificationReport(cons.value, Trilean.YES, Recurrence.RECURRENT, diags)


def explosion_integral_lambert(mech: BranchingMechanism, c: float,
                               cfg: QuadratureConfig = DEFAULT_QUAD) -> Verdict:
    """Finiteness of ``int_0^1 x^{-1} exp((2/c) int_x^1 psi(u)/u du) dx`` (YES = finite).

    This is the fixed-environment explosion integral: explosion is possible
    exactly when it is finite.
    """
    if c <= 0:
        raise DomainError("c must be positive")
    classify(mech)
    evidence = {"first_order_exponent": -1.0}
    if _log_moment_or_none(mech):
        evidence["rule"] = "log-moment implies an infinite integral"
        return Verdict(Trilean.NO, evidence)
    zs = cfg.z_min
    # exp((2/c) int_x^1 psi/u) = exp(-G(t)) with t = ln(1/x) and G'(t) = -(2/c) psi(x)
    kappa = -math.log(1.0 / zs) * 2.0 / c * float(psi(mech, zs))
    evidence["second_order_exponent"] = kappa
    div = _second_order(kappa, cfg.band)
    if div is None:
        return Verdict(Trilean.UNDECIDABLE, evidence)
    return Verdict(Trilean.NO if div else Trilean.YES, evidence)


def analyze(model: ModelSpec, cfg: QuadratureConfig = DEFAULT_QUAD) -> ClassificationReport:
    """Classify any model; general mechanisms get the extinction-side checks only."""
    cls = classify(model.mechanism, cfg.z_max)
    diags: list = [("mechanism", {"class": cls.kind, **{k: v for k, v in vars(cls).items()}})]
    if isinstance(cls, Subordinator):
        lm = _log_moment_or_none(model.mechanism)
        diags.append(("log_moment", {"holds": "undecidable" if lm is None else lm}))
        if model.sigma > 0 and model.c > 0:
            rep = recurrence(model, cfg)
            return ClassificationReport(rep.conservative, rep.polar_at_zero, rep.recurrence,
                                        diags + rep.diagnostics, rep.invariant_law)
        if model.sigma > 0:
            cons = conservativeness(model, cfg)
            return ClassificationReport(cons.value, Trilean.of(polarity(model)), Recurrence.NOT_APPLICABLE,
                                        diags + [("conservativeness", cons.evidence)])
        return ClassificationReport(None, None, Recurrence.NOT_APPLICABLE, diags)
    assert isinstance(cls, General)
    try:
        grey = Trilean.of(check_grey(model.mechanism, cfg))
        diags.append(("grey", {"holds": grey.value}))
    except UndecidableError as exc:
        grey = Trilean.UNDECIDABLE
        diags.append(("grey", {"holds": "undecidable", "exponent": exc.exponent, **exc.evidence}))
    first = satisfies_first_moment(model.mechanism)
    diags.append(("first_moment", {"holds": first}))
    lm = _log_moment_or_none(model.mechanism)
    diags.append(("log_moment", {"holds": "undecidable" if lm is None else lm}))
    polar = None
    if grey is Trilean.YES and first:
        polar = Trilean.NO
        diags.append(("extinction", {"sure": True, "rule": "Grey plus first moment"}))
    elif grey is Trilean.UNDECIDABLE:
        polar = Trilean.UNDECIDABLE
    return ClassificationReport(None, polar, Recurrence.NOT_APPLICABLE, diags)
