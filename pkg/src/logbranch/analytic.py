"""The function m, the time scale, invariant laws, total-population kernel and CBI flow.

For a model with ``omega(u) = c u + sigma^2 u^2 / 2``,

    m(lam) = int_0^lam psi(u) / omega(u) du,    I(lam) = int_0^lam exp(m(u)) du.

``exp(m)`` is the Laplace transform of a probability law ``nu`` in the
subordinator case and ``I`` is the bijective time scale used by the
Riccati machinery in the general case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, special

from .errors import DomainError, NonIntegrableError, NumericOverflowError, TruncationError, UndecidableError
from .iterated_log import critical_outcome
from .mechanisms import (
    ModelSpec,
    Subordinator,
    check_log_moment,
    classify,
    omega,
    psi,
    psi_prime_zero,
)
from .quadrature import DEFAULT_QUAD, QuadratureConfig, classify_exponent, gl_segments, quad

GL_ORDER = 30
M_OVERFLOW = 700.0


def psi_over_omega(model: ModelSpec, u):
    """``psi(u) / omega(u)`` for ``u > 0``."""
    u = np.asarray(u, dtype=float)
    return np.asarray(psi(model.mechanism, u)) / (model.c * u + 0.5 * model.sigma2 * u * u)


def _require_log_moment(model: ModelSpec) -> None:
    try:
        ok = check_log_moment(model.mechanism)
    except UndecidableError as exc:
        raise NonIntegrableError(f"m is not known to be integrable at 0: {exc}") from exc
    if not ok:
        raise NonIntegrableError("log-moment condition fails: psi/omega is not integrable at 0")


def _require_m_domain(model: ModelSpec) -> None:
    if model.c <= 0:
        raise DomainError("m needs c > 0 (psi/omega is not integrable at 0 otherwise)")
    _require_log_moment(model)


def _geometric_cuts(lo: float, hi: float, per_decade: int) -> np.ndarray:
    if hi <= lo:
        return np.array([lo, hi])
    n = max(1, int(math.ceil(per_decade * math.log10(hi / lo))))
    return np.geomspace(lo, hi, n + 1)


def m_direct(model: ModelSpec, lam: float, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Adaptive quadrature of ``int_0^lam psi/omega``.

    On ``[0, u0]`` the integrand is replaced by its limit ``psi'(0+)/c``
    when that slope is finite; otherwise the algebraic singularity is left
    to the adaptive rule.
    """
    if lam < 0 or not math.isfinite(lam):
        raise DomainError("m is defined for finite lam >= 0")
    _require_m_domain(model)
    if lam == 0:
        return 0.0
    f = lambda u: float(psi_over_omega(model, u))  # noqa: E731
    u0 = min(1e-8, lam)
    slope = psi_prime_zero(model.mechanism)
    if math.isfinite(slope):
        total = slope / model.c * u0
    else:
        total = quad(f, 0.0, u0, cfg)
    cuts = _geometric_cuts(u0, lam, 2)
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        total += quad(f, lo, hi, cfg)
    return total


class MFunction:
    """Cached ``m`` on a geometric grid with exact Gauss-Legendre refinement.

    Values between anchors are obtained by integrating ``psi/omega`` from the
    nearest anchor below, so accuracy does not degrade between grid points.

    Parameters
    ----------
    model : ModelSpec
    lam_max : float
        Largest cached anchor; larger arguments are integrated on demand.
    per_decade : int
        Anchors per decade.
    """

    def __init__(self, model: ModelSpec, lam_max: float = 1e6, per_decade: int = 8,
                 lam_min: float = 1e-14, cfg: QuadratureConfig = DEFAULT_QUAD):
        _require_m_domain(model)
        self.model = model
        self.cfg = cfg
        self.lam_min = lam_min
        self.grid = _geometric_cuts(lam_min, lam_max, per_decade)
        head = m_direct(model, lam_min, cfg)
        pieces = gl_segments(self._integrand, self.grid[:-1], self.grid[1:], GL_ORDER)
        self.values = head + np.concatenate([[0.0], np.cumsum(pieces)])
        # local power exponent of exp(m) at the top of the grid
        top = self.grid[-1]
        self.tail_exponent = float(top * psi_over_omega(model, top))

    def _integrand(self, u):
        return psi_over_omega(self.model, u)

    def __call__(self, lam):
        lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
        if np.any(lam_arr < 0):
            raise DomainError("m is defined for lam >= 0")
        out = np.empty_like(lam_arr)
        small = lam_arr < self.lam_min
        for i in np.nonzero(small)[0]:
            out[i] = m_direct(self.model, float(lam_arr[i]), self.cfg)
        big = lam_arr > self.grid[-1]
        for i in np.nonzero(big)[0]:
            cuts = _geometric_cuts(self.grid[-1], float(lam_arr[i]), 8)
            out[i] = self.values[-1] + float(np.sum(gl_segments(self._integrand, cuts[:-1], cuts[1:], GL_ORDER)))
        mid = ~(small | big)
        if np.any(mid):
            lm = lam_arr[mid]
            k = np.clip(np.searchsorted(self.grid, lm, side="right") - 1, 0, self.grid.size - 2)
            out[mid] = self.values[k] + gl_segments(self._integrand, self.grid[k], lm, GL_ORDER)
        return float(out[0]) if np.ndim(lam) == 0 else out

    def derivative(self, lam):
        return psi_over_omega(self.model, lam)


def _scaled_exp1(x: float) -> float:
    """``e^x E1(x)`` without overflow."""
    if x < 600:
        return math.exp(x) * float(special.exp1(x))
    inv = 1.0 / x
    return inv * (1 - inv * (1 - 2 * inv * (1 - 3 * inv * (1 - 4 * inv))))


def m_levy_rep(model: ModelSpec, lam: float, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``m`` through its Lévy-Khintchine representation (nested quadrature).

    ``-m(lam) = (2/sigma^2) int_0^inf (1 - e^{-lam z}) (e^{-Kz}/z)
    (delta + int_0^z e^{Ku} mubar(u) du) dz`` with ``K = 2c/sigma^2``.
    The inner factor is evaluated as ``G(z) = int_0^z e^{-K(z-u)} mubar(u) du``.

    Beyond ``Z`` with ``lam Z`` and ``K Z`` large the factor ``1 - e^{-lam z}``
    is 1 to double precision and the remaining piece is exact:
    ``int_Z^inf G(z)/z dz = G(Z) e^{KZ} E1(KZ) + int_Z^inf mubar(u) e^{Ku} E1(Ku) du``.
    """
    if lam < 0:
        raise DomainError("lam must be non-negative")
    cls = _require_subordinator_env(model)
    _require_log_moment(model)
    if lam == 0:
        return 0.0
    K = 2 * model.c / model.sigma2
    levy = model.mechanism.levy
    delta = cls.delta
    fine = QuadratureConfig(abs_tol=0.0, rel_tol=min(cfg.rel_tol, 1e-10), limit=cfg.limit)
    tail = levy.tail1

    def piece(lo, z):
        # the weight is concentrated within a few 1/K of the upper end
        pts = [z - w / K for w in (1.0, 8.0, 40.0) if z - w / K > lo]
        return quad(lambda u: math.exp(-K * (z - u)) * tail(u), lo, z, fine, points=pts)

    top = 50.0 / min(lam, K)
    # checkpoints: G(z) = e^{-K(z - z_k)} G(z_k) + int_{z_k}^z, so the singularity of
    # the tail at 0 is integrated once
    marks = _geometric_cuts(min(1e-6, top), top, 4)
    gmarks = np.empty_like(marks)
    gmarks[0] = piece(0.0, marks[0])
    for k in range(1, marks.size):
        gmarks[k] = math.exp(-K * (marks[k] - marks[k - 1])) * gmarks[k - 1] + piece(marks[k - 1], marks[k])

    def inner(z):
        if z == 0:
            return 0.0
        k = int(np.searchsorted(marks, z, side="right")) - 1
        if k < 0:
            return piece(0.0, z)
        return math.exp(-K * (z - marks[k])) * gmarks[k] + piece(marks[k], z)

    def outer(z):
        if z == 0:
            return lam * delta
        return -math.expm1(-lam * z) / z * (delta * math.exp(-K * z) + inner(z))

    cuts = [0.0] + list(_geometric_cuts(min(1.0 / lam, 1.0 / K), top, 1))
    total = sum(quad(outer, lo, hi, fine) for lo, hi in zip(cuts[:-1], cuts[1:]))
    # exact remainder beyond the cut (drift part decays like e^{-K top})
    total += delta * float(special.exp1(K * top))
    total += inner(top) * _scaled_exp1(K * top)
    if levy.family != "none":
        total += quad(lambda u: tail(u) * _scaled_exp1(K * u), top, math.inf, fine)
    return -2.0 / model.sigma2 * total


def _require_subordinator_env(model: ModelSpec) -> Subordinator:
    cls = classify(model.mechanism)
    if not isinstance(cls, Subordinator):
        raise DomainError("this operation needs a subordinator mechanism")
    if model.c <= 0 or model.sigma <= 0:
        raise DomainError("this operation needs c > 0 and sigma > 0")
    return cls


def pi_density(model: ModelSpec, z: float) -> float:
    """Density of the Lévy measure of ``nu``:
    ``(2 / (sigma^2 z)) (delta e^{-Kz} + int_0^z e^{-K(z-u)} mubar(u) du)``."""
    if z <= 0:
        raise DomainError("pi_density needs z > 0")
    cls = _require_subordinator_env(model)
    K = 2 * model.c / model.sigma2
    levy = model.mechanism.levy
    pts = [z - w / K for w in (1.0, 8.0, 40.0) if z - w / K > 0]
    inner = quad(lambda u: math.exp(-K * (z - u)) * levy.tail1(u), 0.0, z,
                 QuadratureConfig(abs_tol=0.0, rel_tol=1e-12), points=pts)
    return 2.0 / (model.sigma2 * z) * (cls.delta * math.exp(-K * z) + inner)


# ---------------------------------------------------------------------------
# Time scale
# ---------------------------------------------------------------------------


class TimeScale:
    """``I(lam) = int_0^lam exp(m)`` tabulated on the anchors of an :class:`MFunction`.

    Only anchors with ``m < 700`` are kept so that ``exp(m)`` stays finite.
    ``limit`` holds ``I(inf)`` for subordinator mechanisms (possibly ``inf``)
    and ``inf`` for general ones.
    """

    def __init__(self, m: MFunction, limit: float = math.inf):
        self.m = m
        keep = m.values < M_OVERFLOW
        grid = m.grid[keep]
        head = self._head(float(grid[0]))
        pieces = gl_segments(lambda u: np.exp(m(u)), grid[:-1], grid[1:], GL_ORDER)
        values = head + np.concatenate([[0.0], np.cumsum(pieces)])
        # a fast-decaying exp(m) saturates I in floating point; keep strictly increasing anchors
        rising = np.concatenate([[True], np.diff(np.log(values)) > 0])
        keep_rise = np.logical_and.accumulate(rising)
        self.grid = grid[keep_rise]
        self.values = values[keep_rise]
        self.limit = limit
        self._inv = interpolate.PchipInterpolator(np.log(self.values), np.log(self.grid))

    @property
    def lam_max(self) -> float:
        return float(self.grid[-1])

    def _head(self, l: float) -> float:
        """``I(l)`` below the first anchor."""
        if l == 0:
            return 0.0
        m_l = self.m(l)
        if abs(m_l) > 1e-5:
            return quad(lambda u: math.exp(self.m(u)), 0.0, l, self.m.cfg)
        # e^m = 1 + m + O(m^2) and int_0^l m = int_0^l (l - t) psi/omega(t) dt
        lin = quad(lambda t: (l - t) * float(psi_over_omega(self.m.model, t)), 0.0, l, self.m.cfg)
        return l + lin

    def __call__(self, lam):
        lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
        if np.any(lam_arr < 0):
            raise DomainError("I is defined for lam >= 0")
        out = np.empty_like(lam_arr)
        for i, l in enumerate(lam_arr):
            if l <= self.grid[0]:
                out[i] = self._head(l)
                continue
            k = min(int(np.searchsorted(self.grid, l, side="right")) - 1, self.grid.size - 1)
            base = self.values[k]
            lo = self.grid[k]
            cuts = _geometric_cuts(lo, l, 8)
            out[i] = base + float(np.sum(gl_segments(lambda u: np.exp(self.m(u)), cuts[:-1], cuts[1:], GL_ORDER)))
        if not np.all(np.isfinite(out)):
            raise NumericOverflowError("time scale overflowed")
        return float(out[0]) if np.ndim(lam) == 0 else out

    def inverse(self, z):
        """``phi(z) = I^{-1}(z)`` by monotone interpolation and Newton polishing."""
        z_arr = np.atleast_1d(np.asarray(z, dtype=float))
        if np.any(z_arr < 0):
            raise DomainError("the inverse time scale needs z >= 0")
        if np.any(z_arr >= self.limit):
            raise DomainError(f"z must lie below I(inf) = {self.limit:.6g}")
        top = self.values[-1]
        if np.any(z_arr > top):
            raise DomainError(f"z beyond the tabulated range I({self.grid[-1]:.3g}) = {top:.6g}")
        out = np.empty_like(z_arr)
        for i, zi in enumerate(z_arr):
            if zi == 0:
                out[i] = 0.0
                continue
            if zi < self.values[0]:
                lam = zi
            else:
                lam = float(np.exp(self._inv(np.log(zi))))
            for _ in range(6):
                step = (self(lam) - zi) * math.exp(-self.m(lam))
                lam_new = lam - step
                if lam_new <= 0:
                    lam_new = 0.5 * lam
                done = abs(lam_new - lam) <= 1e-14 * lam
                lam = lam_new
                if done:
                    break
            out[i] = lam
        return float(out[0]) if np.ndim(z) == 0 else out


def time_scale(model: ModelSpec, lam_max: float = 1e6, cfg: QuadratureConfig = DEFAULT_QUAD) -> TimeScale:
    """Tabulate ``I`` up to ``lam_max`` (or where ``m`` would overflow)."""
    m = MFunction(model, lam_max=lam_max, cfg=cfg)
    cls = classify(model.mechanism)
    limit = math.inf
    if isinstance(cls, Subordinator):
        limit = _normalizer(m, TimeScale(m), cfg)[0]
        return TimeScale(m, limit=limit if math.isfinite(limit) else math.inf)
    return TimeScale(m, limit=limit)


def tt_inv(ts: TimeScale, z: float) -> float:
    return ts.inverse(z)


def r_coeff(model: ModelSpec, ts: TimeScale, z: float) -> float:
    """``r(z) = exp(-m(phi(z))) / sqrt(omega(phi(z)))`` with ``phi = I^{-1}``."""
    if z <= 0:
        raise DomainError("r is defined for z > 0")
    u = ts.inverse(z)
    return math.exp(-ts.m(u)) / math.sqrt(float(omega(model, u)))


# ---------------------------------------------------------------------------
# Invariant law
# ---------------------------------------------------------------------------


def _normalizer(m: MFunction, ts: TimeScale, cfg: QuadratureConfig):
    """``I(inf)`` for a subordinator model plus the decision evidence."""
    model = m.model
    delta = classify(model.mechanism).delta
    p = -2.0 * delta / model.sigma2
    evidence = {"tail_exponent": p, "local_exponent": m.tail_exponent}
    verdict = classify_exponent(p, -1.0, cfg.band)
    if verdict is None:
        outcome = critical_outcome(model)
        evidence["critical"] = outcome.to_dict()
        if outcome.kind == "lower":
            return math.inf, evidence, outcome
        if outcome.kind == "upper":
            # finite but with a logarithmically slow tail; no reliable value
            return math.nan, evidence, outcome
        return math.nan, evidence, outcome
    if verdict:
        return math.inf, evidence, None
    top = ts.grid[-1]
    q = m.tail_exponent
    tail = math.exp(float(m(top))) * top / (-q - 1.0)
    evidence["truncation_point"] = float(top)
    evidence["tail_correction"] = tail
    return float(ts.values[-1]) + tail, evidence, None


@dataclass(frozen=True)
class InvariantLaw:
    """Laplace transforms of ``nu`` and of its size-biased version ``rho``.

    Attributes
    ----------
    normalizer : float
        ``int_0^inf exp(m) = int s^{-1} nu(ds)``; ``inf`` when ``rho`` does
        not exist and ``nan`` when finiteness could not be decided or the
        value could not be computed reliably.
    """

    model: ModelSpec
    m: MFunction = field(repr=False)
    ts: TimeScale = field(repr=False)
    normalizer: float
    evidence: dict = field(default_factory=dict)

    def nu_laplace(self, lam):
        return np.exp(self.m(lam))

    @property
    def rho_exists(self) -> bool:
        return math.isfinite(self.normalizer)

    def rho_laplace(self, theta):
        if math.isnan(self.normalizer):
            raise UndecidableError("the size-biased law could not be normalised", evidence=self.evidence)
        if math.isinf(self.normalizer):
            raise DomainError("the size-biased law does not exist (normaliser is infinite)")
        return 1.0 - self.ts(theta) / self.normalizer

    def to_dict(self) -> dict:
        return {"normalizer": self.normalizer, "evidence": self.evidence}


def invariant_law(model: ModelSpec, cfg: QuadratureConfig = DEFAULT_QUAD, lam_max: float = 1e7) -> InvariantLaw:
    _require_subordinator_env(model)
    _require_log_moment(model)
    m = MFunction(model, lam_max=lam_max, cfg=cfg)
    ts = TimeScale(m)
    norm, evidence, _ = _normalizer(m, ts, cfg)
    ts.limit = norm if math.isfinite(norm) else math.inf
    return InvariantLaw(model=model, m=m, ts=ts, normalizer=norm, evidence=evidence)


def chi(model: ModelSpec, lam: float, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``exp(int_1^lam psi/omega)``: the invariant Laplace transform up to an unknown constant.

    Useful when the log-moment condition fails and ``m`` itself is undefined.
    """
    if lam <= 0:
        raise DomainError("chi needs lam > 0")
    if model.c <= 0 and model.sigma <= 0:
        raise DomainError("chi needs c > 0 or sigma > 0")
    lo, hi, sign = (1.0, lam, 1.0) if lam >= 1 else (lam, 1.0, -1.0)
    f = lambda u: float(psi_over_omega(model, u))  # noqa: E731
    cuts = _geometric_cuts(lo, hi, 4)
    total = sum(quad(f, a, b, cfg) for a, b in zip(cuts[:-1], cuts[1:]))
    return math.exp(sign * total)


# ---------------------------------------------------------------------------
# Total population
# ---------------------------------------------------------------------------


def _inv_omega_primitive(model: ModelSpec, u):
    """A primitive of ``1/omega``."""
    u = np.asarray(u, dtype=float)
    if model.c > 0:
        return np.log(u / (model.c + 0.5 * model.sigma2 * u)) / model.c
    return -2.0 / (model.sigma2 * u)


@dataclass(frozen=True)
class TotalPopKernel:
    """``f_lam`` evaluated on demand; keeps the exponent table for reuse."""

    model: ModelSpec
    lam: float
    ell: float
    grid: np.ndarray = field(repr=False)
    exponent: np.ndarray = field(repr=False)
    head_slope: float
    truncation: dict

    def __call__(self, x: float) -> float:
        return _f_from_table(self, x)


def _exponent_table(model: ModelSpec, lam: float, ell: float, lo: float, hi: float):
    grid = np.unique(np.concatenate([_geometric_cuts(lo, hi, 16), [ell]]))
    grid.sort()
    g = lambda u: np.asarray(psi(model.mechanism, u)) / np.asarray(omega(model, u))  # noqa: E731
    cum = np.concatenate([[0.0], np.cumsum(gl_segments(g, grid[:-1], grid[1:], GL_ORDER))])
    k = int(np.searchsorted(grid, ell))
    cum = cum - cum[k]
    a = _inv_omega_primitive(model, grid)
    expo = lam * (a - float(_inv_omega_primitive(model, ell))) - cum
    return grid, expo


def _f_from_table(kern: TotalPopKernel, x: float) -> float:
    model, grid, expo = kern.model, kern.grid, kern.exponent
    if x < 0:
        raise DomainError("f_lambda needs x >= 0")
    # integrate exp(-x z + E(z)) / omega(z) in log z with per-segment GL
    lz = np.log(grid)
    xs, ws = np.polynomial.legendre.leggauss(GL_ORDER)
    mid = 0.5 * (lz[1:] + lz[:-1])
    half = 0.5 * (lz[1:] - lz[:-1])
    nodes = mid[:, None] + half[:, None] * xs
    z = np.exp(nodes)
    e_nodes = _interp_exponent(kern, z)
    logf = -x * z + e_nodes + np.log(z) - np.log(np.asarray(omega(model, z)))
    shift = float(np.max(logf))
    body = float(np.sum(half * (np.exp(logf - shift) @ ws)))
    # head: exp(E) ~ z^{lam/c} near 0 so the integrand behaves like z^{p} with p = lam/c - 1
    z0 = grid[0]
    f0 = math.exp(float(expo[0]) - x * z0) / float(omega(model, z0))
    head = f0 * z0 / (kern.head_slope + 1.0) if kern.head_slope > -1 else math.inf
    zt = grid[-1]
    ft = math.exp(float(expo[-1]) - x * zt) / float(omega(model, zt))
    if x > 0:
        tail = ft / x
        if x * zt < 40:
            raise TruncationError("f_lambda: grid too short for the exponential cut-off",
                                  [(float(zt), body)])
    else:
        q = kern.truncation["tail_exponent"]
        if q >= -1 - 1e-12:
            partial = [(float(zz), 0.0) for zz in grid[-3:]]
            raise TruncationError(f"f_lambda(0) diverges: integrand decays like z^{q:.4f}", partial)
        tail = ft * zt / (-q - 1.0)
    total = body * math.exp(shift) + head + tail
    if not math.isfinite(total):
        raise NumericOverflowError("f_lambda overflowed")
    return total


def _interp_exponent(kern: TotalPopKernel, z):
    # exact re-integration from the nearest anchor keeps full accuracy
    model, grid, expo = kern.model, kern.grid, kern.exponent
    k = np.clip(np.searchsorted(grid, z, side="right") - 1, 0, grid.size - 2)
    g = lambda u: np.asarray(psi(model.mechanism, u)) / np.asarray(omega(model, u))  # noqa: E731
    flat_z = z.ravel()
    flat_k = k.ravel()
    ints = gl_segments(g, grid[flat_k], flat_z, 12)
    lam_part = kern.lam * (_inv_omega_primitive(model, flat_z) - _inv_omega_primitive(model, grid[flat_k]))
    return (expo[flat_k] + lam_part - ints).reshape(z.shape)


def total_pop_kernel(model: ModelSpec, lam: float, ell: float = 1.0, x_min: float = 0.0,
                     z_max: float | None = None) -> TotalPopKernel:
    """Prepare ``f_lam`` for a subordinator model with ``sigma > 0``."""
    cls = classify(model.mechanism)
    if not isinstance(cls, Subordinator):
        raise DomainError("the total-population identity needs a subordinator mechanism")
    if model.sigma <= 0:
        raise DomainError("the total-population identity needs sigma > 0")
    if lam <= 0:
        raise DomainError("lam must be positive")
    if ell <= 0:
        raise DomainError("ell must be positive")
    lo = 1e-14 if model.c > 0 else 1e-4 * min(1.0, lam)
    if z_max is None:
        z_max = 1e8 if x_min <= 0 else max(1e3, 60.0 / x_min)
    grid, expo = _exponent_table(model, lam, ell, lo, z_max)
    head_slope = lam / model.c - 1.0 if model.c > 0 else math.inf
    # exponent of the integrand z -> exp(E(z)) / omega(z) at the top of the grid
    zt = grid[-1]
    q = float(zt * (lam - psi(model.mechanism, zt)) / omega(model, zt)) - zt * (
        model.c + model.sigma2 * zt) / float(omega(model, zt))
    return TotalPopKernel(model, lam, ell, grid, expo, head_slope,
                          {"truncation_point": float(zt), "tail_exponent": q})


def f_lambda(model: ModelSpec, lam: float, x: float, cfg: QuadratureConfig = DEFAULT_QUAD,
             ell: float = 1.0) -> float:
    """``f_lam(x) = int_0^inf (1/omega(z)) exp(-xz + int_ell^z (lam - psi)/omega) dz``."""
    return total_pop_kernel(model, lam, ell, x_min=x)(x)


def total_pop_laplace(model: ModelSpec, lam: float, x: float, a: float, ell: float = 1.0,
                      cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``E_x[exp(-lam int_0^{T_a} Z ds)] = f_lam(x) / f_lam(a)``."""
    if x < a or a < 0:
        raise DomainError("need x >= a >= 0")
    if x == a:
        return 1.0
    kern = total_pop_kernel(model, lam, ell, x_min=a)
    return kern(x) / kern(a)


# ---------------------------------------------------------------------------
# CBI flow
# ---------------------------------------------------------------------------


def cbi_flow(model: ModelSpec, t: float, lam: float) -> float:
    """Solution ``v_t(lam)`` of ``dv/dt = -omega(v)``, ``v_0 = lam``."""
    if t < 0:
        raise DomainError("t must be non-negative")
    if lam < 0:
        raise DomainError("lam must be non-negative")
    c, s2 = model.c, model.sigma2
    if c == 0:
        return lam / (1.0 + 0.5 * s2 * lam * t)
    e = math.exp(-c * t)
    return lam * e / (1.0 + s2 * lam * (-math.expm1(-c * t)) / (2.0 * c))


def cbi_laplace(model: ModelSpec, x: float, t: float, lam: float, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``E_x[exp(-lam R_t)]`` for the CBI with branching ``omega`` and immigration ``-psi``."""
    if x < 0:
        raise DomainError("x must be non-negative")
    cls = classify(model.mechanism)
    if not isinstance(cls, Subordinator):
        raise DomainError("cbi_laplace needs a subordinator mechanism")
    v = cbi_flow(model, t, lam)
    if t == 0:
        return math.exp(-x * lam)
    imm = quad(lambda s: -float(psi(model.mechanism, cbi_flow(model, s, lam))), 0.0, t, cfg)
    return math.exp(-x * v - imm)
