"""Branching mechanisms given by Lévy triplets ``(b, gamma2, mu)``.

The Laplace exponent is

    psi(z) = -b z + gamma2 z**2 + int (exp(-z u) - 1 + z u 1{u<1}) mu(du),

and the Lévy measure ``mu`` is always handled through its tail
``mubar(x) = mu((x, inf))``.  Integrating by parts gives the tail form
used as an independent route and for tabulated measures:

    jump part = z int_0^1 (1 - e^{-zu}) mubar(u) du
                - z int_1^inf e^{-zu} mubar(u) du - z mubar(1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar, Union

import numpy as np
from scipy import optimize, special

from .errors import ClassificationFailedError, DomainError, NumericOverflowError, UndecidableError
from .quadrature import DEFAULT_QUAD, QuadratureConfig, classify_exponent, quad

ArrayLike = Union[float, np.ndarray]


def _as_array(z) -> np.ndarray:
    return np.asarray(z, dtype=float)


def _scalar_or_array(out: np.ndarray, like):
    return float(out) if np.ndim(like) == 0 else out


# ---------------------------------------------------------------------------
# Lévy measures
# ---------------------------------------------------------------------------


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


class LevyMeasure:
    """Common interface of the closed set of Lévy-measure families."""

    family: ClassVar[str] = ""
    #: whether int_0^1 u mu(du) < inf
    finite_variation: ClassVar[bool] = True

    def tail(self, x):
        raise NotImplementedError

    def tail1(self, x: float) -> float:
        """Scalar ``mubar(x)``; families override it with a fast path."""
        return float(self.tail(x))

    def tail_integral(self, a, b):
        """``int_a^b mubar(u) du`` for ``0 <= a <= b`` (elementwise)."""
        raise NotImplementedError

    def integrated_tail(self, z):
        """``int_0^z mubar(w) dw``; infinite for infinite-variation measures."""
        return self.tail_integral(np.zeros_like(_as_array(z)), z)

    def jump_exponent(self, z):
        """Jump contribution to psi with the ``1{u<1}`` compensation."""
        return jump_exponent_by_tail(self, z)

    def small_jump_moment(self) -> float:
        """``int_(0,1) u mu(du)`` (``inf`` for infinite variation)."""
        return self.moment_between(0.0, 1.0)

    def large_jump_moment(self) -> float:
        """``int_[1,inf) u mu(du)``."""
        return self.moment_between(1.0, math.inf)

    def moment_between(self, a: float, b: float) -> float:
        """``int_[a,b) u mu(du)`` computed from the tail by parts."""
        if a == 0.0 and not self.finite_variation:
            return math.inf
        ta = float(self.tail(a)) if a > 0 else 0.0
        tb = float(self.tail(b)) if math.isfinite(b) else 0.0
        bt = b * tb if math.isfinite(b) else 0.0
        return a * ta - bt + float(self.tail_integral(a, b))

    def total_mass(self) -> float:
        """``mubar(0+)``."""
        return float(self.tail(1e-300))

    def log_moment(self) -> bool:
        return True

    def inverse_tail(self, t):
        """Return ``x`` with ``mubar(x) = t``."""
        raise NotImplementedError

    def breakpoints(self) -> tuple:
        return ()

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class NoJumps(LevyMeasure):
    family: ClassVar[str] = "none"

    def tail(self, x):
        return _scalar_or_array(np.zeros_like(_as_array(x)), x)

    def tail1(self, x: float) -> float:
        return 0.0

    def tail_integral(self, a, b):
        return _scalar_or_array(np.zeros(np.broadcast(_as_array(a), _as_array(b)).shape), b)

    def jump_exponent(self, z):
        return _scalar_or_array(np.zeros_like(_as_array(z)), z)

    def moment_between(self, a, b):
        return 0.0

    def total_mass(self):
        return 0.0

    def inverse_tail(self, t):
        raise DomainError("the zero measure has no jumps to sample")

    def to_dict(self):
        return {"family": self.family}


@dataclass(frozen=True)
class Stable(LevyMeasure):
    """Stable measure ``C u^(-1-alpha) du`` scaled so the jumps give ``-/+ c_alpha z^alpha``.

    For ``alpha < 1`` the uncompensated jump transform is ``-c_alpha z^alpha``;
    for ``1 < alpha < 2`` the fully compensated one is ``+c_alpha z^alpha``.
    The linear terms produced by the ``1{u<1}`` cutoff appear in
    :meth:`jump_exponent`; :meth:`BranchingMechanism.stable` folds them into ``b``.
    """

    family: ClassVar[str] = "stable"
    alpha: float
    c_alpha: float

    def __post_init__(self):
        a = self.alpha
        if not (0 < a < 1 or 1 < a < 2):
            raise DomainError(f"stable index must lie in (0,1) or (1,2), got {a}")
        if not self.c_alpha > 0:
            raise DomainError(f"c_alpha must be positive, got {self.c_alpha}")

    @property
    def finite_variation(self) -> bool:  # type: ignore[override]
        return self.alpha < 1

    @property
    def density_constant(self) -> float:
        a = self.alpha
        if a < 1:
            return self.c_alpha * a / special.gamma(1 - a)
        return self.c_alpha * a * (a - 1) / special.gamma(2 - a)

    def tail(self, x):
        x = _as_array(x)
        return _scalar_or_array(self.density_constant * x ** (-self.alpha) / self.alpha, x)

    def tail1(self, x: float) -> float:
        return self.density_constant * x ** (-self.alpha) / self.alpha

    def tail_integral(self, a, b):
        a, b = _as_array(a), _as_array(b)
        p = 1 - self.alpha
        k = self.density_constant / (self.alpha * p)
        with np.errstate(divide="ignore"):
            out = k * (np.power(b, p) - np.power(a, p))
        if p < 0:
            out = np.where(a == 0, np.inf, out)
        return _scalar_or_array(out, b)

    def jump_exponent(self, z):
        z = _as_array(z)
        a, C = self.alpha, self.density_constant
        if a < 1:
            out = -self.c_alpha * z**a + z * C / (1 - a)
        else:
            out = self.c_alpha * z**a - z * C / (a - 1)
        return _scalar_or_array(out, z)

    def moment_between(self, a, b):
        C, al = self.density_constant, self.alpha
        p = 1 - al
        if a == 0 and p <= 0:
            return math.inf
        if not math.isfinite(b):
            return math.inf if p >= 0 else -C * a**p / p
        return C * (b**p - a**p) / p

    def inverse_tail(self, t):
        t = _as_array(t)
        return (self.alpha * t / self.density_constant) ** (-1.0 / self.alpha)

    def to_dict(self):
        return {"family": self.family, "alpha": self.alpha, "c_alpha": self.c_alpha}


@dataclass(frozen=True)
class GammaTail(LevyMeasure):
    """Gamma-subordinator measure ``shape * u^-1 exp(-rate u) du``."""

    family: ClassVar[str] = "gamma"
    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise DomainError("gamma family needs shape > 0 and rate > 0")

    def tail(self, x):
        x = _as_array(x)
        return _scalar_or_array(self.shape * special.exp1(self.rate * x), x)

    def tail1(self, x: float) -> float:
        return self.shape * special.exp1(self.rate * x)

    def _antideriv(self, x):
        # d/dx [x E1(rx) - exp(-rx)/r] = E1(rx); the bracket is -1/r at x = 0
        r = self.rate
        with np.errstate(invalid="ignore"):
            xe = np.where(x > 0, x * special.exp1(r * np.where(x > 0, x, 1.0)), 0.0)
        return xe - np.exp(-r * x) / r

    def tail_integral(self, a, b):
        a, b = _as_array(a), _as_array(b)
        out = self.shape * (self._antideriv(b) - self._antideriv(a))
        return _scalar_or_array(out, b)

    def jump_exponent(self, z):
        z = _as_array(z)
        out = -self.shape * np.log1p(z / self.rate) + z * self.small_jump_moment()
        return _scalar_or_array(out, z)

    def moment_between(self, a, b):
        r = self.rate
        eb = 0.0 if not math.isfinite(b) else math.exp(-r * b)
        return self.shape * (math.exp(-r * a) - eb) / r

    def total_mass(self):
        return math.inf

    def inverse_tail(self, t):
        t = _as_array(t) / self.shape
        # E1 is decreasing; solve E1(y) = t on a log scale by vectorised bisection
        lo = np.full_like(t, -700.0)
        hi = np.full_like(t, 7.0)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            big = special.exp1(np.exp(mid)) > t
            lo = np.where(big, mid, lo)
            hi = np.where(big, hi, mid)
        return np.exp(0.5 * (lo + hi)) / self.rate

    def to_dict(self):
        return {"family": self.family, "shape": self.shape, "rate": self.rate}


@dataclass(frozen=True)
class CompoundPoissonExp(LevyMeasure):
    """Jumps at rate ``jump_rate`` with exponential sizes of mean ``1/jump_decay``."""

    family: ClassVar[str] = "cpexp"
    jump_rate: float
    jump_decay: float

    def __post_init__(self):
        if not (self.jump_rate > 0 and self.jump_decay > 0):
            raise DomainError("cpexp family needs rate > 0 and decay > 0")

    def tail(self, x):
        x = _as_array(x)
        return _scalar_or_array(self.jump_rate * np.exp(-self.jump_decay * x), x)

    def tail1(self, x: float) -> float:
        return self.jump_rate * math.exp(-self.jump_decay * x)

    def tail_integral(self, a, b):
        a, b = _as_array(a), _as_array(b)
        th = self.jump_decay
        out = self.jump_rate * (np.exp(-th * a) - np.exp(-th * b)) / th
        return _scalar_or_array(out, b)

    def jump_exponent(self, z):
        z = _as_array(z)
        out = -self.jump_rate * z / (self.jump_decay + z) + z * self.small_jump_moment()
        return _scalar_or_array(out, z)

    def moment_between(self, a, b):
        th = self.jump_decay

        def prim(x):  # int_0^x u theta e^{-theta u} du
            if not math.isfinite(x):
                return 1.0 / th
            return (1.0 - math.exp(-th * x) * (1.0 + th * x)) / th

        return self.jump_rate * (prim(b) - prim(a))

    def total_mass(self):
        return self.jump_rate

    def inverse_tail(self, t):
        t = _as_array(t)
        return np.log(self.jump_rate / t) / self.jump_decay

    def to_dict(self):
        return {"family": self.family, "rate": self.jump_rate, "decay": self.jump_decay}


@dataclass(frozen=True)
class TabulatedTail(LevyMeasure):
    """Tail given on a grid, log-log linear in between, power laws outside.

    Below ``x[0]`` the tail is ``tail[0] (x/x[0])**(-exponent_zero)`` and above
    ``x[-1]`` it is ``tail[-1] (x/x[-1])**(-exponent_inf)``.  An exponent of
    zero at infinity marks a tail decaying slower than every power; it makes
    the log-moment condition undecidable.
    """

    family: ClassVar[str] = "tabulated"
    x: tuple
    values: tuple
    exponent_zero: float
    exponent_inf: float
    _lx: np.ndarray = field(init=False, repr=False, compare=False)
    _lt: np.ndarray = field(init=False, repr=False, compare=False)
    _p: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        t = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.size < 2 or x.shape != t.shape:
            raise DomainError("tabulated tail needs two equal-length arrays of size >= 2")
        if np.any(x <= 0) or np.any(np.diff(x) <= 0):
            raise DomainError("tabulated abscissae must be positive and strictly increasing")
        if np.any(t <= 0) or np.any(np.diff(t) >= 0):
            raise DomainError("tabulated tail values must be positive and strictly decreasing")
        if not 0 <= self.exponent_zero < 2:
            raise DomainError("exponent at zero must lie in [0, 2)")
        if self.exponent_inf < 0:
            raise DomainError("exponent at infinity must be non-negative")
        object.__setattr__(self, "x", tuple(float(v) for v in x))
        object.__setattr__(self, "values", tuple(float(v) for v in t))
        lx, lt = np.log(x), np.log(t)
        object.__setattr__(self, "_lx", lx)
        object.__setattr__(self, "_lt", lt)
        p = np.concatenate([[self.exponent_zero], -np.diff(lt) / np.diff(lx), [self.exponent_inf]])
        object.__setattr__(self, "_p", p)

    @property
    def finite_variation(self) -> bool:  # type: ignore[override]
        return self.exponent_zero < 1

    def _segment(self, x):
        # segment k covers [x_{k-1}, x_k); segment 0 is below the grid
        return np.searchsorted(self._lx, np.log(x), side="right")

    def _anchor(self, k):
        i = np.clip(k - 1, 0, len(self.x) - 1)
        i = np.where(k == 0, 0, i)
        return self._lx[i], self._lt[i]

    def tail(self, x):
        xa = _as_array(x)
        with np.errstate(divide="ignore"):
            lxv = np.log(xa)
        k = self._segment(xa)
        ax, at = self._anchor(k)
        out = np.exp(at - self._p[k] * (lxv - ax))
        return _scalar_or_array(out, x)

    def _power_integral(self, k, a, b):
        # int_a^b of the power law of segment k
        ax, at = self._anchor(k)
        p = self._p[k]
        c = np.exp(at + p * ax)
        with np.errstate(divide="ignore", invalid="ignore"):
            q = 1.0 - p
            gen = c * (np.power(b, q) - np.power(a, q)) / np.where(q == 0, 1.0, q)
            lg = c * (np.log(b) - np.log(np.where(a > 0, a, 1e-300)))
        out = np.where(np.abs(q) < 1e-14, lg, gen)
        out = np.where(b <= a, 0.0, out)
        if np.any((a == 0) & (q <= 0) & (b > a)):
            out = np.where((a == 0) & (q <= 0) & (b > a), np.inf, out)
        return out

    def tail_integral(self, a, b):
        a_arr, b_arr = np.broadcast_arrays(_as_array(a), _as_array(b))
        out = np.zeros(a_arr.shape)
        edges = np.concatenate([[0.0], np.asarray(self.x), [np.inf]])
        for k in range(len(edges) - 1):
            lo = np.clip(a_arr, edges[k], edges[k + 1])
            hi = np.clip(b_arr, edges[k], edges[k + 1])
            mask = hi > lo
            if np.any(mask):
                if k == len(edges) - 2 and self.exponent_inf <= 1:
                    part = np.where(np.isinf(hi), np.inf, 0.0)
                    finite = mask & np.isfinite(hi)
                    part = np.where(finite, self._power_integral(np.full(lo.shape, k), lo, np.where(finite, hi, lo)), part)
                else:
                    part = self._power_integral(np.full(lo.shape, k), lo, hi)
                out = out + np.where(mask, part, 0.0)
        return _scalar_or_array(out, b)

    def jump_exponent(self, z):
        za = np.atleast_1d(_as_array(z))
        out = np.array([self._jump_exponent1(float(zi)) for zi in za.ravel()]).reshape(za.shape)
        return float(out[0]) if np.ndim(z) == 0 else out

    def _jump_exponent1(self, z: float) -> float:
        # z int mubar(u) (1{u<1} - e^{-zu}) du - z mubar(1), Gauss-Legendre in
        # log u on decade panels, with a two-term series below u_lo
        if z == 0:
            return 0.0
        u_lo = min(self.x[0], 1.0, 1e-6 / z)
        u_hi = max(self.x[-1], 1.0, 60.0 / z)
        lo, hi = math.log(u_lo), math.log(u_hi)
        edges = np.concatenate([np.arange(lo, hi, math.log(10.0)), [hi], self._lx, [0.0]])
        edges = np.unique(edges[(edges >= lo) & (edges <= hi)])
        half = 0.5 * np.diff(edges)
        s = (edges[:-1, None] + half[:, None] * (_GL_X[None, :] + 1.0)).ravel()
        w = (half[:, None] * _GL_W[None, :]).ravel()
        u = np.exp(s)
        kern = np.where(u < 1.0, -np.expm1(-z * u), -np.exp(-z * u))
        body = float(np.sum(w * u * self.tail(u) * kern))
        p0 = self.exponent_zero
        c0 = float(self.tail(u_lo)) * u_lo**p0
        head = c0 * z * (u_lo ** (2 - p0) / (2 - p0) - z * u_lo ** (3 - p0) / (2 * (3 - p0)))
        return z * (body + head) - z * float(self.tail(1.0))

    def moment_between(self, a, b):
        if not math.isfinite(b) and self.exponent_inf <= 1:
            return math.inf
        return super().moment_between(a, b)

    def log_moment(self) -> bool:
        if self.exponent_inf == 0:
            raise UndecidableError(
                "tail exponent at infinity is 0: log-moment cannot be decided",
                exponent=0.0,
            )
        return True

    def inverse_tail(self, t):
        t = _as_array(t)
        lt = np.log(t)
        # segments in decreasing-tail order: below grid, inner segments, above grid
        k = len(self.x) - np.searchsorted(self._lt[::-1], lt, side="left")
        k = np.clip(k, 0, len(self.x))
        ax, at = self._anchor(k)
        p = self._p[k]
        if np.any(p == 0):
            raise DomainError("cannot invert a flat tail segment")
        return np.exp(ax - (lt - at) / p)

    def breakpoints(self):
        return self.x

    def to_dict(self):
        return {
            "family": self.family,
            "x": list(self.x),
            "tail": list(self.values),
            "exponent_zero": self.exponent_zero,
            "exponent_inf": self.exponent_inf,
        }


def jump_exponent_by_tail(levy: LevyMeasure, z, cfg: QuadratureConfig = DEFAULT_QUAD):
    """Jump part of psi evaluated by quadrature of the tail (independent route)."""
    za = np.atleast_1d(_as_array(z))
    out = np.empty_like(za)
    fine = QuadratureConfig(abs_tol=0.0, rel_tol=min(cfg.rel_tol, 1e-12), limit=max(cfg.limit, 500))
    bps = tuple(p for p in levy.breakpoints() if p < 1)
    m1 = float(levy.tail(1.0))
    for i, zi in enumerate(za):
        if zi == 0:
            out[i] = 0.0
            continue
        # decade breakpoints resolve the boundary layer of width 1/z near 0
        layer = tuple(p for p in np.geomspace(1.0 / zi, 1.0 / zi * 1e6, 7) if p < 1)
        pts = sorted(set(bps + layer))
        a = quad(lambda u: -math.expm1(-zi * u) * levy.tail1(u), 0.0, 1.0, fine, points=pts)
        bps_hi = [p for p in levy.breakpoints() if p > 1]
        b = 0.0
        lo = 1.0
        for p in bps_hi + [math.inf]:
            b += quad(lambda u: math.exp(-zi * u) * levy.tail1(u), lo, p, fine)
            lo = p
        out[i] = zi * a - zi * b - zi * m1
    return float(out[0]) if np.ndim(z) == 0 else out


# ---------------------------------------------------------------------------
# Mechanisms and models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BranchingMechanism:
    """Lévy triplet with ``b`` the linear coefficient of the Lévy-Khintchine form."""

    b: float
    gamma2: float = 0.0
    levy: LevyMeasure = field(default_factory=NoJumps)

    def __post_init__(self):
        if not (math.isfinite(self.b) and math.isfinite(self.gamma2)):
            raise DomainError("mechanism parameters must be finite")
        if self.gamma2 < 0:
            raise DomainError(f"gamma2 must be non-negative, got {self.gamma2}")

    @classmethod
    def from_delta(cls, delta: float, levy: LevyMeasure | None = None, gamma2: float = 0.0):
        """Build the mechanism whose drift after removing small jumps is ``delta``."""
        levy = levy or NoJumps()
        if not levy.finite_variation:
            raise DomainError("delta is only defined for finite-variation jump measures")
        return cls(b=delta + levy.small_jump_moment(), gamma2=gamma2, levy=levy)

    @classmethod
    def stable(cls, alpha: float, c_alpha: float, drift: float = 0.0, gamma2: float = 0.0):
        """Mechanism with ``psi(z) = -drift z - c_alpha z^alpha`` (alpha < 1) or
        ``-drift z + c_alpha z^alpha`` (1 < alpha < 2)."""
        levy = Stable(alpha, c_alpha)
        C = levy.density_constant
        shift = C / (1 - alpha) if alpha < 1 else -C / (alpha - 1)
        return cls(b=drift + shift, gamma2=gamma2, levy=levy)

    @property
    def delta(self) -> float | None:
        if self.gamma2 > 0 or not self.levy.finite_variation:
            return None
        return self.b - self.levy.small_jump_moment()

    def psi(self, z):
        return psi(self, z)

    def to_dict(self) -> dict:
        return {"b": self.b, "gamma2": self.gamma2, "levy": self.levy.to_dict()}


@dataclass(frozen=True)
class Subordinator:
    delta: float
    kind: ClassVar[str] = "subordinator"


@dataclass(frozen=True)
class General:
    theta: float
    kind: ClassVar[str] = "general"


MechanismClass = Union[Subordinator, General]


@dataclass(frozen=True)
class ModelSpec:
    """Mechanism together with environment volatility ``sigma`` and competition ``c``."""

    mechanism: BranchingMechanism
    sigma: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        if self.sigma < 0 or self.c < 0:
            raise DomainError("sigma and c must be non-negative")

    @property
    def sigma2(self) -> float:
        return self.sigma**2

    def omega(self, x):
        return omega(self, x)

    def to_dict(self) -> dict:
        d = self.mechanism.to_dict()
        d.update(sigma=self.sigma, c=self.c)
        return d


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def psi(mech: BranchingMechanism, z):
    """Laplace exponent ``psi(z)`` for ``z >= 0`` (scalar or array)."""
    if type(z) is float:
        if not z >= 0:
            raise DomainError("psi is defined for z >= 0 only")
        val = -mech.b * z + mech.gamma2 * z * z + float(mech.levy.jump_exponent(z))
        if not math.isfinite(val):
            raise NumericOverflowError("psi evaluated to a non-finite value")
        return val
    za = _as_array(z)
    if np.any(za < 0) or np.any(np.isnan(za)):
        raise DomainError("psi is defined for z >= 0 only")
    with np.errstate(over="ignore", invalid="ignore"):
        out = -mech.b * za + mech.gamma2 * za**2 + _as_array(mech.levy.jump_exponent(za))
    if not np.all(np.isfinite(out)):
        raise NumericOverflowError("psi evaluated to a non-finite value")
    return _scalar_or_array(out, z)


def psi_prime_zero(mech: BranchingMechanism) -> float:
    """``psi'(0+) = -b - int_[1,inf) u mu(du)``; ``-inf`` when that moment diverges."""
    return -mech.b - mech.levy.large_jump_moment()


def tail_mass(mech: BranchingMechanism, x):
    """``mubar(x) = mu((x, inf))`` for ``x > 0``."""
    xa = _as_array(x)
    if np.any(xa <= 0):
        raise DomainError("tail_mass needs x > 0")
    return mech.levy.tail(x)


def omega(model: ModelSpec, x):
    """``omega(x) = c x + sigma^2 x^2 / 2``."""
    if type(x) is float:
        if not x >= 0:
            raise DomainError("omega is defined for x >= 0 only")
        return model.c * x + 0.5 * model.sigma2 * x * x
    xa = _as_array(x)
    if np.any(xa < 0):
        raise DomainError("omega is defined for x >= 0 only")
    return _scalar_or_array(model.c * xa + 0.5 * model.sigma2 * xa**2, x)


def classify(mech: BranchingMechanism, z_max: float = 1e12) -> MechanismClass:
    """Subordinator with its drift ``delta``, or General with the threshold ``theta``."""
    d = mech.delta
    if d is not None and d >= 0:
        return Subordinator(delta=float(d))
    grid = np.geomspace(1e-12, z_max, int(20 * math.log10(z_max / 1e-12)) + 1)
    vals = np.array([psi(mech, g) for g in grid]) if mech.levy.family == "tabulated" else psi(mech, grid)
    nonpos = np.nonzero(vals <= 0)[0]
    if nonpos.size == 0:
        return General(theta=0.0)
    last = int(nonpos[-1])
    if last == grid.size - 1:
        raise ClassificationFailedError(f"psi is not positive anywhere up to z_max={z_max:g}")
    lo, hi = grid[last], grid[last + 1]
    if vals[last] == 0:
        return General(theta=float(lo))
    theta = optimize.brentq(lambda t: psi(mech, t), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return General(theta=float(theta))


def check_grey(mech: BranchingMechanism, cfg: QuadratureConfig = DEFAULT_QUAD) -> bool:
    """Whether ``int^inf dz / psi(z) < inf``.

    Brownian part present: psi grows quadratically.  Finite variation
    without Brownian part: psi grows exactly linearly and the integral
    diverges.  Otherwise the log-log slope of psi over the last two
    decades below ``cfg.z_max`` is compared with 1.
    """
    cls = classify(mech, cfg.z_max)
    if isinstance(cls, Subordinator):
        raise DomainError("Grey's condition concerns general mechanisms only")
    if mech.gamma2 > 0:
        return True
    if mech.levy.finite_variation:
        return False
    zt = cfg.z_max
    slope = math.log(psi(mech, zt) / psi(mech, zt / 100)) / math.log(100.0)
    verdict = classify_exponent(slope, 1.0, cfg.band)
    if verdict is None:
        start = max(cls.theta, 1.0) * 2
        pts = start * np.logspace(1, math.log10(zt / start), 6)
        partial = []
        acc, prev = 0.0, start
        for t in pts:
            acc += quad(lambda u: 1.0 / psi(mech, u), prev, t, cfg)
            partial.append((float(t), acc))
            prev = t
        raise UndecidableError(
            f"log-log slope of psi is {slope:.4f}, inside the indeterminate band",
            exponent=slope,
            evidence={"partial_integrals": partial},
        )
    return verdict


def check_log_moment(mech: BranchingMechanism) -> bool:
    """Whether ``int_1^inf log(u) mu(du) < inf``."""
    return mech.levy.log_moment()


def satisfies_first_moment(mech: BranchingMechanism) -> bool:
    """Whether ``int (u ^ u^2) mu(du) < inf``, i.e. ``|psi'(0+)| < inf``."""
    return math.isfinite(mech.levy.large_jump_moment())
