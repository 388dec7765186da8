"""Continuous-path branching diffusions with a general interaction ``g``.

The population solves ``dZ = (b Z - g(Z)) dt + sqrt(2 gamma^2 Z) dB + sigma Z dW``.
It is a one-dimensional diffusion with drift ``b z - g(z)`` and
``d(z) = gamma^2 z + sigma^2 z^2 / 2`` (half the squared volatility), so

    s(u) = exp L(u),   L(u) = int_1^u (g(z) - b z) / d(z) dz,   S(x) = int_0^x s.

Extinction is almost sure exactly when ``S(inf) = inf``.  The Laplace
transform of ``T_a`` is ``exp(-int_a^x qbar)`` where ``qbar`` solves
``qbar' = qbar^2 + ((g - b x)/d) qbar - lam/d`` and vanishes at infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy import optimize

from .errors import DomainError, NonIntegrableError, UndecidableError
from .quadrature import DEFAULT_QUAD, QuadratureConfig, Trilean, Verdict, classify_exponent, gauss_legendre, quad

__all__ = [
    "Interaction",
    "Logistic",
    "Linear",
    "PiecewisePolynomial",
    "TabulatedInteraction",
    "DiffusionModel",
    "ScaleFunction",
    "scale_function",
    "scale_S",
    "scale_inf",
    "extinction_criterion",
    "hit_prob",
    "laplace_Ta_diffusion",
    "interaction_from_dict",
]


class Interaction:
    """Interaction term ``g`` with ``g(0) = 0``; subclasses are vectorised."""

    kind: ClassVar[str] = ""

    def __call__(self, z):
        raise NotImplementedError

    def tail_exponent(self) -> float:
        """``p`` with ``g(z) ~ C z^p`` at infinity (``-inf`` when ``g`` vanishes identically far out)."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Logistic(Interaction):
    """``g(z) = c z^2``."""

    c: float
    kind: ClassVar[str] = "logistic"

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c >= 0):
            raise ValueError("logistic coefficient c must be finite and non-negative")

    def __call__(self, z):
        return self.c * np.asarray(z, dtype=float) ** 2 if not isinstance(z, float) else self.c * z * z

    def tail_exponent(self) -> float:
        return 2.0 if self.c > 0 else -math.inf

    def to_dict(self) -> dict:
        return {"kind": self.kind, "c": self.c}


@dataclass(frozen=True)
class Linear(Interaction):
    """``g(z) = w z``."""

    w: float
    kind: ClassVar[str] = "linear"

    def __post_init__(self):
        if not math.isfinite(self.w):
            raise ValueError("linear coefficient w must be finite")

    def __call__(self, z):
        return self.w * (np.asarray(z, dtype=float) if not isinstance(z, float) else z)

    def tail_exponent(self) -> float:
        return 1.0 if self.w != 0 else -math.inf

    def to_dict(self) -> dict:
        return {"kind": self.kind, "w": self.w}


@dataclass(frozen=True)
class PiecewisePolynomial(Interaction):
    """Polynomial pieces ``g(z) = sum_k coeffs[i][k] z^k`` on ``[breaks[i], breaks[i+1])``.

    ``breaks`` starts at 0; the last piece extends to infinity.  ``g(0) = 0``
    and continuity at the break points are enforced.
    """

    breaks: tuple
    coeffs: tuple
    kind: ClassVar[str] = "piecewise_polynomial"

    def __post_init__(self):
        br = tuple(float(b) for b in self.breaks)
        co = tuple(tuple(float(c) for c in row) for row in self.coeffs)
        object.__setattr__(self, "breaks", br)
        object.__setattr__(self, "coeffs", co)
        if not br or br[0] != 0.0:
            raise ValueError("breaks must start at 0")
        if any(b2 <= b1 for b1, b2 in zip(br, br[1:])):
            raise ValueError("breaks must be strictly increasing")
        if len(co) != len(br) or any(len(r) == 0 for r in co):
            raise ValueError("one non-empty coefficient row per piece is required")
        if co[0][0] != 0.0:
            raise ValueError("g(0) must vanish (constant term of the first piece)")
        for i in range(1, len(br)):
            left = np.polynomial.polynomial.polyval(br[i], co[i - 1])
            right = np.polynomial.polynomial.polyval(br[i], co[i])
            if not math.isclose(left, right, rel_tol=1e-9, abs_tol=1e-12):
                raise ValueError(f"g is discontinuous at z={br[i]}")

    def __call__(self, z):
        za = np.asarray(z, dtype=float)
        idx = np.clip(np.searchsorted(self.breaks, za, side="right") - 1, 0, len(self.breaks) - 1)
        out = np.empty(za.shape)
        for i, row in enumerate(self.coeffs):
            sel = idx == i
            if np.any(sel):
                out[sel] = np.polynomial.polynomial.polyval(za[sel], row)
        return float(out) if za.ndim == 0 else out

    def tail_exponent(self) -> float:
        last = np.trim_zeros(np.asarray(self.coeffs[-1]), "b")
        return float(len(last) - 1) if last.size else -math.inf

    def to_dict(self) -> dict:
        return {"kind": self.kind, "breaks": list(self.breaks), "coeffs": [list(r) for r in self.coeffs]}


@dataclass(frozen=True)
class TabulatedInteraction(Interaction):
    """Linear interpolation through ``(x_i, g_i)`` with a power tail ``g_N (z/x_N)^p`` beyond ``x_N``.

    The first knot must be ``(0, 0)``.
    """

    x: tuple
    values: tuple
    tail_power: float
    kind: ClassVar[str] = "tabulated"

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        g = tuple(float(v) for v in self.values)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", g)
        if len(x) < 2 or len(x) != len(g):
            raise ValueError("need at least two knots with matching values")
        if x[0] != 0.0 or g[0] != 0.0:
            raise ValueError("the first knot must be (0, 0) so that g(0) = 0")
        if any(b <= a for a, b in zip(x, x[1:])):
            raise ValueError("knots must be strictly increasing")
        if not math.isfinite(self.tail_power):
            raise ValueError("tail_power must be finite")

    def __call__(self, z):
        za = np.asarray(z, dtype=float)
        xs = np.asarray(self.x)
        gs = np.asarray(self.values)
        out = np.interp(za, xs, gs)
        far = za > xs[-1]
        if np.any(far):
            out = np.where(far, gs[-1] * (np.maximum(za, xs[-1]) / xs[-1]) ** self.tail_power, out)
        return float(out) if za.ndim == 0 else out

    def tail_exponent(self) -> float:
        return self.tail_power if self.values[-1] != 0 else -math.inf

    def to_dict(self) -> dict:
        return {"kind": self.kind, "x": list(self.x), "values": list(self.values), "tail_power": self.tail_power}


def interaction_from_dict(d: dict) -> Interaction:
    kind = d.get("kind")
    if kind == "logistic":
        return Logistic(float(d["c"]))
    if kind == "linear":
        return Linear(float(d["w"]))
    if kind == "piecewise_polynomial":
        return PiecewisePolynomial(tuple(d["breaks"]), tuple(tuple(r) for r in d["coeffs"]))
    if kind == "tabulated":
        return TabulatedInteraction(tuple(d["x"]), tuple(d["values"]), float(d["tail_power"]))
    raise ValueError(f"unknown interaction kind {kind!r}")


@dataclass(frozen=True)
class DiffusionModel:
    """Branching diffusion with interaction.

    Parameters
    ----------
    b : float
        Linear growth rate.
    gamma2 : float
        Branching variance coefficient ``gamma^2 >= 0``.
    sigma : float
        Environmental volatility ``sigma >= 0``.
    g : Interaction
        Interaction term with ``g(0) = 0``.
    """

    b: float
    gamma2: float
    sigma: float
    g: Interaction

    def __post_init__(self):
        if not math.isfinite(self.b):
            raise ValueError("b must be finite")
        if not (math.isfinite(self.gamma2) and self.gamma2 >= 0):
            raise ValueError("gamma2 must be finite and non-negative")
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError("sigma must be finite and non-negative")
        if self.gamma2 == 0 and self.sigma == 0:
            raise ValueError("gamma2 or sigma must be positive")
        if not isinstance(self.g, Interaction):
            raise ValueError("g must be an Interaction")
        if abs(float(self.g(0.0))) > 0:
            raise ValueError("g(0) must vanish")

    @property
    def sigma2(self) -> float:
        return self.sigma * self.sigma

    def drift(self, z):
        """``g(z) - b z`` (the scale-function drift, opposite in sign to the SDE drift)."""
        return self.g(z) - self.b * z

    def d(self, z):
        """``gamma^2 z + sigma^2 z^2 / 2``."""
        return self.gamma2 * z + 0.5 * self.sigma2 * z * z

    def riccati_coefficients(self):
        def A(x):
            return self.drift(x) / self.d(x)

        def B(x):
            return 1.0 / self.d(x)

        return A, B

    def log_density(self, x):
        """``L(x) = ln s(x)``; closed forms for logistic and linear interactions."""
        xa = np.asarray(x, dtype=float)
        if np.any(xa < 0):
            raise DomainError("the scale density is defined for x >= 0")
        closed = _closed_log_density(self, xa)
        if closed is not None:
            return float(closed) if xa.ndim == 0 else closed
        out = _numeric_log_density(self, xa)
        return float(out) if xa.ndim == 0 else out

    def scale_grid(self, x) -> np.ndarray:
        """``S`` on an array of points."""
        return scale_function(self)(np.asarray(x, dtype=float))

    def to_dict(self) -> dict:
        return {"b": self.b, "gamma2": self.gamma2, "sigma": self.sigma, "g": self.g.to_dict()}


def _closed_log_density(m: DiffusionModel, x: np.ndarray):
    g = m.g
    b, G, s2 = m.b, m.gamma2, m.sigma2
    if isinstance(g, Logistic):
        c = g.c
        if s2 > 0:
            if G == 0:
                with np.errstate(divide="ignore"):
                    return (2 * c / s2) * (x - 1) - (2 * b / s2) * np.log(x)
            ratio = (2 * G + s2 * x) / (2 * G + s2)
            return (2 * c / s2) * (x - 1) - (2 / s2) * (b + 2 * c * G / s2) * np.log(ratio)
        return (c / G) * (x * x - 1) / 2 - (b / G) * (x - 1)
    if isinstance(g, Linear):
        k = g.w - b
        if s2 > 0:
            if G == 0:
                with np.errstate(divide="ignore"):
                    return (2 * k / s2) * np.log(x)
            return (2 * k / s2) * np.log((2 * G + s2 * x) / (2 * G + s2))
        return k * (x - 1) / G
    return None


def _numeric_log_density(m: DiffusionModel, x: np.ndarray) -> np.ndarray:
    if m.gamma2 == 0:
        raise DomainError("the numerical scale density needs gamma > 0 (the drift ratio is singular at 0)")
    f = lambda z: float(m.drift(z) / m.d(z))  # noqa: E731
    cfg = QuadratureConfig(abs_tol=1e-13, rel_tol=1e-11)
    flat = np.atleast_1d(x).ravel()
    out = np.empty(flat.shape)
    kinks = [k for k in getattr(m.g, "breaks", ()) + tuple(getattr(m.g, "x", ())) if k > 0]
    for i, xv in enumerate(flat):
        lo, hi = sorted((1.0, float(xv)))
        pts = [k for k in kinks if lo < k < hi]
        val = quad(f, lo, hi, cfg, points=pts or None)
        out[i] = val if xv >= 1.0 else -val
    return out.reshape(np.shape(x))


class ScaleFunction:
    """``S(x) = int_0^x exp L(u) du`` with its inverse and ``S(inf)``.

    ``S`` is accumulated with Gauss-Legendre rules on a geometric grid of
    ``[x_min, x_max]``; below ``x_min`` the density is taken constant.
    ``S(inf)`` is decided from the power exponent ``u L'(u)`` of the
    density at large ``u`` against ``-1``.
    """

    def __init__(self, model: DiffusionModel, x_min: float = 1e-12, x_max: float = 1e12, per_decade: int = 8,
                 cfg: QuadratureConfig = DEFAULT_QUAD):
        self.model = model
        self.cfg = cfg
        if model.gamma2 == 0:
            # s(u) ~ u^p0 near zero
            p0 = x_min * float(model.drift(x_min)) / float(model.d(x_min))
            if not p0 > -1 + cfg.band:
                raise NonIntegrableError("scale density is not integrable at 0 without a branching variance")
        self.x_min = x_min
        n = int(per_decade * math.log10(x_max / x_min)) + 1
        knots = np.geomspace(x_min, x_max, n)
        logs = np.asarray(model.log_density(knots), dtype=float)
        keep = np.nonzero(logs < 690.0)[0]
        last = int(keep[-1]) + 1 if keep.size else 1
        self._knots = knots[: max(last, 2)]
        self._order = 16
        gx, gw = gauss_legendre(self._order)
        lo, hi = self._knots[:-1], self._knots[1:]
        half = 0.5 * (hi - lo)
        nodes = 0.5 * (hi + lo)[:, None] + half[:, None] * gx
        vals = np.exp(np.asarray(model.log_density(nodes.ravel()))).reshape(nodes.shape)
        pieces = half * (vals @ gw)
        head = self._head(x_min)
        self._cum = np.concatenate([[head], head + np.cumsum(pieces)])
        self.limit, self.verdict = self._decide_infinity()

    @property
    def x_max(self) -> float:
        """Largest abscissa where ``S`` is tabulated."""
        return float(self._knots[-1])

    def _head(self, x: float) -> float:
        if self.model.gamma2 > 0:
            return x * math.exp(float(self.model.log_density(x)))
        # power singularity s ~ u^p at 0
        p = x * float(self.model.drift(x)) / float(self.model.d(x))
        return x * math.exp(float(self.model.log_density(x))) / (p + 1.0)

    def _decide_infinity(self):
        m = self.model
        probe = np.array([1e10, 1e11, 1e12])
        expo = probe * np.asarray(m.drift(probe), dtype=float) / np.asarray(m.d(probe), dtype=float)
        p = float(expo[-1])
        growing = expo[-1] > expo[0] + 1.0
        evidence = {"density_exponent": p, "exponents": expo.tolist()}
        if growing and p > 0:
            return math.inf, Verdict(Trilean.NO, {**evidence, "rule": "density grows faster than any power"})
        above = classify_exponent(p, -1.0, self.cfg.band)
        if above is None:
            return math.nan, Verdict(Trilean.UNDECIDABLE, {**evidence, "rule": "exponent within the band of -1"})
        if not above:
            # convergent tail; close it with the power law from the last knot
            xN = float(self._knots[-1])
            tail = xN * math.exp(float(m.log_density(xN))) / (-(p + 1.0))
            val = float(self._cum[-1]) + tail
            return val, Verdict(Trilean.YES, {**evidence, "rule": "exponent below -1", "S_inf": val})
        return math.inf, Verdict(Trilean.NO, {**evidence, "rule": "exponent at least -1"})

    @property
    def finite(self) -> Trilean:
        """Whether ``S(inf) < inf``."""
        return self.verdict.value

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        if np.any(xa < 0):
            raise DomainError("S is defined for x >= 0")
        flat = np.atleast_1d(xa).ravel()
        out = np.empty(flat.shape)
        for i, xv in enumerate(flat):
            out[i] = self._one(float(xv))
        return float(out[0]) if xa.ndim == 0 else out.reshape(xa.shape)

    def _one(self, x: float) -> float:
        if x == 0:
            return 0.0
        if math.isinf(x):
            return self.limit
        k = self._knots
        if x <= k[0]:
            return self._head(x)
        if x > k[-1]:
            if math.isfinite(self.limit):
                return self.limit - self._tail_beyond(x)
            raise DomainError("S(x) overflows beyond the tabulated range")
        j = int(np.searchsorted(k, x)) - 1
        j = max(0, min(j, k.size - 2))
        lo = float(k[j])
        gx, gw = gauss_legendre(self._order)
        half = 0.5 * (x - lo)
        nodes = lo + half * (gx + 1.0)
        piece = half * float(np.exp(np.asarray(self.model.log_density(nodes))) @ gw)
        return float(self._cum[j]) + piece

    def _tail_beyond(self, x: float) -> float:
        return quad(lambda u: math.exp(float(self.model.log_density(u))), x, math.inf,
                    QuadratureConfig(abs_tol=0.0, rel_tol=1e-10))

    def density(self, x):
        return np.exp(self.model.log_density(x))

    def inverse(self, z: float) -> float:
        """``S^{-1}(z)`` for ``0 <= z < S(inf)``."""
        z = float(z)
        if z < 0 or (math.isfinite(self.limit) and z >= self.limit):
            raise DomainError(f"z must lie in [0, S(inf)) with S(inf) = {self.limit}")
        if z == 0:
            return 0.0
        hi = 1.0
        while self._one(hi) < z:
            hi *= 2.0
            if hi > self._knots[-1] and not math.isfinite(self.limit):
                raise DomainError("z beyond the representable range of S")
        lo = 0.0
        x = optimize.brentq(lambda t: self._one(t) - z, lo, hi, xtol=1e-15 * hi, rtol=1e-15, maxiter=200)
        # one Newton polish with S' = s
        return x - (self._one(x) - z) / float(self.density(x))


def scale_function(diff: DiffusionModel, cfg: QuadratureConfig = DEFAULT_QUAD) -> ScaleFunction:
    return ScaleFunction(diff, cfg=cfg)


def scale_S(diff: DiffusionModel, x: float, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``S(x)``."""
    if x < 0:
        raise DomainError("x must be non-negative")
    return ScaleFunction(diff, cfg=cfg)(x)


def scale_inf(diff: DiffusionModel, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``S(inf)``; ``inf`` when infinite.  Raises :class:`UndecidableError` in the indeterminate band."""
    sf = ScaleFunction(diff, cfg=cfg)
    if sf.finite is Trilean.UNDECIDABLE:
        raise UndecidableError("tail exponent of the scale density is too close to -1",
                               exponent=sf.verdict.evidence.get("density_exponent"), evidence=sf.verdict.evidence)
    return sf.limit


def extinction_criterion(diff: DiffusionModel, cfg: QuadratureConfig = DEFAULT_QUAD) -> Verdict:
    """``P_x(T_0 < inf) = 1`` iff ``S(inf) = inf``; otherwise ``P_x(Z -> inf) = S(x)/S(inf) > 0``."""
    sf = ScaleFunction(diff, cfg=cfg)
    v = sf.finite
    value = {Trilean.NO: Trilean.YES, Trilean.YES: Trilean.NO}.get(v, Trilean.UNDECIDABLE)
    ev = dict(sf.verdict.evidence)
    ev["S_inf"] = sf.limit
    if value is Trilean.NO:
        ev["escape_probability"] = "P_x(Z -> inf) = S(x) / S(inf)"
    return Verdict(value, ev)


def hit_prob(diff: DiffusionModel, x: float, y: float, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``P_x(T_0 < T_y) = (S(y) - S(x)) / S(y)`` for ``0 <= x <= y``."""
    if x < 0 or y < x:
        raise DomainError("need 0 <= x <= y")
    if y == 0:
        return 1.0
    sf = ScaleFunction(diff, cfg=cfg)
    Sy = sf(y)
    return (Sy - sf(x)) / Sy


def laplace_Ta_diffusion(diff: DiffusionModel, lam: float, x, a: float, cfg=None) -> float:
    """``E_x[exp(-lam T_a)] = exp(-int_{S(a)}^{S(x)} ybar)`` for a diffusion with ``gamma > 0``."""
    from .hitting import parse_start
    from .riccati import DEFAULT_RICCATI, solve_backward

    x = parse_start(x)
    a = parse_start(a)
    if diff.gamma2 <= 0:
        raise DomainError("the scale-based Laplace transform needs gamma > 0")
    if math.isinf(a) or x < a:
        raise DomainError("need finite a <= x")
    if lam < 0:
        raise DomainError("lam must be non-negative")
    if x == a or lam == 0:
        return 1.0
    A, B = diff.riccati_coefficients()
    pre = solve_backward(A, B, lam, cfg or DEFAULT_RICCATI)
    if math.isinf(x):
        return math.exp(-(pre.total - float(pre.w(a))))
    return math.exp(-(float(pre.w(x)) - float(pre.w(a))))
