"""Quadrature settings, improper-integral helpers and three-valued verdicts.

Convergence of improper integrals is never decided by raw quadrature:
a local power-law exponent is compared with the critical value and a
band of width ``QuadratureConfig.band`` around it is reported as
undecidable.  Quadrature values are attached as evidence only.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericOverflowError, TruncationError


class Trilean(str, enum.Enum):
    YES = "yes"
    NO = "no"
    UNDECIDABLE = "undecidable"

    @classmethod
    def of(cls, flag: bool | None) -> "Trilean":
        if flag is None:
            return cls.UNDECIDABLE
        return cls.YES if flag else cls.NO

    def __bool__(self) -> bool:  # pragma: no cover - guard against misuse
        raise TypeError("Trilean has no truth value; compare with Trilean.YES")


@dataclass(frozen=True)
class Verdict:
    """A three-valued decision with the numbers that support it."""

    value: Trilean
    evidence: dict = field(default_factory=dict)

    @property
    def decided(self) -> bool:
        return self.value is not Trilean.UNDECIDABLE

    def to_dict(self) -> dict:
        return {"value": self.value.value, "evidence": _jsonable(self.evidence)}


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and truncation policy for every improper integral.

    Parameters
    ----------
    abs_tol, rel_tol : float
        Absolute and relative tolerances handed to the adaptive rule.
    limit : int
        Maximum number of subintervals per adaptive call.
    band : float
        Half-width of the indeterminate band around a critical exponent.
    z_min, z_max : float
        Smallest and largest abscissae probed by asymptotic analysis.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    limit: int = 500
    band: float = 0.02
    z_min: float = 1e-12
    z_max: float = 1e12

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise DomainError("quadrature tolerances must be non-negative")
        if not 0 < self.band < 1:
            raise DomainError(f"band must lie in (0, 1), got {self.band}")
        if not 0 < self.z_min < 1 < self.z_max:
            raise DomainError("need 0 < z_min < 1 < z_max")


DEFAULT_QUAD = QuadratureConfig()


def quad(f: Callable[[float], float], a: float, b: float, cfg: QuadratureConfig = DEFAULT_QUAD,
         points=None) -> float:
    """Adaptive quadrature of ``f`` over ``[a, b]`` (``b`` may be ``inf``).

    An infinite range is covered by decade blocks until they stop
    contributing; whatever is left beyond 40 decades is mapped onto
    ``(0, 1]`` by ``u = A / t``, which suits power-law tails.
    """
    if a == b:
        return 0.0
    if math.isinf(b) and b > 0:
        return _quad_to_inf(f, a, cfg, points)
    kw = dict(epsabs=cfg.abs_tol, epsrel=cfg.rel_tol, limit=cfg.limit)
    if points is not None and np.isfinite(b):
        pts = [p for p in points if a < p < b]
        if pts:
            kw["points"] = pts
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, a, b, **kw)
    if not math.isfinite(val):
        raise NumericOverflowError(f"quadrature over [{a}, {b}] returned {val}")
    return float(val)


def _quad_to_inf(f, a, cfg, points):
    total = 0.0
    lo = a
    if a <= 0:
        total = quad(f, a, 1.0, cfg, points)
        lo = 1.0
    quiet = 0
    for _ in range(40):
        hi = lo * 10.0
        piece = quad(f, lo, hi, cfg, points)
        total += piece
        lo = hi
        quiet = quiet + 1 if abs(piece) <= 1e-3 * cfg.rel_tol * abs(total) else 0
        if quiet >= 2:
            return total
    A = lo
    return total + quad(lambda t: f(A / t) * A / (t * t) if t > 0 else 0.0, 0.0, 1.0, cfg)


@lru_cache(maxsize=8)
def gauss_legendre(n: int = 20) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gl_segments(f: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray,
                n: int = 20) -> np.ndarray:
    """Integrate a vectorised ``f`` over many segments ``[lo_i, hi_i]`` at once."""
    x, w = gauss_legendre(n)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = mid[..., None] + half[..., None] * x
    vals = f(nodes.ravel()).reshape(nodes.shape)
    return half * (vals @ w)


def geometric_grid(lo: float, hi: float, per_decade: int = 20) -> np.ndarray:
    n = max(2, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    return np.geomspace(lo, hi, n)


def cumulative_on_grid(f: Callable[[np.ndarray], np.ndarray], grid: np.ndarray,
                       n: int = 20) -> np.ndarray:
    """Cumulative integral of ``f`` from ``grid[0]`` evaluated at every grid node."""
    pieces = gl_segments(f, grid[:-1], grid[1:], n)
    return np.concatenate([[0.0], np.cumsum(pieces)])


def classify_exponent(p: float, critical: float, band: float) -> bool | None:
    """Return True if ``p`` is above ``critical``, False if below, None inside the band."""
    if not math.isfinite(p):
        return p > 0
    if abs(p - critical) <= band:
        return None
    return p > critical


def truncation_sums(f: Callable[[float], float], a: float, points, cfg: QuadratureConfig = DEFAULT_QUAD):
    """Partial integrals of ``f`` over ``[a, t]`` for growing ``t`` (or shrinking, if ``t < a``)."""
    out = []
    acc = 0.0
    prev = a
    for t in points:
        lo, hi = (prev, t) if t > prev else (t, prev)
        piece = quad(f, lo, hi, cfg)
        acc += piece
        out.append((float(t), acc))
        prev = t
    return out


def settle_or_raise(partial, rel: float, what: str) -> float:
    """Return the last partial sum if the sequence has settled, else raise."""
    if len(partial) < 2:
        return partial[-1][1]
    last, before = partial[-1][1], partial[-2][1]
    if abs(last - before) <= rel * max(abs(last), 1e-300):
        return last
    raise TruncationError(f"{what}: partial sums did not settle", partial)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


jsonable = _jsonable
