"""Iterated-logarithm profiles of the integrated Lévy tail near zero.

With ``l1(z) = |ln z|`` and ``lk = ln(l(k-1))``, the profiles are

    I1(z) = l1(z) * int_0^z mubar(w) dw,
    Ik(z) = lk(z) * (I(k-1)(z) - sigma^2 / 2).

When ``2 delta = sigma^2`` the limit points of these profiles as
``z -> 0`` separate positive recurrence (some level strictly above
``sigma^2/2`` after levels pinned at it) from null recurrence (strictly
below).  Limits cannot be certified numerically, so the outcome is
read off the smallest grid decade with a relative tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .mechanisms import ModelSpec

DEFAULT_PROFILE_GRID = tuple(np.geomspace(1e-8, 1e-200, 193 * 4 + 1))


@dataclass(frozen=True)
class IteratedLogProfile:
    """Samples of ``I^(k)`` on a grid decreasing towards zero.

    Attributes
    ----------
    k : int
        Depth of the profile.
    samples : tuple of (float, float)
        ``(z, I^(k)(z))`` pairs with ``z`` strictly decreasing.
    adh_estimate : tuple of float
        ``(min, max)`` of the profile over the smallest grid decade, a proxy
        for the set of limit points as ``z -> 0``.
    """

    k: int
    samples: tuple
    adh_estimate: tuple

    def __post_init__(self):
        z = np.array([s[0] for s in self.samples])
        v = np.array([s[1] for s in self.samples])
        if self.k < 1:
            raise ValueError("profile depth must be positive")
        if z.size and np.any(np.diff(z) >= 0):
            raise ValueError("profile grid must be strictly decreasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "adh_estimate": list(self.adh_estimate),
            "samples": [list(s) for s in self.samples[:: max(1, len(self.samples) // 20)]],
        }


def _iterated_logs(z: np.ndarray, k: int) -> list[np.ndarray]:
    logs = [np.abs(np.log(z))]
    for j in range(2, k + 1):
        prev = logs[-1]
        bad = prev <= 0
        if np.any(bad):
            raise DomainError(
                f"l^({j - 1}) is not positive at z={float(z[bad][0]):.3e}; choose smaller z"
            )
        logs.append(np.log(prev))
    return logs


def iterated_log_profile(model: ModelSpec, k: int, grid=DEFAULT_PROFILE_GRID) -> IteratedLogProfile:
    """Compute ``I^(k)`` on ``grid`` (small positive abscissae)."""
    if k < 1 or int(k) != k:
        raise DomainError("depth k must be a positive integer")
    z = np.sort(np.asarray(grid, dtype=float))[::-1]
    if z.size < 2 or np.any(z <= 0) or np.any(z >= 1):
        raise DomainError("profile grid must hold at least two values in (0, 1)")
    if np.any(np.diff(z) == 0):
        raise DomainError("profile grid values must be distinct")
    logs = _iterated_logs(z, k)
    half = 0.5 * model.sigma2
    prof = logs[0] * np.asarray(model.mechanism.levy.integrated_tail(z), dtype=float)
    for j in range(2, k + 1):
        prof = logs[j - 1] * (prof - half)
    if not np.all(np.isfinite(prof)):
        raise DomainError("integrated tail is infinite near zero; the profile is undefined")
    last = z <= z[-1] * 10.0
    adh = (float(prof[last].min()), float(prof[last].max()))
    return IteratedLogProfile(k=int(k), samples=tuple(zip(z.tolist(), prof.tolist())), adh_estimate=adh)


@dataclass(frozen=True)
class CriticalOutcome:
    """Which of the two exclusive iterated-log conditions the profiles support.

    ``kind`` is ``"upper"`` when a level sits strictly above ``sigma^2/2``
    (positive recurrence), ``"lower"`` when strictly below (null
    recurrence) and ``None`` when no level up to the chosen depth decides.
    """

    kind: str | None
    level: int | None
    profiles: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "level": self.level,
            "profiles": [p.to_dict() for p in self.profiles],
        }


def critical_outcome(model: ModelSpec, max_depth: int = 4, grid=DEFAULT_PROFILE_GRID,
                     rel_tol: float = 0.02) -> CriticalOutcome:
    """Walk the profile levels until one leaves the band around ``sigma^2/2``."""
    half = 0.5 * model.sigma2
    tol = rel_tol * half
    profiles = []
    for k in range(1, max_depth + 1):
        prof = iterated_log_profile(model, k, grid)
        profiles.append(prof)
        lo, hi = prof.adh_estimate
        if hi < half - tol:
            return CriticalOutcome("lower", k, tuple(profiles))
        if lo > half + tol:
            return CriticalOutcome("upper", k, tuple(profiles))
        if not (abs(lo - half) <= tol and abs(hi - half) <= tol):
            break
        if not math.isfinite(lo):
            break
    return CriticalOutcome(None, None, tuple(profiles))
