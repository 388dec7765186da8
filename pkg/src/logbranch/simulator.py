"""Monte Carlo engine: Euler schemes for the population and for its Lamperti clock.

Three schemes are available.

``direct``
    Euler-Maruyama for ``dZ = (b Z - c Z^2) dt + sqrt(2 gamma^2 Z) dB + sigma Z dW + jumps``,
    jumps of size ``u >= jump_eps`` arriving at rate ``Z mubar(jump_eps)``.
``lamperti``
    Euler for the time-changed process
    ``dR = (b - c R) ds + sqrt(2 gamma^2) dB + sigma sqrt(R) dW + jumps`` (jumps at rate
    ``mubar(jump_eps)``) together with the clock ``eta = int ds / R``.  ``T_0`` of the
    population is the clock value when ``R`` is absorbed, and ``int_0^{T_a} Z dt`` is
    the ``R``-time elapsed.
``diffusion1d``
    Euler for the one-dimensional diffusion ``dZ = (b Z - g(Z)) dt + sqrt(2 gamma^2 Z + sigma^2 Z^2) dW``
    of a :class:`~logbranch.diffusion.DiffusionModel`.

In every scheme the jumps below ``jump_eps`` are replaced by their
compensator (a drift) plus a Gaussian term with the same variance.
The direct and diffusion steps shrink where the competition term is fast
(large ``Z``).  Passage below a level is detected at the grid points (optionally also
between them with the Brownian-bridge crossing probability).

Paths are simulated in blocks; block ``k`` draws from
``SeedSequence([seed, k])`` so that results do not depend on how blocks
are scheduled across worker threads.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DomainError, UnreliableEstimateError
from .mechanisms import ModelSpec
from .quadrature import QuadratureConfig, quad

__all__ = [
    "Scheme",
    "SimConfig",
    "SimulationResult",
    "HittingTimeEstimate",
    "MeanEstimate",
    "simulate",
    "simulate_direct",
    "simulate_lamperti",
    "simulate_cbi",
    "estimate_hitting",
    "estimate_laplace",
    "estimate_total_pop",
    "estimate_cbi_laplace",
    "ks_two_sample",
    "ks_critical",
]


class Scheme(str, enum.Enum):
    DIRECT = "direct"
    LAMPERTI = "lamperti"
    DIFFUSION1D = "diffusion1d"


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    Parameters
    ----------
    dt : float
        Time step (population time; for the Lamperti scheme ``ds = dt min(R, 1)``).
    drift_move : float or None
        The direct and diffusion schemes shorten the step wherever the
        competition term would move ``Z`` by more than this relative amount
        (``None`` means ``dt``).
    n_paths : int
    t_max : float
        Censoring horizon in population time.
    extinction_eps : float or None
        Absorption threshold; ``None`` means ``1e-6 x0``.
    jump_eps : float
        Jumps below this size are replaced by drift plus Gaussian noise.
    seed : int
    scheme : Scheme
    workers : int
        Threads used to run blocks of paths.
    block_size : int
    overflow : float
        Paths above this value are marked as exploded.
    bridge : bool or None
        Apply the Brownian-bridge crossing correction between grid points.
        ``None`` switches it on for interior levels ``a > 0`` and off for
        absorption at zero, where the variance vanishes and the
        frozen-variance bridge flags crossings the true process cannot make.
    """

    dt: float = 1e-3
    n_paths: int = 10_000
    t_max: float = 50.0
    extinction_eps: float | None = None
    jump_eps: float = 1e-3
    seed: int = 0
    scheme: Scheme = Scheme.DIRECT
    workers: int = 1
    block_size: int = 8192
    overflow: float = 1e12
    bridge: bool | None = None
    drift_move: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ValueError("n_paths must be a positive integer")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.drift_move is not None and not 0 < self.drift_move <= 1:
            raise ValueError("drift_move must lie in (0, 1]")
        if self.extinction_eps is not None and not self.extinction_eps > 0:
            raise ValueError("extinction_eps must be positive")
        if not self.jump_eps > 0:
            raise ValueError("jump_eps must be positive")
        if self.workers < 1 or self.block_size < 1:
            raise ValueError("workers and block_size must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def eps_for(self, x0: float) -> float:
        return self.extinction_eps if self.extinction_eps is not None else 1e-6 * x0


@dataclass(frozen=True)
class SimulationResult:
    """Per-path functionals of one ensemble.

    ``hit_time`` is ``inf`` for paths that did not reach the level before
    ``t_max`` (censored) or exploded; ``integral`` is ``int_0^{T} Z dt`` up
    to the same time.
    """

    hit_time: np.ndarray
    integral: np.ndarray
    censored: np.ndarray
    exploded: np.ndarray
    level: float
    scheme: Scheme

    @property
    def n(self) -> int:
        return int(self.hit_time.size)

    @property
    def censored_fraction(self) -> float:
        return float(np.mean(self.censored | self.exploded)) if self.n else 0.0


@dataclass(frozen=True)
class HittingTimeEstimate:
    """Sample mean of a hitting time over paths that reached the level."""

    mean: float
    stderr: float
    censored_fraction: float
    n_effective: int

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be non-negative")
        if not 0 <= self.censored_fraction <= 1:
            raise ValueError("censored_fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {"estimate": self.mean, "stderr": self.stderr, "n": self.n_effective,
                "censored_fraction": self.censored_fraction}


@dataclass(frozen=True)
class MeanEstimate:
    """Sample mean of a bounded functional; censored paths contribute 0."""

    value: float
    stderr: float
    censored_fraction: float
    n: int

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be non-negative")

    def to_dict(self) -> dict:
        return {"estimate": self.value, "stderr": self.stderr, "n": self.n, "censored_fraction": self.censored_fraction}


# ---------------------------------------------------------------------------
# dynamics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Jumps:
    rate: float  # mubar(jump_eps)
    compensator: float  # int_[eps,1) u mu(du)
    small_var: float  # int_(0,eps) u^2 mu(du)
    levy: object = field(repr=False, default=None)

    def sample(self, rng, counts: np.ndarray) -> np.ndarray:
        """Sum of ``counts[i]`` jump sizes for each entry."""
        total = int(counts.sum())
        out = np.zeros(counts.shape)
        if total == 0:
            return out
        u = rng.random(total)
        sizes = np.asarray(self.levy.inverse_tail(self.rate * (1.0 - u)), dtype=float)
        owners = np.repeat(np.arange(counts.size), counts)
        np.add.at(out, owners, sizes)
        return out


def _jumps_for(levy, eps: float) -> _Jumps | None:
    if levy.family == "none":
        return None
    rate = float(levy.tail(eps))
    comp = levy.moment_between(eps, 1.0) if eps < 1.0 else -levy.moment_between(1.0, eps)
    # int_0^eps u^2 mu(du) = -eps^2 mubar(eps) + 2 int_0^eps u mubar(u) du
    half = quad(lambda u: u * levy.tail1(u), 0.0, eps, QuadratureConfig(abs_tol=1e-14, rel_tol=1e-10))
    var = max(0.0, 2.0 * half - eps * eps * rate)
    return _Jumps(rate=rate, compensator=float(comp), small_var=var, levy=levy)


@dataclass(frozen=True)
class _Dynamics:
    b: float
    gamma2: float
    sigma2: float
    c: float
    g: object  # callable interaction or None for c z^2
    jumps: _Jumps | None


def _dynamics(model, cfg: SimConfig) -> _Dynamics:
    from .diffusion import DiffusionModel

    if isinstance(model, DiffusionModel):
        if cfg.scheme is not Scheme.DIFFUSION1D:
            raise DomainError("a diffusion model needs the diffusion1d scheme")
        return _Dynamics(model.b, model.gamma2, model.sigma2, 0.0, model.g, None)
    if not isinstance(model, ModelSpec):
        raise DomainError("model must be a ModelSpec or a DiffusionModel")
    if cfg.scheme is Scheme.DIFFUSION1D and model.mechanism.levy.family != "none":
        raise DomainError("the diffusion1d scheme has no jumps")
    mech = model.mechanism
    return _Dynamics(mech.b, mech.gamma2, model.sigma2, model.c, None, _jumps_for(mech.levy, cfg.jump_eps))


def _bridge_hit(rng, z0, z1, level, var_dt):
    """Brownian-bridge probability of dipping below ``level`` between two grid values above it."""
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        p = np.exp(-2.0 * (z0 - level) * (z1 - level) / var_dt)
    p = np.where(var_dt > 0, p, 0.0)
    return rng.random(z0.size) < p


def _run_block(dyn: _Dynamics, x0: float, level: float, cfg: SimConfig, n: int, block: int):
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), int(block)]))
    hit = np.full(n, np.inf)
    integral = np.zeros(n)
    censored = np.zeros(n, dtype=bool)
    exploded = np.zeros(n, dtype=bool)
    if x0 <= level:
        hit[:] = 0.0
        return hit, integral, censored, exploded
    ids = np.arange(n)
    z = np.full(n, float(x0))
    t = np.zeros(n)  # population time
    acc = np.zeros(n)  # int Z dt so far
    lamperti = cfg.scheme is Scheme.LAMPERTI
    bridge = cfg.bridge if cfg.bridge is not None else level > cfg.eps_for(x0)
    dt = cfg.dt
    move = cfg.drift_move if cfg.drift_move is not None else min(dt, 1.0)
    jumps = dyn.jumps
    steps = 0
    max_steps = int(math.ceil(cfg.t_max / dt)) * 64 + 10
    while ids.size and steps < max_steps:
        steps += 1
        m = ids.size
        if lamperti:
            ds = dt * np.minimum(z, 1.0)
            sq = np.sqrt(ds)
            drift = dyn.b - dyn.c * z
            var = 2.0 * dyn.gamma2 + dyn.sigma2 * np.maximum(z, 0.0)
            scale = ds
            jump_intensity = ds
        else:
            zp = np.maximum(z, 0.0)
            comp = dyn.c * z * z if dyn.g is None else dyn.g(z)
            # where competition is fast, shrink the step so it moves z by at most drift_move per step
            with np.errstate(divide="ignore", invalid="ignore"):
                rate = np.where(zp > 0, np.abs(comp) / zp, 0.0)
            ds = dt / np.maximum(1.0, rate * dt / move)
            sq = np.sqrt(ds)
            drift = dyn.b * z - comp
            var = 2.0 * dyn.gamma2 * zp + dyn.sigma2 * zp * zp
            scale = ds * zp
            jump_intensity = ds * zp
        if jumps is not None:
            drift = drift - jumps.compensator * (1.0 if lamperti else np.maximum(z, 0.0))
            var = var + jumps.small_var * (1.0 if lamperti else np.maximum(z, 0.0))
        dz = drift * ds + np.sqrt(var) * sq * rng.standard_normal(m)
        if jumps is not None:
            counts = rng.poisson(jumps.rate * jump_intensity)
            if counts.any():
                dz = dz + jumps.sample(rng, counts)
        z1 = z + dz
        # population-time increment and population integral over this step
        dtau = ds / np.maximum(z, 1e-300) if lamperti else ds
        crossed = z1 <= level
        if bridge:
            crossed |= _bridge_hit(rng, z, z1, level, var * ds)
        if crossed.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                frac = np.where(z1 < level, (z - level) / (z - z1), 0.5)
            frac = np.clip(frac, 0.0, 1.0)
            cidx = ids[crossed]
            f = frac[crossed]
            hit[cidx] = t[crossed] + f * dtau[crossed]
            integral[cidx] = acc[crossed] + (scale[crossed] if lamperti else 0.5 * (z[crossed] + level) * ds[crossed]) * f
        t = t + dtau
        acc = acc + (ds if lamperti else 0.5 * (z + np.maximum(z1, 0.0)) * ds)
        boom = z1 > cfg.overflow
        late = t >= cfg.t_max
        done = crossed | boom | late
        if boom.any():
            exploded[ids[boom & ~crossed]] = True
        if late.any():
            censored[ids[late & ~crossed & ~boom]] = True
        keep = ~done
        ids, z, t, acc = ids[keep], z1[keep], t[keep], acc[keep]
    if ids.size:
        censored[ids] = True
    return hit, integral, censored, exploded


def simulate(model, x0: float, cfg: SimConfig = SimConfig(), a: float = 0.0) -> SimulationResult:
    """Simulate ``cfg.n_paths`` paths from ``x0`` until they pass below ``max(a, eps)``."""
    if not x0 > 0 or not math.isfinite(x0):
        raise DomainError("x0 must be positive and finite")
    if a < 0 or a > x0:
        raise DomainError("need 0 <= a <= x0")
    dyn = _dynamics(model, cfg)
    level = max(a, cfg.eps_for(x0))
    sizes = [min(cfg.block_size, cfg.n_paths - k) for k in range(0, cfg.n_paths, cfg.block_size)]

    def work(k):
        return _run_block(dyn, x0, level, cfg, sizes[k], k)

    if cfg.workers == 1 or len(sizes) == 1:
        parts = [work(k) for k in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    cat = [np.concatenate([p[i] for p in parts]) for i in range(4)]
    return SimulationResult(hit_time=cat[0], integral=cat[1], censored=cat[2], exploded=cat[3], level=level,
                            scheme=cfg.scheme)


def _with_scheme(cfg: SimConfig, scheme: Scheme) -> SimConfig:
    from dataclasses import replace

    return replace(cfg, scheme=scheme)


def simulate_direct(model, x0: float, cfg: SimConfig = SimConfig(), a: float = 0.0) -> SimulationResult:
    """Euler scheme for the population itself."""
    return simulate(model, x0, _with_scheme(cfg, Scheme.DIRECT), a)


def simulate_lamperti(model, x0: float, cfg: SimConfig = SimConfig(), a: float = 0.0) -> SimulationResult:
    """Euler scheme for the time-changed process with the clock ``eta = int ds / R``."""
    return simulate(model, x0, _with_scheme(cfg, Scheme.LAMPERTI), a)


def simulate_cbi(model: ModelSpec, x0: float, t: float, cfg: SimConfig = SimConfig()) -> np.ndarray:
    """Samples of ``R_t`` for the time-changed process run on a fixed grid (no absorption)."""
    if t < 0 or x0 < 0:
        raise DomainError("need t >= 0 and x0 >= 0")
    dyn = _dynamics(model, _with_scheme(cfg, Scheme.LAMPERTI))
    steps = max(1, int(math.ceil(t / cfg.dt)))
    ds = t / steps
    out = []
    for k, start in enumerate(range(0, cfg.n_paths, cfg.block_size)):
        n = min(cfg.block_size, cfg.n_paths - start)
        rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), int(k)]))
        r = np.full(n, float(x0))
        for _ in range(steps):
            rp = np.maximum(r, 0.0)
            drift = dyn.b - dyn.c * rp
            var = 2.0 * dyn.gamma2 + dyn.sigma2 * rp
            if dyn.jumps is not None:
                drift = drift - dyn.jumps.compensator
                var = var + dyn.jumps.small_var
            r = r + drift * ds + np.sqrt(var * ds) * rng.standard_normal(n)
            if dyn.jumps is not None:
                counts = rng.poisson(dyn.jumps.rate * ds, n)
                if counts.any():
                    r = r + dyn.jumps.sample(rng, counts)
            # full truncation keeps the square root well defined
            r = np.maximum(r, 0.0)
        out.append(r)
    return np.concatenate(out) if out else np.empty(0)


def _check_censoring(frac: float) -> None:
    if frac > 0.5:
        raise UnreliableEstimateError(f"{frac:.1%} of paths were censored; increase t_max")


def estimate_hitting(model, x0: float, a: float, cfg: SimConfig = SimConfig()) -> HittingTimeEstimate:
    """Mean and standard error of ``T_a`` (censored paths excluded and reported)."""
    if a > x0:
        raise DomainError("need a <= x0")
    if a == x0:
        return HittingTimeEstimate(0.0, 0.0, 0.0, cfg.n_paths)
    res = simulate(model, x0, cfg, a)
    frac = res.censored_fraction
    _check_censoring(frac)
    ok = np.isfinite(res.hit_time)
    h = res.hit_time[ok]
    se = float(h.std(ddof=1) / math.sqrt(h.size)) if h.size > 1 else math.inf
    return HittingTimeEstimate(float(h.mean()), se, frac, int(h.size))


def _mean_estimate(values: np.ndarray, frac: float) -> MeanEstimate:
    n = values.size
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return MeanEstimate(float(values.mean()), se, frac, int(n))


def estimate_laplace(model, x0: float, a: float, lam: float, cfg: SimConfig = SimConfig()) -> MeanEstimate:
    """``E_x0[exp(-lam T_a)]``; censored paths count as 0 (bias at most ``exp(-lam t_max)``)."""
    if lam < 0:
        raise DomainError("lam must be non-negative")
    if a == x0:
        return MeanEstimate(1.0, 0.0, 0.0, cfg.n_paths)
    res = simulate(model, x0, cfg, a)
    _check_censoring(res.censored_fraction)
    return _mean_estimate(np.exp(-lam * res.hit_time), res.censored_fraction)


def estimate_total_pop(model, x0: float, a: float, lam: float, cfg: SimConfig = SimConfig()) -> MeanEstimate:
    """``E_x0[exp(-lam int_0^{T_a} Z dt)]``; censored paths count as 0."""
    if lam < 0:
        raise DomainError("lam must be non-negative")
    if a == x0:
        return MeanEstimate(1.0, 0.0, 0.0, cfg.n_paths)
    res = simulate(model, x0, cfg, a)
    _check_censoring(res.censored_fraction)
    vals = np.where(np.isfinite(res.hit_time), np.exp(-lam * res.integral), 0.0)
    return _mean_estimate(vals, res.censored_fraction)


def estimate_cbi_laplace(model: ModelSpec, x0: float, t: float, lam: float, cfg: SimConfig = SimConfig()) -> MeanEstimate:
    """``E_x0[exp(-lam R_t)]`` from :func:`simulate_cbi`."""
    r = simulate_cbi(model, x0, t, cfg)
    return _mean_estimate(np.exp(-lam * r), 0.0)


def ks_critical(n: int, m: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample Kolmogorov-Smirnov critical value."""
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    return c * math.sqrt((n + m) / (n * m))


def ks_two_sample(x, y, alpha: float = 0.01) -> dict:
    """Two-sample KS statistic, p-value and critical value at level ``alpha``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    res = stats.ks_2samp(x, y)
    crit = ks_critical(x.size, y.size, alpha)
    return {"statistic": float(res.statistic), "pvalue": float(res.pvalue), "critical": crit,
            "passed": bool(res.statistic < crit)}
