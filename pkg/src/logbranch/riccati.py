"""Riccati boundary-value problems vanishing at the right end.

Both hitting-time routes reduce to a Riccati equation in a pre-image
variable ``v`` in ``(0, inf)``,

    q'(v) = q^2 + A(v) q - lam B(v),    q(v) -> 0 as v -> inf,

where ``(A, B) = (psi/omega, 1/omega)`` for the general branching route
and ``(A, B) = ((g(x) - b x)/d(x), 1/d(x))`` for the diffusion route.
The published forms ``y' = y^2 - lam r^2`` on the time-scale axis ``z``
are recovered through ``z = I(v), y = q e^{-m(v)}`` (respectively
``z = S(x), y = q / s(x)``), and ``int_0^z y = int_0^v q``.

The equation is integrated for ``u = ln q`` against ``s = ln v`` from a
far point ``V`` down to ``v_min``.  Going backward is the stable
direction: perturbations decay like ``exp(-int (2q + A) dv)``.  The start
value is the quasi-static root ``q_qs = (-A + sqrt(A^2 + 4 lam B)) / 2``
shrunk by ``1 - eps_shoot``.  The stretch beyond ``V`` is closed with
``int q_qs`` and the stretch below ``v_min`` with the logarithmic
asymptote ``q ~ (lam/kappa) |ln v|`` where ``B ~ 1/(kappa v)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .analytic import MFunction, TimeScale, r_coeff
from .errors import DomainError, NonIntegrableError, SolverFailureError
from .mechanisms import General, ModelSpec, check_log_moment, classify, omega, psi
from .quadrature import DEFAULT_QUAD, QuadratureConfig, quad

__all__ = ["RiccatiConfig", "RiccatiSolution", "solve_backward", "solve_y", "solve_ybar", "r_coeff"]


@dataclass(frozen=True)
class RiccatiConfig:
    """Controls of the backward sweep.

    Parameters
    ----------
    eps_shoot : float
        Relative shrink of the start value below the quasi-static root.
    tail_eps : float
        The far point ``V`` is the first doubling with
        ``V q_qs(V) < tail_eps min(1, lam)`` and ``V A(V) > 50``.
    v_min : float
        Smallest pre-image abscissa reached by the sweep.
    rtol, atol : float
        Tolerances of the implicit Runge-Kutta integrator.
    v_far : float or None
        Force the far point instead of searching for it.
    per_decade : int
        Density of the reported grid.
    """

    eps_shoot: float = 1e-3
    tail_eps: float = 1e-8
    v_min: float = 1e-12
    rtol: float = 1e-11
    atol: float = 1e-13
    v_far: float | None = None
    per_decade: int = 20

    def __post_init__(self):
        if not 0 <= self.eps_shoot < 1:
            raise ValueError("eps_shoot must lie in [0, 1)")
        if not (self.tail_eps > 0 and self.v_min > 0 and self.rtol > 0 and self.atol > 0):
            raise ValueError("tail_eps, v_min, rtol and atol must be positive")
        if self.v_far is not None and self.v_far <= 1:
            raise ValueError("v_far must exceed 1")


DEFAULT_RICCATI = RiccatiConfig()


def _quasi_static(A, lamB):
    A = np.asarray(A, dtype=float)
    disc = np.sqrt(A * A + 4.0 * lamB)
    # both forms equal the positive root; pick the one free of cancellation
    return np.where(A > 0, 2.0 * lamB / (A + disc), 0.5 * (disc - A))


@dataclass(frozen=True)
class BackwardSolution:
    """Solution of the pre-image Riccati equation.

    ``q`` and ``w`` are callables; ``w(v) = int_0^v q``.  ``total`` is
    ``int_0^inf q``.
    """

    lam: float
    v_min: float
    v_far: float
    head: float
    tail: float
    total: float
    kappa: float
    dense: Callable = field(repr=False)
    A: Callable = field(repr=False)
    B: Callable = field(repr=False)
    w_at_min: float = 0.0
    far_beta: float | None = None

    def q(self, v):
        v = np.asarray(v, dtype=float)
        return self._eval(v, 0, default=lambda vv: self._outside_q(vv))

    def w(self, v):
        v = np.asarray(v, dtype=float)
        out = np.empty(np.shape(v))
        flat = np.atleast_1d(v)
        res = np.empty(flat.shape)
        inside = (flat >= self.v_min) & (flat <= self.v_far)
        if np.any(inside):
            W = self.dense(np.log(flat[inside]))[1]
            res[inside] = self.head + self.w_at_min - W
        low = flat < self.v_min
        if np.any(low):
            vv = flat[low]
            q0 = math.exp(float(self.dense(math.log(self.v_min))[0]))
            # int_0^v (q0 + (lam/kappa) ln(v_min/x)) dx
            with np.errstate(divide="ignore", invalid="ignore"):
                res[low] = np.where(vv > 0, vv * q0 + self.lam / self.kappa * vv * (1.0 + np.log(self.v_min / vv)), 0.0)
        high = flat > self.v_far
        if np.any(high) and self.far_beta is not None:
            w_far = self.head + self.w_at_min - float(self.dense(math.log(self.v_far))[1])
            res[high] = w_far + self.far_beta * np.log(flat[high] / self.v_far)
        elif np.any(high):
            for i in np.nonzero(high)[0]:
                res[i] = self.total - self._tail_from(float(flat[i]))
        out = res.reshape(np.shape(v))
        return float(out) if np.ndim(v) == 0 else out

    def _tail_from(self, v0: float) -> float:
        return quad(lambda x: float(_quasi_static(self.A(x), self.lam * self.B(x))), v0, math.inf,
                    QuadratureConfig(abs_tol=0.0, rel_tol=1e-10))

    def _outside_q(self, vv):
        res = np.empty(vv.shape)
        low = vv < self.v_min
        q0 = math.exp(float(self.dense(math.log(self.v_min))[0]))
        res[low] = q0 + self.lam / self.kappa * np.log(self.v_min / vv[low])
        hi = ~low
        if self.far_beta is not None:
            res[hi] = self.far_beta / vv[hi]
        else:
            res[hi] = _quasi_static(self.A(vv[hi]), self.lam * self.B(vv[hi]))
        return res

    def _eval(self, v, idx, default):
        flat = np.atleast_1d(v)
        res = np.empty(flat.shape)
        inside = (flat >= self.v_min) & (flat <= self.v_far)
        if np.any(inside):
            res[inside] = np.exp(self.dense(np.log(flat[inside]))[idx])
        if np.any(~inside):
            res[~inside] = default(flat[~inside])
        return float(res[0]) if np.ndim(v) == 0 else res.reshape(v.shape)

    def residual(self, v) -> np.ndarray:
        """Relative residual of ``q' = q^2 + A q - lam B`` from a five-point stencil in ``ln v``."""
        s = np.log(np.asarray(v, dtype=float))
        h = 1e-3
        u = [self.dense(s + k * h)[0] for k in (-2, -1, 1, 2)]
        du = (u[0] - 8 * u[1] + 8 * u[2] - u[3]) / (12 * h)
        vv = np.exp(s)
        q = np.exp(self.dense(s)[0])
        A = self.A(vv)
        lamB = self.lam * self.B(vv)
        rhs = vv * (q + A - lamB / q)
        scale = vv * (q + np.abs(A) + lamB / q)
        return np.abs(du - rhs) / scale


def _power_root(alpha: float, ell: float) -> float:
    """Positive ``beta`` with ``q = beta / v`` solving the equation when ``v A -> alpha, lam v^2 B -> ell``."""
    return 0.5 * (-(alpha + 1.0) + math.sqrt((alpha + 1.0) ** 2 + 4.0 * ell))


def _power_regime(A: Callable, B: Callable, lam: float):
    """``beta`` when the far field is scale invariant (``v A`` and ``v^2 B`` settle), else ``None``."""
    probes = (1e8, 1e10, 1e12)
    alpha = [v * float(A(v)) for v in probes]
    ell = [lam * v * v * float(B(v)) for v in probes]
    if not all(map(math.isfinite, alpha + ell)):
        return None
    settled = abs(alpha[2] - alpha[1]) <= 1e-2 * (1.0 + abs(alpha[2])) and \
        abs(ell[2] - ell[1]) <= 1e-2 * (1.0 + abs(ell[2]))
    if settled and alpha[2] < 50.0:
        return _power_root(alpha[2], ell[2])
    return None


def solve_backward(A: Callable, B: Callable, lam: float, cfg: RiccatiConfig = DEFAULT_RICCATI) -> BackwardSolution:
    """Solve ``q' = q^2 + A q - lam B`` with ``q(inf) = 0`` (vectorised ``A``, ``B``)."""
    if not lam > 0:
        raise DomainError("lam must be positive")
    qs = lambda v: float(_quasi_static(A(v), lam * B(v)))  # noqa: E731
    beta = _power_regime(A, B, lam)
    if beta is not None:
        V = float(cfg.v_far) if cfg.v_far is not None else 1e10
    elif cfg.v_far is not None:
        V = float(cfg.v_far)
    else:
        V = 2.0
        for _ in range(400):
            # negligible tail relative to the scale of q, and deep in the damped regime
            damp = V * A(V)
            tail_size = V * qs(V)
            target = cfg.tail_eps * min(1.0, lam)
            if tail_size < target and damp > 50.0:
                break
            # very stiff regime: the quasi-static root is already exact to O(1/damp)
            if damp > 1e6 and tail_size / damp < 1e-2 * target:
                break
            V *= 2.0
        else:
            raise SolverFailureError("no far point found where the quasi-static root is negligible")
    v_min = cfg.v_min
    if V <= v_min:
        raise DomainError("far point must exceed v_min")

    def rhs(s, y):
        v = math.exp(s)
        q = math.exp(y[0])
        a = float(A(v))
        lb = lam * float(B(v))
        return [v * (q + a - lb / q), -v * q]

    def jac(s, y):
        v = math.exp(s)
        q = math.exp(y[0])
        lb = lam * float(B(v))
        return [[v * (q + lb / q), 0.0], [-v * q, 0.0]]

    if beta is not None:
        beta = _power_root(V * float(A(V)), lam * V * V * float(B(V)))
        q_start = beta / V * (1.0 - cfg.eps_shoot)
    else:
        q_start = qs(V) * (1.0 - cfg.eps_shoot)
    if not q_start > 0:
        raise SolverFailureError("quasi-static start value is not positive")
    sol = integrate.solve_ivp(rhs, (math.log(V), math.log(v_min)), [math.log(q_start), 0.0],
                              method="Radau", jac=jac, rtol=cfg.rtol, atol=cfg.atol, dense_output=True)
    if not sol.success:
        raise SolverFailureError(f"backward sweep failed: {sol.message}")
    u_path = sol.y[0]
    if not np.all(np.isfinite(sol.y)):
        raise SolverFailureError("backward sweep produced non-finite values")
    v_path = np.exp(sol.t)
    cap = 2.0 * (np.sqrt(lam * B(v_path)) + np.maximum(-A(v_path), 0.0)) + lam * np.abs(np.log(v_path)) / max(
        1e-300, 1.0 / (v_min * float(B(v_min))))
    if np.any(np.exp(u_path) > cap * 10 + 1.0):
        raise SolverFailureError("solution escaped above the admissible envelope; enlarge the far point")
    W_min = float(sol.y[1, -1])
    q0 = math.exp(float(u_path[-1]))
    kappa = 1.0 / (v_min * float(B(v_min)))
    head = v_min * q0 + lam / kappa * v_min
    if beta is not None:
        # q ~ beta / v is not integrable at infinity
        tail = math.inf
    else:
        tail = quad(lambda x: float(_quasi_static(A(x), lam * B(x))), V, math.inf,
                    QuadratureConfig(abs_tol=0.0, rel_tol=1e-10))
    total = head + W_min + tail
    return BackwardSolution(lam=lam, v_min=v_min, v_far=V, head=head, tail=tail, total=total, kappa=kappa,
                            dense=sol.sol, A=A, B=B, w_at_min=W_min, far_beta=beta)


@dataclass(frozen=True)
class RiccatiSolution:
    """``y`` on the time-scale axis together with its pre-image solution.

    Attributes
    ----------
    lam : float
    grid : ndarray
        Ascending abscissae ``z_i`` (only where the change of variables is finite).
    values : ndarray
        ``y(z_i) >= 0``.
    cumulative : ndarray
        ``int_0^{z_i} y``.
    bound : ndarray
        ``sqrt(lam) r(z_i)``, the envelope met on the extreme decades.
    total_integral : float
        ``int_0^inf y`` (``inf`` when it diverges).
    tail_bound_coeff : str
        How ``y`` is bounded beyond the last grid point.
    pre : BackwardSolution
        The solution in the pre-image variable.
    pre_grid : ndarray
        Pre-images of ``grid``.
    """

    lam: float
    grid: np.ndarray
    values: np.ndarray
    cumulative: np.ndarray
    bound: np.ndarray
    total_integral: float
    tail_bound_coeff: str
    pre: BackwardSolution = field(repr=False)
    pre_grid: np.ndarray = field(repr=False)

    def __post_init__(self):
        if np.any(self.values < 0):
            raise ValueError("Riccati solution must be non-negative")

    def to_rows(self):
        return list(zip(self.grid.tolist(), self.values.tolist(), self.cumulative.tolist()))


def _pre_grid(pre: BackwardSolution, per_decade: int) -> np.ndarray:
    n = int(per_decade * math.log10(pre.v_far / pre.v_min)) + 1
    return np.geomspace(pre.v_min, pre.v_far, n)


def general_coefficients(model: ModelSpec):
    mech = model.mechanism

    def A(v):
        return psi(mech, v) / omega(model, v)

    def B(v):
        return 1.0 / omega(model, v)

    return A, B


def solve_y(model: ModelSpec, lam: float, cfg: RiccatiConfig = DEFAULT_RICCATI,
            quad_cfg: QuadratureConfig = DEFAULT_QUAD) -> RiccatiSolution:
    """Solve ``y' = y^2 - lam r^2`` on ``(0, inf)`` with ``y(inf) = 0`` for a general mechanism."""
    if not isinstance(classify(model.mechanism), General):
        raise DomainError("solve_y needs a general (non-subordinator) mechanism")
    if model.c <= 0:
        raise DomainError("solve_y needs c > 0")
    if not check_log_moment(model.mechanism):
        raise NonIntegrableError("log-moment condition fails")
    if lam <= 0:
        raise DomainError("lam must be positive")
    A, B = general_coefficients(model)
    pre = solve_backward(A, B, lam, cfg)
    m = MFunction(model, lam_max=max(pre.v_far, 10.0), cfg=quad_cfg)
    ts = TimeScale(m)
    v = _pre_grid(pre, cfg.per_decade)
    v = v[v <= ts.lam_max]
    mv = m(v)
    z = ts(v)
    q = pre.q(v)
    y = q * np.exp(-mv)
    bound = np.sqrt(lam / np.asarray(omega(model, v))) * np.exp(-mv)
    return RiccatiSolution(lam=lam, grid=np.asarray(z), values=y, cumulative=np.asarray(pre.w(v)), bound=bound,
                           total_integral=pre.total, tail_bound_coeff="y <= sqrt(lam) r beyond the grid",
                           pre=pre, pre_grid=v)


def solve_ybar(diff, lam: float, cfg: RiccatiConfig = DEFAULT_RICCATI,
               quad_cfg: QuadratureConfig = DEFAULT_QUAD) -> RiccatiSolution:
    """Diffusion-route Riccati solution on ``(0, S(inf))`` vanishing at ``S(inf)``.

    ``diff`` is a :class:`~logbranch.diffusion.DiffusionModel`.
    """
    if diff.gamma2 <= 0:
        raise DomainError("the diffusion route needs gamma > 0")
    if lam <= 0:
        raise DomainError("lam must be positive")
    A, B = diff.riccati_coefficients()
    pre = solve_backward(A, B, lam, cfg)
    from .diffusion import ScaleFunction

    sf = ScaleFunction(diff, cfg=quad_cfg)
    x = _pre_grid(pre, cfg.per_decade)
    x = x[x <= sf.x_max]
    z = sf(x)
    q = pre.q(x)
    s = np.exp(np.asarray(diff.log_density(x)))
    y = q / s
    bound = np.sqrt(lam * B(x)) / s
    return RiccatiSolution(lam=lam, grid=z, values=y, cumulative=np.asarray(pre.w(x)), bound=bound,
                           total_integral=pre.total, tail_bound_coeff="ybar <= sqrt(lam) rbar beyond the grid",
                           pre=pre, pre_grid=x)
