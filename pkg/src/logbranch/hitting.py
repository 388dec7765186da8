"""Eigenfunction ``h_lam``, Laplace transforms of hitting times and the mean extinction time.

With ``w(v) = int_0^v q`` from the pre-image Riccati solution, the
eigenfunction of the generator is

    h(x) = 1 + lam int_0^inf e^{-x v} Phi(v) dv,
    Phi(v) = e^{-m(v) - w(v)} / omega(v) * int_0^v e^{m(u) + 2 w(u)} du.

The inner integral is carried as ``J(v) = e^{-m(v)} int_0^v e^{m + 2w}``,
which solves ``J' = e^{2w} - (psi/omega) J`` with ``J(v) ~ v`` at zero and
never overflows.  ``Phi`` is tabulated once on Gauss-Legendre nodes in
``ln v``; ``h`` and its derivatives at any ``x`` are then dot products.
Beyond the last node ``Phi(v) ~ Phi(V) psi(V) / psi(v)``.

The mean extinction time uses ``K(v) = e^{-m(v)} int_0^v e^{m}`` with
``K' = 1 - (psi/omega) K`` in the same way:
``E_x[T_0] = int_0^inf (1 - e^{-x v}) K(v) / omega(v) dv``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, NonIntegrableError, SolverFailureError, TruncationError, ValidityWarning
from .mechanisms import (
    General,
    ModelSpec,
    check_grey,
    check_log_moment,
    classify,
    omega,
    psi,
    satisfies_first_moment,
)
from .quadrature import DEFAULT_QUAD, QuadratureConfig, gauss_legendre, quad
from .riccati import DEFAULT_RICCATI, RiccatiConfig, RiccatiSolution, general_coefficients, solve_y

__all__ = [
    "HLambda",
    "MeanExtinction",
    "h_lambda",
    "h_lambda_table",
    "h_lambda_zero",
    "laplace_Ta",
    "mean_T0",
    "mean_extinction",
    "generator_residual",
    "sufficient_conditions",
    "parse_start",
]

_INF_WORDS = {"inf", "+inf", "infinity", "+infinity", "∞"}


def parse_start(x) -> float:
    """Accept a non-negative float or the symbolic infinity (``math.inf`` or ``"inf"``)."""
    if isinstance(x, str):
        if x.strip().lower() in _INF_WORDS:
            return math.inf
        x = float(x)
    x = float(x)
    if math.isnan(x) or x < 0:
        raise DomainError("starting point must be a non-negative number or inf")
    return x


def _require_general(model: ModelSpec) -> None:
    if not isinstance(classify(model.mechanism), General):
        raise DomainError("hitting-time formulas need a general (non-subordinator) mechanism")
    if model.c <= 0:
        raise DomainError("hitting-time formulas need c > 0")
    if not check_log_moment(model.mechanism):
        raise NonIntegrableError("log-moment condition fails; m is not defined")


def sufficient_conditions(model: ModelSpec) -> bool:
    """Grey's condition together with a finite first jump moment (extinction is then certain)."""
    try:
        return bool(check_grey(model.mechanism)) and satisfies_first_moment(model.mechanism)
    except Exception:
        return False


@dataclass(frozen=True)
class _NodeTable:
    """``int_0^inf g(x, v) F(v) dv`` for a tabulated ``F`` on log-spaced Gauss nodes."""

    v: np.ndarray
    weights: np.ndarray  # dv weights (ds weight times v)
    values: np.ndarray
    v_min: float
    v_far: float
    head_value: float  # F near zero, taken constant on (0, v_min)
    far_value: float  # F(V) psi(V)
    psi: object = field(repr=False)

    def tail(self, fn) -> float:
        """``far_value * int_V^inf fn(v) / psi(v) dv``."""
        return self.far_value * quad(lambda u: fn(u) / self.psi(u), self.v_far, math.inf,
                                     QuadratureConfig(abs_tol=0.0, rel_tol=1e-10))


def _log_nodes(v_min: float, v_far: float, per_decade: int = 4, order: int = 16):
    decades = math.log10(v_far / v_min)
    nseg = max(1, int(math.ceil(per_decade * decades)))
    edges = np.linspace(math.log(v_min), math.log(v_far), nseg + 1)
    x, w = gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    s = (mid[:, None] + half[:, None] * x).ravel()
    ws = (half[:, None] * w).ravel()
    v = np.exp(s)
    return s, v, ws * v


def _forward_log(rhs_log, v_min: float, v_far: float, y0: float, rtol: float = 1e-11, atol: float = 1e-12):
    """Integrate ``d ln y / ds`` from ``ln v_min`` to ``ln v_far`` with a stiff solver."""
    sol = integrate.solve_ivp(rhs_log, (math.log(v_min), math.log(v_far)), [math.log(y0)], method="Radau",
                              rtol=rtol, atol=atol, dense_output=True)
    if not sol.success or not np.all(np.isfinite(sol.y)):
        raise SolverFailureError(f"forward sweep failed: {sol.message}")
    return sol.sol


class HLambda:
    """Tabulated eigenfunction ``h_lam`` of the generator for one ``(model, lam)``.

    Parameters
    ----------
    model : ModelSpec
    lam : float
    riccati : RiccatiSolution
        Solution of the pre-image Riccati problem (its ``pre`` attribute is used).
    per_decade, order : int
        Gauss-Legendre segments per decade in ``ln v`` and nodes per segment.
    """

    def __init__(self, model: ModelSpec, lam: float, riccati: RiccatiSolution, per_decade: int = 4,
                 order: int = 16):
        self.model = model
        self.lam = float(lam)
        self.riccati = riccati
        pre = riccati.pre
        A, _ = general_coefficients(model)
        mech = model.mechanism
        w_const = pre.head + pre.w_at_min

        def rhs(s, y):
            v = math.exp(s)
            w = w_const - float(pre.dense(s)[1])
            # d ln J / ds with J = e^{-m} int_0^v e^{m + 2w}
            return [v * (math.exp(min(2.0 * w - y[0], 700.0)) - A(v))]

        jsol = _forward_log(rhs, pre.v_min, pre.v_far, pre.v_min)
        s, v, wv = _log_nodes(pre.v_min, pre.v_far, per_decade, order)
        w_nodes = w_const - pre.dense(s)[1]
        phi = np.exp(jsol(s)[0] - w_nodes) / np.asarray(omega(model, v))
        phi_min = math.exp(float(jsol(math.log(pre.v_min))[0])) / omega(model, pre.v_min)
        s_far = math.log(pre.v_far)
        phi_far = math.exp(float(jsol(s_far)[0]) - (w_const - float(pre.dense(s_far)[1]))) / omega(model, pre.v_far)
        self.table = _NodeTable(v=v, weights=wv, values=phi, v_min=pre.v_min, v_far=pre.v_far, head_value=phi_min,
                                far_value=phi_far * psi(mech, pre.v_far), psi=lambda u: psi(mech, u))
        self.total_integral = riccati.total_integral
        self._tail_cache: dict = {}

    @property
    def h_zero(self) -> float:
        """``h_lam(0) = exp(int_0^inf y_lam)``."""
        if not math.isfinite(self.total_integral):
            raise NonIntegrableError("the Riccati integral diverges; h_lam(0) is infinite")
        return math.exp(self.total_integral)

    def _moment(self, x: float, k: int) -> float:
        t = self.table
        base = np.exp(-x * t.v) * t.values
        if k:
            base = base * (-t.v) ** k
        body = float(np.dot(t.weights, base))
        head = t.head_value * (t.v_min if k == 0 else (-1) ** k * t.v_min ** (k + 1) / (k + 1))
        tail = 0.0
        if x * t.v_far < 700.0:
            key = (x, k)
            if key not in self._tail_cache:
                if x == 0 and k == 0:
                    self._tail_cache[key] = t.tail(lambda u: 1.0)
                else:
                    self._tail_cache[key] = t.tail(lambda u: (-u) ** k * math.exp(-x * u))
            tail = self._tail_cache[key]
        return head + body + tail

    def __call__(self, x) -> float:
        x = parse_start(x)
        if x == 0:
            return self.h_zero
        if math.isinf(x):
            return 1.0
        return 1.0 + self.lam * self._moment(x, 0)

    def derivative(self, x: float, k: int = 1) -> float:
        """``k``-th derivative of ``h_lam`` at ``x > 0`` from the integral representation."""
        x = parse_start(x)
        if not 0 < x < math.inf:
            raise DomainError("derivatives are available for 0 < x < inf")
        if k < 0:
            raise DomainError("derivative order must be non-negative")
        if k == 0:
            return self(x)
        return self.lam * self._moment(x, k)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "total_integral": self.total_integral, "v_far": self.table.v_far,
                "nodes": int(self.table.v.size)}


def h_lambda_table(model: ModelSpec, lam: float, cfg: RiccatiConfig = DEFAULT_RICCATI,
                   quad_cfg: QuadratureConfig = DEFAULT_QUAD) -> HLambda:
    """Solve the Riccati problem and tabulate ``h_lam``."""
    _require_general(model)
    if not lam > 0:
        raise DomainError("lam must be positive")
    return HLambda(model, lam, solve_y(model, lam, cfg, quad_cfg))


def h_lambda(model: ModelSpec, lam: float, x, cfg: RiccatiConfig = DEFAULT_RICCATI,
             quad_cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``h_lam(x)`` for ``x > 0`` (``x = inf`` gives 1)."""
    x = parse_start(x)
    if x == 0:
        raise DomainError("x = 0 is a boundary value; use h_lambda_zero")
    if lam == 0:
        return 1.0
    return h_lambda_table(model, lam, cfg, quad_cfg)(x)


def h_lambda_zero(model: ModelSpec, lam: float, cfg: RiccatiConfig = DEFAULT_RICCATI,
                  quad_cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``h_lam(0) = exp(int_0^inf y_lam)``."""
    _require_general(model)
    if lam == 0:
        return 1.0
    if not check_grey(model.mechanism):
        raise NonIntegrableError("Grey's condition fails; the Riccati integral diverges")
    return math.exp(solve_y(model, lam, cfg, quad_cfg).total_integral)


def laplace_Ta(model: ModelSpec, lam: float, x, a: float, hl: HLambda | None = None,
               cfg: RiccatiConfig = DEFAULT_RICCATI, quad_cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``E_x[exp(-lam T_a)] = h_lam(x) / h_lam(a)``; ``x = inf`` is allowed.

    Emits :class:`ValidityWarning` when extinction is not guaranteed by
    Grey's condition and a finite first jump moment.
    """
    x = parse_start(x)
    a = parse_start(a)
    if math.isinf(a):
        raise DomainError("the target level a must be finite")
    if x < a:
        raise DomainError("need x >= a")
    if lam < 0:
        raise DomainError("lam must be non-negative")
    _require_general(model)
    if not sufficient_conditions(model):
        warnings.warn("extinction is not guaranteed for this model; the Laplace formula is unproven here",
                      ValidityWarning, stacklevel=2)
    if x == a or lam == 0:
        return 1.0
    if hl is None:
        hl = h_lambda_table(model, lam, cfg, quad_cfg)
    elif hl.lam != lam:
        raise DomainError("supplied HLambda was built for a different lam")
    return hl(x) / hl(a)


class MeanExtinction:
    """Tabulated ``E_x[T_0]`` for one model; callable on ``x`` (``inf`` allowed)."""

    def __init__(self, model: ModelSpec, v_min: float = 1e-12, damping: float = 1e6, per_decade: int = 4,
                 order: int = 16):
        _require_general(model)
        if not check_grey(model.mechanism):
            raise TruncationError("Grey's condition fails: the mean extinction time is infinite")
        self.model = model
        A, _ = general_coefficients(model)
        mech = model.mechanism
        V = 2.0
        for _ in range(400):
            if A(V) > 0 and V * A(V) > damping:
                break
            V *= 2.0
        else:
            raise TruncationError("psi/omega does not grow; no far point found")

        def rhs(s, y):
            v = math.exp(s)
            # clamp guards trial iterates of the implicit solver
            return [v * (math.exp(min(-y[0], 700.0)) - A(v))]

        ksol = _forward_log(rhs, v_min, V, v_min)
        s, v, wv = _log_nodes(v_min, V, per_decade, order)
        vals = np.exp(ksol(s)[0]) / np.asarray(omega(model, v))
        k_far = math.exp(float(ksol(math.log(V))[0]))
        self.table = _NodeTable(v=v, weights=wv, values=vals, v_min=v_min, v_far=V, head_value=1.0 / model.c,
                                far_value=k_far / omega(model, V) * psi(mech, V), psi=lambda u: psi(mech, u))
        self._inf_tail = self.table.tail(lambda u: 1.0)

    def __call__(self, x) -> float:
        x = parse_start(x)
        t = self.table
        if x == 0:
            return 0.0
        if math.isinf(x):
            return float(np.dot(t.weights, t.values)) + t.head_value * t.v_min + self._inf_tail
        body = float(np.dot(t.weights, -np.expm1(-x * t.v) * t.values))
        head = t.head_value * (t.v_min + math.expm1(-x * t.v_min) / x)
        if x * t.v_far < 700.0:
            tail = t.tail(lambda u: -math.expm1(-x * u))
        else:
            tail = self._inf_tail
        return body + head + tail


def mean_extinction(model: ModelSpec) -> MeanExtinction:
    return MeanExtinction(model)


def mean_T0(model: ModelSpec, x) -> float:
    """``E_x[T_0]``; ``x = inf`` gives the entrance value."""
    return MeanExtinction(model)(x)


def generator_residual(hl: HLambda, x: float, step: float = 1e-3) -> float:
    """Relative residual ``|U h - lam h| / h`` at ``x`` from central differences.

    ``U f = (gamma^2 x + sigma^2 x^2/2) f'' + (b x - c x^2) f'
    + x [int mubar(u) (f'(x+u) - f'(x) 1_{u<1}) du + mubar(1) f'(x)]``;
    the jump integral uses the integral representation of ``h'``.
    """
    model = hl.model
    mech = model.mechanism
    e = step * x
    h = [hl(x + k * e) for k in (-2, -1, 0, 1, 2)]
    d1 = (h[0] - 8 * h[1] + 8 * h[3] - h[4]) / (12 * e)
    d2 = (-h[0] + 16 * h[1] - 30 * h[2] + 16 * h[3] - h[4]) / (12 * e * e)
    diff = (mech.gamma2 * x + 0.5 * model.sigma2 * x * x) * d2 + (mech.b * x - model.c * x * x) * d1
    levy = mech.levy
    if levy.family != "none":
        dprime = hl.derivative(x, 1)
        small = quad(lambda u: levy.tail1(u) * (hl.derivative(x + u, 1) - dprime), 0.0, 1.0,
                     QuadratureConfig(abs_tol=1e-12, rel_tol=1e-8))
        large = quad(lambda u: levy.tail1(u) * hl.derivative(x + u, 1), 1.0, math.inf,
                     QuadratureConfig(abs_tol=1e-12, rel_tol=1e-8))
        diff += x * (small + large + levy.tail1(1.0) * dprime)
    return abs(diff - hl.lam * h[2]) / h[2]
