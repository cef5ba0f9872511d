"""Coefficients of the small-dispersion expansion ``u ~ sum_k eps^k v^k``.

``v^0`` is the characteristics solution.  The first correction solves the
linear transport equation

    v1_t = d_x( a v1 + c a' v0_xx + (c a'' + c' a') v0_x^2 / 2 ),  v1(0) = 0,

whose solution has the closed form returned by :func:`v1_closed_form`.  For
KdV the whole hierarchy of eps-derivatives ``w^k = d^k u / d eps^k`` obeys

    w^k_t = sum_j binom(k, j) w^j w^{k-j}_x + k w^{k-1}_xxx,   w^k(0) = 0,

and the Taylor coefficients are ``v^k = w^k / k!``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import SimpleNamespace
from typing import Callable, Sequence

import numpy as np

from .errors import (
    CFLViolationError,
    DomainError,
    InvalidArgumentError,
    NonmonotoneDataError,
    PastBreakingError,
    ResolutionError,
)
from .flux import FluxModel, PerturbationData, constant_perturbation, kdv_model
from .hopf import HopfFlow, HopfSolution, PointSolution, characteristics
from .solver import Trajectory
from .spectral import Field, Grid, rfft_derivative, spectral_tail_fraction

MONOTONE_FLOOR = 1e-8
RESOLUTION_TAIL = 1e-8

Source = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class ExpansionCoefficients:
    """Taylor coefficients ``v^0 .. v^N`` at a common time ``t``.

    ``v^k`` is meaningful in ``H^{s - 3k}`` for data in ``H^s``.
    """

    t: float
    fields: tuple[Field, ...]
    sobolev_budget: float = np.inf

    @property
    def order(self) -> int:
        return len(self.fields) - 1

    def sobolev_index(self, k: int) -> float:
        return self.sobolev_budget - 3 * k


def taylor_reconstruct(coeffs: ExpansionCoefficients, eps_scalar: float) -> Field:
    out = coeffs.fields[0]
    for k, v in enumerate(coeffs.fields[1:], start=1):
        out = out + eps_scalar**k * v
    return out


# --- closed forms for v1 ---------------------------------------------------------


def _coefficient_terms(v0, model: FluxModel, pert: PerturbationData):
    a1, a2, a3 = model.da(v0), model.d2a(v0), model.d3a(v0)
    c, c1, c2 = pert.c(v0), pert.dc(v0), pert.d2c(v0)
    return a1, a2, a3, c, c1, c2


def _v1_bracket(t, v0, w, w2, model, pert):
    """Numerator, denominator and the bracket ``N / (1 + t a' v0_x)^2``."""
    a1, a2, _, c, c1, _ = _coefficient_terms(v0, model, pert)
    P = c1 * a1 + c * a2  # (c a')'
    num = P * w * w + 2.0 * c * a1 * w2 + t * c * a1**2 * w * w2 + t * c1 * a1**2 * w**3
    den = 1.0 + t * a1 * w
    if np.any(den <= 0.0):
        raise PastBreakingError("1 + t a'(v0) v0_x is not positive")
    return num, den


def v1_closed_form(sol: HopfSolution, model: FluxModel, pert: PerturbationData,
                   route: str = "spectral") -> Field:
    """First correction with zero initial value, evaluated from ``v0``.

    ``route="spectral"`` differentiates the bracket spectrally (periodic data);
    ``route="analytic"`` uses the chain rule with ``v0_xxx`` and works on any
    set of points.
    """
    grid = sol.grid
    if route == "spectral":
        num, den = _v1_bracket(sol.t, sol.v0.samples, sol.v0_x.samples, sol.v0_xx.samples,
                               model, pert)
        bracket = num / den**2
        return Field(grid, 0.5 * sol.t * rfft_derivative(bracket, grid, 1))
    if route == "analytic":
        return Field(grid, _v1_closed_points(sol.t, sol.v0.samples, sol.v0_x.samples,
                                             sol.v0_xx.samples, sol.v0_xxx.samples, model, pert))
    raise InvalidArgumentError(f"unknown route {route!r}")


def _v1_closed_points(t, v0, w, w2, w3, model, pert):
    a1, a2, a3, c, c1, c2 = _coefficient_terms(v0, model, pert)
    num, den = _v1_bracket(t, v0, w, w2, model, pert)
    P = c1 * a1 + c * a2
    dP = c2 * a1 + 2.0 * c1 * a2 + c * a3
    R = c * a1**2
    dR = c1 * a1**2 + 2.0 * c * a1 * a2
    S = c1 * a1**2
    dS = c2 * a1**2 + 2.0 * c1 * a1 * a2
    dnum = (dP * w**3 + 2.0 * P * w * w2
            + 2.0 * P * w * w2 + 2.0 * c * a1 * w3
            + t * (dR * w * w * w2 + R * w2 * w2 + R * w * w3)
            + t * (dS * w**4 + 3.0 * S * w * w * w2))
    dden = t * (a2 * w * w + a1 * w2)
    return 0.5 * t * (dnum / den**2 - 2.0 * num * dden / den**3)


def v1_closed_form_points(pts: PointSolution, model: FluxModel, pert: PerturbationData):
    return _v1_closed_points(pts.t, pts.v0, pts.v0_x, pts.v0_xx, pts.v0_xxx, model, pert)


def v1_monotone_points(pts, pert: PerturbationData, floor: float = MONOTONE_FLOOR):
    """``(1/2) d_x( c v0_xx / v0_x + c' v0_x )`` expanded by the chain rule."""
    v0, w, w2, w3 = pts.v0, pts.v0_x, pts.v0_xx, pts.v0_xxx
    if not (np.all(w >= floor) or np.all(w <= -floor)):
        raise NonmonotoneDataError(f"v0_x changes sign or |v0_x| < {floor:g}; data is not monotone")
    c, c1, c2 = pert.c(v0), pert.dc(v0), pert.d2c(v0)
    return 0.5 * (c * (w3 * w - w2 * w2) / (w * w) + 2.0 * c1 * w2 + c2 * w * w)


def v1_monotone_formula(sol: HopfSolution, pert: PerturbationData,
                        floor: float = MONOTONE_FLOOR) -> Field:
    """Quasi-Miura first correction; finite only where ``v0`` is strictly monotone.

    Evaluated pointwise, so the grid may be a window on which ``v0_x`` stays
    away from zero.  It solves the same transport equation but is nonzero at
    ``t = 0``.
    """
    pts = SimpleNamespace(v0=sol.v0.samples, v0_x=sol.v0_x.samples, v0_xx=sol.v0_xx.samples,
                          v0_xxx=sol.v0_xxx.samples)
    return Field(sol.grid, v1_monotone_points(pts, pert, floor))


def tr1_flux(v0, w, w2, v1, model: FluxModel, pert: PerturbationData):
    a1, a2, _, c, c1, _ = _coefficient_terms(v0, model, pert)
    return model.a(v0) * v1 + c * a1 * w2 + 0.5 * (c * a2 + c1 * a1) * w * w


def tr1_residual_points(v1_fn, phi, model: FluxModel, pert: PerturbationData, t: float, x,
                        delta: float):
    """Residual of the first transport equation by central differences in t and x.

    ``v1_fn`` maps a :class:`PointSolution` to ``v1`` values.  The truncation
    error is ``O(delta**2)``.
    """
    x = np.asarray(x, dtype=float)

    def at(tt, xx):
        return characteristics(phi, model, tt, xx)

    v1_dt = (v1_fn(at(t + delta, x)) - v1_fn(at(t - delta, x))) / (2.0 * delta)
    fluxes = []
    for shift in (delta, -delta):
        p = at(t, x + shift)
        fluxes.append(tr1_flux(p.v0, p.v0_x, p.v0_xx, v1_fn(p), model, pert))
    return v1_dt - (fluxes[0] - fluxes[1]) / (2.0 * delta)


# --- the K~_t functional -------------------------------------------------------------


def _ktilde_log_arg(f: Field, t, model):
    fx = rfft_derivative(f.samples, f.grid, 1)
    arg = 1.0 + t * model.da(f.samples) * fx
    if np.any(arg <= 0.0):
        raise DomainError("1 + t a'(u) u_x must be positive for K~_t")
    return fx, arg


def ktilde_functional(f: Field, t: float, model: FluxModel, pert: PerturbationData) -> float:
    """``-1/2 int c(u) u_x log(1 + t a'(u) u_x) dx``."""
    fx, arg = _ktilde_log_arg(f, t, model)
    return float(-0.5 * f.grid.spacing * np.sum(pert.c(f.samples) * fx * np.log(arg)))


def ktilde_gradient(f: Field, t: float, model: FluxModel, pert: PerturbationData) -> Field:
    """Exact gradient of the discretised functional divided by ``dx``.

    With density ``L(u, p)``, ``p = D u`` and ``D`` skew, this is
    ``L_u - D L_p``, the discrete Euler-Lagrange expression.
    """
    u = f.samples
    fx, arg = _ktilde_log_arg(f, t, model)
    c, c1 = pert.c(u), pert.dc(u)
    a1, a2 = model.da(u), model.d2a(u)
    log_arg = np.log(arg)
    L_u = -0.5 * (c1 * fx * log_arg + c * fx * t * a2 * fx / arg)
    L_p = -0.5 * (c * log_arg + c * fx * t * a1 / arg)
    return Field(f.grid, L_u - rfft_derivative(L_p, f.grid, 1))


def ktilde_v1(f: Field, t: float, model: FluxModel, pert: PerturbationData) -> Field:
    """``d_x`` of the variational derivative of ``K~_t`` at ``f``."""
    g = ktilde_gradient(f, t, model, pert)
    return Field(f.grid, rfft_derivative(g.samples, f.grid, 1))


# --- numerical transport integration -------------------------------------------------


def as_source(obj) -> Source:
    """Turn a Trajectory, HopfFlow or callable into ``t -> samples``."""
    if isinstance(obj, Trajectory):
        return obj.at
    if isinstance(obj, HopfFlow):
        return lambda t: obj(t).v0.samples
    if callable(obj):
        return obj
    raise InvalidArgumentError(f"cannot use {type(obj).__name__} as a field source")


def closed_form_source(phi, model: FluxModel, pert: PerturbationData, grid: Grid) -> Source:
    flow = HopfFlow(phi, model, grid)

    def source(t):
        if t == 0.0:
            return np.zeros(grid.n_points)
        return v1_closed_form(flow(t), model, pert, route="analytic").samples

    return source


def _check_tail(forcing: np.ndarray, grid: Grid, t: float):
    frac = spectral_tail_fraction(forcing, grid)
    if frac > RESOLUTION_TAIL:
        raise ResolutionError(
            f"forcing spectral tail {frac:.2e} exceeds {RESOLUTION_TAIL:g} at t = {t:g}; refine grid"
        )


def _rk4_linear(rhs, grid: Grid, t_end: float, dt: float, save_every: int | None,
                speed_fn, cfl_safety: float):
    n_full = int(np.floor(t_end / dt * (1.0 + 1e-12)))
    steps = [dt] * n_full
    rest = t_end - n_full * dt
    if rest > 1e-12 * t_end:
        steps.append(rest)
    v = np.zeros(grid.n_points)
    times, states = [0.0], [v.copy()]
    t = 0.0
    for i, h in enumerate(steps, start=1):
        amax = speed_fn(t)
        if amax > 0 and h > cfl_safety * grid.spacing / amax:
            raise CFLViolationError(f"transport step {h:g} violates the advective CFL at t = {t:g}")
        k1 = rhs(t, v, True)
        k2 = rhs(t + 0.5 * h, v + 0.5 * h * k1, False)
        k3 = rhs(t + 0.5 * h, v + 0.5 * h * k2, False)
        k4 = rhs(t + h, v + h * k3, False)
        v = v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t_end if i == len(steps) else i * dt
        if i == len(steps) or (save_every and i % save_every == 0):
            times.append(t)
            states.append(v.copy())
    states = np.array(states)
    return Trajectory(grid, np.array(times), states, np.zeros((len(times), 3)),
                      meta={"dt": dt, "steps": len(steps)})


def solve_transport_kdv(k: int, lower: Sequence, grid: Grid, t_end: float, dt: float,
                        save_every: int | None = 1, cfl_safety: float = 0.5) -> Trajectory:
    """Integrate the k-th KdV hierarchy equation for ``w^k = d^k u / d eps^k``.

    ``lower[j]`` supplies ``w^j`` for ``j < k`` (a Trajectory, HopfFlow or a
    callable ``t -> samples``).  Returns a trajectory starting from zero.
    """
    if k < 1 or len(lower) < k:
        raise InvalidArgumentError(f"need sources for w^0..w^{k - 1}")
    sources = [as_source(s) for s in lower[:k]]

    def d(v, order):
        return rfft_derivative(v, grid, order)

    def rhs(t, v, check):
        w = [s(t) for s in sources]
        wx = [d(wj, 1) for wj in w]
        forcing = k * d(w[k - 1], 3)
        for j in range(1, k):
            forcing = forcing + math.comb(k, j) * w[j] * wx[k - j]
        if check:
            _check_tail(forcing, grid, t)
        return w[0] * d(v, 1) + v * wx[0] + forcing

    return _rk4_linear(rhs, grid, t_end, dt, save_every,
                       lambda t: float(np.max(np.abs(sources[0](t)))), cfl_safety)


def solve_transport_general(v0_flow: HopfFlow, pert: PerturbationData, t_end: float, dt: float,
                            save_every: int | None = 1, cfl_safety: float = 0.5) -> Trajectory:
    """Integrate the first transport equation in conservation form.

    ``v0_flow`` supplies the characteristics solution (with chain-rule
    derivatives) at every RK stage time; the outer ``d_x`` is spectral.
    """
    model, grid = v0_flow.model, v0_flow.grid

    def rhs(t, v, check):
        sol = v0_flow(t)
        v0, w, w2 = sol.v0.samples, sol.v0_x.samples, sol.v0_xx.samples
        source = tr1_flux(v0, w, w2, np.zeros_like(v), model, pert)
        if check:
            _check_tail(rfft_derivative(source, grid, 1), grid, t)
        return rfft_derivative(model.a(v0) * v + source, grid, 1)

    return _rk4_linear(rhs, grid, t_end, dt, save_every,
                       lambda t: float(np.max(np.abs(model.a(v0_flow(t).v0.samples)))), cfl_safety)


def kdv_hierarchy(phi, grid: Grid, order: int, t_end: float, dt: float,
                  v1_route: str = "closed_form", sobolev_budget: float = np.inf):
    """Taylor coefficients ``v^0..v^order`` of KdV at ``t_end``.

    Returns ``(ExpansionCoefficients, trajectories)`` where ``trajectories[k]``
    holds ``w^k`` (un-normalised eps-derivative) for numerically integrated k.
    """
    model = kdv_model()
    pert = constant_perturbation(1.0)
    flow = HopfFlow(phi, model, grid)
    sources: list = [flow]
    trajectories: dict[int, Trajectory] = {}
    if order >= 1:
        if v1_route == "closed_form":
            sources.append(closed_form_source(phi, model, pert, grid))
        elif v1_route == "transport":
            trajectories[1] = solve_transport_kdv(1, sources, grid, t_end, dt)
            sources.append(trajectories[1])
        else:
            raise InvalidArgumentError(f"unknown v1 route {v1_route!r}")
    for k in range(2, order + 1):
        trajectories[k] = solve_transport_kdv(k, sources, grid, t_end, dt)
        sources.append(trajectories[k])
    final = HopfFlow(phi, model, grid)(t_end)
    fields = [final.v0]
    for k in range(1, order + 1):
        w = as_source(sources[k])(t_end)
        fields.append(Field(grid, w / math.factorial(k)))
    return ExpansionCoefficients(t_end, tuple(fields), sobolev_budget), trajectories
