"""Characteristics solution of the dispersionless law ``v_t = a(v) v_x``.

The value ``phi(xi)`` is carried along ``dx/dt = -a``, so at time ``t`` the
foot point of ``x`` solves ``xi - t a(phi(xi)) = x``.  With
``D = 1 - t a'(phi) phi'`` the map ``xi -> x`` is monotone while ``D > 0`` and

    v_x = phi' / D,        1 + t a'(v) v_x = 1 / D.

Higher x-derivatives follow by differentiating in ``xi`` and dividing by ``D``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import InvalidArgumentError, NewtonNonconvergenceError, PastBreakingError
from .flux import FluxModel
from .initial_data import InitialDatum, from_samples
from .spectral import Field, Grid, spectral_derivative

NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-13
DEFAULT_TIME_CAP = 0.97


@dataclass(frozen=True)
class CriticalTime:
    t_c: float
    arg_xi: float

    @property
    def finite(self) -> bool:
        return np.isfinite(self.t_c)


@dataclass(frozen=True)
class HopfSolution:
    t: float
    xi_map: Field
    v0: Field
    v0_x: Field
    v0_xx: Field
    v0_xxx: Field
    jacobian: Field  # D = 1 - t a'(phi(xi)) phi'(xi)

    @property
    def grid(self) -> Grid:
        return self.v0.grid


@dataclass(frozen=True)
class PointSolution:
    """Characteristic data at arbitrary points (arrays, no periodicity assumed)."""

    t: float
    x: np.ndarray
    xi: np.ndarray
    v0: np.ndarray
    v0_x: np.ndarray
    v0_xx: np.ndarray
    v0_xxx: np.ndarray
    jacobian: np.ndarray


def _as_datum(phi) -> InitialDatum:
    if isinstance(phi, InitialDatum):
        return phi
    if isinstance(phi, Field):
        return from_samples(phi)
    raise InvalidArgumentError("phi must be an InitialDatum or a sampled Field")


def _steepening_rate(phi: InitialDatum, model: FluxModel):
    return lambda xi: model.da(phi(xi)) * phi.d(1, xi)


def critical_time(phi, model: FluxModel, grid: Grid | None = None, interval=None,
                  samples: int = 20001) -> CriticalTime:
    """Gradient-catastrophe time ``1 / max(a'(phi) phi')`` over positive values.

    The maximum is located on a dense sample of ``interval`` (default: the
    grid box) and refined by golden-section search.
    """
    datum = _as_datum(phi)
    if interval is None:
        if grid is None:
            if isinstance(phi, Field):
                grid = phi.grid
            else:
                raise InvalidArgumentError("critical_time needs a grid or an interval")
        interval = (-0.5 * grid.length, 0.5 * grid.length)
    lo, hi = map(float, interval)
    rate = _steepening_rate(datum, model)
    xi = np.linspace(lo, hi, samples)
    values = np.asarray(rate(xi), dtype=float) * np.ones_like(xi)
    i = int(np.argmax(values))
    if values[i] <= 0.0:
        return CriticalTime(np.inf, float(xi[i]))
    step = xi[1] - xi[0]
    bracket = (xi[i] - step, xi[i], xi[i] + step)
    neg = lambda z: -float(rate(np.asarray(z)))  # noqa: E731
    best_xi, best = xi[i], values[i]
    if neg(bracket[1]) < min(neg(bracket[0]), neg(bracket[2])):
        res = optimize.minimize_scalar(neg, bracket=bracket, method="golden",
                                       options={"xtol": 1e-10})
        if -res.fun >= best:
            best_xi, best = float(res.x), -float(res.fun)
    return CriticalTime(1.0 / best, float(best_xi))


def characteristics(phi, model: FluxModel, t: float, x, xi0=None) -> PointSolution:
    """Safeguarded Newton solve of ``xi - t a(phi(xi)) = x`` at each point."""
    datum = _as_datum(phi)
    x = np.asarray(x, dtype=float)
    xi = x.copy() if xi0 is None else np.array(xi0, dtype=float)
    lo = np.full_like(x, -np.inf)
    hi = np.full_like(x, np.inf)
    older = np.full_like(x, np.inf)  # step taken two iterations ago
    last = np.full_like(x, np.inf)
    for _ in range(NEWTON_MAX_ITER):
        ph = datum(xi)
        g = xi - t * model.a(ph) - x
        dg = 1.0 - t * model.da(ph) * datum.d(1, xi)
        if np.any(dg <= 0.0):
            raise PastBreakingError(f"characteristics crossed before t = {t}")
        lo = np.where(g < 0.0, np.maximum(lo, xi), lo)
        hi = np.where(g > 0.0, np.minimum(hi, xi), hi)
        step = g / dg
        new = xi - step
        # bisect when Newton leaves the bracket or fails to halve the step of two
        # iterations ago; negligible steps are kept so round-off cannot trigger it
        settled = np.abs(step) <= NEWTON_TOL * np.maximum(1.0, np.abs(xi))
        slow = np.abs(step) > 0.5 * np.abs(older)
        outside = ((new <= lo) | (new >= hi) | slow) & ~settled
        bounded = np.isfinite(lo) & np.isfinite(hi)
        with np.errstate(invalid="ignore"):
            new = np.where(outside & bounded, 0.5 * (lo + hi), new)
        older, last = last, new - xi
        change = np.max(np.abs(new - xi))
        xi = new
        if change <= NEWTON_TOL * max(1.0, float(np.max(np.abs(xi)))):
            break
    else:
        raise NewtonNonconvergenceError(f"Newton did not converge in {NEWTON_MAX_ITER} steps")

    p0, p1, p2, p3 = (datum.d(k, xi) for k in range(4))
    a1, a2, a3 = model.da(p0), model.d2a(p0), model.d3a(p0)
    D = 1.0 - t * a1 * p1
    if np.any(D <= 0.0):
        raise PastBreakingError(f"characteristics crossed before t = {t}")
    D1 = -t * (a2 * p1**2 + a1 * p2)
    D2 = -t * (a3 * p1**3 + 3.0 * a2 * p1 * p2 + a1 * p3)
    G1 = p2 / D - p1 * D1 / D**2
    G2 = p3 / D - 2.0 * p2 * D1 / D**2 - p1 * D2 / D**2 + 2.0 * p1 * D1**2 / D**3
    return PointSolution(
        t=float(t), x=x, xi=xi, v0=p0 * np.ones_like(x), v0_x=p1 / D, v0_xx=G1 / D,
        v0_xxx=G2 / D**2 - G1 * D1 / D**3, jacobian=D,
    )


def solve_hopf(phi, model: FluxModel, t: float, grid: Grid, xi0=None,
               second_derivative: str = "analytic") -> HopfSolution:
    """``v0`` and its x-derivatives on ``grid`` at time ``t < t_c``.

    ``second_derivative="spectral"`` replaces the chain-rule ``v0_xx`` and
    ``v0_xxx`` by spectral differentiation of ``v0_x``.
    """
    if t < 0:
        raise InvalidArgumentError("t must be non-negative")
    pts = characteristics(phi, model, t, grid.x, xi0=xi0)
    v0_x = Field(grid, pts.v0_x)
    if second_derivative == "analytic":
        v0_xx, v0_xxx = Field(grid, pts.v0_xx), Field(grid, pts.v0_xxx)
    elif second_derivative == "spectral":
        v0_xx = spectral_derivative(v0_x, 1)
        v0_xxx = spectral_derivative(v0_x, 2)
    else:
        raise InvalidArgumentError(f"unknown derivative route {second_derivative!r}")
    return HopfSolution(
        t=float(t), xi_map=Field(grid, pts.xi), v0=Field(grid, pts.v0), v0_x=v0_x,
        v0_xx=v0_xx, v0_xxx=v0_xxx, jacobian=Field(grid, pts.jacobian),
    )


def denominator_field(sol: HopfSolution, model: FluxModel) -> Field:
    """``1 + t a'(v0) v0_x``, equal to ``1 / D`` on the characteristic."""
    return Field(sol.grid, 1.0 + sol.t * model.da(sol.v0.samples) * sol.v0_x.samples)


class HopfFlow:
    """Time-continuation wrapper: each solve warm-starts from the last foot points."""

    def __init__(self, phi, model: FluxModel, grid: Grid):
        self.phi = _as_datum(phi)
        self.model = model
        self.grid = grid
        self._xi = None

    def __call__(self, t: float) -> HopfSolution:
        sol = solve_hopf(self.phi, self.model, t, self.grid, xi0=self._xi)
        self._xi = sol.xi_map.samples
        return sol
