"""Flux nonlinearities, Hamiltonian perturbation data and gKdV invariants.

The generalized KdV flow ``u_t = a(u) u_x + sum_i eps_i d_x^{2i+1} u`` is the
Hamiltonian flow ``u_t = d_x (dE/du)`` of

    E[u] = int h(u) + sum_i (-1)^i (eps_i / 2) (d_x^i u)^2 dx,   h'' = a.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

from .errors import DegenerateFluxError, InvalidArgumentError
from .spectral import Field, rfft_derivative

ScalarFn = Callable[[np.ndarray], np.ndarray]


def _const(value: float) -> ScalarFn:
    return lambda u: np.full(np.shape(u), float(value)) if np.ndim(u) else float(value)


@dataclass(frozen=True)
class FluxModel:
    """Nonlinearity ``a`` with four derivatives, potential ``h`` and primitive ``A``.

    ``h'' = a`` with ``h(0) = h'(0) = 0``; ``dh`` is ``h'``.  ``A' = u a(u)``,
    so ``u a(u) u_x = d_x A(u)`` (used by the momentum balance).
    """

    name: str
    a: ScalarFn
    da: ScalarFn
    d2a: ScalarFn
    d3a: ScalarFn
    d4a: ScalarFn
    h: ScalarFn
    dh: ScalarFn
    A: ScalarFn


@dataclass(frozen=True)
class DispersionParams:
    eps: tuple[float, ...]

    def __post_init__(self):
        eps = tuple(float(e) for e in np.atleast_1d(self.eps))
        if not 1 <= len(eps) <= 2:
            raise InvalidArgumentError(f"need 1 or 2 dispersion parameters, got {len(eps)}")
        if not all(np.isfinite(eps)):
            raise InvalidArgumentError("dispersion parameters must be finite")
        object.__setattr__(self, "eps", eps)

    @property
    def n(self) -> int:
        return len(self.eps)

    @classmethod
    def along_path(cls, eps: float, alpha: float, beta: float) -> "DispersionParams":
        """``(eps_1, eps_2) = (alpha eps^2, beta eps^4)``."""
        return cls((alpha * eps**2, beta * eps**4))


@dataclass(frozen=True)
class PerturbationData:
    """The functions ``c, p, s`` of the order-eps^4 normal form (plus derivatives)."""

    c: ScalarFn
    dc: ScalarFn
    d2c: ScalarFn
    p: ScalarFn
    dp: ScalarFn
    s_fn: ScalarFn


# --- model construction -------------------------------------------------------


def kdv_model() -> FluxModel:
    return FluxModel(
        name="kdv",
        a=lambda u: u,
        da=_const(1.0),
        d2a=_const(0.0),
        d3a=_const(0.0),
        d4a=_const(0.0),
        h=lambda u: u**3 / 6.0,
        dh=lambda u: u**2 / 2.0,
        A=lambda u: u**3 / 3.0,
    )


def polynomial_model(coeffs: Sequence[float], name: str = "polynomial") -> FluxModel:
    """``a(u) = sum_j coeffs[j] u**j``; ``h`` and ``A`` integrated exactly."""
    a = Polynomial(np.asarray(coeffs, dtype=float))
    d = [a.deriv(j) if j else a for j in range(5)]
    h = a.integ(2)
    A = (Polynomial([0.0, 1.0]) * a).integ()
    return FluxModel(
        name=name,
        a=d[0],
        da=d[1],
        d2a=d[2],
        d3a=d[3],
        d4a=d[4],
        h=h,
        dh=h.deriv(),
        A=A,
    )


def quadratic_model() -> FluxModel:
    """``a(u) = u**2 / 2``."""
    return polynomial_model([0.0, 0.0, 0.5], name="quadratic")


def quartic_model() -> FluxModel:
    """``a(u) = u**4``; some solutions of this flow blow up in finite time."""
    return polynomial_model([0.0, 0.0, 0.0, 0.0, 1.0], name="quartic")


def custom_model(a: ScalarFn, da: ScalarFn, d2a: ScalarFn, d3a: ScalarFn, d4a: ScalarFn,
                 name: str = "custom") -> FluxModel:
    """Model from user-supplied ``a`` and derivatives.

    ``h``, ``h'`` and ``A`` come from adaptive quadrature with ``h(0) = h'(0) = 0``;
    ``h(u) = int_0^u (u - s) a(s) ds`` is the repeated integral in one pass.
    """

    def _quad(integrand):
        def fn(u):
            u_arr = np.asarray(u, dtype=float)
            out = np.vectorize(lambda v: integrate.quad(lambda s: integrand(v, s), 0.0, v,
                                                        epsabs=1e-14, epsrel=1e-13)[0])(u_arr)
            return out if out.ndim else float(out)

        return fn

    return FluxModel(
        name=name,
        a=a,
        da=da,
        d2a=d2a,
        d3a=d3a,
        d4a=d4a,
        h=_quad(lambda v, s: (v - s) * a(s)),
        dh=_quad(lambda v, s: a(s)),
        A=_quad(lambda v, s: s * a(s)),
    )


MODEL_REGISTRY: dict[str, Callable[[], FluxModel]] = {
    "kdv": kdv_model,
    "quadratic": quadratic_model,
    "quartic": quartic_model,
}


def get_model(name: str, coeffs: Sequence[float] | None = None) -> FluxModel:
    if coeffs is not None:
        return polynomial_model(coeffs, name=name)
    try:
        return MODEL_REGISTRY[name]()
    except KeyError:
        raise InvalidArgumentError(
            f"unknown model {name!r}; known: {sorted(MODEL_REGISTRY)} or give coefficients"
        ) from None


# --- perturbation data ----------------------------------------------------------


def constant_perturbation(c: float = 1.0, p: float = 0.0, s: float = 0.0) -> PerturbationData:
    return PerturbationData(_const(c), _const(0.0), _const(0.0), _const(p), _const(0.0), _const(s))


def polynomial_perturbation(c_coeffs: Sequence[float]) -> PerturbationData:
    """``c(u)`` polynomial, ``p = s = 0``."""
    c = Polynomial(np.asarray(c_coeffs, dtype=float))
    return PerturbationData(c, c.deriv(1), c.deriv(2), _const(0.0), _const(0.0), _const(0.0))


def _require_nondegenerate(da):
    if np.any(np.asarray(da) == 0.0):
        raise DegenerateFluxError("a'(u) vanishes; the coefficient c = alpha/a' is undefined")


def map_coefficients(alpha: float, beta: float, model: FluxModel, u: float):
    """Normal-form data ``(c, p, s)`` for ``u_t = a u_x + alpha e^2 u_xxx + beta e^4 u_xxxxx``."""
    a1, a2, a3, a4 = model.da(u), model.d2a(u), model.d3a(u), model.d4a(u)
    _require_nondegenerate(a1)
    c = alpha / a1
    p = beta / (2.0 * a1) - 0.3 * alpha**2 * a2 / a1**3
    s = alpha**2 * (0.4 * a2**3 / a1**5 - 0.35 * a2 * a3 / a1**4 + a4 / (24.0 * a1**3)) - (
        beta / 12.0
    ) * (a2**2 / a1**3 - a3 / a1**2)
    return c, p, s


def mapped_perturbation(alpha: float, beta: float, model: FluxModel) -> PerturbationData:
    """:func:`map_coefficients` as functions of ``u``, with ``c'``, ``c''`` and ``p'``."""

    def c(u):
        return map_coefficients(alpha, beta, model, u)[0]

    def p(u):
        return map_coefficients(alpha, beta, model, u)[1]

    def s_fn(u):
        return map_coefficients(alpha, beta, model, u)[2]

    def dc(u):
        a1, a2 = model.da(u), model.d2a(u)
        _require_nondegenerate(a1)
        return -alpha * a2 / a1**2

    def d2c(u):
        a1, a2, a3 = model.da(u), model.d2a(u), model.d3a(u)
        _require_nondegenerate(a1)
        return alpha * (2.0 * a2**2 / a1**3 - a3 / a1**2)

    def dp(u):
        a1, a2, a3 = model.da(u), model.d2a(u), model.d3a(u)
        _require_nondegenerate(a1)
        return -beta * a2 / (2.0 * a1**2) - 0.3 * alpha**2 * (a3 / a1**3 - 3.0 * a2**2 / a1**4)

    return PerturbationData(c, dc, d2c, p, dp, s_fn)


# --- Hamiltonian quantities -----------------------------------------------------


def hamiltonian_density(u, u_x, u_xx, eps_scalar: float, model: FluxModel,
                        pert: PerturbationData):
    """Normal-form density ``h~(u; u_x, u_xx, eps)`` through order eps^4."""
    h = model.h(u)
    if eps_scalar == 0.0:
        return h
    h3, h4, h5, h6 = model.da(u), model.d2a(u), model.d3a(u), model.d4a(u)
    c, dc, d2c = pert.c(u), pert.dc(u), pert.d2c(u)
    p, dp, s = pert.p(u), pert.dp(u), pert.s_fn(u)
    e2 = eps_scalar**2
    quad = (p * h3 + 0.3 * c**2 * h4) * u_xx**2
    quart = (c * d2c / 8.0 * h4 + c * dc / 8.0 * h5 + c**2 / 24.0 * h6 + dp / 6.0 * h4
             + p / 6.0 * h5 - s * h3) * u_x**4
    return h - 0.5 * e2 * c * h3 * u_x**2 + e2 * e2 * (quad - quart)


def gkdv_invariants(f: Field, model: FluxModel, eps: DispersionParams):
    """``(mass, momentum, energy)`` by the periodic trapezoid rule."""
    dx = f.grid.spacing
    u = f.samples
    mass = dx * np.sum(u)
    momentum = 0.5 * dx * np.sum(u * u)
    density = np.asarray(model.h(u), dtype=float)
    for i, e in enumerate(eps.eps, start=1):
        if e:
            di = rfft_derivative(u, f.grid, i)
            density = density + (-1) ** i * 0.5 * e * di * di
    energy = dx * np.sum(density)
    return float(mass), float(momentum), float(energy)


def energy_variational_derivative(f: Field, model: FluxModel, eps: DispersionParams) -> Field:
    """``dE/du = h'(u) + sum_i eps_i d_x^{2i} u``."""
    out = np.asarray(model.dh(f.samples), dtype=float).copy()
    for i, e in enumerate(eps.eps, start=1):
        if e:
            out += e * rfft_derivative(f.samples, f.grid, 2 * i)
    return Field(f.grid, out)
