"""Named initial data with analytic derivatives up to third order."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError
from .spectral import Field, trig_interpolate


@dataclass(frozen=True)
class InitialDatum:
    """``phi`` and its first three derivatives as vectorised callables."""

    name: str
    derivs: tuple[Callable, Callable, Callable, Callable]
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.derivs[0](np.asarray(x, dtype=float))

    def d(self, order: int, x):
        return self.derivs[order](np.asarray(x, dtype=float))

    def sample(self, grid) -> Field:
        return Field(grid, self(grid.x))


def gaussian(amp: float = 1.0, width: float = 1.0, center: float = 0.0,
             offset: float = 0.0) -> InitialDatum:
    """``offset + amp * exp(-((x - center) / width)**2)``."""

    def z(x):
        return (x - center) / width

    def d0(x):
        return offset + amp * np.exp(-z(x) ** 2)

    def d1(x):
        zz = z(x)
        return amp * (-2.0 * zz) / width * np.exp(-zz * zz)

    def d2(x):
        zz = z(x)
        return amp * (4.0 * zz * zz - 2.0) / width**2 * np.exp(-zz * zz)

    def d3(x):
        zz = z(x)
        return amp * (12.0 * zz - 8.0 * zz**3) / width**3 * np.exp(-zz * zz)

    return InitialDatum("gaussian", (d0, d1, d2, d3),
                        dict(amp=amp, width=width, center=center, offset=offset))


def neg_sine(amp: float = 1.0, offset: float = 0.0, wavenumber: float = 1.0) -> InitialDatum:
    """``offset - amp * sin(wavenumber * x)``."""
    q = wavenumber
    derivs = (
        lambda x: offset - amp * np.sin(q * x),
        lambda x: -amp * q * np.cos(q * x),
        lambda x: amp * q**2 * np.sin(q * x),
        lambda x: amp * q**3 * np.cos(q * x),
    )
    return InitialDatum("neg_sine", derivs, dict(amp=amp, offset=offset, wavenumber=wavenumber))


def soliton(kappa: float = 1.0, eps1: float = 1.0, center: float = 0.0) -> InitialDatum:
    """KdV soliton profile ``12 eps1 kappa^2 sech^2(kappa (x - center))`` at ``t = 0``."""
    amp = 12.0 * eps1 * kappa**2

    def parts(x):
        T = np.tanh(kappa * (x - center))
        return T, 1.0 - T * T

    def d0(x):
        return amp * parts(x)[1]

    def d1(x):
        T, S = parts(x)
        return amp * (-2.0 * kappa * T * S)

    def d2(x):
        T, S = parts(x)
        return amp * (-2.0 * kappa**2 * S * (S - 2.0 * T * T))

    def d3(x):
        T, S = parts(x)
        return amp * kappa**3 * (16.0 * T * S * S - 8.0 * T**3 * S)

    return InitialDatum("soliton", (d0, d1, d2, d3), dict(kappa=kappa, eps1=eps1, center=center))


def tanh_profile(amp: float = -1.0, width: float = 1.0, center: float = 0.0,
                 offset: float = 0.0) -> InitialDatum:
    """Monotone ``offset + amp * tanh((x - center) / width)``."""

    def parts(x):
        T = np.tanh((x - center) / width)
        return T, 1.0 - T * T

    derivs = (
        lambda x: offset + amp * parts(x)[0],
        lambda x: amp * parts(x)[1] / width,
        lambda x: amp * (-2.0 * np.prod(parts(x), axis=0)) / width**2,
        lambda x: _tanh_d3(parts(x), amp, width),
    )
    return InitialDatum("tanh", derivs, dict(amp=amp, width=width, center=center, offset=offset))


def _tanh_d3(parts, amp, width):
    T, S = parts
    return -2.0 * amp * S * (S - 2.0 * T * T) / width**3


def from_samples(f: Field) -> InitialDatum:
    """Trigonometric interpolant of sampled data; derivatives are spectral."""
    derivs = tuple(
        (lambda order: lambda x: trig_interpolate(f, x, derivative=order))(k) for k in range(4)
    )
    return InitialDatum("samples", derivs)


DATUM_KINDS = {
    "gaussian": gaussian,
    "neg_sine": neg_sine,
    "soliton": soliton,
    "tanh": tanh_profile,
}


def make_datum(kind: str, **params) -> InitialDatum:
    try:
        factory = DATUM_KINDS[kind]
    except KeyError:
        raise InvalidArgumentError(f"unknown initial datum kind {kind!r}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise InvalidArgumentError(f"bad parameters for {kind!r}: {exc}") from None
