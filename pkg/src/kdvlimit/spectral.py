"""Periodic Fourier grid, spectral differentiation and Sobolev norms.

All transforms use the real FFT.  Spectral coefficients are *amplitude*
normalised (``rfft(f) / n``) so that ``f_j = sum_m c_m exp(i k_m x_j)``.

A real grid function cannot carry an odd derivative in its Nyquist mode, so
every multiplier is applied with the rule that the Nyquist coefficient is
scaled by the real part of the symbol.  For ``(ik)**odd`` this zeroes the
mode; for even orders and for ``(1 + k**2)**(s/2)`` it is a no-op.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np

from .errors import InvalidArgumentError, SolverDivergenceError

MAX_DERIVATIVE_ORDER = 11


@dataclass(frozen=True)
class Grid:
    """Uniform sampling of ``[-length/2, length/2)`` with periodic wrap."""

    n_points: int
    length: float

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    @cached_property
    def x(self) -> np.ndarray:
        x = -0.5 * self.length + self.spacing * np.arange(self.n_points)
        x.flags.writeable = False
        return x

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Wavenumbers in transform ordering, Nyquist taken as ``+n/2``."""
        n = self.n_points
        m = np.concatenate([np.arange(0, n // 2 + 1), np.arange(-n // 2 + 1, 0)])
        k = 2.0 * np.pi * m / self.length
        k.flags.writeable = False
        return k

    @cached_property
    def rwavenumbers(self) -> np.ndarray:
        """Non-negative wavenumbers matching the ``rfft`` layout."""
        k = 2.0 * np.pi * np.arange(self.n_points // 2 + 1) / self.length
        k.flags.writeable = False
        return k

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        m = np.arange(self.n_points // 2 + 1)
        mask = 3 * m <= self.n_points
        mask.flags.writeable = False
        return mask


def make_grid(n_points: int, length: float) -> Grid:
    n_points_int = int(n_points)
    if n_points_int != n_points or n_points_int < 16:
        raise InvalidArgumentError(f"n_points must be an integer >= 16, got {n_points}")
    if n_points_int & (n_points_int - 1):
        raise InvalidArgumentError(f"n_points must be a power of two, got {n_points}")
    if not np.isfinite(length) or length <= 0:
        raise InvalidArgumentError(f"length must be positive, got {length}")
    return Grid(n_points_int, float(length))


def _check_finite(samples: np.ndarray) -> None:
    if not np.all(np.isfinite(samples)):
        raise SolverDivergenceError("field contains non-finite samples")


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a function on a :class:`Grid`.

    Samples are stored read-only; arithmetic returns new fields.
    """

    grid: Grid
    samples: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.shape != (self.grid.n_points,):
            raise InvalidArgumentError(
                f"expected {self.grid.n_points} samples, got shape {samples.shape}"
            )
        _check_finite(samples)
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_function(cls, grid: Grid, func) -> "Field":
        return cls(grid, func(grid.x))

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.n_points))

    def coefficients(self) -> np.ndarray:
        """Amplitude-normalised ``rfft`` coefficients."""
        return np.fft.rfft(self.samples) / self.grid.n_points

    def full_coefficients(self) -> np.ndarray:
        """Amplitude-normalised coefficients over all wavenumbers."""
        return np.fft.fft(self.samples) / self.grid.n_points

    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise InvalidArgumentError("fields live on different grids")
            return other.samples
        return other

    def __add__(self, other):
        return Field(self.grid, self.samples + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.samples - self._other(other))

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.samples)

    def __mul__(self, other):
        return Field(self.grid, self.samples * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.samples / self._other(other))

    def __neg__(self):
        return Field(self.grid, -self.samples)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.samples)))


# --- array-level kernels (used by the time steppers) -------------------------


def derivative_symbol(grid: Grid, order: int) -> np.ndarray:
    """``(ik)**order`` on the rfft layout with the Nyquist rule applied."""
    sym = (1j * grid.rwavenumbers) ** order
    sym[-1] = sym[-1].real
    return sym


def rfft_derivative(samples: np.ndarray, grid: Grid, order: int) -> np.ndarray:
    if order == 0:
        return np.array(samples, dtype=float)
    return np.fft.irfft(np.fft.rfft(samples) * derivative_symbol(grid, order), n=grid.n_points)


def spectral_tail_fraction(samples: np.ndarray, grid: Grid) -> float:
    """``||P_high f|| / ||f||`` where ``P_high`` keeps modes ``|m| > n/3``."""
    c = np.fft.rfft(samples)
    total = np.sum(np.abs(c) ** 2)
    if total == 0.0:
        return 0.0
    tail = np.sum(np.abs(c[~grid.dealias_mask]) ** 2)
    return float(np.sqrt(tail / total))


# --- public operations --------------------------------------------------------


def spectral_derivative(f: Field, order: int) -> Field:
    if order < 0 or order > MAX_DERIVATIVE_ORDER or int(order) != order:
        raise InvalidArgumentError(f"derivative order must be in 0..{MAX_DERIVATIVE_ORDER}")
    return Field(f.grid, rfft_derivative(f.samples, f.grid, int(order)))


def sobolev_norm(f: Field, s: float) -> float:
    """``||(1 - d_xx)^{s/2} f||_{L2}`` on the periodic box.

    At ``s = 0`` this is the trapezoid L2 norm ``sqrt(dx * sum f_j**2)``.
    """
    if not s >= 0:
        raise InvalidArgumentError(f"Sobolev index must be >= 0, got {s}")
    grid = f.grid
    c = f.coefficients()
    weights = np.full(c.shape, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    k = grid.rwavenumbers
    total = np.sum(weights * (1.0 + k * k) ** s * np.abs(c) ** 2) * grid.length
    return float(np.sqrt(total))


def l2_norm(f: Field) -> float:
    return float(np.sqrt(f.grid.spacing * np.sum(f.samples**2)))


def dealias(f: Field) -> Field:
    """Two-thirds rule: drop every mode with ``|m| > n/3``."""
    c = np.fft.rfft(f.samples)
    c[~f.grid.dealias_mask] = 0.0
    return Field(f.grid, np.fft.irfft(c, n=f.grid.n_points))


def apply_multiplier(f: Field, symbol, rtol: float = 1e-12) -> Field:
    """Multiply the spectrum of ``f`` by ``symbol`` (given on ``grid.wavenumbers``).

    ``symbol`` must be conjugate symmetric, ``symbol(-k) == conj(symbol(k))``,
    with a real zero mode.
    """
    grid = f.grid
    n = grid.n_points
    sym = np.asarray(symbol, dtype=complex)
    if sym.shape != (n,):
        raise InvalidArgumentError(f"symbol must have {n} entries, got shape {sym.shape}")
    scale = max(float(np.max(np.abs(sym))), 1e-300)
    pos = sym[1 : n // 2]
    neg = sym[n - 1 : n // 2 : -1]
    if not np.allclose(neg, np.conj(pos), rtol=rtol, atol=rtol * scale) or abs(
        sym[0].imag
    ) > rtol * scale:
        raise InvalidArgumentError("multiplier symbol is not conjugate symmetric")
    rsym = sym[: n // 2 + 1].copy()
    rsym[-1] = rsym[-1].real
    return Field(grid, np.fft.irfft(np.fft.rfft(f.samples) * rsym, n=n))


def lambda_symbol(grid: Grid, s: float) -> np.ndarray:
    """Symbol of ``(1 - d_xx)^{s/2}`` on ``grid.wavenumbers``."""
    k = grid.wavenumbers
    return (1.0 + k * k) ** (0.5 * s)


def trig_interpolate(f: Field, points, derivative: int = 0) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``f`` (or a derivative) anywhere.

    Direct summation, O(n * len(points)); the Nyquist term is taken as a cosine.
    """
    grid = f.grid
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    c = f.coefficients()
    k = grid.rwavenumbers
    weights = np.full(c.shape, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    if derivative % 2 == 1:
        weights[-1] = 0.0
    coeff = weights * c * (1j * k) ** derivative
    phase = np.exp(1j * np.outer(pts - grid.x[0], k))
    # c_m was computed relative to the first grid point x_0 = -L/2
    return np.real(phase @ coeff).reshape(np.shape(points))
