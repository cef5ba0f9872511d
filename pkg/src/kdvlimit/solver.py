"""Pseudospectral integration of ``u_t = a(u) u_x + sum_i eps_i d_x^{2i+1} u``.

The dispersive part is diagonal in Fourier space with a purely imaginary
symbol, so it is propagated exactly: IF-RK4 runs classical RK4 on the
integrating-factor variable ``exp(-t L) u_hat``; ETDRK4 uses the Cox-Matthews
scheme with coefficients averaged on a complex contour (Kassam-Trefethen).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    CFLViolationError,
    InvalidArgumentError,
    NonconvergenceError,
    SolverDivergenceError,
)
from .flux import DispersionParams, FluxModel, gkdv_invariants
from .spectral import Field, Grid, derivative_symbol

log = logging.getLogger(__name__)

SCHEMES = ("IF-RK4", "ETDRK4")
MOMENTUM_DRIFT_LIMIT = 1e-3
CONTOUR_POINTS = 32


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    scheme: str = "IF-RK4"
    dealiasing: bool = True
    cfl_safety: float = 0.5
    save_every: int | None = None  # None: only the initial and final states

    def __post_init__(self):
        if not self.dt > 0 or not self.t_end > 0:
            raise InvalidArgumentError("dt and t_end must be positive")
        if self.scheme not in SCHEMES:
            raise InvalidArgumentError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not 0 < self.cfl_safety <= 1:
            raise InvalidArgumentError("cfl_safety must lie in (0, 1]")
        if self.save_every is not None and self.save_every < 1:
            raise InvalidArgumentError("save_every must be a positive integer")


@dataclass
class Trajectory:
    grid: Grid
    times: np.ndarray
    states: np.ndarray  # shape (count, n_points)
    diagnostics: np.ndarray  # shape (count, 3): mass, momentum, energy
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def field(self, i: int) -> Field:
        return Field(self.grid, self.states[i])

    @property
    def final(self) -> Field:
        return self.field(-1)

    def drifts(self) -> dict:
        """Changes of the invariants over the trajectory: absolute mass, relative others."""
        d0, d1 = self.diagnostics[0], self.diagnostics
        rel = lambda col: float(np.max(np.abs(d1[:, col] - d0[col])) / max(abs(d0[col]), 1e-300))  # noqa: E731
        return {
            "mass": float(np.max(np.abs(d1[:, 0] - d0[0]))),
            "momentum": rel(1) if d0[1] else float(np.max(np.abs(d1[:, 1]))),
            "energy": rel(2) if d0[2] else float(np.max(np.abs(d1[:, 2]))),
        }

    def at(self, t: float) -> np.ndarray:
        """State at ``t`` by cubic Lagrange interpolation in time (4 nearest snapshots)."""
        times = self.times
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise InvalidArgumentError(f"t = {t} outside the stored range")
        if len(times) < 4:
            raise InvalidArgumentError("cubic interpolation needs at least 4 snapshots")
        j = int(np.searchsorted(times, t))
        start = min(max(j - 2, 0), len(times) - 4)
        nodes = times[start : start + 4]
        hit = np.flatnonzero(np.abs(nodes - t) <= 1e-14 * max(1.0, abs(t)))
        if hit.size:
            return self.states[start + hit[0]]
        out = np.zeros(self.grid.n_points)
        for a in range(4):
            w = 1.0
            for b in range(4):
                if a != b:
                    w *= (t - nodes[b]) / (nodes[a] - nodes[b])
            out += w * self.states[start + a]
        return out


def linear_symbol(grid: Grid, eps: DispersionParams) -> np.ndarray:
    """Symbol ``i sum_i eps_i (-1)^i k^{2i+1}`` on ``grid.wavenumbers``.

    The Nyquist entry is zero: odd derivatives vanish there on a real grid.
    """
    k = grid.wavenumbers
    sym = np.zeros(grid.n_points, dtype=complex)
    for i, e in enumerate(eps.eps, start=1):
        sym += 1j * e * (-1) ** i * k ** (2 * i + 1)
    sym[grid.n_points // 2] = 0.0
    return sym


def _rsymbol(grid: Grid, eps: DispersionParams) -> np.ndarray:
    return linear_symbol(grid, eps)[: grid.n_points // 2 + 1]


class _Rhs:
    """Nonlinear term ``a(u) u_x`` in rfft space, with divergence checks."""

    def __init__(self, grid: Grid, model: FluxModel, dealiasing: bool):
        self.grid = grid
        self.model = model
        self.ik = derivative_symbol(grid, 1)
        self.mask = grid.dealias_mask if dealiasing else None

    def __call__(self, v_hat: np.ndarray) -> np.ndarray:
        n = self.grid.n_points
        u = np.fft.irfft(v_hat, n=n)
        ux = np.fft.irfft(self.ik * v_hat, n=n)
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.fft.rfft(self.model.a(u) * ux)
        if self.mask is not None:
            out[~self.mask] = 0.0
        if not np.all(np.isfinite(out)):
            raise SolverDivergenceError("non-finite nonlinear term")
        return out


def nonlinear_term(f: Field, model: FluxModel, dealiasing: bool = True) -> Field:
    """``a(f) f_x`` evaluated pseudospectrally."""
    rhs = _Rhs(f.grid, model, dealiasing)
    return Field(f.grid, np.fft.irfft(rhs(np.fft.rfft(f.samples)), n=f.grid.n_points))


def _contour_coefficients(hL: np.ndarray, h: float):
    r = np.exp(2j * np.pi * (np.arange(1, CONTOUR_POINTS + 1) - 0.5) / CONTOUR_POINTS)
    z = hL[:, None] + r[None, :]
    ez = np.exp(z)
    Q = h * np.mean((np.exp(z / 2) - 1.0) / z, axis=1)
    f1 = h * np.mean((-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z**3, axis=1)
    f2 = h * np.mean((2.0 + z + ez * (z - 2.0)) / z**3, axis=1)
    f3 = h * np.mean((-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z**3, axis=1)
    return Q, f1, f2, f3


class _Stepper:
    def __init__(self, L: np.ndarray, rhs: _Rhs, scheme: str):
        self.L = L
        self.rhs = rhs
        self.scheme = scheme
        self._cache: dict[float, tuple] = {}

    def _coeffs(self, h: float):
        if h not in self._cache:
            E = np.exp(h * self.L)
            E2 = np.exp(0.5 * h * self.L)
            extra = _contour_coefficients(h * self.L, h) if self.scheme == "ETDRK4" else None
            self._cache[h] = (E, E2, extra)
        return self._cache[h]

    def step(self, v: np.ndarray, h: float, Nv: np.ndarray) -> np.ndarray:
        E, E2, extra = self._coeffs(h)
        N = self.rhs
        if self.scheme == "IF-RK4":
            k1 = h * Nv
            k2 = h * N(E2 * (v + 0.5 * k1))
            k3 = h * N(E2 * v + 0.5 * k2)
            k4 = h * N(E * v + E2 * k3)
            return E * v + (E * k1 + 2.0 * E2 * (k2 + k3) + k4) / 6.0
        Q, f1, f2, f3 = extra
        a = E2 * v + Q * Nv
        Na = N(a)
        b = E2 * v + Q * Na
        Nb = N(b)
        c = E2 * a + Q * (2.0 * Nb - Nv)
        Nc = N(c)
        return E * v + Nv * f1 + 2.0 * (Na + Nb) * f2 + Nc * f3


def _momentum(v_hat: np.ndarray, grid: Grid) -> float:
    c = v_hat / grid.n_points
    w = np.full(c.shape, 2.0)
    w[0] = w[-1] = 1.0
    return 0.5 * grid.length * float(np.sum(w * np.abs(c) ** 2))


def evolve(phi: Field, model: FluxModel, eps: DispersionParams, cfg: SolverConfig) -> Trajectory:
    """Integrate the gKdV Cauchy problem from ``phi`` to ``cfg.t_end``."""
    grid = phi.grid
    n = grid.n_points
    rhs = _Rhs(grid, model, cfg.dealiasing)
    stepper = _Stepper(_rsymbol(grid, eps), rhs, cfg.scheme)
    dx = grid.spacing

    n_full = int(np.floor(cfg.t_end / cfg.dt * (1.0 + 1e-12)))
    steps = [cfg.dt] * n_full
    rest = cfg.t_end - n_full * cfg.dt
    if rest > 1e-12 * cfg.t_end:
        steps.append(rest)

    times, states, diags = [0.0], [phi.samples.copy()], [gkdv_invariants(phi, model, eps)]
    v = np.fft.rfft(phi.samples)
    p0 = _momentum(v, grid)
    t = 0.0
    for i, h in enumerate(steps, start=1):
        u = np.fft.irfft(v, n=n)
        amax = float(np.max(np.abs(model.a(u))))
        if amax > 0 and h > cfg.cfl_safety * dx / amax:
            raise CFLViolationError(
                f"dt = {h:g} exceeds CFL limit {cfg.cfl_safety * dx / amax:g} at t = {t:g}"
            )
        try:
            v_new = stepper.step(v, h, rhs(v))
        except SolverDivergenceError as exc:
            raise SolverDivergenceError(str(exc), last_valid_time=t) from None
        if not np.all(np.isfinite(v_new)):
            raise SolverDivergenceError("non-finite state", last_valid_time=t)
        p = _momentum(v_new, grid)
        if abs(p - p0) > MOMENTUM_DRIFT_LIMIT * (abs(p0) if p0 else 1.0):
            raise SolverDivergenceError(
                f"momentum drift {abs(p - p0):.3e} exceeds limit", last_valid_time=t
            )
        v = v_new
        t = cfg.t_end if i == len(steps) else i * cfg.dt
        if i == len(steps) or (cfg.save_every and i % cfg.save_every == 0):
            f = Field(grid, np.fft.irfft(v, n=n))
            times.append(t)
            states.append(f.samples.copy())
            diags.append(gkdv_invariants(f, model, eps))
    return Trajectory(grid, np.array(times), np.array(states), np.array(diags),
                      meta={"scheme": cfg.scheme, "dt": cfg.dt, "steps": len(steps)})


def evolve_with_error_control(phi: Field, model: FluxModel, eps: DispersionParams,
                              cfg: SolverConfig, tol: float, max_halvings: int = 8) -> Trajectory:
    """Step-doubling control: halve ``dt`` until two runs agree to ``tol`` in L2.

    Returns the finer run of the first agreeing pair.  ``meta["halvings"]``
    counts reductions beyond the initial pair and ``meta["error_estimate"]``
    is the L2 distance of the pair.
    """
    coarse = evolve(phi, model, eps, cfg)
    dt = cfg.dt
    diff = np.inf
    for halvings in range(max_halvings + 1):
        dt *= 0.5
        save = cfg.save_every * 2 ** (halvings + 1) if cfg.save_every else None
        fine = evolve(phi, model, eps, replace(cfg, dt=dt, save_every=save))
        diff = float(np.sqrt(phi.grid.spacing * np.sum((fine.states[-1] - coarse.states[-1]) ** 2)))
        log.debug("error control: dt=%g diff=%g", dt, diff)
        if diff < tol:
            fine.meta.update(halvings=halvings, error_estimate=diff)
            return fine
        coarse = fine
    raise NonconvergenceError(
        f"no agreement to tol={tol:g} after {max_halvings} halvings (last diff {diff:.3e})"
    )
