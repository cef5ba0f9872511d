"""Epsilon sweeps: remainders of the small-dispersion expansion and their orders.

A :class:`SweepPlan` fixes the model, initial datum, grid, evaluation time and
the list of dispersion parameters.  :func:`run_sweep` computes the expansion
coefficients once, evolves the full equation for every eps and measures

    r_m(eps) = || u(eps) - sum_{k <= m} p^k v^k ||_{H^{max(s - 3m, 0)}},

where ``p = eps`` for a single dispersion term and ``p = eps^2`` on the
two-term path ``(eps_1, eps_2) = (alpha eps^2, beta eps^4)``.
"""

from __future__ import annotations

import json
import logging
import math
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import InvalidArgumentError, NumericalFailure, PastBreakingError
from .flux import DispersionParams, get_model, mapped_perturbation
from .hopf import DEFAULT_TIME_CAP, critical_time, solve_hopf
from .initial_data import make_datum
from .solver import SolverConfig, evolve
from .spectral import Field, l2_norm, make_grid, sobolev_norm
from .transport import ExpansionCoefficients, kdv_hierarchy, v1_closed_form

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

FIT_POINTS = 4
RESOLUTION_POINTS_PER_SCALE = 8


def _default_eps():
    return tuple(1e-2 / 2**j for j in range(6))


@dataclass(frozen=True)
class SweepPlan:
    model_name: str = "kdv"
    phi_spec: Mapping[str, Any] = field(default_factory=lambda: {"kind": "gaussian", "amp": 1.0,
                                                                  "width": 2.0})
    eps_values: tuple[float, ...] = field(default_factory=_default_eps)
    n_dispersion: int = 1
    direction: tuple[float, float] = (1.0, 1.0)  # (alpha, beta), used when n_dispersion == 2
    expansion_order: int = 0
    sobolev_s: float = 3.0
    t_eval: float | None = None  # None: half the critical time
    grid: tuple[int, float] = (2048, 40.0)
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(dt=1e-3, t_end=1.0))
    model_coeffs: tuple[float, ...] | None = None
    resolution_override: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "eps_values", tuple(float(e) for e in self.eps_values))
        object.__setattr__(self, "direction", tuple(float(d) for d in self.direction))
        object.__setattr__(self, "grid", (int(self.grid[0]), float(self.grid[1])))
        object.__setattr__(self, "phi_spec", dict(self.phi_spec))
        if self.model_coeffs is not None:
            object.__setattr__(self, "model_coeffs", tuple(float(c) for c in self.model_coeffs))

    def dispersion(self, eps: float) -> DispersionParams:
        if self.n_dispersion == 1:
            return DispersionParams((eps,))
        alpha, beta = self.direction
        return DispersionParams.along_path(eps, alpha, beta)

    def expansion_parameter(self, eps: float) -> float:
        return eps if self.n_dispersion == 1 else eps * eps

    def to_mapping(self) -> dict:
        out = {}
        for key, value in asdict(self).items():
            if key == "solver":
                value = {k: v for k, v in value.items() if k != "t_end"}
            elif key == "grid":
                value = {"n_points": value[0], "length": value[1]}
            if isinstance(value, tuple):
                value = list(value)
            out[key] = value
        return out


def validate_plan(plan: SweepPlan) -> float:
    """Check a plan and return the evaluation time it resolves to."""
    eps = np.asarray(plan.eps_values)
    if eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise InvalidArgumentError("eps_values must be positive and strictly descending")
    if plan.n_dispersion not in (1, 2):
        raise InvalidArgumentError("n_dispersion must be 1 or 2")
    if plan.expansion_order < 0:
        raise InvalidArgumentError("expansion_order must be non-negative")
    if plan.workers < 1:
        raise InvalidArgumentError("workers must be at least 1")
    if plan.expansion_order >= 2 and (plan.n_dispersion != 1 or not _is_kdv(plan)):
        raise InvalidArgumentError("coefficients beyond v^1 are only available for KdV")
    if plan.sobolev_s < 0:
        raise InvalidArgumentError("sobolev_s must be non-negative")
    budget = math.floor(plan.sobolev_s / 3.0 - 1.0)
    if plan.expansion_order > max(budget, 0):
        warnings.warn(f"expansion_order {plan.expansion_order} exceeds the regularity budget "
                      f"{max(budget, 0)} for s = {plan.sobolev_s}", stacklevel=2)

    grid = make_grid(*plan.grid)
    if not plan.resolution_override:
        scale = min(_dispersive_scale(plan.dispersion(e)) for e in plan.eps_values)
        if scale < RESOLUTION_POINTS_PER_SCALE * grid.spacing:
            raise InvalidArgumentError(
                f"dispersive scale {scale:.3g} is below {RESOLUTION_POINTS_PER_SCALE} grid "
                f"spacings ({grid.spacing:.3g}); refine the grid or set resolution_override"
            )

    datum = make_datum(**plan.phi_spec)
    tc = critical_time(datum, _model(plan), grid).t_c
    t = 0.5 * tc if plan.t_eval is None else float(plan.t_eval)
    if not np.isfinite(t) or t <= 0:
        raise InvalidArgumentError("t_eval must be given explicitly when t_c is infinite")
    if t >= tc:
        raise PastBreakingError(f"t_eval = {t:g} is not below t_c = {tc:g}")
    if t > DEFAULT_TIME_CAP * tc:
        warnings.warn(f"t_eval = {t:g} is within {1 - DEFAULT_TIME_CAP:.0%} of t_c; expansion "
                      "constants grow and tolerances should be relaxed", stacklevel=2)
    return t


def _dispersive_scale(eps: DispersionParams) -> float:
    scales = [abs(e) ** (1.0 / (2 * i)) for i, e in enumerate(eps.eps, start=1) if e]
    return max(scales) if scales else np.inf


def _is_kdv(plan: SweepPlan) -> bool:
    if plan.model_coeffs is not None:
        return tuple(np.trim_zeros(plan.model_coeffs, "b")) == (0.0, 1.0)
    return plan.model_name == "kdv"


def _model(plan: SweepPlan):
    return get_model(plan.model_name, plan.model_coeffs)


# --- report ---------------------------------------------------------------------------


@dataclass
class ExpansionReport:
    plan_echo: dict
    rows: list[dict]
    fitted_orders: dict[str, float]
    diagnostics: dict

    @property
    def eps(self) -> np.ndarray:
        return np.array([row["eps"] for row in self.rows])

    def remainders(self, m: int, norm: str = "sobolev") -> np.ndarray:
        key = "remainders" if norm == "sobolev" else "remainders_l2"
        return np.array([row[key][f"m{m}"] for row in self.rows])

    def to_dict(self) -> dict:
        return {
            "plan_echo": self.plan_echo,
            "rows": self.rows,
            "fitted_orders": self.fitted_orders,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)


def fit_order(eps: Sequence[float], errs: Sequence[float]) -> float:
    """Least-squares slope of ``log err`` against ``log eps`` over the smallest eps.

    Uses the ``FIT_POINTS`` smallest values (all if fewer).  A zero error
    returns ``+inf`` as a sentinel: the remainder vanishes to working precision.
    """
    eps = np.asarray(eps, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if eps.shape != errs.shape or eps.size < 2:
        raise InvalidArgumentError("fit_order needs at least two (eps, err) pairs")
    if np.any(eps <= 0) or np.any(errs < 0):
        raise InvalidArgumentError("eps must be positive and errors non-negative")
    order = np.argsort(eps)[:FIT_POINTS]
    if np.any(errs[order] == 0):
        return math.inf
    slope = np.polyfit(np.log(eps[order]), np.log(errs[order]), 1)[0]
    return float(slope)


# --- sweeps -------------------------------------------------------------------------


def expansion_coefficients(plan: SweepPlan, t: float) -> ExpansionCoefficients:
    """``v^0 .. v^N`` at ``t`` in the bookkeeping of :meth:`SweepPlan.expansion_parameter`."""
    grid = make_grid(*plan.grid)
    datum = make_datum(**plan.phi_spec)
    model = _model(plan)
    order = plan.expansion_order
    if order >= 2:
        coeffs, _ = kdv_hierarchy(datum, grid, order, t, plan.solver.dt,
                                  sobolev_budget=plan.sobolev_s)
        return coeffs
    sol = solve_hopf(datum, model, t, grid)
    fields = [sol.v0]
    if order == 1:
        alpha = 1.0 if plan.n_dispersion == 1 else plan.direction[0]
        pert = mapped_perturbation(alpha, 0.0, model)
        fields.append(v1_closed_form(sol, model, pert, route="analytic"))
    return ExpansionCoefficients(t, tuple(fields), plan.sobolev_s)


def _evolve_one(plan: SweepPlan, eps: float, t: float):
    grid = make_grid(*plan.grid)
    phi = make_datum(**plan.phi_spec).sample(grid)
    cfg = replace(plan.solver, t_end=t)
    start = time.perf_counter()
    try:
        traj = evolve(phi, _model(plan), plan.dispersion(eps), cfg)
    except NumericalFailure as exc:
        exc.eps = eps
        raise
    return traj.final.samples, traj.drifts(), time.perf_counter() - start


def _evolve_all(plan: SweepPlan, t: float):
    if plan.workers == 1 or len(plan.eps_values) == 1:
        return [_evolve_one(plan, e, t) for e in plan.eps_values]
    with ProcessPoolExecutor(max_workers=plan.workers) as pool:
        futures = [pool.submit(_evolve_one, plan, e, t) for e in plan.eps_values]
        return [f.result() for f in futures]


def run_sweep(plan: SweepPlan, include_runtimes: bool = False) -> ExpansionReport:
    """Remainders ``r_0 .. r_N`` for every eps of the plan, with fitted orders."""
    t = validate_plan(plan)
    grid = make_grid(*plan.grid)
    start = time.perf_counter()
    coeffs = expansion_coefficients(plan, t)
    coeff_time = time.perf_counter() - start
    results = _evolve_all(plan, t)

    N = plan.expansion_order
    rows, drifts, runtimes = [], [], []
    for eps, (samples, drift, runtime) in zip(plan.eps_values, results):
        u = Field(grid, samples)
        p = plan.expansion_parameter(eps)
        partial = coeffs.fields[0]
        rem, rem_l2, idx = {}, {}, {}
        for m in range(N + 1):
            if m:
                partial = partial + p**m * coeffs.fields[m]
            r = u - partial
            index = max(plan.sobolev_s - 3 * m, 0.0)
            rem[f"m{m}"] = sobolev_norm(r, index)
            rem_l2[f"m{m}"] = l2_norm(r)
            idx[f"m{m}"] = index
        rows.append({"eps": eps, "remainders": rem, "remainders_l2": rem_l2,
                     "sobolev_indices": idx})
        drifts.append({"eps": eps, **drift})
        runtimes.append(runtime)

    fitted = {}
    if len(rows) >= 2:
        params = [plan.expansion_parameter(e) for e in plan.eps_values]
        for m in range(N + 1):
            fitted[f"m{m}"] = fit_order(params, [row["remainders"][f"m{m}"] for row in rows])

    tc = critical_time(make_datum(**plan.phi_spec), _model(plan), grid).t_c
    diagnostics = {
        "t_eval": t,
        "t_c": tc,
        "fit_parameter": "eps" if plan.n_dispersion == 1 else "eps^2",
        "path": None if plan.n_dispersion == 1 else {"alpha": plan.direction[0],
                                                      "beta": plan.direction[1]},
        "conservation": drifts,
    }
    if include_runtimes:
        diagnostics["runtimes"] = {"coefficients": coeff_time, "evolve": runtimes}
    return ExpansionReport(plan.to_mapping(), rows, fitted, diagnostics)


def run_continuity_check(plan: SweepPlan, include_runtimes: bool = False) -> ExpansionReport:
    """``||u(eps) - v^0||_{H^s}`` along the two-term path, with its fitted order."""
    if plan.n_dispersion != 2:
        raise InvalidArgumentError("the continuity check runs on the two-term path (n_dispersion = 2)")
    report = run_sweep(replace(plan, expansion_order=0), include_runtimes)
    norms = report.remainders(0)
    report.diagnostics["strictly_decreasing"] = bool(np.all(np.diff(norms) < 0))
    return report


# --- configuration ------------------------------------------------------------------

_SOLVER_KEYS = {"dt", "scheme", "dealiasing", "cfl_safety", "save_every"}
_SCALAR_KEYS = {"model_name", "eps_values", "n_dispersion", "direction", "expansion_order",
                "sobolev_s", "t_eval", "model_coeffs", "resolution_override", "workers"}


def _flatten(table: Mapping, prefix: str = "") -> dict:
    out = {}
    for key, value in table.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def plan_from_mapping(data: Mapping) -> SweepPlan:
    """Build a plan from flat dotted keys (``phi.kind``, ``grid.n_points``, ``solver.dt``)."""
    flat = _flatten(data)
    kwargs: dict[str, Any] = {}
    phi: dict[str, Any] = {}
    grid = dict(n_points=SweepPlan().grid[0], length=SweepPlan().grid[1])
    solver: dict[str, Any] = {}
    for key, value in flat.items():
        head, _, tail = key.partition(".")
        if head in ("phi", "phi_spec") and tail:
            phi[tail] = value
        elif head == "grid" and tail in grid:
            grid[tail] = value
        elif head == "solver" and tail in _SOLVER_KEYS:
            solver[tail] = value
        elif key in _SCALAR_KEYS:
            kwargs[key] = value
        else:
            raise InvalidArgumentError(f"unknown plan key {key!r}")
    if phi:
        if "kind" not in phi:
            raise InvalidArgumentError("phi.kind is required when phi parameters are given")
        kwargs["phi_spec"] = phi
    kwargs["grid"] = (grid["n_points"], grid["length"])
    if solver:
        kwargs["solver"] = SolverConfig(t_end=1.0, **{"dt": 1e-3, **solver})
    try:
        return SweepPlan(**kwargs)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"invalid plan: {exc}") from None


def load_plan(path) -> SweepPlan:
    """Read a TOML plan file.  ``OSError`` propagates for missing files."""
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise InvalidArgumentError(f"cannot parse {path}: {exc}") from None
    return plan_from_mapping(data)


def kdv_default_plan(**overrides) -> SweepPlan:
    """Gaussian KdV plan used by the acceptance checks (override-able)."""
    base = SweepPlan(resolution_override=True)
    return replace(base, **overrides)


__all__ = [
    "ExpansionReport",
    "SweepPlan",
    "expansion_coefficients",
    "fit_order",
    "kdv_default_plan",
    "load_plan",
    "plan_from_mapping",
    "run_continuity_check",
    "run_sweep",
    "validate_plan",
]
