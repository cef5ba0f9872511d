import json
import math
from dataclasses import replace

import numpy as np
import pytest

from kdvlimit.errors import InvalidArgumentError, PastBreakingError
from kdvlimit.harness import (
    SweepPlan,
    fit_order,
    load_plan,
    plan_from_mapping,
    run_continuity_check,
    run_sweep,
    validate_plan,
)
from kdvlimit.solver import SolverConfig

SMALL = SweepPlan(
    phi_spec={"kind": "gaussian", "amp": 1.0, "width": 2.0},
    eps_values=(0.01, 0.005, 0.0025, 0.00125),
    grid=(1024, 40.0),
    solver=SolverConfig(dt=4e-3, t_end=1.0),
    expansion_order=1,
    sobolev_s=3.0,
    resolution_override=True,
)


@pytest.fixture(scope="module")
def small_report():
    return run_sweep(SMALL)


class TestFitOrder:
    @pytest.mark.parametrize("p", [1.0, 3.0, 0.5])
    def test_power_laws(self, p):
        eps = 1e-2 / 2.0 ** np.arange(6)
        assert fit_order(eps, 7.0 * eps**p) == pytest.approx(p, abs=1e-12)

    def test_wobbly_power_law(self):
        eps = 1e-2 / 2.0 ** np.arange(6)
        errs = 3.0 * eps**2 * (1 + 0.05 * np.sin(np.log(eps)))
        assert 1.9 <= fit_order(eps, errs) <= 2.1

    def test_uses_smallest_four(self):
        eps = np.array([1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125])
        errs = eps**2
        errs[:2] = 1.0  # pre-asymptotic values are ignored
        assert fit_order(eps, errs) == pytest.approx(2.0)

    def test_zero_error_sentinel(self):
        assert fit_order([0.1, 0.05], [1e-3, 0.0]) == math.inf

    @pytest.mark.parametrize("eps,errs", [([0.1], [1.0]), ([0.1, -0.05], [1.0, 0.5]),
                                          ([0.1, 0.05], [1.0])])
    def test_bad_input(self, eps, errs):
        with pytest.raises(InvalidArgumentError):
            fit_order(eps, errs)


class TestValidation:
    def test_default_time(self):
        t = validate_plan(SMALL)
        assert t == pytest.approx(0.5 * 2.0 / np.sqrt(2.0 / np.e), rel=1e-9)

    @pytest.mark.parametrize("change", [
        dict(eps_values=(0.01, 0.02)),
        dict(eps_values=(0.01, -0.02)),
        dict(n_dispersion=3),
        dict(expansion_order=-1),
        dict(workers=0),
        dict(sobolev_s=-1.0),
    ])
    def test_invalid(self, change):
        with pytest.raises(InvalidArgumentError):
            validate_plan(replace(SMALL, **change))

    def test_past_breaking(self):
        with pytest.raises(PastBreakingError):
            validate_plan(replace(SMALL, t_eval=5.0))

    def test_near_breaking_warns(self):
        tc = 2.0 * validate_plan(SMALL)
        with pytest.warns(UserWarning, match="t_c"):
            assert validate_plan(replace(SMALL, t_eval=0.98 * tc)) == pytest.approx(0.98 * tc)

    def test_resolution_rule(self):
        with pytest.raises(InvalidArgumentError, match="resolution_override"):
            validate_plan(replace(SMALL, resolution_override=False))
        validate_plan(replace(SMALL, resolution_override=False, eps_values=(4.0, 2.0)))

    def test_higher_order_needs_kdv(self):
        with pytest.raises(InvalidArgumentError):
            validate_plan(replace(SMALL, model_name="quadratic", expansion_order=2))

    def test_budget_warning(self):
        with pytest.warns(UserWarning, match="regularity budget"):
            validate_plan(replace(SMALL, expansion_order=2))

    def test_infinite_breaking_time_needs_t_eval(self):
        plan = replace(SMALL, phi_spec={"kind": "tanh", "amp": -1.0}, expansion_order=0)
        with pytest.raises(InvalidArgumentError):
            validate_plan(plan)
        assert validate_plan(replace(plan, t_eval=0.5)) == 0.5


class TestSweep:
    def test_schema(self, small_report):
        d = small_report.to_dict()
        assert list(d) == ["plan_echo", "rows", "fitted_orders", "diagnostics"]
        assert list(d["fitted_orders"]) == ["m0", "m1"]
        row = d["rows"][0]
        assert list(row) == ["eps", "remainders", "remainders_l2", "sobolev_indices"]
        assert row["sobolev_indices"] == {"m0": 3.0, "m1": 0.0}
        assert "runtimes" not in d["diagnostics"]
        json.loads(small_report.to_json())

    def test_orders(self, small_report):
        assert 0.7 < small_report.fitted_orders["m0"] < 1.3
        assert 1.6 < small_report.fitted_orders["m1"] < 2.4
        assert np.all(small_report.remainders(1) < small_report.remainders(0, norm="l2"))

    def test_deterministic(self, small_report):
        assert run_sweep(SMALL).to_json() == small_report.to_json()

    def test_parallel_matches_serial(self, small_report):
        assert run_sweep(replace(SMALL, workers=2)).rows == small_report.rows

    def test_single_eps(self):
        report = run_sweep(replace(SMALL, eps_values=(0.005,), expansion_order=0))
        assert report.fitted_orders == {}
        assert len(report.rows) == 1

    def test_runtimes_optional(self):
        report = run_sweep(replace(SMALL, eps_values=(0.005,), expansion_order=0),
                           include_runtimes=True)
        assert len(report.diagnostics["runtimes"]["evolve"]) == 1

    def test_general_flux_first_order(self):
        plan = replace(SMALL, model_name="quadratic",
                       phi_spec={"kind": "gaussian", "amp": 0.5, "width": 2.0, "offset": 1.0})
        report = run_sweep(plan)
        assert 1.6 < report.fitted_orders["m1"] < 2.4

    def test_failure_carries_eps(self):
        plan = replace(SMALL, solver=SolverConfig(dt=0.5, t_end=1.0), expansion_order=0)
        with pytest.raises(Exception) as info:
            run_sweep(plan)
        assert info.value.eps == 0.01


class TestContinuity:
    def test_requires_two_terms(self):
        with pytest.raises(InvalidArgumentError):
            run_continuity_check(SMALL)

    def test_beta_zero_is_kdv(self):
        eps = (0.1, 0.07, 0.05)
        path = replace(SMALL, n_dispersion=2, direction=(1.0, 0.0), eps_values=eps)
        kdv = replace(SMALL, eps_values=tuple(e * e for e in eps), expansion_order=0)
        a = run_continuity_check(path)
        b = run_sweep(kdv)
        assert np.allclose(a.remainders(0), b.remainders(0), rtol=1e-12)
        assert a.diagnostics["fit_parameter"] == "eps^2"
        assert a.diagnostics["strictly_decreasing"]


class TestConfig:
    def test_round_trip(self, tmp_path):
        text = """
model_name = "kdv"
phi.kind = "gaussian"
phi.amp = 1.0
phi.width = 2.0
eps_values = [0.08, 0.04]
expansion_order = 1
grid.n_points = 256
grid.length = 40.0
solver.dt = 0.005
solver.scheme = "ETDRK4"
resolution_override = true
"""
        path = tmp_path / "plan.toml"
        path.write_text(text)
        plan = load_plan(path)
        assert plan.phi_spec == {"kind": "gaussian", "amp": 1.0, "width": 2.0}
        assert plan.grid == (256, 40.0)
        assert plan.solver.scheme == "ETDRK4" and plan.solver.dt == 0.005
        assert plan_from_mapping(plan.to_mapping()) == plan

    @pytest.mark.parametrize("data", [{"colour": 1}, {"phi": {"amp": 1.0}},
                                      {"solver": {"scheme": "Euler"}}])
    def test_bad_mappings(self, data):
        with pytest.raises(InvalidArgumentError):
            plan_from_mapping(data)

    def test_parse_error(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("eps_values = [")
        with pytest.raises(InvalidArgumentError):
            load_plan(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_plan(tmp_path / "nope.toml")
