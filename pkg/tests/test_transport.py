from types import SimpleNamespace

import numpy as np
import pytest

from kdvlimit.errors import DomainError, NonmonotoneDataError, PastBreakingError, ResolutionError
from kdvlimit.flux import (
    constant_perturbation,
    kdv_model,
    mapped_perturbation,
    polynomial_perturbation,
    quadratic_model,
)
from kdvlimit.hopf import HopfFlow, characteristics, critical_time, solve_hopf
from kdvlimit.initial_data import gaussian, neg_sine, tanh_profile
from kdvlimit.spectral import Field, l2_norm, make_grid
from kdvlimit.transport import (
    ExpansionCoefficients,
    kdv_hierarchy,
    ktilde_functional,
    ktilde_v1,
    solve_transport_general,
    solve_transport_kdv,
    taylor_reconstruct,
    tr1_residual_points,
    v1_closed_form,
    v1_closed_form_points,
    v1_monotone_formula,
    v1_monotone_points,
)

KDV = kdv_model()
ONE = constant_perturbation(1.0)


def rel(a, b):
    return l2_norm(a - b) / l2_norm(b)


@pytest.fixture(scope="module")
def gauss_setup():
    g = make_grid(1024, 40.0)
    phi = gaussian(amp=1.0, width=2.0)
    return g, phi, critical_time(phi, KDV, g).t_c


class TestClosedForm:
    def test_zero_at_initial_time(self, gauss_setup):
        g, phi, _ = gauss_setup
        sol = solve_hopf(phi, KDV, 0.0, g)
        for route in ("spectral", "analytic"):
            assert np.all(v1_closed_form(sol, KDV, ONE, route=route).samples == 0.0)

    def test_constant_data(self):
        g = make_grid(64, 10.0)
        sol = solve_hopf(gaussian(amp=0.0, offset=0.4), KDV, 0.7, g)
        assert v1_closed_form(sol, KDV, ONE).max_abs() == 0.0

    def test_routes_agree(self, gauss_setup):
        g, phi, tc = gauss_setup
        sol = solve_hopf(phi, KDV, 0.5 * tc, g)
        pert = polynomial_perturbation([0.5, 1.0])
        a = v1_closed_form(sol, KDV, pert, route="spectral")
        b = v1_closed_form(sol, KDV, pert, route="analytic")
        assert rel(a, b) < 1e-10

    def test_zero_mass(self, gauss_setup):
        g, phi, tc = gauss_setup
        for frac in (0.2, 0.6, 0.9):
            v1 = v1_closed_form(solve_hopf(phi, KDV, frac * tc, g), KDV, ONE)
            assert abs(g.spacing * np.sum(v1.samples)) < 1e-12

    def test_breaking_guard(self):
        sol = SimpleNamespace(t=1.0, v0=np.zeros(3), v0_x=np.array([-2.0, 0.0, 0.0]),
                              v0_xx=np.zeros(3), v0_xxx=np.zeros(3))
        with pytest.raises(PastBreakingError):
            v1_closed_form_points(sol, KDV, ONE)

    def test_transport_residual_second_order(self):
        phi, t = gaussian(), 0.5
        x = np.linspace(-4, 4, 33)
        res = [np.max(np.abs(tr1_residual_points(lambda p: v1_closed_form_points(p, KDV, ONE),
                                                 phi, KDV, ONE, t, x, d))) for d in (2e-3, 1e-3)]
        assert res[0] / res[1] == pytest.approx(4.0, rel=0.05)


class TestMonotoneFormula:
    def test_linear_profile(self):
        pts = SimpleNamespace(v0=np.zeros(4), v0_x=np.ones(4), v0_xx=np.zeros(4), v0_xxx=np.zeros(4))
        assert np.all(v1_monotone_points(pts, ONE) == 0.0)

    def test_nonmonotone_rejected(self):
        sol = solve_hopf(neg_sine(), KDV, 0.5, make_grid(64, 2 * np.pi))
        with pytest.raises(NonmonotoneDataError):
            v1_monotone_formula(sol, ONE)

    def test_nonzero_initial_value(self):
        g = make_grid(256, 10.0)
        sol = solve_hopf(tanh_profile(), KDV, 0.0, g)
        assert v1_monotone_formula(sol, ONE).max_abs() > 0.5

    def test_residual_second_order(self):
        phi = tanh_profile()
        x = np.linspace(-4, 4, 33)
        res = [np.max(np.abs(tr1_residual_points(lambda p: v1_monotone_points(p, ONE),
                                                 phi, KDV, ONE, 0.5, x, d))) for d in (2e-3, 1e-3)]
        assert res[0] / res[1] == pytest.approx(4.0, rel=0.05)

    def test_differs_from_closed_form_at_start(self):
        x = np.linspace(-3, 3, 25)
        pts = characteristics(tanh_profile(), KDV, 0.0, x)
        gap = v1_monotone_points(pts, ONE) - v1_closed_form_points(pts, KDV, ONE)
        assert np.max(np.abs(gap)) > 0.5


class TestKtilde:
    def test_zero_time_and_constant(self):
        g = make_grid(128, 2 * np.pi)
        f = Field.from_function(g, lambda x: 0.5 * np.sin(x))
        assert ktilde_functional(f, 0.0, KDV, ONE) == 0.0
        assert ktilde_functional(Field(g, np.full(128, 0.3)), 0.7, KDV, ONE) == 0.0

    def test_domain(self):
        g = make_grid(64, 2 * np.pi)
        with pytest.raises(DomainError):
            ktilde_functional(Field.from_function(g, lambda x: 2 * np.sin(x)), 1.0, KDV, ONE)

    @pytest.mark.parametrize("pert", [constant_perturbation(1.0), polynomial_perturbation([0.5, 1.0])])
    def test_variation_gives_first_correction(self, pert):
        # the spectral route needs periodic data: v0 is differentiated three times
        g = make_grid(256, 2 * np.pi)
        phi = neg_sine(amp=0.5, offset=1.5)
        t = 0.5 * critical_time(phi, KDV, g).t_c
        sol = solve_hopf(phi, KDV, t, g)
        assert rel(ktilde_v1(sol.v0, t, KDV, pert), v1_closed_form(sol, KDV, pert)) < 1e-6


class TestNumericalTransport:
    def test_zero_forcing(self, gauss_setup):
        g, phi, tc = gauss_setup
        traj = solve_transport_general(HopfFlow(phi, KDV, g), constant_perturbation(0.0), 0.5, 0.01)
        assert np.all(traj.states == 0.0)

    def test_starts_at_zero(self, gauss_setup):
        g, phi, tc = gauss_setup
        traj = solve_transport_kdv(1, [HopfFlow(phi, KDV, g)], g, 0.1, 0.01)
        assert np.all(traj.states[0] == 0.0)

    def test_kdv_first_order(self, gauss_setup):
        _, phi, tc = gauss_setup
        g = make_grid(2048, 40.0)  # v0_xxx forcing at half the breaking time
        t = 0.5 * tc
        traj = solve_transport_kdv(1, [HopfFlow(phi, KDV, g)], g, t, 2e-3)
        ref = v1_closed_form(solve_hopf(phi, KDV, t, g), KDV, ONE)
        assert rel(traj.final, ref) < 1e-6

    def test_general_matches_kdv(self, gauss_setup):
        _, phi, tc = gauss_setup
        g = make_grid(2048, 40.0)
        t = 0.5 * tc
        a = solve_transport_kdv(1, [HopfFlow(phi, KDV, g)], g, t, 2e-3)
        b = solve_transport_general(HopfFlow(phi, KDV, g), ONE, t, 2e-3)
        assert np.max(np.abs(a.final.samples - b.final.samples)) < 1e-9

    def test_mapped_quadratic(self):
        g = make_grid(1024, 2 * np.pi)
        model = quadratic_model()
        phi = neg_sine(amp=0.5, offset=1.5)
        t = 0.5 * critical_time(phi, model, g).t_c
        pert = mapped_perturbation(1.0, 0.0, model)
        traj = solve_transport_general(HopfFlow(phi, model, g), pert, t, min(t / 400, 1.25e-3))
        assert rel(traj.final, v1_closed_form(solve_hopf(phi, model, t, g), model, pert)) < 1e-6

    def test_underresolved_forcing(self):
        g = make_grid(64, 30.0)
        with pytest.raises(ResolutionError):
            solve_transport_kdv(1, [HopfFlow(gaussian(), KDV, g)], g, 0.2, 0.01)


class TestHierarchy:
    def test_mirror_parity(self):
        # psi(x) = -phi(-x) gives v^k_psi(x) = (-1)^(k+1) v^k_phi(-x)
        g = make_grid(1024, 40.0)
        phi = gaussian(1.0, 2.0, center=0.5)
        psi = gaussian(-1.0, 2.0, center=-0.5)
        t = 0.25 * critical_time(phi, KDV, g).t_c
        a, _ = kdv_hierarchy(phi, g, 2, t, 2e-3)
        b, _ = kdv_hierarchy(psi, g, 2, t, 2e-3)
        for k in range(3):
            mirrored = np.roll(a.fields[k].samples[::-1], 1)
            assert np.max(np.abs(b.fields[k].samples - (-1) ** (k + 1) * mirrored)) < 1e-10

    def test_transport_route_for_v1(self, gauss_setup):
        g, phi, tc = gauss_setup
        t = 0.3 * tc
        a, _ = kdv_hierarchy(phi, g, 1, t, 2e-3)
        b, trajs = kdv_hierarchy(phi, g, 1, t, 2e-3, v1_route="transport")
        assert rel(b.fields[1], a.fields[1]) < 1e-6
        assert np.all(trajs[1].states[0] == 0.0)


class TestReconstruct:
    def _coeffs(self):
        g = make_grid(32, 2 * np.pi)
        fields = tuple(Field.from_function(g, lambda x, k=k: np.sin((k + 1) * x)) for k in range(3))
        return ExpansionCoefficients(0.5, fields, sobolev_budget=9.0)

    def test_zero_eps(self):
        c = self._coeffs()
        assert np.array_equal(taylor_reconstruct(c, 0.0).samples, c.fields[0].samples)

    def test_order_zero(self):
        c = self._coeffs()
        c0 = ExpansionCoefficients(0.5, c.fields[:1])
        assert np.array_equal(taylor_reconstruct(c0, 0.3).samples, c.fields[0].samples)

    def test_linear_in_coefficients(self):
        c = self._coeffs()
        doubled = ExpansionCoefficients(0.5, (c.fields[0], 2 * c.fields[1], c.fields[2]))
        diff = taylor_reconstruct(doubled, 0.1) - taylor_reconstruct(c, 0.1)
        assert np.allclose(diff.samples, 0.1 * c.fields[1].samples, atol=1e-15)

    def test_budget(self):
        c = self._coeffs()
        assert c.order == 2 and c.sobolev_index(2) == 3.0
