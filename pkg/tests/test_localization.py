"""Cutoffs, exponents, the closed-form iteration bound, measured energies.

Oracles here: a plain-Python hand quadrature of the localized energy for
constant states, and a direct recursion for the closed-form bound.  The
frozen desk constants (D = 1518.75, threshold ~1.21e-14) follow from
b = 3, R = 0.4, unit constants, and the exponent pack at lam = 1, j = 2.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degenstein.errors import DomainError, GeometryError
from degenstein.localization import (CutoffFamily, ExponentPack,
                                     de_giorgi_trace, default_j, empty_radius,
                                     energy_Y, estimate_T_prime, front_radius,
                                     front_series, lady_bound, lady_threshold,
                                     table_state_eval, time_to_threshold)
from degenstein.solver import EpsProblem, GridSpec, SolveTrace, solve

X0 = (0.5,)
R, RP = 0.4, 0.2


@pytest.fixture(scope="module")
def cutoffs():
    return CutoffFamily(x0=X0, R=R, Rp=RP)


@pytest.fixture(scope="module")
def desk_pack(cutoffs, beta1_table):
    return ExponentPack.build(cutoffs, N_dim=1, table=beta1_table)


def make_constant_trace(grid, prob, value, T=0.05, m=5):
    """Synthetic trace holding a constant field; enough structure for the
    energy quadrature."""
    times = np.linspace(0.0, T, m)
    fields = [np.full(grid.n, value) for _ in range(m)]
    return SolveTrace(grid=grid, prob=prob, times=times, fields=fields,
                      dissipation=np.zeros(m), dt_history=np.array([T / m]),
                      max_u_history=np.array([value]), boundary_transient=0.0,
                      n_steps=1)


class TestCutoffFamily:
    def test_radii_interpolate_R_to_Rp(self, cutoffs):
        assert cutoffs.b == pytest.approx(3.0)
        assert cutoffs.R_n(0) == pytest.approx(R)
        assert cutoffs.R_n(60) == pytest.approx(RP, rel=1e-12)
        radii = [cutoffs.R_n(n) for n in range(10)]
        assert np.all(np.diff(radii) < 0)

    def test_theta_plateaus(self, cutoffs, desk_grid):
        for n in (0, 2, 5):
            theta = cutoffs.theta(desk_grid, n)
            d = desk_grid.distance_to(X0)
            assert np.all((theta >= 0) & (theta <= 1))
            assert np.all(theta[d <= cutoffs.R_n(n + 1) - 1e-12] == 1.0)
            assert np.all(theta[d >= cutoffs.R_n(n) + 1e-12] == 0.0)

    def test_lipschitz_bound(self, cutoffs, desk_grid):
        h = desk_grid.h[0]
        for n in (0, 1, 4):
            theta = cutoffs.theta(desk_grid, n)
            slope = np.abs(np.diff(theta)) / h
            limit = cutoffs.b ** (n + 1) / R * (1 + h / R)
            assert slope.max() <= limit

    def test_geometry_error_outside_box(self, desk_grid):
        bad = CutoffFamily(x0=(0.9,), R=0.4, Rp=0.2)
        with pytest.raises(GeometryError):
            bad.theta(desk_grid, 0)

    def test_bad_radii(self):
        with pytest.raises(GeometryError):
            CutoffFamily(x0=(0.0,), R=0.2, Rp=0.4)


class TestExponentPack:
    def test_desk_constants_frozen(self, desk_pack):
        assert desk_pack.k == pytest.approx(0.2, rel=1e-14)
        assert desk_pack.beta_exp == pytest.approx(1.0, rel=1e-12)
        assert desk_pack.delta == pytest.approx(0.4, rel=1e-12)
        assert desk_pack.D == pytest.approx(1518.75, rel=1e-12)
        assert desk_pack.threshold == pytest.approx(1.2085610364491632e-14,
                                                    rel=1e-9)

    def test_default_j(self):
        assert default_j(1) == 2.0
        assert default_j(2) == 2.0
        assert default_j(3) == 2.0
        assert default_j(4) == pytest.approx(1.0)
        assert default_j(6) == pytest.approx(0.5)

    @settings(max_examples=100, deadline=None)
    @given(lam=st.floats(min_value=0.05, max_value=1.95),
           j=st.floats(min_value=0.05, max_value=4.0))
    def test_algebraic_identities(self, lam, j):
        pack = ExponentPack(N_dim=1, lam=lam, j=j, b=3.0, R=0.4)
        assert 0.0 < pack.k < 1.0
        assert (1.0 + j) * pack.k < 1.0
        assert pack.beta_exp > 0.0
        lhs = pack.beta_exp + 1.0 - (1.0 + j) * pack.k
        rhs = pack.beta_exp * (1.0 + pack.k * j)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_validation(self):
        with pytest.raises(DomainError):
            ExponentPack(N_dim=1, lam=2.5, j=2.0, b=3.0, R=0.4)
        with pytest.raises(DomainError):
            ExponentPack(N_dim=1, lam=1.0, j=2.0, b=1.5, R=0.4)


class TestLadyBound:
    def test_zero_start_is_absorbing(self):
        for n in (0, 1, 7, 20):
            assert lady_bound(2.0, 3.0, 0.4, 0.0, n) == 0.0

    def test_unit_parameters_frozen_squares(self):
        # c = b = 1, delta = 1: y_{n+1} = y_n^2, so y_n = 0.5^(2^n)
        for n in range(11):
            got = lady_bound(1.0, 1.0, 1.0, 0.5, n)
            assert got == pytest.approx(0.5 ** (2 ** n), rel=1e-12)

    def test_matches_log_space_recursion(self, rng):
        # Saturated recursion run in log space; iterates dive far into the
        # denormal range, where the plain float recursion loses digits.
        for _ in range(200):
            c = float(rng.uniform(0.1, 10.0))
            b = float(rng.uniform(1.0, 5.0))
            delta = float(rng.uniform(0.1, 2.0))
            y0 = float(rng.uniform(0.05, 1.0)) * lady_threshold(c, b, delta)
            log_y = math.log(y0)
            for n in range(1, 16):
                log_y = math.log(c) + (n - 1) * math.log(b) \
                    + (1.0 + delta) * log_y
                bound = lady_bound(c, b, delta, y0, n)
                log_bound = math.log(bound) if bound > 0 else -math.inf
                if log_y < -708.0:
                    # denormal territory: log spacing is ~ulp/value
                    assert bound == 0.0 or abs(log_bound - log_y) \
                        <= 1e-5 + 4.0 * (5e-324 / bound)
                else:
                    # exponents ~ (1+delta)^n ~ 1e7 round differently on the
                    # two paths; agreement to 1e-6 in log space
                    assert log_bound == pytest.approx(log_y, abs=1e-6)

    def test_threshold_decay(self, rng):
        for _ in range(50):
            c = float(rng.uniform(0.2, 5.0))
            b = float(rng.uniform(1.1, 4.0))
            delta = float(rng.uniform(0.15, 1.5))
            th = lady_threshold(c, b, delta)
            for n in range(21):
                assert lady_bound(c, b, delta, th, n) <= \
                    th * b ** (-n / delta) * (1 + 1e-6)

    def test_parameter_validation(self):
        with pytest.raises(DomainError):
            lady_bound(-1.0, 2.0, 0.5, 0.1, 3)
        with pytest.raises(DomainError):
            lady_bound(1.0, 2.0, 0.0, 0.1, 3)
        with pytest.raises(DomainError):
            lady_bound(1.0, 0.5, 0.5, 0.1, 3)
        with pytest.raises(DomainError):
            lady_bound(1.0, 2.0, 0.5, -0.1, 3)


class TestStateEval:
    def test_zero_maps_to_zero(self, beta1_table):
        u = np.array([0.0, -1.0, 0.5])
        out = table_state_eval(beta1_table, "H", u)
        assert out[0] == 0.0 and out[1] == 0.0
        assert out[2] == pytest.approx(0.5, rel=1e-10)

    def test_clamp_below_first_node(self, beta1_table):
        tiny = beta1_table.s_min / 10.0
        out = table_state_eval(beta1_table, "G", np.array([tiny]))
        ref = beta1_table.eval("G", beta1_table.s_min)
        assert out[0] == pytest.approx(ref)

    def test_clamp_above_M(self, beta1_table):
        out = table_state_eval(beta1_table, "H", np.array([2.0]))
        assert out[0] == pytest.approx(beta1_table.eval("H", beta1_table.M))


class TestEnergyY:
    def _hand_quadrature(self, grid, theta, table, value, T_prime, beta_exp,
                         clamp_floor):
        h = grid.h[0]
        s = min(max(value, clamp_floor), table.M) if value > 0 else None
        H = float(table.eval("H", s)) if s else 0.0
        G = float(table.eval("G", s)) if s else 0.0
        sup_term = sum(t * t * H for t in theta) * h
        w = theta * G
        gx = np.empty_like(w)
        gx[1:-1] = (w[2:] - w[:-2]) / (2 * h)
        gx[0] = (w[1] - w[0]) / h
        gx[-1] = (w[-1] - w[-2]) / h
        grad_term = float(np.sum(gx * gx)) * h * T_prime
        return T_prime ** beta_exp * (sup_term + grad_term)

    def test_constant_state_matches_hand_quadrature(self, cutoffs, desk_pack,
                                                    beta1_table, desk_grid):
        prob = EpsProblem(table=beta1_table, eps=1e-6, g=0.0, psi=1.0)
        for value in (1e-6, 3e-4):
            trace = make_constant_trace(desk_grid, prob, value)
            for n in (0, 2):
                got = energy_Y(trace, cutoffs, desk_pack, beta1_table, n,
                               T_prime=0.05)
                theta = cutoffs.theta(desk_grid, n)
                want = self._hand_quadrature(desk_grid, theta, beta1_table,
                                             value, 0.05, desk_pack.beta_exp,
                                             beta1_table.s_min)
                assert got == pytest.approx(want, rel=1e-12)

    def test_subfloor_state_uses_clamp(self, cutoffs, desk_pack, beta1_table,
                                       desk_grid):
        prob = EpsProblem(table=beta1_table, eps=1e-6, g=0.0, psi=1.0)
        value = beta1_table.s_min / 100.0     # positive but below the table
        trace = make_constant_trace(desk_grid, prob, value)
        got = energy_Y(trace, cutoffs, desk_pack, beta1_table, 0, 0.05)
        theta = cutoffs.theta(desk_grid, 0)
        want = self._hand_quadrature(desk_grid, theta, beta1_table,
                                     beta1_table.s_min, 0.05,
                                     desk_pack.beta_exp, beta1_table.s_min)
        assert got == pytest.approx(want, rel=1e-12)

    def test_zero_state_gives_zero(self, cutoffs, desk_pack, beta1_table,
                                   desk_grid):
        prob = EpsProblem(table=beta1_table, eps=1e-6, g=0.0, psi=1.0)
        trace = make_constant_trace(desk_grid, prob, 0.0)
        for n in range(4):
            assert energy_Y(trace, cutoffs, desk_pack, beta1_table, n,
                            0.05) == 0.0

    def test_zero_horizon_gives_zero(self, cutoffs, desk_pack, beta1_table,
                                     desk_trace_beta1):
        assert energy_Y(desk_trace_beta1, cutoffs, desk_pack, beta1_table, 0,
                        0.0) == 0.0


class TestDeGiorgiTrace:
    def test_desk_run_verdicts(self, desk_trace_beta1, cutoffs, desk_pack,
                               beta1_table):
        dg = de_giorgi_trace(desk_trace_beta1, cutoffs, desk_pack, beta1_table)
        assert dg.verdict["all_hold"]
        assert dg.verdict["nonincreasing_after_1"]
        assert dg.T_prime > 0.0
        assert 1e-9 < dg.Y[0] < 1e-6          # floor-dominated magnitude
        assert len(dg.Y) == 7
        assert math.isnan(dg.bound[0]) and np.all(np.isfinite(dg.bound[1:]))

    def test_to_dict_is_json_ready(self, desk_trace_beta1, cutoffs, desk_pack,
                                   beta1_table):
        import json
        dg = de_giorgi_trace(desk_trace_beta1, cutoffs, desk_pack, beta1_table,
                             estimate=False)
        text = json.dumps(dg.to_dict(), sort_keys=True)
        assert "threshold" in text and "exponents" in text


class TestTPrime:
    def test_clean_state_certifies_full_horizon(self, cutoffs, desk_pack,
                                                beta1_table, desk_grid):
        prob = EpsProblem(table=beta1_table, eps=1e-6, g=0.0, psi=1.0)
        trace = make_constant_trace(desk_grid, prob, 0.0)
        assert estimate_T_prime(trace, cutoffs, desk_pack,
                                beta1_table) == trace.T

    def test_degenerate_run_positive(self, desk_trace_beta1, cutoffs,
                                     desk_pack, beta1_table):
        tp = estimate_T_prime(desk_trace_beta1, cutoffs, desk_pack, beta1_table)
        assert tp > 0.0

    def test_control_is_negligible_fraction(self, control_trace, cutoffs,
                                            control_tab):
        pack = ExponentPack.build(cutoffs, N_dim=1, lam=1.0)
        tp = estimate_T_prime(control_trace, cutoffs, pack, control_tab)
        assert tp < 1e-3 * control_trace.T

    def test_stronger_degeneracy_holds_longer(self, desk_trace_beta1,
                                              desk_trace_beta2, cutoffs,
                                              desk_pack, beta1_table,
                                              beta2_table):
        tp1 = estimate_T_prime(desk_trace_beta1, cutoffs, desk_pack,
                               beta1_table)
        pack2 = ExponentPack.build(cutoffs, N_dim=1, table=beta2_table)
        tp2 = estimate_T_prime(desk_trace_beta2, cutoffs, pack2, beta2_table)
        assert tp2 >= tp1


class TestFronts:
    def test_single_cell_support(self, desk_grid):
        x = desk_grid.axis_centers(0)
        vals = np.full(desk_grid.n, 1e-6)
        j = int(np.argmin(np.abs(x + 0.3)))
        vals[j] = 1e-3
        d = abs(x[j] - 0.5)
        assert front_radius(vals, desk_grid, (0.5,), 1e-6, 1e-5) == \
            pytest.approx(d)
        assert empty_radius(vals, desk_grid, (0.5,), 1e-6, 1e-5) == \
            pytest.approx(d)

    def test_flat_state_has_no_front(self, desk_grid):
        vals = np.full(desk_grid.n, 1e-6)
        assert front_radius(vals, desk_grid, (0.5,), 1e-6, 1e-5) == 0.0
        assert empty_radius(vals, desk_grid, (0.5,), 1e-6, 1e-5) == math.inf

    def test_desk_series_shapes_and_growth(self, desk_trace_beta1):
        t, r_front, r_empty = front_series(desk_trace_beta1,
                                           x0_front=(-0.6,), x0_empty=X0)
        h = desk_trace_beta1.grid.h[0]
        assert len(t) == len(r_front) == len(r_empty) == 33
        assert r_front[0] == pytest.approx(0.2, abs=2 * h)
        assert np.all(np.diff(r_front) >= -1e-12)       # front never retreats
        # sublinear creep: later half grows no faster than the first half
        mid = len(t) // 2
        first = r_front[mid] - r_front[0]
        second = r_front[-1] - r_front[mid]
        assert second <= first + h
        # the watched ball stays clean throughout
        assert np.all(r_empty >= RP)

    def test_arrival_censored_on_degenerate_run(self, desk_trace_beta1):
        assert time_to_threshold(desk_trace_beta1, X0, RP) == math.inf

    def test_arrival_finite_on_control_run(self, control_trace):
        t_arr = time_to_threshold(control_trace, X0, RP)
        assert 0.005 < t_arr < 0.03       # measured ~0.012 on the desk grid

    def test_probe_without_cells_rejected(self, desk_trace_beta1):
        with pytest.raises(GeometryError):
            time_to_threshold(desk_trace_beta1, (25.0,), 0.0)
