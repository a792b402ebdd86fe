import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rabispec.errors import GridOutsideDomain, NoConvergence, PoleProximity
from rabispec.series import (
    ModelParams,
    SeriesExpansion,
    compute_K,
    compute_K_eps,
    disk_grid,
    ode_residual,
)

finite_x = st.floats(min_value=-0.9, max_value=12.0).filter(
    lambda x: min(abs(x - n) for n in range(14)) > 1e-3)


class TestModelParams:
    def test_rejects_nonpositive_coupling(self):
        with pytest.raises(ValueError):
            ModelParams(0.0, 0.7)
        with pytest.raises(ValueError):
            ModelParams(-1.0, 0.7)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            ModelParams(1.0, math.nan)

    def test_energy_shift(self):
        p = ModelParams(0.7, 0.4)
        assert p.energy(1.0) == 1.0 - 0.49
        assert p.spectral(p.energy(2.5)) == pytest.approx(2.5, abs=1e-15)


class TestRecurrence:
    def test_normalization(self, rabi):
        assert compute_K(rabi, 0.5)[0] == 1.0

    def test_first_coefficient(self, rabi):
        # f_0(0.5) = 2 + (-0.5 + 0.49/0.5)/2
        assert compute_K(rabi, 0.5)[1] == pytest.approx(2.24, abs=1e-15)

    def test_first_coefficient_without_splitting(self):
        assert compute_K(ModelParams(1.0, 0.0), 0.5)[1] == pytest.approx(1.75, abs=1e-15)

    def test_recurrence_holds(self, rabi):
        x = 2.37
        K = compute_K(rabi, x).coeffs
        g, d = rabi.g, rabi.delta
        for n in range(1, len(K) - 1):
            f = 2 * g + (n - x + d * d / (x - n)) / (2 * g)
            assert (n + 1) * K[n + 1] == pytest.approx(f * K[n] - K[n - 1], rel=1e-12, abs=1e-300)

    def test_delta_closed_form(self):
        # Delta = 0: sum K_n y^n = exp(2 g y) (1 - y / 2g)^x
        g, x, y = 0.8, 2.6, 0.9
        K = compute_K(ModelParams(g, 0.0), x, 1e-20, radius=1.2).coeffs
        series = math.fsum(k * y**n for n, k in enumerate(K))
        assert series == pytest.approx(math.exp(2 * g * y) * (1 - y / (2 * g)) ** x, rel=1e-13)

    def test_coefficients_real(self, rabi):
        K = compute_K(rabi, 3.3).coeffs
        assert all(isinstance(k, float) for k in K)

    def test_sign_of_delta_irrelevant(self):
        a = compute_K(ModelParams(1.0, 0.7), 4.2).coeffs
        b = compute_K(ModelParams(1.0, -0.7), 4.2).coeffs
        assert a == b

    def test_truncation_prefix_stable(self, rabi):
        short = compute_K(rabi, 5.5, 1e-10)
        long = compute_K(rabi, 5.5, 1e-20)
        assert long.order > short.order
        assert long.coeffs[:short.order + 1] == short.coeffs

    def test_tail_criterion(self, rabi):
        s = compute_K(rabi, 5.5)
        assert s.converged
        tail = [abs(k) * rabi.g**n for n, k in enumerate(s.coeffs)][-5:]
        assert max(tail) < 1e-16

    def test_scaled_coefficients(self, rabi):
        plain = compute_K(rabi, 1.7)
        scaled = compute_K(rabi, 1.7, scale=0.5, order=plain.order)
        for n, (a, b) in enumerate(zip(plain.coeffs, scaled.coeffs)):
            assert b == pytest.approx(a * 0.5**n, rel=1e-12, abs=1e-300)

    def test_extended_precision_agrees(self, rabi):
        a = compute_K(rabi, 3.3)
        b = compute_K(rabi, 3.3, dps=40)
        assert np.allclose([float(c) for c in b.coeffs[:a.order]], a.coeffs[:a.order],
                           rtol=1e-13, atol=1e-300)


class TestErrors:
    def test_pole_proximity(self, rabi):
        with pytest.raises(PoleProximity):
            compute_K(rabi, 3.00001)

    def test_no_convergence(self, rabi):
        with pytest.raises(NoConvergence):
            compute_K(rabi, 20.5, n_max=10)

    def test_tol_must_be_positive(self, rabi):
        with pytest.raises(ValueError):
            compute_K(rabi, 0.5, 0.0)

    def test_grid_outside_domain(self, rabi):
        s = compute_K(rabi, 0.5)
        with pytest.raises(GridOutsideDomain):
            ode_residual(rabi, 0.5, s, [1.5])
        with pytest.raises(GridOutsideDomain):
            ode_residual(rabi, 0.5, s, [-1.0])


class TestOdeResidual:
    def test_derived_recurrence_solves_system(self, rabi):
        s = compute_K(rabi, 0.5, 1e-20, radius=1.6)
        assert ode_residual(rabi, 0.5, s, disk_grid(rabi.g)) < 1e-10

    def test_corrupted_coefficient_detected(self, rabi):
        s = compute_K(rabi, 0.5, 1e-20, radius=1.6)
        coeffs = list(s.coeffs)
        coeffs[3] *= 1.01
        bad = SeriesExpansion(**{**s.__dict__, "coeffs": tuple(coeffs)})
        assert ode_residual(rabi, 0.5, bad, disk_grid(rabi.g)) > 1e-4

    def test_decoupled_case(self):
        p = ModelParams(1.0, 0.0)
        s = compute_K(p, 2.3, 1e-20, radius=1.6)
        assert ode_residual(p, 2.3, s, disk_grid(p.g)) < 1e-12

    @settings(max_examples=25, deadline=None)
    @given(g=st.floats(0.2, 1.2), delta=st.floats(-1.5, 1.5), x=finite_x.filter(lambda x: x < 7))
    def test_residual_property(self, g, delta, x):
        # for larger x or g, rounding in the alternating sums near |z + g| = 1.6 g reaches 1e-10
        p = ModelParams(g, delta)
        s = compute_K(p, x, 1e-20, radius=1.6 * g)
        assert ode_residual(p, x, s, disk_grid(g)) < 1e-10


class TestEpsSeries:
    def test_reduces_to_symmetric(self):
        p = ModelParams(0.7, 0.4, 0.0)
        ref = compute_K(p, 0.35).coeffs
        for sign in "+-":
            assert compute_K_eps(p, 0.35, sign).coeffs == ref

    def test_normalization(self):
        p = ModelParams(0.7, 0.4, 0.3)
        assert compute_K_eps(p, 1.2, "+")[0] == 1.0
        assert compute_K_eps(p, 1.2, "-")[0] == 1.0

    def test_four_vector_residual(self):
        p = ModelParams(0.7, 0.4, 0.3)
        pair = tuple(compute_K_eps(p, 1.2, s, 1e-20, radius=1.6 * p.g) for s in "+-")
        assert ode_residual(p, 1.2, pair, disk_grid(p.g)) < 1e-10

    def test_poles_shifted_by_eps(self):
        p = ModelParams(0.7, 0.4, 0.3)
        with pytest.raises(PoleProximity):
            compute_K_eps(p, 0.7, "+")      # x + eps = 1
        with pytest.raises(PoleProximity):
            compute_K_eps(p, 1.3, "-")      # x - eps = 1
        compute_K_eps(p, 1.0, "+")

    def test_swapping_sign_of_eps_swaps_branches(self):
        a = compute_K_eps(ModelParams(0.7, 0.4, 0.3), 1.2, "+").coeffs
        b = compute_K_eps(ModelParams(0.7, 0.4, -0.3), 1.2, "-").coeffs
        assert a == b
