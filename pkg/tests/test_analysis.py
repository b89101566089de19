import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gferasure.analysis import (BudgetInput, FitError, FitResult, apply_readout, clifford_error_compose,
                                correct_readout, error_budget, error_per_cycle_from_lifetime, fit_exponential,
                                leakage_rb_fit, rb_fit)
from gferasure.engine.instruments import M_Q1, M_Q2


class TestExponentialFit:
    def test_synthetic_noise_within_3_sigma(self, rng):
        t = np.linspace(0, 200, 50)
        y = 0.9 * np.exp(-t / 45.0) + 0.05 + rng.normal(0, 0.01, t.size)
        f = fit_exponential(t, y, sigma=np.full(t.size, 0.01))
        assert abs(f.time_constant - 45.0) < 3 * f.time_constant_err

    def test_fixed_offset(self):
        t = np.linspace(0, 100, 20)
        f = fit_exponential(t, np.exp(-t / 30.0), offset=0.0)
        assert f.time_constant == pytest.approx(30.0, rel=1e-8)

    def test_constant_data_rejected(self):
        with pytest.raises(ValueError):
            fit_exponential(np.arange(5.0), np.ones(5))

    def test_positive_time_constant(self):
        with pytest.raises(FitError):
            FitResult(-1.0, 1, 0, 0, 0, 0)


class TestBudget:
    def test_oracle(self):
        b = BudgetInput()
        tab = error_budget(b)
        eps = 1 - np.exp(-3.52 / 52)
        assert tab.eps_l == pytest.approx(eps, rel=1e-12)
        assert tab.plus_z["cascaded"] == pytest.approx(3.52**2 / (8 * 26 * 52), rel=1e-12)
        assert tab.plus_z["fn_0L"] == pytest.approx(2 * eps * 0.039 / 3, rel=1e-12)
        assert tab.minus_z["fn_1L"] == pytest.approx(eps * 0.0012, rel=1e-12)
        assert tab.plus_z["gate"] == pytest.approx(4 * 2.34e-4)
        assert tab.average == pytest.approx((tab.total_plus + tab.total_minus) / 2)

    def test_leakage_row_not_summed(self):
        tab = error_budget(BudgetInput())
        assert tab.total_plus == pytest.approx(sum(v for k, v in tab.plus_z.items() if k != "leakage"))

    def test_csv_is_rfc4180(self):
        text = error_budget(BudgetInput()).to_csv()
        assert text.startswith("term,plus_z,minus_z\r\n") and text.endswith("\r\n")

    def test_invalid(self):
        with pytest.raises(ValueError):
            BudgetInput(p_fn_0L=1.5)

    def test_lifetime_conversion(self):
        assert error_per_cycle_from_lifetime(580, 3.52) == pytest.approx(3.52 / 1160, rel=1e-15)
        assert error_per_cycle_from_lifetime(580, 3.52, "population") == pytest.approx(3.52 / 580)
        with pytest.raises(ValueError):
            error_per_cycle_from_lifetime(3.0, 3.52)


class TestClifford:
    def test_weights(self):
        assert clifford_error_compose(1, 0, 0) == pytest.approx(8 / 24)
        assert clifford_error_compose(0, 1, 0) == pytest.approx(1 / 24)
        assert clifford_error_compose(0, 0, 1) == pytest.approx(36 / 24)

    @given(st.floats(0, 1e-2), st.floats(0, 1e-2), st.floats(0, 1e-2), st.floats(0, 1e-2))
    def test_linear(self, a, b, c, k):
        assert clifford_error_compose(a + k, b + k, c + k) == pytest.approx(
            clifford_error_compose(a, b, c) + clifford_error_compose(k, k, k), abs=1e-15)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            clifford_error_compose(-1e-4, 0, 0)


class TestRBFits:
    lengths = np.array([1, 25, 50, 100, 150, 200, 300, 400])

    def test_standard_fit(self):
        y = 0.5 * 0.998**self.lengths + 0.5
        f = rb_fit(self.lengths, y)
        assert f.p == pytest.approx(0.998, rel=1e-8)
        assert f.error_per_clifford == pytest.approx(0.001, rel=1e-5)

    def test_leakage_fit(self):
        # code population A + B lam^m with L1 = (1 - A)(1 - lam)
        lam, a = 0.994, 0.5
        code = a + (1 - a) * lam**self.lengths
        diff = 0.98 * 0.997**self.lengths
        f = leakage_rb_fit(self.lengths, diff, code)
        assert f.leakage == pytest.approx((1 - a) * (1 - lam), rel=1e-5)
        assert f.error_per_clifford == pytest.approx((0.003 + (1 - a) * (1 - lam)) / 2, rel=1e-4)

    def test_needs_enough_lengths(self):
        with pytest.raises(ValueError):
            rb_fit([1, 2], [1, 0.9])


class TestReadoutCorrection:
    @pytest.mark.parametrize("m", [M_Q1, M_Q2])
    def test_pure_round_trip(self, m):
        assert np.allclose(correct_readout(apply_readout([1, 0, 0], m), m).populations, [1, 0, 0], atol=1e-9)

    @settings(max_examples=50)
    @given(st.lists(st.floats(0.05, 1.0), min_size=3, max_size=3))
    def test_interior_round_trip(self, w):
        p = np.array(w) / sum(w)
        c = correct_readout(apply_readout(p, M_Q1), M_Q1)
        assert np.allclose(c.populations, p, atol=1e-12)
        assert c.residual == 0.0

    def test_clipping_reports_residual(self):
        c = correct_readout([1.0, 0.0, 0.0], M_Q1)
        assert c.residual < 0
        assert np.all(c.populations >= 0) and c.populations.sum() == pytest.approx(1.0)
