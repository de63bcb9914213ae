import math

import numpy as np
import pytest

from sparsecc.model import GroundTruth
from sparsecc.simulate import (
    DrawBudgetExceeded,
    MarginalSpec,
    TuningInputs,
    beta_min_condition,
    calibrate_delta0,
    make_truth,
    prevalence,
    sample_case_control,
    sample_marginal,
    theoretical_r_estimation,
    theoretical_r_selection,
)
from sparsecc.solver import fit_l1_logistic, lambda_max

N = 100_000

# high-precision references (40-digit mpmath)
R_SELECTION_1000_250 = 13.389571552984283968  # n = 1000, M = 250, L = sqrt 2, delta = 1/n
R_ESTIMATION_E_1_3 = 30.475491803117555517    # n = e, M = 1, L = 3, delta = 1/n


class TestMarginals:
    def test_snp_support_and_moments(self):
        X = sample_marginal(MarginalSpec("snp", 5), N, 0)
        assert set(np.unique(X)) == {-math.sqrt(2), 0.0, math.sqrt(2)}
        assert np.all(np.abs(X.mean(axis=0)) <= 3 * math.sqrt(1 / N))
        assert np.all(np.abs(X.var(axis=0) - 1) <= 3 * math.sqrt(2 / N))

    def test_nor_iid_variance(self):
        X = sample_marginal(MarginalSpec("nor_iid", 4, sigma2=2.0), N, 1)
        assert np.all(np.abs(X.var(axis=0) - 2.0) <= 4 * 2.0 * math.sqrt(2 / N))

    def test_nor_corr_structure(self):
        spec = MarginalSpec("nor_corr", 6, rho=0.5)
        X = sample_marginal(spec, N, 2)
        C = np.cov(X, rowvar=False)
        assert np.max(np.abs(C - spec.covariance())) <= 5 / math.sqrt(N)
        R = np.corrcoef(X[:, :3], rowvar=False)
        assert R[0, 1] == pytest.approx(0.5, abs=0.01)
        assert R[0, 2] == pytest.approx(0.25, abs=0.01)

    def test_seeded(self):
        spec = MarginalSpec("nor_corr", 3)
        np.testing.assert_array_equal(sample_marginal(spec, 50, 9), sample_marginal(spec, 50, 9))

    @pytest.mark.parametrize("kw", [dict(kind="x"), dict(M=0), dict(sigma2=0.0), dict(rho=1.0)])
    def test_validation(self, kw):
        base = dict(kind="nor_iid", M=3)
        base.update(kw)
        with pytest.raises(ValueError):
            MarginalSpec(**base)


class TestCalibration:
    def test_null_is_logit(self):
        d = calibrate_delta0(MarginalSpec("snp", 4), np.zeros(4), 0.01)
        assert d == pytest.approx(-4.59511985013459, abs=1e-12)
        assert calibrate_delta0(MarginalSpec("snp", 4), np.zeros(4), 0.5) == 0.0

    def test_symmetric_predictor_half(self):
        # beta'X symmetric about zero: prevalence 1/2 at delta0 = 0 up to MC noise
        d = calibrate_delta0(MarginalSpec("nor_iid", 3), np.ones(3), 0.5, mc=200_000)
        assert abs(d) < 0.02

    def test_prevalence_independent_check(self):
        spec = MarginalSpec("snp", 20)
        beta = np.zeros(20)
        beta[[2, 7, 11]] = 1.0
        d = calibrate_delta0(spec, beta, 0.01, seed=0)
        assert abs(prevalence(spec, beta, d, seed=12345) - 0.01) <= 0.001

    def test_bad_pi(self):
        with pytest.raises(ValueError):
            calibrate_delta0(MarginalSpec("snp", 2), np.ones(2), 1.0)

    def test_make_truth(self):
        t = make_truth(MarginalSpec("nor_iid", 30), 3, seed=4, mc=100_000)
        assert t.support_size == 3 and set(t.beta_star[list(t.support)]) == {1.0}
        same = make_truth(MarginalSpec("nor_iid", 30), 3, seed=4, mc=100_000)
        assert t.support == same.support and t.intercept0 == same.intercept0


class TestCaseControl:
    def test_balanced_and_seeded(self):
        spec = MarginalSpec("nor_iid", 5)
        t = make_truth(spec, 2, seed=0, mc=100_000)
        a = sample_case_control(spec, t, 40, 3)
        b = sample_case_control(spec, t, 40, 3)
        assert a.n == 40 and a.labels.sum() == 40
        np.testing.assert_array_equal(a.raw, b.raw)

    def test_null_pools_match(self):
        spec = MarginalSpec("nor_iid", 3)
        t = GroundTruth(np.zeros(3), 0.2, math.log(0.25), "nor_iid")
        d = sample_case_control(spec, t, 4000, 0)
        diff = d.raw[d.labels == 1].mean(axis=0) - d.raw[d.labels == 0].mean(axis=0)
        assert np.all(np.abs(diff) <= 4 * math.sqrt(2 / 4000))

    def test_signal_shifts_cases(self):
        spec = MarginalSpec("nor_iid", 3)
        t = make_truth(spec, 1, beta_value=2.0, seed=0, support=[1], mc=100_000)
        d = sample_case_control(spec, t, 300, 1)
        assert d.raw[d.labels == 1, 1].mean() > d.raw[d.labels == 0, 1].mean()

    def test_budget_guard(self):
        spec = MarginalSpec("nor_iid", 2)
        # claimed prevalence 0.5 but the intercept makes cases essentially impossible
        t = GroundTruth(np.zeros(2), 0.5, -60.0, "nor_iid")
        with pytest.raises(DrawBudgetExceeded):
            sample_case_control(spec, t, 5, 0)

    def test_signs_recovered(self):
        spec = MarginalSpec("nor_iid", 20)
        t = make_truth(spec, 3, seed=2, mc=200_000)
        hits = 0
        for rep in range(50):
            d = sample_case_control(spec, t, 150, rep)
            fit = fit_l1_logistic(d, 0.01 * lambda_max(d))
            hits += bool(np.all(fit.coefficients[list(t.support)] > 0))
        assert hits >= 45


class TestTuning:
    def test_closed_form_at_e(self):
        assert theoretical_r_estimation(TuningInputs(math.e, 1, 3.0)) == pytest.approx(R_ESTIMATION_E_1_3, rel=1e-15)

    def test_selection_value(self):
        v = theoretical_r_selection(TuningInputs(1000, 250, math.sqrt(2)))
        assert v == pytest.approx(R_SELECTION_1000_250, rel=1e-14)

    def test_selection_vs_estimation(self):
        t1 = TuningInputs(500, 1, 1.0)
        assert theoretical_r_selection(t1) == theoretical_r_estimation(t1)
        t2 = TuningInputs(500, 40, 1.0)
        assert theoretical_r_selection(t2) > theoretical_r_estimation(t2)

    def test_monotone_in_L(self):
        assert theoretical_r_estimation(TuningInputs(300, 50, 2.0)) > theoretical_r_estimation(TuningInputs(300, 50, 1.0))

    def test_rate(self):
        ratios = []
        for e in range(2, 7):
            n = 10**e
            r = theoretical_r_estimation(TuningInputs(n, n**2, 1.0))
            ratios.append(r * math.sqrt(n) / math.log(n) ** 1.5)
        assert max(ratios) / min(ratios) < 1.5
        assert min(ratios) > 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            TuningInputs(10, 5, 0.0)
        with pytest.raises(ValueError):
            TuningInputs(10, 5, 1.0, delta_n=1.5)

    def test_beta_min_diagnostic(self):
        t = GroundTruth(np.r_[np.zeros(4), 50.0], 0.01, -5.0, "snp")
        assert beta_min_condition(t, TuningInputs(10**6, 5, 1.0))
        assert not beta_min_condition(t, TuningInputs(100, 5, 1.0))
