import math

import numpy as np
import pytest

from sparsecc.model import Dataset, GroundTruth
from sparsecc.path import BracketInvalid, bbm, gbm, grid_path, support_in_path, write_sketch_csv
from sparsecc.solver import SolverConfig, fit_l1_logistic, lambda_max

from conftest import logistic_dataset


class TestBBM:
    def test_linear_root(self):
        z = bbm(lambda t: t - 0.3, 0.0, 1.0, 1e-6)
        assert abs(z - 0.3) <= 1e-6

    def test_exact_hit_on_first_midpoint(self):
        calls = []

        def h(t):
            calls.append(t)
            return t - 0.5

        assert bbm(h, 0.0, 1.0, 1e-9) == 0.5
        assert calls == [0.0, 1.0, 0.5]

    def test_step_function(self):
        h = lambda t: (2 if t < 0.37 else 1 if t < 0.61 else 0) - 1
        z = bbm(h, 1.0, 0.0, 1e-6)
        assert 0.37 <= z < 0.61

    def test_root_at_endpoint(self):
        assert bbm(lambda t: t, 0.0, 1.0, 1e-3) == 0.0

    def test_invalid_bracket(self):
        with pytest.raises(BracketInvalid):
            bbm(lambda t: t + 1, 0.0, 1.0, 1e-3)

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            bbm(lambda t: t, -1.0, 1.0, 0.0)

    def test_iteration_bound(self):
        calls = []
        bbm(lambda t: calls.append(t) or t - 1 / 3, 0.0, 1.0, 1e-6)
        assert len(calls) <= 2 + math.ceil(math.log2(1 / 1e-6))


class TestGBM:
    def test_k_max_zero_single_call(self, small_data):
        sk = gbm(small_data, k_max=0)
        assert sk.solver_calls == 1
        assert list(sk.entries) == [0]
        assert sk.entries[0][0] == lambda_max(small_data)

    def test_entries_reproduce_counts(self):
        d = logistic_dataset(4, 80, 12)
        sk = gbm(d)
        assert sk.entries
        for k, (r, fit) in sk.entries.items():
            assert fit.active_count == k and fit.converged
            assert fit_l1_logistic(d, r).active_count == k
        assert sk.solver_calls == len(sk.evaluations)

    def test_orthogonal_design_entry_order(self):
        # balanced +/-1 columns are orthogonal; the larger the case shift, the
        # earlier the column enters
        n, M = 64, 4
        H = np.array([[1 if (i >> j) & 1 else -1 for j in range(6)] for i in range(n)], float)
        X = np.vstack([H[:, :M], H[:, :M]])
        y = np.r_[np.zeros(n, int), np.ones(n, int)]
        X[n:] += np.array([0.8, 0.4, 0.2, 0.1])
        d = Dataset.from_arrays(X, y)
        sk = gbm(d)
        # the floor is assigned M nonzeros without a fit, so k = M is not guaranteed
        assert set(range(M)) <= set(sk.entries)
        for k in range(M):
            assert sk.entries[k][1].active_set == tuple(range(k))

    def test_r_decreasing_in_k(self):
        d = logistic_dataset(9, 60, 10)
        sk = gbm(d)
        rs = [sk.entries[k][0] for k in sorted(sk.entries)]
        # for a monotone path the first-seen penalties are ordered; allow none reversed
        # by more than the bisection accuracy
        assert all(b <= a + sk.alpha for a, b in zip(rs, rs[1:]))

    def test_k_max_respected(self):
        d = logistic_dataset(1, 60, 15)
        sk = gbm(d, k_max=4)
        assert max(sk.entries) <= 4
        assert sk.missing == [k for k in range(5) if k not in sk.entries]

    def test_deterministic(self, small_data):
        a, b = gbm(small_data), gbm(small_data)
        assert a.evaluations == b.evaluations

    def test_r_accessor(self, small_data):
        sk = gbm(small_data, k_max=2)
        assert sk.r(0) == lambda_max(small_data)
        assert sk.r(99) == -1.0

    def test_sketch_csv(self, tmp_path, small_data):
        sk = gbm(small_data, k_max=5)
        p = tmp_path / "s.csv"
        write_sketch_csv(p, sk)
        lines = p.read_text().splitlines()
        assert lines[0] == "k,r_k,objective,solver_calls_cum,active_set,missing"
        assert len(lines) == 7


class TestGrid:
    def test_budget_two(self, small_data):
        g = grid_path(small_data, 2)
        assert g.solver_calls == 2
        assert g.grid[0] == pytest.approx(lambda_max(small_data))
        assert g.grid[-1] == pytest.approx(SolverConfig().lambda_floor)

    def test_geometric_spacing(self, small_data):
        g = grid_path(small_data, 9)
        ratios = g.grid[1:] / g.grid[:-1]
        np.testing.assert_allclose(ratios, ratios[0], rtol=1e-10)

    def test_budget_validation(self, small_data):
        with pytest.raises(ValueError):
            grid_path(small_data, 1)


def test_support_in_path(small_data):
    sk = gbm(small_data)
    some_k = max(sk.entries)
    support = sk.entries[some_k][1].active_set
    beta = np.zeros(small_data.M)
    beta[list(support)] = 1.0
    truth = GroundTruth(beta, 0.01, -4.0, "nor_iid")
    assert support_in_path(sk, truth)
    beta2 = np.zeros(small_data.M)
    beta2[[0, 9]] = 1.0
    beta2[5] = 1.0
    hit = any(set(f.active_set) == {0, 5, 9} for f in sk.fits())
    assert support_in_path(sk, GroundTruth(beta2, 0.01, -4.0, "nor_iid")) == hit
