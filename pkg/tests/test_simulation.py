import numpy as np
import pytest

from hdsi.errors import EstimationError
from hdsi.simulation import (
    STUDY_METHODS,
    DgpConfig,
    aggregate_metrics,
    default_theta,
    generate_dgp,
    run_study,
)


class TestDgp:
    def test_default_theta_layout(self):
        theta = default_theta(60, 12)
        support = [j for j, v in enumerate(theta) if v != 0]
        assert support == list(range(0, 60, 5))
        assert [theta[j] for j in support[:6]] == [1.0, -0.8, 0.6, -1.0, 0.8, -0.6]
        assert DgpConfig().theta == theta
        with pytest.raises(ValueError):
            default_theta(5, 6)

    @pytest.mark.parametrize("rho", [0.0, 0.9])
    def test_adjacent_correlation(self, rho):
        cfg = DgpConfig.design(n=100_000, K=4, rho=rho, s=1, R=1)
        D = generate_dgp(cfg, 0).X
        C = np.corrcoef(D, rowvar=False)
        for j in range(3):
            assert abs(C[j, j + 1] - rho) <= 0.02
        assert abs(C[0, 2] - rho**2) <= 0.02

    def test_deterministic_and_replication_keyed(self):
        cfg = DgpConfig.design(n=50, K=5, s=2)
        a, b = generate_dgp(cfg, 3), generate_dgp(cfg, 3)
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.y, b.y)
        assert not np.array_equal(a.y, generate_dgp(cfg, 4).y)
        assert a.target_index == tuple(range(5))

    def test_outcome_equation_holds(self):
        cfg = DgpConfig.design(n=20_000, K=6, rho=0.3, sigma2=2.0, s=2, beta0=1.5)
        data = generate_dgp(cfg, 0)
        resid = data.y - 1.5 - data.X @ np.asarray(cfg.theta)
        assert abs(resid.mean()) < 0.05
        assert abs(resid.var() - 2.0) < 0.1

    def test_invalid_rho(self):
        with pytest.raises(EstimationError):
            generate_dgp(DgpConfig.design(n=10, K=3, rho=1.5, s=1), 0)


class TestAggregate:
    def test_hand_example(self):
        m = aggregate_metrics(np.array([[True, True]]), np.array([True, False]))
        assert (m.correct_mean, m.incorrect_mean, m.fwer, m.fdr) == (1, 1, 1, 0.5)

    def test_no_rejections(self):
        m = aggregate_metrics(np.zeros((3, 4), bool), np.array([True, False, True, False]))
        assert (m.correct_mean, m.incorrect_mean, m.fwer, m.fdr, m.correct_sd) == (0, 0, 0, 0, 0)

    def test_all_null_all_rejected(self):
        m = aggregate_metrics(np.ones((2, 3), bool), np.zeros(3, bool))
        assert m.fdr == 1 and m.fwer == 1 and m.incorrect_mean == 3

    def test_two_by_three(self):
        rej = np.array([[True, False, True], [False, True, True]])
        truth = np.array([True, True, False])
        m = aggregate_metrics(rej, truth)
        # row 1: correct 1, incorrect 1, FDP 1/2; row 2: correct 1, incorrect 1, FDP 1/2
        assert m.correct_mean == 1 and m.incorrect_mean == 1
        assert m.fwer == 1 and m.fdr == 0.5 and m.correct_sd == 0
        rej[1] = [True, True, False]
        m = aggregate_metrics(rej, truth)
        assert m.correct_mean == 1.5 and m.fdr == 0.25 and m.fwer == 0.5
        assert m.correct_sd == pytest.approx(np.std([1, 2], ddof=1))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            aggregate_metrics(np.zeros((2, 3), bool), np.zeros(4, bool))


class TestStudy:
    def test_complete_null_naive_fwer(self):
        cfg = DgpConfig(n=200, K=60, rho=0.0, sigma2=1.0, theta=(0.0,) * 60, seed=1, R=30)
        report = run_study(cfg, alpha=0.1, B=200)
        assert report.metrics["naive"].fwer >= 0.9
        assert all(report.metrics[m].correct_mean == 0 for m in STUDY_METHODS)

    def test_no_true_nulls(self):
        cfg = DgpConfig(n=200, K=4, rho=0.2, sigma2=1.0, theta=(1.0, -1.0, 0.5, 0.8), seed=2, R=10)
        report = run_study(cfg, alpha=0.1, B=200)
        for m in STUDY_METHODS:
            v = report.metrics[m]
            assert v.incorrect_mean == 0 and v.fwer == 0 and v.fdr == 0

    def test_reproducible_and_order_free(self):
        cfg = DgpConfig.design(n=100, K=10, s=3, R=8, seed=5)
        a = run_study(cfg, 0.1, 150)
        b = run_study(cfg, 0.1, 150)
        c = run_study(cfg, 0.1, 150, threads=2)
        assert a == b == c
        assert a.to_dict()["methods"]["RW"] == c.to_dict()["methods"]["RW"]

    def test_nesting_of_rejection_sets(self):
        from hdsi.simulation import replicate
        from hdsi.lasso import PenaltyConfig

        cfg = DgpConfig.design(n=200, K=20, s=5, R=20, seed=9)
        for r in range(cfg.R):
            res = replicate(cfg, r, 0.1, 200, PenaltyConfig(homoscedastic=True))
            for m in ("bonferroni", "holm", "BH"):
                assert not np.any(res[m] & ~res["naive"])
            assert not np.any(res["bonferroni"] & ~res["holm"])
            assert not np.any(res["jointCI"] & ~res["RW"])

    def test_report_counts(self):
        cfg = DgpConfig.design(n=80, K=6, s=2, R=5)
        report = run_study(cfg, 0.05, 120)
        assert report.R == 5 and report.failures == 0 and report.B == 120
        d = report.to_dict()
        assert set(d["methods"]) == set(STUDY_METHODS)
        assert d["config"]["theta"] == list(cfg.theta)

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            run_study(DgpConfig.design(n=50, K=3, s=1, R=1), alpha=1.5)
