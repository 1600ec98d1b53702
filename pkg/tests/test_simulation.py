import numpy as np
import pytest

from pseudoweight import (
    DomainError,
    InfeasibleTargetError,
    InsufficientReplicatesError,
    Method,
    PopulationConfig,
    Scenario,
    calibrate_participation_intercept,
    calibrate_survey_const,
    compute_metrics,
    generate_population,
    participation_probabilities,
    poisson_sample,
    run_monte_carlo,
)
from pseudoweight.simulation import FinitePopulation

ANALYTIC_MEAN = 3.978  # from the covariate recipe's moments


class TestPopulation:
    def test_deterministic_for_seed(self):
        a = generate_population(PopulationConfig(N=2000, seed=5))
        b = generate_population(PopulationConfig(N=2000, seed=5))
        assert np.array_equal(a.X, b.X)
        assert np.array_equal(a.y, b.y)
        assert a.mu == b.mu

    def test_different_seeds_differ(self):
        a = generate_population(PopulationConfig(N=2000, seed=5))
        b = generate_population(PopulationConfig(N=2000, seed=6))
        assert not np.array_equal(a.y, b.y)

    def test_mean_matches_analytic_moments(self):
        pop = generate_population(PopulationConfig(N=50_000, seed=123))
        se = pop.y.std(ddof=1) / np.sqrt(pop.N)
        assert abs(pop.mu - ANALYTIC_MEAN) < 3 * se

    def test_intercept_column_and_shapes(self):
        pop = generate_population(PopulationConfig(N=1500, seed=1))
        assert pop.X.shape == (1500, 5)
        assert np.all(pop.X[:, 0] == 1.0)

    def test_tiny_population_rejected(self):
        with pytest.raises(ValueError):
            PopulationConfig(N=10, seed=0)


def flat_population(N=4000, seed=9):
    # convenience: a real generated population for calibration tests
    return generate_population(PopulationConfig(N=N, seed=seed))


class TestParticipationCalibration:
    def test_log_link_zero_slopes_closed_form(self):
        pop = flat_population()
        c = calibrate_participation_intercept(
            pop, Scenario.LOG_LINK, 0.07, slopes=(0.0, 0.0, 0.0, 0.0)
        )
        assert c == pytest.approx(np.log(0.07), abs=1e-9)

    def test_logit_link_zero_slopes_closed_form(self):
        pop = flat_population()
        c = calibrate_participation_intercept(
            pop, Scenario.LOGIT_LINK, 0.07, slopes=(0.0, 0.0, 0.0, 0.0)
        )
        assert c == pytest.approx(np.log(0.07 / 0.93), abs=1e-9)

    @pytest.mark.parametrize("scenario", [Scenario.LOG_LINK, Scenario.LOGIT_LINK])
    @pytest.mark.parametrize("f_c", [0.005, 0.05, 0.2])
    def test_reevaluation_oracle(self, scenario, f_c):
        pop = flat_population()
        c = calibrate_participation_intercept(pop, scenario, f_c)
        pi = participation_probabilities(pop, scenario, c)
        assert abs(pi.sum() / pop.N - f_c) < 1e-8
        assert pi.max() < 1.0

    def test_log_link_infeasible_target(self):
        pop = flat_population()
        # a mean this close to one cannot be reached with every probability
        # strictly below one under the log link
        with pytest.raises(InfeasibleTargetError):
            calibrate_participation_intercept(pop, Scenario.LOG_LINK, 0.999)


class TestSurveyCalibration:
    def test_ratio_reproduced(self):
        pop = flat_population()
        const, pi_p = calibrate_survey_const(pop, 0.025)
        q = const + pop.X[:, 3] + 0.03 * pop.y
        assert q.max() / q.min() == pytest.approx(20.0, abs=1e-6)
        assert np.all(pi_p > 0) and pi_p.max() <= 1.0

    def test_full_scale_ratio_and_validity(self):
        # at full scale the heavy covariate tails force a positive constant;
        # the operative contract is the exact weight-ratio target and valid
        # inclusion probabilities
        pop = generate_population(PopulationConfig(N=500_000, seed=77))
        const, pi_p = calibrate_survey_const(pop, 0.025)
        q = const + pop.X[:, 3] + 0.03 * pop.y
        assert q.max() / q.min() == pytest.approx(20.0, abs=1e-6)
        assert q.min() > 0
        assert pi_p.max() <= 1.0

    def test_degenerate_spread_rejected(self):
        X = np.column_stack([np.ones(1200)] * 5)
        pop = FinitePopulation(X=X, y=np.zeros(1200), mu=0.0)
        with pytest.raises(InfeasibleTargetError):
            calibrate_survey_const(pop, 0.025)

    def test_expected_sample_size(self):
        pop = flat_population(N=20_000)
        _, pi_p = calibrate_survey_const(pop, 0.025)
        assert pi_p.sum() == pytest.approx(0.025 * pop.N, rel=1e-9)


class TestPoissonSampling:
    def test_certainty_selects_all(self):
        idx = poisson_sample(np.ones(100), seed=4)
        assert len(idx) == 100

    def test_count_within_binomial_bounds(self):
        idx = poisson_sample(np.full(100_000, 0.5), seed=4)
        sigma = np.sqrt(100_000 * 0.25)
        assert abs(len(idx) - 50_000) < 5 * sigma

    def test_deterministic_given_seed(self):
        p = np.full(5000, 0.2)
        assert np.array_equal(poisson_sample(p, seed=11), poisson_sample(p, seed=11))

    def test_domain_checked(self):
        with pytest.raises(DomainError):
            poisson_sample(np.array([0.0, 0.5]), seed=1)
        with pytest.raises(DomainError):
            poisson_sample(np.array([1.1]), seed=1)


class TestMetrics:
    def test_exact_estimates(self):
        m = compute_metrics([4.0, 4.0], None, None, 4.0)
        assert (m.pct_rb, m.v_emp, m.mse) == (0.0, 0.0, 0.0)

    def test_hand_arithmetic(self):
        m = compute_metrics([3.0, 5.0], [2.0, 2.0], [True, True], 4.0)
        assert m.v_emp == pytest.approx(2.0)
        assert m.mse == pytest.approx(1.0)
        assert m.vr == pytest.approx(1.0)
        assert m.pct_rb == pytest.approx(0.0)

    def test_coverage_proportion(self):
        m = compute_metrics([1.0, 1.0, 1.0, 1.0], [1, 1, 1, 1], [True, False, True, True], 1.0)
        assert m.cp == pytest.approx(0.75)

    def test_insufficient_replicates(self):
        with pytest.raises(InsufficientReplicatesError):
            compute_metrics([1.0], None, None, 1.0)

    def test_mse_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            est = rng.normal(2.0, 0.5, int(rng.integers(5, 60)))
            m = compute_metrics(est, None, None, 2.0)
            B = len(est)
            bias = est.mean() - 2.0
            assert m.mse == pytest.approx(m.v_emp * (B - 1) / B + bias**2, rel=1e-10)


@pytest.fixture(scope="module")
def small_report():
    return run_monte_carlo(
        PopulationConfig(N=4000, seed=17),
        scenarios=(Scenario.LOG_LINK,),
        f_c_grid=(0.05,),
        methods=(Method.NAIVE, Method.TW, Method.ALP, Method.CLW),
        replicates=30,
        base_seed=5,
    )


class TestMonteCarlo:

    def test_report_structure(self, small_report):
        assert len(small_report.cells) == 4
        methods = [c.method for c in small_report.cells]
        assert methods == ["naive", "tw", "alp", "clw"]
        for cell in small_report.cells:
            assert cell.n_replicates + cell.n_excluded == 30
            assert cell.mean_cohort_size == pytest.approx(0.05 * 4000, rel=0.25)

    def test_naive_metrics_have_no_vr_cp(self, small_report):
        naive = small_report.cells[0]
        assert naive.vr is None and naive.cp is None
        alp = small_report.cells[2]
        assert alp.vr is not None and 0.0 <= alp.cp <= 1.0

    def test_rerun_is_identical(self, small_report):
        again = run_monte_carlo(
            PopulationConfig(N=4000, seed=17),
            scenarios=(Scenario.LOG_LINK,),
            f_c_grid=(0.05,),
            methods=(Method.NAIVE, Method.TW, Method.ALP, Method.CLW),
            replicates=30,
            base_seed=5,
        )
        for a, b in zip(small_report.cells, again.cells):
            assert a == b

    def test_naive_is_biased_downward(self, small_report):
        assert small_report.cells[0].pct_rb < -30
