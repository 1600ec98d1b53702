import numpy as np
import pytest

from pseudoweight import (
    CohortSample,
    DesignInfo,
    DesignKind,
    RescaleError,
    SurveySample,
    build_pooled_matrix,
    default_lambda,
    rdw_rescale_factor,
    validate_paired_samples,
)


def make_cohort(n=3, p_extra=2, seed=0):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n)] + [rng.normal(size=n) for _ in range(p_extra)])
    return CohortSample(y=rng.normal(size=n), X=X)


def make_survey(n=4, p_extra=2, seed=1, **kwargs):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n)] + [rng.normal(size=n) for _ in range(p_extra)])
    return SurveySample(X=X, d=rng.uniform(1.5, 4.0, n), **kwargs)


class TestContainers:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            CohortSample(y=np.ones(3), X=np.ones((4, 2)))
        with pytest.raises(ValueError):
            SurveySample(X=np.ones((3, 2)), d=np.ones(4))

    def test_empty_cohort_rejected(self):
        with pytest.raises(ValueError):
            CohortSample(y=np.array([]), X=np.empty((0, 2)))

    def test_arrays_are_read_only(self):
        c = make_cohort()
        with pytest.raises(ValueError):
            c.X[0, 0] = 5.0
        with pytest.raises(ValueError):
            c.y[0] = 5.0


class TestValidation:
    def test_matching_shapes_ok(self):
        report = validate_paired_samples(make_cohort(p_extra=2), make_survey(p_extra=2))
        assert report.ok
        assert report.violations == ()

    def test_column_mismatch_reported(self):
        report = validate_paired_samples(make_cohort(p_extra=2), make_survey(p_extra=3))
        assert not report.ok
        assert any("column mismatch" in v for v in report.violations)

    def test_zero_weight_reported_with_row(self):
        s = make_survey()
        d = s.d.copy()
        d[2] = 0.0
        bad = SurveySample(X=s.X, d=d)
        report = validate_paired_samples(make_cohort(), bad)
        assert any("nonpositive design weight at row 2" in v for v in report.violations)

    def test_single_psu_stratum_reported(self):
        s = make_survey(n=4)
        design = DesignInfo(
            kind=DesignKind.STRATIFIED_WR,
            stratum=np.array(["a", "a", "b", "b"]),
            psu=np.array([1, 2, 3, 3]),
        )
        bad = SurveySample(X=s.X, d=s.d, design=design)
        report = validate_paired_samples(make_cohort(), bad)
        assert any("stratum 'b' has < 2 PSUs" in v for v in report.violations)

    def test_non_finite_entries_reported(self):
        c = make_cohort()
        y = c.y.copy()
        y[0] = np.nan
        bad = CohortSample(y=y, X=c.X)
        report = validate_paired_samples(bad, make_survey())
        assert any("non-finite entries in cohort outcome" in v for v in report.violations)

    def test_missing_intercept_reported(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(3, 3))
        bad = CohortSample(y=np.zeros(3), X=X)
        report = validate_paired_samples(bad, make_survey())
        assert any("intercept" in v for v in report.violations)


class TestPooledMatrix:
    def test_identity_rule_layout(self):
        cohort = make_cohort(n=2)
        survey = make_survey(n=3)
        pooled = build_pooled_matrix(cohort, survey)
        assert pooled.X.shape == (5, 3)
        np.testing.assert_array_equal(pooled.R, [1, 1, 0, 0, 0])
        np.testing.assert_array_equal(pooled.w[:2], [1.0, 1.0])
        np.testing.assert_array_equal(pooled.w[2:], survey.d)

    def test_round_trip_split(self):
        cohort = make_cohort(n=5)
        survey = make_survey(n=7)
        Xc, Xp, wp = build_pooled_matrix(cohort, survey, 0.5).split()
        np.testing.assert_array_equal(Xc, cohort.X)
        np.testing.assert_array_equal(Xp, survey.X)
        np.testing.assert_allclose(wp, 0.5 * survey.d, rtol=0, atol=0)

    def test_rdw_rule_scales_by_out_of_cohort_share(self):
        # survey weight total 200 with a 50-unit cohort: factor 150/200
        survey = SurveySample(X=np.ones((4, 1)), d=np.full(4, 50.0))
        factor = rdw_rescale_factor(50, survey.d)
        assert factor == pytest.approx(0.75)
        cohort = CohortSample(y=np.zeros(50), X=np.ones((50, 1)))
        pooled = build_pooled_matrix(cohort, survey, factor)
        np.testing.assert_allclose(pooled.w[50:], 50.0 * 0.75)

    def test_rdw_survey_weight_total_identity(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n_c = int(rng.integers(2, 40))
            d = rng.uniform(1.0, 9.0, int(rng.integers(3, 30)))
            if n_c >= d.sum():
                continue
            factor = rdw_rescale_factor(n_c, d)
            assert (factor * d).sum() == pytest.approx(d.sum() - n_c, abs=1e-12)

    def test_rdw_rescale_error_when_cohort_too_large(self):
        with pytest.raises(RescaleError):
            rdw_rescale_factor(250, np.full(4, 50.0))

    def test_lambda_rule_survey_weight_total_is_cohort_size(self):
        rng = np.random.default_rng(8)
        d = rng.uniform(1.0, 30.0, 17)
        lam = default_lambda(12, d)
        assert (lam * d).sum() == pytest.approx(12.0, abs=1e-12)

    def test_quarter_lambda_example(self):
        # lambda = n_c / sum(d) = 0.25 scales every survey weight by 0.25
        d = np.full(4, 50.0)  # total 200, cohort of 50
        lam = default_lambda(50, d)
        assert lam == pytest.approx(0.25)
        survey = SurveySample(X=np.ones((4, 1)), d=d)
        cohort = CohortSample(y=np.zeros(50), X=np.ones((50, 1)))
        pooled = build_pooled_matrix(cohort, survey, lam)
        np.testing.assert_allclose(pooled.w[50:], 12.5)
