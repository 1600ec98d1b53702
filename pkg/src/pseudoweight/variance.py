"""Linearized variance estimation for pseudo-weighted means.

The variance of a pseudo-weighted mean splits into a cohort-side component
(randomness of who volunteers) and a design-side component ``b' D b``
(randomness of the reference survey), where ``b`` is the linearization
coefficient transferring propensity-coefficient noise into the mean and
``D`` estimates the design variance of the survey total of ``d * p * x``.

Two cohort-side forms are implemented, matching the two estimating-equation
systems:

* membership form, for fits of the pooled membership model (uses the
  factor ``(1 - p)(1 - 2p)`` and residuals ``(y - mu)/p - b.x``);
* participation form, for participation-rate score fits (factor ``1 - pi``
  and residuals ``(y - mu)/pi - b.x``).

Sample sums that stand in for population totals are inverse-participation
weighted.  With ``weights=None`` the membership-form helpers fall back to
unweighted cohort sums; the estimators always pass the pseudo-weights, which
is what keeps the variance ratio near one in simulation.

All design matrices are normalized by the squared total of the (effective)
survey weights.  When a fit scaled the survey weights by a constant, that
constant stays attached: the scaled weights enter the PSU totals and the
normalizing total alike.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DesignError, SingularSystemError
from .samples import CohortSample, DesignKind, PropensityFit, FitFlavor, SurveySample


@dataclass(frozen=True)
class VarianceBreakdown:
    """Total variance and its cohort/design split.

    ``v_cohort`` can be negative when many fitted probabilities exceed one
    half; the total is still reported, with a warning, rather than failing.
    """

    v_cohort: float
    v_design: float
    v_total: float
    b_hat: np.ndarray
    n_hat_cohort: float
    n_hat_survey: float
    warnings: tuple = ()


def _solve_spd(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(A)):
        raise SingularSystemError("linearization system contains non-finite entries")
    if np.linalg.cond(A) > 1e12:
        raise SingularSystemError(
            "linearization system is rank deficient; check for collinear covariates"
        )
    return np.linalg.solve(A, rhs)


def compute_b_hat(
    cohort: CohortSample,
    p_hat_cohort: np.ndarray,
    mu_hat: float,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Linearization coefficient for membership-model fits.

    Solves ``(sum w p x x') b = sum w (y - mu) x`` over cohort rows without
    forming an explicit inverse.  ``weights`` are the pseudo-weights used to
    estimate population totals from the cohort; ``None`` means unweighted
    sums.
    """
    w = np.ones(cohort.n_c) if weights is None else np.asarray(weights, dtype=float)
    X = cohort.X
    A = X.T @ ((w * p_hat_cohort)[:, None] * X)
    rhs = (w * (cohort.y - mu_hat)) @ X
    return _solve_spd(A, rhs)


def compute_b_hat_participation(
    cohort: CohortSample, pi_hat_cohort: np.ndarray, mu_hat: float
) -> np.ndarray:
    """Linearization coefficient for participation-score fits.

    Population sums are estimated from the cohort with inverse-participation
    weights, giving ``(sum (1 - pi) x x') b = sum ((1 - pi)/pi) (y - mu) x``.
    """
    X = cohort.X
    A = X.T @ ((1.0 - pi_hat_cohort)[:, None] * X)
    rhs = (((1.0 - pi_hat_cohort) / pi_hat_cohort) * (cohort.y - mu_hat)) @ X
    return _solve_spd(A, rhs)


def variance_cohort_component(
    cohort: CohortSample,
    p_hat_cohort: np.ndarray,
    weights: np.ndarray,
    mu_hat: float,
    b_hat: np.ndarray,
) -> float:
    """Cohort-side variance plug-in for membership-model fits.

    Terms with fitted probability above one half contribute negatively via
    the ``(1 - 2p)`` factor; the sum is returned as-is.
    """
    n_hat_c = float(np.sum(weights))
    resid = (cohort.y - mu_hat) / p_hat_cohort - cohort.X @ b_hat
    total = float(
        np.sum((1.0 - p_hat_cohort) * (1.0 - 2.0 * p_hat_cohort) * resid**2)
    )
    return total / n_hat_c**2


def variance_cohort_component_participation(
    cohort: CohortSample,
    pi_hat_cohort: np.ndarray,
    weights: np.ndarray,
    mu_hat: float,
    b_hat: np.ndarray,
) -> float:
    """Cohort-side variance plug-in for participation-score fits."""
    n_hat_c = float(np.sum(weights))
    resid = (cohort.y - mu_hat) / pi_hat_cohort - cohort.X @ b_hat
    total = float(np.sum((1.0 - pi_hat_cohort) * resid**2))
    return total / n_hat_c**2


def _psu_design_matrix(
    X: np.ndarray,
    w: np.ndarray,
    p_hat: np.ndarray,
    stratum: np.ndarray,
    psu: np.ndarray,
) -> np.ndarray:
    """With-replacement PSU variance of the weighted total of ``w p x``."""
    p_cols = X.shape[1]
    z_unit = (w * p_hat)[:, None] * X
    n_hat_p = float(np.sum(w))
    D = np.zeros((p_cols, p_cols))
    for h in np.unique(stratum):
        mask = stratum == h
        psus_h = np.unique(psu[mask])
        a_h = len(psus_h)
        if a_h < 2:
            raise DesignError(
                f"stratum {h!r} has a single PSU; collapse it with a "
                "neighbouring stratum before variance estimation"
            )
        z = np.stack([z_unit[mask & (psu == l)].sum(axis=0) for l in psus_h])
        dev = z - z.mean(axis=0)
        D += (a_h / (a_h - 1.0)) * dev.T @ dev
    return D / n_hat_p**2


def design_variance_stratified(
    survey: SurveySample,
    p_hat_survey: np.ndarray,
    weight_multiplier: float = 1.0,
) -> np.ndarray:
    """Design variance matrix under stratified multistage cluster sampling
    with PSUs treated as sampled with replacement within strata.

    ``weight_multiplier`` scales the survey weights everywhere they appear
    (inside the PSU totals and in the normalizing total), matching how
    scaled-weight fits substitute their weights into the formula.
    """
    if survey.design.stratum is None or survey.design.psu is None:
        raise DesignError("stratified variance requires stratum and psu labels")
    return _psu_design_matrix(
        survey.X,
        weight_multiplier * survey.d,
        np.asarray(p_hat_survey, dtype=float),
        np.asarray(survey.design.stratum),
        np.asarray(survey.design.psu),
    )


def design_variance_poisson(
    survey: SurveySample,
    p_hat_survey: np.ndarray,
    weight_multiplier: float = 1.0,
) -> np.ndarray:
    """Design variance matrix under Poisson sampling of the survey.

    Plug-in of the population form ``sum (d - 1) p^2 x x'``: each population
    term is estimated by ``d`` times its sample value, normalized by the
    squared weight total.  Requires design weights of at least one (an
    inclusion probability cannot exceed one).
    """
    if np.any(survey.d < 1.0):
        raise DesignError(
            "Poisson design variance requires design weights >= 1 "
            "(inclusion probabilities cannot exceed one)"
        )
    w = weight_multiplier * survey.d
    p_hat = np.asarray(p_hat_survey, dtype=float)
    n_hat_p = float(np.sum(w))
    scaled = (w * (w - 1.0) * p_hat**2)[:, None] * survey.X
    return (scaled.T @ survey.X) / n_hat_p**2


def design_variance_iid(
    survey: SurveySample,
    p_hat_survey: np.ndarray,
    weight_multiplier: float = 1.0,
) -> np.ndarray:
    """Fallback design variance treating each unit as its own PSU in a
    single with-replacement stratum; a defensible default when no design
    labels are available."""
    if survey.n_p < 2:
        raise DesignError("iid design variance needs at least two survey units")
    ones = np.zeros(survey.n_p, dtype=int)
    units = np.arange(survey.n_p)
    return _psu_design_matrix(
        survey.X,
        weight_multiplier * survey.d,
        np.asarray(p_hat_survey, dtype=float),
        ones,
        units,
    )


def _design_matrix(
    survey: SurveySample, p_hat_survey: np.ndarray, weight_multiplier: float
) -> np.ndarray:
    kind = survey.design.kind
    if kind is DesignKind.POISSON:
        return design_variance_poisson(survey, p_hat_survey, weight_multiplier)
    if kind is DesignKind.STRATIFIED_WR:
        return design_variance_stratified(survey, p_hat_survey, weight_multiplier)
    if kind is DesignKind.IID:
        return design_variance_iid(survey, p_hat_survey, weight_multiplier)
    raise DesignError(f"unknown design kind {kind!r}")  # pragma: no cover


def tl_variance(
    cohort: CohortSample,
    survey: SurveySample,
    fit: PropensityFit,
    weights: np.ndarray,
    mu_hat: float,
    p_cohort: np.ndarray | None = None,
    p_survey: np.ndarray | None = None,
) -> VarianceBreakdown:
    """Assemble the linearized variance for a pseudo-weighted mean.

    ``weights`` are the method's pseudo-weights for the cohort units.  The
    probabilities default to the fit's own; scaled-weight estimation passes
    substitutes (its probability scale differs from the fitted membership
    probabilities).  The design matrix is chosen by the survey's design
    metadata and uses the fit's survey-weight multiplier throughout.

    A negative cohort component is reported with a warning rather than
    raised: it is a known small-sample behaviour of the membership-form
    plug-in when many fitted probabilities exceed one half.
    """
    weights = np.asarray(weights, dtype=float)
    p_c = fit.p_hat_cohort if p_cohort is None else np.asarray(p_cohort, dtype=float)
    p_s = fit.p_hat_survey if p_survey is None else np.asarray(p_survey, dtype=float)

    if fit.flavor is FitFlavor.POOLED_MEMBERSHIP:
        b_hat = compute_b_hat(cohort, p_c, mu_hat, weights=weights)
        v_cohort = variance_cohort_component(cohort, p_c, weights, mu_hat, b_hat)
    else:
        b_hat = compute_b_hat_participation(cohort, p_c, mu_hat)
        v_cohort = variance_cohort_component_participation(
            cohort, p_c, weights, mu_hat, b_hat
        )

    D = _design_matrix(survey, p_s, fit.lam)
    v_design = float(b_hat @ D @ b_hat)

    warnings = ()
    if v_cohort < 0:
        warnings = ("negative-cohort-component",)
    return VarianceBreakdown(
        v_cohort=v_cohort,
        v_design=v_design,
        v_total=v_cohort + v_design,
        b_hat=b_hat,
        n_hat_cohort=float(np.sum(weights)),
        n_hat_survey=float(fit.lam * np.sum(survey.d)),
        warnings=warnings,
    )


def fixed_weight_variance(
    cohort: CohortSample, participation: np.ndarray, mu_hat: float
) -> VarianceBreakdown:
    """Variance treating the participation probabilities as known constants.

    No coefficient-uncertainty term and no design component: this is the
    independent-inclusion variance of the weighted mean with fixed weights
    ``1/participation``, used for the true-weight oracle estimator.
    """
    pi = np.asarray(participation, dtype=float)
    w = 1.0 / pi
    b0 = np.zeros(cohort.n_covariates)
    v = variance_cohort_component_participation(cohort, pi, w, mu_hat, b0)
    return VarianceBreakdown(
        v_cohort=v,
        v_design=0.0,
        v_total=v,
        b_hat=b0,
        n_hat_cohort=float(np.sum(w)),
        n_hat_survey=0.0,
        warnings=(),
    )
