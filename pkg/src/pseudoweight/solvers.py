"""Estimating-equation solvers for the two propensity systems.

Both systems are solved on the unnormalized score (sums, not means), but the
convergence tolerance is applied to the score divided by the total number of
pooled rows, so that ``tol`` is scale free.  :func:`score_at` returns the
same normalized score for diagnostics and tests.

The pooled membership system,

    sum_cohort w (1 - p) x  -  sum_survey w p x  =  0,   p = expit(beta . x),

is the score of a weighted logistic regression of the membership indicator
on the covariates, and is solved by iteratively reweighted least squares.
The second system,

    sum_cohort x  -  sum_survey d pi x  =  0,   pi = expit(gamma . x),

is *not* a logistic score: its Jacobian sums over the survey side only.  It
is solved by Newton-Raphson.  Both solvers use step halving so the score
max-norm is non-increasing across accepted iterates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import InfeasibleTotalsError, NonConvergenceError, SingularSystemError
from .samples import CohortSample, FitFlavor, PooledMatrix, PropensityFit, SurveySample

# Beyond this coefficient magnitude the fitted probabilities are saturated;
# continued growth means the score cannot be zeroed (infeasible totals).
_DIVERGENCE_BOUND = 30.0
_MAX_CONDITION = 1e12


@dataclass(frozen=True)
class SolverConfig:
    """Settings shared by both solvers.

    ``tol`` bounds the max-norm of the score divided by the pooled row
    count.  ``init`` is the starting coefficient vector (zeros when None,
    which puts every fitted probability at one half).
    """

    tol: float = 1e-10
    max_iter: int = 50
    step_halving_max: int = 20
    init: np.ndarray | None = None

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


def _solve_newton_system(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Solve H delta = g, refusing rank-deficient systems."""
    if not np.all(np.isfinite(H)):
        raise SingularSystemError("normal-equation matrix contains non-finite entries")
    if np.linalg.cond(H) > _MAX_CONDITION:
        raise SingularSystemError(
            "normal-equation matrix is rank deficient (condition number "
            f"exceeds {_MAX_CONDITION:g}); check for collinear covariates"
        )
    return np.linalg.solve(H, g)


def _check_probabilities(p: np.ndarray, what: str) -> None:
    if p.size and not np.all((p > 0.0) & (p < 1.0)):
        raise NonConvergenceError(
            f"fitted {what} probabilities reached 0 or 1 exactly; "
            "the linear predictor is saturated (separation?)"
        )


def fit_pooled_logistic(pooled: PooledMatrix, config: SolverConfig | None = None) -> PropensityFit:
    """Weighted logistic pseudo-maximum-likelihood on the pooled rows.

    Returns the coefficient vector solving the weighted membership score,
    with fitted probabilities split back into cohort and survey rows.

    Raises
    ------
    NonConvergenceError
        Score norm still above tolerance after ``max_iter`` iterations, or
        step halving cannot improve the score (typically separation).
    SingularSystemError
        The iteratively reweighted normal equations are rank deficient.
    """
    config = config or SolverConfig()
    X, R, w = pooled.X, pooled.R, pooled.w
    n_rows = X.shape[0]
    beta = (
        np.zeros(X.shape[1])
        if config.init is None
        else np.asarray(config.init, dtype=float).copy()
    )

    p = expit(X @ beta)
    score = X.T @ (w * (R - p))
    norm = float(np.abs(score).max()) / n_rows
    path = [norm]

    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        if norm <= config.tol:
            iterations -= 1
            break
        W = w * p * (1.0 - p)
        H = X.T @ (W[:, None] * X)
        delta = _solve_newton_system(H, score)

        step = 1.0
        for _ in range(config.step_halving_max + 1):
            cand = beta + step * delta
            p_cand = expit(X @ cand)
            score_cand = X.T @ (w * (R - p_cand))
            norm_cand = float(np.abs(score_cand).max()) / n_rows
            if norm_cand < norm:
                beta, p, score, norm = cand, p_cand, score_cand, norm_cand
                path.append(norm)
                break
            step *= 0.5
        else:
            raise NonConvergenceError(
                "step halving exhausted without improving the membership score "
                f"(norm {norm:.3e}); the data may be separated",
                score_norm=norm,
                iterations=iterations,
            )

    if norm > config.tol:
        raise NonConvergenceError(
            f"pooled logistic fit did not converge in {config.max_iter} iterations "
            f"(score norm {norm:.3e} > tol {config.tol:.1e})",
            score_norm=norm,
            iterations=config.max_iter,
        )

    p_cohort = expit(pooled.X[: pooled.n_c] @ beta)
    p_survey = expit(pooled.X[pooled.n_c :] @ beta)
    _check_probabilities(p_cohort, "cohort")
    _check_probabilities(p_survey, "survey")
    return PropensityFit(
        beta=beta,
        p_hat_cohort=p_cohort,
        p_hat_survey=p_survey,
        flavor=FitFlavor.POOLED_MEMBERSHIP,
        lam=pooled.lam,
        iterations=iterations,
        final_score_norm=norm,
        score_norm_path=tuple(path),
    )


def fit_clw_score(
    cohort: CohortSample, survey: SurveySample, config: SolverConfig | None = None
) -> PropensityFit:
    """Newton-Raphson solve of the participation-rate score system.

    The score matches the cohort covariate totals against the
    design-weighted survey totals of ``pi(gamma) x``; its Jacobian involves
    survey rows only.

    Raises
    ------
    InfeasibleTotalsError
        The cohort totals exceed what any probability below one can
        reproduce on the weighted survey (detected up front for the
        intercept and by coefficient divergence otherwise).
    NonConvergenceError, SingularSystemError
        As for the pooled fit.
    """
    config = config or SolverConfig()
    Xc, Xp, d = cohort.X, survey.X, survey.d
    n_rows = Xc.shape[0] + Xp.shape[0]
    sum_d = float(np.sum(d))
    if cohort.n_c >= sum_d:
        raise InfeasibleTotalsError(
            f"cohort size {cohort.n_c} is not smaller than the survey weight "
            f"total {sum_d:.1f}; no participation probabilities below one can "
            "reproduce the cohort count"
        )

    target = Xc.sum(axis=0)
    gamma = (
        np.zeros(Xc.shape[1])
        if config.init is None
        else np.asarray(config.init, dtype=float).copy()
    )

    def raw_score(g):
        return target - (d * expit(Xp @ g)) @ Xp

    score = raw_score(gamma)
    norm = float(np.abs(score).max()) / n_rows
    path = [norm]

    def diverged(g):
        return float(np.abs(g).max()) > _DIVERGENCE_BOUND

    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        if norm <= config.tol:
            iterations -= 1
            break
        pi = expit(Xp @ gamma)
        J = Xp.T @ ((d * pi * (1.0 - pi))[:, None] * Xp)
        delta = _solve_newton_system(J, score)

        step = 1.0
        for _ in range(config.step_halving_max + 1):
            cand = gamma + step * delta
            score_cand = raw_score(cand)
            norm_cand = float(np.abs(score_cand).max()) / n_rows
            if norm_cand < norm:
                gamma, score, norm = cand, score_cand, norm_cand
                path.append(norm)
                break
            step *= 0.5
        else:
            if diverged(gamma):
                raise InfeasibleTotalsError(
                    "coefficients diverged while the score stayed at "
                    f"{norm:.3e}; the cohort covariate totals are infeasible "
                    "for the weighted survey"
                )
            raise NonConvergenceError(
                "step halving exhausted without improving the participation "
                f"score (norm {norm:.3e})",
                score_norm=norm,
                iterations=iterations,
            )

    if norm > config.tol:
        if diverged(gamma):
            raise InfeasibleTotalsError(
                "coefficients diverged while the score stayed at "
                f"{norm:.3e}; the cohort covariate totals are infeasible "
                "for the weighted survey"
            )
        raise NonConvergenceError(
            f"participation-score fit did not converge in {config.max_iter} "
            f"iterations (score norm {norm:.3e} > tol {config.tol:.1e})",
            score_norm=norm,
            iterations=config.max_iter,
        )

    pi_cohort = expit(Xc @ gamma)
    pi_survey = expit(Xp @ gamma)
    _check_probabilities(pi_cohort, "cohort participation")
    _check_probabilities(pi_survey, "survey participation")
    return PropensityFit(
        beta=gamma,
        p_hat_cohort=pi_cohort,
        p_hat_survey=pi_survey,
        flavor=FitFlavor.CLW_SCORE,
        lam=1.0,
        iterations=iterations,
        final_score_norm=norm,
        score_norm_path=tuple(path),
    )


def score_at(
    flavor: FitFlavor,
    coefficients: np.ndarray,
    cohort: CohortSample,
    survey: SurveySample,
    lam: float = 1.0,
) -> np.ndarray:
    """Evaluate the (scale-free) estimating equation at given coefficients.

    Returns the raw score divided by the pooled row count, matching the
    solvers' convergence convention, so a converged solution satisfies
    ``abs(score_at(...)).max() <= tol``.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    n_rows = cohort.n_c + survey.n_p
    if flavor is FitFlavor.POOLED_MEMBERSHIP:
        p_c = expit(cohort.X @ coefficients)
        p_s = expit(survey.X @ coefficients)
        raw = (1.0 - p_c) @ cohort.X - (lam * survey.d * p_s) @ survey.X
    elif flavor is FitFlavor.CLW_SCORE:
        pi_s = expit(survey.X @ coefficients)
        raw = cohort.X.sum(axis=0) - (survey.d * pi_s) @ survey.X
    else:  # pragma: no cover - exhaustive enum
        raise ValueError(f"unknown fit flavor {flavor!r}")
    return raw / n_rows
