"""Weighted logistic regression by IRLS, and the logistic-PS + WLR baseline."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from bnps.data import CategoricalDataset
from bnps.errors import DataError, NumericError, SeparationError
from bnps.estimators import DEFAULT_CLIP, binary_vector, clip_scores

SEPARATION_NORM = 1e3


@dataclass(frozen=True)
class LogitModel:
    coefficients: np.ndarray
    covariance: np.ndarray
    converged: bool
    iterations: int
    robust: bool

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    def predict(self, design) -> np.ndarray:
        return expit(np.asarray(design, dtype=float) @ self.coefficients)


def irls_fit(
    design,
    y,
    weights=None,
    tol: float = 1e-8,
    max_iter: int = 50,
    robust: bool = False,
) -> LogitModel:
    """Maximise sum_i w_i [y_i log pi_i + (1 - y_i) log(1 - pi_i)] by Newton/IRLS.

    Converged when max |delta beta| < tol. Covariance is the inverse
    information A^-1, or the sandwich A^-1 B A^-1 with B = sum w^2 (y-pi)^2 x x'
    when ``robust``.
    """
    X = np.asarray(design, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=float)
    if X.shape[0] != len(y) or len(w) != len(y):
        raise DataError("design, y and weights must have the same number of rows")
    if (w < 0).any() or not (w > 0).any():
        raise DataError("weights must be nonnegative and not all zero")
    if np.linalg.matrix_rank(X[w > 0]) < X.shape[1]:
        raise NumericError("singular information")

    beta = np.zeros(X.shape[1])
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        pi = expit(X @ beta)
        A = (X * (w * pi * (1 - pi))[:, None]).T @ X
        g = X.T @ (w * (y - pi))
        try:
            step = np.linalg.solve(A, g)
        except np.linalg.LinAlgError:
            # full rank was checked up front: fitted probabilities hit 0/1
            raise SeparationError("separation suspected") from None
        beta = beta + step
        if not np.all(np.isfinite(beta)) or np.abs(beta).max() > SEPARATION_NORM:
            raise SeparationError("separation suspected")
        if np.abs(step).max() < tol:
            converged = True
            break
    if not converged:
        raise SeparationError("separation suspected: IRLS did not converge")

    pi = expit(X @ beta)
    A = (X * (w * pi * (1 - pi))[:, None]).T @ X
    try:
        A_inv = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        raise NumericError("singular information") from None
    if robust:
        s = w * (y - pi)
        B = (X * (s ** 2)[:, None]).T @ X
        cov = A_inv @ B @ A_inv
    else:
        cov = A_inv
    cov = (cov + cov.T) / 2
    if (np.diag(cov) < 0).any():
        raise NumericError("singular information: negative variance estimate")
    return LogitModel(beta, cov, converged, it, robust)


def dummy_design(
    data: CategoricalDataset,
    columns: Sequence[int | str],
    reference: str = "first",
    drop_absent: bool = True,
) -> np.ndarray:
    """Main-effects design: intercept plus one indicator per non-reference state.

    Indicators of states absent from the sample carry no information and
    are dropped when ``drop_absent``.
    """
    cols = [np.ones(data.n)]
    for c in columns:
        meta = data.variables[data.index(c)]
        x = data.column(c)
        ref = 0 if reference == "first" else meta.cardinality - 1
        for k in range(meta.cardinality):
            if k == ref:
                continue
            ind = (x == k).astype(float)
            if drop_absent and not ind.any():
                continue
            cols.append(ind)
    return np.column_stack(cols)


def ps_logistic(
    data: CategoricalDataset,
    treatment: int | str,
    covariates: Sequence[int | str],
    clip_epsilon: float = DEFAULT_CLIP,
    treated_state: str = "1",
):
    """Main-effects logistic propensity scores; returns (scores, clipped)."""
    t = binary_vector(data, treatment, treated_state)
    X = dummy_design(data, covariates)
    m = irls_fit(X, t)
    return clip_scores(m.predict(X), clip_epsilon)


@dataclass(frozen=True)
class WlrTest:
    coef_t: float
    se_t: float
    z: float
    p_value: float
    reject: bool
    model: LogitModel


def wlr_ate_test(
    data: CategoricalDataset,
    ps,
    treatment: int | str,
    outcome: int | str,
    covariates: Sequence[int | str] = (),
    with_covariates: bool = False,
    robust: bool = True,
    level: float = 0.05,
) -> WlrTest:
    """IPW-weighted logistic regression of the outcome on treatment (plus
    covariate indicators when ``with_covariates``); Wald test of the
    treatment coefficient."""
    ps = np.asarray(ps, dtype=float)
    if ((ps <= 0) | (ps >= 1)).any():
        raise DataError("propensity scores must lie strictly inside (0, 1)")
    t = binary_vector(data, treatment)
    y = binary_vector(data, outcome)
    w = t / ps + (1 - t) / (1 - ps)
    if with_covariates:
        base = dummy_design(data, covariates)
        X = np.column_stack([base[:, :1], t, base[:, 1:]])
    else:
        X = np.column_stack([np.ones(data.n), t])
    m = irls_fit(X, y, w, robust=robust)
    coef, se = float(m.coefficients[1]), float(m.se[1])
    if not se > 0:
        raise NumericError("degenerate variance")
    z = coef / se
    p = float(2 * norm.sf(abs(z)))
    return WlrTest(coef, se, z, p, p < level, m)
