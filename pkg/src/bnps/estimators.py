"""Propensity scores from a fitted network and IPW estimates of the ATE."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm

from bnps.data import CategoricalDataset
from bnps.errors import DataError, DegenerateArmError, NumericError
from bnps.network import BayesianNetwork, FitOptions, conditional_query_rows, fit_mle
from bnps.search import SearchConfig, SearchResult, learn_structure

Z975 = float(norm.ppf(0.975))
DEFAULT_CLIP = 1e-6
ESTIMATE_COLUMNS = ["method", "ate", "se", "ci_low", "ci_high", "n_treated", "n_control", "clipped"]


@dataclass(frozen=True)
class PropensityModel:
    network: BayesianNetwork
    treatment: int | str
    clip_epsilon: float = DEFAULT_CLIP
    treated_state: str = "1"

    def __post_init__(self):
        t = self.network.index(self.treatment)
        meta = self.network.variables[t]
        if meta.cardinality != 2:
            raise DataError("treatment must be binary")
        if self.treated_state not in meta.states:
            raise DataError(f"treated state {self.treated_state!r} not a state of {meta.name!r}")
        if not 0 <= self.clip_epsilon < 0.5:
            raise ValueError("clip_epsilon must lie in [0, 0.5)")

    @property
    def treatment_index(self) -> int:
        return self.network.index(self.treatment)

    @property
    def treated_code(self) -> int:
        return self.network.variables[self.treatment_index].code_of(self.treated_state)


@dataclass(frozen=True)
class PropensityScores:
    scores: np.ndarray
    clipped: int
    raw: np.ndarray


def clip_scores(raw: np.ndarray, eps: float) -> tuple[np.ndarray, int]:
    clipped = int(((raw < eps) | (raw > 1 - eps)).sum())
    return np.clip(raw, eps, 1 - eps), clipped


def propensity_scores(model: PropensityModel, data: CategoricalDataset) -> PropensityScores:
    """P(T = treated | every other network variable) for each row of ``data``.

    ``data`` may carry extra columns (e.g. the outcome); network variables
    are matched by name and must have identical states.
    """
    bn = model.network
    idx = []
    for v in bn.variables:
        j = data.index(v.name)
        if data.variables[j].states != v.states:
            raise DataError(f"states of column {v.name!r} differ from the model")
        idx.append(j)
    codes = data.codes[:, idx]
    try:
        probs = conditional_query_rows(bn, model.treatment_index, codes)
    except NumericError as e:
        raise NumericError(f"propensity score undefined: {e}") from None
    raw = probs[:, model.treated_code]
    scores, clipped = clip_scores(raw, model.clip_epsilon)
    return PropensityScores(scores, clipped, raw)


@dataclass(frozen=True)
class AteEstimate:
    ate: float
    se: float
    ci_low: float
    ci_high: float
    method: str
    n_treated: int
    n_control: int
    clipped: int = 0
    ess_treated: float = float("nan")
    ess_control: float = float("nan")

    def row(self) -> list:
        return [self.method, self.ate, self.se, self.ci_low, self.ci_high,
                self.n_treated, self.n_control, self.clipped]

    def to_csv(self, header=True, digits: int | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(ESTIMATE_COLUMNS)
        row = self.row()
        if digits is not None:
            row = [f"{x:.{digits}f}" if isinstance(x, float) else x for x in row]
        w.writerow(row)
        return buf.getvalue()


def _arms(y, t, e):
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    e = np.asarray(e, dtype=float)
    if not (y.shape == t.shape == e.shape) or y.ndim != 1:
        raise DataError("y, t and e must be 1-d vectors of equal length")
    n1 = int(t.sum())
    if n1 == 0 or n1 == len(t):
        raise DegenerateArmError("degenerate arm: need treated and control units")
    return y, t, e, n1


def _estimate(ate, se, method, n1, n0, clipped, w1, w0) -> AteEstimate:
    ess1 = w1.sum() ** 2 / (w1 ** 2).sum()
    ess0 = w0.sum() ** 2 / (w0 ** 2).sum()
    return AteEstimate(float(ate), float(se), float(ate - Z975 * se), float(ate + Z975 * se),
                       method, n1, n0, clipped, float(ess1), float(ess0))


def hajek_ate(y, t, e, clipped: int = 0) -> AteEstimate:
    """Self-normalised IPW difference of arm means with a linearised
    (ratio-estimator) variance for each arm."""
    y, t, e, n1 = _arms(y, t, e)
    w1 = t / e
    w0 = (1 - t) / (1 - e)
    s1, s0 = w1.sum(), w0.sum()
    mu1 = (w1 * y).sum() / s1
    mu0 = (w0 * y).sum() / s0
    var = ((w1 * (y - mu1)) ** 2).sum() / s1 ** 2 + ((w0 * (y - mu0)) ** 2).sum() / s0 ** 2
    return _estimate(mu1 - mu0, np.sqrt(var), "hajek", n1, len(t) - n1, clipped,
                     w1[t == 1], w0[t == 0])


def horvitz_thompson_ate(y, t, e, clipped: int = 0) -> AteEstimate:
    y, t, e, n1 = _arms(y, t, e)
    n = len(t)
    a1 = t * y / e
    a0 = (1 - t) * y / (1 - e)
    mu1, mu0 = a1.mean(), a0.mean()
    se = np.sqrt((((a1 - mu1) ** 2).sum() + ((a0 - mu0) ** 2).sum()) / n ** 2)
    return _estimate(mu1 - mu0, se, "horvitz_thompson", n1, n - n1, clipped,
                     (t / e)[t == 1], ((1 - t) / (1 - e))[t == 0])


def reject_null(est: AteEstimate, level: float = 0.05) -> bool:
    """Reject 'no effect' iff the (1 - level) interval excludes zero."""
    if not est.se > 0:
        raise NumericError("degenerate variance")
    if level == 0.05:
        lo, hi = est.ci_low, est.ci_high
    else:
        z = norm.ppf(1 - level / 2)
        lo, hi = est.ate - z * est.se, est.ate + z * est.se
    return not (lo <= 0.0 <= hi)


@dataclass
class BnpsResult:
    estimate: AteEstimate
    network: BayesianNetwork
    search: SearchResult
    scores: PropensityScores
    learning_data: CategoricalDataset = field(repr=False)


def binary_vector(data: CategoricalDataset, col, positive: str = "1") -> np.ndarray:
    meta = data.variables[data.index(col)]
    if meta.cardinality != 2:
        raise DataError(f"column {meta.name!r} must be binary")
    return (data.column(col) == meta.code_of(positive)).astype(float)


def bnps_pipeline(
    data: CategoricalDataset,
    covariates: Sequence[int | str],
    treatment: int | str,
    outcome: int | str,
    search: SearchConfig = SearchConfig(),
    fit: FitOptions = FitOptions(),
    clip_epsilon: float = DEFAULT_CLIP,
    estimator: str = "hajek",
    treated_state: str = "1",
) -> BnpsResult:
    """Learn a network over covariates + treatment, query the propensity of
    every row, and weight the outcome."""
    cov = [data.index(c) for c in covariates]
    t, y = data.index(treatment), data.index(outcome)
    if len({*cov, t, y}) != len(cov) + 2:
        raise DataError("covariate, treatment and outcome columns must be disjoint")
    sub, res = learn_structure(data, cov + [t], search)
    bn = fit_mle(sub, res.dag, fit)
    model = PropensityModel(bn, len(cov), clip_epsilon, treated_state)
    ps = propensity_scores(model, sub)
    tv = binary_vector(data, t, treated_state)
    yv = binary_vector(data, y)
    fn = hajek_ate if estimator == "hajek" else horvitz_thompson_ate
    return BnpsResult(fn(yv, tv, ps.scores, ps.clipped), bn, res, ps, sub)
