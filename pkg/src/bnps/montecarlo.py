"""Replicate-level simulation driver: rejection rate and coverage per cell."""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from bnps.errors import BnpsError
from bnps.estimators import bnps_pipeline, reject_null
from bnps.groundtruth import SCENARIOS, generate_dataset, true_ate
from bnps.logit import ps_logistic, wlr_ate_test
from bnps.search import SearchConfig

log = logging.getLogger(__name__)

METHODS = ("bn_hajek", "log_wlr_nocov", "log_wlr_cov")
DEFAULT_SIZES = (250, 500, 1000, 2500, 5000)
COVARIATES = ("X1", "X2", "X3", "X4", "X5", "X6")
MAX_FAILURE_FRACTION = 0.05
RESULT_COLUMNS = ["scenario", "n", "method", "err", "ec", "mean_est", "sd_est", "mean_bias",
                  "failures", "miss_low", "miss_high", "flagged"]

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def replicate_seed(master_seed: int, scenario_id: str, n: int, r: int) -> int:
    """h <- splitmix64(master); then h <- splitmix64(h xor part) for the
    scenario number, the sample size and the replicate index in turn."""
    h = splitmix64(master_seed & _MASK)
    for part in (int(scenario_id.lstrip("Ss")), n, r):
        h = splitmix64(h ^ part)
    return h


@dataclass(frozen=True)
class McConfig:
    scenarios: tuple[str, ...] = tuple(SCENARIOS)
    sizes: tuple[int, ...] = DEFAULT_SIZES
    replicates: int = 1000
    methods: tuple[str, ...] = METHODS
    master_seed: int = 20250101
    workers: int = 1
    search: SearchConfig = SearchConfig()

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(s.upper() for s in self.scenarios))
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.scenarios or not self.sizes or not self.methods:
            raise ValueError("scenarios, sizes and methods must be non-empty")
        bad = [s for s in self.scenarios if s not in SCENARIOS]
        if bad:
            raise ValueError(f"unknown scenarios {bad}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {list(METHODS)}")
        if any(n < 2 for n in self.sizes):
            raise ValueError("sample sizes must be >= 2")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class Outcome:
    """One method on one replicate: point estimate, CI (if any), decision."""

    est: float = math.nan
    ci: tuple[float, float] | None = None
    reject: bool = False
    failure: str | None = None


def run_replicate(scenario_id: str, n: int, r: int, master_seed: int,
                  methods: Sequence[str], search: SearchConfig = SearchConfig()) -> dict[str, Outcome]:
    s = SCENARIOS[scenario_id]
    data = generate_dataset(s, n, replicate_seed(master_seed, scenario_id, n, r)).data
    out: dict[str, Outcome] = {}
    if "bn_hajek" in methods:
        try:
            est = bnps_pipeline(data, COVARIATES, "T", "Y", search).estimate
            out["bn_hajek"] = Outcome(est.ate, (est.ci_low, est.ci_high), reject_null(est))
        except BnpsError as e:
            out["bn_hajek"] = Outcome(failure=type(e).__name__ + ": " + str(e))
    wlr = [m for m in methods if m.startswith("log_wlr")]
    if wlr:
        try:
            ps, _ = ps_logistic(data, "T", COVARIATES)
        except BnpsError as e:
            for m in wlr:
                out[m] = Outcome(failure="ps: " + str(e))
            ps = None
        if ps is not None:
            for m in wlr:
                try:
                    res = wlr_ate_test(data, ps, "T", "Y", COVARIATES,
                                       with_covariates=(m == "log_wlr_cov"))
                    out[m] = Outcome(res.coef_t, None, res.reject)
                except BnpsError as e:
                    out[m] = Outcome(failure=str(e))
    return out


def _run_chunk(args):
    scenario_id, n, rs, master_seed, methods, search = args
    return [run_replicate(scenario_id, n, r, master_seed, methods, search) for r in rs]


@dataclass
class CellResult:
    scenario: str
    n: int
    method: str
    replicates: int
    err: float
    ec: float
    mean_est: float
    sd_est: float
    mean_bias: float
    failures: int
    miss_low: float
    miss_high: float
    failure_reasons: Counter = field(default_factory=Counter)

    @property
    def flagged(self) -> bool:
        return self.failures > MAX_FAILURE_FRACTION * self.replicates

    def row(self) -> list:
        return [self.scenario, self.n, self.method, self.err, self.ec, self.mean_est,
                self.sd_est, self.mean_bias, self.failures, self.miss_low, self.miss_high,
                int(self.flagged)]


@dataclass
class McResult:
    cells: list[CellResult]
    config: McConfig

    def cell(self, scenario: str, n: int, method: str) -> CellResult:
        for c in self.cells:
            if (c.scenario, c.n, c.method) == (scenario, n, method):
                return c
        raise KeyError((scenario, n, method))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for c in self.cells:
            w.writerow(["" if isinstance(x, float) and math.isnan(x) else
                        (repr(x) if isinstance(x, float) else x) for x in c.row()])
        return buf.getvalue()


def aggregate(scenario_id: str, n: int, method: str, outcomes: list[Outcome]) -> CellResult:
    ok = [o for o in outcomes if o.failure is None]
    reasons = Counter(o.failure for o in outcomes if o.failure is not None)
    nan = math.nan
    if not ok:
        return CellResult(scenario_id, n, method, len(outcomes), nan, nan, nan, nan, nan,
                          len(outcomes), nan, nan, reasons)
    est = np.array([o.est for o in ok])
    err = sum(o.reject for o in ok) / len(ok)
    ec = miss_low = miss_high = mean_bias = nan
    if method == "bn_hajek":
        theta = true_ate(SCENARIOS[scenario_id])
        ec = sum(o.ci[0] <= theta <= o.ci[1] for o in ok) / len(ok)
        miss_low = sum(o.ci[1] < theta for o in ok) / len(ok)
        miss_high = sum(o.ci[0] > theta for o in ok) / len(ok)
        mean_bias = float(est.mean() - theta)
    sd = float(est.std(ddof=1)) if len(est) > 1 else nan
    return CellResult(scenario_id, n, method, len(outcomes), err, ec, float(est.mean()), sd,
                      mean_bias, len(outcomes) - len(ok), miss_low, miss_high, reasons)


def run_grid(cfg: McConfig) -> McResult:
    """Every (scenario, n) cell, every replicate, every method.

    Replicate seeds depend only on (master_seed, scenario, n, r), and cells
    are aggregated in replicate order, so the numbers do not depend on the
    worker count or on which other cells are requested.
    """
    cells: list[CellResult] = []
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for sid in cfg.scenarios:
            for n in cfg.sizes:
                rs = list(range(cfg.replicates))
                if pool is None:
                    outs = _run_chunk((sid, n, rs, cfg.master_seed, cfg.methods, cfg.search))
                else:
                    k = max(1, math.ceil(len(rs) / (4 * cfg.workers)))
                    chunks = [(sid, n, rs[i:i + k], cfg.master_seed, cfg.methods, cfg.search)
                              for i in range(0, len(rs), k)]
                    outs = [o for part in pool.map(_run_chunk, chunks) for o in part]
                for m in cfg.methods:
                    c = aggregate(sid, n, m, [o[m] for o in outs])
                    cells.append(c)
                    log.info("%s n=%d %s: err=%.3f ec=%.3f failures=%d%s", sid, n, m, c.err,
                             c.ec, c.failures, " FLAGGED" if c.flagged else "")
    finally:
        if pool is not None:
            pool.shutdown()
    return McResult(cells, cfg)


def summarize(res: McResult, metric: str = "err", fmt: str = "csv") -> str:
    """One row per (scenario, n), one column per method, like the ERR tables."""
    if not res.cells:
        raise ValueError("empty result")
    methods = list(dict.fromkeys(c.method for c in res.cells))
    keys = list(dict.fromkeys((c.scenario, c.n) for c in res.cells))
    look = {(c.scenario, c.n, c.method): getattr(c, metric) for c in res.cells}
    header = ["scenario", "n"] + methods
    rows = []
    for s, n in keys:
        vals = [look.get((s, n, m), math.nan) for m in methods]
        rows.append([s, str(n)] + ["" if math.isnan(v) else f"{v:.3f}" for v in vals])
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(x).rjust(wd) for x, wd in zip(r, widths)) for r in [header] + rows]
    return "\n".join(lines) + "\n"
