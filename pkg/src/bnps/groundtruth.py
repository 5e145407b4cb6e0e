"""The seven-node generative network and the fifteen outcome scenarios."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expit

from bnps.dag import Dag
from bnps.data import CategoricalDataset, VariableMeta
from bnps.network import BayesianNetwork, Cpt, ancestral_sample

NODE_NAMES = ("X1", "X2", "X3", "X4", "X5", "X6", "T")
CARDS = (2, 2, 3, 3, 2, 2, 2)
ARCS = ((0, 1), (0, 2), (0, 3), (2, 4), (4, 5), (4, 6), (5, 6))

# Listed probabilities of the non-reference states; the reference state
# (0) takes the residual mass of each row.
_LISTED = {
    "X1": [[0.6553]],
    "X2": [[0.9961], [0.4384]],
    "X3": [[0.2186, 0.6238], [0.2102, 0.0556]],
    "X4": [[0.1600, 0.6778], [0.4151, 0.5150]],
    "X5": [[0.4536], [0.6636], [0.9726]],
    "X6": [[0.3967], [0.7000]],
    "T": [[0.2], [0.6], [0.4], [0.2]],
}


@dataclass(frozen=True)
class Scenario:
    id: str
    alpha0: float
    alpha1: float
    beta1: float
    beta2: float

    @property
    def params(self) -> tuple[float, float, float, float]:
        return (self.alpha0, self.alpha1, self.beta1, self.beta2)


SCENARIOS: dict[str, Scenario] = {
    sid: Scenario(sid, *q)
    for sid, q in {
        "S1": (-2, 0, 0, 0),
        "S2": (-2, 1, 0, 0),
        "S3": (-2, 2.5, 0, 0),
        "S4": (-2, 0, 1, 0),
        "S5": (-2, 1, 1, 0),
        "S6": (-2, 2.5, 1, 0),
        "S7": (-2, 0, 0, -2),
        "S8": (-2, 1, 0, -2),
        "S9": (-2, 2.5, 0, -2),
        "S10": (-2, 0, 1, -2),
        "S11": (-2, 1, 1, -2),
        "S12": (-2, 2.5, 1, -2),
        "S13": (-2, 0, 2, -3),
        "S14": (-2, 1, 2, -3),
        "S15": (-2, 2.5, 2, -3),
    }.items()
}


def scenario(sid: str) -> Scenario:
    try:
        return SCENARIOS[sid.upper()]
    except KeyError:
        raise KeyError(f"unknown scenario {sid!r}; expected one of S1..S15") from None


@lru_cache(maxsize=1)
def ground_truth_network() -> BayesianNetwork:
    variables = [
        VariableMeta(nm, tuple(str(k) for k in range(r))) for nm, r in zip(NODE_NAMES, CARDS)
    ]
    dag = Dag(len(NODE_NAMES), ARCS)
    cpts = []
    for i, nm in enumerate(NODE_NAMES):
        listed = np.array(_LISTED[nm], dtype=float)
        table = np.column_stack([1.0 - listed.sum(axis=1), listed])
        pa = dag.parents(i)
        cpts.append(Cpt(i, pa, CARDS[i], tuple(CARDS[p] for p in pa), table))
    return BayesianNetwork(variables, dag, cpts)


@lru_cache(maxsize=1)
def x5_x6_marginal() -> np.ndarray:
    """Exact P(X5, X6) by chaining X1 -> X3 -> X5 -> X6; shape (2, 2)."""
    bn = ground_truth_network()
    p_x1 = bn.cpts[0].table[0]
    p_x3 = p_x1 @ bn.cpts[2].table
    p_x5 = p_x3 @ bn.cpts[4].table
    return p_x5[:, None] * bn.cpts[5].table


def potential_outcome_probs(s: Scenario, x5, x6):
    """(P(Y(0)=1 | x5, x6), P(Y(1)=1 | x5, x6)); works elementwise on arrays."""
    lin = s.alpha0 + s.beta1 * np.asarray(x5) + s.beta2 * np.asarray(x6)
    p0, p1 = expit(lin), expit(lin + s.alpha1)
    if np.ndim(p0) == 0:
        return float(p0), float(p1)
    return p0, p1


def true_ate(s: Scenario) -> float:
    joint = x5_x6_marginal()
    x5, x6 = np.meshgrid([0, 1], [0, 1], indexing="ij")
    p0, p1 = potential_outcome_probs(s, x5, x6)
    return float((joint * p1).sum() - (joint * p0).sum())


@dataclass(frozen=True)
class SimulatedSample:
    data: CategoricalDataset
    y0: np.ndarray
    y1: np.ndarray


OUTCOME_META = VariableMeta("Y", ("0", "1"))


def generate_dataset(s: Scenario, n: int, seed: int) -> SimulatedSample:
    """Sample X1..X6, T from the network, then Y(0), Y(1) from two
    independent Bernoulli streams; Y is the potential outcome selected by T."""
    bn = ground_truth_network()
    ss = np.random.SeedSequence(seed)
    net_seed, y0_seed, y1_seed = (int(c.generate_state(1, np.uint64)[0]) for c in ss.spawn(3))
    cov = ancestral_sample(bn, n, net_seed)
    x5, x6, t = cov.codes[:, 4], cov.codes[:, 5], cov.codes[:, 6]
    p0, p1 = potential_outcome_probs(s, x5, x6)
    y0 = (np.random.Generator(np.random.PCG64(y0_seed)).random(n) < p0).astype(np.int64)
    y1 = (np.random.Generator(np.random.PCG64(y1_seed)).random(n) < p1).astype(np.int64)
    y = np.where(t == 1, y1, y0)
    data = CategoricalDataset(bn.variables + (OUTCOME_META,), np.column_stack([cov.codes, y]))
    y0.setflags(write=False)
    y1.setflags(write=False)
    return SimulatedSample(data, y0, y1)


def true_propensity(codes: np.ndarray) -> np.ndarray:
    """P(T=1 | X5, X6) under the generative network, for code rows with X5, X6 at columns 4, 5."""
    t_rows = ground_truth_network().cpts[6].table
    return t_rows[codes[:, 4] * 2 + codes[:, 5], 1]


def scenario_table_csv() -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "alpha0", "alpha1", "beta1", "beta2", "true_ate"])
    for s in SCENARIOS.values():
        w.writerow([s.id, s.alpha0, s.alpha1, s.beta1, s.beta2, f"{true_ate(s):.6f}"])
    return buf.getvalue()
