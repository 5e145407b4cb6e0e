"""Discrete Bayesian networks: CPTs, MLE fitting, BIC, sampling, queries."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from bnps.dag import Dag, topological_order
from bnps.data import CategoricalDataset, VariableMeta, config_index
from bnps.errors import DataError, NumericError

MODEL_FORMAT_VERSION = 1
GENERATOR_FAMILY = "numpy.PCG64"
BIC_CONVENTION = "logL - (d/2) log n"


@dataclass(frozen=True)
class Cpt:
    """P(child | parents) as a q x r table; rows follow the mixed-radix
    parent configuration order with the last parent varying fastest."""

    child: int
    parents: tuple[int, ...]
    cardinality: int
    parent_cards: tuple[int, ...]
    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float, copy=True)
        q = int(np.prod(self.parent_cards)) if self.parent_cards else 1
        if t.shape != (q, self.cardinality):
            raise DataError(
                f"CPT for node {self.child} has shape {t.shape}, expected {(q, self.cardinality)}"
            )
        if (t < 0).any() or (t > 1).any():
            raise DataError(f"CPT for node {self.child} has entries outside [0, 1]")
        t.setflags(write=False)
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "parent_cards", tuple(int(c) for c in self.parent_cards))
        object.__setattr__(self, "table", t)

    def row_sum_error(self) -> float:
        return float(np.abs(self.table.sum(axis=1) - 1.0).max())


@dataclass(frozen=True)
class FitOptions:
    pseudo_count: float = 0.0

    def __post_init__(self):
        if self.pseudo_count < 0:
            raise ValueError("pseudo_count must be >= 0")


class BayesianNetwork:
    def __init__(self, variables: Sequence[VariableMeta], dag: Dag, cpts: Sequence[Cpt]):
        self.variables = tuple(variables)
        self.dag = dag
        self.cpts = tuple(cpts)
        if dag.node_count != len(self.variables) or len(self.cpts) != len(self.variables):
            raise DataError("variables, DAG and CPTs disagree on node count")
        for i, cpt in enumerate(self.cpts):
            if cpt.child != i or cpt.parents != dag.parents(i):
                raise DataError(f"CPT {i} does not match the DAG parent set")
            if cpt.cardinality != self.variables[i].cardinality or cpt.parent_cards != tuple(
                self.variables[p].cardinality for p in cpt.parents
            ):
                raise DataError(f"CPT {i} cardinalities disagree with variable metadata")
            if cpt.row_sum_error() > 1e-9:
                raise DataError(f"CPT rows of node {i} do not sum to 1")
        self._topo = topological_order(dag)

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def cardinalities(self) -> np.ndarray:
        return np.array([v.cardinality for v in self.variables], dtype=np.int64)

    def index(self, name: int | str) -> int:
        if isinstance(name, (int, np.integer)):
            return int(name)
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown node {name!r}") from None

    def family_probs(self, node: int, codes: np.ndarray) -> np.ndarray:
        """P(x_node | x_parents) for each row of a full code matrix."""
        cpt = self.cpts[node]
        j = config_index(codes, self.cardinalities, cpt.parents)
        return cpt.table[j, codes[:, node]]

    # -- model file -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": MODEL_FORMAT_VERSION,
            "variables": [{"name": v.name, "states": list(v.states)} for v in self.variables],
            "arcs": [[self.names[u], self.names[v]] for u, v in self.dag.arcs],
            "cpts": [
                {"node": self.names[c.child], "rows": c.table.tolist()} for c in self.cpts
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BayesianNetwork":
        if doc.get("version") != MODEL_FORMAT_VERSION:
            raise DataError(f"unsupported model file version {doc.get('version')!r}")
        variables = [VariableMeta(v["name"], tuple(v["states"])) for v in doc["variables"]]
        names = [v.name for v in variables]
        pos = {nm: i for i, nm in enumerate(names)}
        try:
            dag = Dag(len(variables), [(pos[u], pos[v]) for u, v in doc["arcs"]])
        except KeyError as e:
            raise DataError(f"arc references unknown node {e.args[0]!r}") from None
        rows_by_node = {c["node"]: c["rows"] for c in doc["cpts"]}
        if set(rows_by_node) != set(names):
            raise DataError("model file must carry exactly one CPT per variable")
        cpts = []
        for i, v in enumerate(variables):
            pa = dag.parents(i)
            cpts.append(
                Cpt(i, pa, v.cardinality, tuple(variables[p].cardinality for p in pa),
                    np.asarray(rows_by_node[v.name], dtype=float))
            )
        return cls(variables, dag, cpts)

    def save(self, path: str | Path, metadata: dict | None = None) -> None:
        doc = self.to_dict()
        if metadata:
            doc["metadata"] = metadata
        Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BayesianNetwork":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise DataError(f"cannot read model file {path}: {e}") from None
        return cls.from_dict(doc)


def _check_schema(data: CategoricalDataset, n_nodes: int, variables=None) -> None:
    if data.p != n_nodes:
        raise DataError(f"dataset has {data.p} columns, network has {n_nodes} nodes")
    if variables is not None:
        for dv, nv in zip(data.variables, variables):
            if dv.name != nv.name or dv.states != nv.states:
                raise DataError(f"schema mismatch on column {dv.name!r} / node {nv.name!r}")


def fit_mle(data: CategoricalDataset, dag: Dag, opts: FitOptions = FitOptions()) -> BayesianNetwork:
    """(N_ijk + a) / (N_ij + r a); rows of unseen parent configurations
    with a = 0 become uniform."""
    from bnps.data import column_counts

    _check_schema(data, dag.node_count)
    cards = data.cardinalities
    a = opts.pseudo_count
    cpts = []
    for i in range(dag.node_count):
        pa = dag.parents(i)
        counts = column_counts(data, i, pa).astype(float) + a
        tot = counts.sum(axis=1, keepdims=True)
        r = counts.shape[1]
        with np.errstate(invalid="ignore", divide="ignore"):
            table = np.where(tot > 0, counts / np.where(tot > 0, tot, 1.0), 1.0 / r)
        cpts.append(Cpt(i, pa, int(cards[i]), tuple(int(cards[p]) for p in pa), table))
    return BayesianNetwork(data.variables, dag, cpts)


def log_likelihood(bn: BayesianNetwork, data: CategoricalDataset) -> float:
    _check_schema(data, len(bn.variables), bn.variables)
    total = 0.0
    for i in range(len(bn.variables)):
        pr = bn.family_probs(i, data.codes)
        if (pr == 0).any():
            return -math.inf
        total += float(np.log(pr).sum())
    return total


def family_bic(codes: np.ndarray, cards: np.ndarray, child: int, parents: Sequence[int]) -> float:
    """BIC contribution of one node family, evaluated at the MLE."""
    n = codes.shape[0]
    r = int(cards[child])
    q = 1
    j = None
    for p in parents:
        c = int(cards[p])
        j = codes[:, p] if j is None else j * c + codes[:, p]
        q *= c
    idx = codes[:, child] if j is None else j * r + codes[:, child]
    counts = np.bincount(idx, minlength=q * r)
    nz = counts[counts > 0].astype(float)
    ll = float((nz * np.log(nz)).sum())
    if j is None:
        ll -= n * math.log(n)
    else:
        nj = counts.reshape(q, r).sum(axis=1)
        nj = nj[nj > 0].astype(float)
        ll -= float((nj * np.log(nj)).sum())
    return ll - 0.5 * math.log(n) * (r - 1) * q


def bic_score(data: CategoricalDataset, dag: Dag) -> tuple[float, np.ndarray]:
    """Total BIC (higher is better) and its per-family decomposition."""
    if data.n == 0:
        raise DataError("BIC needs at least one row")
    _check_schema(data, dag.node_count)
    cards = data.cardinalities
    fam = np.array([family_bic(data.codes, cards, i, dag.parents(i)) for i in range(data.p)])
    return float(fam.sum()), fam


def _draw(rng: np.random.Generator, rows: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw: smallest state k with u < cumsum(row)[k]."""
    cdf = np.cumsum(rows, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(rows.shape[0])
    return (u[:, None] >= cdf).sum(axis=1)


def ancestral_sample(bn: BayesianNetwork, n: int, seed: int) -> CategoricalDataset:
    """Draw ``n`` rows node by node in topological order from a PCG64 stream."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    codes = np.zeros((n, len(bn.variables)), dtype=np.int64)
    cards = bn.cardinalities
    for node in bn._topo:
        cpt = bn.cpts[node]
        j = config_index(codes, cards, cpt.parents)
        codes[:, node] = _draw(rng, cpt.table[j])
    return CategoricalDataset(bn.variables, codes)


def _blanket_weights(bn: BayesianNetwork, target: int, codes: np.ndarray) -> np.ndarray:
    """Unnormalised w[i, s] = P(s | pa) * prod over children c of P(x_c | pa(c))."""
    r = bn.variables[target].cardinality
    kids = bn.dag.children(target)
    work = np.array(codes, dtype=np.int64, copy=True)
    w = np.empty((work.shape[0], r))
    for s in range(r):
        work[:, target] = s
        col = bn.family_probs(target, work)
        for c in kids:
            col = col * bn.family_probs(c, work)
        w[:, s] = col
    return w


def conditional_query_rows(bn: BayesianNetwork, target: int, codes: np.ndarray) -> np.ndarray:
    """P(target = s | all other nodes) for every row; shape (n, r)."""
    w = _blanket_weights(bn, target, codes)
    tot = w.sum(axis=1)
    bad = np.flatnonzero(tot <= 0)
    if bad.size:
        raise NumericError(f"unsupported evidence configuration (row {int(bad[0])})")
    return w / tot[:, None]


def conditional_query(
    bn: BayesianNetwork, target: int | str, target_state: int, evidence: Sequence[int] | dict
) -> float:
    """P(target = target_state | every other node), using only the target's
    own family and its children's families.

    ``evidence`` is either a full code vector (the target entry is ignored)
    or a mapping from node name/id to state code.
    """
    t = bn.index(target)
    p = len(bn.variables)
    if isinstance(evidence, dict):
        row = np.zeros(p, dtype=np.int64)
        given = {bn.index(k): v for k, v in evidence.items()}
        missing = set(range(p)) - {t} - set(given)
        if missing:
            raise DataError(f"evidence must assign every non-target node; missing {sorted(missing)}")
        for k, v in given.items():
            row[k] = v
    else:
        row = np.asarray(evidence, dtype=np.int64)
        if row.shape != (p,):
            raise DataError("evidence must assign every node")
    return float(conditional_query_rows(bn, t, row[None, :])[0, target_state])
