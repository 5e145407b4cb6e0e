import itertools

import numpy as np
import pytest

from bnps.dag import Dag
from bnps.data import CategoricalDataset, VariableMeta
from bnps.network import BayesianNetwork, Cpt


def make_dataset(columns, names=None):
    cols = [np.asarray(c) for c in columns]
    names = names or [f"V{j}" for j in range(len(cols))]
    variables = [
        VariableMeta(nm, tuple(str(k) for k in range(max(2, int(c.max()) + 1))))
        for nm, c in zip(names, cols)
    ]
    return CategoricalDataset(tuple(variables), np.column_stack(cols))


def random_network(rng, p, max_card=3, arc_prob=0.5, zero_prob=0.0):
    """Random DAG (arcs only from lower to higher id) with Dirichlet CPTs."""
    cards = rng.integers(2, max_card + 1, size=p)
    arcs = [(u, v) for u in range(p) for v in range(u + 1, p) if rng.random() < arc_prob]
    dag = Dag(p, arcs)
    variables = [VariableMeta(f"N{i}", tuple(str(k) for k in range(cards[i]))) for i in range(p)]
    cpts = []
    for i in range(p):
        pa = dag.parents(i)
        q = int(np.prod([cards[j] for j in pa])) if pa else 1
        t = rng.dirichlet(np.ones(cards[i]), size=q)
        if zero_prob:
            t = np.where(rng.random(t.shape) < zero_prob, 0.0, t)
            t[t.sum(axis=1) == 0, 0] = 1.0
            t /= t.sum(axis=1, keepdims=True)
        cpts.append(Cpt(i, pa, int(cards[i]), tuple(int(cards[j]) for j in pa), t))
    return BayesianNetwork(variables, dag, cpts)


def joint_table(bn):
    """Exhaustive joint: dict from full configuration tuple to probability."""
    cards = [v.cardinality for v in bn.variables]
    out = {}
    for cfg in itertools.product(*[range(r) for r in cards]):
        pr = 1.0
        for i, cpt in enumerate(bn.cpts):
            j = 0
            for p in cpt.parents:
                j = j * cards[p] + cfg[p]
            pr *= float(cpt.table[j, cfg[i]])
        out[cfg] = pr
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA: list[str] = []


@pytest.fixture
def criterion(capsys):
    """Record one PASS/FAIL line per acceptance criterion; print it at once and in the summary."""

    def report(label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _CRITERIA.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
