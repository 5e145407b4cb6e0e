import math
from collections import Counter

import numpy as np
import pytest

from bnps.dag import Dag, Move, apply_move
from bnps.errors import DataError
from bnps.groundtruth import SCENARIOS, generate_dataset, ground_truth_network
from bnps.network import ancestral_sample, bic_score
from bnps.search import (
    FamilyScoreCache,
    IMPROVE_TOL,
    SearchConfig,
    hill_climb,
    is_local_optimum,
    learn_structure,
    legal_moves,
    score_delta,
    tabu_search,
)

from conftest import make_dataset, random_network

HC = SearchConfig("hill_climb")


def fig1_sample(n, seed):
    return ancestral_sample(ground_truth_network(), n, seed)


def test_independent_columns_stay_empty():
    rng = np.random.default_rng(5)
    ds = make_dataset([rng.integers(0, 2, 1000), rng.integers(0, 2, 1000)])
    res = hill_climb(ds, HC)
    assert res.dag.arcs == []
    # the only possible arc must lower the score: direct computation
    cache = FamilyScoreCache(ds)
    d = score_delta(cache, ds, Dag(2), Move("add", 0, 1))
    assert d < 0 and d == pytest.approx(bic_score(ds, Dag(2, [(0, 1)]))[0] - bic_score(ds, Dag(2))[0])


def test_copy_column_gets_an_arc():
    rng = np.random.default_rng(6)
    a = rng.integers(0, 2, 100)
    res = hill_climb(make_dataset([a, a]), HC)
    assert len(res.dag.arcs) == 1


def test_hill_climb_improves_on_empty_graph():
    ds = fig1_sample(5000, 11)
    res = hill_climb(ds, HC)
    assert res.score >= bic_score(ds, Dag(ds.p))[0]
    assert res.score == pytest.approx(bic_score(ds, res.dag)[0], abs=1e-8)


def test_monotone_trace():
    res = hill_climb(fig1_sample(2000, 12), HC)
    assert res.trace
    assert all(t.delta > IMPROVE_TOL for t in res.trace)
    scores = [t.total_score for t in res.trace]
    assert all(b > a for a, b in zip(scores, scores[1:]))


@pytest.mark.parametrize("seed", range(5))
def test_tabu_at_least_hill_climb_and_local_optimum(seed):
    ds = fig1_sample(1000, seed)
    hc = hill_climb(ds, HC)
    tb = tabu_search(ds)
    assert tb.score >= hc.score - 1e-9
    assert is_local_optimum(ds, tb.dag)
    assert is_local_optimum(ds, hc.dag, HC)


def test_tabu_recovers_treatment_family():
    skeletons = Counter()
    for seed in range(20):
        res = tabu_search(fig1_sample(5000, 100 + seed))
        skeletons[frozenset(frozenset(a) for a in res.dag.arcs)] += 1
    modal = skeletons.most_common(1)[0][0]
    x5, x6, t = 4, 5, 6
    for edge in ({x5, x6}, {x5, t}, {x6, t}):
        assert frozenset(edge) in modal


def test_whitelist_and_blacklist():
    rng = np.random.default_rng(1)
    ds = make_dataset([rng.integers(0, 2, 300), rng.integers(0, 2, 300)])
    res = tabu_search(ds, SearchConfig(whitelist={(0, 1)}))
    assert (0, 1) in res.dag.arcs
    a = rng.integers(0, 2, 300)
    res = tabu_search(make_dataset([a, a]), SearchConfig(blacklist={(0, 1)}))
    assert res.dag.arcs == [(1, 0)]
    with pytest.raises(DataError):
        tabu_search(make_dataset([a, a, a]), SearchConfig(whitelist={(0, 1), (1, 2), (2, 0)}))
    with pytest.raises(ValueError):
        SearchConfig(whitelist={(0, 1)}, blacklist={(0, 1)})


def test_needs_two_columns():
    with pytest.raises(DataError):
        hill_climb(make_dataset([[0, 1]]), HC)


def test_deterministic():
    ds = fig1_sample(1500, 3)
    a, b = tabu_search(ds), tabu_search(ds)
    assert a.dag == b.dag and a.score == b.score
    assert a.trace_csv() == b.trace_csv()


def test_unpacking_and_trace_csv():
    dag, score, trace = hill_climb(fig1_sample(500, 1), HC)
    res = tabu_search(fig1_sample(500, 1))
    lines = res.trace_csv().splitlines()
    assert lines[0] == "step,move_kind,u,v,delta,total_score,tabu_hit"
    assert len(lines) == len(res.trace) + 1


def test_max_iter_warning():
    res = tabu_search(fig1_sample(1000, 2), SearchConfig(max_iter=2))
    assert res.warnings and len(res.trace) == 2


def test_score_delta_matches_full_rescore():
    rng = np.random.default_rng(77)
    checked = 0
    while checked < 200:
        bn = random_network(rng, 5, arc_prob=0.4)
        ds = ancestral_sample(bn, 300, int(rng.integers(1 << 30)))
        cache = FamilyScoreCache(ds)
        g = bn.dag
        base = bic_score(ds, g)[0]
        moves = legal_moves(g.parent_sets, SearchConfig())
        for mv in [moves[i] for i in rng.choice(len(moves), size=min(8, len(moves)), replace=False)]:
            h = apply_move(g, mv)
            assert abs(score_delta(cache, ds, g, mv) - (bic_score(ds, h)[0] - base)) <= 1e-9
            checked += 1


def test_score_delta_touches_only_changed_families():
    ds = fig1_sample(500, 4)
    cache = FamilyScoreCache(ds)
    g = Dag(ds.p, [(0, 1)])
    cache.score(1, (0,)), cache.score(0, ())
    before = set(cache.keys())
    score_delta(cache, ds, g, Move("add", 2, 3))
    assert {k[0] for k in set(cache.keys()) - before} == {3}
    before = set(cache.keys())
    score_delta(cache, ds, g, Move("reverse", 0, 1))
    assert {k[0] for k in set(cache.keys()) - before} <= {0, 1}
    with pytest.raises(DataError):
        score_delta(cache, ds, Dag(ds.p, [(0, 1), (1, 2)]), Move("add", 2, 0))


def test_cache_coherence():
    ds = fig1_sample(2000, 5)
    res = tabu_search(ds)
    cache = res.cache
    keys = cache.keys()
    assert cache.hits > 0 and cache.misses == len(keys)
    rng = np.random.default_rng(0)
    fresh = FamilyScoreCache(ds)
    for i in rng.choice(len(keys), size=min(100, len(keys)), replace=False):
        child, parents = keys[i]
        assert abs(cache.score(child, parents) - fresh.score(child, parents)) <= 1e-9


def test_learn_structure_requires_column_subset():
    data = generate_dataset(SCENARIOS["S1"], 500, 1).data
    sub, res = learn_structure(data, ["X1", "X5", "X6", "T"])
    assert sub.names == ["X1", "X5", "X6", "T"] and res.dag.node_count == 4
