import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnps.dag import Dag
from bnps.errors import DataError, NumericError
from bnps.groundtruth import ground_truth_network
from bnps.network import (
    BayesianNetwork,
    Cpt,
    FitOptions,
    ancestral_sample,
    bic_score,
    conditional_query,
    conditional_query_rows,
    fit_mle,
    log_likelihood,
)
from bnps.data import VariableMeta

from conftest import joint_table, make_dataset, random_network


def single_node(row):
    v = [VariableMeta("A", ("0", "1"))]
    return BayesianNetwork(v, Dag(1), [Cpt(0, (), 2, (), np.array([row]))])


class TestFit:
    def test_empirical_frequency(self):
        bn = fit_mle(make_dataset([[0, 1, 1, 1]]), Dag(1))
        assert np.allclose(bn.cpts[0].table, [[0.25, 0.75]])

    def test_unseen_configuration_is_uniform(self):
        ds = make_dataset([[0, 1, 1], [0, 0, 0]])
        ds = type(ds)((ds.variables[0], VariableMeta("V1", ("0", "1"))), ds.codes)
        bn = fit_mle(ds, Dag(2, [(1, 0)]))
        assert np.allclose(bn.cpts[0].table[1], [0.5, 0.5])

    def test_laplace(self):
        ds = make_dataset([[1, 1]])
        ds = type(ds)((VariableMeta("V0", ("0", "1")),), ds.codes)
        bn = fit_mle(ds, Dag(1), FitOptions(pseudo_count=1))
        assert np.allclose(bn.cpts[0].table, [[0.25, 0.75]])

    def test_negative_pseudo_count(self):
        with pytest.raises(ValueError):
            FitOptions(-1)

    def test_schema_mismatch(self):
        with pytest.raises(DataError):
            fit_mle(make_dataset([[0, 1]]), Dag(2))

    def test_rows_sum_to_one(self, rng):
        bn = random_network(rng, 4)
        ds = ancestral_sample(bn, 300, 1)
        fitted = fit_mle(ds, bn.dag)
        for c in fitted.cpts:
            assert c.row_sum_error() <= 1e-12

    def test_mle_is_a_maximum(self, rng):
        bn = random_network(rng, 4)
        ds = ancestral_sample(bn, 500, 2)
        fitted = fit_mle(ds, bn.dag)
        base = log_likelihood(fitted, ds)
        for i, cpt in enumerate(fitted.cpts):
            for j in range(cpt.table.shape[0]):
                for k in range(cpt.cardinality):
                    for eps in (0.01, -0.01):
                        t = cpt.table.copy()
                        t[j, k] = min(max(t[j, k] + eps, 0.0), 1.0)
                        t[j] /= t[j].sum()
                        cpts = list(fitted.cpts)
                        cpts[i] = Cpt(i, cpt.parents, cpt.cardinality, cpt.parent_cards, t)
                        other = BayesianNetwork(fitted.variables, fitted.dag, cpts)
                        assert log_likelihood(other, ds) <= base + 1e-9


class TestLikelihoodAndBic:
    def test_log_one(self):
        bn = single_node([1.0, 0.0])
        ds = make_dataset([[0, 0, 0]])
        assert log_likelihood(bn, type(ds)(bn.variables, ds.codes)) == 0.0

    def test_zero_factor_is_minus_inf(self):
        bn = single_node([1.0, 0.0])
        ds = make_dataset([[0, 1]])
        assert log_likelihood(bn, type(ds)(bn.variables, ds.codes)) == -math.inf

    def test_fair_coin(self):
        bn = single_node([0.5, 0.5])
        ds = make_dataset([[0, 1, 0, 1]], ["A"])
        assert log_likelihood(bn, ds) == pytest.approx(-2.772589, abs=1e-6)

    def test_two_fair_coins(self):
        v = [VariableMeta("A", ("0", "1")), VariableMeta("B", ("0", "1"))]
        cpts = [Cpt(i, (), 2, (), np.array([[0.5, 0.5]])) for i in range(2)]
        bn = BayesianNetwork(v, Dag(2), cpts)
        ds = make_dataset([[0, 1, 0, 1], [1, 1, 0, 0]], ["A", "B"])
        # hand computation: 8 factors of 1/2
        assert log_likelihood(bn, ds) == pytest.approx(8 * math.log(0.5), abs=1e-9)
        assert log_likelihood(bn, ds) == pytest.approx(-5.545177, abs=1e-6)

    def test_bic_constant_column(self):
        ds = make_dataset([[0, 0, 0, 0]])
        ds = type(ds)((VariableMeta("V0", ("0", "1")),), ds.codes)
        total, fam = bic_score(ds, Dag(1))
        assert total == pytest.approx(-0.5 * math.log(4), abs=1e-12)
        assert total == pytest.approx(-0.693147, abs=1e-6)

    def test_bic_balanced(self):
        total, _ = bic_score(make_dataset([[0, 0, 1, 1]]), Dag(1))
        assert total == pytest.approx(4 * math.log(0.5) - 0.5 * math.log(4), abs=1e-12)
        assert total == pytest.approx(-3.465736, abs=1e-6)

    def test_bic_arc_vs_independence(self):
        ds = make_dataset([[0, 0, 1, 1], [0, 0, 1, 1]])
        arc, _ = bic_score(ds, Dag(2, [(0, 1)]))
        ind, _ = bic_score(ds, Dag(2))
        assert arc == pytest.approx(-4.852030, abs=1e-6)
        assert ind == pytest.approx(-6.931472, abs=1e-6)
        assert arc > ind

    def test_bic_matches_loglik_minus_penalty(self, rng):
        bn = random_network(rng, 4)
        ds = ancestral_sample(bn, 400, 3)
        total, fam = bic_score(ds, bn.dag)
        fitted = fit_mle(ds, bn.dag)
        d = sum((c.cardinality - 1) * c.table.shape[0] for c in fitted.cpts)
        assert total == pytest.approx(log_likelihood(fitted, ds) - 0.5 * d * math.log(ds.n), abs=1e-8)
        assert abs(total - fam.sum()) <= 1e-9

    def test_family_locality(self, rng):
        bn = random_network(rng, 4, arc_prob=0.7)
        ds = ancestral_sample(bn, 400, 4)
        _, fam = bic_score(ds, bn.dag)
        for v in range(4):
            # same family inside a graph with every other arc removed
            alone = Dag(4, [(u, v) for u in bn.dag.parents(v)])
            assert bic_score(ds, alone)[1][v] == pytest.approx(fam[v], abs=1e-9)

    def test_empty_data(self):
        ds = make_dataset([[0, 1]])
        empty = type(ds)(ds.variables, np.zeros((0, 1), dtype=int))
        with pytest.raises(DataError):
            bic_score(empty, Dag(1))


class TestSampling:
    def test_degenerate(self):
        bn = single_node([1.0, 0.0])
        assert (ancestral_sample(bn, 50, 0).codes == 0).all()

    def test_deterministic_chain(self):
        v = [VariableMeta("A", ("0", "1")), VariableMeta("B", ("0", "1"))]
        cpts = [Cpt(0, (), 2, (), np.array([[0.3, 0.7]])),
                Cpt(1, (0,), 2, (2,), np.array([[1.0, 0.0], [0.0, 1.0]]))]
        ds = ancestral_sample(BayesianNetwork(v, Dag(2, [(0, 1)]), cpts), 500, 9)
        assert np.array_equal(ds.codes[:, 0], ds.codes[:, 1])

    def test_reproducible(self):
        bn = ground_truth_network()
        a = ancestral_sample(bn, 100, 42)
        b = ancestral_sample(bn, 100, 42)
        c = ancestral_sample(bn, 100, 43)
        assert np.array_equal(a.codes, b.codes) and not np.array_equal(a.codes, c.codes)

    def test_root_marginal_converges(self):
        ds = ancestral_sample(ground_truth_network(), 100_000, 7)
        p = ds.column("X1").mean()
        assert abs(p - 0.6553) <= 0.005
        se = math.sqrt(0.6553 * 0.3447 / ds.n)
        assert abs(p - 0.6553) <= 4 * se


class TestQuery:
    def test_isolated_target(self):
        v = [VariableMeta("A", ("0", "1")), VariableMeta("B", ("0", "1"))]
        cpts = [Cpt(0, (), 2, (), np.array([[0.6, 0.4]])), Cpt(1, (), 2, (), np.array([[0.1, 0.9]]))]
        bn = BayesianNetwork(v, Dag(2), cpts)
        for b in (0, 1):
            assert conditional_query(bn, 0, 1, {"B": b}) == pytest.approx(0.4, abs=1e-15)

    def test_ground_truth_treatment(self):
        bn = ground_truth_network()
        ev = {"X1": 0, "X2": 1, "X3": 2, "X4": 0, "X5": 0, "X6": 1}
        assert conditional_query(bn, "T", 1, ev) == pytest.approx(0.6, abs=1e-12)

    def test_missing_evidence(self):
        with pytest.raises(DataError):
            conditional_query(ground_truth_network(), "T", 1, {"X5": 0})

    def test_zero_support(self):
        v = [VariableMeta("A", ("0", "1")), VariableMeta("B", ("0", "1"))]
        cpts = [Cpt(0, (), 2, (), np.array([[0.5, 0.5]])),
                Cpt(1, (0,), 2, (2,), np.array([[1.0, 0.0], [1.0, 0.0]]))]
        bn = BayesianNetwork(v, Dag(2, [(0, 1)]), cpts)
        with pytest.raises(NumericError, match="unsupported evidence"):
            conditional_query(bn, 0, 1, {"B": 1})

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 4))
    def test_matches_exhaustive_joint(self, seed, p):
        rng = np.random.default_rng(seed)
        bn = random_network(rng, p, zero_prob=0.15)
        joint = joint_table(bn)
        target = int(rng.integers(p))
        for cfg in list(joint)[:: max(1, len(joint) // 12)]:
            others = [c for c in joint if all(c[i] == cfg[i] for i in range(p) if i != target)]
            tot = sum(joint[c] for c in others)
            if tot == 0:
                continue
            probs = conditional_query_rows(bn, target, np.array([cfg]))[0]
            for c in others:
                assert probs[c[target]] == pytest.approx(joint[c] / tot, abs=1e-12)


class TestModelFile:
    def test_round_trip(self, tmp_path, rng):
        bn = random_network(rng, 4)
        bn.save(tmp_path / "m.json")
        back = BayesianNetwork.load(tmp_path / "m.json")
        assert back.dag == bn.dag and back.names == bn.names
        for a, b in zip(bn.cpts, back.cpts):
            assert np.abs(a.table - b.table).max() <= 1e-12

    def test_rejects_unnormalised_rows(self, tmp_path):
        doc = ground_truth_network().to_dict()
        doc["cpts"][0]["rows"] = [[0.5, 0.5 + 1e-6]]
        with pytest.raises(DataError):
            BayesianNetwork.from_dict(doc)
        doc["cpts"][0]["rows"] = [[0.5, 0.5 + 1e-10]]
        BayesianNetwork.from_dict(doc)

    def test_rejects_wrong_shape_and_version(self):
        doc = ground_truth_network().to_dict()
        doc["cpts"][6]["rows"] = doc["cpts"][6]["rows"][:3]
        with pytest.raises(DataError):
            BayesianNetwork.from_dict(doc)
        doc = ground_truth_network().to_dict()
        doc["version"] = 99
        with pytest.raises(DataError):
            BayesianNetwork.from_dict(doc)
