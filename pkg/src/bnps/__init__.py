"""Discrete Bayesian-network propensity scores for causal inference."""

from bnps.data import CategoricalDataset, VariableMeta, column_counts, ingest_csv
from bnps.dag import Dag, Move, apply_move, topological_order
from bnps.network import (
    BayesianNetwork,
    Cpt,
    FitOptions,
    ancestral_sample,
    bic_score,
    conditional_query,
    fit_mle,
    log_likelihood,
)
from bnps.search import SearchConfig, hill_climb, tabu_search
from bnps.estimators import (
    AteEstimate,
    PropensityModel,
    bnps_pipeline,
    hajek_ate,
    horvitz_thompson_ate,
    propensity_scores,
    reject_null,
)
from bnps.groundtruth import SCENARIOS, Scenario, generate_dataset, true_ate

__version__ = "0.1.0"
