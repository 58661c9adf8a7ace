"""Swarm-based adaptive meta-search: decaying click trails drive stochastic
result recommendation, with an offline evaluation harness and a live service."""

from swarmsearch.pheromone import (
    DecayConfig,
    ExaminationTable,
    Flavor,
    PheromoneEntry,
    PheromoneStore,
    derive_elaborate_order,
    evaporated_weight,
    expand_query_keys,
    increment_naive,
    increment_ranking_bias,
    normalize_query,
)

__version__ = "0.1.0"
