"""Reliance estimators, bounds, resampling inference and ranking."""

from .estimators import (METHODS, ConditionalReliance, baseline, conditional_reliance, estimate_reliance,
                         reliance_bounds, reliance_categorical, reliance_exhaustive, resolve_method,
                         worst_case_reliance)
from .population import DiscreteJoint, expected_kl, mean_independent, population_reliance, random_joint
from .ranking import cross_distribution_check, order_groups, rank_reliance
from .resampling import BootstrapResult, ParityResult, bootstrap_reliance, parity_test
from .types import RankingReport, RelianceEstimate, RelianceInterval, dumps, ranking_rows, rows_to_csv

__all__ = [
    "METHODS", "BootstrapResult", "ConditionalReliance", "DiscreteJoint", "ParityResult", "RankingReport",
    "RelianceEstimate", "RelianceInterval", "baseline", "bootstrap_reliance", "conditional_reliance",
    "cross_distribution_check", "dumps", "estimate_reliance", "expected_kl", "mean_independent",
    "order_groups", "parity_test", "population_reliance", "random_joint", "rank_reliance", "ranking_rows",
    "reliance_bounds", "reliance_categorical", "reliance_exhaustive", "resolve_method", "rows_to_csv",
    "worst_case_reliance",
]
