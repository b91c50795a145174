"""Reliance of black-box decision-makers on chosen covariates.

Permutation-based reliance estimators with baselines, conservative bounds
under partial identification, resampling inference, cross-decision-maker
ranking and a school-admissions simulation harness.
"""

from .errors import DataError, NumericalError, OracleDomainError, RelianceError, SchemaError, UsageError
from .losses import LossSpec, cross_entropy_loss, square_loss, utility_loss
from .models import (BoundedOracle, FitterSpec, Oracle, bound_oracle, constant_oracle, fit_huber,
                     fit_logistic, fit_ols, identification_interval)
from .reliance import (RankingReport, RelianceEstimate, RelianceInterval, baseline, bootstrap_reliance,
                       conditional_reliance, estimate_reliance, parity_test, rank_reliance, reliance_bounds,
                       reliance_categorical, reliance_exhaustive, worst_case_reliance)
from .tabular import ColumnSchema, Dataset, Partition, load_chunks, load_csv, load_schema, split_by_group

__version__ = "0.1.0"

__all__ = [
    "BoundedOracle", "ColumnSchema", "DataError", "Dataset", "FitterSpec", "LossSpec", "NumericalError",
    "Oracle", "OracleDomainError", "Partition", "RankingReport", "RelianceError", "RelianceEstimate",
    "RelianceInterval", "SchemaError", "UsageError", "baseline", "bootstrap_reliance", "bound_oracle",
    "conditional_reliance", "constant_oracle", "cross_entropy_loss", "estimate_reliance", "fit_huber",
    "fit_logistic", "fit_ols", "identification_interval", "load_chunks", "load_csv", "load_schema",
    "parity_test", "rank_reliance", "reliance_bounds", "reliance_categorical", "reliance_exhaustive",
    "split_by_group", "square_loss", "utility_loss", "worst_case_reliance",
]
