"""Plug-in reliance estimators.

The reliance estimate averages the loss over all ordered pairs ``i != j``
of rows, querying the oracle at ``(x1 from row j, x2 from row i)``::

    r_hat = 1 / (n (n - 1)) * sum_i sum_{j != i} L(y_i, f(x1_j, x2_i))

and the baseline is the unshuffled average ``mean_i L(y_i, f(x1_i, x2_i))``.
When the shuffled columns are discrete the double sum collapses to a
weighted sum over the distinct observed ``x1`` tuples ``c``, with weight
``n_c - 1{x1_i = c}``, which needs ``n * |C|`` oracle calls instead of
``n (n - 1)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import OracleDomainError, UsageError
from ..losses import LossSpec
from ..models import BoundedOracle, Oracle
from ..tabular import Dataset, Partition
from ._engine import Splice, evaluate, pair_sums, require_discrete
from .types import RelianceEstimate, RelianceInterval

METHODS = ("auto", "exhaustive", "categorical")


def _require_pairs(data: Dataset, what: str) -> None:
    if data.n < 2:
        raise UsageError(f"{what} needs at least 2 rows; got {data.n}")


def _plain_terms(loss: LossSpec):
    def terms(y, ctx, preds):
        loss.check_predictions(preds[0])
        return loss(y, preds[0], ctx)[None, :]
    return terms


def resolve_method(data: Dataset, partition: Partition, method: str = "auto") -> str:
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}; expected one of {METHODS}")
    if method == "auto":
        return "categorical" if all(data.spec(c).discrete for c in partition.x1) else "exhaustive"
    return method


def reliance_exhaustive(data: Dataset, oracle: Oracle, loss: LossSpec, partition: Partition,
                        workers: int = 1) -> float:
    """Reliance by the full ``n (n - 1)`` double sum."""
    _require_pairs(data, "reliance_exhaustive")
    splice = Splice(data, partition, oracle.columns, loss)
    total = pair_sums(splice, [oracle], _plain_terms(loss), "exhaustive", workers=workers)[0]
    return float(total / (data.n * (data.n - 1)))


def reliance_categorical(data: Dataset, oracle: Oracle, loss: LossSpec, partition: Partition,
                         workers: int = 1) -> float:
    """Reliance via the level-weighted sum; requires discrete ``x1``.

    Equal to :func:`reliance_exhaustive` up to floating-point rounding.
    """
    _require_pairs(data, "reliance_categorical")
    partition.validate(data)
    require_discrete(data, partition.x1, "reliance_categorical")
    splice = Splice(data, partition, oracle.columns, loss)
    total = pair_sums(splice, [oracle], _plain_terms(loss), "categorical", workers=workers)[0]
    return float(total / (data.n * (data.n - 1)))


def baseline(data: Dataset, oracle: Oracle, loss: LossSpec, partition: Partition) -> float:
    """Average loss with nothing shuffled."""
    if data.n < 1:
        raise UsageError("baseline needs at least 1 row")
    splice = Splice(data, partition, oracle.columns, loss)
    rows = np.arange(data.n)
    pred = evaluate(oracle, splice.X, lambda k: (k, k))
    loss.check_predictions(pred)
    return float(np.mean(loss(splice.y, pred, splice.context(rows))))


def estimate_reliance(data: Dataset, oracle: Oracle, loss: LossSpec, partition: Partition,
                      method: str = "auto", workers: int = 1) -> RelianceEstimate:
    """Reliance, baseline and their difference in one record."""
    method = resolve_method(data, partition, method)
    fn = reliance_categorical if method == "categorical" else reliance_exhaustive
    r = fn(data, oracle, loss, partition, workers=workers)
    b = baseline(data, oracle, loss, partition)
    return RelianceEstimate(r, b, data.n, partition.x1, loss, method)


def reliance_bounds(data: Dataset, bounded: BoundedOracle, loss: LossSpec, partition: Partition,
                    method: str = "auto", workers: int = 1) -> RelianceInterval:
    """Conservative reliance interval from a pointwise oracle envelope.

    For each pair the loss is evaluated at both envelopes; the lower bound
    averages the smaller of the two and the upper bound the larger. Any
    oracle lying between the envelopes has its reliance inside the interval
    provided outcomes are 0/1 and the loss is monotone in ``|y - yhat|``.
    """
    _require_pairs(data, "reliance_bounds")
    if not loss.monotone:
        raise UsageError(f"reliance_bounds needs a loss monotone in |y - yhat|; {loss.kind!r} is not")
    partition.validate(data)
    y = data[partition.outcome]
    if not np.all((y == 0) | (y == 1)):
        raise UsageError("reliance_bounds needs outcomes in {0, 1}")
    method = resolve_method(data, partition, method)
    if method == "categorical":
        require_discrete(data, partition.x1, "reliance_bounds(method='categorical')")
    splice = Splice(data, partition, bounded.columns, loss)

    def terms(yv, ctx, preds):
        lo, hi = preds
        if np.any(lo > hi):
            raise OracleDomainError("envelope invariant violated: f_min > f_max at an evaluated point")
        a, b = loss(yv, lo, ctx), loss(yv, hi, ctx)
        return np.stack([np.minimum(a, b), np.maximum(a, b)])

    sums = pair_sums(splice, [bounded.f_min, bounded.f_max], terms, method, workers=workers)
    denom = data.n * (data.n - 1)
    return RelianceInterval(float(sums[0] / denom), float(sums[1] / denom))


def _level_label(data: Dataset, column: str, value: float):
    spec = data.spec(column)
    if spec.kind == "categorical":
        return spec.levels[int(value)]
    return int(value)


def worst_case_reliance(data: Dataset, oracle: Oracle, loss: LossSpec, partition: Partition):
    """Largest average loss over replacing ``x1`` by a single observed level.

    Returns ``(r_sup, level)``; ``level`` is a label (or a tuple of labels
    when ``x1`` has several columns). Ties go to the first level in schema
    order.
    """
    if data.n < 1:
        raise UsageError("worst_case_reliance needs at least 1 row")
    partition.validate(data)
    require_discrete(data, partition.x1, "worst_case_reliance")
    splice = Splice(data, partition, oracle.columns, loss)
    levels, _, _ = splice.levels()
    rows = np.arange(data.n)
    means = []
    for c, level in enumerate(levels):
        pred = evaluate(oracle, splice.level_records(rows, level), lambda k: (k, -1))
        loss.check_predictions(pred)
        means.append(float(np.mean(loss(splice.y, pred, splice.context(rows)))))
    best = int(np.argmax(means))
    label = tuple(_level_label(data, col, v) for col, v in zip(partition.x1, levels[best]))
    return means[best], (label[0] if len(label) == 1 else label)


@dataclass(frozen=True)
class ConditionalReliance:
    r_hat: float
    pairs: int
    groups: int
    dropped_rows: int

    def __float__(self):
        return self.r_hat


def conditional_reliance(data: Dataset, oracle: Oracle, loss: LossSpec, partition: Partition,
                         workers: int = 1) -> ConditionalReliance:
    """Reliance with ``x1`` shuffled only among rows sharing the exact ``x2``.

    Groups of a single row cannot be spliced; they are dropped with a
    warning and counted in ``dropped_rows``. Group sums are pooled and
    divided by the total number of retained ordered pairs.
    """
    partition.validate(data)
    require_discrete(data, partition.x2, "conditional_reliance")
    splice = Splice(data, partition, oracle.columns, loss)
    if partition.x2:
        _, codes = np.unique(data.matrix(partition.x2), axis=0, return_inverse=True)
        codes = codes.reshape(-1)
    else:
        codes = np.zeros(data.n, dtype=np.intp)
    method = resolve_method(data, partition)
    pairs, groups, dropped = 0, 0, 0
    parts = []
    for g in range(int(codes.max()) + 1 if data.n else 0):
        rows = np.flatnonzero(codes == g)
        if len(rows) < 2:
            dropped += len(rows)
            continue
        parts.append(pair_sums(splice, [oracle], _plain_terms(loss), method, rows=rows, workers=workers)[0])
        pairs += len(rows) * (len(rows) - 1)
        groups += 1
    if dropped:
        warnings.warn(f"conditional_reliance: dropped {dropped} row(s) whose x2 value occurs only once",
                      stacklevel=2)
    if not pairs:
        raise UsageError("conditional_reliance: every x2 group is a singleton; no pairs to splice")
    total = math.fsum(parts)
    return ConditionalReliance(total / pairs, pairs, groups, dropped)
