"""Splicing and fixed-order reductions shared by the estimators.

Work is cut into blocks whose boundaries depend only on the data (never
on the worker count), partial sums are produced per block, and the
partials are combined in block order with ``math.fsum``. Results are
therefore bit-identical for any number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from ..errors import OracleDomainError, RelianceError, UsageError
from ..losses import LossSpec
from ..models import Oracle
from ..tabular import Dataset, Partition

BLOCK_RECORDS = 1 << 16


def run_blocks(fn: Callable, tasks: Sequence, workers: int = 1) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def ordered_sum(parts: Sequence[np.ndarray]) -> np.ndarray:
    stacked = np.atleast_2d(np.array(parts, dtype=np.float64))
    return np.array([math.fsum(stacked[:, k]) for k in range(stacked.shape[1])])


class Splice:
    """Everything needed to build spliced oracle inputs for one analysis."""

    def __init__(self, data: Dataset, partition: Partition, columns: Sequence[str], loss: LossSpec):
        partition.validate(data)
        columns = tuple(columns)
        stray = [c for c in columns if c not in partition.covariates]
        if stray:
            raise UsageError(f"oracle reads column(s) outside the partition: {', '.join(stray)}")
        self.data = data
        self.partition = partition
        self.columns = columns
        self.loss = loss
        self.n = data.n
        self.X = data.matrix(columns)
        # positions (in oracle column order) that take the spliced-in x1 values
        self.swap = np.array([k for k, c in enumerate(columns) if c in partition.x1], dtype=np.intp)
        # for each x1 column, its position among the oracle's columns (or -1)
        self.x1_pos = [columns.index(c) if c in columns else -1 for c in partition.x1]
        self.y = data[partition.outcome].astype(np.float64)
        self.ctx = loss.context(data)

    # -- record construction ---------------------------------------------
    def pair_records(self, ii: np.ndarray, jj: np.ndarray) -> np.ndarray:
        R = self.X[ii]
        if len(self.swap):
            R[:, self.swap] = self.X[jj[:, None], self.swap[None, :]]
        return R

    def level_records(self, rows: np.ndarray, level: np.ndarray) -> np.ndarray:
        R = self.X[rows]
        for t, pos in enumerate(self.x1_pos):
            if pos >= 0:
                R[:, pos] = level[t]
        return R

    def context(self, ii):
        if self.ctx is None:
            return None
        return tuple(c[ii] for c in self.ctx)

    # -- blocking --------------------------------------------------------
    def pair_blocks(self, rows: np.ndarray | None = None) -> list[np.ndarray]:
        rows = np.arange(self.n) if rows is None else np.asarray(rows)
        m = len(rows)
        size = max(1, BLOCK_RECORDS // max(m - 1, 1))
        return [rows[s: s + size] for s in range(0, m, size)]

    def levels(self, rows: np.ndarray | None = None):
        """Distinct observed x1 tuples (sorted), row codes and counts."""
        x1 = self.data.matrix(self.partition.x1)
        if rows is not None:
            x1 = x1[rows]
        levels, codes, counts = np.unique(x1, axis=0, return_inverse=True, return_counts=True)
        return levels, codes.reshape(-1), counts


def require_discrete(data: Dataset, columns: Sequence[str], what: str) -> None:
    bad = [c for c in columns if not data.spec(c).discrete]
    if bad:
        raise UsageError(f"{what} needs categorical, binary or count columns; {', '.join(bad)} "
                         f"{'is' if len(bad) == 1 else 'are'} real-valued (use the exhaustive estimator)")


def evaluate(oracle: Oracle, R: np.ndarray, locate: Callable[[int], tuple[int, int]]) -> np.ndarray:
    """Run the oracle on spliced records, translating failures to
    :class:`OracleDomainError` with the offending ``(i, j)`` pair."""
    try:
        out = oracle.predict(R)
    except RelianceError:
        raise
    except Exception as exc:
        for k in range(len(R)):
            try:
                oracle.predict(R[k: k + 1])
            except Exception:
                i, j = locate(k)
                raise OracleDomainError(f"oracle {oracle.name!r} failed on spliced record (i={i}, j={j}): {exc}",
                                        pair=(i, j)) from exc
        raise OracleDomainError(f"oracle {oracle.name!r} failed on a batch of spliced records: {exc}") from exc
    bad = oracle.first_invalid(out)
    if bad is not None:
        i, j = locate(bad)
        raise OracleDomainError(
            f"oracle {oracle.name!r} returned {out[bad]!r} outside {oracle.output_range} "
            f"on spliced record (i={i}, j={j})", pair=(i, j))
    return out


def pair_sums(splice: Splice, oracles: Sequence[Oracle], terms: Callable, method: str,
              rows: np.ndarray | None = None, workers: int = 1) -> np.ndarray:
    """Sum ``terms(y_i, ctx_i, [f(x1_j, x2_i) for f in oracles])`` over all
    ordered pairs ``i != j`` of ``rows``.

    ``terms`` returns an array of shape ``(k, m)``; the result has shape
    ``(k,)``. ``method`` is ``"exhaustive"`` (one evaluation per pair) or
    ``"categorical"`` (one evaluation per row and distinct x1 tuple,
    weighted by ``n_c - 1{x1_i = c}``).
    """
    rows = np.arange(splice.n) if rows is None else np.asarray(rows)
    n = len(rows)

    if method == "exhaustive":
        def block(I):
            ii = np.repeat(I, n)
            jj = np.tile(rows, len(I))
            keep = ii != jj
            ii, jj = ii[keep], jj[keep]
            R = splice.pair_records(ii, jj)
            preds = [evaluate(f, R, lambda k: (int(ii[k]), int(jj[k]))) for f in oracles]
            return np.sum(terms(splice.y[ii], splice.context(ii), preds), axis=1)

        return ordered_sum(run_blocks(block, splice.pair_blocks(rows), workers))

    if method == "categorical":
        levels, codes, counts = splice.levels(rows)
        first_row = {c: int(rows[np.argmax(codes == c)]) for c in range(len(levels))}

        def level_block(c):
            R = splice.level_records(rows, levels[c])
            w = counts[c] - (codes == c)
            preds = [evaluate(f, R, lambda k: (int(rows[k]), first_row[c])) for f in oracles]
            T = terms(splice.y[rows], splice.context(rows), preds)
            return np.sum(T * w[None, :], axis=1)

        return ordered_sum(run_blocks(level_block, list(range(len(levels))), workers))

    raise UsageError(f"unknown method {method!r}; expected 'exhaustive' or 'categorical'")
