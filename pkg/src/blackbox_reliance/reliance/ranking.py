"""Ranking several decision-makers by normalized reliance.

Each decision-maker (group) has its own data, oracle and loss. Groups are
ranked per covariate set by ``r_hat - b_hat``. Stacking the groups into one
joint problem with the additively separable loss ``sum_k L_k`` and
shuffling only group ``k``'s audited columns gives the cross-distribution
reliance ``r_k^x``, which equals ``r_k + sum_{i != k} b_i``. As the sum of
all baselines is common to every group, ranking by ``r_k^x`` and by
``r_k - b_k`` agree. The optional validation path computes ``r_k^x``
directly from the stacked problem and checks both facts.
"""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from ..errors import NumericalError, RelianceError, UsageError
from ..losses import LossSpec
from ..models import Oracle
from ..tabular import Dataset, Partition
from ._engine import Splice, evaluate
from .estimators import estimate_reliance
from .types import RankingReport, RelianceEstimate

IDENTITY_TOL = 1e-10
TIE_TOL = 1e-10
VALIDATION_ROWS = 200


def order_groups(values: Mapping[str, float], tie_tol: float = 0.0) -> list[str]:
    """Group ids by descending value; values within ``tie_tol`` of each
    other are treated as tied and ordered by group id."""
    pending = sorted(values, key=lambda g: (-values[g], g))
    if tie_tol <= 0:
        return pending
    out: list[str] = []
    while pending:
        top = values[pending[0]]
        tied = sorted(g for g in pending if abs(values[g] - top) <= tie_tol)
        out.extend(tied)
        pending = [g for g in pending if g not in tied]
    return out


def _as_sets(covariate_sets) -> dict[str, Partition]:
    if isinstance(covariate_sets, Partition):
        return {"+".join(covariate_sets.x1): covariate_sets}
    sets = dict(covariate_sets)
    if not sets:
        raise UsageError("rank_reliance needs at least one covariate set")
    return sets


def _loss_for(loss, group: str) -> LossSpec:
    if isinstance(loss, LossSpec):
        return loss
    try:
        return loss[group]
    except KeyError:
        raise UsageError(f"no loss given for group {group!r}") from None


def rank_reliance(groups: Mapping[str, tuple[Dataset, Oracle]], loss, covariate_sets,
                  method: str = "auto", validate: bool = False, seed: int = 0,
                  validation_rows: int = VALIDATION_ROWS, workers: int = 1) -> RankingReport:
    """Estimate ``r_hat - b_hat`` per group and covariate set and rank groups.

    Parameters
    ----------
    groups : mapping of group id to ``(data, oracle)``
    loss : LossSpec, or a mapping of group id to LossSpec
    covariate_sets : Partition, or mapping of label to Partition
    validate : bool
        Also compute the cross-distribution reliance directly from the
        stacked problem (see :func:`cross_distribution_check`).

    A group whose estimation fails is listed in ``failures`` and left out
    of the orderings; the remaining groups are still ranked.
    """
    if not groups:
        raise UsageError("rank_reliance needs at least one group")
    sets = _as_sets(covariate_sets)
    if not isinstance(loss, LossSpec):
        missing = sorted(set(groups) - set(loss))
        if missing:
            raise UsageError(f"no loss given for group(s): {', '.join(missing)}")
    entries: dict[str, dict[str, RelianceEstimate]] = {}
    failures: dict[str, str] = {}
    for g in sorted(groups):
        data, oracle = groups[g]
        try:
            entries[g] = {label: estimate_reliance(data, oracle, _loss_for(loss, g), part, method, workers)
                          for label, part in sets.items()}
        except RelianceError as exc:
            failures[g] = f"{type(exc).__name__}: {exc}"
    orderings = {label: order_groups({g: e[label].normalized for g, e in entries.items()})
                 for label in sets}
    report = RankingReport(entries, orderings, failures)
    if validate and entries:
        ok = {g: groups[g] for g in entries}
        report.cross = {label: cross_distribution_check(ok, loss, part, seed=seed, rows=validation_rows)
                        for label, part in sets.items()}
    return report


def _aligned_subsamples(groups, rows: int, seed: int) -> dict[str, np.ndarray]:
    m = min(min(data.n for data, _ in groups.values()), rows)
    if m < 2:
        raise UsageError("cross-distribution check needs at least 2 rows in every group")
    rng = np.random.default_rng(seed)
    # independent per-group draws; row t of every group is coupled by index
    return {g: np.sort(rng.choice(groups[g][0].n, size=m, replace=False)) for g in sorted(groups)}


def cross_distribution_check(groups: Mapping[str, tuple[Dataset, Oracle]], loss, partition: Partition,
                             seed: int = 0, rows: int = VALIDATION_ROWS, tol: float = IDENTITY_TOL) -> dict:
    """Direct stacked computation of ``r_k^x`` on aligned subsamples.

    Each group is subsampled (without replacement) to a common size ``m``
    and rows are coupled by position. For group ``k`` the stacked loss of
    the pair ``(t, s)`` is ``L_k(y_t^k, f_k(x1_s^k, x2_t^k)) + sum_{i != k}
    L_i(y_t^i, f_i(x_t^i))`` and ``r_k^x`` averages it over ``s != t``.
    Raises :class:`NumericalError` if the result differs from
    ``r_k + sum_{i != k} b_i`` by more than ``tol``.
    """
    picks = _aligned_subsamples(groups, rows, seed)
    ids = sorted(groups)
    m = len(next(iter(picks.values())))
    sub = {g: groups[g][0].take(picks[g]) for g in ids}
    splices, own = {}, {}
    for g in ids:
        oracle = groups[g][1]
        sp = Splice(sub[g], partition, oracle.columns, _loss_for(loss, g))
        pred = evaluate(oracle, sp.X, lambda k: (k, k))
        splices[g] = sp
        own[g] = sp.loss(sp.y, pred, sp.context(np.arange(m)))
    est = {g: estimate_reliance(sub[g], groups[g][1], _loss_for(loss, g), partition, "exhaustive") for g in ids}
    cross, implied = {}, {}
    t_idx = np.repeat(np.arange(m), m)
    s_idx = np.tile(np.arange(m), m)
    keep = t_idx != s_idx
    t_idx, s_idx = t_idx[keep], s_idx[keep]
    for k in ids:
        sp, oracle = splices[k], groups[k][1]
        pred = evaluate(oracle, sp.pair_records(t_idx, s_idx), lambda q: (int(t_idx[q]), int(s_idx[q])))
        stacked = sp.loss(sp.y[t_idx], pred, sp.context(t_idx))
        for i in ids:
            if i != k:
                stacked = stacked + own[i][t_idx]
        cross[k] = math.fsum(stacked) / (m * (m - 1))
        implied[k] = est[k].r_hat + math.fsum(est[i].b_hat for i in ids if i != k)
        if abs(cross[k] - implied[k]) > tol:
            raise NumericalError(f"cross-distribution identity failed for group {k!r}: "
                                 f"direct {cross[k]!r} vs r + sum(b) {implied[k]!r}")
    by_cross = order_groups(cross, TIE_TOL)
    by_normalized = order_groups({g: est[g].normalized for g in ids}, TIE_TOL)
    return {"rows": m, "seed": seed, "cross": cross, "implied": implied,
            "normalized": {g: est[g].normalized for g in ids},
            "max_abs_diff": max(abs(cross[g] - implied[g]) for g in ids),
            "ordering_cross": by_cross, "ordering_normalized": by_normalized,
            "orderings_agree": by_cross == by_normalized}
