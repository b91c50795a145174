"""Exact population reliance for small discrete joint distributions.

A joint is an array ``p[y, a, c]`` over outcome values ``y``, levels ``a``
of the shuffled covariate and levels ``c`` of the retained covariate. The
oracle is the exact conditional mean ``f(a, c) = E[Y | X1=a, X2=c]``.
Population reliance draws the shuffled level independently from its
marginal::

    r = sum_{y,a,c} p(y,a,c) sum_b p1(b) L(y, f(b, c))
    b = sum_{y,a,c} p(y,a,c) L(y, f(a, c))
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UsageError
from ..losses import LossSpec


@dataclass(frozen=True)
class DiscreteJoint:
    p: np.ndarray
    y_values: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        y = np.asarray(self.y_values, dtype=np.float64)
        if p.ndim != 3 or p.shape[0] != len(y):
            raise UsageError("joint must have shape (len(y_values), |X1|, |X2|)")
        if np.any(p < 0) or not np.isclose(p.sum(), 1.0, atol=1e-12):
            raise UsageError("joint probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "y_values", y)

    @property
    def p12(self) -> np.ndarray:
        return self.p.sum(axis=0)

    @property
    def p1(self) -> np.ndarray:
        return self.p.sum(axis=(0, 2))

    def conditional_mean(self) -> np.ndarray:
        """``f[a, c] = E[Y | a, c]``; requires every ``(a, c)`` to have mass."""
        p12 = self.p12
        if np.any(p12 <= 0):
            raise UsageError("every (x1, x2) cell needs positive mass so spliced queries are defined")
        return np.tensordot(self.y_values, self.p, axes=(0, 0)) / p12


def random_joint(rng: np.random.Generator, n_y: int, n1: int, n2: int, mean_independent: bool = False,
                 y_values=None) -> DiscreteJoint:
    """Random strictly positive joint; with ``mean_independent`` the outcome
    law depends on ``x2`` only, so ``E[Y | x1, x2]`` does not vary with ``x1``."""
    y = np.arange(n_y, dtype=np.float64) if y_values is None else np.asarray(y_values, dtype=np.float64)
    p12 = rng.dirichlet(np.ones(n1 * n2)).reshape(n1, n2) * 0.9 + 0.1 / (n1 * n2)
    if mean_independent:
        cond = rng.dirichlet(np.ones(n_y), size=n2).T[:, None, :]
        cond = np.broadcast_to(cond, (n_y, n1, n2))
    else:
        cond = np.moveaxis(rng.dirichlet(np.ones(n_y), size=(n1, n2)), -1, 0)
    p = cond * p12[None]
    return DiscreteJoint(p / p.sum(), y)


def population_reliance(joint: DiscreteJoint, loss: LossSpec) -> tuple[float, float]:
    """Exact ``(r, b)`` for the conditional-mean oracle."""
    if loss.kind == "utility":
        raise UsageError("population_reliance supports square and cross_entropy losses")
    f = joint.conditional_mean()
    n_y, n1, n2 = joint.p.shape
    # L[y, b, c] = L(y, f(b, c))
    L = np.stack([loss(np.full(f.shape, yv), f) for yv in joint.y_values])
    p_yc = joint.p.sum(axis=1)
    r = float(np.einsum("yc,b,ybc->", p_yc, joint.p1, L))
    b = float(np.sum(joint.p * L))
    return r, b


def _bern_kl(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(p > 0, p * np.log(p / q), 0.0)
        c = np.where(p < 1, (1 - p) * np.log((1 - p) / (1 - q)), 0.0)
    return a + c


def expected_kl(joint: DiscreteJoint) -> float:
    """``E KL(Bern f(a, c) || Bern f(b, c))`` with ``(a, c) ~ P`` and ``b``
    an independent draw from the marginal of ``x1``; binary outcomes only."""
    if not np.array_equal(joint.y_values, [0.0, 1.0]):
        raise UsageError("expected_kl needs outcome values (0, 1)")
    f = joint.conditional_mean()
    kl = _bern_kl(f[:, None, :], f[None, :, :])  # [a, b, c]
    return float(np.einsum("ac,b,abc->", joint.p12, joint.p1, kl))


def mean_independent(joint: DiscreteJoint, tol: float = 1e-12) -> bool:
    f = joint.conditional_mean()
    return bool(np.all(np.abs(f - f[:1]) <= tol))
