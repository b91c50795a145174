"""Loss functions under which reliance is measured."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError

LOSS_KINDS = ("square", "cross_entropy", "utility")
DEFAULT_CLIP_EPSILON = 1e-12


def square_loss(y, yhat):
    d = np.subtract(y, yhat, dtype=np.float64)
    return d * d


def cross_entropy_loss(y, p, clip_epsilon=DEFAULT_CLIP_EPSILON):
    """Binary cross-entropy, nonnegative form, with ``p`` clamped to
    ``[eps, 1 - eps]`` so that degenerate predictions stay finite."""
    y = np.asarray(y, dtype=np.float64)
    p = np.clip(np.asarray(p, dtype=np.float64), clip_epsilon, 1.0 - clip_epsilon)
    return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))


def decision_utility(d, p0, p1, lam):
    """``u(d) = -d * P(S=0|x) - lam * (1 - d) * P(S=1|x)``; affine in ``d``."""
    d = np.asarray(d, dtype=np.float64)
    return -d * p0 - lam * (1.0 - d) * p1


def utility_loss(y, yhat, p0, p1, lam):
    """Utility shortfall ``u(y) - u(yhat)`` of predicting ``yhat`` instead of
    the decision actually taken. Signed: negative when ``yhat`` is the
    better decision under ``u``."""
    return decision_utility(y, p0, p1, lam) - decision_utility(yhat, p0, p1, lam)


@dataclass(frozen=True)
class LossSpec:
    """Which loss to use, plus its parameters.

    ``risk_columns`` names the two dataset columns holding ``P(S=0|x)`` and
    ``P(S=1|x)`` for the utility loss. Their values are always taken from
    the original (unspliced) row.
    """

    kind: str = "square"
    lam: float = 1.0
    risk_columns: tuple[str, str] | None = None
    clip_epsilon: float = DEFAULT_CLIP_EPSILON

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise UsageError(f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}")
        if self.kind == "utility":
            if self.lam < 0:
                raise UsageError("utility loss: lambda must be nonnegative")
            if self.risk_columns is None or len(self.risk_columns) != 2:
                raise UsageError("utility loss needs two risk columns (P(S=0|x), P(S=1|x))")
            object.__setattr__(self, "risk_columns", tuple(self.risk_columns))
        if self.kind == "cross_entropy" and not 0 < self.clip_epsilon < 0.5:
            raise UsageError("cross-entropy clip_epsilon must lie in (0, 0.5)")

    @property
    def monotone(self) -> bool:
        """True when the loss grows with ``|y - yhat|`` and vanishes at 0."""
        return self.kind in ("square", "cross_entropy")

    def context(self, data):
        """Per-row context arrays the loss needs (``None`` if it needs none)."""
        if self.kind != "utility":
            return None
        p0, p1 = (np.asarray(data[c], dtype=np.float64) for c in self.risk_columns)
        for name, p in zip(self.risk_columns, (p0, p1)):
            if p.size and (p.min() < 0 or p.max() > 1):
                raise UsageError(f"utility loss: risk column {name!r} must lie in [0, 1]")
        return p0, p1

    def check_predictions(self, yhat) -> None:
        if self.kind == "cross_entropy":
            yhat = np.asarray(yhat)
            if yhat.size and (yhat.min() < 0 or yhat.max() > 1):
                raise UsageError("cross-entropy loss needs predictions in [0, 1]")

    def __call__(self, y, yhat, context=None):
        if self.kind == "square":
            return square_loss(y, yhat)
        if self.kind == "cross_entropy":
            return cross_entropy_loss(y, yhat, self.clip_epsilon)
        if context is None:
            raise UsageError("utility loss evaluated without its risk-column context")
        p0, p1 = context
        return utility_loss(y, yhat, p0, p1, self.lam)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "utility":
            out.update(lam=self.lam, risk_columns=list(self.risk_columns))
        if self.kind == "cross_entropy":
            out["clip_epsilon"] = self.clip_epsilon
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "LossSpec":
        risk = d.get("risk_columns")
        return cls(kind=d.get("kind", "square"), lam=float(d.get("lam", 1.0)),
                   risk_columns=tuple(risk) if risk else None,
                   clip_epsilon=float(d.get("clip_epsilon", DEFAULT_CLIP_EPSILON)))
