"""Result records and their JSON / CSV forms.

Field names in ``to_dict`` output are part of the stable report format.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from ..errors import UsageError
from ..losses import LossSpec


@dataclass(frozen=True)
class RelianceEstimate:
    r_hat: float
    b_hat: float
    n: int
    x1_columns: tuple[str, ...]
    loss: LossSpec
    method: str

    @property
    def normalized(self) -> float:
        return self.r_hat - self.b_hat

    def to_dict(self) -> dict:
        return {"r_hat": self.r_hat, "b_hat": self.b_hat, "normalized": self.normalized, "n": self.n,
                "x1_columns": list(self.x1_columns), "loss": self.loss.to_dict(), "method": self.method}


@dataclass(frozen=True)
class RelianceInterval:
    r_min: float
    r_max: float

    def __post_init__(self):
        if not self.r_min <= self.r_max:
            raise UsageError(f"reliance interval needs r_min <= r_max; got [{self.r_min}, {self.r_max}]")

    @property
    def width(self) -> float:
        return self.r_max - self.r_min

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.r_min - tol <= value <= self.r_max + tol

    def to_dict(self) -> dict:
        return {"r_min": self.r_min, "r_max": self.r_max}


@dataclass
class RankingReport:
    """Per-group normalized reliance for each covariate set, plus orderings.

    ``entries[group][set_label]`` is a :class:`RelianceEstimate`;
    ``orderings[set_label]`` lists groups by descending ``r_hat - b_hat``
    (ties by group id). ``failures`` maps groups that could not be
    estimated to the error message. ``cross`` holds the optional stacked
    cross-distribution check.
    """

    entries: dict[str, dict[str, RelianceEstimate]]
    orderings: dict[str, list[str]]
    failures: dict[str, str] = field(default_factory=dict)
    cross: dict | None = None

    def value(self, group: str, label: str) -> float:
        return self.entries[group][label].normalized

    def to_dict(self) -> dict:
        return {
            "entries": {g: {k: e.to_dict() for k, e in sets.items()} for g, sets in self.entries.items()},
            "orderings": self.orderings,
            "failures": self.failures,
            "cross": self.cross,
        }

    def to_csv(self) -> str:
        return rows_to_csv(ranking_rows(self))


def ranking_rows(report: RankingReport) -> list[dict]:
    rows = []
    for label, order in report.orderings.items():
        for rank, g in enumerate(order, start=1):
            e = report.entries[g][label]
            rows.append({"group": g, "covariate_set": label, "rank": rank, "r_hat": e.r_hat, "b_hat": e.b_hat,
                         "normalized": e.normalized, "n": e.n, "method": e.method})
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, round-trippable floats)."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"
