"""School-admissions simulation with survey non-response.

Applicants have race ``x1 ~ Bern(0.5)``, sex ``x2 ~ Bern(0.3)``, innate
ability ``a ~ N(6, 1)`` and study effort ``e ~ N(1, 1)``. The test score
is ``x3 = clip(round(a + e), 0, 10)`` (rounding half away from zero). The
admissions office decides ``y = 1{-2 x1 + x2 + x3/5 - 2.2 >= 0}``, and an
applicant answers the survey when ``z = 1{x1 + 3 x2 + x3/8 + e - 3.5 >= 0}``.

Only respondents reveal ``y``. The analysis fits ``E[Y | X, Z=1]`` on
respondents, widens it into the envelope implied by the known response
rate and reports conservative reliance bands per covariate. The exact
reliance of the true decision rule is available by enumeration.

Random numbers come from numpy's ``Generator`` over a ``Philox``
counter-based bit generator; normals use numpy's ziggurat sampler. Draw
order per call: uniform(x1), uniform(x2), normal(a), normal(e).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm

from .errors import UsageError
from .losses import LossSpec
from .models import FitDiagnostics, bound_oracle, fit_logistic
from .reliance import RelianceInterval, reliance_bounds
from .tabular import ColumnSchema, Dataset, Partition

P_X1, P_X2 = 0.5, 0.3
MEAN_A, MEAN_E = 6.0, 1.0
SURVEY_OFFSET = 3.5
SCORE_MAX = 10
DEFAULT_SEED = 7
DEFAULT_N = 10_000

COVARIATES = ("x1", "x2", "x3")
NAMES = {"x1": "race", "x2": "sex", "x3": "score"}

SCHEMA = (
    ColumnSchema("x1", "binary"),
    ColumnSchema("x2", "binary"),
    ColumnSchema("x3", "count"),
    ColumnSchema("a", "real", "auxiliary"),
    ColumnSchema("e", "real", "auxiliary"),
    ColumnSchema("y", "binary", "outcome"),
    ColumnSchema("z", "binary", "selection"),
)


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def score(a, e):
    return np.clip(round_half_away(np.asarray(a) + np.asarray(e)), 0, SCORE_MAX).astype(np.int64)


def true_decision(x1, x2, x3):
    """Admission rule, evaluated in integer form (index scaled by 5) so
    that boundary cases such as index exactly 0 are exact."""
    x1, x2, x3 = (np.asarray(v, dtype=np.int64) for v in (x1, x2, x3))
    out = (-10 * x1 + 5 * x2 + x3 - 11 >= 0).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def respond(x1, x2, x3, e, survey_offset: float = SURVEY_OFFSET):
    idx = np.asarray(x1) + 3 * np.asarray(x2) + np.asarray(x3) / 8 + np.asarray(e) - survey_offset
    return (idx >= 0).astype(np.int64)


def simulate(n: int = DEFAULT_N, seed: int = DEFAULT_SEED, survey_offset: float = SURVEY_OFFSET) -> Dataset:
    """Simulate ``n`` applicants; deterministic given ``seed``."""
    if n < 1:
        raise UsageError(f"simulate needs n >= 1; got {n}")
    rng = np.random.Generator(np.random.Philox(seed))
    x1 = (rng.random(n) < P_X1).astype(np.int64)
    x2 = (rng.random(n) < P_X2).astype(np.int64)
    a = rng.normal(MEAN_A, 1.0, n)
    e = rng.normal(MEAN_E, 1.0, n)
    x3 = score(a, e)
    cols = {"x1": x1, "x2": x2, "x3": x3, "a": a, "e": e, "y": true_decision(x1, x2, x3),
            "z": respond(x1, x2, x3, e, survey_offset)}
    return Dataset(SCHEMA, cols, provenance=f"admissions simulate(n={n}, seed={seed})")


def summarize(data: Dataset) -> dict:
    z, y = data["z"], data["y"]
    resp = int(z.sum())
    return {"n": data.n, "respondents": resp, "response_rate": resp / data.n,
            "acceptance_rate_respondents": float(y[z == 1].mean()) if resp else math.nan,
            "acceptance_rate_population": float(y.mean())}


# -- exact enumeration ---------------------------------------------------------

def _score_edges(k: int) -> tuple[float, float]:
    lo = -math.inf if k == 0 else k - 0.5
    hi = math.inf if k == SCORE_MAX else k + 0.5
    return lo, hi


def score_law() -> np.ndarray:
    """``P(x3 = k)``, ``k = 0..10``; ``a + e ~ N(7, sqrt 2)``, tails folded in."""
    sd = math.sqrt(2.0)
    out = np.empty(SCORE_MAX + 1)
    for k in range(SCORE_MAX + 1):
        lo, hi = _score_edges(k)
        out[k] = norm.cdf(hi, MEAN_A + MEAN_E, sd) - norm.cdf(lo, MEAN_A + MEAN_E, sd)
    return out


def _score_and_response(k: int, threshold: float) -> float:
    """``P(x3 = k, e >= threshold)``."""
    lo, hi = _score_edges(k)

    def integrand(e):
        return norm.pdf(e, MEAN_E) * (norm.cdf(hi - e, MEAN_A) - norm.cdf(lo - e, MEAN_A))

    val, _ = quad(integrand, threshold, math.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def population_joint() -> np.ndarray:
    """``P(x1, x2, x3)`` as a (2, 2, 11) array."""
    p1 = np.array([1 - P_X1, P_X1])
    p2 = np.array([1 - P_X2, P_X2])
    return p1[:, None, None] * p2[None, :, None] * score_law()[None, None, :]


def response_joint(survey_offset: float = SURVEY_OFFSET) -> np.ndarray:
    """``P(x1, x2, x3, z=1)`` as a (2, 2, 11) array."""
    out = np.empty((2, 2, SCORE_MAX + 1))
    for x1 in (0, 1):
        for x2 in (0, 1):
            w = (P_X1 if x1 else 1 - P_X1) * (P_X2 if x2 else 1 - P_X2)
            for k in range(SCORE_MAX + 1):
                out[x1, x2, k] = w * _score_and_response(k, survey_offset - x1 - 3 * x2 - k / 8)
    return out


def exact_response_rate(survey_offset: float = SURVEY_OFFSET) -> float:
    return float(response_joint(survey_offset).sum())


def _decision_grid() -> np.ndarray:
    x1, x2, x3 = np.meshgrid([0, 1], [0, 1], np.arange(SCORE_MAX + 1), indexing="ij")
    return true_decision(x1, x2, x3)


def reliance_from_joint(q: np.ndarray, k: int) -> float:
    """Exact square-loss reliance of the true rule on covariate ``k`` (1-3)
    under the joint ``q`` over ``(x1, x2, x3)``.

    The outcome is a deterministic function of the covariates, so the
    baseline is 0 and reliance is the probability that replacing ``x_k``
    with an independent draw from its marginal flips the decision.
    """
    if k not in (1, 2, 3):
        raise UsageError(f"covariate index must be 1, 2 or 3; got {k}")
    q = np.asarray(q, dtype=np.float64) / np.sum(q)
    axis = k - 1
    marg = q.sum(axis=tuple(a for a in range(3) if a != axis))
    Y = _decision_grid()
    total = 0.0
    for v, pv in enumerate(marg):
        spliced = np.take(Y, [v], axis=axis)  # broadcasts along axis
        total += float(pv) * float(np.sum(q * (Y != spliced)))
    return total


def true_reliance(k: int, conditioning: str = "population", survey_offset: float = SURVEY_OFFSET) -> float:
    """Exact reliance of the true rule on covariate ``k`` (1 race, 2 sex,
    3 score) in the applicant population or among survey respondents."""
    if conditioning == "population":
        return reliance_from_joint(population_joint(), k)
    if conditioning == "respondents":
        return reliance_from_joint(response_joint(survey_offset), k)
    raise UsageError(f"conditioning must be 'population' or 'respondents'; got {conditioning!r}")


def true_baseline(conditioning: str = "population") -> float:
    """Always 0: the decision is a deterministic function of the covariates."""
    if conditioning not in ("population", "respondents"):
        raise UsageError(f"conditioning must be 'population' or 'respondents'; got {conditioning!r}")
    return 0.0


# -- band analysis -------------------------------------------------------------

@dataclass
class BandResult:
    bands: dict[str, RelianceInterval]
    truth: dict[str, float]
    n: int
    seed: int
    respondents: int
    acceptance_rate: float
    accuracy: float
    p_z1: float
    p_z1_source: str
    diagnostics: FitDiagnostics | None = None
    notes: list[str] = field(default_factory=list)

    def ordering_claims(self) -> dict[str, bool]:
        race, sex, sc = (self.bands[NAMES[c]] for c in COVARIATES)
        return {
            "race_above_score": race.r_min > sc.r_max,
            "sex_above_score": sex.r_min > sc.r_max,
            "race_sex_overlap": race.r_min <= sex.r_max and sex.r_min <= race.r_max,
        }

    def truth_inside(self) -> dict[str, bool]:
        return {k: self.bands[k].contains(v) for k, v in self.truth.items()}

    def rows(self) -> list[dict]:
        return [{"covariate": name, "r_min": self.bands[name].r_min, "r_max": self.bands[name].r_max,
                 "true_value": self.truth[name]} for name in (NAMES[c] for c in COVARIATES)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=["covariate", "r_min", "r_max", "true_value"], lineterminator="\n")
            w.writeheader()
            for row in self.rows():
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})

    def to_dict(self) -> dict:
        return {"n": self.n, "seed": self.seed, "respondents": self.respondents,
                "acceptance_rate": self.acceptance_rate, "accuracy": self.accuracy, "p_z1": self.p_z1,
                "p_z1_source": self.p_z1_source, "bands": {k: v.to_dict() for k, v in self.bands.items()},
                "truth": self.truth, "ordering": self.ordering_claims(), "truth_inside": self.truth_inside(),
                "diagnostics": self.diagnostics.to_dict() if self.diagnostics else None, "notes": self.notes}


def run_band_analysis(n: int = DEFAULT_N, seed: int = DEFAULT_SEED, p_z1: float | None = None,
                      survey_offset: float = SURVEY_OFFSET, workers: int = 1) -> BandResult:
    """Conservative reliance bands for race, sex and score among respondents.

    ``p_z1`` defaults to the empirical response rate (the known survey
    rate); pass a value to override it, e.g. 1 to collapse the envelope.
    """
    if n < 100:
        raise UsageError(f"run_band_analysis needs n >= 100; got {n}")
    data = simulate(n, seed, survey_offset)
    resp = data.select(data["z"] == 1)
    if resp.n < 2:
        raise UsageError("fewer than two survey respondents; cannot fit the respondent oracle")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        f1 = fit_logistic(resp, "y", COVARIATES)
    notes = sorted({str(w.message) for w in caught})
    accuracy = float(np.mean((f1.predict_data(resp) >= 0.5).astype(np.int64) == resp["y"]))
    source = "override" if p_z1 is not None else "empirical"
    p = float(data["z"].mean()) if p_z1 is None else float(p_z1)
    bounded = bound_oracle(f1, p)
    loss = LossSpec("square")
    bands, truth = {}, {}
    for k, col in enumerate(COVARIATES, start=1):
        part = Partition((col,), tuple(c for c in COVARIATES if c != col), "y")
        bands[NAMES[col]] = reliance_bounds(resp, bounded, loss, part, "categorical", workers)
        truth[NAMES[col]] = true_reliance(k, "respondents", survey_offset)
    return BandResult(bands, truth, n, seed, resp.n, float(resp["y"].mean()), accuracy, p, source,
                      f1.diagnostics, notes)
