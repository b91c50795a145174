"""Oracles: prediction functions standing in for counterfactual queries.

An :class:`Oracle` wraps a vectorized ``predict(X)`` where ``X`` is a
float matrix whose columns follow ``oracle.columns``. The fitters here
produce linear-index oracles (OLS, logistic IRLS, Huber IRLS) whose
parameters serialize to JSON; anything else can be wrapped directly.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from .errors import NumericalError, UsageError
from .tabular import Dataset

UNBOUNDED = (-math.inf, math.inf)
PROBABILITY = (0.0, 1.0)

HUBER_C = 1.345
MAD_CONSISTENCY = 0.6745
LOGISTIC_TOL = 1e-8
HUBER_TOL = 1e-6
MAX_ITER = 100


class SeparationWarning(UserWarning):
    """Logistic fit did not converge because the classes are separable."""


@dataclass(frozen=True)
class FitDiagnostics:
    fitter: str
    iterations: int
    converged: bool
    objective: float
    coefficients: tuple[float, ...] = ()
    terms: tuple[str, ...] = ()
    scale: float | None = None
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "fitter": self.fitter,
            "iterations": self.iterations,
            "converged": self.converged,
            "objective": self.objective,
            "terms": list(self.terms),
            "coefficients": list(self.coefficients),
            "scale": self.scale,
            "notes": list(self.notes),
        }


class Oracle:
    """Deterministic prediction function over named covariates."""

    def __init__(self, predict: Callable[[np.ndarray], np.ndarray], columns: Sequence[str],
                 output_range: tuple[float, float] = UNBOUNDED, name: str = "external",
                 diagnostics: FitDiagnostics | None = None, model=None):
        lo, hi = output_range
        if not lo <= hi:
            raise UsageError("oracle output_range must satisfy lo <= hi")
        self._predict = predict
        self.columns = tuple(columns)
        self.output_range = (float(lo), float(hi))
        self.name = name
        self.diagnostics = diagnostics
        self.model = model

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.columns):
            raise UsageError(f"oracle {self.name!r} expects a (m, {len(self.columns)}) matrix")
        return np.asarray(self._predict(X), dtype=np.float64).reshape(len(X))

    __call__ = predict

    def predict_data(self, data: Dataset) -> np.ndarray:
        return self.predict(data.matrix(self.columns))

    def first_invalid(self, values: np.ndarray):
        """Index of the first non-finite or out-of-range output, else None."""
        lo, hi = self.output_range
        bad = ~np.isfinite(values) | (values < lo) | (values > hi)
        if bad.any():
            return int(np.argmax(bad))
        return None

    def __repr__(self):
        return f"Oracle({self.name!r}, columns={list(self.columns)}, range={self.output_range})"


def constant_oracle(value: float, columns: Sequence[str] = (), output_range=UNBOUNDED) -> Oracle:
    model = ConstantModel(float(value))
    return Oracle(model, columns, output_range, name="constant", model=model)


@dataclass(frozen=True)
class BoundedOracle:
    """Pointwise envelope ``f_min <= f <= f_max`` on a probability oracle."""

    f_min: Oracle
    f_max: Oracle

    def __post_init__(self):
        if self.f_min.columns != self.f_max.columns:
            raise UsageError("bounded oracle: f_min and f_max must read the same columns")
        for f in (self.f_min, self.f_max):
            lo, hi = f.output_range
            if lo < 0 or hi > 1:
                raise UsageError("bounded oracle: both envelopes need output ranges inside [0, 1]")

    @property
    def columns(self):
        return self.f_min.columns


# -- linear-index models -----------------------------------------------------

@dataclass(frozen=True)
class ConstantModel:
    value: float

    def __call__(self, X):
        return np.full(len(X), self.value)


@dataclass(frozen=True)
class LinearIndexModel:
    """``g(design(x) @ coef)`` with an identity or logistic link.

    Categorical covariates (integer level codes) are expanded into
    treatment dummies for levels ``1..L-1``; other covariates enter linearly.
    """

    columns: tuple[str, ...]
    coef: np.ndarray
    link: str = "identity"
    intercept: bool = True
    n_levels: Mapping[str, int] = field(default_factory=dict)
    level_labels: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        coef = np.array(self.coef, dtype=np.float64)
        coef.setflags(write=False)
        object.__setattr__(self, "coef", coef)
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def terms(self) -> tuple[str, ...]:
        names = ["(intercept)"] if self.intercept else []
        for c in self.columns:
            if c in self.n_levels:
                labels = self.level_labels.get(c) or tuple(str(k) for k in range(self.n_levels[c]))
                names += [f"{c}[{labels[k]}]" for k in range(1, self.n_levels[c])]
            else:
                names.append(c)
        return tuple(names)

    def design(self, X: np.ndarray) -> np.ndarray:
        parts = [np.ones((len(X), 1))] if self.intercept else []
        for k, c in enumerate(self.columns):
            col = X[:, k]
            if c in self.n_levels:
                levels = np.arange(1, self.n_levels[c])
                parts.append((col[:, None] == levels[None, :]).astype(np.float64))
            else:
                parts.append(col[:, None])
        if not parts:
            return np.empty((len(X), 0))
        return np.hstack(parts)

    def index(self, X) -> np.ndarray:
        return self.design(np.asarray(X, dtype=np.float64)) @ self.coef

    def __call__(self, X):
        eta = self.index(X)
        return expit(eta) if self.link == "logit" else eta


def _model_spec(data: Dataset, covariates: Sequence[str], intercept: bool, link: str) -> LinearIndexModel:
    n_levels, labels = {}, {}
    for c in covariates:
        spec = data.spec(c)
        if spec.kind == "categorical":
            n_levels[c] = len(spec.levels)
            labels[c] = spec.levels
    width = int(intercept) + sum(n_levels.get(c, 2) - 1 for c in covariates)
    return LinearIndexModel(tuple(covariates), np.zeros(width), link, intercept, n_levels, labels)


def _prepare(data: Dataset, outcome: str, covariates: Sequence[str], intercept: bool, link: str):
    covariates = tuple(covariates)
    if outcome in covariates:
        raise UsageError(f"outcome {outcome!r} cannot also be a covariate")
    for c in (outcome, *covariates):
        data.spec(c)
    template = _model_spec(data, covariates, intercept, link)
    D = template.design(data.matrix(covariates))
    y = data[outcome].astype(np.float64)
    if D.shape[1] == 0:
        raise UsageError("model has no terms (no covariates and no intercept)")
    if data.n < D.shape[1]:
        raise UsageError(f"need at least {D.shape[1]} rows to fit {D.shape[1]} coefficients; got {data.n}")
    _check_rank(D, template.terms)
    return template, D, y


def _check_rank(D: np.ndarray, terms: Sequence[str]) -> None:
    scale = np.linalg.norm(D, axis=0)
    scale[scale == 0] = 1.0
    Ds = D / scale
    if np.linalg.matrix_rank(Ds) == Ds.shape[1]:
        return
    dependent = []
    rank = 0
    for k in range(Ds.shape[1]):
        r = np.linalg.matrix_rank(Ds[:, : k + 1])
        if r == rank:
            dependent.append(terms[k])
        rank = r
    raise NumericalError(f"design matrix is rank deficient; collinear term(s): {', '.join(dependent)}")


def _wls(D, y, w=None):
    if w is None:
        return np.linalg.lstsq(D, y, rcond=None)[0]
    sw = np.sqrt(w)
    return np.linalg.lstsq(D * sw[:, None], y * sw, rcond=None)[0]


def _oracle(template: LinearIndexModel, coef, name, output_range, diagnostics) -> Oracle:
    model = LinearIndexModel(template.columns, coef, template.link, template.intercept,
                             template.n_levels, template.level_labels)
    return Oracle(model, model.columns, output_range, name=name, diagnostics=diagnostics, model=model)


def fit_ols(data: Dataset, outcome: str, covariates: Sequence[str], intercept: bool = True) -> Oracle:
    """Least-squares linear predictor."""
    template, D, y = _prepare(data, outcome, covariates, intercept, "identity")
    coef = _wls(D, y)
    resid = y - D @ coef
    diag = FitDiagnostics("ols", 1, True, float(resid @ resid), tuple(coef.tolist()), template.terms)
    return _oracle(template, coef, "ols", UNBOUNDED, diag)


def _log_likelihood(y, eta):
    # log p = -log(1 + e^-eta), log(1 - p) = -log(1 + e^eta)
    return -float(np.sum(y * np.logaddexp(0.0, -eta) + (1.0 - y) * np.logaddexp(0.0, eta)))


def fit_logistic(data: Dataset, outcome: str, covariates: Sequence[str], intercept: bool = True,
                 max_iter: int = MAX_ITER, tol: float = LOGISTIC_TOL) -> Oracle:
    """Logistic regression by iteratively reweighted least squares.

    Newton steps are halved until the log-likelihood does not decrease.
    Convergence means the largest coefficient change fell below ``tol``.
    Under (quasi-)separation the maximum likelihood estimate does not
    exist; the fit is then reported with ``converged=False`` and a
    :class:`SeparationWarning`. The returned oracle still gives
    usable probabilities.
    """
    spec = data.spec(outcome)
    if spec.kind != "binary":
        raise UsageError(f"logistic regression needs a binary outcome; {outcome!r} is {spec.kind}")
    template, D, y = _prepare(data, outcome, covariates, intercept, "logit")
    beta = np.zeros(D.shape[1])
    eta = D @ beta
    ll = _log_likelihood(y, eta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(eta)
        w = np.maximum(p * (1.0 - p), 1e-300)
        step = _wls(D, (y - p) / w, w)
        for _ in range(60):
            cand = beta + step
            eta_c = D @ cand
            ll_c = _log_likelihood(y, eta_c)
            if ll_c >= ll - 1e-12 * abs(ll) or not np.any(step):
                break
            step = step / 2.0
        change = float(np.max(np.abs(cand - beta))) if len(beta) else 0.0
        beta, eta, ll = cand, eta_c, ll_c
        if change < tol:
            converged = True
            break
    notes = ()
    p = expit(eta)
    # saturated fitted probabilities mean the MLE does not exist; the
    # Newton steps stall there, which must not be read as convergence
    if np.any((p < 1e-10) | (p > 1 - 1e-10)):
        converged = False
        notes = ("separation: outcome is (quasi-)separable; coefficients are not identified",)
        warnings.warn(notes[0], SeparationWarning, stacklevel=2)
    elif not converged:
        notes = (f"no convergence within {max_iter} iterations",)
    diag = FitDiagnostics("logistic", it, converged, -2.0 * ll, tuple(beta.tolist()), template.terms, notes=notes)
    return _oracle(template, beta, "logistic", PROBABILITY, diag)


def huber_rho(u, c=HUBER_C):
    """Huber objective: quadratic inside ``[-c, c]``, linear outside."""
    a = np.abs(u)
    return np.where(a <= c, 0.5 * u * u, c * a - 0.5 * c * c)


def huber_objective(coef, D, y, scale, c=HUBER_C) -> float:
    return float(np.sum(huber_rho((y - D @ coef) / scale, c)))


def _robust_scale(resid):
    s = float(np.median(np.abs(resid))) / MAD_CONSISTENCY
    if s > 0:
        return s, "mad"
    s = float(np.mean(np.abs(resid)))
    return s, "mean_abs"


def fit_huber(data: Dataset, outcome: str, covariates: Sequence[str], tuning_c: float = HUBER_C,
              max_iter: int = MAX_ITER, tol: float = HUBER_TOL, intercept: bool = True) -> Oracle:
    """Huber M-estimator of a linear model, fitted by IRLS.

    The scale is re-estimated each iteration as the median absolute
    residual divided by 0.6745. If that is zero (the fit is exact on at
    least half the rows) the mean absolute residual is used instead, and if
    that is zero too the exact-fit least-squares solution is returned.
    """
    if tuning_c <= 0:
        raise UsageError("Huber tuning constant must be positive")
    template, D, y = _prepare(data, outcome, covariates, intercept, "identity")
    beta = _wls(D, y)
    converged = False
    notes = []
    scale = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        resid = y - D @ beta
        scale, how = _robust_scale(resid)
        if scale == 0.0:
            notes.append("exact fit: zero residual scale, returning least squares")
            converged = True
            break
        if how != "mad" and "zero MAD: mean absolute residual scale" not in notes:
            notes.append("zero MAD: mean absolute residual scale")
        a = np.abs(resid / scale)
        w = np.where(a <= tuning_c, 1.0, tuning_c / np.maximum(a, 1e-300))
        new = _wls(D, y, w)
        change = float(np.max(np.abs(new - beta)))
        beta = new
        if change < tol:
            converged = True
            break
    objective = huber_objective(beta, D, y, scale, tuning_c) if scale > 0 else 0.0
    diag = FitDiagnostics("huber", it, converged, objective, tuple(beta.tolist()), template.terms,
                          scale=scale, notes=tuple(notes) + (f"tuning_c={tuning_c!r}",))
    oracle = _oracle(template, beta, "huber", UNBOUNDED, diag)
    oracle.tuning_c = tuning_c
    return oracle


# -- partial identification ----------------------------------------------------

def identification_interval(f1_value, p_z1):
    """``[f1 * P(Z=1), f1 * P(Z=1) + P(Z=0)]``; works elementwise."""
    lo = np.multiply(f1_value, p_z1)
    hi = lo + (1.0 - p_z1)
    if np.ndim(lo) == 0:
        return float(lo), float(hi)
    return lo, hi


def bound_oracle(f1: Oracle, p_z1: float, allow_vacuous: bool = False) -> BoundedOracle:
    """Envelope for ``E[Y|X]`` when ``E[Y|X, Z=1]`` is estimated by ``f1``
    and only the response rate ``P(Z=1)`` is known."""
    lo, hi = f1.output_range
    if lo < 0 or hi > 1:
        raise UsageError("bound_oracle: f1 must be a probability oracle with range inside [0, 1]")
    if not 0 <= p_z1 <= 1:
        raise UsageError("bound_oracle: p_z1 must lie in [0, 1]")
    if p_z1 == 0 and not allow_vacuous:
        raise UsageError("bound_oracle: p_z1 = 0 gives the vacuous interval [0, 1]; pass allow_vacuous=True")
    p = float(p_z1)

    def f_min(X):
        return f1.predict(X) * p

    def f_max(X):
        return f1.predict(X) * p + (1.0 - p)

    return BoundedOracle(
        Oracle(f_min, f1.columns, (lo * p, hi * p), name=f"{f1.name}_min"),
        Oracle(f_max, f1.columns, (lo * p + 1 - p, hi * p + 1 - p), name=f"{f1.name}_max"),
    )


# -- fitter specifications -----------------------------------------------------

FITTERS = ("ols", "logistic", "huber", "constant")


@dataclass(frozen=True)
class FitterSpec:
    """How to (re)fit an oracle; used by refitting bootstraps and the CLI."""

    kind: str
    covariates: tuple[str, ...]
    intercept: bool = True
    tuning_c: float = HUBER_C
    max_iter: int = MAX_ITER
    tol: float | None = None
    value: float | None = None

    def __post_init__(self):
        if self.kind not in FITTERS:
            raise UsageError(f"unknown fitter {self.kind!r}; expected one of {FITTERS}")
        object.__setattr__(self, "covariates", tuple(self.covariates))

    def fit(self, data: Dataset, outcome: str) -> Oracle:
        if self.kind == "ols":
            return fit_ols(data, outcome, self.covariates, self.intercept)
        if self.kind == "logistic":
            return fit_logistic(data, outcome, self.covariates, self.intercept, self.max_iter,
                                self.tol or LOGISTIC_TOL)
        if self.kind == "huber":
            return fit_huber(data, outcome, self.covariates, self.tuning_c, self.max_iter,
                             self.tol or HUBER_TOL, self.intercept)
        value = self.value if self.value is not None else float(np.mean(data[outcome]))
        return constant_oracle(value, self.covariates)

    def without(self, columns: Sequence[str]) -> "FitterSpec":
        keep = tuple(c for c in self.covariates if c not in set(columns))
        return FitterSpec(self.kind, keep, self.intercept, self.tuning_c, self.max_iter, self.tol, self.value)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "covariates": list(self.covariates), "intercept": self.intercept,
                "tuning_c": self.tuning_c, "max_iter": self.max_iter, "tol": self.tol, "value": self.value}


# -- serialization -------------------------------------------------------------

def model_to_dict(oracle: Oracle) -> dict:
    model = oracle.model
    out = {"fitter": oracle.name, "columns": list(oracle.columns), "output_range": list(oracle.output_range)}
    if isinstance(model, ConstantModel):
        out["value"] = model.value
    elif isinstance(model, LinearIndexModel):
        out.update(link=model.link, intercept=model.intercept, terms=list(model.terms),
                   coefficients=model.coef.tolist(), n_levels=dict(model.n_levels),
                   level_labels={k: list(v) for k, v in model.level_labels.items()})
    else:
        raise UsageError(f"oracle {oracle.name!r} is not a serializable fitted model")
    if oracle.diagnostics is not None:
        out["diagnostics"] = oracle.diagnostics.to_dict()
    if hasattr(oracle, "tuning_c"):
        out["tuning_c"] = oracle.tuning_c
    return out


def model_from_dict(d: dict) -> Oracle:
    diag = None
    if "diagnostics" in d:
        dd = dict(d["diagnostics"])
        diag = FitDiagnostics(dd["fitter"], dd["iterations"], dd["converged"], dd["objective"],
                              tuple(dd["coefficients"]), tuple(dd["terms"]), dd.get("scale"),
                              tuple(dd.get("notes", ())))
    rng = tuple(float(v) for v in d["output_range"])
    if "value" in d:
        return constant_oracle(d["value"], d["columns"], rng)
    model = LinearIndexModel(tuple(d["columns"]), np.array(d["coefficients"]), d["link"], d["intercept"],
                             dict(d.get("n_levels", {})),
                             {k: tuple(v) for k, v in d.get("level_labels", {}).items()})
    oracle = Oracle(model, model.columns, rng, name=d["fitter"], diagnostics=diag, model=model)
    if "tuning_c" in d:
        oracle.tuning_c = d["tuning_c"]
    return oracle


def save_model(oracle: Oracle, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(oracle), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> Oracle:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
