"""Run configuration for command-line audits.

A run is described by an INI file; every key can be overridden by the
matching command-line flag. Sections and keys::

    [input]
    format = csv | chunks | admissions
    path = decisions.csv          # csv and chunks
    schema = decisions.ini        # csv only
    n = 10000                     # admissions only
    survey_offset = 3.5           # admissions only

    [partition]
    x1 = race; sex, age           # audited sets separated by ";", columns by ","
    x2 = score                    # extra retained covariates
    outcome = y

    [loss]
    kind = square | cross_entropy | utility
    lambda = 1.0
    risk_columns = p0, p1
    clip_epsilon = 1e-12

    [fitter]
    kind = ols | logistic | huber | constant
    covariates = race, sex, score # default: all x1 sets plus x2
    intercept = true
    tuning_c = 1.345

    [run]
    group = justice
    method = auto | exhaustive | categorical
    bootstrap = 0                 # resamples for bootstrap intervals, 0 = off
    refit = false
    seed = 0
    output_dir = results
    validate = false              # rank: stacked cross-distribution check

For each audited set ``S`` the oracle is fitted once on all covariates and
the retained block is every other fitted covariate.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import UsageError
from .losses import LossSpec
from .models import FITTERS, HUBER_C, FitterSpec
from .reliance.estimators import METHODS
from .tabular import Partition

OUTPUT_ENV = "BLACKBOX_RELIANCE_OUTPUT_DIR"
DEFAULT_OUTPUT = "reliance_output"
FORMATS = ("csv", "chunks", "admissions")


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT


def _split_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _split_sets(text: str) -> tuple[tuple[str, ...], ...]:
    return tuple(s for s in (_split_list(part) for part in text.split(";")) if s)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {text!r}")


@dataclass
class RunConfig:
    format: str = "csv"
    path: str | None = None
    schema: str | None = None
    n: int = 10_000
    survey_offset: float = 3.5
    x1: tuple[tuple[str, ...], ...] = ()
    x2: tuple[str, ...] = ()
    outcome: str | None = None
    loss: str = "square"
    lam: float = 1.0
    risk_columns: tuple[str, ...] | None = None
    clip_epsilon: float = 1e-12
    fitter: str = "ols"
    covariates: tuple[str, ...] = ()
    intercept: bool = True
    tuning_c: float = HUBER_C
    group: str | None = None
    method: str = "auto"
    bootstrap: int = 0
    refit: bool = False
    seed: int = 0
    output_dir: str = field(default_factory=default_output_dir)
    validate: bool = False

    # -- construction --------------------------------------------------
    @classmethod
    def from_file(cls, path, base: "RunConfig | None" = None) -> "RunConfig":
        # ';' separates x1 sets, so only '#' starts an inline comment
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except FileNotFoundError:
            raise UsageError(f"config file not found: {path}") from None
        except configparser.Error as exc:
            raise UsageError(f"{path}: malformed config: {exc}") from None
        root = Path(path).resolve().parent
        cfg = base if base is not None else cls()
        known = {
            "input": {"format", "path", "schema", "n", "survey_offset"},
            "partition": {"x1", "x2", "outcome"},
            "loss": {"kind", "lambda", "risk_columns", "clip_epsilon"},
            "fitter": {"kind", "covariates", "intercept", "tuning_c"},
            "run": {"group", "method", "bootstrap", "refit", "seed", "output_dir", "validate"},
        }
        errors = []
        for section in parser.sections():
            if section not in known:
                errors.append(f"unknown section [{section}]")
                continue
            for key in parser[section]:
                if key not in known[section]:
                    errors.append(f"unknown key {section}.{key}")
        if errors:
            raise UsageError(f"{path}: " + "; ".join(errors))

        def get(section, key):
            return parser.get(section, key, fallback=None)

        values = {
            "format": get("input", "format"), "path": get("input", "path"), "schema": get("input", "schema"),
            "n": get("input", "n"), "survey_offset": get("input", "survey_offset"),
            "x1": get("partition", "x1"), "x2": get("partition", "x2"), "outcome": get("partition", "outcome"),
            "loss": get("loss", "kind"), "lam": get("loss", "lambda"), "risk_columns": get("loss", "risk_columns"),
            "clip_epsilon": get("loss", "clip_epsilon"), "fitter": get("fitter", "kind"),
            "covariates": get("fitter", "covariates"), "intercept": get("fitter", "intercept"),
            "tuning_c": get("fitter", "tuning_c"), "group": get("run", "group"), "method": get("run", "method"),
            "bootstrap": get("run", "bootstrap"), "refit": get("run", "refit"), "seed": get("run", "seed"),
            "output_dir": get("run", "output_dir"), "validate": get("run", "validate"),
        }
        for key in ("path", "schema"):
            if values[key] and not Path(values[key]).is_absolute():
                values[key] = str(root / values[key])
        cfg.update({k: v for k, v in values.items() if v is not None})
        return cfg

    def update(self, raw: dict) -> None:
        """Apply textual or typed overrides (``None`` values are ignored)."""
        errors = []
        for key, value in raw.items():
            if value is None:
                continue
            try:
                setattr(self, key, self._convert(key, value))
            except (ValueError, UsageError) as exc:
                errors.append(f"{key}: {exc}")
        if errors:
            raise UsageError("invalid configuration: " + "; ".join(errors))

    @staticmethod
    def _convert(key, value):
        if key in ("n", "bootstrap", "seed"):
            return int(value)
        if key in ("survey_offset", "lam", "clip_epsilon", "tuning_c"):
            return float(value)
        if key in ("intercept", "refit", "validate"):
            return _bool(value)
        if key == "x1":
            return _split_sets(value) if isinstance(value, str) else tuple(tuple(s) for s in value)
        if key in ("x2", "covariates", "risk_columns"):
            return _split_list(value) if isinstance(value, str) else tuple(value)
        if key in ("group", "outcome", "path", "schema"):
            return str(value).strip() or None
        return str(value).strip()

    # -- validation ----------------------------------------------------
    def problems(self, needs_partition: bool = True) -> list[str]:
        """All static configuration errors (no data needed)."""
        out = []
        if self.format not in FORMATS:
            out.append(f"input.format must be one of {FORMATS}; got {self.format!r}")
        if self.format in ("csv", "chunks") and not self.path:
            out.append("input.path is required for csv and chunks input")
        if self.format == "csv" and not self.schema:
            out.append("input.schema is required for csv input")
        if self.format == "admissions" and self.n < 1:
            out.append("input.n must be >= 1")
        if needs_partition:
            if not self.x1:
                out.append("partition.x1 is required")
            if not self.outcome:
                out.append("partition.outcome is required")
        if self.loss not in ("square", "cross_entropy", "utility"):
            out.append(f"loss.kind must be square, cross_entropy or utility; got {self.loss!r}")
        if self.loss == "utility" and (not self.risk_columns or len(self.risk_columns) != 2):
            out.append("loss.risk_columns must name two columns for the utility loss")
        if self.fitter not in FITTERS:
            out.append(f"fitter.kind must be one of {FITTERS}; got {self.fitter!r}")
        if self.method not in METHODS:
            out.append(f"run.method must be one of {METHODS}; got {self.method!r}")
        if self.bootstrap < 0:
            out.append("run.bootstrap must be >= 0")
        if 0 < self.bootstrap < 100:
            out.append(f"run.bootstrap must be 0 or >= 100; got {self.bootstrap}")
        if self.refit and not self.bootstrap:
            out.append("run.refit needs run.bootstrap > 0")
        try:
            self.loss_spec()
        except UsageError as exc:
            out.append(f"loss: {exc}")
        return out

    def check(self, needs_partition: bool = True) -> None:
        problems = self.problems(needs_partition)
        if problems:
            raise UsageError("invalid configuration: " + "; ".join(problems))

    def check_columns(self, names, extra: dict[str, str] | None = None) -> None:
        """Every referenced column must exist in the loaded data."""
        names = set(names)
        refs = [("partition.outcome", self.outcome)]
        refs += [("partition.x1", c) for s in self.x1 for c in s]
        refs += [("partition.x2", c) for c in self.x2]
        refs += [("fitter.covariates", c) for c in self.covariates]
        refs += [("loss.risk_columns", c) for c in (self.risk_columns or ())]
        if self.group:
            refs.append(("run.group", self.group))
        missing = [f"{key} names unknown column {col!r}" for key, col in refs if col and col not in names]
        if missing:
            raise UsageError("invalid configuration: " + "; ".join(missing))

    # -- derived objects -----------------------------------------------
    def loss_spec(self) -> LossSpec:
        return LossSpec(self.loss, lam=self.lam, risk_columns=self.risk_columns, clip_epsilon=self.clip_epsilon)

    def all_covariates(self) -> tuple[str, ...]:
        if self.covariates:
            return self.covariates
        out: list[str] = []
        for c in [c for s in self.x1 for c in s] + list(self.x2):
            if c not in out:
                out.append(c)
        return tuple(out)

    def fitter_spec(self) -> FitterSpec:
        return FitterSpec(self.fitter, self.all_covariates(), self.intercept, self.tuning_c)

    def partitions(self) -> dict[str, Partition]:
        cov = self.all_covariates()
        out = {}
        for s in self.x1:
            missing = [c for c in s if c not in cov]
            if missing:
                raise UsageError(f"partition.x1 column(s) {missing} are not fitter covariates")
            out["+".join(s)] = Partition(s, tuple(c for c in cov if c not in s), self.outcome)
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        for f in fields(self):
            v = d[f.name]
            if isinstance(v, tuple):
                d[f.name] = [list(x) if isinstance(x, tuple) else x for x in v]
        return d
