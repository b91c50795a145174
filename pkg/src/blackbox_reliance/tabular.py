"""Column-typed tabular decision data.

A :class:`Dataset` is an immutable bundle of equal-length numpy columns
described by a list of :class:`ColumnSchema` entries. Categorical columns
are stored as integer codes into their declared level list, so that level
counts are stable across files; binary and count columns are stored as
``int64`` and reals as ``float64``.

Rows are treated as exchangeable draws. Nothing here models dependence
between rows (for instance the same advocate appearing in several chunks).
"""

from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, SchemaError, UsageError

KINDS = ("binary", "categorical", "real", "count")
ROLES = ("outcome", "covariate", "selection", "group", "auxiliary")
DISCRETE_KINDS = ("binary", "categorical", "count")

# Cells equal to one of these tokens count as missing; the row is dropped.
MISSING_TOKENS = frozenset({"", "?", "NA", "N/A", "na", "n/a", "NaN", "nan", "null", "NULL", "None"})


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    role: str = "covariate"
    levels: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.name or not self.name.replace("_", "a").replace(".", "a").isalnum():
            raise SchemaError(f"invalid column name {self.name!r}")
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.role not in ROLES:
            raise SchemaError(f"column {self.name!r}: unknown role {self.role!r}; expected one of {ROLES}")
        if self.kind == "categorical":
            if not self.levels:
                raise SchemaError(f"categorical column {self.name!r} must declare its levels")
            levels = tuple(str(v) for v in self.levels)
            if len(set(levels)) != len(levels):
                raise SchemaError(f"column {self.name!r}: duplicated levels")
            object.__setattr__(self, "levels", levels)
        elif self.levels is not None:
            raise SchemaError(f"column {self.name!r}: levels are only valid for categorical columns")

    @property
    def discrete(self) -> bool:
        return self.kind in DISCRETE_KINDS


def _check_schema(schema: Sequence[ColumnSchema]) -> tuple[ColumnSchema, ...]:
    schema = tuple(schema)
    names = [c.name for c in schema]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise SchemaError(f"duplicated column names: {', '.join(dupes)}")
    for role in ("outcome", "selection", "group"):
        holders = [c.name for c in schema if c.role == role]
        if len(holders) > 1:
            raise SchemaError(f"at most one column may have role {role!r}; got {', '.join(holders)}")
    return schema


def _coerce(spec: ColumnSchema, values) -> np.ndarray:
    arr = np.asarray(values)
    if spec.kind == "real":
        out = np.array(arr, dtype=np.float64)
        if out.size and not np.all(np.isfinite(out)):
            raise DataError(f"column {spec.name!r} contains non-finite values", column=spec.name)
        return out
    if spec.kind == "categorical" and arr.dtype.kind in "USO":
        index = {lev: k for k, lev in enumerate(spec.levels)}
        try:
            return np.array([index[str(v)] for v in arr], dtype=np.int64)
        except KeyError as exc:
            raise DataError(f"column {spec.name!r}: undeclared level {exc.args[0]!r}", column=spec.name) from None
    if arr.dtype.kind == "f":
        if arr.size and not np.all(arr == np.round(arr)):
            raise DataError(f"column {spec.name!r} ({spec.kind}) contains non-integer values", column=spec.name)
    out = np.array(arr, dtype=np.int64)
    if spec.kind == "binary" and out.size and not np.all((out == 0) | (out == 1)):
        raise DataError(f"binary column {spec.name!r} contains values outside {{0, 1}}", column=spec.name)
    if spec.kind == "count" and out.size and out.min() < 0:
        raise DataError(f"count column {spec.name!r} contains negative values", column=spec.name)
    if spec.kind == "categorical" and out.size and (out.min() < 0 or out.max() >= len(spec.levels)):
        raise DataError(f"column {spec.name!r}: level code out of range", column=spec.name)
    return out


class Dataset:
    """Immutable typed table.

    Parameters
    ----------
    schema : sequence of ColumnSchema
    columns : mapping from column name to a 1-d array-like. Categorical
        columns may be given as level labels or as integer codes.
    provenance : free-text description of where the rows came from.
    dropped : number of rows removed during ingestion.
    """

    def __init__(self, schema: Sequence[ColumnSchema], columns: Mapping[str, Iterable],
                 provenance: str = "", dropped: int = 0):
        self._schema = _check_schema(schema)
        self._by_name = {c.name: c for c in self._schema}
        missing = [c.name for c in self._schema if c.name not in columns]
        if missing:
            raise SchemaError(f"missing column(s): {', '.join(missing)}")
        cols = {}
        n = None
        for spec in self._schema:
            arr = _coerce(spec, columns[spec.name])
            if arr.ndim != 1:
                raise DataError(f"column {spec.name!r} must be one-dimensional", column=spec.name)
            if n is None:
                n = len(arr)
            elif len(arr) != n:
                raise DataError(f"column {spec.name!r} has {len(arr)} rows, expected {n}", column=spec.name)
            arr.setflags(write=False)
            cols[spec.name] = arr
        self._columns = cols
        self._n = 0 if n is None else n
        self.provenance = provenance
        self.dropped = int(dropped)

    # -- introspection -------------------------------------------------
    @property
    def n(self) -> int:
        return self._n

    def __len__(self) -> int:
        return self._n

    @property
    def schema(self) -> tuple[ColumnSchema, ...]:
        return self._schema

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self._schema)

    @property
    def usable(self) -> bool:
        """Whether the pairwise reliance estimators can run (n >= 2)."""
        return self._n >= 2

    def spec(self, name: str) -> ColumnSchema:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"unknown column {name!r}") from None

    def _role(self, role):
        for c in self._schema:
            if c.role == role:
                return c.name
        return None

    @property
    def outcome(self) -> str | None:
        return self._role("outcome")

    @property
    def selection(self) -> str | None:
        return self._role("selection")

    @property
    def group(self) -> str | None:
        return self._role("group")

    def __contains__(self, name) -> bool:
        return name in self._by_name

    def __getitem__(self, name: str) -> np.ndarray:
        self.spec(name)
        return self._columns[name]

    def column(self, name: str) -> np.ndarray:
        return self[name]

    def labels(self, name: str) -> list[str]:
        """Column values rendered as strings (level labels for categoricals)."""
        spec = self.spec(name)
        col = self._columns[name]
        if spec.kind == "categorical":
            return [spec.levels[k] for k in col]
        if spec.kind == "real":
            return [repr(float(v)) for v in col]
        return [str(int(v)) for v in col]

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        """Float64 matrix with one column per name (categoricals as codes)."""
        if not names:
            return np.empty((self._n, 0))
        return np.column_stack([self[name].astype(np.float64) for name in names])

    # -- derivation ----------------------------------------------------
    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(self._schema, {k: v[idx] for k, v in self._columns.items()},
                       provenance=self.provenance, dropped=self.dropped)

    def select(self, mask) -> "Dataset":
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self._n,):
            raise UsageError("row mask has the wrong shape")
        return self.take(np.flatnonzero(mask))

    def with_column(self, spec: ColumnSchema, values) -> "Dataset":
        """Add or replace a column."""
        schema = [c for c in self._schema if c.name != spec.name]
        if spec.name in self._by_name:
            schema.insert(self.names.index(spec.name), spec)
        else:
            schema.append(spec)
        cols = dict(self._columns)
        cols[spec.name] = values
        return Dataset(schema, cols, provenance=self.provenance, dropped=self.dropped)

    def with_values(self, name: str, values) -> "Dataset":
        """Replace the values of an existing column, keeping its schema entry.

        A non-integral array written into a binary or count column turns it
        into a real column (used for null resampling of outcomes).
        """
        spec = self.spec(name)
        values = np.asarray(values)
        if spec.kind != "real" and values.dtype.kind == "f" and not np.all(values == np.round(values)):
            spec = ColumnSchema(spec.name, "real", spec.role)
        return self.with_column(spec, values)

    def with_roles(self, **roles: str) -> "Dataset":
        """Return a copy with the given columns re-assigned to new roles."""
        for name in roles:
            self.spec(name)
        claimed = {r for r in roles.values() if r in ("outcome", "selection", "group")}
        schema = []
        for c in self._schema:
            role = roles.get(c.name, c.role)
            if c.name not in roles and role in claimed:
                role = "auxiliary"
            schema.append(ColumnSchema(c.name, c.kind, role, c.levels))
        return Dataset(schema, self._columns, provenance=self.provenance, dropped=self.dropped)

    # -- serialization -------------------------------------------------
    def to_csv(self, path) -> None:
        rendered = [self.labels(name) for name in self.names]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.names)
            writer.writerows(zip(*rendered))

    def __repr__(self):
        return f"Dataset(n={self._n}, columns={list(self.names)}, dropped={self.dropped})"


@dataclass(frozen=True)
class Partition:
    """Split of columns into shuffled (``x1``), retained (``x2``) and outcome."""

    x1: tuple[str, ...]
    x2: tuple[str, ...] = ()
    outcome: str = "y"

    def __post_init__(self):
        object.__setattr__(self, "x1", tuple(self.x1))
        object.__setattr__(self, "x2", tuple(self.x2))
        if not self.x1:
            raise UsageError("partition: x1 must name at least one column")
        overlap = (set(self.x1) & set(self.x2)) | ({self.outcome} & (set(self.x1) | set(self.x2)))
        if overlap or len(set(self.x1)) != len(self.x1) or len(set(self.x2)) != len(self.x2):
            raise UsageError(f"partition: x1, x2 and outcome must be disjoint (offending: {sorted(overlap)})")

    @property
    def covariates(self) -> tuple[str, ...]:
        return self.x1 + self.x2

    def validate(self, data: Dataset) -> None:
        absent = [c for c in (self.outcome, *self.x1, *self.x2) if c not in data]
        if absent:
            raise SchemaError(f"partition names unknown column(s): {', '.join(absent)}")


# -- schema files --------------------------------------------------------

def load_schema(path) -> list[ColumnSchema]:
    """Read a schema file.

    The file is INI-style with one ``[column.<name>]`` section per column
    and the keys ``kind``, ``role`` and (for categoricals) ``levels`` as a
    comma-separated list. Section order defines column order.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise UsageError(f"schema file not found: {path}") from None
    except configparser.Error as exc:
        raise SchemaError(f"malformed schema file {path}: {exc}") from None
    schema = []
    for section in parser.sections():
        if not section.startswith("column."):
            raise SchemaError(f"schema file {path}: unexpected section [{section}]")
        body = parser[section]
        unknown = set(body) - {"kind", "role", "levels"}
        if unknown:
            raise SchemaError(f"schema file {path}: [{section}] has unknown key(s) {sorted(unknown)}")
        if "kind" not in body:
            raise SchemaError(f"schema file {path}: [{section}] is missing 'kind'")
        levels = body.get("levels")
        schema.append(ColumnSchema(
            name=section[len("column."):],
            kind=body["kind"].strip(),
            role=body.get("role", "covariate").strip(),
            levels=tuple(v.strip() for v in levels.split(",")) if levels else None,
        ))
    if not schema:
        raise SchemaError(f"schema file {path} declares no columns")
    return _check_schema(schema)


def save_schema(schema: Sequence[ColumnSchema], path) -> None:
    lines = []
    for c in schema:
        lines.append(f"[column.{c.name}]")
        lines.append(f"kind = {c.kind}")
        lines.append(f"role = {c.role}")
        if c.levels:
            lines.append(f"levels = {', '.join(c.levels)}")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


# -- CSV ingestion -------------------------------------------------------

def _parse_cell(spec: ColumnSchema, raw: str):
    text = raw.strip()
    if spec.kind == "categorical":
        if text not in spec.levels:
            raise ValueError(f"undeclared level {text!r}")
        return spec.levels.index(text)
    if spec.kind == "real":
        value = float(text)
        if not math.isfinite(value):
            raise ValueError("non-finite value")
        return value
    try:
        value = int(text)
    except ValueError:
        number = float(text)
        if not number.is_integer():
            raise ValueError(f"{text!r} is not an integer") from None
        value = int(number)
    if spec.kind == "binary" and value not in (0, 1):
        raise ValueError(f"{text!r} is not 0 or 1")
    if spec.kind == "count" and value < 0:
        raise ValueError(f"{text!r} is negative")
    return value


def load_csv(path, schema: Sequence[ColumnSchema]) -> Dataset:
    """Load an RFC-4180 CSV file (UTF-8, header row) against ``schema``.

    Header order does not matter and extra columns are ignored. Rows with a
    missing-value token (see ``MISSING_TOKENS``) in any declared column are
    dropped and counted in ``Dataset.dropped``; any other unparseable cell
    raises :class:`DataError` carrying the 0-based data-row index.
    """
    schema = _check_schema(schema)
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except FileNotFoundError:
        raise UsageError(f"data file not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = [c.name for c in schema if c.name not in header]
        if missing:
            raise SchemaError(f"{path}: missing declared column(s): {', '.join(missing)}")
        positions = [header.index(c.name) for c in schema]
        values = [[] for _ in schema]
        dropped = 0
        row_index = -1
        for row_index, row in enumerate(reader):
            if not row:
                dropped += 1
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: data row {row_index} has {len(row)} fields, expected {len(header)}",
                                row=row_index)
            cells = [row[p] for p in positions]
            if any(cell.strip() in MISSING_TOKENS for cell in cells):
                dropped += 1
                continue
            for k, (spec, cell) in enumerate(zip(schema, cells)):
                try:
                    values[k].append(_parse_cell(spec, cell))
                except ValueError as exc:
                    raise DataError(f"{path}: data row {row_index}, column {spec.name!r}: {exc}",
                                    row=row_index, column=spec.name) from None
        if row_index < 0:
            raise DataError(f"{path}: no data rows")
    cols = {spec.name: np.array(v, dtype=np.float64 if spec.kind == "real" else np.int64)
            for spec, v in zip(schema, values)}
    return Dataset(schema, cols, provenance=str(path), dropped=dropped)


# -- grouping ------------------------------------------------------------

def split_by_group(data: Dataset, column: str | None = None) -> dict[str, Dataset]:
    """Partition rows by the levels of the group column.

    Keys are level labels, in declared order for categoricals and ascending
    order otherwise; only levels that occur are returned. Parts with fewer
    than two rows are kept but report ``usable == False``.
    """
    column = column or data.group
    if column is None:
        raise UsageError("split_by_group: the schema declares no group column")
    codes = data[column]
    labels = np.array(data.labels(column), dtype=object)
    spec = data.spec(column)
    if spec.kind == "categorical":
        order = [spec.levels[k] for k in sorted(set(codes.tolist()))]
    else:
        order = [str(v) for v in sorted(set(codes.tolist()))]
    return {level: data.take(np.flatnonzero(labels == level)) for level in order}


# -- interruption-rate application --------------------------------------

def interruption_rate(interruptions, advocate_tokens):
    """Interruptions per 1000 advocate tokens. Works on scalars and arrays."""
    tokens = np.asarray(advocate_tokens)
    if np.any(tokens < 1):
        raise UsageError("interruption_rate: advocate_tokens must be >= 1")
    rate = np.asarray(interruptions, dtype=np.float64) / (tokens / 1000.0)
    return float(rate) if rate.ndim == 0 else rate


CHUNK_SCHEMA = (
    ColumnSchema("justice", "categorical", "group", levels=("placeholder",)),
    ColumnSchema("gender", "binary", "covariate"),
    ColumnSchema("experience", "count", "covariate"),
    ColumnSchema("alignment", "binary", "covariate"),
    ColumnSchema("interruptions", "count", "auxiliary"),
    ColumnSchema("advocate_tokens", "count", "auxiliary"),
)


def add_interruption_rate(data: Dataset, interruptions: str = "interruptions",
                          tokens: str = "advocate_tokens", name: str = "interruption_rate") -> Dataset:
    """Append the token-normalized interruption rate as the outcome column."""
    rate = interruption_rate(data[interruptions], data[tokens])
    if data.outcome not in (None, name):
        data = data.with_roles(**{data.outcome: "auxiliary"})
    return data.with_column(ColumnSchema(name, "real", "outcome"), rate)


def load_chunks(path) -> Dataset:
    """Load a chunk-level CSV and derive ``interruption_rate``.

    Required columns: ``justice`` (group key, any label), ``gender`` (0/1,
    1 = female), ``experience`` (count of prior arguments), ``alignment``
    (0/1, 1 = the Justice voted for the advocate's side), ``interruptions``
    and ``advocate_tokens`` (counts, tokens >= 1). Justice levels are read
    from the file in order of first appearance.
    """
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "justice" not in [f.strip() for f in reader.fieldnames]:
                raise SchemaError(f"{path}: chunk file needs a 'justice' column")
            seen = []
            for row in reader:
                label = (row.get("justice") or "").strip()
                if label not in MISSING_TOKENS and label not in seen:
                    seen.append(label)
    except FileNotFoundError:
        raise UsageError(f"data file not found: {path}") from None
    if not seen:
        raise DataError(f"{path}: no data rows")
    schema = [ColumnSchema("justice", "categorical", "group", levels=tuple(seen)), *CHUNK_SCHEMA[1:]]
    data = load_csv(path, schema)
    if np.any(data["advocate_tokens"] < 1):
        bad = int(np.flatnonzero(data["advocate_tokens"] < 1)[0])
        raise DataError(f"{path}: advocate_tokens must be >= 1 (retained row {bad})", row=bad,
                        column="advocate_tokens")
    return add_interruption_rate(data)
