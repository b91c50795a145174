import numpy as np
import pytest

from blackbox_reliance.errors import DataError, SchemaError, UsageError
from blackbox_reliance.tabular import (CHUNK_SCHEMA, ColumnSchema, Dataset, Partition, interruption_rate,
                                       load_chunks, load_csv, load_schema, save_schema, split_by_group)

SCHEMA = [
    ColumnSchema("race", "categorical", levels=("a", "b", "c")),
    ColumnSchema("score", "count"),
    ColumnSchema("income", "real"),
    ColumnSchema("admit", "binary", "outcome"),
]


def write(path, text):
    path.write_text(text)
    return path


class TestColumnSchema:
    def test_categorical_needs_levels(self):
        with pytest.raises(SchemaError):
            ColumnSchema("r", "categorical")

    @pytest.mark.parametrize("kind", ["binary", "real", "count"])
    def test_levels_only_for_categorical(self, kind):
        with pytest.raises(SchemaError):
            ColumnSchema("r", kind, levels=("a",))

    def test_unknown_kind_and_role(self):
        with pytest.raises(SchemaError):
            ColumnSchema("r", "text")
        with pytest.raises(SchemaError):
            ColumnSchema("r", "real", "target")

    def test_single_outcome(self):
        with pytest.raises(SchemaError):
            Dataset([ColumnSchema("a", "binary", "outcome"), ColumnSchema("b", "binary", "outcome")],
                    {"a": [0], "b": [1]})


class TestDataset:
    def test_columns_are_immutable(self):
        d = Dataset(SCHEMA, {"race": ["a", "c"], "score": [1, 2], "income": [0.5, 1.5], "admit": [0, 1]})
        with pytest.raises(ValueError):
            d["score"][0] = 5
        np.testing.assert_array_equal(d["race"], [0, 2])
        assert d.labels("race") == ["a", "c"]
        assert d.outcome == "admit"

    @pytest.mark.parametrize("col,values", [("admit", [0, 2]), ("score", [1, -1]), ("score", [1.5, 2.0]),
                                            ("race", ["a", "z"]), ("income", [0.0, np.inf])])
    def test_type_violations(self, col, values):
        cols = {"race": ["a", "b"], "score": [1, 2], "income": [0.5, 1.5], "admit": [0, 1]}
        cols[col] = values
        with pytest.raises(DataError):
            Dataset(SCHEMA, cols)

    def test_take_and_with_values(self):
        d = Dataset(SCHEMA, {"race": ["a", "b", "c"], "score": [1, 2, 3], "income": [0.1, 0.2, 0.3],
                             "admit": [0, 1, 1]})
        t = d.take([2, 0])
        np.testing.assert_array_equal(t["score"], [3, 1])
        r = d.with_values("admit", np.array([0.2, 0.5, 1.0]))
        assert r.spec("admit").kind == "real"
        assert d.spec("admit").kind == "binary"

    def test_with_roles_moves_single_role(self):
        d = Dataset(SCHEMA, {"race": ["a"], "score": [1], "income": [0.1], "admit": [0]})
        e = d.with_roles(score="outcome")
        assert e.outcome == "score"
        assert e.spec("admit").role == "auxiliary"


class TestPartition:
    def test_disjoint(self):
        with pytest.raises(UsageError):
            Partition(("a",), ("a",), "y")
        with pytest.raises(UsageError):
            Partition(("y",), (), "y")
        with pytest.raises(UsageError):
            Partition((), ("a",), "y")

    def test_validate_names_unknown(self):
        d = Dataset(SCHEMA, {"race": ["a"], "score": [1], "income": [0.1], "admit": [0]})
        with pytest.raises(SchemaError, match="nope"):
            Partition(("nope",), (), "admit").validate(d)


class TestFiles:
    def test_schema_round_trip(self, tmp_path):
        save_schema(SCHEMA, tmp_path / "s.ini")
        assert list(load_schema(tmp_path / "s.ini")) == SCHEMA

    def test_csv_order_free_and_missing_rows(self, tmp_path):
        p = write(tmp_path / "d.csv", "admit,income,extra,race,score\n1,0.5,x,b,3\n0,NA,x,a,1\n0,1.25,y,c,0\n")
        d = load_csv(p, SCHEMA)
        assert d.n == 2 and d.dropped == 1
        np.testing.assert_array_equal(d["race"], [1, 2])
        np.testing.assert_allclose(d["income"], [0.5, 1.25])

    def test_unparseable_reports_row(self, tmp_path):
        p = write(tmp_path / "d.csv", "race,score,income,admit\na,1,0.5,1\nb,two,0.5,0\n")
        with pytest.raises(DataError) as err:
            load_csv(p, SCHEMA)
        assert err.value.row == 1 and err.value.column == "score"

    def test_missing_declared_column(self, tmp_path):
        p = write(tmp_path / "d.csv", "race,score,admit\na,1,1\n")
        with pytest.raises(SchemaError, match="income"):
            load_csv(p, SCHEMA)

    def test_empty_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(write(tmp_path / "d.csv", ""), SCHEMA)
        with pytest.raises(DataError):
            load_csv(write(tmp_path / "e.csv", "race,score,income,admit\n"), SCHEMA)

    def test_csv_round_trip(self, tmp_path):
        d = Dataset(SCHEMA, {"race": ["a", "c"], "score": [1, 2], "income": [0.1, 1 / 3], "admit": [0, 1]})
        d.to_csv(tmp_path / "d.csv")
        e = load_csv(tmp_path / "d.csv", SCHEMA)
        for c in d.names:
            np.testing.assert_array_equal(d[c], e[c])


class TestGroupsAndChunks:
    def test_split_by_group(self):
        schema = [ColumnSchema("g", "categorical", "group", levels=("p", "q", "r")), ColumnSchema("v", "real")]
        d = Dataset(schema, {"g": ["q", "p", "q"], "v": [1.0, 2.0, 3.0]})
        parts = split_by_group(d)
        assert list(parts) == ["p", "q"]
        np.testing.assert_array_equal(parts["q"]["v"], [1.0, 3.0])
        assert not parts["p"].usable

    def test_split_needs_group(self):
        with pytest.raises(UsageError):
            split_by_group(Dataset([ColumnSchema("v", "real")], {"v": [1.0]}))

    @pytest.mark.parametrize("i,t,expected", [(6, 1500, 4.0), (0, 10, 0.0), (1, 1000, 1.0)])
    def test_interruption_rate(self, i, t, expected):
        assert interruption_rate(i, t) == pytest.approx(expected)

    def test_interruption_rate_needs_tokens(self):
        with pytest.raises(UsageError):
            interruption_rate(1, 0)

    def test_load_chunks(self, tmp_path):
        header = ",".join(c.name for c in CHUNK_SCHEMA)
        p = write(tmp_path / "c.csv", f"{header}\nkagan,1,3,0,2,500\nalito,0,1,1,3,1000\nkagan,0,0,1,0,20\n")
        d = load_chunks(p)
        assert d.spec("justice").levels == ("kagan", "alito")
        np.testing.assert_allclose(d["interruption_rate"], [4.0, 3.0, 0.0])
        assert d.outcome == "interruption_rate"

    def test_load_chunks_zero_tokens(self, tmp_path):
        header = ",".join(c.name for c in CHUNK_SCHEMA)
        p = write(tmp_path / "c.csv", f"{header}\nkagan,1,3,0,2,0\n")
        with pytest.raises(DataError):
            load_chunks(p)
