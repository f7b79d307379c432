import numpy as np
import pytest
from subrate.failures import CompositeDatasetFailure, DatasetFailure, RecordPath
from subrate.schema import *


class TestConverter:
    def test_convert(self):
        assert integer().convert(3) == (3, None)

    def test_reject(self):
        value, failure = integer().convert("3")
        assert value is None
        assert failure.name == "integer"
        assert "expected an integer" in failure.reason

    def test_bool(self):
        _, failure = integer().convert(True)
        assert failure is not None
        _, failure = real().convert(False)
        assert failure is not None

    def test_real(self):
        assert real().convert(2) == (2.0, None)
        _, failure = real().convert(float("inf"))
        assert failure.name == "real"

    def test_text(self):
        assert text().convert("a") == ("a", None)
        assert text().convert(1)[1] is not None

    def test_abort(self):
        def conv(v):
            DatasetFailure.abort("bad item", RecordPath(None, [2]))
        _, failure = Converter("custom", conv).convert([1, 2, 3])
        assert failure.name == "custom"
        assert failure.path.path == [2]


class TestIntegerArray:
    def test_convert(self):
        value, failure = integer_array(-10, 10).convert([1, -2, 3])
        assert failure is None
        assert value.dtype == np.int64
        assert value.tolist() == [1, -2, 3]

    def test_empty(self):
        value, _ = integer_array(0, 1).convert([])
        assert value.shape == (0,)

    def test_not_array(self):
        _, failure = integer_array(0, 1).convert({"a": 1})
        assert failure.name == "integer_array"

    @pytest.mark.parametrize("values, index", [([1, 2.5, 3], 1), ([1, 2, "3"], 2), ([True, 1], 0)])
    def test_item(self, values, index):
        _, failure = integer_array(-10, 10).convert(values)
        assert failure.path.path == [index]

    def test_range(self):
        _, failure = integer_array(-10, 10).convert([0, 11, -11])
        assert failure.path.path == [1]
        assert "out of range" in failure.reason

    def test_nested(self):
        _, failure = integer_array(-10, 10).convert([[1], [2]])
        assert failure is not None


class TestVerifier:
    def test_builtin(self):
        assert positive().verify(1) is None
        assert positive().verify(0).name == "positive"
        assert non_negative().verify(0) is None
        assert non_negative().verify(-1).reason == "must not be negative"
        assert multiple_of(4).verify(12) is None
        assert multiple_of(4).verify(6).reason == "must be a multiple of 4"

    def test_exception(self):
        failure = Verifier("boom", lambda v: 1 / v > 0).verify(0)
        assert failure.name == "boom"

    def test_default_message(self):
        assert Verifier("v", lambda v: False).verify(0).reason == "Verification by v failed."


class TestRecordSchema:
    schema = RecordSchema([
        Field("width", integer(), positive(), multiple_of(4)),
        Field("name", text(), default="anon"),
        Field("rate", real(), non_negative()),
    ])

    def test_validate(self):
        assert self.schema.validate({"width": 8, "rate": 1}) == {"width": 8, "name": "anon", "rate": 1.0}

    def test_failures(self):
        with pytest.raises(CompositeDatasetFailure) as e:
            self.schema.validate({"width": 0, "name": 3}, RecordPath(5))
        f = e.value
        assert len(f) == 3
        assert f["width"].name == "positive"
        assert f["name"].name == "text"
        assert f["rate"].name == "missing"
        assert [repr(p) for p, _ in f] == ["line 5.width", "line 5.name", "line 5.rate"]

    def test_first_verifier(self):
        with pytest.raises(CompositeDatasetFailure) as e:
            self.schema.validate({"width": -6, "rate": 0})
        assert e.value["width"].name == "positive"

    def test_not_object(self):
        with pytest.raises(DatasetFailure) as e:
            self.schema.validate([1], RecordPath(2))
        assert e.value.name == "malformed"
        assert not isinstance(e.value, CompositeDatasetFailure)

    def test_checks(self):
        def check(values):
            return ("rate", DatasetFailure("too large", name="limit")) if values["rate"] > values["width"] else None
        schema = RecordSchema(self.schema.fields, [check])
        assert schema.validate({"width": 4, "rate": 3})["rate"] == 3.0
        with pytest.raises(CompositeDatasetFailure) as e:
            schema.validate({"width": 4, "rate": 5})
        assert e.value["rate"].name == "limit"

    def test_checks_skipped(self):
        called = []
        schema = RecordSchema(self.schema.fields, [lambda v: called.append(v)])
        with pytest.raises(CompositeDatasetFailure):
            schema.validate({"width": 3, "rate": 5})
        assert called == []
