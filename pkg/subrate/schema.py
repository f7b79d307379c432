"""
Declarative validation of dataset records.

A `RecordSchema` is a list of `Field` s. Each field converts its input with one `Converter` and then checks the
converted value with `Verifier` s. Failures of all fields are collected into one `CompositeDatasetFailure` , so a
malformed line reports every broken field at once.

```python
schema = RecordSchema([
    Field("width", integer(), positive(), multiple_of(4)),
    Field("rate", real(), non_negative()),
])
values = schema.validate({"width": 8, "rate": 12.5}, RecordPath(1))
```
"""
from collections.abc import Callable, Sequence
from typing import Any, Optional

import numpy as np

from .failures import CompositeDatasetFailure, DatasetFailure, PartialFailure, RecordPath


__all__ = [
    "Converter",
    "Verifier",
    "Field",
    "RecordSchema",
    "MISSING",
    "integer",
    "real",
    "text",
    "integer_array",
    "positive",
    "non_negative",
    "multiple_of",
]


class _Missing:
    def __repr__(self) -> str:
        return "MISSING"


#: Marker of a field absent from the input.
MISSING: Any = _Missing()


class ConversionFailure(DatasetFailure):
    """
    Represents a failure which arised in conversion phase.
    """
    def __init__(self, message: str, converter: 'Converter') -> None:
        super().__init__(message, name=converter.name)
        self.converter = converter


class VerificationFailure(DatasetFailure):
    """
    Represents a failure which arised in verification phase.
    """
    def __init__(self, message: str, verifier: 'Verifier') -> None:
        super().__init__(message, name=verifier.name)
        self.verifier = verifier


class MissingFailure(DatasetFailure):
    def __init__(self) -> None:
        super().__init__("field is missing", name="missing")


class Converter:
    """
    Converts a raw JSON value into the value a field holds.

    `func` takes the raw value and returns the converted one, or raises to reject it.
    `DatasetFailure.abort()` raised inside `func` lets the failure carry a sub-path such as an array index.
    """
    def __init__(self, name: str, func: Callable[[Any], Any]) -> None:
        #: The name of the converter used for error message.
        self.name = name
        #: Function converting a value.
        self.func = func

    def convert(self, value: Any) -> tuple[Optional[Any], Optional[DatasetFailure]]:
        try:
            return self.func(value), None
        except PartialFailure as e:
            return None, e.create(name=self.name)
        except DatasetFailure as e:
            return None, e
        except Exception as e:
            return None, ConversionFailure(str(e), self)


class Verifier:
    """
    Checks a converted value.

    `func` returns `True` when the value is acceptable. Otherwise it returns `False` or raises.
    """
    def __init__(self, name: str, func: Callable[[Any], bool], message: Optional[str] = None) -> None:
        #: The name of the verifier used for error message.
        self.name = name
        #: Function verifying a value.
        self.func = func
        #: Default error message.
        self.message = message

    def verify(self, value: Any) -> Optional[DatasetFailure]:
        try:
            ok = self.func(value)
            return None if ok else VerificationFailure(self.message or f"Verification by {self.name} failed.", self)
        except PartialFailure as e:
            return e.create(name=self.name)
        except DatasetFailure as e:
            return e
        except Exception as e:
            return VerificationFailure(str(e), self)


class Field:
    """
    A field of a record: key, converter and verifiers.
    """
    def __init__(self, key: str, converter: Converter, *verifiers: Verifier, default: Any = MISSING) -> None:
        self.key = key
        self.converter = converter
        self.verifiers = verifiers
        #: Value used when the key is absent. `MISSING` makes the field required.
        self.default = default

    def validate(self, doc: dict) -> tuple[Any, Optional[DatasetFailure]]:
        if self.key not in doc:
            if self.default is MISSING:
                return None, MissingFailure()
            return self.default, None
        value, failure = self.converter.convert(doc[self.key])
        if failure is not None:
            return None, failure
        for verifier in self.verifiers:
            failure = verifier.verify(value)
            if failure is not None:
                return None, failure
        return value, None


class RecordSchema:
    """
    Validates dictionaries against a list of fields, then against checks spanning several fields.

    A check takes the converted values and returns `None` or a pair of the offending key and failure.
    Checks run only when every field is valid.
    """
    def __init__(
        self,
        fields: Sequence[Field],
        checks: Sequence[Callable[[dict[str, Any]], Optional[tuple[str, DatasetFailure]]]] = (),
    ) -> None:
        self.fields = list(fields)
        self.checks = list(checks)

    def validate(self, doc: Any, path: Optional[RecordPath] = None) -> dict[str, Any]:
        """
        Converts and verifies a dictionary.

        Args:
            doc: Parsed JSON value.
            path: Location of the record, used in failure messages.
        Returns:
            Converted values by key.
        Raises:
            CompositeDatasetFailure: Some fields are invalid.
            DatasetFailure: The input is not a dictionary.
        """
        path = path or RecordPath()
        if not isinstance(doc, dict):
            raise DatasetFailure(f"record must be a JSON object, got {type(doc).__name__}", path, name="malformed")

        failures = CompositeDatasetFailure(path)
        values: dict[str, Any] = {}
        for f in self.fields:
            value, failure = f.validate(doc)
            if failure is not None:
                failures.add(f.key, failure)
            else:
                values[f.key] = value

        if not failures:
            for check in self.checks:
                found = check(values)
                if found is not None:
                    failures.add(*found)

        if failures:
            raise failures
        return values


#------------------------------------------------------------
# Builtin converters and verifiers.
#------------------------------------------------------------
def integer() -> Converter:
    def conv(v: Any) -> int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValueError(f"expected an integer, got {v!r}")
        return v
    return Converter("integer", conv)


def real() -> Converter:
    def conv(v: Any) -> float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValueError(f"expected a number, got {v!r}")
        f = float(v)
        if not np.isfinite(f):
            raise ValueError(f"expected a finite number, got {v!r}")
        return f
    return Converter("real", conv)


def text() -> Converter:
    def conv(v: Any) -> str:
        if not isinstance(v, str):
            raise ValueError(f"expected a string, got {v!r}")
        return v
    return Converter("text", conv)


def integer_array(lower: int, upper: int) -> Converter:
    """
    Converts a JSON array of integers within `[lower, upper]` into an `int64` array.
    """
    def conv(v: Any) -> np.ndarray:
        if not isinstance(v, list):
            raise ValueError(f"expected an array, got {type(v).__name__}")
        if len(v) == 0:
            return np.zeros(0, dtype=np.int64)
        try:
            arr = np.asarray(v)
        except (ValueError, OverflowError) as e:
            raise ValueError(f"expected an array of integers: {e}")
        if arr.ndim != 1 or arr.dtype.kind not in "iu" or any(isinstance(x, bool) for x in v):
            bad = next((i for i, x in enumerate(v) if isinstance(x, bool) or not isinstance(x, int)), None)
            if bad is not None:
                DatasetFailure.abort(f"expected an integer, got {v[bad]!r}", RecordPath(None, [bad]))
            raise ValueError("expected an array of integers")
        out_of_range = np.flatnonzero((arr < lower) | (arr > upper))
        if out_of_range.size:
            i = int(out_of_range[0])
            DatasetFailure.abort(f"{v[i]} is out of range [{lower}, {upper}]", RecordPath(None, [i]))
        return arr.astype(np.int64)
    return Converter("integer_array", conv)


def positive() -> Verifier:
    return Verifier("positive", lambda v: v > 0, "must be positive")


def non_negative() -> Verifier:
    return Verifier("non_negative", lambda v: v >= 0, "must not be negative")


def multiple_of(n: int) -> Verifier:
    return Verifier("multiple_of", lambda v: v % n == 0, f"must be a multiple of {n}")
