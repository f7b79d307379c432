from collections.abc import Generator, Iterator
import re
from functools import partial
from itertools import chain
from typing import Any, ClassVar, Optional, Union, NoReturn
from typing_extensions import Self


class RateFailure(Exception):
    """
    Base exception type for every failure raised by this package.

    Each concrete type maps to a process exit code used by the command line front end.
    """
    #: Exit code reported by the command line when this failure aborts a run.
    exit_code: ClassVar[int] = 2

    def __init__(self, name: str = "failed", message: str = "Rate estimation failed", kwargs: Optional[dict[str, Any]] = None) -> None:
        super().__init__(message)
        #: The name to distinguish the type of failure.
        self._name = name
        #: Error message.
        self._message = message
        #: Values describing the failure.
        self._kwargs = kwargs or {}

    @property
    def name(self) -> str:
        """
        Returns the name to distinguish the type of failure.
        """
        return self._name

    @property
    def message(self) -> str:
        """
        Returns the error message.
        """
        return self._message

    @property
    def kwargs(self) -> dict[str, Any]:
        """
        Returns the values describing the failure.
        """
        return self._kwargs

    def __str__(self) -> str:
        return self._message

    @classmethod
    def abort(cls, *args, **kwargs) -> NoReturn:
        """
        Utility method to raise a failure from converter/verifier functions of a record schema.

        The failure is constructed later by the schema, which knows the field and the path.

        Args:
            args: Positional arguments for the failure type.
            kwargs: Keyword arguments for the failure type.
        """
        raise PartialFailure(partial(cls, *args, **kwargs))


class PartialFailure(Exception):
    """
    Deferred failure raised by `RateFailure.abort()` .
    """
    def __init__(self, create) -> None:
        super().__init__()
        self.create = create


class UsageFailure(RateFailure):
    """
    Raised for invalid arguments such as unknown model kinds or malformed feature masks.
    """
    exit_code = 1

    def __init__(self, message: str, **kwargs: Any) -> None:
        super().__init__("usage", message, kwargs)


class InvalidBlockFailure(RateFailure):
    """
    Raised when a coefficient block violates its invariants.
    """
    exit_code = 2

    def __init__(self, message: str, **kwargs: Any) -> None:
        super().__init__("invalid-block", message, kwargs)


class NumericalFailure(RateFailure):
    """
    Raised when a computation produces or receives non-finite values.
    """
    exit_code = 3

    def __init__(self, message: str, name: str = "numerical", **kwargs: Any) -> None:
        super().__init__(name, message, kwargs)

    @property
    def iteration(self) -> Optional[int]:
        """
        Returns the iteration index where an iterative solver failed, if any.
        """
        return self._kwargs.get("iteration")


class UndefinedMetricFailure(NumericalFailure):
    """
    Raised when a metric is undefined for its input, e.g. zero variance in Pearson correlation.
    """
    def __init__(self, message: str, **kwargs: Any) -> None:
        super().__init__(message, "undefined-metric", **kwargs)


class RecordPath:
    """
    Represents a location in a dataset file.

    The first item is the line number, the following items are field names or array indexes.
    The textual representation looks like `line 3.coeffs[15]` .
    """
    PATH_ITEM_REGEXP = re.compile(r"^([a-zA-Z_][0-9a-zA-Z_]*)?((\[[0-9]+\])+)?$")

    def __init__(self, line: Optional[int] = None, path: Optional[list[Union[str, int]]] = None):
        self.line = line
        self.path = path or []

    def __iter__(self) -> Iterator[Union[str, int]]:
        return iter(self.path)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RecordPath) and (self.line, self.path) == (other.line, other.path)

    def __repr__(self) -> str:
        head = f"line {self.line}" if self.line is not None else ""
        tail = at(self.path)
        if head and tail and not tail.startswith("["):
            return f"{head}.{tail}"
        return head + tail

    def __add__(self, other: Union[str, int, Self, None]) -> 'RecordPath':
        """
        Creates new path by appending a path segment.
        """
        if other == "" or other is None:
            return RecordPath(self.line, list(self.path))
        elif isinstance(other, int):
            return RecordPath(self.line, self.path + [other])
        elif isinstance(other, str):
            return self + RecordPath.of(other)
        elif isinstance(other, RecordPath):
            return RecordPath(self.line if other.line is None else other.line, self.path + other.path)
        else:
            raise ValueError(f"Unsupported operand type(s) for +: 'RecordPath' and '{type(other)}'")

    @classmethod
    def of(cls, path: str) -> 'RecordPath':
        """
        Creates a field path from its textual representation, e.g. `coeffs[3]` .
        """
        def parse_index(s):
            m = RecordPath.PATH_ITEM_REGEXP.match(s)
            if not m:
                raise ValueError(f"'{path}' is not valid record path.")
            key, indexes = m.group(1), m.group(2)
            if indexes:
                return chain([key] if key else [], map(int, indexes[1:-1].split("][")))
            else:
                return [key] if key else []
        return RecordPath(None, list(chain(*map(parse_index, path.split(".")))))


def at(positions) -> str:
    def exp(i, p):
        if isinstance(p, str):
            return p if i == 0 else f".{p}"
        else:
            return f"[{p}]"
    return ''.join(exp(i, p) for i, p in enumerate(positions))


class DatasetFailure(RateFailure):
    """
    Raised when a dataset line can not be read as a record.
    """
    exit_code = 2

    def __init__(self, message: str, path: Optional[RecordPath] = None, name: str = "malformed", **kwargs: Any) -> None:
        self.path = path or RecordPath()
        location = repr(self.path)
        super().__init__(name, f"{location}: {message}" if location else message, kwargs)
        #: Message without location.
        self.reason = message

    def __len__(self) -> int:
        return 1

    def __iter__(self) -> Generator[tuple[RecordPath, 'DatasetFailure'], None, None]:
        yield self.path, self


class CompositeDatasetFailure(DatasetFailure):
    """
    Collects the failures of every field of a record.

    ```python
    >>> f = CompositeDatasetFailure(RecordPath(3))
    >>> _ = f.add("width", DatasetFailure("must be positive"))
    >>> [str(p) for p, _ in f]
    ['line 3.width']
    ```
    """
    def __init__(self, path: Optional[RecordPath] = None) -> None:
        super().__init__("record is invalid", path, "invalid-record")
        self.failures: dict[str, DatasetFailure] = {}

    def __len__(self) -> int:
        return sum(len(f) for f in self.failures.values())

    def __bool__(self) -> bool:
        return len(self.failures) > 0

    def __iter__(self) -> Generator[tuple[RecordPath, DatasetFailure], None, None]:
        for key, f in self.failures.items():
            for p, g in f:
                yield self.path + RecordPath.of(key) + RecordPath(None, p.path), g

    def __contains__(self, key: str) -> bool:
        return self[key] is not None

    def __getitem__(self, key: str) -> Optional[DatasetFailure]:
        target = RecordPath.of(key)
        for p, f in self:
            if p.path == target.path:
                return f
        return None

    def add(self, key: str, failure: DatasetFailure) -> Self:
        """
        Adds a failure of a field.

        Args:
            key: Field name.
            failure: Failure of the field.
        Returns:
            This instance.
        """
        self.failures[key] = failure
        return self

    def __str__(self) -> str:
        return "; ".join(f"{p!r}: {f.reason}" for p, f in self)
