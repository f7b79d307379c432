"""
Dataset files.

A dataset is UTF-8 text with one JSON object per line:

```
{"source_id":"img0001:17","width":4,"height":4,"qp":22,"coeffs":[5,2,0,0,1,0,0,0,0,0,0,0,0,0,0,0],"rate":17.0}
```

`coeffs` lists the quantized coefficients in row-major order and `rate` is the measured rate in bits.
An optional first line `{"format_version":1}` declares the format version. Blank lines are ignored.
"""
from collections.abc import Iterable, Iterator
import csv
from dataclasses import dataclass, field
import json
import logging
from pathlib import Path
from typing import Any, Optional, TextIO, Union

import numpy as np

from .block import CoeffBlock, DatasetRecord
from .failures import DatasetFailure, InvalidBlockFailure, RecordPath
from .features import extract_batch
from .schema import Field, RecordSchema, integer, integer_array, multiple_of, non_negative, positive, real, text


__all__ = [
    "FORMAT_VERSION",
    "DatasetFile",
    "RECORD_SCHEMA",
    "parse_record",
    "format_record",
    "iter_records",
    "read_dataset",
    "write_dataset",
    "write_features_csv",
    "FEATURE_COLUMNS",
]


logger = logging.getLogger(__name__)


FORMAT_VERSION = 1

#: Columns of the feature dump.
FEATURE_COLUMNS = ("source_id", "width", "height", "qp", "S", "L", "Z", "E", "rate_bits")


@dataclass
class DatasetFile:
    records: list[DatasetRecord] = field(default_factory=list)
    format_version: int = FORMAT_VERSION

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[DatasetRecord]:
        return iter(self.records)


def _size_matches(values: dict[str, Any]) -> Optional[tuple[str, DatasetFailure]]:
    expected = values["width"] * values["height"]
    actual = values["coeffs"].size
    if actual != expected:
        return "coeffs", DatasetFailure(
            f"{values['width']}x{values['height']} block needs {expected} coefficients, got {actual}",
            name="size-mismatch",
        )
    return None


RECORD_SCHEMA = RecordSchema(
    [
        Field("source_id", text(), default=""),
        Field("width", integer(), positive(), multiple_of(4)),
        Field("height", integer(), positive(), multiple_of(4)),
        Field("qp", integer()),
        Field("coeffs", integer_array(-(2 ** 31), 2 ** 31 - 1)),
        Field("rate", real(), non_negative()),
    ],
    checks=[_size_matches],
)


def parse_record(line: str, line_number: Optional[int] = None) -> DatasetRecord:
    """
    Parses one dataset line.

    Raises:
        DatasetFailure: The line is not JSON or some fields are invalid. The failure names the line and the fields.
    """
    path = RecordPath(line_number)
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as e:
        raise DatasetFailure(f"not valid JSON ({e.msg} at column {e.colno})", path)
    values = RECORD_SCHEMA.validate(doc, path)
    try:
        block = CoeffBlock(values["width"], values["height"], values["coeffs"], values["qp"], values["source_id"])
        return DatasetRecord(block, values["rate"])
    except InvalidBlockFailure as e:
        raise DatasetFailure(e.message, path, name=e.name)


def format_record(record: DatasetRecord) -> str:
    """
    Formats a record as one dataset line without the newline.
    """
    b = record.block
    return json.dumps({
        "source_id": b.source_id,
        "width": b.width,
        "height": b.height,
        "qp": b.qp,
        "coeffs": b.coeffs.tolist(),
        "rate": record.rate_bits,
    }, separators=(",", ":"), allow_nan=False)


def _header_version(line: str) -> Optional[int]:
    if '"format_version"' not in line:
        return None
    try:
        doc = json.loads(line)
    except json.JSONDecodeError:
        return None
    if isinstance(doc, dict) and set(doc) == {"format_version"}:
        return doc["format_version"]
    return None


def _lines(source: Union[str, Path, TextIO]) -> Iterator[str]:
    if not isinstance(source, (str, Path)):
        yield from source
        return
    try:
        with open(source, "rb") as f:
            for number, raw in enumerate(f, start=1):
                try:
                    yield raw.decode("utf-8")
                except UnicodeDecodeError as e:
                    raise DatasetFailure(f"not valid UTF-8 at byte {e.start}", RecordPath(number), name="encoding")
    except OSError as e:
        raise DatasetFailure(f"can not read {source}: {e.strerror}", name="io")


def iter_records(source: Union[str, Path, TextIO]) -> Iterator[DatasetRecord]:
    """
    Streams records from a dataset file without holding the file in memory.

    The format header is recognized on the first non-blank line.

    Args:
        source: Path or text stream.
    Raises:
        DatasetFailure: At the first malformed line.
    """
    count = 0
    first = True
    for number, line in enumerate(_lines(source), start=1):
        if not line.strip():
            continue
        if first:
            first = False
            version = _header_version(line)
            if version is not None:
                if version != FORMAT_VERSION:
                    raise DatasetFailure(f"unsupported format version {version!r}", RecordPath(number), name="version")
                continue
        yield parse_record(line, number)
        count += 1
    logger.info("Read %d records from %s.", count, getattr(source, "name", source))


def read_dataset(source: Union[str, Path, TextIO]) -> DatasetFile:
    """
    Reads a whole dataset file. An empty file is an empty dataset.
    """
    return DatasetFile(list(iter_records(source)))


def write_dataset(dataset: Union[DatasetFile, Iterable[DatasetRecord]], target: Union[str, Path, TextIO]) -> None:
    """
    Writes records, preceded by the format header. Reading the file back yields equal records.
    """
    def write(out: TextIO) -> int:
        out.write(json.dumps({"format_version": FORMAT_VERSION}) + "\n")
        n = 0
        for record in dataset:
            out.write(format_record(record) + "\n")
            n += 1
        return n

    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="\n") as f:
            n = write(f)
    else:
        n = write(target)
    logger.info("Wrote %d records.", n)


def write_features_csv(records: Iterable[DatasetRecord], out: TextIO) -> None:
    """
    Writes one CSV row of block features per record.
    """
    records = list(records)
    features = extract_batch([r.block for r in records]) if records else np.zeros((0, 4))
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(FEATURE_COLUMNS)
    for record, (s, l, z, e) in zip(records, features):
        b = record.block
        writer.writerow([b.source_id, b.width, b.height, b.qp, int(s), repr(float(l)), int(z), repr(float(e)), repr(record.rate_bits)])
