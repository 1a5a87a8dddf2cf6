"""Interaction logs: ingestion, binarization, time splits, sequence windows.

The ingestion contract is a UTF-8 CSV with a header row of
``timestamp,user_id,item_id,rating`` followed by one column per schema
dimension. Timestamps are integer epoch seconds or ISO-8601 strings; the
format is auto-detected from the first data row and must be uniform within
a file. Missing context cells stay absent on the raw record and only become
zeros at binarization time.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateSplitError,
    EmptyDatasetError,
    ParseError,
    SchemaMismatchError,
    UnknownCategoryError,
)
from .schema import NOMINAL, FeatureSchema

MANDATORY_COLUMNS = ("timestamp", "user_id", "item_id", "rating")


@dataclass(frozen=True)
class RawInteraction:
    """One timestamped rating with its raw (un-binarized) context values."""

    timestamp: int
    user_id: str
    item_id: str
    rating: float
    context: dict[str, str | float] = field(default_factory=dict)


@dataclass(frozen=True)
class ContextVector:
    """Fixed-width binarized context of a single interaction."""

    values: np.ndarray
    timestamp: int

    def __post_init__(self):
        self.values.setflags(write=False)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ContextSequence:
    """Consecutive context vectors ordered by timestamp.

    Windows slide over the globally time-sorted log, so one sequence may mix
    vectors of different users; only the order of occurrence matters.
    """

    vectors: tuple[ContextVector, ...]

    def __post_init__(self):
        ts = [v.timestamp for v in self.vectors]
        if any(a > b for a, b in zip(ts, ts[1:])):
            raise ValueError("sequence timestamps must be non-decreasing")

    def __len__(self) -> int:
        return len(self.vectors)

    def as_matrix(self) -> np.ndarray:
        return np.stack([v.values for v in self.vectors])


@dataclass(frozen=True)
class Dataset:
    """Interactions sorted ascending by timestamp (stable on ties)."""

    schema: FeatureSchema
    interactions: tuple[RawInteraction, ...]
    rating_scale: tuple[float, float] = (1.0, 5.0)

    def __post_init__(self):
        order = sorted(range(len(self.interactions)), key=lambda i: self.interactions[i].timestamp)
        object.__setattr__(self, "interactions", tuple(self.interactions[i] for i in order))

    def __len__(self) -> int:
        return len(self.interactions)


def _parse_timestamp(raw: str, mode: str) -> int:
    if mode == "epoch":
        return int(raw)
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _detect_timestamp_mode(raw: str) -> str:
    try:
        int(raw)
        return "epoch"
    except ValueError:
        return "iso"


def load_interactions(
    path: str | Path,
    schema: FeatureSchema,
    rating_scale: tuple[float, float] = (1.0, 5.0),
    delimiter: str = ",",
) -> Dataset:
    """Read an interaction CSV into a time-sorted Dataset.

    Raises FileNotFoundError for a missing file, SchemaMismatchError when
    the header does not consist of exactly the mandatory columns plus the
    schema dimensions, and ParseError (with row and column) on the first
    malformed row.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatchError(missing=list(MANDATORY_COLUMNS), extra=[])
        expected = set(MANDATORY_COLUMNS) | set(schema.dimension_names)
        got = set(header)
        if got != expected:
            raise SchemaMismatchError(missing=sorted(expected - got), extra=sorted(got - expected))

        col = {name: header.index(name) for name in header}
        dim_cols = [(d, col[d.name]) for d in schema.dimensions]
        lo, hi = rating_scale
        ts_mode: str | None = None
        rows: list[RawInteraction] = []

        for rownum, cells in enumerate(reader, start=2):
            if len(cells) != len(header):
                raise ParseError(rownum, "<row>", f"expected {len(header)} cells, got {len(cells)}")
            raw_ts = cells[col["timestamp"]]
            if ts_mode is None:
                ts_mode = _detect_timestamp_mode(raw_ts)
            try:
                ts = _parse_timestamp(raw_ts, ts_mode)
            except ValueError as exc:
                raise ParseError(rownum, "timestamp", str(exc)) from exc
            try:
                rating = float(cells[col["rating"]])
            except ValueError as exc:
                raise ParseError(rownum, "rating", str(exc)) from exc
            if not lo <= rating <= hi:
                raise ParseError(rownum, "rating", f"{rating} outside scale [{lo}, {hi}]")
            context: dict[str, str | float] = {}
            for d, idx in dim_cols:
                cell = cells[idx]
                if cell == "":
                    continue  # absent, not zero
                if d.kind == NOMINAL:
                    context[d.name] = cell
                else:
                    try:
                        context[d.name] = float(cell)
                    except ValueError as exc:
                        raise ParseError(rownum, d.name, str(exc)) from exc
            rows.append(
                RawInteraction(
                    timestamp=ts,
                    user_id=cells[col["user_id"]],
                    item_id=cells[col["item_id"]],
                    rating=rating,
                    context=context,
                )
            )
    return Dataset(schema=schema, interactions=tuple(rows), rating_scale=rating_scale)


def save_interactions(ds: Dataset, path: str | Path, delimiter: str = ",") -> None:
    """Write a Dataset back to the ingestion CSV format (epoch timestamps)."""
    names = ds.schema.dimension_names
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(list(MANDATORY_COLUMNS) + names)
        for r in ds.interactions:
            cells = [str(r.timestamp), r.user_id, r.item_id, repr(r.rating)]
            for name in names:
                val = r.context.get(name)
                if val is None:
                    cells.append("")
                elif isinstance(val, float):
                    cells.append(repr(val))
                else:
                    cells.append(str(val))
            writer.writerow(cells)


def binarize(raw: RawInteraction, schema: FeatureSchema) -> ContextVector:
    """Expand one raw interaction into its fixed-width [0, 1] context vector.

    Nominal dimensions become one-hot groups (all zeros when the value is
    missing); numeric dimensions are min-max scaled with their declared
    bounds and clamped to [0, 1], with missing values imputed to 0.
    """
    out = np.zeros(schema.width, dtype=np.float64)
    for d in schema.dimensions:
        start, stop = schema.column_span(d.name)
        val = raw.context.get(d.name)
        if val is None:
            continue
        if d.kind == NOMINAL:
            val = str(val)
            if val not in d.categories:
                raise UnknownCategoryError(d.name, val)
            out[start + d.categories.index(val)] = 1.0
        else:
            lo, hi = d.bounds
            scaled = (float(val) - lo) / (hi - lo)
            out[start] = min(1.0, max(0.0, scaled))
    return ContextVector(values=out, timestamp=raw.timestamp)


def binarize_all(ds: Dataset) -> list[ContextVector]:
    return [binarize(r, ds.schema) for r in ds.interactions]


def time_split(ds: Dataset, train_fraction: float) -> tuple[Dataset, Dataset]:
    """Chronological partition: the first ceil(fraction * n) rows train, the rest test."""
    n = len(ds)
    if n == 0:
        raise EmptyDatasetError("cannot split an empty dataset")
    if not 0.0 < train_fraction < 1.0:
        raise DegenerateSplitError(f"train_fraction {train_fraction} not in (0, 1)")
    cut = math.ceil(train_fraction * n)
    if cut == 0 or cut == n:
        raise DegenerateSplitError(f"split at {cut}/{n} leaves one side empty")
    train = Dataset(ds.schema, ds.interactions[:cut], ds.rating_scale)
    test = Dataset(ds.schema, ds.interactions[cut:], ds.rating_scale)
    return train, test


def generate_sequences(ds: Dataset, length: int) -> list[ContextSequence]:
    """All stride-1 windows of `length` consecutive binarized context vectors.

    Returns max(0, n - length + 1) sequences; user ids play no role in the
    windowing, so sequences freely span users.
    """
    if length < 1:
        raise ValueError(f"sequence length must be >= 1, got {length}")
    vectors = binarize_all(ds)
    n = len(vectors)
    return [ContextSequence(tuple(vectors[i : i + length])) for i in range(n - length + 1)]
