"""The versioned CSV contract this renderer consumes.

Version 1 lays out `schema_version, experiment, n, mode, trial,
rel_error`, then one column per bound id, then `seed`.  The bound
columns are taken from the header itself, so new bound ids extend the
format without touching this module; anything that breaks the frame is
a SchemaError.  Cells in bound columns may be empty, meaning the bound
does not apply to that row's experiment.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

__all__ = [
    "SUPPORTED_VERSION",
    "LEAD_COLUMNS",
    "MODES",
    "SchemaError",
    "Row",
    "Dataset",
    "parse_csv",
    "load_csv",
    "merge",
]

SUPPORTED_VERSION = "1"
LEAD_COLUMNS = ("schema_version", "experiment", "n", "mode", "trial", "rel_error")
MODES = ("rtn", "sr")


class SchemaError(ValueError):
    """The file does not follow the versioned CSV contract."""


@dataclass(frozen=True)
class Row:
    experiment: str
    n: int
    mode: str
    trial: int
    rel_error: float
    bounds: dict[str, float]
    seed: int


@dataclass(frozen=True)
class Dataset:
    bound_columns: tuple[str, ...]
    rows: tuple[Row, ...]


def parse_csv(fh: TextIO) -> Dataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("empty file, expected a schema version 1 header")
    if (
        len(header) < len(LEAD_COLUMNS) + 2  # at least one bound column
        or tuple(header[: len(LEAD_COLUMNS)]) != LEAD_COLUMNS
        or header[-1] != "seed"
    ):
        raise SchemaError("unrecognized header, expected the schema version 1 layout")
    bound_columns = tuple(header[len(LEAD_COLUMNS) : -1])

    rows = []
    for lineno, cells in enumerate(reader, start=2):
        if len(cells) != len(header):
            raise SchemaError(f"line {lineno}: {len(cells)} cells, header has {len(header)}")
        if cells[0] != SUPPORTED_VERSION:
            raise SchemaError(f"line {lineno}: unsupported schema version {cells[0]!r}")
        if cells[3] not in MODES:
            raise SchemaError(f"line {lineno}: unknown rounding mode {cells[3]!r}")
        try:
            bounds = {
                name: float(cells[len(LEAD_COLUMNS) + i])
                for i, name in enumerate(bound_columns)
                if cells[len(LEAD_COLUMNS) + i] != ""
            }
            row = Row(
                experiment=cells[1],
                n=int(cells[2]),
                mode=cells[3],
                trial=int(cells[4]),
                rel_error=float(cells[5]),
                bounds=bounds,
                seed=int(cells[-1]),
            )
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from None
        rows.append(row)
    return Dataset(bound_columns=bound_columns, rows=tuple(rows))


def load_csv(path: str) -> Dataset:
    with open(path, newline="") as fh:
        return parse_csv(fh)


def merge(datasets: Sequence[Dataset]) -> Dataset:
    """Concatenate datasets that share one header."""
    if not datasets:
        raise SchemaError("no datasets to merge")
    first = datasets[0].bound_columns
    for ds in datasets[1:]:
        if ds.bound_columns != first:
            raise SchemaError("input files carry different bound columns")
    rows: Iterable[Row] = (row for ds in datasets for row in ds.rows)
    return Dataset(bound_columns=first, rows=tuple(rows))
