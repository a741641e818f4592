"""CSV ingestion for prescription and measurement event streams.

Both files are header-named CSV.  Prescriptions need columns
``patient_id, drug, date``; measurements need ``patient_id, date, value``.
Extra columns are ignored.  Parsing is total: every input row ends up either
as a record or as a located ``RowError``, never silently skipped.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .cohort import (
    Cohort,
    MeasurementRecord,
    PrescriptionRecord,
    day_from_iso,
    validate_cohort,
)
from .errors import CohortError, IngestError

PRESCRIPTION_COLUMNS = ("patient_id", "drug", "date")
MEASUREMENT_COLUMNS = ("patient_id", "date", "value")


@dataclass(frozen=True)
class IngestConfig:
    """Where and how to read the two event files."""

    prescriptions_path: str
    measurements_path: str
    dedupe_policy: str = "strict"
    delimiter: str = ","


@dataclass(frozen=True)
class RowError:
    """One rejected input row with its 1-based line number."""

    path: str
    line: int
    message: str
    stage: str = "parse"  # "parse" (row malformed) or "merge" (conflict)

    def __str__(self) -> str:
        return f"{self.path}:{self.line}: {self.message}"


@dataclass
class ParseResult:
    """Records plus per-row errors for one file."""

    records: list
    errors: list[RowError] = field(default_factory=list)
    n_rows: int = 0  # data rows in the file, header excluded

    @property
    def n_parsed(self) -> int:
        return len(self.records)

    def raise_if_errors(self) -> None:
        if self.errors:
            shown = "\n".join(str(e) for e in self.errors[:20])
            more = len(self.errors) - 20
            if more > 0:
                shown += f"\n... and {more} more"
            raise IngestError(f"{len(self.errors)} bad rows:\n{shown}")


def _open_rows(path: str, required: Sequence[str], delimiter: str):
    p = Path(path)
    if not p.exists():
        raise IngestError(f"input file not found: {path}")
    handle = p.open(newline="", encoding="utf-8")
    reader = csv.DictReader(handle, delimiter=delimiter)
    if reader.fieldnames is None:
        handle.close()
        raise IngestError(f"{path}: empty file, expected a header row")
    header = [h.strip() for h in reader.fieldnames]
    missing = [c for c in required if c not in header]
    if missing:
        handle.close()
        raise IngestError(f"{path}: missing required columns {missing} in header {header}")
    return handle, reader, header


def _parse_file(
    path: str,
    required: Sequence[str],
    delimiter: str,
    make: Callable[[dict, int, list[RowError]], object | None],
) -> ParseResult:
    handle, reader, header = _open_rows(path, required, delimiter)
    result = ParseResult(records=[])
    with handle:
        for row in reader:
            result.n_rows += 1
            line = reader.line_num
            cleaned = {}
            bad = False
            for col in required:
                raw = row.get(col)
                if raw is None or raw.strip() == "":
                    result.errors.append(RowError(path, line, f"missing value for {col!r}"))
                    bad = True
                    break
                cleaned[col] = raw.strip()
            if bad:
                continue
            rec = make(cleaned, line, result.errors)
            if rec is not None:
                result.records.append(rec)
    if result.n_rows == 0:
        raise IngestError(f"{path}: no data rows")
    return result


def _parse_day(text: str, line: int, path: str, errors: list[RowError]) -> int | None:
    try:
        return day_from_iso(text)
    except ValueError:
        errors.append(RowError(path, line, f"bad date {text!r}, expected YYYY-MM-DD"))
        return None


def parse_prescriptions(path: str, config: IngestConfig | None = None) -> ParseResult:
    """Read prescription rows; drug ids are whitespace-stripped and casefolded."""
    delim = config.delimiter if config else ","

    def make(row: dict, line: int, errors: list[RowError]):
        day = _parse_day(row["date"], line, path, errors)
        if day is None:
            return None
        return PrescriptionRecord(
            patient=row["patient_id"], drug=row["drug"].casefold(), date=day
        )

    return _parse_file(path, PRESCRIPTION_COLUMNS, delim, make)


def parse_measurements(path: str, config: IngestConfig | None = None) -> ParseResult:
    """Read measurement rows; values must be finite decimal numbers."""
    delim = config.delimiter if config else ","

    def make(row: dict, line: int, errors: list[RowError]):
        day = _parse_day(row["date"], line, path, errors)
        if day is None:
            return None
        try:
            value = float(row["value"])
        except ValueError:
            errors.append(RowError(path, line, f"bad value {row['value']!r}"))
            return None
        if not math.isfinite(value):
            errors.append(RowError(path, line, f"non-finite value {row['value']!r}"))
            return None
        return MeasurementRecord(patient=row["patient_id"], date=day, value=value)

    return _parse_file(path, MEASUREMENT_COLUMNS, delim, make)


def load_cohort(config: IngestConfig) -> Cohort:
    """Parse both event files and build a validated cohort.

    Any row-level parse error or cohort-level conflict is raised as
    ``IngestError`` so callers see one failure mode for bad input.
    """
    rx = parse_prescriptions(config.prescriptions_path, config)
    rx.raise_if_errors()
    meas = parse_measurements(config.measurements_path, config)
    meas.raise_if_errors()
    try:
        return validate_cohort(
            rx.records, meas.records, dedupe_policy=config.dedupe_policy
        )
    except CohortError as exc:
        raise IngestError(str(exc)) from exc
