"""CSV ingestion: parse market data files, align mixed-rate signals onto one
grid, and fill short gaps.

Canonical on-disk format: header ``timestamp,<channel>...``, ISO-8601 naive
timestamps, UTF-8, LF line endings, shortest round-trip decimals.  Loaded
frames may carry NaN rows where grid points were missing; ``fill_gaps``
produces the clean frame the rest of the pipeline requires.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .series import SeriesFrame


class IngestError(ValueError):
    """Malformed input data; message carries file/line context."""


@dataclass(frozen=True)
class CsvSchema:
    """Declared shape of one CSV source."""

    timestamp_column: str
    value_columns: tuple[str, ...]
    step: timedelta
    timestamp_format: str | None = None  # None: ISO-8601 via fromisoformat
    units: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "value_columns", tuple(self.value_columns))
        object.__setattr__(self, "units", tuple(self.units))
        if not self.value_columns:
            raise ValueError("schema needs at least one value column")
        if self.units and len(self.units) != len(self.value_columns):
            raise ValueError("units must match value columns")

    def parse_timestamp(self, text: str) -> datetime:
        if self.timestamp_format is None:
            return datetime.fromisoformat(text)
        return datetime.strptime(text, self.timestamp_format)


# Documented presets for the market feeds this tool is pointed at most often.
SCHEMA_PRESETS: dict[str, CsvSchema] = {
    "canonical-5min": CsvSchema("timestamp", ("value",), timedelta(minutes=5)),
    "nyiso-lmp": CsvSchema(
        "Time Stamp", ("LBMP ($/MWHr)",), timedelta(minutes=5), "%m/%d/%Y %H:%M:%S",
        units=("$/MWh",),
    ),
    "nyiso-load": CsvSchema(
        "Time Stamp", ("Load",), timedelta(minutes=5), "%m/%d/%Y %H:%M:%S", units=("MW",)
    ),
    "nyiso-lmp-hourly": CsvSchema(
        "Time Stamp", ("LBMP ($/MWHr)",), timedelta(hours=1), "%m/%d/%Y %H:%M:%S",
        units=("$/MWh",),
    ),
    "pjm-ace": CsvSchema("datetime_beginning_ept", ("ace",), timedelta(seconds=15), None,
                         units=("MW",)),
    "interchange-spread": CsvSchema(
        "timestamp", ("spread",), timedelta(minutes=15), None, units=("$/MWh",)
    ),
}


def load_csv(path, schema: CsvSchema) -> SeriesFrame:
    """Parse one file against its schema.

    Duplicate timestamps are an error; rows out of order are sorted with a
    warning when the disorder is a pure permutation.  Missing grid points
    become NaN rows (use fill_gaps before modeling); off-grid timestamps are
    an error.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in (schema.timestamp_column, *schema.value_columns) if c not in header]
        if missing:
            raise IngestError(f"{path}: header missing columns {missing}")
        rows: list[tuple[datetime, list[float]]] = []
        for lineno, row in enumerate(reader, start=2):
            try:
                stamp = schema.parse_timestamp(row[schema.timestamp_column])
                vals = [float(row[c]) for c in schema.value_columns]
            except (TypeError, ValueError) as exc:
                raise IngestError(f"{path}:{lineno}: unparseable row ({exc})") from exc
            rows.append((stamp, vals))
    if not rows:
        raise IngestError(f"{path}: no data rows")

    stamps = [r[0] for r in rows]
    seen: set[datetime] = set()
    for stamp in stamps:
        if stamp in seen:
            raise IngestError(f"{path}: duplicate timestamp {stamp.isoformat()}")
        seen.add(stamp)
    if any(b <= a for a, b in zip(stamps, stamps[1:])):
        rows.sort(key=lambda r: r[0])
        stamps = [r[0] for r in rows]
        warnings.warn(f"{path}: rows were out of order; sorted", stacklevel=2)

    start, end = stamps[0], stamps[-1]
    n = _grid_index(end, start, schema.step, path) + 1
    values = np.full((n, len(schema.value_columns)), np.nan)
    gaps = 0
    for stamp, vals in rows:
        values[_grid_index(stamp, start, schema.step, path)] = vals
    gaps = int(np.isnan(values[:, 0]).sum())
    if gaps:
        warnings.warn(f"{path}: {gaps} missing grid points recorded as gaps", stacklevel=2)
    return SeriesFrame(
        start_time=start,
        step=schema.step,
        channels=schema.value_columns,
        values=values,
        allow_nan=gaps > 0,
    )


def _grid_index(stamp: datetime, start: datetime, step: timedelta, path) -> int:
    offset = (stamp - start) / step
    idx = round(offset)
    if abs(offset - idx) > 1e-9:
        raise IngestError(
            f"{path}: timestamp {stamp.isoformat()} is off the {step} grid "
            "(daylight-saving irregularities must be resolved upstream)"
        )
    return idx


def write_csv(path, frame: SeriesFrame) -> None:
    """Canonical CSV: ISO-8601 timestamps, shortest round-trip decimals, LF."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp," + ",".join(frame.channels) + "\n")
        for k in range(len(frame)):
            row = ",".join(repr(float(v)) for v in frame.values[k])
            fh.write(f"{frame.time_at(k).isoformat()},{row}\n")


def load_canonical_csv(path, step: timedelta | None = None) -> SeriesFrame:
    """Read a file produced by write_csv (any channel names).

    With step=None the sampling interval is inferred from the first two rows.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if step is None:
            try:
                first = datetime.fromisoformat(fh.readline().split(",", 1)[0])
                second = datetime.fromisoformat(fh.readline().split(",", 1)[0])
            except ValueError as exc:
                raise IngestError(f"{path}: cannot infer step ({exc})") from exc
            step = second - first
            if step <= timedelta(0):
                raise IngestError(f"{path}: cannot infer step from first two rows")
    if not header or header[0] != "timestamp":
        raise IngestError(f"{path}: expected canonical header starting with 'timestamp'")
    schema = CsvSchema("timestamp", tuple(header[1:]), step)
    return load_csv(path, schema)


def align(
    frames: list[SeriesFrame],
    target_step: timedelta,
    aggregation: str | None = None,
) -> SeriesFrame:
    """Merge frames onto one grid over their common time range.

    Coarser series are forward-filled (a day-ahead hourly price holds for its
    whole delivery hour); finer series require an explicit aggregation
    ("mean") and are averaged over each target interval.  Channels keep input
    order.
    """
    if not frames:
        raise IngestError("nothing to align")
    for frame in frames:
        if frame.allow_nan and not np.isfinite(frame.values).all():
            raise IngestError("fill gaps before aligning")
    # a frame's last value holds for its own step, so coverage is half-open
    start = max(f.start_time for f in frames)
    end = min(f.time_at(len(f) - 1) + f.step for f in frames)
    if end <= start:
        raise IngestError("empty overlap between input frames")
    # grid points in [start, end), anchored at the latest-starting frame
    frac = (end - start) / target_step
    n = int(frac) if frac == int(frac) else int(frac) + 1

    columns: list[np.ndarray] = []
    names: list[str] = []
    for frame in frames:
        ratio = frame.step / target_step
        grid = np.array([(start + k * target_step - frame.start_time) / frame.step
                         for k in range(n)])
        if ratio >= 1.0 - 1e-9:  # same rate or coarser: forward fill
            idx = np.floor(grid + 1e-9).astype(int)
            if idx.min() < 0 or idx.max() >= len(frame):
                raise IngestError("frame does not cover the aligned range")
            columns.append(frame.values[idx])
        else:
            if aggregation != "mean":
                raise IngestError(
                    f"frame at step {frame.step} is finer than target {target_step}; "
                    "pass aggregation='mean' to downsample"
                )
            per = int(round(1.0 / ratio))
            cols = np.empty((n, frame.n_channels))
            for k in range(n):
                lo = int(round(grid[k]))
                hi = min(lo + per, len(frame))
                if lo < 0 or lo >= len(frame):
                    raise IngestError("frame does not cover the aligned range")
                cols[k] = frame.values[lo:hi].mean(axis=0)
            columns.append(cols)
        names.extend(frame.channels)
    return SeriesFrame(
        start_time=start,
        step=target_step,
        channels=tuple(names),
        values=np.hstack(columns),
    )


def fill_gaps(frame: SeriesFrame, max_gap: int) -> SeriesFrame:
    """Linear interpolation over NaN runs of at most max_gap steps.

    Longer runs (or runs touching either end) are an error listing their time
    ranges.  A frame with no gaps passes through unchanged.
    """
    values = frame.values
    nan_rows = ~np.isfinite(values).all(axis=1)
    if not nan_rows.any():
        return frame
    filled = values.copy()
    bad_ranges: list[str] = []
    k = 0
    n = len(frame)
    while k < n:
        if not nan_rows[k]:
            k += 1
            continue
        run_start = k
        while k < n and nan_rows[k]:
            k += 1
        run_len = k - run_start
        span = f"{frame.time_at(run_start).isoformat()}..{frame.time_at(k - 1).isoformat()}"
        if run_start == 0 or k == n:
            bad_ranges.append(span + " (at series edge)")
        elif run_len > max_gap:
            bad_ranges.append(f"{span} ({run_len} steps)")
        else:
            left = filled[run_start - 1]
            right = filled[k]
            for j in range(run_len):
                w = (j + 1) / (run_len + 1)
                filled[run_start + j] = (1 - w) * left + w * right
    if bad_ranges:
        raise IngestError("gaps too long to interpolate: " + "; ".join(bad_ranges))
    return frame.with_values(filled)
