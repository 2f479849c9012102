from datetime import datetime, timedelta

import numpy as np
import pytest

from innovae.ingest import (
    SCHEMA_PRESETS,
    CsvSchema,
    IngestError,
    align,
    fill_gaps,
    load_canonical_csv,
    load_csv,
    write_csv,
)
from innovae.series import SeriesFrame

SCHEMA = CsvSchema("timestamp", ("price",), timedelta(minutes=5))


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_three_rows(tmp_path):
    path = write(
        tmp_path,
        "timestamp,price\n"
        "2023-07-01T00:00:00,10.5\n"
        "2023-07-01T00:05:00,11.0\n"
        "2023-07-01T00:10:00,9.25\n",
    )
    frame = load_csv(path, SCHEMA)
    assert len(frame) == 3
    assert frame.values[:, 0].tolist() == [10.5, 11.0, 9.25]
    assert frame.step == timedelta(minutes=5)


def test_duplicate_timestamp_named_in_error(tmp_path):
    path = write(
        tmp_path,
        "timestamp,price\n"
        "2023-07-01T00:00:00,1\n"
        "2023-07-01T00:00:00,2\n",
    )
    with pytest.raises(IngestError, match="2023-07-01T00:00:00"):
        load_csv(path, SCHEMA)


def test_out_of_order_rows_sorted_with_warning(tmp_path):
    path = write(
        tmp_path,
        "timestamp,price\n"
        "2023-07-01T00:05:00,2\n"
        "2023-07-01T00:00:00,1\n",
    )
    with pytest.warns(UserWarning, match="out of order"):
        frame = load_csv(path, SCHEMA)
    assert frame.values[:, 0].tolist() == [1.0, 2.0]


def test_unparseable_row_reports_line_number(tmp_path):
    path = write(
        tmp_path,
        "timestamp,price\n"
        "2023-07-01T00:00:00,1\n"
        "2023-07-01T00:05:00,not-a-number\n",
    )
    with pytest.raises(IngestError, match=":3:"):
        load_csv(path, SCHEMA)


def test_missing_column_rejected(tmp_path):
    path = write(tmp_path, "timestamp,load\n2023-07-01T00:00:00,1\n")
    with pytest.raises(IngestError, match="price"):
        load_csv(path, SCHEMA)


def test_gap_recorded_as_nan(tmp_path):
    path = write(
        tmp_path,
        "timestamp,price\n"
        "2023-07-01T00:00:00,10\n"
        "2023-07-01T00:10:00,12\n",
    )
    with pytest.warns(UserWarning, match="gap"):
        frame = load_csv(path, SCHEMA)
    assert len(frame) == 3
    assert np.isnan(frame.values[1, 0])


def test_roundtrip_is_bit_comparable(tmp_path):
    values = np.array([[0.1], [1 / 3], [np.pi], [-7.25e-12]])
    frame = SeriesFrame(datetime(2023, 7, 1), timedelta(minutes=5), ("price",), values)
    path = tmp_path / "out.csv"
    write_csv(path, frame)
    back = load_csv(path, SCHEMA)
    np.testing.assert_array_equal(back.values, frame.values)
    # a second write is byte-identical
    path2 = tmp_path / "out2.csv"
    write_csv(path2, back)
    assert path.read_bytes() == path2.read_bytes()


def test_load_canonical_infers_channels(tmp_path):
    frame = SeriesFrame(datetime(2023, 7, 1), timedelta(minutes=5), ("a", "b"),
                        np.arange(6.0).reshape(3, 2))
    path = tmp_path / "c.csv"
    write_csv(path, frame)
    back = load_canonical_csv(path, timedelta(minutes=5))
    assert back.channels == ("a", "b")
    np.testing.assert_array_equal(back.values, frame.values)


class TestAlign:
    def test_hourly_forward_fills_five_minute_grid(self):
        hourly = SeriesFrame(datetime(2023, 7, 1, 13), timedelta(hours=1), ("da",),
                             np.array([[40.0], [50.0]]))
        fine = SeriesFrame(datetime(2023, 7, 1, 13), timedelta(minutes=5), ("rt",),
                           np.arange(24.0).reshape(24, 1))
        out = align([fine, hourly], timedelta(minutes=5))
        assert out.channels == ("rt", "da")
        assert out.values[:12, 1].tolist() == [40.0] * 12
        assert out.values[12:, 1].tolist() == [50.0] * 12

    def test_identical_grids_concatenate(self):
        a = SeriesFrame(datetime(2023, 7, 1), timedelta(minutes=5), ("a",),
                        np.arange(4.0).reshape(4, 1))
        b = SeriesFrame(datetime(2023, 7, 1), timedelta(minutes=5), ("b",),
                        np.arange(4.0, 8.0).reshape(4, 1))
        out = align([a, b], timedelta(minutes=5))
        np.testing.assert_array_equal(out.values, np.column_stack([a.values, b.values]))

    def test_disjoint_ranges_rejected(self):
        a = SeriesFrame(datetime(2023, 7, 1), timedelta(minutes=5), ("a",),
                        np.zeros((4, 1)))
        b = SeriesFrame(datetime(2023, 7, 2), timedelta(minutes=5), ("b",),
                        np.zeros((4, 1)))
        with pytest.raises(IngestError, match="overlap"):
            align([a, b], timedelta(minutes=5))

    def test_finer_requires_aggregation(self):
        fine = SeriesFrame(datetime(2023, 7, 1), timedelta(minutes=5), ("f",),
                           np.arange(12.0).reshape(12, 1))
        with pytest.raises(IngestError, match="aggregation"):
            align([fine], timedelta(minutes=15))
        out = align([fine], timedelta(minutes=15), aggregation="mean")
        assert out.values[:, 0].tolist() == [1.0, 4.0, 7.0, 10.0]

    def test_idempotent_on_aligned_frame(self):
        a = SeriesFrame(datetime(2023, 7, 1), timedelta(minutes=5), ("a", "b"),
                        np.arange(8.0).reshape(4, 2))
        out = align([a], timedelta(minutes=5))
        assert out.start_time == a.start_time
        np.testing.assert_array_equal(out.values, a.values)

    def test_forward_fill_stays_in_observed_range(self):
        hourly = SeriesFrame(datetime(2023, 7, 1, 13), timedelta(hours=1), ("da",),
                             np.array([[40.0], [50.0]]))
        fine = SeriesFrame(datetime(2023, 7, 1, 13), timedelta(minutes=5), ("rt",),
                           np.zeros((24, 1)))
        out = align([fine, hourly], timedelta(minutes=5))
        assert out.values[:, 1].min() >= 40.0
        assert out.values[:, 1].max() <= 50.0


class TestFillGaps:
    def gap_frame(self):
        values = np.array([[10.0], [np.nan], [12.0]])
        return SeriesFrame(datetime(2023, 7, 1), timedelta(minutes=5), ("x",),
                           values, allow_nan=True)

    def test_linear_midpoint(self):
        out = fill_gaps(self.gap_frame(), max_gap=1)
        assert out.values[1, 0] == 11.0

    def test_oversized_gap_lists_range(self):
        values = np.array([[1.0], [np.nan], [np.nan], [4.0]])
        frame = SeriesFrame(datetime(2023, 7, 1), timedelta(minutes=5), ("x",),
                            values, allow_nan=True)
        with pytest.raises(IngestError, match="2023-07-01T00:05:00"):
            fill_gaps(frame, max_gap=1)
        out = fill_gaps(frame, max_gap=2)
        assert out.values[:, 0].tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_no_gaps_is_identity(self):
        frame = SeriesFrame(datetime(2023, 7, 1), timedelta(minutes=5), ("x",),
                            np.ones((5, 1)))
        assert fill_gaps(frame, max_gap=3) is frame

    def test_edge_gap_rejected(self):
        values = np.array([[np.nan], [2.0], [3.0]])
        frame = SeriesFrame(datetime(2023, 7, 1), timedelta(minutes=5), ("x",),
                            values, allow_nan=True)
        with pytest.raises(IngestError, match="edge"):
            fill_gaps(frame, max_gap=5)


def test_presets_are_well_formed():
    for name, schema in SCHEMA_PRESETS.items():
        assert schema.value_columns, name
        assert schema.step > timedelta(0), name
