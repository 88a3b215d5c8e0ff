import io

import numpy as np
import pytest

from surropt import (
    ParseError,
    SnapshotKind,
    SubjectRecord,
    TrialDataset,
    ValidationError,
    ingest_csv,
    snapshot,
    to_csv,
)


def small_dataset():
    return TrialDataset.from_arrays(
        arm=[1, 0, 1, 0],
        x=[2.0, 3.5, 1.25, 4.0],
        delta=[1, 0, 1, 1],
        s_time=[0.5, np.nan, 1.25, 2.0],
    )


class TestRecordValidation:
    def test_accepts_well_formed(self):
        SubjectRecord(id="a", arm=1, x=2.0, delta=1, s_time=1.0).validate()
        SubjectRecord(id="b", arm=0, x=2.0, delta=0, s_time=None).validate()

    @pytest.mark.parametrize(
        "kwargs,fragment",
        [
            (dict(id="", arm=1, x=1.0, delta=1), "id"),
            (dict(id="a", arm=2, x=1.0, delta=1), "arm"),
            (dict(id="a", arm=1, x=0.0, delta=1), "x"),
            (dict(id="a", arm=1, x=np.inf, delta=1), "x"),
            (dict(id="a", arm=1, x=1.0, delta=2), "delta"),
            (dict(id="a", arm=1, x=1.0, delta=1, s_time=0.0), "s_time"),
            (dict(id="a", arm=1, x=1.0, delta=1, s_time=1.5), "s_time"),
        ],
    )
    def test_rejects_bad_fields(self, kwargs, fragment):
        kwargs.setdefault("s_time", None)
        with pytest.raises(ValidationError, match=fragment):
            SubjectRecord(**kwargs).validate()

    def test_surrogate_after_follow_up_names_subject(self):
        with pytest.raises(ValidationError, match="'late'"):
            SubjectRecord(id="late", arm=0, x=1.0, delta=0, s_time=2.0).validate()


class TestDataset:
    def test_arrays_and_iteration(self):
        data = small_dataset()
        assert len(data) == 4
        assert data.n_by_arm == {0: 2, 1: 2}
        np.testing.assert_array_equal(data.arm, [1, 0, 1, 0])
        assert np.isnan(data.s[1]) and data.s[0] == 0.5
        assert [r.id for r in data] == ["1", "2", "3", "4"]

    def test_duplicate_id_rejected(self):
        recs = [
            SubjectRecord(id="a", arm=1, x=1.0, delta=1),
            SubjectRecord(id="a", arm=0, x=1.0, delta=1),
        ]
        with pytest.raises(ValidationError, match="duplicate"):
            TrialDataset(recs)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValidationError, match="empty"):
            TrialDataset([])

    def test_single_arm_rejected_with_named_arm(self):
        recs = [SubjectRecord(id=str(i), arm=1, x=1.0, delta=1) for i in range(3)]
        with pytest.raises(ValidationError, match="arm 0 empty"):
            TrialDataset(recs)


class TestCsv:
    def test_round_trip_is_exact(self):
        data = small_dataset()
        buf = io.StringIO()
        to_csv(data, buf)
        text = buf.getvalue()
        again = ingest_csv(text)
        np.testing.assert_array_equal(again.x, data.x)
        np.testing.assert_array_equal(again.delta, data.delta)
        np.testing.assert_array_equal(again.arm, data.arm)
        np.testing.assert_array_equal(np.isnan(again.s), np.isnan(data.s))
        np.testing.assert_array_equal(again.s[~np.isnan(again.s)], data.s[~np.isnan(data.s)])
        buf2 = io.StringIO()
        to_csv(again, buf2)
        assert buf2.getvalue() == text

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "trial.csv"
        to_csv(small_dataset(), str(path))
        assert ingest_csv(str(path)).n == 4

    def test_blank_s_time_is_absent(self):
        data = ingest_csv("id,arm,x,delta,s_time\np,1,2.0,1,\nq,0,3.0,0,1.5\n")
        assert data.records[0].s_time is None
        assert data.records[1].s_time == 1.5

    def test_malformed_row_reports_row_number(self):
        text = "id,arm,x,delta,s_time\np,1,2.0,1,\nq,0,not_a_number,0,\n"
        with pytest.raises(ParseError, match="row 3"):
            ingest_csv(text)

    def test_wrong_header_rejected(self):
        with pytest.raises(ParseError, match="header"):
            ingest_csv("id,arm,time,delta,s_time\np,1,2.0,1,\n")

    def test_empty_source_rejected(self):
        with pytest.raises(ParseError, match="empty"):
            ingest_csv(io.StringIO(""))

    def test_validation_error_names_subject(self):
        text = "id,arm,x,delta,s_time\np,1,2.0,1,\nq,0,1.0,0,5.0\n"
        with pytest.raises(ValidationError, match="'q'"):
            ingest_csv(text)


class TestSnapshot:
    def test_follow_up_ended_by_landmark(self):
        r = SubjectRecord(id="a", arm=1, x=1.5, delta=1, s_time=0.5)
        assert snapshot(r, 2.0).kind is SnapshotKind.PRIMARY_BEFORE_T0

    def test_surrogate_by_landmark_keeps_time(self):
        r = SubjectRecord(id="a", arm=1, x=5.0, delta=0, s_time=1.2)
        snap = snapshot(r, 2.0)
        assert snap.kind is SnapshotKind.SURROGATE_BY_T0
        assert snap.s == 1.2

    def test_neither_by_landmark(self):
        r = SubjectRecord(id="a", arm=1, x=5.0, delta=1, s_time=3.0)
        assert snapshot(r, 2.0).kind is SnapshotKind.NEITHER_BY_T0
        r2 = SubjectRecord(id="b", arm=0, x=5.0, delta=1, s_time=None)
        assert snapshot(r2, 2.0).kind is SnapshotKind.NEITHER_BY_T0

    def test_landmark_must_be_positive(self):
        r = SubjectRecord(id="a", arm=1, x=5.0, delta=1)
        with pytest.raises(ValidationError):
            snapshot(r, 0.0)
