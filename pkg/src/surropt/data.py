"""Trial data containers, CSV ingest, and landmark snapshots.

Each subject carries a follow-up time ``x`` (event or censoring, whichever
came first), an event indicator ``delta``, a treatment arm, and optionally
the time ``s_time`` at which the intermediate (surrogate) event was observed.
``s_time`` is present only when the surrogate occurred during follow-up, so
``s_time <= x`` always holds.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

CSV_COLUMNS = ("id", "arm", "x", "delta", "s_time")


@dataclass(frozen=True)
class SubjectRecord:
    """One subject: identifier, arm (0 or 1), follow-up, event flag, surrogate time."""

    id: str
    arm: int
    x: float
    delta: int
    s_time: float | None = None

    def validate(self):
        if not self.id:
            raise ValidationError("subject id must be nonempty")
        if self.arm not in (0, 1):
            raise ValidationError(f"subject {self.id!r}: arm must be 0 or 1, got {self.arm!r}")
        if not (np.isfinite(self.x) and self.x > 0):
            raise ValidationError(f"subject {self.id!r}: x must be positive and finite, got {self.x!r}")
        if self.delta not in (0, 1):
            raise ValidationError(f"subject {self.id!r}: delta must be 0 or 1, got {self.delta!r}")
        if self.s_time is not None:
            if not (np.isfinite(self.s_time) and 0 < self.s_time <= self.x):
                raise ValidationError(
                    f"subject {self.id!r}: s_time must satisfy 0 < s_time <= x, got {self.s_time!r}"
                )


class TrialDataset:
    """Immutable ordered collection of subject records with cached arrays.

    Parameters
    ----------
    records : iterable of SubjectRecord
        Row order is preserved. Ids must be unique and both arms nonempty.
    """

    def __init__(self, records):
        self.records = tuple(records)
        if not self.records:
            raise ValidationError("dataset is empty")
        seen = set()
        for r in self.records:
            r.validate()
            if r.id in seen:
                raise ValidationError(f"duplicate subject id {r.id!r}")
            seen.add(r.id)
        self.x = np.array([r.x for r in self.records], dtype=float)
        self.delta = np.array([r.delta for r in self.records], dtype=np.int8)
        self.arm = np.array([r.arm for r in self.records], dtype=np.int8)
        self.s = np.array(
            [np.nan if r.s_time is None else r.s_time for r in self.records], dtype=float
        )
        self.n = len(self.records)
        self.n_by_arm = {0: int(np.sum(self.arm == 0)), 1: int(np.sum(self.arm == 1))}
        for a in (0, 1):
            if self.n_by_arm[a] == 0:
                raise ValidationError(f"arm {a} empty")

    def __len__(self):
        return self.n

    def __iter__(self):
        return iter(self.records)

    @classmethod
    def from_arrays(cls, arm, x, delta, s_time, ids=None):
        """Build a dataset from parallel arrays; NaN in s_time means absent."""
        arm = np.asarray(arm)
        x = np.asarray(x, dtype=float)
        delta = np.asarray(delta)
        s_time = np.asarray(s_time, dtype=float)
        if ids is None:
            ids = [str(i + 1) for i in range(len(x))]
        recs = [
            SubjectRecord(
                id=str(ids[i]),
                arm=int(arm[i]),
                x=float(x[i]),
                delta=int(delta[i]),
                s_time=None if np.isnan(s_time[i]) else float(s_time[i]),
            )
            for i in range(len(x))
        ]
        return cls(recs)


class SnapshotKind(enum.Enum):
    """Mutually exclusive summary of what is known about a subject at the landmark."""

    PRIMARY_BEFORE_T0 = "primary_before_t0"
    SURROGATE_BY_T0 = "surrogate_by_t0"
    NEITHER_BY_T0 = "neither_by_t0"


@dataclass(frozen=True)
class SurrogateSnapshot:
    """Landmark-time summary of one subject.

    ``s`` is set only for kind SURROGATE_BY_T0 and holds the surrogate time.
    """

    kind: SnapshotKind
    s: float | None = None

    def __post_init__(self):
        if (self.kind is SnapshotKind.SURROGATE_BY_T0) != (self.s is not None):
            raise ValidationError("snapshot payload s must be present exactly for SURROGATE_BY_T0")


def snapshot(record, t0):
    """Classify one subject's follow-up relative to the landmark ``t0``.

    Returns PRIMARY_BEFORE_T0 when follow-up ended by ``t0`` (event or
    censoring), SURROGATE_BY_T0 with the surrogate time when the subject was
    still under observation past ``t0`` and the surrogate occurred by ``t0``,
    and NEITHER_BY_T0 otherwise.
    """
    if t0 <= 0:
        raise ValidationError(f"t0 must be positive, got {t0!r}")
    if record.x <= t0:
        return SurrogateSnapshot(SnapshotKind.PRIMARY_BEFORE_T0)
    if record.s_time is not None and record.s_time <= t0:
        return SurrogateSnapshot(SnapshotKind.SURROGATE_BY_T0, s=record.s_time)
    return SurrogateSnapshot(SnapshotKind.NEITHER_BY_T0)


def _fmt(v):
    return "" if v is None else repr(float(v))


def to_csv(data, dest):
    """Write a dataset in the ingest schema. ``dest`` is a path or writable text file."""
    own = isinstance(dest, (str, Path))
    fh = open(dest, "w", newline="") if own else dest
    try:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in data.records:
            w.writerow([r.id, r.arm, repr(float(r.x)), r.delta, _fmt(r.s_time)])
    finally:
        if own:
            fh.close()


def _parse_row(row, lineno):
    if len(row) != 5:
        raise ParseError(f"row {lineno}: expected 5 fields, got {len(row)}", row=lineno)
    sid, arm_s, x_s, delta_s, s_s = (f.strip() for f in row)
    try:
        arm = int(arm_s)
        x = float(x_s)
        delta = int(delta_s)
        s_time = None if s_s == "" else float(s_s)
    except ValueError as exc:
        raise ParseError(f"row {lineno}: {exc}", row=lineno) from None
    return SubjectRecord(id=sid, arm=arm, x=x, delta=delta, s_time=s_time)


def ingest_csv(source):
    """Read a dataset from CSV with header ``id,arm,x,delta,s_time``.

    ``source`` may be a path, a text file object, or a CSV string. Malformed
    rows raise ParseError with the line number; invariant violations raise
    ValidationError naming the subject.
    """
    if isinstance(source, (str, Path)) and "\n" not in str(source):
        with open(source, newline="") as fh:
            return _ingest(fh)
    if isinstance(source, str):
        return _ingest(io.StringIO(source))
    return _ingest(source)


def _ingest(fh):
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty CSV source", row=1) from None
    if tuple(h.strip() for h in header) != CSV_COLUMNS:
        raise ParseError(
            f"row 1: header must be exactly {','.join(CSV_COLUMNS)}", row=1
        )
    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        records.append(_parse_row(row, lineno))
    return TrialDataset(records)
