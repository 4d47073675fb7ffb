"""Questionnaire data model, CSV I/O and the internal-consistency statistic.

A respondent answers 15 five-level Likert items (coded 1..5) and carries 12
coded social/travel attributes. Datasets are immutable once built.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import DataError, ParseError, UndefinedStatisticError, ValidationError

N_ITEMS = 15
LIKERT_RANGE = (1, 5)
ITEM_NAMES = tuple(f"q{i}" for i in range(1, N_ITEMS + 1))

# Admissible code ranges of the explanatory attributes, in column order.
ATTRIBUTE_RANGES: dict[str, tuple[int, int]] = {
    "gender": (1, 2),
    "age": (1, 6),
    "education": (1, 7),
    "address": (1, 6),
    "career": (1, 14),
    "income": (1, 5),
    "media": (1, 5),
    "card": (1, 4),
    "kids": (1, 5),
    "mode": (1, 6),
    "distance": (1, 5),
    "time": (1, 5),
}
ATTRIBUTE_NAMES = tuple(ATTRIBUTE_RANGES)
LABEL_RANGE = (1, 3)

# Default item subset for the reliability check: the 13 cause-variable items.
CAUSE_ITEMS = tuple(range(1, 14))
ALPHA_THRESHOLD = 0.7

HEADER = ITEM_NAMES + ATTRIBUTE_NAMES


@dataclass(frozen=True)
class LikertVector:
    items: tuple[int, ...]

    def __post_init__(self):
        items = tuple(int(v) for v in self.items)
        object.__setattr__(self, "items", items)
        if len(items) != N_ITEMS:
            raise ValidationError(
                f"Likert vector needs {N_ITEMS} items, got {len(items)}",
                field="likert",
                value=len(items),
            )
        lo, hi = LIKERT_RANGE
        for name, v in zip(ITEM_NAMES, items):
            if not lo <= v <= hi:
                raise ValidationError(
                    f"{name} out of range {{{lo}..{hi}}}: {v}", field=name, value=v
                )

    def __len__(self):
        return N_ITEMS

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i):
        return self.items[i]


@dataclass(frozen=True)
class RespondentProfile:
    gender: int
    age: int
    education: int
    address: int
    career: int
    income: int
    media: int
    card: int
    kids: int
    mode: int
    distance: int
    time: int

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(getattr(self, name) for name in ATTRIBUTE_NAMES)

    @classmethod
    def from_sequence(cls, values: Sequence[int]) -> "RespondentProfile":
        if len(values) != len(ATTRIBUTE_NAMES):
            raise ValueError(
                f"expected {len(ATTRIBUTE_NAMES)} attribute codes, got {len(values)}"
            )
        return cls(*(int(v) for v in values))


@dataclass(frozen=True)
class Violation:
    field: str
    value: int
    low: int
    high: int

    def __str__(self):
        return f"{self.field} out of range {{{self.low}..{self.high}}}: {self.value}"


@dataclass(frozen=True)
class SurveyRecord:
    id: int
    likert: LikertVector
    profile: RespondentProfile
    planted_label: int | None = None


@dataclass(frozen=True)
class Dataset:
    """Ordered, immutable collection of survey records.

    ``explicit_ids`` and ``comment`` only matter for serialization: they let
    :func:`write_dataset` reproduce the file the dataset was parsed from.
    """

    records: tuple[SurveyRecord, ...]
    source: str = ""
    explicit_ids: bool = False
    comment: str | None = None
    _ids: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        ids = [r.id for r in records]
        unique = frozenset(ids)
        if len(unique) != len(ids):
            raise DataError("record ids must be unique within a dataset")
        object.__setattr__(self, "_ids", unique)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @cached_property
    def likert_matrix(self) -> np.ndarray:
        """(n, 15) int64 array of item responses."""
        m = np.array([r.likert.items for r in self.records], dtype=np.int64)
        m.setflags(write=False)
        return m.reshape(len(self.records), N_ITEMS)

    @cached_property
    def profile_matrix(self) -> np.ndarray:
        """(n, 12) int64 array of attribute codes."""
        m = np.array([r.profile.as_tuple() for r in self.records], dtype=np.int64)
        m.setflags(write=False)
        return m.reshape(len(self.records), len(ATTRIBUTE_NAMES))

    @property
    def has_labels(self) -> bool:
        return bool(self.records) and all(
            r.planted_label is not None for r in self.records
        )

    @cached_property
    def planted_labels(self) -> np.ndarray | None:
        if not self.has_labels:
            return None
        return np.array([r.planted_label for r in self.records], dtype=np.int64)


def validate_record(record: SurveyRecord) -> list[Violation]:
    """Return one violation per out-of-range field, in column order.

    Likert items are range-checked on construction; this re-checks them so a
    record built with ``object.__new__`` tricks still reports faithfully.
    """
    out = []
    lo, hi = LIKERT_RANGE
    for name, v in zip(ITEM_NAMES, record.likert.items):
        if not lo <= v <= hi:
            out.append(Violation(name, v, lo, hi))
    for name, (lo, hi) in ATTRIBUTE_RANGES.items():
        v = getattr(record.profile, name)
        if not lo <= v <= hi:
            out.append(Violation(name, v, lo, hi))
    if record.planted_label is not None:
        lo, hi = LABEL_RANGE
        if not lo <= record.planted_label <= hi:
            out.append(Violation("label", record.planted_label, lo, hi))
    return out


def _parse_int(cell: str, row: int, column: str) -> int:
    try:
        return int(cell.strip(), 10)
    except ValueError:
        raise ParseError(
            f"row {row}, column {column}: non-integer cell {cell!r}",
            row=row,
            column=column,
        ) from None


def parse_dataset(stream: TextIO | str, source: str = "<stream>") -> Dataset:
    """Read a survey CSV.

    The header must be ``q1..q15,gender,...,time`` with an optional leading
    ``id`` and an optional trailing ``label`` column. A first line starting
    with ``#`` is kept as a comment. Row numbers in errors are 1-based data
    rows (header excluded).
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    text = stream.read()
    lines = text.splitlines()
    comment = None
    if lines and lines[0].startswith("#"):
        comment = lines[0]
        lines = lines[1:]
    reader = csv.reader(lines)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("missing header") from None

    explicit_ids = bool(header) and header[0] == "id"
    has_label = bool(header) and header[-1] == "label"
    core = header[1 if explicit_ids else 0 : len(header) - 1 if has_label else None]
    if tuple(core) != HEADER:
        raise ParseError(f"unexpected header: {','.join(header)}")

    records = []
    for row_no, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise ParseError(
                f"row {row_no}: expected {len(header)} columns, got {len(row)}",
                row=row_no,
            )
        values = [_parse_int(c, row_no, name) for c, name in zip(row, header)]
        rid = values.pop(0) if explicit_ids else len(records)
        label = values.pop() if has_label else None
        if rid < 0:
            raise ValidationError(f"row {row_no}: id must be non-negative", "id", rid)
        try:
            likert = LikertVector(tuple(values[:N_ITEMS]))
        except ValidationError as exc:
            raise ValidationError(f"row {row_no}: {exc}", exc.field, exc.value) from None
        profile = RespondentProfile.from_sequence(values[N_ITEMS:])
        record = SurveyRecord(rid, likert, profile, label)
        violations = validate_record(record)
        if violations:
            v = violations[0]
            raise ValidationError(f"row {row_no}: {v}", field=v.field, value=v.value)
        records.append(record)

    if not records:
        raise DataError("empty dataset")
    return Dataset(tuple(records), source=source, explicit_ids=explicit_ids, comment=comment)


def read_dataset(path) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_dataset(fh, source=str(path))


def dataset_to_csv(dataset: Dataset, include_ids: bool | None = None) -> str:
    if include_ids is None:
        include_ids = dataset.explicit_ids
    include_label = dataset.has_labels
    buf = io.StringIO()
    if dataset.comment is not None:
        buf.write(dataset.comment + "\n")
    header = list(HEADER)
    if include_ids:
        header.insert(0, "id")
    if include_label:
        header.append("label")
    buf.write(",".join(header) + "\n")
    for r in dataset.records:
        cells = list(r.likert.items) + list(r.profile.as_tuple())
        if include_ids:
            cells.insert(0, r.id)
        if include_label:
            cells.append(r.planted_label)
        buf.write(",".join(str(c) for c in cells) + "\n")
    return buf.getvalue()


def write_dataset(dataset: Dataset, path, include_ids: bool | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(dataset_to_csv(dataset, include_ids))


def make_dataset(
    likert: Iterable[Sequence[int]],
    profiles: Iterable[Sequence[int]] | None = None,
    labels: Iterable[int | None] | None = None,
    source: str = "",
) -> Dataset:
    """Build a dataset from plain arrays; missing profiles default to all-ones."""
    likert = [tuple(int(v) for v in row) for row in likert]
    n = len(likert)
    profiles = (
        [tuple(int(v) for v in p) for p in profiles]
        if profiles is not None
        else [(1,) * len(ATTRIBUTE_NAMES)] * n
    )
    labels = list(labels) if labels is not None else [None] * n
    if not (len(profiles) == len(labels) == n):
        raise ValueError("likert, profiles and labels must have equal length")
    records = tuple(
        SurveyRecord(
            i,
            LikertVector(lk),
            RespondentProfile.from_sequence(p),
            None if lab is None else int(lab),
        )
        for i, (lk, p, lab) in enumerate(zip(likert, profiles, labels))
    )
    return Dataset(records, source=source)


def _scaled_variance(values: list[int]) -> int:
    """n * (n - 1) * sample variance, exact for integer data."""
    n = len(values)
    return n * sum(v * v for v in values) - sum(values) ** 2


def cronbach_alpha(dataset: Dataset | np.ndarray, item_indices: Sequence[int] = CAUSE_ITEMS) -> float:
    """Cronbach's alpha over the 1-based ``item_indices``.

    Responses are integers, so the variance ratio is evaluated as an exact
    fraction; the result is order-independent and exactly 1.0 for perfectly
    correlated items.
    """
    scores = dataset.likert_matrix if isinstance(dataset, Dataset) else np.asarray(dataset)
    if scores.ndim != 2:
        raise DataError("cronbach_alpha expects an (n, items) matrix")
    cols = sorted(set(int(i) for i in item_indices))
    if len(cols) < 2:
        raise DataError("cronbach_alpha needs at least 2 items")
    if any(not 1 <= c <= scores.shape[1] for c in cols):
        raise DataError(f"item indices must lie in 1..{scores.shape[1]}")
    if scores.shape[0] < 2:
        raise DataError("cronbach_alpha needs at least 2 records")
    x = scores[:, [c - 1 for c in cols]]
    if not np.array_equal(x, np.round(x)):
        raise DataError("cronbach_alpha expects integer item codes")
    x = x.astype(np.int64).tolist()
    k = len(cols)
    totals = [sum(row) for row in x]
    total_var = _scaled_variance(totals)
    if total_var == 0:
        raise UndefinedStatisticError("cronbach_alpha undefined: total-score variance is 0")
    item_var = sum(_scaled_variance([row[j] for row in x]) for j in range(k))
    return float(Fraction(k, k - 1) * (1 - Fraction(item_var, total_var)))
