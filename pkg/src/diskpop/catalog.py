"""Dataset catalogue: data model, CSV/JSON round trip, synthetic corpora.

A catalogue couples per-dataset metadata (identity, type tags, replica size
and count) with a weekly usage time series.  Weekly counts are real-valued:
the number of file accesses in a week divided by the number of files in the
dataset, so fractional values are normal.

File formats
------------
CSV (UTF-8, LF line endings, ``.`` decimal separator, header required)::

    dataset_id,origin,configuration,file_type,data_type,event_type,
    creation_week,first_usage_week,last_usage_week,replica_size_gb,
    replicas_on_disk,w1,...,w104

JSON: an array of objects with the same field names and the weekly series
under ``"weeks"``.

``total_disk_gb`` is derived (replica size times replica count) and is never
written; parsers accept an explicit column or key and validate it against the
derived value when present.  Floats are written with ``repr`` so a written
file parses back to bit-identical values.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_TOTAL_WEEKS = 104

ORIGINS = ("prod", "reprocessing", "user")
CONFIGURATIONS = ("run-a", "run-b", "run-c", "run-d")
FILE_TYPES = ("dst", "mdst", "raw", "ntuple")
DATA_TYPES = ("real", "mc")
EVENT_TYPES = ("et-101", "et-102", "et-103", "et-201", "et-202", "et-301", "et-302", "et-401")

_METADATA_COLUMNS = (
    "dataset_id",
    "origin",
    "configuration",
    "file_type",
    "data_type",
    "event_type",
    "creation_week",
    "first_usage_week",
    "last_usage_week",
    "replica_size_gb",
    "replicas_on_disk",
)


class CatalogError(ValueError):
    """Raised for malformed catalogue files or invalid record fields."""


@dataclass(frozen=True)
class UsageHistory:
    """Weekly usage counts, oldest week first.

    The length must equal ``total_weeks`` and every count must be finite and
    non-negative.
    """

    counts: tuple[float, ...]
    total_weeks: int = DEFAULT_TOTAL_WEEKS

    def __post_init__(self) -> None:
        object.__setattr__(self, "counts", tuple(float(c) for c in self.counts))
        if len(self.counts) != self.total_weeks:
            raise CatalogError(
                f"usage history must have exactly {self.total_weeks} weekly "
                f"counts, got {len(self.counts)}"
            )
        for week, value in enumerate(self.counts, start=1):
            if not math.isfinite(value) or value < 0:
                raise CatalogError(
                    f"w{week}: weekly counts must be finite and non-negative, got {value!r}"
                )

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float)


@dataclass(frozen=True)
class DatasetMetadata:
    """Descriptive fields of one dataset.

    ``first_usage_week`` and ``last_usage_week`` are 0 for a dataset that was
    never used.  ``total_disk_gb`` may be omitted; it is then derived as
    ``replica_size_gb * replicas_on_disk``.  An explicit value must match the
    derived one within 1e-6 relative tolerance.
    """

    dataset_id: str
    origin: str
    configuration: str
    file_type: str
    data_type: str
    event_type: str
    creation_week: int
    first_usage_week: int
    last_usage_week: int
    replica_size_gb: float
    replicas_on_disk: int
    total_disk_gb: float | None = None

    def __post_init__(self) -> None:
        if not self.dataset_id:
            raise CatalogError("dataset_id: must be a non-empty string")
        if self.data_type not in DATA_TYPES:
            raise CatalogError(
                f"data_type: must be one of {sorted(DATA_TYPES)}, got {self.data_type!r}"
            )
        if not math.isfinite(self.replica_size_gb) or self.replica_size_gb <= 0:
            raise CatalogError(
                f"replica_size_gb: must be positive and finite, got {self.replica_size_gb!r}"
            )
        if self.replicas_on_disk < 1:
            raise CatalogError(
                f"replicas_on_disk: must be at least 1, got {self.replicas_on_disk!r}"
            )
        if self.creation_week < 1:
            raise CatalogError(f"creation_week: must be at least 1, got {self.creation_week!r}")
        if (self.first_usage_week == 0) != (self.last_usage_week == 0):
            raise CatalogError(
                "first_usage_week/last_usage_week: both must be 0 for a never-used dataset"
            )
        if self.first_usage_week:
            if self.first_usage_week < 1 or self.last_usage_week < self.first_usage_week:
                raise CatalogError(
                    "first_usage_week/last_usage_week: need "
                    f"1 <= first <= last, got {self.first_usage_week}/{self.last_usage_week}"
                )
            if self.creation_week > self.first_usage_week:
                raise CatalogError(
                    f"creation_week: {self.creation_week} is later than "
                    f"first_usage_week {self.first_usage_week}"
                )
        derived = self.replica_size_gb * self.replicas_on_disk
        if self.total_disk_gb is None:
            object.__setattr__(self, "total_disk_gb", derived)
        else:
            scale = max(abs(self.total_disk_gb), abs(derived))
            if abs(self.total_disk_gb - derived) > 1e-6 * scale:
                raise CatalogError(
                    f"total_disk_gb: {self.total_disk_gb!r} does not match "
                    f"replica_size_gb * replicas_on_disk = {derived!r}"
                )


@dataclass(frozen=True)
class DatasetRecord:
    """One catalogue row: metadata plus the weekly usage history."""

    metadata: DatasetMetadata
    history: UsageHistory

    @property
    def dataset_id(self) -> str:
        return self.metadata.dataset_id


@dataclass(frozen=True)
class SplitConfig:
    """Split of the weekly series into an observation and a label window."""

    observation_weeks: int = 78
    label_weeks: int = 26

    def __post_init__(self) -> None:
        if self.observation_weeks < 1 or self.label_weeks < 1:
            raise CatalogError("observation_weeks and label_weeks must both be at least 1")

    @property
    def total_weeks(self) -> int:
        return self.observation_weeks + self.label_weeks


@dataclass(frozen=True)
class PopularMixConfig:
    """Target mixture of a synthetic corpus.

    ``cold_fraction`` of the datasets are generated with no usage at all in
    the label window; the rest stay active.  Fractions must be in [0, 1] and
    sum to 1.
    """

    cold_fraction: float = 0.5
    hot_fraction: float = 0.5

    def __post_init__(self) -> None:
        for name, value in (("cold_fraction", self.cold_fraction), ("hot_fraction", self.hot_fraction)):
            if not 0.0 <= value <= 1.0:
                raise CatalogError(f"{name}: must be within [0, 1], got {value!r}")
        if abs(self.cold_fraction + self.hot_fraction - 1.0) > 1e-9:
            raise CatalogError("mix fractions must sum to 1")


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _resolve_format(path: Path, format: str | None) -> str:
    if format is None:
        suffix = path.suffix.lower().lstrip(".")
        format = suffix if suffix in ("csv", "json") else ""
    format = format.lower()
    if format not in ("csv", "json"):
        raise CatalogError(
            f"cannot determine catalogue format for {path}: pass format='csv' or 'json'"
        )
    return format


def parse_catalog(path, format: str | None = None, total_weeks: int = DEFAULT_TOTAL_WEEKS) -> list[DatasetRecord]:
    """Read a catalogue file, validating schema and every field.

    Malformed input raises :class:`CatalogError` naming the offending line
    (CSV) or entry (JSON) and field.  A missing file raises
    ``FileNotFoundError``.
    """
    path = Path(path)
    fmt = _resolve_format(path, format)
    if not path.is_file():
        raise FileNotFoundError(f"catalog file not found: {path}")
    if fmt == "csv":
        return _parse_csv(path, total_weeks)
    return _parse_json(path, total_weeks)


def _week_columns(total_weeks: int) -> list[str]:
    return [f"w{i}" for i in range(1, total_weeks + 1)]


def _parse_csv(path: Path, total_weeks: int) -> list[DatasetRecord]:
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CatalogError(f"{path}: empty file, expected a header row")
    header = rows[0]
    expected = list(_METADATA_COLUMNS) + _week_columns(total_weeks)
    optional = list(_METADATA_COLUMNS) + ["total_disk_gb"] + _week_columns(total_weeks)
    if header != expected and header != optional:
        found_weeks = sum(1 for name in header if len(name) > 1 and name[0] == "w" and name[1:].isdigit())
        if found_weeks != total_weeks:
            raise CatalogError(
                f"{path}: header has {found_weeks} weekly count columns, "
                f"expected w1..w{total_weeks}"
            )
        raise CatalogError(f"{path}: header does not match the catalogue schema")
    has_total = header == optional
    col = {name: i for i, name in enumerate(header)}

    records: list[DatasetRecord] = []
    seen: set[str] = set()
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise CatalogError(
                f"{path} line {line_no}: expected {len(header)} fields, got {len(row)}"
            )

        def field(name: str) -> str:
            return row[col[name]]

        try:
            counts = tuple(
                _parse_float(field(name), name) for name in _week_columns(total_weeks)
            )
            metadata = DatasetMetadata(
                dataset_id=field("dataset_id"),
                origin=field("origin"),
                configuration=field("configuration"),
                file_type=field("file_type"),
                data_type=field("data_type"),
                event_type=field("event_type"),
                creation_week=_parse_int(field("creation_week"), "creation_week"),
                first_usage_week=_parse_int(field("first_usage_week"), "first_usage_week"),
                last_usage_week=_parse_int(field("last_usage_week"), "last_usage_week"),
                replica_size_gb=_parse_float(field("replica_size_gb"), "replica_size_gb"),
                replicas_on_disk=_parse_int(field("replicas_on_disk"), "replicas_on_disk"),
                total_disk_gb=_parse_float(field("total_disk_gb"), "total_disk_gb") if has_total else None,
            )
            history = UsageHistory(counts, total_weeks)
        except CatalogError as exc:
            raise CatalogError(f"{path} line {line_no}: {exc}") from None
        if metadata.dataset_id in seen:
            raise CatalogError(
                f"{path} line {line_no}: duplicate dataset_id {metadata.dataset_id!r}"
            )
        seen.add(metadata.dataset_id)
        records.append(DatasetRecord(metadata, history))
    return records


def _parse_json(path: Path, total_weeks: int) -> list[DatasetRecord]:
    with path.open(encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CatalogError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(payload, list):
        raise CatalogError(f"{path}: expected a top-level JSON array of records")
    required = set(_METADATA_COLUMNS) | {"weeks"}
    allowed = required | {"total_disk_gb"}
    records: list[DatasetRecord] = []
    seen: set[str] = set()
    for pos, obj in enumerate(payload, start=1):
        label = f"{path} entry {pos}"
        if not isinstance(obj, dict):
            raise CatalogError(f"{label}: expected an object")
        missing = required - obj.keys()
        unknown = obj.keys() - allowed
        if missing:
            raise CatalogError(f"{label}: missing fields {sorted(missing)}")
        if unknown:
            raise CatalogError(f"{label}: unknown fields {sorted(unknown)}")
        weeks = obj["weeks"]
        if not isinstance(weeks, list) or len(weeks) != total_weeks:
            raise CatalogError(f"{label}: 'weeks' must hold exactly {total_weeks} counts")
        try:
            metadata = DatasetMetadata(
                dataset_id=_expect_str(obj, "dataset_id"),
                origin=_expect_str(obj, "origin"),
                configuration=_expect_str(obj, "configuration"),
                file_type=_expect_str(obj, "file_type"),
                data_type=_expect_str(obj, "data_type"),
                event_type=_expect_str(obj, "event_type"),
                creation_week=_expect_int(obj, "creation_week"),
                first_usage_week=_expect_int(obj, "first_usage_week"),
                last_usage_week=_expect_int(obj, "last_usage_week"),
                replica_size_gb=_expect_float(obj, "replica_size_gb"),
                replicas_on_disk=_expect_int(obj, "replicas_on_disk"),
                total_disk_gb=_expect_float(obj, "total_disk_gb") if "total_disk_gb" in obj else None,
            )
            history = UsageHistory(tuple(float(w) for w in weeks), total_weeks)
        except (CatalogError, TypeError, ValueError) as exc:
            raise CatalogError(f"{label}: {exc}") from None
        if metadata.dataset_id in seen:
            raise CatalogError(f"{label}: duplicate dataset_id {metadata.dataset_id!r}")
        seen.add(metadata.dataset_id)
        records.append(DatasetRecord(metadata, history))
    return records


def _parse_int(text: str, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise CatalogError(f"{name}: expected an integer, got {text!r}") from None


def _parse_float(text: str, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CatalogError(f"{name}: expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise CatalogError(f"{name}: expected a finite number, got {text!r}")
    return value


def _expect_str(obj: dict, name: str) -> str:
    value = obj[name]
    if not isinstance(value, str):
        raise CatalogError(f"{name}: expected a string, got {value!r}")
    return value


def _expect_int(obj: dict, name: str) -> int:
    value = obj[name]
    if isinstance(value, bool) or not isinstance(value, int):
        raise CatalogError(f"{name}: expected an integer, got {value!r}")
    return value


def _expect_float(obj: dict, name: str) -> float:
    value = obj[name]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CatalogError(f"{name}: expected a number, got {value!r}")
    return float(value)


def write_catalog(records: Sequence[DatasetRecord], path, format: str | None = None) -> None:
    """Write records to CSV or JSON; the output parses back bit-identically."""
    path = Path(path)
    fmt = _resolve_format(path, format)
    ids = set()
    for record in records:
        if record.dataset_id in ids:
            raise CatalogError(f"duplicate dataset_id {record.dataset_id!r}")
        ids.add(record.dataset_id)
    if fmt == "csv":
        _write_csv(records, path)
    else:
        _write_json(records, path)


def _metadata_values(metadata: DatasetMetadata) -> list:
    return [
        metadata.dataset_id,
        metadata.origin,
        metadata.configuration,
        metadata.file_type,
        metadata.data_type,
        metadata.event_type,
        metadata.creation_week,
        metadata.first_usage_week,
        metadata.last_usage_week,
        metadata.replica_size_gb,
        metadata.replicas_on_disk,
    ]


def _write_csv(records: Sequence[DatasetRecord], path: Path) -> None:
    total_weeks = records[0].history.total_weeks if records else DEFAULT_TOTAL_WEEKS
    header = list(_METADATA_COLUMNS) + _week_columns(total_weeks)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for record in records:
            values = _metadata_values(record.metadata) + list(record.history.counts)
            writer.writerow([_format_value(v) for v in values])


def _write_json(records: Sequence[DatasetRecord], path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write("[\n")
        for pos, record in enumerate(records):
            obj = dict(zip(_METADATA_COLUMNS, _metadata_values(record.metadata)))
            obj["weeks"] = list(record.history.counts)
            tail = "," if pos + 1 < len(records) else ""
            fh.write("  " + json.dumps(obj) + tail + "\n")
        fh.write("]\n")


def generate_synthetic_corpus(
    n: int,
    seed: int,
    mix: PopularMixConfig | None = None,
    total_weeks: int = DEFAULT_TOTAL_WEEKS,
    label_weeks: int = 26,
) -> list[DatasetRecord]:
    """Generate a deterministic synthetic catalogue with a controlled mixture.

    Cold datasets follow an exponentially decaying access rate that is cut off
    no later than the end of the observation window, so they have no usage in
    the final ``label_weeks`` weeks.  Hot datasets keep a stationary noisy
    rate, a short-period bursty one, or a long-dormancy cycle (reactivation
    gaps longer than the label window, so a recency rule misjudges them even
    though the cycle is visible in the observation window).  Weekly counts are
    Poisson draws scaled by a per-dataset normalization factor, hence
    real-valued.  Long-dormancy datasets whose next burst happens to fall
    beyond the series end come out genuinely unpopular, so the realized label
    mix can drift about a point above ``cold_fraction``.

    The same ``(n, seed, mix)`` always yields the same records.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if not 1 <= label_weeks < total_weeks:
        raise ValueError("need 1 <= label_weeks < total_weeks")
    mix = mix if mix is not None else PopularMixConfig()
    obs_weeks = total_weeks - label_weeks

    rng = np.random.default_rng(seed)
    n_cold = int(round(n * mix.cold_fraction))
    cold_flags = np.zeros(n, dtype=bool)
    cold_flags[:n_cold] = True
    rng.shuffle(cold_flags)

    weeks = np.arange(1, total_weeks + 1)
    records = []
    for idx in range(n):
        dataset_id = f"ds{idx:06d}"
        origin = str(rng.choice(ORIGINS, p=(0.5, 0.3, 0.2)))
        configuration = str(rng.choice(CONFIGURATIONS))
        file_type = str(rng.choice(FILE_TYPES, p=(0.4, 0.3, 0.2, 0.1)))
        data_type = str(rng.choice(DATA_TYPES, p=(0.6, 0.4)))
        event_type = str(rng.choice(EVENT_TYPES))
        creation_week = int(rng.integers(1, 31))
        replica_size_gb = round(float(np.clip(rng.lognormal(math.log(30.0), 1.4), 0.1, 5000.0)), 3)
        replicas_on_disk = int(rng.choice(4, p=(0.4, 0.3, 0.2, 0.1))) + 1
        scale = round(float(rng.uniform(0.05, 1.5)), 2)

        if cold_flags[idx]:
            start = min(creation_week + int(rng.integers(0, 26)), obs_weeks - 8)
            cutoff = int(rng.integers(start, obs_weeks + 1))
            tau = rng.uniform(2.0, 18.0)
            r0 = float(np.clip(rng.lognormal(math.log(3.0), 0.9), 0.05, 60.0))
            rate = np.where(
                (weeks >= start) & (weeks <= cutoff),
                r0 * np.exp(-(weeks - start) / tau),
                0.0,
            )
        else:
            style = rng.random()
            if style < 0.15:
                start = creation_week + int(rng.integers(0, 8))
                period = int(rng.integers(28, 45))
                burst_len = int(rng.integers(2, 5))
                peak = float(np.clip(rng.lognormal(math.log(8.0), 0.8), 4.0, 300.0))
                in_burst = (weeks >= start) & (((weeks - start) % period) < burst_len)
                rate = np.where(in_burst, peak, 0.0)
            elif style < 0.45:
                start = creation_week + int(rng.integers(0, 16))
                period = int(rng.integers(5, 25))
                burst_len = int(rng.integers(1, min(4, period - 1) + 1))
                peak = float(np.clip(rng.lognormal(math.log(6.0), 1.0), 3.0, 400.0))
                base = rng.uniform(0.0, 0.2)
                in_burst = (weeks >= start) & (((weeks - start) % period) < burst_len)
                rate = np.where(weeks >= start, base + np.where(in_burst, peak, 0.0), 0.0)
            else:
                start = creation_week + int(rng.integers(0, 16))
                lam = float(np.clip(rng.lognormal(math.log(3.0), 1.6), 0.3, 1500.0))
                wobble = rng.lognormal(0.0, 0.3, size=total_weeks)
                rate = np.where(weeks >= start, lam * wobble, 0.0)

        counts = rng.poisson(rate).astype(float) * scale
        nonzero = np.flatnonzero(counts > 0)
        first_usage = int(nonzero[0]) + 1 if nonzero.size else 0
        last_usage = int(nonzero[-1]) + 1 if nonzero.size else 0
        metadata = DatasetMetadata(
            dataset_id=dataset_id,
            origin=origin,
            configuration=configuration,
            file_type=file_type,
            data_type=data_type,
            event_type=event_type,
            creation_week=creation_week,
            first_usage_week=first_usage,
            last_usage_week=last_usage,
            replica_size_gb=replica_size_gb,
            replicas_on_disk=replicas_on_disk,
        )
        records.append(DatasetRecord(metadata, UsageHistory(tuple(counts), total_weeks)))
    return records
