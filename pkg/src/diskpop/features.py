"""Shape features and the binary popularity label of a usage series.

The label is 1 (unpopular) when a dataset has zero usage throughout the label
window, 0 (popular) otherwise.  All features are computed strictly from the
observation window, so a feature vector never encodes the outcome it is used
to predict.  In particular the first/last usage week channels are recomputed
from the observed weeks instead of trusting catalogue metadata, which may
cover the whole series.

With ``U`` the 1-based indices of nonzero observed weeks, ``y_t`` the counts
and ``gaps`` the differences of consecutive elements of ``U``:

* ``nb_peaks``          number of nonzero weeks, ``|U|``
* ``last_zeros``        trailing weeks with zero usage
* ``inter_max/mean/std``  max, mean and population std of ``gaps``
* ``inter_rel``         ``inter_std / inter_mean``
* ``mass_center``       ``sum(t * y_t) / sum(y_t)``
* ``mass_center_sqrt``  ``sum(t * sqrt(y_t)) / sum(sqrt(y_t))``
* ``mass_moment``       ``sum(t^2 * y_t) / sum(y_t)``
* ``r_moment``          ``sum(t * y_t^2) / sum(y_t^2)``

Gap features are 0 when fewer than two weeks are nonzero; mass features are 0
for an all-zero window.  Categorical metadata is embedded as a keyed-hash code
in [0, 1), stable across processes and releases of this package.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .catalog import DatasetMetadata, DatasetRecord, SplitConfig, UsageHistory

LABEL_POPULAR = 0
LABEL_UNPOPULAR = 1

SERIES_FEATURE_NAMES = (
    "nb_peaks",
    "last_zeros",
    "inter_max",
    "inter_mean",
    "inter_std",
    "inter_rel",
    "mass_center",
    "mass_center_sqrt",
    "mass_moment",
    "r_moment",
)

METADATA_FEATURE_NAMES = (
    "origin_code",
    "configuration_code",
    "file_type_code",
    "data_type_code",
    "event_type_code",
    "creation_week",
    "first_obs_usage_week",
    "last_obs_usage_week",
    "replica_size_gb",
    "replicas_on_disk",
)

FEATURE_NAMES = SERIES_FEATURE_NAMES + METADATA_FEATURE_NAMES

_HASH_KEY = b"diskpop-meta-v1"


def _category_code(field: str, value: str) -> float:
    """Deterministic embedding of a categorical value into [0, 1)."""
    digest = hashlib.blake2b(
        f"{field}={value}".encode("utf-8"), key=_HASH_KEY, digest_size=8
    ).digest()
    return int.from_bytes(digest, "big") / 2.0**64


@dataclass(frozen=True)
class FeatureVector:
    """Feature values for one dataset, plus its label."""

    dataset_id: str
    nb_peaks: int
    last_zeros: int
    inter_max: float
    inter_mean: float
    inter_std: float
    inter_rel: float
    mass_center: float
    mass_center_sqrt: float
    mass_moment: float
    r_moment: float
    encoded_metadata: tuple[float, ...]
    label: int

    def to_array(self) -> np.ndarray:
        """Feature values ordered as :data:`FEATURE_NAMES`."""
        return np.array(
            (
                float(self.nb_peaks),
                float(self.last_zeros),
                self.inter_max,
                self.inter_mean,
                self.inter_std,
                self.inter_rel,
                self.mass_center,
                self.mass_center_sqrt,
                self.mass_moment,
                self.r_moment,
            )
            + self.encoded_metadata,
            dtype=float,
        )


def compute_label(history: UsageHistory, split: SplitConfig) -> int:
    """1 iff every count in the label window is zero, else 0."""
    if history.total_weeks < split.total_weeks:
        raise ValueError(
            f"history covers {history.total_weeks} weeks, split needs {split.total_weeks}"
        )
    window = history.counts[split.observation_weeks : split.total_weeks]
    return LABEL_UNPOPULAR if all(c == 0 for c in window) else LABEL_POPULAR


def _encode_metadata(metadata: DatasetMetadata, nonzero_weeks: np.ndarray) -> tuple[float, ...]:
    first_obs = float(nonzero_weeks[0]) if nonzero_weeks.size else 0.0
    last_obs = float(nonzero_weeks[-1]) if nonzero_weeks.size else 0.0
    return (
        _category_code("origin", metadata.origin),
        _category_code("configuration", metadata.configuration),
        _category_code("file_type", metadata.file_type),
        _category_code("data_type", metadata.data_type),
        _category_code("event_type", metadata.event_type),
        float(metadata.creation_week),
        first_obs,
        last_obs,
        float(metadata.replica_size_gb),
        float(metadata.replicas_on_disk),
    )


def extract_features(
    history: UsageHistory, metadata: DatasetMetadata, split: SplitConfig
) -> FeatureVector:
    """Compute the feature vector of one dataset.

    Reads only ``history.counts[:split.observation_weeks]`` apart from the
    label.
    """
    obs = np.asarray(history.counts[: split.observation_weeks], dtype=float)
    if obs.size < split.observation_weeks:
        raise ValueError(
            f"history covers {history.total_weeks} weeks, split needs {split.total_weeks}"
        )
    nonzero = np.flatnonzero(obs > 0) + 1

    nb_peaks = int(nonzero.size)
    last_zeros = int(split.observation_weeks - nonzero[-1]) if nonzero.size else int(split.observation_weeks)

    if nonzero.size >= 2:
        gaps = np.diff(nonzero).astype(float)
        inter_max = float(gaps.max())
        inter_mean = float(gaps.mean())
        inter_std = float(gaps.std())
        inter_rel = inter_std / inter_mean if inter_mean > 0 else 0.0
    else:
        inter_max = inter_mean = inter_std = inter_rel = 0.0

    if nonzero.size:
        t = nonzero.astype(float)
        y = obs[nonzero - 1]
        mass = y.sum()
        sqrt_y = np.sqrt(y)
        y2 = y * y
        mass_center = float((t * y).sum() / mass)
        mass_center_sqrt = float((t * sqrt_y).sum() / sqrt_y.sum())
        mass_moment = float((t * t * y).sum() / mass)
        r_moment = float((t * y2).sum() / y2.sum())
    else:
        mass_center = mass_center_sqrt = mass_moment = r_moment = 0.0

    return FeatureVector(
        dataset_id=metadata.dataset_id,
        nb_peaks=nb_peaks,
        last_zeros=last_zeros,
        inter_max=inter_max,
        inter_mean=inter_mean,
        inter_std=inter_std,
        inter_rel=inter_rel,
        mass_center=mass_center,
        mass_center_sqrt=mass_center_sqrt,
        mass_moment=mass_moment,
        r_moment=r_moment,
        encoded_metadata=_encode_metadata(metadata, nonzero),
        label=compute_label(history, split),
    )


def extract_corpus_features(
    records: Sequence[DatasetRecord], split: SplitConfig
) -> list[FeatureVector]:
    return [extract_features(r.history, r.metadata, split) for r in records]


def feature_matrix(features: Sequence[FeatureVector]) -> np.ndarray:
    """Stack feature vectors into an (n, len(FEATURE_NAMES)) float matrix."""
    if not features:
        return np.empty((0, len(FEATURE_NAMES)))
    return np.stack([fv.to_array() for fv in features])


def labels_array(features: Sequence[FeatureVector]) -> np.ndarray:
    return np.array([fv.label for fv in features], dtype=float)


def write_feature_csv(features: Sequence[FeatureVector], path) -> None:
    """Write one row per dataset: id, the feature columns, then the label."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset_id", *FEATURE_NAMES, "label"])
        for fv in features:
            row = [fv.dataset_id]
            row.extend(repr(v) for v in fv.to_array().tolist())
            row.append(str(fv.label))
            writer.writerow(row)
