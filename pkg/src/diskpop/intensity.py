"""Usage-intensity forecasting from the observation window.

The pipeline per dataset: smooth the observed weekly counts with a
Nadaraya-Watson regression over week numbers, pick the kernel bandwidth by
leave-one-out validation, then take a trailing rolling mean and carry its
last value forward as the predicted weekly intensity.

Smoothing uses an RBF kernel ``exp(-(x - x_i)^2 / (2 h^2))`` on the week axis
and includes every point, the evaluation point itself too.  Each smoothed
value is a convex combination of the inputs, so results are clamped to
``[min(y), max(y)]`` to keep that property exact under floating point.

The rolling mean at week ``k`` averages the trailing ``w`` values
``y_{k-w+1} .. y_k``; leading positions with fewer than ``w`` values average
what is available.  The width ``w`` comes from a quantile rule over the
``inter_max`` feature: the smallest integer strictly greater than at least
90% of the observed largest usage gaps, applied per ``nb_peaks`` group when
the group has at least 10 members and globally otherwise.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .catalog import DatasetRecord, SplitConfig
from .features import FeatureVector, extract_corpus_features

DEFAULT_MAX_BANDWIDTH = 30.0

_CHUNK_ROWS = 512


def bandwidth_grid(step: float = 0.5, h_max: float = DEFAULT_MAX_BANDWIDTH) -> np.ndarray:
    """Candidate bandwidths ``step, 2*step, ..., h_max``."""
    if step <= 0 or h_max < step:
        raise ValueError("need 0 < step <= h_max")
    return np.arange(1, int(round(h_max / step)) + 1, dtype=float) * step


def _validate_series(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("series must be a non-empty 1-d array")
    if not np.all(np.isfinite(y)):
        raise ValueError("series values must be finite")
    return y


def _week_distance_sq(n: int) -> np.ndarray:
    x = np.arange(1, n + 1, dtype=float)
    d = x[:, None] - x[None, :]
    return d * d


def nw_smooth(y, h: float) -> np.ndarray:
    """Nadaraya-Watson smoothing of a weekly series with RBF bandwidth ``h``."""
    y = _validate_series(y)
    if not (math.isfinite(h) and h > 0):
        raise ValueError(f"bandwidth must be positive and finite, got {h!r}")
    if y.size == 1:
        return y.copy()
    scale = 2.0 * h * h
    if scale == 0.0:  # h below float underflow: kernel collapses to the identity
        return y.copy()
    kernel = np.exp(-_week_distance_sq(y.size) / scale)
    smoothed = (kernel @ y) / kernel.sum(axis=1)
    return np.clip(smoothed, y.min(), y.max())


def loo_error(y, h: float) -> float:
    """Sum of squared leave-one-out residuals of :func:`nw_smooth` at ``h``."""
    y = _validate_series(y)
    if y.size < 2:
        raise ValueError("leave-one-out validation needs at least 2 points")
    if not (math.isfinite(h) and h > 0):
        raise ValueError(f"bandwidth must be positive and finite, got {h!r}")
    scale = 2.0 * h * h
    if scale == 0.0:  # no off-diagonal weight survives
        return math.inf
    kernel = np.exp(-_week_distance_sq(y.size) / scale)
    np.fill_diagonal(kernel, 0.0)
    denom = kernel.sum(axis=1)
    if np.any(denom == 0.0):
        return math.inf
    residual = (kernel @ y) / denom - y
    return float(residual @ residual)


def select_bandwidth_loo(y, h_grid=None, h_max: float = DEFAULT_MAX_BANDWIDTH) -> float:
    """Bandwidth from ``h_grid`` minimizing the leave-one-out error.

    Ties resolve to the smallest bandwidth.  A constant series gives identical
    (zero) error everywhere, so the smallest grid value is returned outright.
    """
    y = _validate_series(y)
    if y.size < 2:
        raise ValueError("leave-one-out validation needs at least 2 points")
    grid = bandwidth_grid(h_max=h_max) if h_grid is None else np.sort(np.asarray(h_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("bandwidth grid must be non-empty")
    if np.any(~np.isfinite(grid)) or grid[0] <= 0 or grid[-1] > h_max:
        raise ValueError(f"bandwidth grid values must lie in (0, {h_max}]")
    if np.ptp(y) == 0.0:
        return float(grid[0])
    errors = [loo_error(y, h) for h in grid]
    return float(grid[int(np.argmin(errors))])


def rolling_mean(y, w: int) -> np.ndarray:
    """Trailing mean over ``w`` points; shorter leading windows use what exists."""
    y = _validate_series(y)
    if w < 1:
        raise ValueError(f"window width must be at least 1, got {w}")
    totals = np.cumsum(y)
    windowed = totals.copy()
    windowed[w:] -= totals[:-w]
    sizes = np.minimum(np.arange(1, y.size + 1), w)
    return np.clip(windowed / sizes, y.min(), y.max())


def quantile_window_width(gap_values) -> int:
    """Smallest integer strictly greater than at least 90% of ``gap_values``."""
    values = sorted(float(v) for v in gap_values)
    if not values:
        raise ValueError("need at least one gap value")
    rank = -(-9 * len(values) // 10)
    return int(math.floor(values[rank - 1])) + 1


@dataclass(frozen=True)
class WindowWidths:
    """Rolling window width per ``nb_peaks`` group with a global default."""

    by_peaks: dict[int, int]
    default: int

    def width_for(self, nb_peaks: int) -> int:
        return self.by_peaks.get(int(nb_peaks), self.default)

    def __getitem__(self, nb_peaks: int) -> int:
        return self.width_for(nb_peaks)

    def __len__(self) -> int:
        return len(self.by_peaks)


def rolling_window_widths(features: Sequence[FeatureVector], min_group: int = 10) -> WindowWidths:
    """Window width per ``nb_peaks`` group; small groups use the global rule."""
    if not features:
        raise ValueError("need at least one feature vector")
    default = quantile_window_width(fv.inter_max for fv in features)
    groups: dict[int, list[float]] = {}
    for fv in features:
        groups.setdefault(fv.nb_peaks, []).append(fv.inter_max)
    by_peaks = {
        peaks: quantile_window_width(vals) if len(vals) >= min_group else default
        for peaks, vals in sorted(groups.items())
    }
    return WindowWidths(by_peaks, default)


@dataclass(frozen=True)
class SmoothingResult:
    """Smoothed observation series and the bandwidth that produced it."""

    bandwidth: float
    smoothed: np.ndarray


@dataclass(frozen=True)
class IntensityForecast:
    """Forecast for one dataset: chosen bandwidth, window and prediction."""

    dataset_id: str
    bandwidth: float
    window: int
    smoothed: np.ndarray
    rolling: np.ndarray
    predicted: float


def _kernel_stack(n: int, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    d2 = _week_distance_sq(n)
    full = np.exp(-d2[None, :, :] / (2.0 * grid * grid)[:, None, None])
    full_den = full.sum(axis=1)
    loo = full.copy()
    for k in range(grid.size):
        np.fill_diagonal(loo[k], 0.0)
    loo_den = loo.sum(axis=1)
    return full, full_den, loo, loo_den


def _forecast_chunk(
    Y: np.ndarray,
    grid: np.ndarray,
    kernels,
    widths: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    full, full_den, loo, loo_den = kernels
    n_rows, n_obs = Y.shape
    row_min = Y.min(axis=1, keepdims=True)
    row_max = Y.max(axis=1, keepdims=True)

    h_index = np.zeros(n_rows, dtype=np.int64)
    varying = np.flatnonzero((row_max - row_min).ravel() > 0)
    if varying.size:
        Yv = Y[varying]
        errors = np.empty((varying.size, grid.size))
        for k in range(grid.size):
            den = loo_den[k]
            if np.any(den == 0.0):
                errors[:, k] = np.inf
                continue
            resid = (Yv @ loo[k]) / den - Yv
            errors[:, k] = np.einsum("ij,ij->i", resid, resid)
        h_index[varying] = np.argmin(errors, axis=1)

    smoothed = np.empty_like(Y)
    for k in np.unique(h_index):
        rows = h_index == k
        smoothed[rows] = (Y[rows] @ full[k]) / full_den[k]
    np.clip(smoothed, row_min, row_max, out=smoothed)

    rolling = np.empty_like(smoothed)
    positions = np.arange(1, n_obs + 1)
    totals = np.cumsum(smoothed, axis=1)
    for w in np.unique(widths):
        rows = widths == w
        windowed = totals[rows].copy()
        if w < n_obs:
            windowed[:, w:] -= totals[rows][:, :-w]
        rolling[rows] = windowed / np.minimum(positions, w)
    np.clip(rolling, smoothed.min(axis=1, keepdims=True), smoothed.max(axis=1, keepdims=True), out=rolling)

    return grid[h_index], smoothed, rolling, rolling[:, -1]


def predict_intensities(
    records: Sequence[DatasetRecord],
    split: SplitConfig,
    h_grid=None,
    window_widths: WindowWidths | None = None,
    threads: int = 1,
) -> list[IntensityForecast]:
    """Forecast the weekly usage intensity of every record.

    ``window_widths`` defaults to :func:`rolling_window_widths` over the
    records' own features.  Work is split into fixed-size row chunks, so the
    result is identical for every ``threads`` setting.
    """
    if not records:
        raise ValueError("need at least one record")
    if threads < 1:
        raise ValueError(f"threads must be at least 1, got {threads}")
    grid = bandwidth_grid() if h_grid is None else np.sort(np.asarray(h_grid, dtype=float))
    if grid.size == 0 or grid[0] <= 0 or np.any(~np.isfinite(grid)):
        raise ValueError("bandwidth grid values must be positive and finite")
    for record in records:
        if record.history.total_weeks < split.total_weeks:
            raise ValueError(
                f"{record.dataset_id}: history covers {record.history.total_weeks} "
                f"weeks, split needs {split.total_weeks}"
            )
    obs = split.observation_weeks
    Y = np.array([r.history.counts[:obs] for r in records], dtype=float)
    if window_widths is None:
        window_widths = rolling_window_widths(extract_corpus_features(records, split))
    peaks = np.count_nonzero(Y > 0, axis=1)
    widths = np.array([window_widths.width_for(p) for p in peaks], dtype=np.int64)

    kernels = _kernel_stack(obs, grid)
    spans = [(start, min(start + _CHUNK_ROWS, len(records))) for start in range(0, len(records), _CHUNK_ROWS)]

    def run(span):
        lo, hi = span
        return _forecast_chunk(Y[lo:hi], grid, kernels, widths[lo:hi])

    if threads == 1 or len(spans) == 1:
        parts = [run(span) for span in spans]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, spans))

    forecasts = []
    for (lo, hi), (bandwidths, smoothed, rolling, predicted) in zip(spans, parts):
        for i, record in enumerate(records[lo:hi]):
            forecasts.append(
                IntensityForecast(
                    dataset_id=record.dataset_id,
                    bandwidth=float(bandwidths[i]),
                    window=int(widths[lo + i]),
                    smoothed=smoothed[i],
                    rolling=rolling[i],
                    predicted=max(0.0, float(predicted[i])),
                )
            )
    return forecasts


def predict_intensity(
    record: DatasetRecord,
    split: SplitConfig,
    h_grid=None,
    window_widths: WindowWidths | None = None,
) -> IntensityForecast:
    """Forecast a single record; see :func:`predict_intensities`."""
    return predict_intensities([record], split, h_grid=h_grid, window_widths=window_widths)[0]


def write_intensity_csv(forecasts: Sequence[IntensityForecast], path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset_id", "bandwidth_h", "window_w", "predicted_intensity"])
        for fc in forecasts:
            writer.writerow([fc.dataset_id, repr(fc.bandwidth), str(fc.window), repr(fc.predicted)])
