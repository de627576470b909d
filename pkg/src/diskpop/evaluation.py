"""Replay evaluation of placement policies on the held-out label window.

The quality of a plan is measured by replaying the label window: every
dataset's true average weekly downloads ``I*`` (label-window total divided by
the window length) feeds a download-time model

    T = sum I*_i S_i t_disk a(Rp_i) delta_i
      + sum (K_tape + S_i t_tape) m_i
      + sum I*_i S_i t_disk m_i          a(Rp) = 0.05 + 1/Rp

where ``m_i = 1`` iff dataset ``i`` was removed but actually used, i.e. a
restore from tape: the fixed restore latency plus the tape transfer, then
disk downloads at single-replica speed.  The baseline keeps everything on
disk at the original replica counts, so it consists of term 1 only.

The LRU-style baseline policy removes a dataset iff it had zero usage in the
last ``N`` observation weeks (inclusive window) and never changes replica
counts.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .catalog import DatasetRecord, SplitConfig, UsageHistory
from .features import extract_corpus_features, labels_array
from .intensity import predict_intensities
from .placement import CostParams, PlacementDecision, PlacementPlan, loss, optimize_plan
from .popularity import GbdtConfig, cross_predict_features, fit_calibration, popularity_array


@dataclass(frozen=True)
class TimeParams:
    """Download-time model constants, in hours and hours per GB."""

    t_disk: float = 0.1
    t_tape: float = 3.0
    k_tape: float = 24.0

    def __post_init__(self) -> None:
        for name in ("t_disk", "t_tape", "k_tape"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name}: must be non-negative and finite, got {value!r}")


@dataclass(frozen=True)
class EvalReport:
    """One comparison row: policy identity plus replay metrics."""

    policy_name: str
    policy_param: float
    downloading_time_ratio: float
    saving_space_pct: float
    wrong_removals: int
    max_replicas: int | None = None
    total_loss: float | None = None


def replica_speed_factor(replicas: int) -> float:
    """Concurrency speed-up of ``Rp`` disk replicas: ``0.05 + 1/Rp``."""
    if replicas < 1:
        raise ValueError(f"replicas must be at least 1, got {replicas}")
    return 0.05 + 1.0 / replicas


def eval_intensity(history: UsageHistory, split: SplitConfig) -> float:
    """True average weekly downloads over the label window."""
    if history.total_weeks < split.total_weeks:
        raise ValueError(
            f"history covers {history.total_weeks} weeks, split needs {split.total_weeks}"
        )
    window = history.counts[split.observation_weeks : split.total_weeks]
    return float(sum(window)) / split.label_weeks


def eval_intensities(records: Sequence[DatasetRecord], split: SplitConfig) -> np.ndarray:
    return np.array([eval_intensity(r.history, split) for r in records], dtype=float)


def downloading_time(
    decisions: Sequence[PlacementDecision],
    sizes,
    eval_intensities,
    times: TimeParams,
) -> float:
    """Replay download time of explicit decisions, in hours."""
    sizes = np.asarray(sizes, dtype=float)
    used = np.asarray(eval_intensities, dtype=float)
    if sizes.size != len(decisions) or used.size != len(decisions):
        raise ValueError("decisions, sizes and eval_intensities must align")
    on_disk = np.array([d.on_disk for d in decisions], dtype=bool)
    replicas = np.array([d.replicas for d in decisions], dtype=float)
    if np.any(on_disk & (replicas < 1)):
        raise ValueError("datasets on disk must keep at least one replica")
    restored = ~on_disk & (used > 0)

    disk = float(np.sum(used[on_disk] * sizes[on_disk] * times.t_disk * (0.05 + 1.0 / replicas[on_disk])))
    restore = float(np.sum(times.k_tape + sizes[restored] * times.t_tape)) if restored.any() else 0.0
    after_restore = float(np.sum(used[restored] * sizes[restored] * times.t_disk))
    return disk + restore + after_restore


def baseline_time(records: Sequence[DatasetRecord], split: SplitConfig, times: TimeParams) -> float:
    """Download time with everything on disk at the original replica counts."""
    parts = [
        eval_intensity(r.history, split)
        * r.metadata.replica_size_gb
        * times.t_disk
        * replica_speed_factor(r.metadata.replicas_on_disk)
        for r in records
    ]
    return float(np.sum(np.array(parts))) if parts else 0.0


def identity_plan(records: Sequence[DatasetRecord]) -> PlacementPlan:
    """Keep everything on disk at the original replica counts."""
    decisions = tuple(
        PlacementDecision(r.dataset_id, True, r.metadata.replicas_on_disk, False) for r in records
    )
    return PlacementPlan(decisions=decisions, threshold=None, total_loss=None)


def lru_plan(records: Sequence[DatasetRecord], split: SplitConfig, n_weeks: int) -> PlacementPlan:
    """Remove datasets with no usage in the last ``n_weeks`` observed weeks."""
    if not 1 <= n_weeks <= split.observation_weeks:
        raise ValueError(
            f"n_weeks must be within [1, {split.observation_weeks}], got {n_weeks}"
        )
    decisions = []
    for record in records:
        window = record.history.counts[split.observation_weeks - n_weeks : split.observation_weeks]
        keep = any(c > 0 for c in window)
        decisions.append(
            PlacementDecision(
                dataset_id=record.dataset_id,
                on_disk=keep,
                replicas=record.metadata.replicas_on_disk if keep else 0,
                miss=False,
            )
        )
    return PlacementPlan(decisions=tuple(decisions), threshold=None, total_loss=None)


def evaluate_policy(
    plan: PlacementPlan,
    records: Sequence[DatasetRecord],
    split: SplitConfig,
    times: TimeParams,
    policy_name: str = "custom",
    policy_param: float = math.nan,
    max_replicas: int | None = None,
) -> EvalReport:
    """Replay one plan against the label window and summarize it."""
    by_id = {d.dataset_id: d for d in plan.decisions}
    missing = [r.dataset_id for r in records if r.dataset_id not in by_id]
    if missing:
        raise ValueError(f"plan does not cover {len(missing)} records, first: {missing[0]}")
    decisions = [by_id[r.dataset_id] for r in records]
    sizes = np.array([r.metadata.replica_size_gb for r in records], dtype=float)
    used = eval_intensities(records, split)

    original_gb = float(np.sum(sizes * np.array([r.metadata.replicas_on_disk for r in records])))
    planned_gb = float(np.sum(np.array([d.replicas if d.on_disk else 0 for d in decisions]) * sizes))
    if original_gb <= 0:
        raise ValueError("original disk footprint is zero")
    base = baseline_time(records, split, times)
    if base == 0:
        raise ValueError("baseline downloading time is zero, ratio undefined")
    ratio = downloading_time(decisions, sizes, used, times) / base
    wrong = int(np.sum([not d.on_disk and u > 0 for d, u in zip(decisions, used)]))
    return EvalReport(
        policy_name=policy_name,
        policy_param=policy_param,
        downloading_time_ratio=ratio,
        saving_space_pct=100.0 * (original_gb - planned_gb) / original_gb,
        wrong_removals=wrong,
        max_replicas=max_replicas,
        total_loss=plan.total_loss,
    )


def comparison_report(
    records: Sequence[DatasetRecord],
    split: SplitConfig,
    costs: CostParams,
    times: TimeParams,
    alpha_grid: Sequence[float],
    lru_n_grid: Sequence[int],
    max_replicas_grid: Sequence[int],
    gbdt_config: GbdtConfig | None = None,
    h_grid=None,
    threads: int = 1,
) -> list[EvalReport]:
    """LRU rows for each N, then optimizer rows per max_replicas and alpha.

    Popularity scores and intensity forecasts are computed once; only the
    placement optimization depends on ``alpha`` and ``max_replicas``.
    """
    if not alpha_grid or not lru_n_grid or not max_replicas_grid:
        raise ValueError("all parameter grids must be non-empty")
    gbdt_config = gbdt_config if gbdt_config is not None else GbdtConfig()

    features = extract_corpus_features(records, split)
    probabilities = cross_predict_features(features, gbdt_config)
    unpopular = [probabilities[fv.dataset_id] for fv in features if fv.label == 1]
    calibration = fit_calibration(unpopular)
    pops = popularity_array(calibration, [probabilities[fv.dataset_id] for fv in features])
    forecasts = predict_intensities(records, split, h_grid=h_grid, threads=threads)
    intensities = np.array([fc.predicted for fc in forecasts])
    sizes = np.array([r.metadata.replica_size_gb for r in records], dtype=float)
    labels = labels_array(features)
    ids = [r.dataset_id for r in records]

    reports = []
    for n_weeks in lru_n_grid:
        plan = lru_plan(records, split, n_weeks)
        reports.append(
            evaluate_policy(plan, records, split, times, policy_name="lru", policy_param=float(n_weeks))
        )
    for max_replicas in max_replicas_grid:
        for alpha in alpha_grid:
            run_costs = CostParams(
                c_disk=costs.c_disk,
                c_tape=costs.c_tape,
                c_miss=costs.c_miss,
                alpha=float(alpha),
                max_replicas=int(max_replicas),
            )
            plan = optimize_plan(pops, intensities, sizes, labels, run_costs, dataset_ids=ids)
            reports.append(
                evaluate_policy(
                    plan,
                    records,
                    split,
                    times,
                    policy_name="optimizer",
                    policy_param=float(alpha),
                    max_replicas=int(max_replicas),
                )
            )
    return reports


def write_report_csv(reports: Sequence[EvalReport], path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "policy",
                "param",
                "max_replicas",
                "downloading_time_ratio",
                "saving_space_pct",
                "wrong_removals",
                "total_loss",
            ]
        )
        for r in reports:
            writer.writerow(
                [
                    r.policy_name,
                    repr(float(r.policy_param)),
                    "" if r.max_replicas is None else str(r.max_replicas),
                    repr(float(r.downloading_time_ratio)),
                    repr(float(r.saving_space_pct)),
                    str(r.wrong_removals),
                    "" if r.total_loss is None else repr(float(r.total_loss)),
                ]
            )


def format_report_text(reports: Sequence[EvalReport]) -> str:
    """Aligned text tables: the LRU block, then one block per max_replicas."""
    lines: list[str] = []

    def block(title: str, param_header: str, rows: list[EvalReport]) -> None:
        if not rows:
            return
        header = (param_header, "Downloading time ratio", "Saving space, %", "Nb of wrong removings")
        cells = [header]
        for r in rows:
            param = f"{r.policy_param:g}"
            cells.append(
                (param, f"{r.downloading_time_ratio:.2f}", f"{r.saving_space_pct:.0f}", str(r.wrong_removals))
            )
        widths = [max(len(row[c]) for row in cells) for c in range(4)]
        lines.append(title)
        for row in cells:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        lines.append("")

    block("LRU baseline", "N", [r for r in reports if r.policy_name == "lru"])
    seen: list[int] = []
    for r in reports:
        if r.policy_name == "optimizer" and r.max_replicas not in seen:
            seen.append(r.max_replicas)
    for max_replicas in seen:
        block(
            f"Placement optimizer, max replicas {max_replicas}",
            "Alpha",
            [r for r in reports if r.policy_name == "optimizer" and r.max_replicas == max_replicas],
        )
    return "\n".join(lines)
