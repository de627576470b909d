"""Loss-minimizing disk/tape placement from popularity and intensity.

The loss of a placement, with ``delta_i = 1`` when dataset ``i`` stays on
disk, ``R_i`` its replica count, ``S_i`` its replica size, ``I_i`` the
predicted weekly intensity and ``label_i`` the popularity label:

    C_disk * sum S_i (R_i + alpha I_i / R_i) delta_i
  + C_tape * sum S_i (1 - delta_i)
  + C_miss * sum S_i m_i        with  m_i = (1 - delta_i)(1 - label_i)

A miss is a removed dataset that was in fact popular.  Replica counts for
datasets kept on disk are the integer minimizer of ``R + alpha I / R`` over
``[1, max_replicas]``; the continuous optimum is ``sqrt(alpha I)`` and the
integer minimum is at most one step away from its floor.

The keep/remove decision is a threshold on the calibrated popularity: every
dataset with popularity at or above the threshold is removed.  The optimizer
scans all thresholds that produce distinct plans (each distinct popularity
value, plus 0 for remove-everything and just-above-1 for keep-everything)
and returns the plan with minimal loss, preferring the larger threshold on
ties.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class CostParams:
    """Cost model constants; ``alpha`` weighs intensity against replica cost."""

    c_disk: float = 100.0
    c_tape: float = 1.0
    c_miss: float = 2000.0
    alpha: float = 0.5
    max_replicas: int = 4

    def __post_init__(self) -> None:
        for name in ("c_disk", "c_tape", "c_miss", "alpha"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name}: must be non-negative and finite, got {value!r}")
        if self.max_replicas < 1:
            raise ValueError(f"max_replicas: must be at least 1, got {self.max_replicas!r}")


@dataclass(frozen=True)
class PlacementDecision:
    """Outcome for one dataset; ``replicas`` is 0 when it leaves disk."""

    dataset_id: str
    on_disk: bool
    replicas: int
    miss: bool


@dataclass(frozen=True)
class PlacementPlan:
    """Decisions plus the popularity threshold and loss that produced them.

    ``threshold`` and ``total_loss`` are ``None`` for plans that were not
    produced by the loss optimizer (for example an LRU baseline).
    """

    decisions: tuple[PlacementDecision, ...]
    threshold: float | None
    total_loss: float | None


def optimal_replicas(intensity: float, alpha: float, max_replicas: int = 4) -> int:
    """Integer count in [1, max_replicas] minimizing ``R + alpha I / R``.

    Ties resolve to the smaller count.  ``R + c/R <= (R+1) + c/(R+1)`` exactly
    when ``c <= R (R+1)``, so the comparisons below are exact in integers.
    """
    if not math.isfinite(intensity) or intensity < 0:
        raise ValueError(f"intensity must be non-negative and finite, got {intensity!r}")
    if not math.isfinite(alpha) or alpha < 0:
        raise ValueError(f"alpha must be non-negative and finite, got {alpha!r}")
    if max_replicas < 1:
        raise ValueError(f"max_replicas must be at least 1, got {max_replicas!r}")
    c = alpha * intensity
    r = max(1, min(int(math.sqrt(c)), max_replicas)) if c > 0 else 1
    while r > 1 and c < r * (r - 1):
        r -= 1
    while r < max_replicas and c > r * (r + 1):
        r += 1
    return r


def optimal_replicas_array(intensities, alpha: float, max_replicas: int = 4) -> np.ndarray:
    """Vectorized :func:`optimal_replicas`."""
    if not math.isfinite(alpha) or alpha < 0:
        raise ValueError(f"alpha must be non-negative and finite, got {alpha!r}")
    if max_replicas < 1:
        raise ValueError(f"max_replicas must be at least 1, got {max_replicas!r}")
    c = alpha * np.asarray(intensities, dtype=float)
    if c.size and (np.any(~np.isfinite(c)) or c.min() < 0):
        raise ValueError("intensities must be non-negative and finite")
    r = np.clip(np.floor(np.sqrt(c)).astype(np.int64), 1, max_replicas)
    # the floor of the continuous optimum is off by at most one step
    r = np.where((r > 1) & (c < r * (r - 1)), r - 1, r)
    r = np.where((r < max_replicas) & (c > r * (r + 1)), r + 1, r)
    return r


def _aligned_arrays(decisions, sizes, intensities, labels):
    n = len(decisions)
    sizes = np.asarray(sizes, dtype=float)
    intensities = np.asarray(intensities, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if not (sizes.size == intensities.size == labels.size == n):
        raise ValueError("decisions, sizes, intensities and labels must align")
    if np.any((labels != 0.0) & (labels != 1.0)):
        raise ValueError("labels must be 0 or 1")
    if np.any(sizes <= 0) or np.any(~np.isfinite(sizes)):
        raise ValueError("sizes must be positive and finite")
    if np.any(intensities < 0) or np.any(~np.isfinite(intensities)):
        raise ValueError("intensities must be non-negative and finite")
    return sizes, intensities, labels


def loss(
    decisions: Sequence[PlacementDecision],
    sizes,
    intensities,
    labels,
    costs: CostParams,
) -> float:
    """Total placement loss of explicit decisions."""
    sizes, intensities, labels = _aligned_arrays(decisions, sizes, intensities, labels)
    on_disk = np.array([d.on_disk for d in decisions], dtype=bool)
    replicas = np.array([d.replicas for d in decisions], dtype=float)
    if np.any(on_disk & (replicas < 1)):
        raise ValueError("datasets on disk must keep at least one replica")
    kept = on_disk
    disk = costs.c_disk * float(
        np.sum(sizes[kept] * (replicas[kept] + costs.alpha * intensities[kept] / replicas[kept]))
    )
    tape = costs.c_tape * float(np.sum(sizes[~kept]))
    miss = costs.c_miss * float(np.sum(sizes[~kept] * (1.0 - labels[~kept])))
    return disk + tape + miss


def optimize_plan(
    popularities,
    intensities,
    sizes,
    labels,
    costs: CostParams,
    dataset_ids: Sequence[str] | None = None,
) -> PlacementPlan:
    """Minimal-loss threshold plan over the given datasets.

    Keeps every dataset with popularity strictly below the returned threshold
    at its optimal replica count and removes the rest.
    """
    popularities = np.asarray(popularities, dtype=float)
    n = popularities.size
    if n == 0:
        return PlacementPlan(decisions=(), threshold=float(np.nextafter(1.0, 2.0)), total_loss=0.0)
    if np.any(popularities < 0) or np.any(popularities > 1) or np.any(~np.isfinite(popularities)):
        raise ValueError("popularities must be within [0, 1]")
    if dataset_ids is None:
        dataset_ids = [str(i) for i in range(n)]
    elif len(dataset_ids) != n:
        raise ValueError("dataset_ids must align with popularities")
    dummy = [PlacementDecision(str(i), True, 1, False) for i in range(n)]
    sizes, intensities, labels = _aligned_arrays(dummy, sizes, intensities, labels)

    replicas = optimal_replicas_array(intensities, costs.alpha, costs.max_replicas)
    disk_cost = costs.c_disk * sizes * (replicas + costs.alpha * intensities / replicas)
    tape_cost = costs.c_tape * sizes
    miss_cost = costs.c_miss * sizes * (1.0 - labels)

    order = np.argsort(popularities, kind="stable")
    sorted_pop = popularities[order]
    disk_prefix = np.concatenate(([0.0], np.cumsum(disk_cost[order])))
    removed_suffix_tape = np.concatenate(([0.0], np.cumsum(tape_cost[order])))
    removed_suffix_miss = np.concatenate(([0.0], np.cumsum(miss_cost[order])))
    tape_total = removed_suffix_tape[-1]
    miss_total = removed_suffix_miss[-1]

    # keep count k means: keep the k smallest popularities, threshold = next value
    candidates: list[tuple[int, float]] = [(0, 0.0)]
    distinct = np.flatnonzero(np.concatenate(([True], np.diff(sorted_pop) > 0)))
    candidates.extend((int(k), float(sorted_pop[k])) for k in distinct)
    candidates.append((n, float(np.nextafter(1.0, 2.0))))
    candidates.sort()

    best_k, best_threshold, best_loss = 0, 0.0, math.inf
    for k, threshold in candidates:
        value = (
            disk_prefix[k]
            + (tape_total - removed_suffix_tape[k])
            + (miss_total - removed_suffix_miss[k])
        )
        if value <= best_loss:
            best_k, best_threshold, best_loss = k, threshold, value

    keep = np.zeros(n, dtype=bool)
    keep[order[:best_k]] = True
    decisions = tuple(
        PlacementDecision(
            dataset_id=str(dataset_ids[i]),
            on_disk=bool(keep[i]),
            replicas=int(replicas[i]) if keep[i] else 0,
            miss=bool(not keep[i] and labels[i] == 0.0),
        )
        for i in range(n)
    )
    total = loss(decisions, sizes, intensities, labels, costs)
    return PlacementPlan(decisions=decisions, threshold=best_threshold, total_loss=total)


def verify_plan(
    plan: PlacementPlan,
    popularities,
    intensities,
    sizes,
    labels,
    costs: CostParams,
) -> None:
    """Raise ``ValueError`` if the plan violates any structural property.

    Checks threshold consistency, replica bounds, local optimality of every
    replica count, miss flags and the recorded total loss.
    """
    popularities = np.asarray(popularities, dtype=float)
    intensities = np.asarray(intensities, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if plan.threshold is None or plan.total_loss is None:
        raise ValueError("plan has no recorded threshold or loss to verify")
    for i, decision in enumerate(plan.decisions):
        kept = popularities[i] < plan.threshold
        if decision.on_disk != kept:
            raise ValueError(f"{decision.dataset_id}: on_disk contradicts the threshold")
        if decision.miss != (not kept and labels[i] == 0.0):
            raise ValueError(f"{decision.dataset_id}: miss flag contradicts the label")
        if not kept:
            if decision.replicas != 0:
                raise ValueError(f"{decision.dataset_id}: removed datasets hold no replicas")
            continue
        r = decision.replicas
        if not 1 <= r <= costs.max_replicas:
            raise ValueError(f"{decision.dataset_id}: replicas {r} outside [1, {costs.max_replicas}]")
        c = costs.alpha * intensities[i]
        value = r + c / r
        for neighbor in (r - 1, r + 1):
            if 1 <= neighbor <= costs.max_replicas and value > neighbor + c / neighbor:
                raise ValueError(f"{decision.dataset_id}: replica count {r} is not locally optimal")
    recomputed = loss(plan.decisions, sizes, intensities, labels, costs)
    if recomputed != plan.total_loss:
        raise ValueError(
            f"recorded loss {plan.total_loss!r} does not match recomputed {recomputed!r}"
        )


def write_plan_csv(
    plan: PlacementPlan, popularities, intensities, path
) -> None:
    """Row per dataset: id, popularity, predicted intensity, decision fields."""
    path = Path(path)
    popularities = np.asarray(popularities, dtype=float)
    intensities = np.asarray(intensities, dtype=float)
    if popularities.size != len(plan.decisions) or intensities.size != len(plan.decisions):
        raise ValueError("popularities and intensities must align with the plan")
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["dataset_id", "popularity", "predicted_intensity", "on_disk", "replicas", "miss"]
        )
        for i, d in enumerate(plan.decisions):
            writer.writerow(
                [
                    d.dataset_id,
                    repr(float(popularities[i])),
                    repr(float(intensities[i])),
                    "true" if d.on_disk else "false",
                    str(d.replicas),
                    "true" if d.miss else "false",
                ]
            )


def write_plan_summary(plan: PlacementPlan, sizes, path) -> None:
    """Summary JSON: threshold, total loss, removals and space saved."""
    path = Path(path)
    sizes = np.asarray(sizes, dtype=float)
    if sizes.size != len(plan.decisions):
        raise ValueError("sizes must align with the plan")
    removed = np.array([not d.on_disk for d in plan.decisions])
    payload = {
        "threshold": plan.threshold,
        "total_loss": plan.total_loss,
        "datasets_removed": int(removed.sum()),
        "space_saved_gb": float(np.sum(sizes[removed])),
    }
    path.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
