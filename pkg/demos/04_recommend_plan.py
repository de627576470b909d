"""End-to-end placement recommendation for a catalogue.

The pipeline scores every dataset twice.  A boosted-tree classifier,
cross-predicted over two folds so no dataset is scored by a model that saw
its own label, yields a probability of being unpopular; rank calibration
against the unpopular scores turns that into a popularity in [0, 1].  The
kernel forecaster yields the expected weekly usage intensity.  The
optimizer then scans every candidate popularity threshold and keeps each
dataset below it at its loss-optimal replica count.
"""

import numpy as np

from diskpop import (
    CostParams,
    SplitConfig,
    cross_predict_features,
    extract_corpus_features,
    fit_calibration,
    generate_synthetic_corpus,
    labels_array,
    optimize_plan,
    popularity_array,
    predict_intensities,
    verify_plan,
)


def main():
    split = SplitConfig()
    records = generate_synthetic_corpus(n=1200, seed=9)
    features = extract_corpus_features(records, split)
    labels = labels_array(features)
    ids = [r.dataset_id for r in records]
    sizes = np.array([r.metadata.replica_size_gb for r in records])

    # Popularity: out-of-fold probabilities, calibrated by rank against the
    # scores of the datasets that really went unpopular.
    oof = cross_predict_features(features)
    probs = np.array([oof[i] for i in ids])
    calibration = fit_calibration(probs[labels == 1])
    pops = popularity_array(calibration, probs)
    print(f"scored {len(records)} datasets, "
          f"median popularity {np.median(pops):.3f} "
          f"(1 means certainly unpopular)")

    # Intensity: expected weekly usage, drives the replica count.
    intensities = np.array([f.predicted for f in predict_intensities(records, split)])

    costs = CostParams(
        c_disk=100.0, c_tape=1.0, c_miss=2000.0, alpha=0.5, max_replicas=4
    )
    plan = optimize_plan(pops, intensities, sizes, labels, costs, dataset_ids=ids)
    verify_plan(plan, pops, intensities, sizes, labels, costs)

    kept = [d for d in plan.decisions if d.on_disk]
    removed = [d for d in plan.decisions if not d.on_disk]
    removed_gb = sum(s for d, s in zip(plan.decisions, sizes) if not d.on_disk)
    print(f"\nthreshold {plan.threshold:.4f}: datasets at or above it move to tape")
    print(f"kept {len(kept)} on disk, removed {len(removed)} "
          f"({removed_gb:.0f} GB freed)")
    print(f"total loss {plan.total_loss:.1f}")

    # Replica counts rise with forecast intensity, capped by the plan limit.
    counts = np.bincount([d.replicas for d in kept], minlength=costs.max_replicas + 1)
    for r in range(1, costs.max_replicas + 1):
        print(f"  {counts[r]:5d} datasets at {r} replica{'s' if r > 1 else ''}")

    # How often does the plan disagree with the eventual truth?
    missed = sum(1 for d, y in zip(plan.decisions, labels) if not d.on_disk and y == 0)
    print(f"\nremovals that turned out to still be popular: {missed} "
          f"({100.0 * missed / max(1, len(removed)):.1f}% of removals)")


if __name__ == "__main__":
    main()
