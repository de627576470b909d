import csv
import math

import numpy as np
import pytest

from diskpop import (
    CostParams,
    DatasetMetadata,
    DatasetRecord,
    EvalReport,
    GbdtConfig,
    PlacementDecision,
    PlacementPlan,
    SplitConfig,
    TimeParams,
    UsageHistory,
    baseline_time,
    comparison_report,
    downloading_time,
    eval_intensities,
    eval_intensity,
    evaluate_policy,
    extract_corpus_features,
    cross_predict_features,
    fit_calibration,
    format_report_text,
    identity_plan,
    labels_array,
    lru_plan,
    optimize_plan,
    popularity_array,
    predict_intensities,
    replica_speed_factor,
    write_report_csv,
)

REFERENCE_TIMES = TimeParams(t_disk=0.1, t_tape=3.0, k_tape=24.0)


def make_record(counts, dataset_id="ds1", replicas=2, size=10.0):
    counts = tuple(float(c) for c in counts)
    nonzero = [i + 1 for i, c in enumerate(counts) if c > 0]
    metadata = DatasetMetadata(
        dataset_id=dataset_id,
        origin="prod",
        configuration="run-a",
        file_type="dst",
        data_type="real",
        event_type="et-101",
        creation_week=min(nonzero) if nonzero else 1,
        first_usage_week=nonzero[0] if nonzero else 0,
        last_usage_week=nonzero[-1] if nonzero else 0,
        replica_size_gb=size,
        replicas_on_disk=replicas,
    )
    return DatasetRecord(metadata, UsageHistory(counts, total_weeks=len(counts)))


def usage(total_weeks, **week_counts):
    counts = [0.0] * total_weeks
    for week, count in week_counts.items():
        counts[int(week[1:]) - 1] = float(count)
    return counts


class TestTimeParams:
    def test_validation(self):
        with pytest.raises(ValueError, match="t_disk"):
            TimeParams(t_disk=-0.1)
        with pytest.raises(ValueError, match="k_tape"):
            TimeParams(k_tape=float("nan"))


class TestSpeedFactor:
    def test_hand_values(self):
        assert replica_speed_factor(1) == 1.05
        assert replica_speed_factor(4) == pytest.approx(0.30, rel=1e-15)
        assert replica_speed_factor(2) == 0.55

    def test_more_replicas_download_faster(self):
        factors = [replica_speed_factor(r) for r in range(1, 9)]
        assert all(a > b for a, b in zip(factors, factors[1:]))

    def test_validation(self):
        with pytest.raises(ValueError):
            replica_speed_factor(0)


class TestEvalIntensity:
    def test_hand_value(self):
        split = SplitConfig(observation_weeks=6, label_weeks=2)
        history = UsageHistory(tuple(usage(8, w7=3, w8=7)), total_weeks=8)
        assert eval_intensity(history, split) == 5.0

    def test_observation_usage_does_not_count(self, split):
        counts = usage(split.total_weeks, w1=9, w78=9, w79=5)
        history = UsageHistory(tuple(counts), total_weeks=split.total_weeks)
        assert eval_intensity(history, split) == 5.0 / split.label_weeks

    def test_array_matches_scalar(self, small_corpus, split):
        values = eval_intensities(small_corpus, split)
        expected = [eval_intensity(r.history, split) for r in small_corpus]
        np.testing.assert_array_equal(values, expected)

    def test_short_history_rejected(self, split):
        history = UsageHistory((0.0,) * 80, total_weeks=80)
        with pytest.raises(ValueError):
            eval_intensity(history, split)


class TestDownloadingTime:
    def test_kept_dataset(self):
        decisions = [PlacementDecision("a", True, 2, False)]
        # 3 * 10 * 0.1 * (0.05 + 1/2)
        got = downloading_time(decisions, [10.0], [3.0], REFERENCE_TIMES)
        assert got == pytest.approx(1.65, rel=1e-12)

    def test_restored_dataset(self):
        decisions = [PlacementDecision("a", False, 0, True)]
        # 24 + 10 * 3, then 1 * 10 * 0.1 at single-replica disk speed
        got = downloading_time(decisions, [10.0], [1.0], REFERENCE_TIMES)
        assert got == pytest.approx(55.0, rel=1e-12)

    def test_removed_unused_dataset_is_free(self):
        decisions = [PlacementDecision("a", False, 0, False)]
        assert downloading_time(decisions, [10.0], [0.0], REFERENCE_TIMES) == 0.0

    def test_empty(self):
        assert downloading_time([], [], [], REFERENCE_TIMES) == 0.0

    def test_matches_definition(self):
        rng = np.random.default_rng(28)
        for _ in range(30):
            n = int(rng.integers(1, 20))
            sizes = rng.uniform(0.5, 40.0, size=n)
            used = rng.exponential(2.0, size=n) * rng.integers(0, 2, size=n)
            decisions = [
                PlacementDecision(str(i), bool(rng.integers(0, 2)), 0, False) for i in range(n)
            ]
            decisions = [
                PlacementDecision(d.dataset_id, d.on_disk, int(rng.integers(1, 5)) if d.on_disk else 0, False)
                for d in decisions
            ]
            expected = 0.0
            for d, s, u in zip(decisions, sizes, used):
                if d.on_disk:
                    expected += u * s * REFERENCE_TIMES.t_disk * (0.05 + 1.0 / d.replicas)
                elif u > 0:
                    expected += REFERENCE_TIMES.k_tape + s * REFERENCE_TIMES.t_tape
                    expected += u * s * REFERENCE_TIMES.t_disk
            got = downloading_time(decisions, sizes, used, REFERENCE_TIMES)
            np.testing.assert_allclose(got, expected, rtol=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError, match="align"):
            downloading_time([PlacementDecision("a", True, 1, False)], [1.0, 2.0], [0.0], REFERENCE_TIMES)
        with pytest.raises(ValueError, match="replica"):
            downloading_time([PlacementDecision("a", True, 0, False)], [1.0], [0.0], REFERENCE_TIMES)


class TestBaseline:
    def test_empty(self, split):
        assert baseline_time([], split, REFERENCE_TIMES) == 0.0

    def test_single_record(self, split):
        counts = usage(split.total_weeks, w80=13.0)
        record = make_record(counts, replicas=4, size=20.0)
        expected = (13.0 / 26.0) * 20.0 * 0.1 * 0.30
        assert baseline_time([record], split, REFERENCE_TIMES) == pytest.approx(expected, rel=1e-12)

    def test_equals_identity_plan_replay(self, small_corpus, split):
        plan = identity_plan(small_corpus)
        sizes = [r.metadata.replica_size_gb for r in small_corpus]
        used = eval_intensities(small_corpus, split)
        assert downloading_time(plan.decisions, sizes, used, REFERENCE_TIMES) == baseline_time(
            small_corpus, split, REFERENCE_TIMES
        )


class TestIdentityPlan:
    def test_replay_is_exactly_neutral(self, small_corpus, split):
        report = evaluate_policy(
            identity_plan(small_corpus), small_corpus, split, REFERENCE_TIMES, policy_name="identity"
        )
        assert report.downloading_time_ratio == 1.0
        assert report.saving_space_pct == 0.0
        assert report.wrong_removals == 0
        assert report.total_loss is None


class TestLruPlan:
    def test_recency_boundary(self, split):
        counts = usage(split.total_weeks, w70=1.0)
        record = make_record(counts, replicas=3)
        for n_weeks, kept in ((5, False), (8, False), (9, True), (10, True), (78, True)):
            plan = lru_plan([record], split, n_weeks)
            decision = plan.decisions[0]
            assert decision.on_disk is kept, n_weeks
            assert decision.replicas == (3 if kept else 0)
            assert decision.miss is False
        assert plan.threshold is None and plan.total_loss is None

    def test_last_observation_week_counts(self, split):
        record = make_record(usage(split.total_weeks, w78=1.0))
        assert lru_plan([record], split, 1).decisions[0].on_disk

    def test_label_window_usage_is_invisible(self, split):
        record = make_record(usage(split.total_weeks, w80=5.0))
        assert not lru_plan([record], split, 78).decisions[0].on_disk

    def test_validation(self, small_corpus, split):
        with pytest.raises(ValueError):
            lru_plan(small_corpus, split, 0)
        with pytest.raises(ValueError):
            lru_plan(small_corpus, split, 79)


class TestEvaluatePolicy:
    def make_trio(self, split):
        weeks = split.total_weeks
        hot = make_record(usage(weeks, w1=1.0, w80=26.0, w90=26.0), "A", replicas=3, size=10.0)
        warm = make_record(usage(weeks, w2=1.0, w100=26.0), "B", replicas=1, size=5.0)
        cold = make_record(usage(weeks, w3=1.0), "C", replicas=2, size=8.0)
        return [hot, warm, cold]

    def test_hand_spreadsheet(self, split):
        records = self.make_trio(split)
        plan = PlacementPlan(
            decisions=(
                PlacementDecision("A", True, 2, False),
                PlacementDecision("B", False, 0, True),
                PlacementDecision("C", False, 0, False),
            ),
            threshold=None,
            total_loss=None,
        )
        report = evaluate_policy(plan, records, split, REFERENCE_TIMES, policy_name="custom", policy_param=7.0)

        time = 2.0 * 10.0 * 0.1 * 0.55  # A stays, two replicas
        time += 24.0 + 5.0 * 3.0 + 1.0 * 5.0 * 0.1  # B restored from tape, then read
        base = 2.0 * 10.0 * 0.1 * (0.05 + 1.0 / 3.0) + 1.0 * 5.0 * 0.1 * 1.05
        assert report.downloading_time_ratio == pytest.approx(time / base, rel=1e-12)
        assert report.saving_space_pct == pytest.approx(100.0 * (51.0 - 20.0) / 51.0, rel=1e-12)
        assert report.wrong_removals == 1
        assert report.policy_name == "custom"
        assert report.policy_param == 7.0
        assert math.isnan(evaluate_policy(plan, records, split, REFERENCE_TIMES).policy_param)

    def test_plan_must_cover_records(self, split):
        records = self.make_trio(split)
        plan = PlacementPlan((PlacementDecision("A", True, 1, False),), None, None)
        with pytest.raises(ValueError, match="does not cover"):
            evaluate_policy(plan, records, split, REFERENCE_TIMES)

    def test_wrong_removals_bounded_by_removals(self, small_corpus, split):
        for n_weeks in (1, 10, 40):
            plan = lru_plan(small_corpus, split, n_weeks)
            report = evaluate_policy(plan, small_corpus, split, REFERENCE_TIMES)
            removed = sum(1 for d in plan.decisions if not d.on_disk)
            assert 0 <= report.wrong_removals <= removed


@pytest.fixture(scope="module")
def tiny_reports(small_corpus, split):
    return comparison_report(
        small_corpus,
        split,
        CostParams(),
        REFERENCE_TIMES,
        alpha_grid=(0.0, 0.5),
        lru_n_grid=(1, 5),
        max_replicas_grid=(4, 7),
        gbdt_config=GbdtConfig(n_trees=25),
    )


class TestComparisonReport:
    def test_row_count_and_order(self, tiny_reports):
        assert len(tiny_reports) == 2 + 2 * 2
        names = [r.policy_name for r in tiny_reports]
        assert names == ["lru", "lru", "optimizer", "optimizer", "optimizer", "optimizer"]
        assert [r.policy_param for r in tiny_reports[:2]] == [1.0, 5.0]
        assert [(r.max_replicas, r.policy_param) for r in tiny_reports[2:]] == [
            (4, 0.0),
            (4, 0.5),
            (7, 0.0),
            (7, 0.5),
        ]

    def test_policy_fields(self, tiny_reports):
        for r in tiny_reports:
            if r.policy_name == "lru":
                assert r.max_replicas is None and r.total_loss is None
            else:
                assert r.max_replicas in (4, 7)
                assert r.total_loss is not None and r.total_loss > 0

    def test_lru_rows_match_direct_evaluation(self, tiny_reports, small_corpus, split):
        direct = evaluate_policy(
            lru_plan(small_corpus, split, 5), small_corpus, split, REFERENCE_TIMES,
            policy_name="lru", policy_param=5.0,
        )
        assert tiny_reports[1] == direct

    def test_optimizer_rows_match_manual_pipeline(self, tiny_reports, small_corpus, split):
        config = GbdtConfig(n_trees=25)
        features = extract_corpus_features(small_corpus, split)
        probabilities = cross_predict_features(features, config)
        calibration = fit_calibration(
            [probabilities[fv.dataset_id] for fv in features if fv.label == 1]
        )
        pops = popularity_array(calibration, [probabilities[fv.dataset_id] for fv in features])
        intensities = np.array([fc.predicted for fc in predict_intensities(small_corpus, split)])
        sizes = np.array([r.metadata.replica_size_gb for r in small_corpus])
        labels = labels_array(features)
        costs = CostParams(alpha=0.5, max_replicas=7)
        plan = optimize_plan(
            pops, intensities, sizes, labels, costs, dataset_ids=[r.dataset_id for r in small_corpus]
        )
        direct = evaluate_policy(
            plan, small_corpus, split, REFERENCE_TIMES,
            policy_name="optimizer", policy_param=0.5, max_replicas=7,
        )
        assert tiny_reports[5] == direct

    def test_deterministic(self, small_corpus, split, tiny_reports):
        again = comparison_report(
            small_corpus,
            split,
            CostParams(),
            REFERENCE_TIMES,
            alpha_grid=(0.0, 0.5),
            lru_n_grid=(1, 5),
            max_replicas_grid=(4, 7),
            gbdt_config=GbdtConfig(n_trees=25),
        )
        assert again == tiny_reports

    def test_rejects_empty_grids(self, small_corpus, split):
        with pytest.raises(ValueError, match="grids"):
            comparison_report(
                small_corpus, split, CostParams(), REFERENCE_TIMES,
                alpha_grid=(), lru_n_grid=(1,), max_replicas_grid=(4,),
            )


class TestReportOutput:
    def make_reports(self):
        return [
            EvalReport("lru", 5.0, 0.91, 12.0, 34),
            EvalReport("optimizer", 0.5, 0.62345, 64.25, 13, max_replicas=4, total_loss=123.5),
        ]

    def test_csv_round_trip(self, tmp_path):
        reports = self.make_reports()
        path = tmp_path / "report.csv"
        write_report_csv(reports, path)
        with path.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == [
            "policy", "param", "max_replicas", "downloading_time_ratio",
            "saving_space_pct", "wrong_removals", "total_loss",
        ]
        assert rows[1] == ["lru", "5.0", "", "0.91", "12.0", "34", ""]
        assert rows[2][0] == "optimizer"
        assert float(rows[2][1]) == 0.5
        assert int(rows[2][2]) == 4
        assert float(rows[2][3]) == 0.62345
        assert float(rows[2][6]) == 123.5

    def test_text_blocks(self):
        text = format_report_text(self.make_reports())
        lines = text.splitlines()
        assert "LRU baseline" in lines
        assert "Placement optimizer, max replicas 4" in lines
        header = lines[lines.index("LRU baseline") + 1]
        assert header.split()[0] == "N"
        assert "Downloading time ratio" in header
        assert "Saving space, %" in header
        assert "Nb of wrong removings" in header
        lru_row = lines[lines.index("LRU baseline") + 2]
        assert lru_row.split() == ["5", "0.91", "12", "34"]
        opt_row = lines[lines.index("Placement optimizer, max replicas 4") + 2]
        assert opt_row.split() == ["0.5", "0.62", "64", "13"]
