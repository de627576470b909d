import numpy as np
import pytest

from diskpop import (
    CatalogError,
    DatasetMetadata,
    DatasetRecord,
    PopularMixConfig,
    SplitConfig,
    UsageHistory,
    generate_synthetic_corpus,
    parse_catalog,
    write_catalog,
)


def make_record(dataset_id="ds1", counts=None, total_weeks=104, **meta_overrides):
    counts = counts if counts is not None else (0.0,) * total_weeks
    meta = dict(
        dataset_id=dataset_id,
        origin="prod",
        configuration="run-a",
        file_type="dst",
        data_type="real",
        event_type="et-101",
        creation_week=1,
        first_usage_week=0,
        last_usage_week=0,
        replica_size_gb=10.0,
        replicas_on_disk=2,
    )
    meta.update(meta_overrides)
    return DatasetRecord(DatasetMetadata(**meta), UsageHistory(counts, total_weeks))


class TestTypes:
    def test_history_length_enforced(self):
        with pytest.raises(CatalogError, match="104"):
            UsageHistory((1.0, 2.0))

    def test_history_rejects_negative_and_non_finite(self):
        counts = [0.0] * 104
        counts[3] = -1.0
        with pytest.raises(CatalogError, match="w4"):
            UsageHistory(tuple(counts))
        counts[3] = float("nan")
        with pytest.raises(CatalogError, match="w4"):
            UsageHistory(tuple(counts))

    def test_metadata_derives_total_disk(self):
        record = make_record(replica_size_gb=10.0, replicas_on_disk=3)
        assert record.metadata.total_disk_gb == 30.0

    def test_metadata_rejects_inconsistent_total_disk(self):
        with pytest.raises(CatalogError, match="total_disk_gb"):
            DatasetMetadata(
                dataset_id="x",
                origin="prod",
                configuration="run-a",
                file_type="dst",
                data_type="real",
                event_type="et-101",
                creation_week=1,
                first_usage_week=0,
                last_usage_week=0,
                replica_size_gb=10.0,
                replicas_on_disk=3,
                total_disk_gb=25.0,
            )

    def test_metadata_field_validation(self):
        with pytest.raises(CatalogError, match="data_type"):
            make_record(data_type="simulated")
        with pytest.raises(CatalogError, match="replica_size_gb"):
            make_record(replica_size_gb=0.0)
        with pytest.raises(CatalogError, match="replicas_on_disk"):
            make_record(replicas_on_disk=0)
        with pytest.raises(CatalogError, match="first_usage_week"):
            make_record(first_usage_week=9, last_usage_week=3)
        with pytest.raises(CatalogError, match="creation_week"):
            make_record(creation_week=10, first_usage_week=4, last_usage_week=8)
        with pytest.raises(CatalogError, match="never-used"):
            make_record(first_usage_week=0, last_usage_week=7)

    def test_split_config(self):
        split = SplitConfig()
        assert (split.observation_weeks, split.label_weeks, split.total_weeks) == (78, 26, 104)
        with pytest.raises(CatalogError):
            SplitConfig(observation_weeks=0)

    def test_mix_config_must_sum_to_one(self):
        with pytest.raises(CatalogError, match="sum to 1"):
            PopularMixConfig(cold_fraction=0.5, hot_fraction=0.6)
        with pytest.raises(CatalogError, match="cold_fraction"):
            PopularMixConfig(cold_fraction=-0.1, hot_fraction=1.1)


class TestRoundTrip:
    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_write_parse_identity(self, tmp_path, fmt):
        records = generate_synthetic_corpus(40, 3)
        path = tmp_path / f"catalog.{fmt}"
        write_catalog(records, path)
        assert parse_catalog(path) == records

    def test_round_trip_preserves_awkward_floats(self, tmp_path):
        counts = [0.0] * 104
        counts[0] = 0.1 + 0.2
        counts[50] = 1e-17
        record = make_record(counts=tuple(counts), first_usage_week=1, last_usage_week=51)
        for fmt in ("csv", "json"):
            path = tmp_path / f"one.{fmt}"
            write_catalog([record], path)
            assert parse_catalog(path) == [record]

    def test_csv_accepts_consistent_total_disk_column(self, tmp_path):
        records = generate_synthetic_corpus(3, 5)
        path = tmp_path / "catalog.csv"
        write_catalog(records, path)
        lines = path.read_text().splitlines()
        head = lines[0].split(",")
        head.insert(11, "total_disk_gb")
        out = [",".join(head)]
        for line, record in zip(lines[1:], records):
            row = line.split(",")
            row.insert(11, repr(record.metadata.total_disk_gb))
            out.append(",".join(row))
        path.write_text("\n".join(out) + "\n")
        assert parse_catalog(path) == records

        bad = out[:]
        row = bad[1].split(",")
        row[11] = repr(float(row[11]) + 1.0)
        bad[1] = ",".join(row)
        path.write_text("\n".join(bad) + "\n")
        with pytest.raises(CatalogError, match="line 2.*total_disk_gb"):
            parse_catalog(path)

    def test_writer_rejects_duplicate_ids(self, tmp_path):
        record = make_record()
        with pytest.raises(CatalogError, match="duplicate"):
            write_catalog([record, record], tmp_path / "dup.csv")


class TestParseErrors:
    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            parse_catalog(tmp_path / "absent.csv")

    def test_unknown_format(self, tmp_path):
        path = tmp_path / "catalog.txt"
        path.write_text("x")
        with pytest.raises(CatalogError, match="format"):
            parse_catalog(path)

    def test_wrong_week_count_in_header(self, tmp_path):
        records = generate_synthetic_corpus(2, 1, total_weeks=50, label_weeks=10)
        path = tmp_path / "short.csv"
        write_catalog(records, path)
        with pytest.raises(CatalogError, match="w1..w104"):
            parse_catalog(path)
        assert parse_catalog(path, total_weeks=50) == records

    def test_error_names_line_and_field(self, tmp_path):
        records = generate_synthetic_corpus(4, 2)
        path = tmp_path / "catalog.csv"
        write_catalog(records, path)
        lines = path.read_text().splitlines()
        row = lines[3].split(",")
        row[6] = "soon"
        lines[3] = ",".join(row)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CatalogError, match="line 4.*creation_week"):
            parse_catalog(path)

    def test_negative_count_rejected_with_week_name(self, tmp_path):
        records = generate_synthetic_corpus(2, 2)
        path = tmp_path / "catalog.csv"
        write_catalog(records, path)
        lines = path.read_text().splitlines()
        row = lines[1].split(",")
        row[11 + 7] = "-3.5"
        lines[1] = ",".join(row)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CatalogError, match="line 2.*w8"):
            parse_catalog(path)

    def test_duplicate_ids_rejected(self, tmp_path):
        records = generate_synthetic_corpus(2, 2)
        path = tmp_path / "catalog.csv"
        write_catalog(records, path)
        lines = path.read_text().splitlines()
        lines.append(lines[1])
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CatalogError, match="duplicate dataset_id"):
            parse_catalog(path)

    def test_json_entry_errors(self, tmp_path):
        path = tmp_path / "catalog.json"
        path.write_text('[{"dataset_id": "a"}]')
        with pytest.raises(CatalogError, match="entry 1.*missing"):
            parse_catalog(path)
        path.write_text("{}")
        with pytest.raises(CatalogError, match="array"):
            parse_catalog(path)
        path.write_text("[")
        with pytest.raises(CatalogError, match="invalid JSON"):
            parse_catalog(path)


class TestGenerator:
    def test_deterministic(self):
        assert generate_synthetic_corpus(25, 9) == generate_synthetic_corpus(25, 9)
        assert generate_synthetic_corpus(25, 9) != generate_synthetic_corpus(25, 10)

    def test_ids_unique_and_count(self):
        records = generate_synthetic_corpus(120, 0)
        assert len(records) == 120
        assert len({r.dataset_id for r in records}) == 120

    @pytest.mark.parametrize("cold", [0.3, 0.5, 0.7])
    def test_mix_control(self, cold):
        mix = PopularMixConfig(cold_fraction=cold, hot_fraction=1.0 - cold)
        records = generate_synthetic_corpus(600, 4, mix)
        split = SplitConfig()
        unpopular = sum(
            1
            for r in records
            if all(c == 0 for c in r.history.counts[split.observation_weeks :])
        )
        assert abs(unpopular / len(records) - cold) <= 0.05

    def test_metadata_consistent_with_history(self):
        for record in generate_synthetic_corpus(150, 6):
            counts = np.asarray(record.history.counts)
            nonzero = np.flatnonzero(counts > 0)
            meta = record.metadata
            if nonzero.size:
                assert meta.first_usage_week == nonzero[0] + 1
                assert meta.last_usage_week == nonzero[-1] + 1
                assert meta.creation_week <= meta.first_usage_week
            else:
                assert meta.first_usage_week == meta.last_usage_week == 0

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            generate_synthetic_corpus(0, 1)
        with pytest.raises(ValueError):
            generate_synthetic_corpus(5, 1, label_weeks=104)
