"""Command-line frontend wiring the library into reproducible pipelines.

Subcommands:

* ``generate``   write a deterministic synthetic catalogue
* ``features``   extract the feature table from a catalogue
* ``recommend``  full pipeline: popularity, intensity, placement plan
* ``compare``    sweep the optimizer and LRU grids and emit report tables

Configuration comes from an optional JSON or TOML file (``--config``) with
command-line flags taking precedence.  Exit codes: 0 success, 1 pipeline
failure, 2 usage or input errors.  Every command is deterministic given its
configuration; ``--threads`` never changes output bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .catalog import (
    CatalogError,
    PopularMixConfig,
    SplitConfig,
    generate_synthetic_corpus,
    parse_catalog,
    write_catalog,
)
from .evaluation import TimeParams, comparison_report, format_report_text, write_report_csv
from .features import extract_corpus_features, labels_array, write_feature_csv
from .intensity import predict_intensities, write_intensity_csv
from .placement import CostParams, optimize_plan, verify_plan, write_plan_csv, write_plan_summary
from .popularity import GbdtConfig, cross_predict_features, fit_calibration, popularity_array

DEFAULT_SEED = 42
DEFAULT_ALPHA_GRID = (0.0, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 2.0)
DEFAULT_LRU_N_GRID = (1, 2, 5, 10, 15, 20, 25)
DEFAULT_MAX_REPLICAS_GRID = (4, 7)


class UsageError(Exception):
    """Bad invocation, bad configuration or unreadable input."""


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run parameters for one command invocation."""

    input: str | None = None
    out: str = "."
    seed: int = DEFAULT_SEED
    threads: int = 1
    split: SplitConfig = field(default_factory=SplitConfig)
    gbdt: GbdtConfig = field(default_factory=GbdtConfig)
    costs: CostParams = field(default_factory=CostParams)
    times: TimeParams = field(default_factory=TimeParams)
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID
    lru_n_grid: tuple[int, ...] = DEFAULT_LRU_N_GRID
    max_replicas_grid: tuple[int, ...] = DEFAULT_MAX_REPLICAS_GRID
    h_grid: tuple[float, ...] | None = None


def _load_config_file(path: Path) -> dict:
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".json":
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON: {exc}") from None
    elif suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            payload = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"{path}: invalid TOML: {exc}") from None
    else:
        raise UsageError(f"{path}: config must be a .json or .toml file")
    if not isinstance(payload, dict):
        raise UsageError(f"{path}: config must be a table of settings")
    return payload


def _section(payload: dict, name: str, allowed: set[str]) -> dict:
    section = payload.get(name, {})
    if not isinstance(section, dict):
        raise UsageError(f"config section '{name}' must be a table")
    unknown = section.keys() - allowed
    if unknown:
        raise UsageError(f"config section '{name}' has unknown keys {sorted(unknown)}")
    return section


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, the optional config file and command-line flags."""
    payload: dict = {}
    if getattr(args, "config", None):
        payload = _load_config_file(Path(args.config))
    allowed_top = {"input", "out", "seed", "threads", "split", "gbdt", "costs", "times", "grids"}
    unknown = payload.keys() - allowed_top
    if unknown:
        raise UsageError(f"config has unknown keys {sorted(unknown)}")

    seed = payload.get("seed", DEFAULT_SEED)
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    threads = payload.get("threads", 1)
    if getattr(args, "threads", None) is not None:
        threads = args.threads

    split_cfg = _section(payload, "split", {"observation_weeks", "label_weeks"})
    gbdt_cfg = _section(
        payload, "gbdt", {"n_trees", "max_depth", "learning_rate", "min_samples_leaf", "seed"}
    )
    costs_cfg = _section(payload, "costs", {"c_disk", "c_tape", "c_miss", "alpha", "max_replicas"})
    times_cfg = _section(payload, "times", {"t_disk", "t_tape", "k_tape"})
    grids_cfg = _section(payload, "grids", {"alpha", "lru_n", "max_replicas", "bandwidth"})

    try:
        split = SplitConfig(**split_cfg)
        # stage seeds derive from the top-level seed unless set explicitly
        gbdt = GbdtConfig(**{"seed": seed, **gbdt_cfg})
        costs = CostParams(**costs_cfg)
        times = TimeParams(**times_cfg)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid config value: {exc}") from None

    out = payload.get("out", ".")
    if getattr(args, "out", None) is not None:
        out = args.out
    input_path = payload.get("input")
    if getattr(args, "input", None) is not None:
        input_path = args.input

    def grid(name: str, default, cast):
        values = grids_cfg.get(name)
        if values is None:
            return default
        if not isinstance(values, (list, tuple)) or not values:
            raise UsageError(f"config grid '{name}' must be a non-empty list")
        return tuple(cast(v) for v in values)

    try:
        config = RunConfig(
            input=input_path,
            out=str(out),
            seed=int(seed),
            threads=int(threads),
            split=split,
            gbdt=gbdt,
            costs=costs,
            times=times,
            alpha_grid=grid("alpha", DEFAULT_ALPHA_GRID, float),
            lru_n_grid=grid("lru_n", DEFAULT_LRU_N_GRID, int),
            max_replicas_grid=grid("max_replicas", DEFAULT_MAX_REPLICAS_GRID, int),
            h_grid=grid("bandwidth", None, float),
        )
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid config value: {exc}") from None
    if config.threads < 1:
        raise UsageError(f"threads must be at least 1, got {config.threads}")
    return config


def _require_input(config: RunConfig) -> Path:
    if not config.input:
        raise UsageError("no input catalogue: pass --input or set 'input' in the config")
    return Path(config.input)


def _load_records(config: RunConfig, args: argparse.Namespace):
    path = _require_input(config)
    return parse_catalog(path, format=getattr(args, "format", None), total_weeks=config.split.total_weeks)


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args: argparse.Namespace) -> int:
    config = build_config(args)
    if args.n < 1:
        raise UsageError(f"--n must be at least 1, got {args.n}")
    if not 0.0 <= args.cold_fraction <= 1.0:
        raise UsageError(f"--cold-fraction must be within [0, 1], got {args.cold_fraction}")
    mix = PopularMixConfig(cold_fraction=args.cold_fraction, hot_fraction=1.0 - args.cold_fraction)
    records = generate_synthetic_corpus(
        args.n,
        config.seed,
        mix,
        total_weeks=config.split.total_weeks,
        label_weeks=config.split.label_weeks,
    )
    out = Path(args.out) if args.out else Path("catalog.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_catalog(records, out, format=args.format)
    print(f"wrote {len(records)} records to {out}")
    return 0


def cmd_features(args: argparse.Namespace) -> int:
    config = build_config(args)
    records = _load_records(config, args)
    features = extract_corpus_features(records, config.split)
    out = _out_dir(config) / "features.csv"
    write_feature_csv(features, out)
    print(f"wrote {len(features)} feature rows to {out}")
    return 0


def _pipeline(config: RunConfig, records):
    features = extract_corpus_features(records, config.split)
    probabilities = cross_predict_features(features, config.gbdt)
    unpopular = [probabilities[fv.dataset_id] for fv in features if fv.label == 1]
    if not unpopular:
        raise ValueError("catalogue has no unpopular datasets to calibrate against")
    calibration = fit_calibration(unpopular)
    pops = popularity_array(calibration, [probabilities[fv.dataset_id] for fv in features])
    forecasts = predict_intensities(
        records, config.split, h_grid=config.h_grid, threads=config.threads
    )
    return features, pops, forecasts


def cmd_recommend(args: argparse.Namespace) -> int:
    config = build_config(args)
    records = _load_records(config, args)
    features, pops, forecasts = _pipeline(config, records)
    intensities = np.array([fc.predicted for fc in forecasts])
    sizes = np.array([r.metadata.replica_size_gb for r in records])
    labels = labels_array(features)
    ids = [r.dataset_id for r in records]
    plan = optimize_plan(pops, intensities, sizes, labels, config.costs, dataset_ids=ids)

    out = _out_dir(config)
    write_plan_csv(plan, pops, intensities, out / "plan.csv")
    write_plan_summary(plan, sizes, out / "summary.json")
    write_intensity_csv(forecasts, out / "intensities.csv")
    for name in ("plan.csv", "summary.json", "intensities.csv"):
        print(f"wrote {out / name}")

    if args.verify:
        verify_plan(plan, pops, intensities, sizes, labels, config.costs)
        for fc in forecasts:
            if fc.predicted != fc.rolling[-1] or fc.predicted < 0:
                raise ValueError(f"{fc.dataset_id}: inconsistent intensity forecast")
        reread = parse_catalog(_require_input(config), total_weeks=config.split.total_weeks)
        if [r.dataset_id for r in reread] != ids:
            raise ValueError("input catalogue changed during the run")
        print("verification passed")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    config = build_config(args)
    records = _load_records(config, args)
    reports = comparison_report(
        records,
        config.split,
        config.costs,
        config.times,
        config.alpha_grid,
        config.lru_n_grid,
        config.max_replicas_grid,
        gbdt_config=config.gbdt,
        h_grid=config.h_grid,
        threads=config.threads,
    )
    out = _out_dir(config)
    write_report_csv(reports, out / "report.csv")
    text = format_report_text(reports)
    (out / "report.txt").write_text(text, encoding="utf-8")
    print(f"wrote {out / 'report.csv'}")
    print(f"wrote {out / 'report.txt'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diskpop",
        description="Decide which datasets stay on disk, with how many replicas.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or TOML configuration file")
    common.add_argument("--out", help="output directory (generate: output file)")
    common.add_argument("--seed", type=int, help=f"top-level random seed (default {DEFAULT_SEED})")
    common.add_argument("--threads", type=int, help="worker threads; never changes results")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic catalogue")
    p.add_argument("--n", type=int, required=True, help="number of datasets")
    p.add_argument(
        "--cold-fraction",
        type=float,
        default=0.5,
        help="fraction of datasets with an inactive label window (default 0.5)",
    )
    p.add_argument("--format", choices=("csv", "json"), help="catalogue format (default: by suffix)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("features", parents=[common], help="extract the feature table")
    p.add_argument("--input", help="input catalogue (CSV or JSON)")
    p.add_argument("--format", choices=("csv", "json"), help="input format (default: by suffix)")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("recommend", parents=[common], help="produce a placement plan")
    p.add_argument("--input", help="input catalogue (CSV or JSON)")
    p.add_argument("--format", choices=("csv", "json"), help="input format (default: by suffix)")
    p.add_argument("--verify", action="store_true", help="re-check plan invariants after writing")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("compare", parents=[common], help="sweep optimizer and LRU grids")
    p.add_argument("--input", help="input catalogue (CSV or JSON)")
    p.add_argument("--format", choices=("csv", "json"), help="input format (default: by suffix)")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CatalogError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pipeline failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
