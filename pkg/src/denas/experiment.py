"""Batch experiment driver: config files, seeded campaigns, persisted records.

A campaign is ``runs`` independent searches of the same configuration with
seeds ``base + 0 .. base + runs-1``. Every run persists as one JSON document
as soon as it finishes, so an interrupted campaign resumes at run
granularity; a campaign index with recomputable aggregates sits alongside.
The report step tabulates campaigns against each other with Welch p-values.
"""

import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import datasets as ds
from .encoding import MAX_VALUE, format_ip, format_layer, parse_ip
from .engine import EvolutionConfig, evolve
from .exceptions import ConfigError, DataError, EvaluationError
from .fitness import (
    CnnEvaluator,
    EvalConfig,
    decode_genome,
    evaluate_cnn,
    surrogate_length,
    surrogate_target,
)
from .stats import two_sample_t

DATA_DIR_ENV = "DENAS_DATA_DIR"
EVALUATORS = ("cnn", "surrogate_target", "surrogate_length")
DATA_FORMATS = ("amat", "idx", "synth_digits", "synth_blobs")


@dataclass
class DataConfig:
    """Where the training pool and test set come from."""

    format: str = "synth_digits"
    train: str | None = None          # amat path
    test: str | None = None
    train_images: str | None = None   # idx path pairs
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    classes: int | None = None
    train_size: int = 3000            # synthetic generators only
    test_size: int = 1000
    test_subset: int | None = None    # stratified cap on the loaded test set
    seed: int = 0

    def __post_init__(self):
        if self.format not in DATA_FORMATS:
            raise ConfigError(f"data format must be one of {DATA_FORMATS}")
        if self.format == "amat" and not self.train:
            raise ConfigError("amat data needs a train path")
        if self.format == "idx" and not (self.train_images and self.train_labels):
            raise ConfigError("idx data needs train_images and train_labels paths")


@dataclass
class RunConfig:
    """Everything one campaign needs; nested sections mirror the config file."""

    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    data: DataConfig = field(default_factory=DataConfig)
    evaluator: str = "cnn"
    target: list[str] = field(default_factory=list)  # dotted addresses, surrogate_target
    ideal_length: int = 4                            # surrogate_length
    runs: int = 30
    workers: int = 1
    output: str | None = None
    name: str = "campaign"

    def __post_init__(self):
        if self.evaluator not in EVALUATORS:
            raise ConfigError(f"evaluator must be one of {EVALUATORS}")
        if self.evaluator == "surrogate_target" and not self.target:
            raise ConfigError("surrogate_target needs a target genome")
        if self.ideal_length < 1:
            raise ConfigError("ideal_length must be >= 1")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw)
        kwargs = {}
        for section, section_cls in (("evolution", EvolutionConfig),
                                     ("evaluation", EvalConfig),
                                     ("data", DataConfig)):
            if section in raw:
                body = raw.pop(section)
                if not isinstance(body, dict):
                    raise ConfigError(f"section {section!r} must be a mapping")
                try:
                    kwargs[section] = section_cls(**body)
                except TypeError as exc:
                    raise ConfigError(f"bad key in section {section!r}: {exc}") from None
        known = {"evaluator", "target", "ideal_length", "runs", "workers",
                 "output", "name"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs.update(raw)
        return cls(**kwargs)

    @classmethod
    def from_yaml(cls, path) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a mapping")
        return cls.from_dict(raw)

    def with_overrides(self, pairs) -> "RunConfig":
        """Apply dotted key=value overrides, e.g. evolution.generations=5."""
        raw = self.to_dict()
        for pair in pairs:
            key, sep, value = pair.partition("=")
            if not sep:
                raise ConfigError(f"override {pair!r} is not key=value")
            cursor = raw
            parts = key.split(".")
            for part in parts[:-1]:
                if not isinstance(cursor.get(part), dict):
                    raise ConfigError(f"unknown config section {part!r} in {key!r}")
                cursor = cursor[part]
            cursor[parts[-1]] = yaml.safe_load(value)
        return RunConfig.from_dict(raw)

    def to_dict(self) -> dict:
        return asdict(self)


def resolve_data_path(path) -> Path:
    """Absolute as-is; relative paths resolve against $DENAS_DATA_DIR, then cwd."""
    p = Path(path)
    if p.is_absolute() or p.exists():
        return p
    base = os.environ.get(DATA_DIR_ENV)
    if base and (Path(base) / p).exists():
        return Path(base) / p
    return p


def genome_ips(genome) -> list[str]:
    """Dotted-address rendering of a genome's rounded dimensions."""
    values = np.clip(np.rint(np.asarray(genome, dtype=np.float64)), 0, MAX_VALUE)
    return [format_ip(int(v)) for v in values]


def _load_datasets(config: DataConfig):
    """Returns (train pool, test set or None)."""
    if config.format == "synth_digits":
        train = ds.synth_digits(config.train_size, seed=config.seed)
        test = ds.synth_digits(config.test_size, seed=config.seed + 1)
    elif config.format == "synth_blobs":
        per_class = max(1, config.train_size // 10)
        train = ds.synth_blobs(10, per_class, seed=config.seed)
        test = ds.synth_blobs(10, max(1, config.test_size // 10), seed=config.seed + 1)
    elif config.format == "amat":
        train = ds.load_amat(resolve_data_path(config.train), classes=config.classes)
        test = (ds.load_amat(resolve_data_path(config.test), classes=train.classes)
                if config.test else None)
    else:
        train = ds.load_idx(resolve_data_path(config.train_images),
                            resolve_data_path(config.train_labels),
                            classes=config.classes)
        test = None
        if config.test_images and config.test_labels:
            test = ds.load_idx(resolve_data_path(config.test_images),
                               resolve_data_path(config.test_labels),
                               classes=train.classes)
    if test is not None and config.test_subset and config.test_subset < len(test):
        test = ds.take_stratified(test, config.test_subset, seed=config.seed)
    return train, test


def build_split(config: RunConfig):
    """Load data and carve the train/fitness/test split the evaluator uses."""
    train_pool, test = _load_datasets(config.data)
    evaluation = config.evaluation
    if evaluation.train_subset is None:
        subset, fraction = len(train_pool), evaluation.fitness_fraction
    else:
        held = int(np.rint(evaluation.fitness_fraction * evaluation.train_subset))
        subset = evaluation.train_subset + held
        fraction = held / subset
    return ds.make_split(train_pool, fraction, subset_size=subset,
                         seed=config.data.seed, test=test)


def make_evaluator(config: RunConfig, seed: int, split=None):
    """Engine-facing fitness callable for one run."""
    if config.evaluator == "surrogate_target":
        target = np.array([float(parse_ip(ip)) for ip in config.target])
        return lambda genome: surrogate_target(genome, target)
    if config.evaluator == "surrogate_length":
        ideal = config.ideal_length
        return lambda genome: surrogate_length(genome, ideal)
    if split is None:
        raise ConfigError("cnn evaluator needs a dataset split")
    return CnnEvaluator(split, config.evaluation, base_seed=seed)


def _trace_dicts(trace):
    return [{"generation": r.generation,
             "best_fitness": r.best_fitness,
             "mean_fitness": r.mean_fitness,
             "mean_length": r.mean_length,
             "best_genome_ip": genome_ips(r.best_genome)}
            for r in trace.records]


def run_single(config: RunConfig, run_index: int = 0, split=None) -> dict:
    """One seeded search; returns the persistable run record."""
    seed = config.evolution.seed + run_index
    if split is None and config.evaluator == "cnn":
        split = build_split(config)
    evaluator = make_evaluator(config, seed, split)
    evolution = replace(config.evolution, seed=seed)
    best, trace = evolve(evolution, evaluator, workers=config.workers)

    record = {
        "run_index": run_index,
        "seed": seed,
        "status": "ok",
        "best_fitness": best.fitness,
        "best_genome": [float(v) for v in best.genome],
        "best_genome_ip": genome_ips(best.genome),
        "best_architecture": [format_layer(g) for g in decode_genome(best.genome)],
        "trace": _trace_dicts(trace),
    }
    if config.evaluator == "cnn" and split.test is not None:
        # retrain the winner with the identical protocol, score on the test set
        report = evaluate_cnn(best.genome, config.evaluation,
                              ds.Split(split.train, split.test), base_seed=seed)
        record["test_accuracy"] = report.fitness
        record["best_error"] = 1.0 - report.fitness
    else:
        record["test_accuracy"] = None
        record["best_error"] = 1.0 - best.fitness
    return record


def _aggregate(errors) -> dict:
    errors = np.asarray(errors, dtype=np.float64)
    if errors.size == 0:
        return {"n": 0, "mean_error": None, "std_error": None, "best_error": None}
    std = float(errors.std(ddof=1)) if errors.size > 1 else 0.0
    return {"n": int(errors.size),
            "mean_error": float(errors.mean()),
            "std_error": std,
            "best_error": float(errors.min())}


@dataclass
class CampaignResult:
    name: str
    config: dict
    records: list
    warnings: list = field(default_factory=list)

    @property
    def errors(self) -> list[float]:
        return [r["best_error"] for r in self.records if r["status"] == "ok"]

    @property
    def aggregates(self) -> dict:
        return _aggregate(self.errors)


def _write_json(path: Path, payload: dict):
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def run_campaign(config: RunConfig) -> CampaignResult:
    """Execute (or resume) all runs, persisting each as it completes."""
    if config.output is None:
        raise ConfigError("campaign needs an output directory")
    out_dir = Path(config.output)
    out_dir.mkdir(parents=True, exist_ok=True)

    split = build_split(config) if config.evaluator == "cnn" else None
    records = []
    for index in range(config.runs):
        path = out_dir / f"run_{index:04d}.json"
        if path.exists():
            with open(path, "r", encoding="utf-8") as fh:
                record = json.load(fh)
            if record.get("status") == "ok":  # resume: keep finished runs
                records.append(record)
                continue
        try:
            record = run_single(config, index, split)
        except (EvaluationError, DataError) as exc:
            record = {"run_index": index, "seed": config.evolution.seed + index,
                      "status": "failed", "reason": str(exc), "best_error": None}
        _write_json(path, record)
        records.append(record)

    result = CampaignResult(config.name, config.to_dict(), records)
    _write_json(out_dir / "campaign.json", {
        "name": config.name,
        "config": config.to_dict(),
        "runs": config.runs,
        "run_files": [f"run_{i:04d}.json" for i in range(config.runs)],
        "per_run_error": [r.get("best_error") for r in records],
        "aggregates": result.aggregates,
    })
    return result


def load_campaign(path) -> CampaignResult:
    """Read a campaign index plus its run records; verify stored aggregates."""
    path = Path(path)
    if path.is_dir():
        path = path / "campaign.json"
    try:
        with open(path, "r", encoding="utf-8") as fh:
            index = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read campaign {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"campaign index {path} is not valid JSON: {exc}") from None
    for key in ("name", "run_files", "aggregates"):
        if key not in index:
            raise DataError(f"campaign index {path} lacks key {key!r}")

    records = []
    for name in index["run_files"]:
        run_path = path.parent / name
        try:
            with open(run_path, "r", encoding="utf-8") as fh:
                records.append(json.load(fh))
        except OSError as exc:
            raise DataError(f"cannot read run record {run_path}: {exc}") from None

    result = CampaignResult(index["name"], index.get("config", {}), records)
    stored, computed = index["aggregates"], result.aggregates
    for key, value in computed.items():
        other = stored.get(key)
        mismatch = (value is None) != (other is None) or (
            value is not None and abs(value - other) > 1e-12)
        if mismatch:
            result.warnings.append(
                f"integrity warning: {path}: stored {key}={other} "
                f"but records give {value}")
    return result


def report(paths, csv_path=None) -> str:
    """Comparison table across campaigns; Welch p-values against the first."""
    campaigns = [load_campaign(p) for p in paths]
    lines = []
    for campaign in campaigns:
        lines.extend(campaign.warnings)

    baseline = campaigns[0]
    header = ["campaign", "runs", "mean_error", "std_error", "best_error"]
    if len(campaigns) > 1:
        header.append(f"p_vs_{baseline.name}")
    rows = []
    for position, campaign in enumerate(campaigns):
        agg = campaign.aggregates
        row = [campaign.name, str(agg["n"])]
        row += ["-" if agg[k] is None else f"{agg[k]:.6f}"
                for k in ("mean_error", "std_error", "best_error")]
        if len(campaigns) > 1:
            if position == 0:
                row.append("-")
            else:
                try:
                    row.append(f"{two_sample_t(baseline.errors, campaign.errors).p_value:.6f}")
                except ValueError:
                    row.append("-")
        rows.append(row)

    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))]
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    text = "\n".join(lines)

    if csv_path:
        import csv

        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    return text
