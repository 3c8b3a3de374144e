"""Command-line entry point: ``summscore <command> [options]``.

Every command accepts ``--config FILE`` (a JSON object whose keys are the
command's long option names with dashes replaced by underscores). Values
given on the command line override the file, which overrides the built-in
defaults. The effective configuration and its fingerprint are written into
each output directory.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path
from typing import Any, Callable, Sequence

from . import harness
from .corpus import (
    DatasetSplit,
    LoadError,
    aggregate_all,
    convert_summeval,
    load_annotated,
    load_unlabeled,
    prepare_split,
    write_records,
)
from .dimensions import QualityDimension
from .encoding import DEFAULT_BUCKETS, EncodingError, SequenceEncoder, TinyTestEncoder, load_encoder
from .lexmetrics import BASELINE_METRICS, score_baselines
from .persist import RunDirectoryLock, RunDirectoryLocked, fingerprint, read_jsonl, write_jsonl
from .regressor import OptimizerConfig, RegressionHead, ScorerModel, load_model, predict_batch
from .trainer import SelectionFunction, save_run, semi_supervised_train

log = logging.getLogger("summscore")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3
HOME_ENV = "SUMMSCORE_HOME"


class UsageError(Exception):
    pass


def cache_root() -> Path:
    """Model cache root: ``$SUMMSCORE_HOME`` or ``~/.cache/summscore``."""
    return Path(os.environ.get(HOME_ENV) or Path.home() / ".cache" / "summscore")


# ---------------------------------------------------------------------------
# configuration

_TRAIN_DEFAULTS: dict[str, Any] = {
    "dimensions": [d.value for d in QualityDimension],
    "k": None,
    "epochs": 6,
    "learning_rate": 2e-5,
    "weight_decay": 0.01,
    "batch_size": 4,
    "warmup_fraction": 0.1,
    "selection": SelectionFunction.MAX_PRODUCT.value,
    "seed": 0,
    "encoder": "tiny",
    "encoder_dim": 16,
    "encoder_buckets": DEFAULT_BUCKETS,
    "max_len": 512,
    "head_hidden": 0,
    "literal_labeled_only": False,
    "resample_validation": False,
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "convert": {"input": None, "output": None},
    "prepare-data": {
        "annotated": None,
        "unlabeled": None,
        "out": None,
        "train_n": 1000,
        "test_n": 600,
        "validation_n": 100,
        "k": 5,
        "seed": 0,
    },
    "train": {"data": None, "out": None, **_TRAIN_DEFAULTS},
    "score": {"models": None, "input": None, "output": None, "dimensions": None, "metrics": []},
    "evaluate": {
        "data": None,
        "models": None,
        "out": None,
        "test": None,
        "baselines": list(BASELINE_METRICS),
        "external": None,
        "level": "summary",
    },
    "ablate-volume": {"data": None, "out": None, "volumes": None, **_TRAIN_DEFAULTS, "dimensions": ["relevance"]},
    "ablate-input-mode": {"data": None, "out": None, **_TRAIN_DEFAULTS, "dimensions": ["consistency"]},
    "ablate-diversity": {
        "data": None,
        "models": None,
        "out": None,
        "test": None,
        "dimensions": ["relevance"],
        "rouge_threshold": 0.3,
        "human_threshold": 4.0,
    },
    "leaderboard": {"outputs": None, "documents": None, "models": None, "out": None},
}

_REQUIRED = {
    "convert": ("input", "output"),
    "prepare-data": ("annotated", "out"),
    "train": ("data", "out"),
    "score": ("models", "input", "output"),
    "evaluate": ("out",),
    "ablate-volume": ("data", "out", "volumes"),
    "ablate-input-mode": ("data", "out"),
    "ablate-diversity": ("models", "out"),
    "leaderboard": ("outputs", "documents", "models", "out"),
}


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def resolve_config(command: str, cli_values: dict[str, Any], config_path: str | None) -> dict[str, Any]:
    """Merge defaults, an optional JSON config file and explicit CLI values."""
    defaults = DEFAULTS[command]
    effective = dict(defaults)
    if config_path:
        path = Path(config_path)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            from_file = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(from_file, dict):
            raise UsageError(f"config file {path} must hold a JSON object")
        unknown = sorted(set(from_file) - set(defaults))
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")
        effective.update(from_file)
    effective.update({k: v for k, v in cli_values.items() if v is not None and k in defaults})
    missing = [k for k in _REQUIRED[command] if effective.get(k) in (None, "", [])]
    if missing:
        raise UsageError(f"{command} needs: {', '.join('--' + m.replace('_', '-') for m in missing)}")
    return effective


# ---------------------------------------------------------------------------
# shared helpers


def _require_file(path: str | Path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {p}")
    return p


def _fresh_dir(path: str | Path) -> Path:
    p = Path(path)
    if p.exists() and any(x.name != ".lock" for x in p.iterdir()):
        raise UsageError(f"output directory {p} is not empty; choose a fresh run directory")
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_config(directory: Path, command: str, config: dict[str, Any]) -> str:
    # where the run is written does not change what it computes
    fp = fingerprint({"command": command, "config": {k: v for k, v in config.items() if k != "out"}})
    (directory / "config.json").write_text(json.dumps({"command": command, **config}, indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")
    (directory / "fingerprint.txt").write_text(fp + "\n", encoding="utf-8")
    return fp


def _dimensions(values: Sequence[str] | None) -> list[QualityDimension]:
    try:
        return [QualityDimension.parse(v) for v in (values or [])]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _build_encoder(cfg: dict[str, Any]) -> SequenceEncoder:
    choice = str(cfg["encoder"])
    if choice == "tiny":
        return TinyTestEncoder(dim=int(cfg["encoder_dim"]), buckets=int(cfg["encoder_buckets"]),
                               max_len=int(cfg["max_len"]), seed=int(cfg["seed"]))
    path = Path(choice)
    if not path.exists():
        path = cache_root() / choice
    if not path.exists():
        raise UsageError(f"encoder {choice!r} is neither 'tiny', a directory, nor present under {cache_root()}")
    if (path / "manifest.txt").exists():
        return load_encoder(path)
    from .transformer_encoder import TransformerCrossEncoder

    return TransformerCrossEncoder.from_pretrained(path, max_len=int(cfg["max_len"]))


def _optimizer(cfg: dict[str, Any]) -> OptimizerConfig:
    try:
        return OptimizerConfig(
            learning_rate=float(cfg["learning_rate"]),
            weight_decay=float(cfg["weight_decay"]),
            batch_size=int(cfg["batch_size"]),
            epochs_per_round=int(cfg["epochs"]),
            warmup_fraction=float(cfg["warmup_fraction"]),
            seed=int(cfg["seed"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _initial_model(dim: QualityDimension, encoder: SequenceEncoder, cfg: dict[str, Any]) -> ScorerModel:
    head = RegressionHead(encoder.dim, hidden=int(cfg["head_hidden"]), seed=int(cfg["seed"]))
    return ScorerModel(dim, encoder.copy(), head, model_id=f"{dim.value}/m0")


def load_split(data_dir: str | Path) -> DatasetSplit:
    """Reload a split written by ``prepare-data``."""
    data_dir = _require_file(data_dir, "data directory")
    manifest = json.loads(_require_file(data_dir / "split.json", "split manifest").read_text(encoding="utf-8"))
    annotated = []
    for name in ("train", "validation", "test"):
        annotated += load_annotated(data_dir / f"{name}.jsonl")
    unlabeled = []
    for j in range(len(manifest["unlabeled_parts"])):
        unlabeled += load_unlabeled(data_dir / f"unlabeled_{j + 1}.jsonl")
    return DatasetSplit.from_manifest(manifest, aggregate_all(annotated), unlabeled)


def load_models(models_dir: str | Path, dims: Sequence[QualityDimension] | None = None) -> dict[QualityDimension, ScorerModel]:
    """Load ``<dim>/best`` checkpoints from a train run (or bare ``<dim>`` checkpoint directories)."""
    root = _require_file(models_dir, "model directory")
    found = {}
    for dim in QualityDimension:
        for candidate in (root / dim.value / "best", root / dim.value):
            if (candidate / "manifest.txt").exists() and (candidate / "head.npy").exists():
                found[dim] = candidate
                break
    if dims is not None:
        missing = [d.value for d in dims if d not in found]
        if missing:
            raise UsageError(f"no checkpoint for {', '.join(missing)} under {root}")
        found = {d: found[d] for d in dims}
    if not found:
        raise UsageError(f"no checkpoints found under {root}")
    models = {}
    for dim, path in found.items():
        model = load_model(path)
        if model.dimension is not dim:
            raise UsageError(f"checkpoint {path} scores {model.dimension.value}, not {dim.value}")
        models[dim] = model
    return models


def _test_set(cfg: dict[str, Any]):
    if cfg.get("test"):
        return aggregate_all(load_annotated(_require_file(cfg["test"], "test file")))
    if cfg.get("data"):
        return load_split(cfg["data"]).test
    raise UsageError("give --test FILE or --data DIR")


# ---------------------------------------------------------------------------
# commands


def cmd_convert(cfg: dict[str, Any]) -> int:
    n = convert_summeval(_require_file(cfg["input"], "input file"), cfg["output"])
    print(f"wrote {n} records to {cfg['output']}")
    return EXIT_OK


def cmd_prepare_data(cfg: dict[str, Any]) -> int:
    annotated_path = _require_file(cfg["annotated"], "annotated data file")
    unlabeled_path = _require_file(cfg["unlabeled"], "unlabeled data file") if cfg["unlabeled"] else None
    out = _fresh_dir(cfg["out"])
    with RunDirectoryLock(out):
        annotated = aggregate_all(load_annotated(annotated_path))
        unlabeled = load_unlabeled(unlabeled_path) if unlabeled_path else []
        try:
            split = prepare_split(annotated, unlabeled, train_n=int(cfg["train_n"]), test_n=int(cfg["test_n"]),
                                  validation_n=int(cfg["validation_n"]), k=int(cfg["k"]), seed=int(cfg["seed"]))
        except ValueError as exc:
            raise LoadError(str(exc)) from None
        fp = _write_config(out, "prepare-data", cfg)
        manifest = split.manifest()
        manifest["config_hash"] = fp
        (out / "split.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
        write_records(out / "train.jsonl", split.train)
        write_records(out / "validation.jsonl", split.validation)
        write_records(out / "test.jsonl", split.test)
        for j, part in enumerate(split.unlabeled_parts, start=1):
            write_records(out / f"unlabeled_{j}.jsonl", part)
    sizes = manifest["sizes"]
    print(f"train={sizes['train']} validation={sizes['validation']} test={sizes['test']} "
          f"unlabeled_parts={sizes['unlabeled_parts']}")
    return EXIT_OK


def cmd_train(cfg: dict[str, Any]) -> int:
    split = load_split(cfg["data"])
    dims = _dimensions(cfg["dimensions"])
    opt = _optimizer(cfg)
    try:
        f = SelectionFunction(cfg["selection"])
    except ValueError:
        raise UsageError(f"unknown selection function {cfg['selection']!r}") from None
    k = split.k if cfg["k"] is None else int(cfg["k"])
    if not 0 <= k <= split.k:
        raise UsageError(f"k={k} but the prepared split has {split.k} unlabeled parts")
    out = _fresh_dir(cfg["out"])
    diverged = []
    with RunDirectoryLock(out):
        fp = _write_config(out, "train", cfg)
        encoder = _build_encoder(cfg)
        for dim in dims:
            m0 = _initial_model(dim, encoder, cfg)
            _, state = semi_supervised_train(m0, split, opt, f, k, literal_labeled_only=bool(cfg["literal_labeled_only"]),
                                             resample_validation_per_round=bool(cfg["resample_validation"]))
            save_run(state, out / dim.value, fp)
            print(f"{dim.value}: best round {state.global_best_round}, {f.value}={state.global_best_score:.4f}, "
                  f"mode {m0.mode.value}")
            if state.aborted_rounds:
                diverged.append(dim.value)
    if diverged:
        log.error("training diverged for %s; partial artifacts kept in %s", ", ".join(diverged), out)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_score(cfg: dict[str, Any]) -> int:
    models = load_models(cfg["models"], _dimensions(cfg["dimensions"]) if cfg["dimensions"] else None)
    input_path = _require_file(cfg["input"], "input file")
    metrics = list(cfg["metrics"] or [])
    unknown = [m for m in metrics if m not in BASELINE_METRICS]
    if unknown:
        raise UsageError(f"unknown lexical metrics: {', '.join(unknown)}")
    records = list(read_jsonl(input_path))
    if not records:
        warnings.warn(f"{input_path} holds no records; writing an empty score file", stacklevel=1)
    rows: list[dict[str, Any]] = []
    for n, rec in enumerate(records, start=1):
        if "id" not in rec or "summary" not in rec:
            raise LoadError("missing field 'id' or 'summary'", record=n, path=input_path)
    items = [(r.get("document"), r["summary"], r.get("reference")) for r in records]
    model_scores = {d.value: predict_batch(m, items) for d, m in models.items()} if records else {}
    lexical = {}
    if metrics and records:
        missing = [r["id"] for r in records if not r.get("reference")]
        if missing:
            raise LoadError(f"lexical metrics need a reference (first missing: {missing[0]})", path=input_path)
        lexical = score_baselines([r["summary"] for r in records], [r["reference"] for r in records], metrics,
                                  corpus=[r.get("document") or "" for r in records])
    for i, rec in enumerate(records):
        for name, col in list(model_scores.items()) + list(lexical.items()):
            rows.append({"id": rec["id"], "metric": name, "score": col[i]})
    Path(cfg["output"]).parent.mkdir(parents=True, exist_ok=True)
    write_jsonl(cfg["output"], rows)
    print(f"wrote {len(rows)} scores for {len(records)} records to {cfg['output']}")
    return EXIT_OK


def cmd_evaluate(cfg: dict[str, Any]) -> int:
    test = _test_set(cfg)
    models = load_models(cfg["models"]) if cfg["models"] else {}
    external = harness.load_external_scores(_require_file(cfg["external"], "external score file")) if cfg["external"] else None
    unknown = [m for m in cfg["baselines"] if m not in BASELINE_METRICS]
    if unknown:
        raise UsageError(f"unknown lexical metrics: {', '.join(unknown)}")
    out = _fresh_dir(cfg["out"])
    with RunDirectoryLock(out):
        fp = _write_config(out, "evaluate", cfg)
        exp = harness.run_correlation_experiment(models, test, baselines=cfg["baselines"], external=external,
                                                 level=cfg["level"])
        text = harness.describe_table(exp.table)
        harness.write_run_artifacts(out, fingerprint=fp, config=cfg, raw=exp.raw, aggregate_csv=exp.table.to_csv(),
                                    summary=f"{cfg['level']}-level correlations on {len(test)} examples\n{text}")
    print(text, end="")
    return EXIT_OK


def _ablation_start(cfg: dict[str, Any]) -> tuple[DatasetSplit, ScorerModel, OptimizerConfig, SelectionFunction]:
    split = load_split(cfg["data"])
    dims = _dimensions(cfg["dimensions"])
    if len(dims) != 1:
        raise UsageError("ablations take exactly one dimension")
    encoder = _build_encoder(cfg)
    return split, _initial_model(dims[0], encoder, cfg), _optimizer(cfg), SelectionFunction(cfg["selection"])


def cmd_ablate_volume(cfg: dict[str, Any]) -> int:
    split, m0, opt, f = _ablation_start(cfg)
    try:
        harness.rounds_for_volumes(split, list(cfg["volumes"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _fresh_dir(cfg["out"])
    with RunDirectoryLock(out):
        fp = _write_config(out, "ablate-volume", cfg)
        series, states, raw = harness.run_volume_sweep(m0, split, opt, f, list(cfg["volumes"]), fingerprint=fp)
        for volume, state in zip(series.x, states):
            write_jsonl(out / f"audit_volume_{volume}.jsonl", state.audit)
        lines = [f"volume {x}: rounds={r} pearson={p:.4f} spearman={s:.4f}"
                 for x, r, p, s in zip(series.x, series.rounds, series.pearson, series.spearman)]
        harness.write_run_artifacts(out, fingerprint=fp, config=cfg, raw=raw, aggregate_csv=series.to_csv(),
                                    summary="\n".join(lines))
    print("\n".join(lines))
    return EXIT_OK


def cmd_ablate_input_mode(cfg: dict[str, Any]) -> int:
    split, m0, opt, f = _ablation_start(cfg)
    if m0.mode.value != "paired":
        raise UsageError(f"{m0.dimension.value} takes summary-only input; choose consistency or relevance")
    k = split.k if cfg["k"] is None else int(cfg["k"])
    out = _fresh_dir(cfg["out"])
    with RunDirectoryLock(out):
        fp = _write_config(out, "ablate-input-mode", cfg)
        result = harness.run_input_mode_ablation(m0, split, opt, f, k)
        for pairing, state in result.states.items():
            write_jsonl(out / f"audit_{pairing}.jsonl", state.audit)
            (out / f"config_{pairing}.json").write_text(json.dumps(result.configs[pairing], indent=2, sort_keys=True) + "\n",
                                                        encoding="utf-8")
        lines = [f"{p}: pearson={r.pearson:.4f} spearman={r.spearman:.4f}" for p, r in result.results.items()]
        harness.write_run_artifacts(out, fingerprint=fp, config=cfg, raw=result.raw, aggregate_csv=result.to_csv(),
                                    summary="\n".join(lines))
    print("\n".join(lines))
    return EXIT_OK


def cmd_ablate_diversity(cfg: dict[str, Any]) -> int:
    dims = _dimensions(cfg["dimensions"])
    if len(dims) != 1:
        raise UsageError("the diversity export takes exactly one dimension")
    models = load_models(cfg["models"], dims)
    test = _test_set(cfg)
    out = _fresh_dir(cfg["out"])
    with RunDirectoryLock(out):
        fp = _write_config(out, "ablate-diversity", cfg)
        export = harness.export_diversity_scatter(models[dims[0]], test, rouge_threshold=float(cfg["rouge_threshold"]),
                                                  human_threshold=float(cfg["human_threshold"]))
        n = len({r["id"] for r in export.records})
        harness.write_run_artifacts(out, fingerprint=fp, config=cfg, raw=export.raw, aggregate_csv=export.to_csv(),
                                    summary=export.header().lstrip("# "))
    print(f"selected {n} of {len(test)} examples")
    return EXIT_OK


def cmd_leaderboard(cfg: dict[str, Any]) -> int:
    outputs: dict[str, dict[str, str]] = {}
    path = _require_file(cfg["outputs"], "system outputs file")
    for n, row in enumerate(read_jsonl(path), start=1):
        try:
            system, doc_id, summary = str(row["system"]), str(row["doc_id"]), str(row["summary"])
        except KeyError as exc:
            raise LoadError(f"missing field {exc.args[0]!r}", record=n, path=path) from None
        outputs.setdefault(system, {})[doc_id] = summary
    documents: dict[str, tuple[str, str | None]] = {}
    path = _require_file(cfg["documents"], "documents file")
    for n, row in enumerate(read_jsonl(path), start=1):
        try:
            documents[str(row["doc_id"])] = (str(row["document"]), row.get("reference"))
        except KeyError as exc:
            raise LoadError(f"missing field {exc.args[0]!r}", record=n, path=path) from None
    models = load_models(cfg["models"], list(QualityDimension))
    out = _fresh_dir(cfg["out"])
    with RunDirectoryLock(out):
        fp = _write_config(out, "leaderboard", cfg)
        rows, raw = harness.build_leaderboard(outputs, documents, models)
        csv_text = harness.leaderboard_csv(rows)
        harness.write_run_artifacts(out, fingerprint=fp, config=cfg, raw=raw, aggregate_csv=csv_text,
                                    summary=harness.leaderboard_csv(rows, digits=4))
    print(harness.leaderboard_csv(rows, digits=4), end="")
    return EXIT_OK


COMMANDS: dict[str, Callable[[dict[str, Any]], int]] = {
    "convert": cmd_convert,
    "prepare-data": cmd_prepare_data,
    "train": cmd_train,
    "score": cmd_score,
    "evaluate": cmd_evaluate,
    "ablate-volume": cmd_ablate_volume,
    "ablate-input-mode": cmd_ablate_input_mode,
    "ablate-diversity": cmd_ablate_diversity,
    "leaderboard": cmd_leaderboard,
}


# ---------------------------------------------------------------------------
# argument parsing


def _add_train_options(p: argparse.ArgumentParser, with_data: bool = True) -> None:
    if with_data:
        p.add_argument("--data", help="directory written by prepare-data")
    p.add_argument("--dimensions", type=_csv_list, help="comma-separated quality dimensions")
    p.add_argument("--k", type=int, help="number of pseudo-labeling rounds (default: all prepared parts)")
    p.add_argument("--epochs", type=int, help="epochs per round")
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--warmup-fraction", type=float)
    p.add_argument("--selection", choices=[s.value for s in SelectionFunction])
    p.add_argument("--seed", type=int)
    p.add_argument("--encoder", help="'tiny', a checkpoint directory, or a model name under $" + HOME_ENV)
    p.add_argument("--encoder-dim", type=int, help="hidden size of the tiny encoder")
    p.add_argument("--encoder-buckets", type=int, help="hashed vocabulary size of the tiny encoder")
    p.add_argument("--max-len", type=int)
    p.add_argument("--head-hidden", type=int, help="hidden units of an optional MLP head (0 = affine)")
    p.add_argument("--literal-labeled-only", action="store_const", const=True,
                   help="train every pseudo-labeling round on the labeled data only")
    p.add_argument("--resample-validation", action="store_const", const=True,
                   help="draw a fresh validation set from the labeled data at every round")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="summscore", description="Learned summary-quality scoring with pseudo-labeling.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.set_defaults(command_key=name)
        return p

    p = add("convert", "convert upstream SummEval annotations to the canonical record layout")
    p.add_argument("--input")
    p.add_argument("--output")

    p = add("prepare-data", "split annotated data and partition the unlabeled pool")
    p.add_argument("--annotated", help="annotated records (.jsonl)")
    p.add_argument("--unlabeled", help="unlabeled (document, summary) records (.jsonl)")
    p.add_argument("--out")
    p.add_argument("--train-n", type=int)
    p.add_argument("--test-n", type=int)
    p.add_argument("--validation-n", type=int)
    p.add_argument("--k", type=int, help="number of unlabeled parts")
    p.add_argument("--seed", type=int)

    p = add("train", "train one scorer per dimension with multi-round pseudo-labeling")
    p.add_argument("--out")
    _add_train_options(p)

    p = add("score", "score a record file with trained scorers and optional lexical metrics")
    p.add_argument("--models", help="train run directory")
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--dimensions", type=_csv_list)
    p.add_argument("--metrics", type=_csv_list, help="lexical metrics, e.g. rouge1,bleu4")

    p = add("evaluate", "correlate learned, lexical and external metrics with human scores")
    p.add_argument("--data", help="prepared data directory (its test split is used)")
    p.add_argument("--test", help="annotated test file instead of --data")
    p.add_argument("--models", help="train run directory (omit for baselines only)")
    p.add_argument("--out")
    p.add_argument("--baselines", type=_csv_list)
    p.add_argument("--external", help="line-delimited {id, metric, score} file")
    p.add_argument("--level", choices=["summary", "system"])

    ablate = sub.add_parser("ablate", help="ablation experiments")
    asub = ablate.add_subparsers(dest="ablation", metavar="ablation")

    def add_ablation(name: str, help_text: str) -> argparse.ArgumentParser:
        p = asub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.set_defaults(command_key=f"ablate-{name}")
        return p

    p = add_ablation("volume", "test correlation as the pseudo-labeled volume grows")
    p.add_argument("--out")
    p.add_argument("--volumes", type=_int_list, help="comma-separated increasing pseudo-data volumes")
    _add_train_options(p)

    p = add_ablation("input-mode", "pair the summary with the document or with the reference")
    p.add_argument("--out")
    _add_train_options(p)

    p = add_ablation("diversity", "export low-ROUGE, high-human-score examples for plotting")
    p.add_argument("--models")
    p.add_argument("--data")
    p.add_argument("--test")
    p.add_argument("--out")
    p.add_argument("--dimensions", type=_csv_list)
    p.add_argument("--rouge-threshold", type=float)
    p.add_argument("--human-threshold", type=float)

    p = add("leaderboard", "mean scores and ROUGE per summarization system")
    p.add_argument("--outputs", help="line-delimited {system, doc_id, summary}")
    p.add_argument("--documents", help="line-delimited {doc_id, document, reference}")
    p.add_argument("--models")
    p.add_argument("--out")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    command = getattr(args, "command_key", None)
    if command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    values = {k: v for k, v in vars(args).items() if k not in ("command", "command_key", "ablation", "config", "verbose")}
    try:
        cfg = resolve_config(command, values, args.config)
        return COMMANDS[command](cfg)
    except UsageError as exc:
        print(f"summscore: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LoadError, EncodingError, json.JSONDecodeError) as exc:
        print(f"summscore: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RunDirectoryLocked as exc:
        print(f"summscore: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"summscore: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
