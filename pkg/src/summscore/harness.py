"""Experiment orchestration: correlation grids, ablations, scatter export, leaderboards.

Every experiment returns its aggregates together with the raw per-example
scores they were computed from, so any summary artifact can be re-derived
from the line-delimited raw file alone.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .corpus import AnnotatedExample, DatasetSplit
from .dimensions import InputMode, QualityDimension
from .lexmetrics import BASELINE_METRICS, metric_tokenize, rouge_l, rouge_n, score_baselines
from .persist import read_jsonl, write_jsonl
from .regressor import REPORT_MAX, REPORT_MIN, OptimizerConfig, ScorerModel, predict_batch
from .stats import CorrelationResult, CorrelationTable, correlate, correlation_table, system_level
from .trainer import SelectionFunction, TrainRunState, semi_supervised_train

LEARNED_METRIC = "summscore"
HUMAN = "human"


def _dims(models: Mapping[Any, ScorerModel]) -> dict[QualityDimension, ScorerModel]:
    out = {}
    for key, model in models.items():
        dim = QualityDimension.parse(key)
        if model.dimension is not dim:
            raise ValueError(f"model for {dim.value} was trained for {model.dimension.value}")
        out[dim] = model
    return out


def _gold_dims(examples: Sequence[AnnotatedExample], wanted: Sequence[QualityDimension] | None) -> list[QualityDimension]:
    if wanted is not None:
        dims = list(wanted)
    else:
        dims = [d for d in QualityDimension if all(d in ex.aggregated_score for ex in examples)]
    for d in dims:
        missing = [ex.id for ex in examples if d not in ex.aggregated_score]
        if missing:
            raise ValueError(f"{len(missing)} test examples lack an aggregated {d.value} score (first: {missing[0]})")
    return dims


# ---------------------------------------------------------------------------
# external score files


def load_external_scores(path: str | Path) -> dict[str, dict[str, Any]]:
    """Read line-delimited ``{"id", "metric", "score"[, "dimension"]}`` rows.

    A metric whose rows carry no dimension becomes ``metric -> id -> score``
    and is correlated against every dimension; a metric with per-dimension
    rows becomes ``metric -> dimension -> id -> score``.
    """
    out: dict[str, dict[str, Any]] = {}
    kinds: dict[str, bool] = {}
    for n, row in enumerate(read_jsonl(path), start=1):
        try:
            metric, ex_id, score = str(row["metric"]), str(row["id"]), float(row["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}: malformed score row {n}: {exc}") from exc
        dim = row.get("dimension")
        if kinds.setdefault(metric, dim is not None) != (dim is not None):
            raise ValueError(f"{path}: metric {metric!r} mixes rows with and without a dimension")
        column = out.setdefault(metric, {})
        if dim is not None:
            column = column.setdefault(QualityDimension.parse(dim).value, {})
        if ex_id in column:
            raise ValueError(f"{path}: duplicate score for id {ex_id!r} metric {metric!r}")
        column[ex_id] = score
    return out


# ---------------------------------------------------------------------------
# correlation grid


@dataclass
class CorrelationExperiment:
    table: CorrelationTable
    raw: list[dict[str, Any]]  # one row per (example, metric[, dimension]) plus gold rows
    level: str = "summary"


def _raw_row(ex: AnnotatedExample, metric: str, dimension: str | None, score: float) -> dict[str, Any]:
    return {"id": ex.id, "system": ex.system, "metric": metric, "dimension": dimension, "score": score}


def run_correlation_experiment(
    models: Mapping[Any, ScorerModel],
    test_set: Sequence[AnnotatedExample],
    *,
    baselines: Sequence[str] = BASELINE_METRICS,
    external: Mapping[str, Mapping[str, Any]] | None = None,
    dimensions: Sequence[QualityDimension | str] | None = None,
    level: str = "summary",
    tfidf_corpus: Sequence[str] | None = None,
) -> CorrelationExperiment:
    """Score every test example with every metric and correlate with the gold scores.

    ``models`` maps a dimension to its trained scorer; lexical ``baselines``
    compare each summary with its reference; ``external`` columns (as read by
    :func:`load_external_scores`) are taken as given, keyed by example id. With ``level="system"`` each column is
    averaged per system before correlating.
    """
    if level not in ("summary", "system"):
        raise ValueError(f"unknown correlation level {level!r}")
    if not test_set:
        raise ValueError("test set is empty")
    models = _dims(models)
    dims = _gold_dims(test_set, None if dimensions is None else [QualityDimension.parse(d) for d in dimensions])
    raw: list[dict[str, Any]] = []
    for d in dims:
        raw.extend(_raw_row(ex, HUMAN, d.value, ex.gold(d)) for ex in test_set)

    for d, model in models.items():
        scores = predict_batch(model, test_set)
        raw.extend(_raw_row(ex, LEARNED_METRIC, d.value, y) for ex, y in zip(test_set, scores))

    if baselines:
        missing = [ex.id for ex in test_set if not ex.reference]
        if missing:
            raise ValueError(f"lexical baselines need references; {len(missing)} examples lack one (first: {missing[0]})")
        corpus = tfidf_corpus if tfidf_corpus is not None else [ex.document_text for ex in test_set]
        cols = score_baselines([ex.summary_text for ex in test_set], [ex.reference for ex in test_set],
                               baselines, corpus=corpus)
        for metric in baselines:
            raw.extend(_raw_row(ex, metric, None, s) for ex, s in zip(test_set, cols[metric]))

    for metric, columns in (external or {}).items():
        nested = bool(columns) and isinstance(next(iter(columns.values())), Mapping)
        for dim, column in (columns.items() if nested else [(None, columns)]):
            missing = [ex.id for ex in test_set if ex.id not in column]
            if missing:
                raise ValueError(f"external metric {metric!r} has no score for {len(missing)} examples "
                                 f"(first: {missing[0]})")
            raw.extend(_raw_row(ex, metric, dim, float(column[ex.id])) for ex in test_set)

    return CorrelationExperiment(table_from_raw(raw, level), raw, level)


def table_from_raw(raw: Sequence[Mapping[str, Any]], level: str = "summary") -> CorrelationTable:
    """Rebuild a correlation grid from raw score rows (the audit path)."""
    order: list[str] = []
    systems: dict[str, str] = {}
    human: dict[str, dict[str, float]] = {}
    shared: dict[str, dict[str, float]] = {}
    per_dim: dict[str, dict[str, dict[str, float]]] = {}
    for row in raw:
        ex_id = row["id"]
        if ex_id not in systems:
            systems[ex_id] = row.get("system", "")
            order.append(ex_id)
        metric, dim, score = row["metric"], row.get("dimension"), float(row["score"])
        if metric == HUMAN:
            human.setdefault(dim, {})[ex_id] = score
        elif dim is None:
            shared.setdefault(metric, {})[ex_id] = score
        else:
            per_dim.setdefault(metric, {}).setdefault(dim, {})[ex_id] = score

    def column(values: Mapping[str, float]) -> list[float]:
        return [values[i] for i in order]

    def aggregate(col: list[float]) -> list[float]:
        return system_level(col, [systems[i] for i in order])[1] if level == "system" else col

    human_cols = {d: aggregate(column(v)) for d, v in human.items()}
    score_cols: dict[str, Any] = {}
    for metric in [m for m in dict.fromkeys(r["metric"] for r in raw) if m != HUMAN]:
        if metric in per_dim:
            score_cols[metric] = {d: aggregate(column(v)) for d, v in per_dim[metric].items()}
        else:
            score_cols[metric] = aggregate(column(shared[metric]))
    return correlation_table(score_cols, human_cols)


# ---------------------------------------------------------------------------
# pseudo-data volume sweep


@dataclass
class AblationSeries:
    x: list[int]
    pearson: list[float]
    spearman: list[float]
    fingerprint: str = ""
    dimension: str = ""
    rounds: list[int] = field(default_factory=list)  # Part 2 rounds run for each point

    def __post_init__(self) -> None:
        if not (len(self.x) == len(self.pearson) == len(self.spearman)):
            raise ValueError("series columns are misaligned")
        if any(b <= a for a, b in zip(self.x, self.x[1:])):
            raise ValueError("series x values must be strictly increasing")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# dimension={self.dimension} config={self.fingerprint}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pseudo_volume", "rounds", "pearson", "spearman"])
        for i, x in enumerate(self.x):
            w.writerow([x, self.rounds[i] if i < len(self.rounds) else "", repr(self.pearson[i]), repr(self.spearman[i])])
        return buf.getvalue()


def _test_correlation(model: ScorerModel, test_set: Sequence[AnnotatedExample]) -> CorrelationResult:
    return correlate(predict_batch(model, test_set), [ex.gold(model.dimension) for ex in test_set])


def rounds_for_volumes(split: DatasetSplit, volumes: Sequence[int]) -> list[int]:
    """Map each pseudo-data volume to the number of unlabeled parts whose sizes sum to it."""
    if not volumes:
        raise ValueError("no volumes requested")
    if any(v < 0 for v in volumes):
        raise ValueError("volumes must be non-negative")
    if any(b <= a for a, b in zip(volumes, volumes[1:])):
        raise ValueError(f"volumes must be strictly increasing, got {list(volumes)}")
    prefix = [0]
    for part in split.unlabeled_parts:
        prefix.append(prefix[-1] + len(part))
    if volumes[-1] > prefix[-1]:
        raise ValueError(f"largest volume {volumes[-1]} exceeds the unlabeled pool of {prefix[-1]}")
    out = []
    for v in volumes:
        if v not in prefix:
            raise ValueError(f"volume {v} is not a whole number of parts (cumulative part sizes {prefix})")
        out.append(prefix.index(v))
    return out


def run_volume_sweep(
    m0: ScorerModel,
    split: DatasetSplit,
    opt: OptimizerConfig,
    f: SelectionFunction | str,
    volumes: Sequence[int],
    *,
    fingerprint: str = "",
) -> tuple[AblationSeries, list[TrainRunState], list[dict[str, Any]]]:
    """Independent runs with growing pseudo-data volume, scored on the test split.

    Returns the series, each run's state, and raw per-example test scores
    (tagged with the volume) from which the series can be recomputed.
    """
    ks = rounds_for_volumes(split, volumes)
    pearsons, spearmans, states, raw = [], [], [], []
    for volume, k in zip(volumes, ks):
        best, state = semi_supervised_train(m0, split, opt, f, k)
        scores = predict_batch(best, split.test)
        gold = [ex.gold(m0.dimension) for ex in split.test]
        res = correlate(scores, gold)
        pearsons.append(res.pearson)
        spearmans.append(res.spearman)
        states.append(state)
        raw.extend({"volume": volume, "id": ex.id, "score": s, "gold": g} for ex, s, g in zip(split.test, scores, gold))
    series = AblationSeries(list(volumes), pearsons, spearmans, fingerprint, m0.dimension.value, ks)
    return series, states, raw


# ---------------------------------------------------------------------------
# input pairing ablation


@dataclass
class InputModeAblation:
    dimension: str
    results: dict[str, CorrelationResult]  # pairing -> test correlation
    states: dict[str, TrainRunState]
    configs: dict[str, dict[str, Any]]
    raw: list[dict[str, Any]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dimension", "pairing", "input", "pearson", "spearman", "n"])
        labels = {"document": "[CLS] O [SEP] S", "reference": "[CLS] S [SEP] ref"}
        for pairing, res in self.results.items():
            w.writerow([self.dimension, pairing, labels[pairing], repr(res.pearson), repr(res.spearman), res.n])
        return buf.getvalue()


def run_input_mode_ablation(
    m0: ScorerModel,
    split: DatasetSplit,
    opt: OptimizerConfig,
    f: SelectionFunction | str,
    k: int | None = None,
) -> InputModeAblation:
    """Train the same paired-input scorer twice, pairing the summary with the document or the reference."""
    if m0.mode is not InputMode.PAIRED:
        raise ValueError(f"{m0.dimension.value} takes summary-only input; the pairing ablation needs a paired dimension")
    records = list(split.train) + list(split.validation) + list(split.test)
    records += [u for part in split.unlabeled_parts for u in part]
    missing = [r.id for r in records if not r.reference]
    if missing:
        raise ValueError(f"reference pairing needs references; {len(missing)} records lack one (first: {missing[0]})")
    f = SelectionFunction(f)
    results, states, configs, raw = {}, {}, {}, []
    for pairing in ("document", "reference"):
        start = m0.with_pairing(pairing)
        best, state = semi_supervised_train(start, split, opt, f, k)
        for entry in state.audit:
            entry["pairing"] = pairing
        scores = predict_batch(best, split.test)
        gold = [ex.gold(m0.dimension) for ex in split.test]
        results[pairing] = correlate(scores, gold)
        states[pairing] = state
        configs[pairing] = {
            "dimension": m0.dimension.value,
            "pairing": pairing,
            "selection": f.value,
            "k": state.k,
            "optimizer": opt.to_dict(),
            "initial_digest": state.initial_digest,
        }
        raw.extend({"pairing": pairing, "id": ex.id, "score": s, "gold": g} for ex, s, g in zip(split.test, scores, gold))
    return InputModeAblation(m0.dimension.value, results, states, configs, raw)


# ---------------------------------------------------------------------------
# diversity scatter


@dataclass
class DiversityExport:
    rouge_threshold: float
    human_threshold: float
    dimension: str
    raw: list[dict[str, Any]]  # every example: id, rouge1_f1, human, and one score per mode
    records: list[dict[str, Any]]  # filtered (human, model score) pairs, one per example and mode

    def header(self) -> str:
        return (f"# filter: rouge1_f1 < {self.rouge_threshold!r} and human > {self.human_threshold!r}; "
                f"dimension={self.dimension}; selected={len({r['id'] for r in self.records})} of {len(self.raw)}\n")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.header())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "mode", "rouge1_f1", "human", "model_score"])
        for r in self.records:
            w.writerow([r["id"], r["mode"], repr(r["rouge1_f1"]), repr(r["human"]), repr(r["model_score"])])
        return buf.getvalue()


def select_diverse(raw: Sequence[Mapping[str, Any]], rouge_threshold: float, human_threshold: float) -> list[str]:
    return [r["id"] for r in raw if r["rouge1_f1"] < rouge_threshold and r["human"] > human_threshold]


def export_diversity_scatter(
    models: ScorerModel | Mapping[str, ScorerModel],
    examples: Sequence[AnnotatedExample],
    *,
    rouge_threshold: float = 0.3,
    human_threshold: float = 4.0,
) -> DiversityExport:
    """Keep examples with low ROUGE-1 against the reference but a high human score.

    ``models`` is one scorer or a mapping from a mode label to scorers of the
    same dimension (for instance one per input pairing).
    """
    if isinstance(models, ScorerModel):
        models = {models.pairing: models}
    dims = {m.dimension for m in models.values()}
    if len(dims) != 1:
        raise ValueError("all scatter models must score the same dimension")
    (dim,) = dims
    missing = [ex.id for ex in examples if not ex.reference]
    if missing:
        raise ValueError(f"the ROUGE filter needs references; {len(missing)} examples lack one (first: {missing[0]})")
    scores = {label: predict_batch(m, examples) for label, m in models.items()}
    raw = []
    for i, ex in enumerate(examples):
        row = {"id": ex.id, "rouge1_f1": rouge_n(ex.summary_text, ex.reference, 1).f1, "human": ex.gold(dim)}
        row.update({f"score:{label}": scores[label][i] for label in models})
        raw.append(row)
    keep = set(select_diverse(raw, rouge_threshold, human_threshold))
    records = [
        {"id": r["id"], "mode": label, "rouge1_f1": r["rouge1_f1"], "human": r["human"], "model_score": r[f"score:{label}"]}
        for r in raw
        if r["id"] in keep
        for label in models
    ]
    if not records:
        warnings.warn("diversity filter selected no examples", stacklevel=2)
    return DiversityExport(rouge_threshold, human_threshold, dim.value, raw, records)


# ---------------------------------------------------------------------------
# leaderboard


@dataclass(frozen=True)
class LeaderboardRow:
    system: str
    rouge_1: float
    rouge_2: float
    rouge_l: float
    coherence: float
    consistency: float
    fluency: float
    relevance: float
    n: int
    partial: bool = False

    def __post_init__(self) -> None:
        for name in ("coherence", "consistency", "fluency", "relevance"):
            v = getattr(self, name)
            if not REPORT_MIN <= v <= REPORT_MAX:
                raise ValueError(f"{name} mean {v} outside [{REPORT_MIN}, {REPORT_MAX}]")
        for name in ("rouge_1", "rouge_2", "rouge_l"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} outside [0, 1]")

    @property
    def mean_score(self) -> float:
        return (self.coherence + self.consistency + self.fluency + self.relevance) / 4.0


LEADERBOARD_COLUMNS = ("system", "rouge_1", "rouge_2", "rouge_l", "coherence", "consistency", "fluency",
                       "relevance", "n", "partial")
_LB_METRICS = ("rouge_1", "rouge_2", "rouge_l") + tuple(d.value for d in QualityDimension)


def leaderboard_from_raw(raw: Sequence[Mapping[str, Any]], n_documents: int) -> list[LeaderboardRow]:
    """Average raw ``(system, doc_id, metric, score)`` rows into sorted leaderboard rows."""
    sums: dict[str, dict[str, list[float]]] = {}
    docs: dict[str, set[str]] = {}
    for r in raw:
        sums.setdefault(r["system"], {}).setdefault(r["metric"], []).append(float(r["score"]))
        docs.setdefault(r["system"], set()).add(r["doc_id"])
    rows = []
    for system, cols in sums.items():
        means = {m: math.fsum(cols[m]) / len(cols[m]) for m in _LB_METRICS}
        n = len(docs[system])
        rows.append(LeaderboardRow(system, n=n, partial=n < n_documents, **means))
    rows.sort(key=lambda r: (-r.mean_score, r.system))
    return rows


def build_leaderboard(
    system_outputs: Mapping[str, Mapping[str, str]],
    documents: Mapping[str, tuple[str, str | None]],
    models: Mapping[Any, ScorerModel],
) -> tuple[list[LeaderboardRow], list[dict[str, Any]]]:
    """Mean learned scores and ROUGE-1/2/L per system, sorted by the mean of the four dimensions.

    ``system_outputs`` maps system -> document id -> summary; ``documents``
    maps document id -> (document text, reference). A system missing some
    documents is scored on what it has and flagged ``partial``.
    """
    models = _dims(models)
    absent = [d.value for d in QualityDimension if d not in models]
    if absent:
        raise ValueError(f"leaderboard needs all four dimension models; missing {', '.join(absent)}")
    raw: list[dict[str, Any]] = []
    for system, outputs in system_outputs.items():
        unknown = [d for d in outputs if d not in documents]
        if unknown:
            raise ValueError(f"system {system!r} has summaries for unknown documents (first: {unknown[0]})")
        doc_ids = [d for d in documents if d in outputs]
        if not doc_ids:
            raise ValueError(f"system {system!r} has no summaries")
        for doc_id in doc_ids:
            document, reference = documents[doc_id]
            summary = outputs[doc_id]
            if not reference:
                raise ValueError(f"document {doc_id!r} has no reference for ROUGE")
            s, r = metric_tokenize(summary), metric_tokenize(reference)
            for name, value in (("rouge_1", rouge_n(s, r, 1).f1), ("rouge_2", rouge_n(s, r, 2).f1),
                                ("rouge_l", rouge_l(s, r).f1)):
                raw.append({"system": system, "doc_id": doc_id, "metric": name, "score": value})
            for dim, model in models.items():
                y = predict_batch(model, [(document, summary, reference)], clamp=True)[0]
                raw.append({"system": system, "doc_id": doc_id, "metric": dim.value, "score": y})
    return leaderboard_from_raw(raw, len(documents)), raw


def leaderboard_csv(rows: Sequence[LeaderboardRow], digits: int | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEADERBOARD_COLUMNS)
    for row in rows:
        values = []
        for col in LEADERBOARD_COLUMNS:
            v = getattr(row, col)
            if isinstance(v, float):
                values.append(f"{v:.{digits}f}" if digits is not None else repr(v))
            else:
                values.append(str(int(v)) if isinstance(v, bool) else str(v))
        w.writerow(values)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# run directories


def write_run_artifacts(
    directory: str | Path,
    *,
    fingerprint: str,
    config: Mapping[str, Any],
    raw: Sequence[Mapping[str, Any]],
    aggregate_csv: str,
    summary: str,
    extra: Mapping[str, str] | None = None,
) -> Path:
    """Write the standard experiment outputs into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "fingerprint.txt").write_text(fingerprint + "\n", encoding="utf-8")
    (directory / "config.json").write_text(json.dumps(dict(config), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_jsonl(directory / "raw_scores.jsonl", raw)
    (directory / "aggregate.csv").write_text(aggregate_csv, encoding="utf-8")
    (directory / "summary.txt").write_text(summary.rstrip("\n") + f"\nconfig fingerprint: {fingerprint}\n", encoding="utf-8")
    for name, text in (extra or {}).items():
        (directory / name).write_text(text, encoding="utf-8")
    return directory


def describe_table(table: CorrelationTable, digits: int = 4) -> str:
    """Fixed-width text rendering of a correlation grid (pearson/spearman per cell)."""
    width = max([len(m) for m in table.metrics] + [6])
    lines = [" " * width + "".join(f"  {d:>17}" for d in table.dimensions)]
    for m in table.metrics:
        cells = []
        for d in table.dimensions:
            c = table.cells.get((m, d))
            if c is None or not c.defined:
                cells.append(f"  {'-':>17}")
            else:
                cells.append(f"  {c.pearson:>8.{digits}f}/{c.spearman:<8.{digits}f}")
        lines.append(m.ljust(width) + "".join(cells))
    return "\n".join(lines) + "\n"


__all__ = [
    "AblationSeries",
    "CorrelationExperiment",
    "DiversityExport",
    "InputModeAblation",
    "LeaderboardRow",
    "build_leaderboard",
    "describe_table",
    "export_diversity_scatter",
    "leaderboard_csv",
    "leaderboard_from_raw",
    "load_external_scores",
    "rounds_for_volumes",
    "run_correlation_experiment",
    "run_input_mode_ablation",
    "run_volume_sweep",
    "select_diverse",
    "table_from_raw",
    "write_run_artifacts",
]
