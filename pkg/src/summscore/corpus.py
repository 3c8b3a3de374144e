"""Annotated/unlabeled record schema, ingestion and dataset splitting.

Canonical files are JSON Lines, one record per line::

    {"id": "...", "document": "...", "summary": "...", "system": "...",
     "reference": "...",                       # optional
     "expert_scores": {"coherence": [4, 5, 3], ...},   # annotated files only
     "crowd_scores": {...}}                    # optional, carried as metadata

Only the expert scores supervise training; crowd scores are kept so that a
converted file round-trips.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

from .dimensions import QualityDimension

SCORE_MIN = 1.0
SCORE_MAX = 5.0

_KNOWN_FIELDS = {"id", "document", "summary", "system", "reference", "expert_scores", "crowd_scores"}


class LoadError(ValueError):
    """A dataset record failed validation; ``record`` is its 1-based position."""

    def __init__(self, message: str, record: int | None = None, path: str | Path | None = None):
        self.record = record
        self.path = str(path) if path is not None else None
        text = message
        if record is not None:
            text += f" at record {record}"
        if path is not None:
            text += f" in {path}"
        super().__init__(text)
        self.reason = message


@dataclass(frozen=True)
class AnnotatedExample:
    id: str
    document_text: str
    summary_text: str
    system: str
    expert_scores: dict[QualityDimension, tuple[float, ...]]
    aggregated_score: dict[QualityDimension, float] = field(default_factory=dict)
    reference: str | None = None
    crowd_scores: dict[str, Any] | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.document_text.strip() or not self.summary_text.strip():
            raise ValueError(f"example {self.id!r}: document and summary must be non-empty")
        for dim, scores in self.expert_scores.items():
            for s in scores:
                if not (SCORE_MIN <= s <= SCORE_MAX):
                    raise ValueError(f"example {self.id!r}: {dim.value} score {s} out of range [1, 5]")

    def gold(self, dimension: QualityDimension) -> float:
        try:
            return self.aggregated_score[dimension]
        except KeyError:
            raise KeyError(
                f"example {self.id!r} has no aggregated {dimension.value} score; run aggregate_expert_scores first"
            ) from None

    def as_unlabeled(self) -> UnlabeledExample:
        return UnlabeledExample(self.id, self.document_text, self.summary_text, self.system, self.reference)


@dataclass(frozen=True)
class UnlabeledExample:
    id: str
    document_text: str
    summary_text: str
    system: str
    reference: str | None = None

    def __post_init__(self) -> None:
        if not self.document_text.strip() or not self.summary_text.strip():
            raise ValueError(f"example {self.id!r}: document and summary must be non-empty")


@dataclass(frozen=True)
class PseudoLabeledExample:
    base: UnlabeledExample
    pseudo_score: float
    labeling_model_id: str
    round: int

    def __post_init__(self) -> None:
        if not math.isfinite(self.pseudo_score):
            raise ValueError(f"pseudo score for {self.base.id!r} is not finite")
        if self.round < 1:
            raise ValueError("pseudo labels are produced in rounds t >= 1")


@dataclass
class DatasetSplit:
    train: list[AnnotatedExample]
    validation: list[AnnotatedExample]
    test: list[AnnotatedExample]
    unlabeled_parts: list[list[UnlabeledExample]]
    seed: int

    def __post_init__(self) -> None:
        train_ids = {e.id for e in self.train}
        val_ids = {e.id for e in self.validation}
        test_ids = {e.id for e in self.test}
        if train_ids & val_ids or train_ids & test_ids or val_ids & test_ids:
            raise ValueError("train, validation and test splits must be disjoint by id")

    @property
    def k(self) -> int:
        return len(self.unlabeled_parts)

    def manifest(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "sizes": {
                "train": len(self.train),
                "validation": len(self.validation),
                "test": len(self.test),
                "unlabeled_parts": [len(p) for p in self.unlabeled_parts],
            },
            "train": [e.id for e in self.train],
            "validation": [e.id for e in self.validation],
            "test": [e.id for e in self.test],
            "unlabeled_parts": [[e.id for e in p] for p in self.unlabeled_parts],
        }

    @classmethod
    def from_manifest(
        cls,
        manifest: dict[str, Any],
        annotated: Iterable[AnnotatedExample],
        unlabeled: Iterable[UnlabeledExample] = (),
    ) -> DatasetSplit:
        by_id = {e.id: e for e in annotated}
        pool = {e.id: e for e in unlabeled}
        try:
            return cls(
                train=[by_id[i] for i in manifest["train"]],
                validation=[by_id[i] for i in manifest["validation"]],
                test=[by_id[i] for i in manifest["test"]],
                unlabeled_parts=[[pool[i] for i in part] for part in manifest["unlabeled_parts"]],
                seed=int(manifest["seed"]),
            )
        except KeyError as exc:
            raise LoadError(f"manifest references unknown id {exc.args[0]!r}") from None


# ---------------------------------------------------------------------------
# ingestion


def _iter_json_lines(path: Path) -> Iterator[tuple[int, dict[str, Any]]]:
    with path.open("r", encoding="utf-8") as fh:
        index = 0
        for line in fh:
            if not line.strip():
                continue
            index += 1
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LoadError(f"invalid JSON ({exc.msg})", index, path) from None
            if not isinstance(raw, dict):
                raise LoadError("record is not an object", index, path)
            yield index, raw


def _require_text(raw: dict[str, Any], key: str, index: int, path: Path) -> str:
    if key not in raw:
        raise LoadError(f"missing field '{key}'", index, path)
    value = raw[key]
    if not isinstance(value, str) or not value.strip():
        raise LoadError(f"field '{key}' must be a non-empty string", index, path)
    return value


def _parse_expert_scores(raw: Any, index: int, path: Path) -> dict[QualityDimension, tuple[float, ...]]:
    if not isinstance(raw, dict) or not raw:
        raise LoadError("field 'expert_scores' must be a non-empty object", index, path)
    out: dict[QualityDimension, tuple[float, ...]] = {}
    for name, values in raw.items():
        try:
            dim = QualityDimension(name)
        except ValueError:
            raise LoadError(f"unknown dimension {name!r} in expert_scores", index, path) from None
        if not isinstance(values, list) or not values:
            raise LoadError(f"expert_scores.{name} must be a non-empty list", index, path)
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise LoadError(f"expert_scores.{name} contains a non-numeric value", index, path)
            if not (SCORE_MIN <= v <= SCORE_MAX):
                raise LoadError("score out of range", index, path)
        out[dim] = tuple(values)
    return out


def _parse_common(raw: dict[str, Any], index: int, path: Path) -> dict[str, Any]:
    rec_id = raw.get("id")
    if rec_id is None:
        raise LoadError("missing field 'id'", index, path)
    if not isinstance(rec_id, str) or not rec_id:
        raise LoadError("field 'id' must be a non-empty string", index, path)
    reference = raw.get("reference")
    if reference is not None and not isinstance(reference, str):
        raise LoadError("field 'reference' must be a string", index, path)
    system = raw.get("system", "")
    if not isinstance(system, str):
        raise LoadError("field 'system' must be a string", index, path)
    return {
        "id": rec_id,
        "document_text": _require_text(raw, "document", index, path),
        "summary_text": _require_text(raw, "summary", index, path),
        "system": system,
        "reference": reference,
    }


def load_annotated(path: str | Path) -> list[AnnotatedExample]:
    """Load and validate an annotated dataset file.

    Raises :class:`LoadError` naming the offending record on a missing field,
    an expert score outside [1, 5] or a duplicate id.
    """
    path = Path(path)
    out: list[AnnotatedExample] = []
    seen: set[str] = set()
    for index, raw in _iter_json_lines(path):
        common = _parse_common(raw, index, path)
        if "expert_scores" not in raw:
            raise LoadError("missing field 'expert_scores'", index, path)
        scores = _parse_expert_scores(raw["expert_scores"], index, path)
        if common["id"] in seen:
            raise LoadError(f"duplicate id {common['id']!r}", index, path)
        seen.add(common["id"])
        extra = {k: v for k, v in raw.items() if k not in _KNOWN_FIELDS}
        out.append(AnnotatedExample(expert_scores=scores, crowd_scores=raw.get("crowd_scores"), extra=extra, **common))
    return out


def load_unlabeled(path: str | Path) -> list[UnlabeledExample]:
    path = Path(path)
    out: list[UnlabeledExample] = []
    seen: set[str] = set()
    for index, raw in _iter_json_lines(path):
        common = _parse_common(raw, index, path)
        if common["id"] in seen:
            raise LoadError(f"duplicate id {common['id']!r}", index, path)
        seen.add(common["id"])
        out.append(UnlabeledExample(**common))
    return out


def record_to_dict(example: AnnotatedExample | UnlabeledExample) -> dict[str, Any]:
    rec: dict[str, Any] = {
        "id": example.id,
        "document": example.document_text,
        "summary": example.summary_text,
        "system": example.system,
    }
    if example.reference is not None:
        rec["reference"] = example.reference
    if isinstance(example, AnnotatedExample):
        rec["expert_scores"] = {d.value: list(v) for d, v in example.expert_scores.items()}
        if example.crowd_scores is not None:
            rec["crowd_scores"] = example.crowd_scores
        rec.update(example.extra)
    return rec


def write_records(path: str | Path, examples: Iterable[AnnotatedExample | UnlabeledExample]) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(record_to_dict(ex), ensure_ascii=False) + "\n")
            n += 1
    return n


def convert_summeval(src: str | Path, dst: str | Path) -> int:
    """Convert the upstream paired SummEval annotation file to the canonical layout.

    Upstream lines carry ``id`` (document id), ``model_id``, ``decoded``,
    ``text``, ``references`` and ``expert_annotations`` / ``turker_annotations``
    as lists of per-annotator dicts. One canonical record is written per
    (document, system) pair.
    """
    src = Path(src)
    rows = []
    for index, raw in _iter_json_lines(src):
        for key in ("id", "model_id", "decoded", "text", "expert_annotations"):
            if key not in raw:
                raise LoadError(f"missing upstream field '{key}'", index, src)
        expert: dict[str, list[float]] = {d.value: [] for d in QualityDimension}
        for ann in raw["expert_annotations"]:
            for d in QualityDimension:
                expert[d.value].append(ann[d.value])
        crowd: dict[str, list[float]] = {d.value: [] for d in QualityDimension}
        for ann in raw.get("turker_annotations", []):
            for d in QualityDimension:
                if d.value in ann:
                    crowd[d.value].append(ann[d.value])
        rec: dict[str, Any] = {
            "id": f"{raw['id']}/{raw['model_id']}",
            "document": raw["text"],
            "summary": raw["decoded"],
            "system": raw["model_id"],
            "expert_scores": expert,
        }
        refs = raw.get("references") or []
        if refs:
            rec["reference"] = refs[0]
        if any(crowd.values()):
            rec["crowd_scores"] = crowd
        rows.append(rec)
    with Path(dst).open("w", encoding="utf-8") as fh:
        for rec in rows:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return len(rows)


# ---------------------------------------------------------------------------
# aggregation and splitting


def aggregate_expert_scores(example: AnnotatedExample) -> AnnotatedExample:
    """Fill ``aggregated_score`` with the per-dimension mean of the expert scores."""
    agg: dict[QualityDimension, float] = {}
    for dim, scores in example.expert_scores.items():
        if len(scores) == 0:
            raise ValueError(f"example {example.id!r}: no expert scores for {dim.value}")
        agg[dim] = math.fsum(scores) / len(scores)
    return replace(example, aggregated_score=agg)


def aggregate_all(examples: Iterable[AnnotatedExample]) -> list[AnnotatedExample]:
    return [aggregate_expert_scores(e) for e in examples]


def _check_unique(examples: Sequence[Any]) -> None:
    ids = [e.id for e in examples]
    if len(set(ids)) != len(ids):
        raise ValueError("examples contain duplicate ids")


def split_annotated(
    examples: Sequence[AnnotatedExample], train_n: int, test_n: int, seed: int
) -> tuple[list[AnnotatedExample], list[AnnotatedExample]]:
    if train_n < 0 or test_n < 0:
        raise ValueError("split sizes must be non-negative")
    if train_n + test_n > len(examples):
        raise ValueError(
            f"insufficient examples: need {train_n} + {test_n} = {train_n + test_n}, have {len(examples)}"
        )
    _check_unique(examples)
    perm = np.random.default_rng(seed).permutation(len(examples))
    train = [examples[i] for i in perm[:train_n]]
    test = [examples[i] for i in perm[train_n : train_n + test_n]]
    return train, test


def sample_validation(
    train: Sequence[AnnotatedExample], n: int, seed: int
) -> tuple[list[AnnotatedExample], list[AnnotatedExample]]:
    """Draw ``n`` validation items and return ``(validation, train minus validation)``."""
    if n < 0 or n > len(train):
        raise ValueError(f"cannot sample {n} validation items from {len(train)} training items")
    perm = np.random.default_rng(seed).permutation(len(train))
    chosen = set(perm[:n].tolist())
    validation = [train[i] for i in perm[:n]]
    reduced = [ex for i, ex in enumerate(train) if i not in chosen]
    return validation, reduced


def partition_unlabeled(pool: Sequence[UnlabeledExample], k: int, seed: int) -> list[list[UnlabeledExample]]:
    """Shuffle ``pool`` and cut it into ``k`` parts whose sizes differ by at most one."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(pool) < k:
        raise ValueError(f"pool of {len(pool)} items cannot be split into {k} non-empty parts")
    _check_unique(pool)
    perm = np.random.default_rng(seed).permutation(len(pool))
    base, extra = divmod(len(pool), k)
    parts: list[list[UnlabeledExample]] = []
    start = 0
    for j in range(k):
        size = base + (1 if j < extra else 0)
        parts.append([pool[i] for i in perm[start : start + size]])
        start += size
    return parts


def prepare_split(
    annotated: Sequence[AnnotatedExample],
    unlabeled: Sequence[UnlabeledExample],
    *,
    train_n: int,
    test_n: int,
    validation_n: int,
    k: int,
    seed: int,
) -> DatasetSplit:
    """Run the full data protocol: train/test split, validation draw, k-way pool partition."""
    train, test = split_annotated(annotated, train_n, test_n, seed)
    validation, train = sample_validation(train, validation_n, seed + 1)
    parts = partition_unlabeled(unlabeled, k, seed + 2) if k > 0 else []
    return DatasetSplit(train=train, validation=validation, test=test, unlabeled_parts=parts, seed=seed)
