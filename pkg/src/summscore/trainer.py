"""Semi-supervised multi-round training of one dimension scorer.

Part 1 fine-tunes the initial model on the labeled training set for ``ep``
epochs and keeps the epoch checkpoint with the best validation selection
score (the untrained model is the starting incumbent). Part 2 runs one round
per unlabeled part: the previous round's best model pseudo-labels the part,
the labels join the training pool, training restarts from the initial model
on the enlarged pool, and the round winner replaces the global best only if
it scores strictly higher.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from .corpus import AnnotatedExample, DatasetSplit, PseudoLabeledExample, UnlabeledExample, sample_validation
from .encoding import EncodingError
from .persist import array_digest, write_jsonl, write_manifest
from .regressor import (
    LabeledItem,
    OptimizerConfig,
    ScheduleState,
    ScorerModel,
    TrainingDivergence,
    train_one_epoch,
)
from .stats import DegenerateInput, pearson, spearman

log = logging.getLogger(__name__)

SENTINEL = -1.0


class DegenerateSelectionWarning(UserWarning):
    """Validation correlation undefined; the selection sentinel was used."""


class SelectionFunction(str, enum.Enum):
    MAX_PEARSON = "max_pearson"
    MAX_SPEARMAN = "max_spearman"
    MAX_PRODUCT = "max_product"

    def combine(self, predictions: Sequence[float], gold: Sequence[float]) -> float:
        try:
            if self is SelectionFunction.MAX_PEARSON:
                return pearson(predictions, gold)
            if self is SelectionFunction.MAX_SPEARMAN:
                return spearman(predictions, gold)
            return pearson(predictions, gold) * spearman(predictions, gold)
        except DegenerateInput as exc:
            warnings.warn(f"selection score undefined ({exc}); using {SENTINEL}", DegenerateSelectionWarning, stacklevel=3)
            return SENTINEL


@dataclass
class _Validation:
    seqs: list
    gold: list[float]


def _prepare_validation(model: ScorerModel, validation: Sequence[AnnotatedExample]) -> _Validation:
    if not validation:
        raise ValueError("validation set is empty")
    return _Validation([model.prepare_example(e) for e in validation], [e.gold(model.dimension) for e in validation])


def _score(f: SelectionFunction, model: ScorerModel, val: _Validation) -> float:
    preds = [model.raw_score(s) for s in val.seqs]
    return f.combine(preds, val.gold)


def selection_score(f: SelectionFunction | str, model: ScorerModel, validation: Sequence[AnnotatedExample]) -> float:
    """Correlation of the model's raw validation predictions with the gold scores.

    Undefined correlations (constant predictions or gold) give ``-1`` and a
    :class:`DegenerateSelectionWarning`.
    """
    return _score(SelectionFunction(f), model, _prepare_validation(model, validation))


def labeled_items(model: ScorerModel, examples: Sequence[AnnotatedExample]) -> list[LabeledItem]:
    return [(model.prepare_example(e), e.gold(model.dimension)) for e in examples]


class PseudoLabels(list):
    """List of :class:`PseudoLabeledExample`; ``skipped`` holds ids that failed to encode."""

    def __init__(self, items: Sequence[PseudoLabeledExample] = (), skipped: Sequence[str] = ()):
        super().__init__(items)
        self.skipped = list(skipped)
        self.sequences: list = []


def pseudo_label(model: ScorerModel, part: Sequence[UnlabeledExample], t: int) -> PseudoLabels:
    """Label every item of ``part`` with the model's unclamped prediction."""
    out = PseudoLabels()
    for ex in part:
        try:
            seq = model.prepare_example(ex)
        except (EncodingError, ValueError) as exc:
            log.warning("pseudo-label round %d: skipping %s (%s)", t, ex.id, exc)
            out.skipped.append(ex.id)
            continue
        out.append(PseudoLabeledExample(ex, model.raw_score(seq), model.model_id, t))
        out.sequences.append(seq)
    return out


@dataclass
class RoundResult:
    round: int
    best: ScorerModel
    best_score: float
    best_epoch: int  # 0 means the untrained starting model was kept
    initial_score: float
    epoch_scores: list[float]
    pool_size: int
    diverged: bool = False
    divergence: str | None = None


@dataclass
class TrainRunState:
    dimension: str
    selection: SelectionFunction
    k: int
    config: dict[str, Any]
    initial_digest: str
    rounds: list[RoundResult] = field(default_factory=list)
    round_start_digests: list[str] = field(default_factory=list)
    pool_sizes: list[int] = field(default_factory=list)
    skipped: list[list[str]] = field(default_factory=list)
    pseudo: list[list[PseudoLabeledExample]] = field(default_factory=list)
    global_best: ScorerModel | None = None
    global_best_score: float = SENTINEL
    global_best_round: int = 0
    best_history: list[float] = field(default_factory=list)
    audit: list[dict[str, Any]] = field(default_factory=list)
    unlabeled_pool_size: int = 0

    @property
    def round(self) -> int:
        return len(self.rounds) - 1

    @property
    def aborted_rounds(self) -> list[int]:
        return [r.round for r in self.rounds if r.diverged]

    def log(self, **entry: Any) -> None:
        self.audit.append(entry)


def _train_round(
    m0: ScorerModel,
    data: Sequence[LabeledItem],
    val: _Validation,
    opt: OptimizerConfig,
    f: SelectionFunction,
    round_index: int,
    state: TrainRunState | None = None,
) -> RoundResult:
    dim = m0.dimension.value
    initial = _score(f, m0, val)
    result = RoundResult(round_index, m0, initial, 0, initial, [], len(data))
    if state is not None:
        state.round_start_digests.append(array_digest(m0.get_theta()))
        state.log(event="epoch", round=round_index, epoch=0, f=f.value, value=initial,
                  pool_size=len(data), model_id=m0.model_id)
    if opt.epochs_per_round == 0:
        return result
    current = m0.copy()
    sched = ScheduleState.for_round(current, opt, len(data), round_index)
    for i in range(opt.epochs_per_round):
        try:
            train_one_epoch(current, data, opt, sched)
        except TrainingDivergence as exc:
            log.error("round %d epoch %d diverged: %s", round_index, i + 1, exc)
            result.diverged, result.divergence = True, str(exc)
            if state is not None:
                state.log(event="divergence", round=round_index, epoch=i + 1, detail=str(exc))
            break
        value = _score(f, current, val)
        result.epoch_scores.append(value)
        model_id = f"{dim}/r{round_index}/e{i + 1}"
        if state is not None:
            state.log(event="epoch", round=round_index, epoch=i + 1, f=f.value, value=value,
                      pool_size=len(data), model_id=model_id, train_loss=sched.epoch_losses[-1])
        if value > result.best_score:
            result.best = current.copy(model_id=model_id)
            result.best_score, result.best_epoch = value, i + 1
    return result


def supervised_round(
    m0: ScorerModel,
    train: Sequence[AnnotatedExample],
    validation: Sequence[AnnotatedExample],
    opt: OptimizerConfig,
    f: SelectionFunction | str = SelectionFunction.MAX_PRODUCT,
) -> tuple[ScorerModel, RoundResult]:
    """Fine-tune on the labeled data for ``ep`` epochs; return the best epoch checkpoint."""
    if not train:
        raise ValueError("training set is empty")
    f = SelectionFunction(f)
    val = _prepare_validation(m0, validation)
    result = _train_round(m0, labeled_items(m0, train), val, opt, f, 0)
    return result.best, result


def semi_supervised_train(
    m0: ScorerModel,
    split: DatasetSplit,
    opt: OptimizerConfig,
    f: SelectionFunction | str = SelectionFunction.MAX_PRODUCT,
    k: int | None = None,
    *,
    literal_labeled_only: bool = False,
    resample_validation_per_round: bool = False,
    on_round: Callable[[TrainRunState], None] | None = None,
) -> tuple[ScorerModel, TrainRunState]:
    """Full multi-round procedure; returns the global best model and the run state.

    ``literal_labeled_only`` trains every Part 2 round on the labeled set alone
    (pseudo labels are then produced but never used). With
    ``resample_validation_per_round`` a fresh validation set is drawn from the
    labeled pool at the start of each round and the global best is re-scored
    on it before comparison.
    """
    f = SelectionFunction(f)
    k = split.k if k is None else k
    if k < 0 or k > split.k:
        raise ValueError(f"k={k} but the split has {split.k} unlabeled parts")
    if not split.train:
        raise ValueError("training set is empty")
    state = TrainRunState(
        dimension=m0.dimension.value,
        selection=f,
        k=k,
        config=opt.to_dict(),
        initial_digest=array_digest(m0.get_theta()),
        unlabeled_pool_size=sum(len(p) for p in split.unlabeled_parts[:k]),
    )
    labeled_pool = list(split.train) + list(split.validation)
    train, validation = list(split.train), list(split.validation)

    # Part 1
    val = _prepare_validation(m0, validation)
    train_items = labeled_items(m0, train)
    first = _train_round(m0, train_items, val, opt, f, 0, state)
    state.rounds.append(first)
    state.pool_sizes.append(len(train_items))
    state.global_best, state.global_best_score, state.global_best_round = first.best, first.best_score, 0
    state.best_history.append(first.best_score)
    state.log(event="round_best", round=0, epoch=first.best_epoch, f=f.value, value=first.best_score,
              model_id=first.best.model_id)
    if on_round:
        on_round(state)

    # Part 2
    pseudo_items: list[LabeledItem] = []
    prev_best = first.best
    for t in range(1, k + 1):
        labels = pseudo_label(prev_best, split.unlabeled_parts[t - 1], t)
        state.pseudo.append(list(labels))
        state.skipped.append(labels.skipped)
        pseudo_items.extend(zip(labels.sequences, (p.pseudo_score for p in labels)))
        state.log(event="pseudo_label", round=t, labeled_by=prev_best.model_id, count=len(labels),
                  skipped=len(labels.skipped))

        if resample_validation_per_round:
            validation, train = sample_validation(labeled_pool, len(split.validation), split.seed + 7919 * t)
            val = _prepare_validation(m0, validation)
            train_items = labeled_items(m0, train)
            state.global_best_score = _score(f, state.global_best, val)

        data = train_items if literal_labeled_only else train_items + pseudo_items
        state.pool_sizes.append(len(train_items) + len(pseudo_items))
        result = _train_round(m0, data, val, opt, f, t, state)
        state.rounds.append(result)
        state.log(event="round_best", round=t, epoch=result.best_epoch, f=f.value, value=result.best_score,
                  model_id=result.best.model_id)
        if result.best_score > state.global_best_score:
            state.global_best, state.global_best_score, state.global_best_round = result.best, result.best_score, t
            state.log(event="global_best", round=t, f=f.value, value=result.best_score, model_id=result.best.model_id)
        state.best_history.append(state.global_best_score)
        prev_best = result.best
        if on_round:
            on_round(state)

    return state.global_best, state


def save_run(state: TrainRunState, directory: str | Path, fingerprint: str = "") -> None:
    """Write per-round best checkpoints, the audit log and a final manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for r in state.rounds:
        r.best.save(directory / f"round_{r.round}", round=r.round, epoch=r.best_epoch, selection=state.selection.value,
                    selection_score=repr(r.best_score), config_hash=fingerprint)
    assert state.global_best is not None
    state.global_best.save(directory / "best", round=state.global_best_round, selection=state.selection.value,
                           selection_score=repr(state.global_best_score), config_hash=fingerprint)
    write_jsonl(directory / "audit.jsonl", state.audit)
    write_manifest(
        directory / "manifest.txt",
        {
            "dimension": state.dimension,
            "best_model_id": state.global_best.model_id,
            "best_round": state.global_best_round,
            "best_score": repr(state.global_best_score),
            "selection": state.selection.value,
            "k": state.k,
            "rounds_completed": len(state.rounds),
            "aborted_rounds": ",".join(map(str, state.aborted_rounds)),
            "pool_sizes": ",".join(map(str, state.pool_sizes)),
            "unlabeled_pool_size": state.unlabeled_pool_size,
            "skipped": sum(len(s) for s in state.skipped),
            "config_hash": fingerprint,
        },
    )
