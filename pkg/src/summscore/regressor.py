"""Regression head over the CLS vector, squared loss and the training epoch."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .dimensions import InputMode, QualityDimension
from .encoding import SequenceEncoder, TokenSequence, build_input, load_encoder
from .persist import read_manifest, write_manifest

log = logging.getLogger(__name__)

REPORT_MIN = 1.0
REPORT_MAX = 5.0

LabeledItem = tuple[TokenSequence, float]


class TrainingDivergence(RuntimeError):
    """Raised when a batch loss or gradient stops being finite."""


class RegressionHead:
    """``y = W . v + b``, or with ``hidden > 0`` ``y = w . tanh(A v + a) + b``."""

    def __init__(self, dim: int, hidden: int = 0, seed: int = 0, bias_init: float = 3.0, weight_scale: float = 0.01):
        self.dim = dim
        self.hidden = hidden
        rng = np.random.default_rng(seed)
        if hidden == 0:
            self._theta = np.empty(dim + 1)
            self._theta[:dim] = rng.standard_normal(dim) * weight_scale
        else:
            self._theta = np.empty(hidden * dim + hidden + hidden + 1)
            self._theta[: hidden * dim] = rng.standard_normal(hidden * dim) / np.sqrt(dim)
            self._theta[hidden * dim : hidden * dim + hidden] = 0.0
            self._theta[hidden * dim + hidden : -1] = rng.standard_normal(hidden) * weight_scale
        self._theta[-1] = bias_init

    @property
    def theta(self) -> np.ndarray:
        return self._theta

    @property
    def W(self) -> np.ndarray:
        if self.hidden:
            raise AttributeError("the hidden-layer head has no single weight vector")
        return self._theta[: self.dim]

    @property
    def b(self) -> float:
        return float(self._theta[-1])

    def set(self, W: Sequence[float] | np.ndarray, b: float) -> None:
        if self.hidden:
            raise ValueError("set() applies to the affine head only")
        W = np.asarray(W, dtype=np.float64)
        if W.shape != (self.dim,):
            raise ValueError(f"W must have shape ({self.dim},)")
        self._theta[: self.dim] = W
        self._theta[-1] = b

    def no_decay_mask(self) -> np.ndarray:
        mask = np.zeros(self._theta.size, dtype=bool)
        mask[-1] = True
        if self.hidden:
            h, d = self.hidden, self.dim
            mask[h * d : h * d + h] = True
        return mask

    def forward(self, v: np.ndarray) -> tuple[float, Any]:
        if self.hidden == 0:
            return float(self._theta[: self.dim] @ v + self._theta[-1]), v
        h, d = self.hidden, self.dim
        A = self._theta[: h * d].reshape(h, d)
        a = self._theta[h * d : h * d + h]
        w = self._theta[h * d + h : -1]
        z = np.tanh(A @ v + a)
        return float(w @ z + self._theta[-1]), (v, z)

    def backward(self, cache: Any, gy: float, out: np.ndarray) -> np.ndarray:
        """Accumulate head gradients into ``out``; return d/dv."""
        if self.hidden == 0:
            v = cache
            out[: self.dim] += gy * v
            out[-1] += gy
            return gy * self._theta[: self.dim]
        v, z = cache
        h, d = self.hidden, self.dim
        A = self._theta[: h * d].reshape(h, d)
        w = self._theta[h * d + h : -1]
        out[h * d + h : -1] += gy * z
        out[-1] += gy
        gpre = gy * w * (1.0 - z * z)
        out[: h * d] += np.outer(gpre, v).ravel()
        out[h * d : h * d + h] += gpre
        return A.T @ gpre

    def copy(self) -> RegressionHead:
        clone = object.__new__(RegressionHead)
        clone.dim, clone.hidden = self.dim, self.hidden
        clone._theta = self._theta.copy()
        return clone


class ScorerModel:
    """One quality-dimension scorer: encoder + regression head + input layout.

    ``pairing`` selects what fills the first segment of a paired input:
    ``"document"`` gives ``[CLS] O [SEP] S [SEP]``, ``"reference"`` gives
    ``[CLS] S [SEP] ref [SEP]`` (the summary-vs-reference ablation arm).
    """

    def __init__(
        self,
        dimension: QualityDimension | str,
        encoder: SequenceEncoder,
        head: RegressionHead | None = None,
        *,
        mode: InputMode | None = None,
        pairing: str = "document",
        model_id: str | None = None,
        clamp_report: bool = True,
        freeze_encoder: bool = False,
    ):
        dimension = QualityDimension.parse(dimension)
        expected = dimension.input_mode
        mode = expected if mode is None else InputMode(mode)
        if mode is not expected:
            raise ValueError(f"{dimension.value} scorers take {expected.value} input, not {mode.value}")
        if pairing not in ("document", "reference"):
            raise ValueError(f"unknown pairing {pairing!r}")
        if pairing == "reference" and mode is not InputMode.PAIRED:
            raise ValueError("reference pairing needs a paired-input dimension")
        head = head if head is not None else RegressionHead(encoder.dim)
        if head.dim != encoder.dim:
            raise ValueError(f"head dimension {head.dim} does not match encoder dimension {encoder.dim}")
        self.dimension = dimension
        self.encoder = encoder
        self.head = head
        self.mode = mode
        self.pairing = pairing
        self.model_id = model_id or f"{dimension.value}/init"
        self.clamp_report = clamp_report
        self.freeze_encoder = freeze_encoder

    # -- parameters --------------------------------------------------------

    @property
    def n_encoder_params(self) -> int:
        return self.encoder.n_params

    def get_theta(self) -> np.ndarray:
        return np.concatenate([self.encoder.theta, self.head.theta])

    def set_theta(self, theta: np.ndarray) -> None:
        n = self.n_encoder_params
        if theta.shape != (n + self.head.theta.size,):
            raise ValueError("parameter vector size mismatch")
        self.encoder.set_theta(theta[:n])
        self.head.theta[...] = theta[n:]

    def no_decay_mask(self) -> np.ndarray:
        return np.concatenate([self.encoder.no_decay_mask(), self.head.no_decay_mask()])

    def copy(self, model_id: str | None = None) -> ScorerModel:
        clone = object.__new__(ScorerModel)
        clone.__dict__.update(self.__dict__)
        clone.encoder = self.encoder.copy()
        clone.head = self.head.copy()
        if model_id is not None:
            clone.model_id = model_id
        return clone

    def with_pairing(self, pairing: str) -> ScorerModel:
        clone = self.copy()
        ScorerModel.__init__(
            clone,
            self.dimension,
            clone.encoder,
            clone.head,
            mode=self.mode,
            pairing=pairing,
            model_id=self.model_id,
            clamp_report=self.clamp_report,
            freeze_encoder=self.freeze_encoder,
        )
        return clone

    # -- inputs --------------------------------------------------------------

    def prepare(self, document: str | None, summary: str, reference: str | None = None) -> TokenSequence:
        tok = self.encoder.tokenizer
        kwargs = dict(cls_id=tok.cls_id, sep_id=tok.sep_id, pair_sep=tok.pair_sep)
        if self.mode is InputMode.SUMMARY_ONLY:
            return build_input(None, tok.tokenize(summary), self.mode, self.encoder.max_len, **kwargs)
        if self.pairing == "reference":
            if not reference:
                raise ValueError("reference pairing needs a reference summary")
            return build_input(tok.tokenize(summary), tok.tokenize(reference), self.mode, self.encoder.max_len, **kwargs)
        if not document:
            raise ValueError("paired input needs a document")
        return build_input(tok.tokenize(document), tok.tokenize(summary), self.mode, self.encoder.max_len, **kwargs)

    def prepare_example(self, example: Any) -> TokenSequence:
        """Lay out any record with ``document_text``/``summary_text``/``reference``."""
        return self.prepare(example.document_text, example.summary_text, getattr(example, "reference", None))

    # -- scoring -------------------------------------------------------------

    def raw_score(self, seq: TokenSequence) -> float:
        return self.head.forward(self.encoder.forward(seq))[0]

    def report(self, y: float, clamp: bool | None = None) -> float:
        clamp = self.clamp_report if clamp is None else clamp
        return min(REPORT_MAX, max(REPORT_MIN, y)) if clamp else y

    # -- persistence ---------------------------------------------------------

    def save(self, directory: str | Path, **provenance: Any) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.encoder.save(directory / "encoder")
        np.save(directory / "head.npy", self.head.theta)
        meta = {
            "dimension": self.dimension.value,
            "mode": self.mode.value,
            "pairing": self.pairing,
            "model_id": self.model_id,
            "head_dim": self.head.dim,
            "head_hidden": self.head.hidden,
            "clamp_report": int(self.clamp_report),
        }
        meta.update({k: v for k, v in provenance.items()})
        write_manifest(directory / "manifest.txt", meta)


def load_model(directory: str | Path) -> ScorerModel:
    directory = Path(directory)
    meta = read_manifest(directory / "manifest.txt")
    encoder = load_encoder(directory / "encoder")
    head = RegressionHead(int(meta["head_dim"]), hidden=int(meta.get("head_hidden", 0)))
    theta = np.load(directory / "head.npy")
    if theta.shape != head.theta.shape:
        raise ValueError(f"head parameters in {directory} do not match the manifest")
    head.theta[...] = theta
    return ScorerModel(
        meta["dimension"],
        encoder,
        head,
        mode=InputMode(meta["mode"]),
        pairing=meta.get("pairing", "document"),
        model_id=meta.get("model_id"),
        clamp_report=bool(int(meta.get("clamp_report", 1))),
    )


# ---------------------------------------------------------------------------
# prediction


def predict(model: ScorerModel, document: str | None, summary: str, *, reference: str | None = None,
            clamp: bool | None = None) -> float:
    """Score one (document, summary) pair; clamped to [1, 5] when the model reports clamped."""
    y = model.raw_score(model.prepare(document, summary, reference))
    return model.report(y, clamp)


def predict_batch(model: ScorerModel, pairs: Sequence[Any], *, clamp: bool | None = None) -> list[float]:
    """Score a list of ``(document, summary)`` / ``(document, summary, reference)`` tuples or records.

    An encoding failure is re-raised with the failing index.
    """
    out = []
    for i, item in enumerate(pairs):
        try:
            if isinstance(item, TokenSequence):
                y = model.report(model.raw_score(item), clamp)
            elif isinstance(item, tuple):
                y = predict(model, item[0], item[1], reference=item[2] if len(item) > 2 else None, clamp=clamp)
            else:
                y = model.report(model.raw_score(model.prepare_example(item)), clamp)
        except ValueError as exc:
            raise type(exc)(f"item {i}: {exc}") from exc
        out.append(y)
    return out


# ---------------------------------------------------------------------------
# loss and gradients


def batch_loss(model: ScorerModel, batch: Sequence[LabeledItem]) -> float:
    """Mean squared residual between raw predictions and gold labels."""
    if not batch:
        raise ValueError("batch is empty")
    total = 0.0
    for seq, gold in batch:
        if not math.isfinite(gold):
            raise ValueError("gold label is not finite")
        r = model.raw_score(seq) - gold
        total += r * r
    return total / len(batch)


def loss_and_grad(model: ScorerModel, batch: Sequence[LabeledItem]) -> tuple[float, np.ndarray]:
    """Squared loss and its gradient w.r.t. the flat parameter vector (encoder, then head)."""
    if not batch:
        raise ValueError("batch is empty")
    n_enc = model.n_encoder_params
    grad = np.zeros(n_enc + model.head.theta.size)
    g_enc, g_head = grad[:n_enc], grad[n_enc:]
    scale = 2.0 / len(batch)
    total = 0.0
    for seq, gold in batch:
        v, enc_cache = model.encoder.forward_cached(seq)
        y, head_cache = model.head.forward(v)
        r = y - gold
        total += r * r
        gv = model.head.backward(head_cache, scale * r, g_head)
        if not model.freeze_encoder:
            model.encoder.backward(enc_cache, gv, g_enc)
    return total / len(batch), grad


# ---------------------------------------------------------------------------
# optimization


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 2e-5
    weight_decay: float = 0.01
    batch_size: int = 4
    epochs_per_round: int = 6
    warmup_fraction: float = 0.1
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("learning rate and weight decay must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if self.epochs_per_round < 0:
            raise ValueError("epochs per round must be non-negative")
        if not (0.0 <= self.warmup_fraction < 1.0):
            raise ValueError("warmup fraction must lie in [0, 1)")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def warmup_steps(config: OptimizerConfig, n_examples: int) -> int:
    """Warmup length for one round: a fraction of ``epochs * ceil(n / batch)`` steps, rounded up."""
    steps_per_epoch = math.ceil(n_examples / config.batch_size)
    return math.ceil(config.warmup_fraction * config.epochs_per_round * steps_per_epoch)


@dataclass
class ScheduleState:
    """AdamW moments, step counter and shuffling RNG for one training round."""

    warmup: int
    m: np.ndarray
    v: np.ndarray
    rng: np.random.Generator
    step: int = 0
    epoch_losses: list[float] = field(default_factory=list)

    @classmethod
    def for_round(cls, model: ScorerModel, config: OptimizerConfig, n_examples: int, round_index: int = 0) -> ScheduleState:
        n = model.n_encoder_params + model.head.theta.size
        rng = np.random.default_rng([config.seed, round_index])
        return cls(warmup_steps(config, n_examples), np.zeros(n), np.zeros(n), rng)

    def lr_factor(self) -> float:
        if self.warmup <= 0:
            return 1.0
        return min(1.0, (self.step + 1) / self.warmup)


def _adamw_step(theta: np.ndarray, grad: np.ndarray, state: ScheduleState, config: OptimizerConfig,
                decay: np.ndarray, frozen: int) -> None:
    """In-place AdamW: decoupled decay first, then the bias-corrected Adam step.

    ``decay`` is a float mask (1 where weight decay applies); parameters
    before index ``frozen`` are left untouched.
    """
    lr = config.learning_rate * state.lr_factor()
    state.step += 1
    t = state.step
    b1, b2 = config.beta1, config.beta2
    m, v = state.m, state.v
    m *= b1
    m += (1.0 - b1) * grad
    v *= b2
    v += (1.0 - b2) * (grad * grad)
    if lr == 0.0:
        return
    p, m, v, d = theta[frozen:], m[frozen:], v[frozen:], decay[frozen:]
    if config.weight_decay:
        p -= (lr * config.weight_decay) * d * p
    denom = np.sqrt(v)
    denom /= math.sqrt(1.0 - b2**t)
    denom += config.eps
    p -= (lr / (1.0 - b1**t)) * (m / denom)


def train_one_epoch(
    model: ScorerModel,
    data: Sequence[LabeledItem],
    config: OptimizerConfig,
    state: ScheduleState,
) -> ScorerModel:
    """One shuffled pass over ``data`` in mini-batches, updating ``model`` in place.

    The learning rate ramps linearly over ``state.warmup`` steps and stays
    constant afterwards. Raises :class:`TrainingDivergence` on a non-finite
    loss or gradient.
    """
    if not data:
        raise ValueError("training data is empty")
    decay = (~model.no_decay_mask()).astype(np.float64)
    frozen = model.n_encoder_params if model.freeze_encoder else 0
    order = state.rng.permutation(len(data))
    bs = config.batch_size
    theta = model.get_theta()
    losses = []
    for start in range(0, len(order), bs):
        batch = [data[i] for i in order[start : start + bs]]
        loss, grad = loss_and_grad(model, batch)
        if not math.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise TrainingDivergence(
                f"non-finite loss {loss!r} at step {state.step} (lr={config.learning_rate}, batch {start // bs})"
            )
        _adamw_step(theta, grad, state, config, decay, frozen)
        model.set_theta(theta)
        losses.append(loss)
    state.epoch_losses.append(float(np.mean(losses)))
    return model
