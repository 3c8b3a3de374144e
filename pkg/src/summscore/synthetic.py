"""Synthetic corpora for smoke runs and property tests.

``make_affine_task`` produces data whose gold score is an affine function of
a fixed encoder's CLS output, so a scorer started from that encoder can fit it
exactly. ``make_toy_corpus`` produces SummEval-shaped records (documents,
references, several systems, three expert scores per dimension) from a small
synthetic vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import AnnotatedExample, UnlabeledExample, aggregate_expert_scores
from .dimensions import QualityDimension
from .regressor import ScorerModel


def vocabulary(size: int = 400) -> list[str]:
    syllables = ["ka", "lo", "mi", "ne", "ru", "ta", "so", "vi", "de", "pa", "zu", "he", "fo", "gi", "be", "wa"]
    words = []
    i = 0
    while len(words) < size:
        a, b, c = i % 16, (i // 16) % 16, (i // 256) % 16
        words.append(syllables[a] + syllables[b] + (syllables[c] if i >= 256 else ""))
        i += 1
    return words


def _sentence(rng: np.random.Generator, words: list[str], lo: int = 5, hi: int = 12) -> str:
    n = int(rng.integers(lo, hi + 1))
    return " ".join(words[int(j)] for j in rng.integers(0, len(words), n)) + " ."


@dataclass
class AffineTask:
    labeled: list[AnnotatedExample]
    unlabeled: list[UnlabeledExample]
    test: list[AnnotatedExample]
    direction: np.ndarray
    offset: float
    scale: float
    clean_gold: dict[str, float]  # noiseless label for every generated id


def make_affine_task(
    model: ScorerModel,
    n_labeled: int,
    n_unlabeled: int = 0,
    n_test: int = 0,
    *,
    seed: int = 0,
    noise: float = 0.0,
    spread: float = 1.5,
    vocab_size: int = 400,
) -> AffineTask:
    """Gold = ``offset + scale * direction . v0`` where ``v0`` is ``model``'s CLS output.

    ``direction`` is a random vector mapped through the covariance of ``v0``
    over the generated inputs, then normalised.

    ``scale`` is chosen so the noiseless labels span at most ``3 +- spread``; with
    ``noise > 0`` Gaussian noise is added and labels are clipped to [1, 5].
    """
    rng = np.random.default_rng(seed)
    words = vocabulary(vocab_size)
    dim = model.dimension
    total = n_labeled + n_unlabeled + n_test
    docs = [" ".join(_sentence(rng, words) for _ in range(3)) for _ in range(total)]
    summaries = [_sentence(rng, words, 6, 14) for _ in range(total)]
    feats = np.array([model.encoder.forward(model.prepare(d, s)) for d, s in zip(docs, summaries)])
    # weight a random direction by the feature covariance so the labels follow
    # directions the features actually vary along
    cov = np.cov(feats, rowvar=False).reshape(feats.shape[1], feats.shape[1])
    direction = cov @ rng.standard_normal(feats.shape[1])
    direction /= np.linalg.norm(direction)
    raw = feats @ direction
    center = float(raw.mean())
    max_dev = float(np.max(np.abs(raw - center))) or 1.0
    scale = spread / max_dev
    offset = 3.0 - scale * center
    gold = offset + scale * raw
    if noise:
        gold = np.clip(gold + rng.normal(0.0, noise, size=gold.shape), 1.0, 5.0)

    clean = offset + scale * raw
    labeled, unlabeled, test = [], [], []
    for i in range(total):
        if n_labeled <= i < n_labeled + n_unlabeled:
            unlabeled.append(UnlabeledExample(f"u{i}", docs[i], summaries[i], "synthetic"))
            continue
        ex = aggregate_expert_scores(
            AnnotatedExample(f"x{i}", docs[i], summaries[i], "synthetic", {dim: (float(gold[i]),)})
        )
        (labeled if i < n_labeled else test).append(ex)
    ids = [f"u{i}" if n_labeled <= i < n_labeled + n_unlabeled else f"x{i}" for i in range(total)]
    return AffineTask(labeled, unlabeled, test, direction, offset, scale, dict(zip(ids, clean.tolist())))


SYSTEMS = ("lead", "extract_random", "abstract_noisy", "shuffled")


def _system_summary(system: str, sentences: list[str], reference: str, rng: np.random.Generator, words: list[str]) -> str:
    if system == "lead":
        return " ".join(sentences[:2])
    if system == "extract_random":
        idx = sorted(rng.choice(len(sentences), size=2, replace=False))
        return " ".join(sentences[i] for i in idx)
    if system == "abstract_noisy":
        toks = reference.split()
        for j in range(len(toks)):
            if toks[j] != "." and rng.random() < 0.3:
                toks[j] = words[int(rng.integers(0, len(words)))]
        return " ".join(toks)
    if system == "shuffled":
        toks = " ".join(sentences[:2]).replace(" .", "").split()
        rng.shuffle(toks)
        return " ".join(toks) + " ."
    raise ValueError(f"unknown toy system {system!r}")


def _expert_scores(summary: str, sentences: list[str], reference: str, rng: np.random.Generator) -> dict:
    ref = set(reference.replace(".", "").split())
    doc = set(" ".join(sentences).replace(".", "").split())
    toks = summary.replace(".", "").split()
    overlap = len(set(toks) & ref) / max(1, len(ref))
    faithful = sum(t in doc for t in toks) / max(1, len(toks))
    ordered = 1.0 if summary.count(".") >= 2 else 0.0
    base = {
        QualityDimension.COHERENCE: 1.5 + 2.0 * ordered + 1.0 * overlap,
        QualityDimension.CONSISTENCY: 1.0 + 4.0 * faithful,
        QualityDimension.FLUENCY: 2.0 + 2.5 * ordered + 0.5 * faithful,
        QualityDimension.RELEVANCE: 1.2 + 3.5 * overlap,
    }
    out = {}
    for d, mu in base.items():
        vals = np.clip(np.round(mu + rng.normal(0.0, 0.5, size=3)), 1, 5)
        out[d] = tuple(float(v) for v in vals)
    return out


@dataclass
class ToyCorpus:
    annotated: list[AnnotatedExample]
    unlabeled: list[UnlabeledExample]
    documents: dict[str, tuple[str, str]]  # doc id -> (document, reference)
    system_outputs: dict[str, dict[str, str]]  # system -> doc id -> summary


def make_toy_corpus(n_docs: int = 13, n_unlabeled_docs: int = 10, *, seed: int = 0,
                    systems: tuple[str, ...] = SYSTEMS) -> ToyCorpus:
    """``n_docs * len(systems)`` annotated records plus an unlabeled pool and raw system outputs."""
    rng = np.random.default_rng(seed)
    words = vocabulary(300)
    annotated, unlabeled = [], []
    documents: dict[str, tuple[str, str]] = {}
    outputs: dict[str, dict[str, str]] = {s: {} for s in systems}
    for i in range(n_docs + n_unlabeled_docs):
        doc_id = f"doc{i:03d}"
        sentences = [_sentence(rng, words) for _ in range(6)]
        reference = " ".join(sentences[0].split()[:5]) + " . " + " ".join(sentences[1].split()[:5]) + " ."
        document = " ".join(sentences)
        documents[doc_id] = (document, reference)
        for system in systems:
            summary = _system_summary(system, sentences, reference, rng, words)
            outputs[system][doc_id] = summary
            rec_id = f"{doc_id}/{system}"
            if i < n_docs:
                annotated.append(
                    AnnotatedExample(rec_id, document, summary, system,
                                     _expert_scores(summary, sentences, reference, rng), reference=reference)
                )
            else:
                unlabeled.append(UnlabeledExample(rec_id, document, summary, system, reference))
    return ToyCorpus(annotated, unlabeled, documents, outputs)
