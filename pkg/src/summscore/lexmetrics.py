"""Training-free lexical baselines: ROUGE-N, ROUGE-L, sentence BLEU, TF-IDF cosine.

No stemming or stopword removal; all scores lie in [0, 1].
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

Tokens = Sequence[str]


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float


def metric_tokenize(text: str) -> list[str]:
    """Lowercase, split punctuation into its own tokens, split on whitespace."""
    return _TOKEN_RE.findall(text.lower())


def _tokens(x: str | Tokens) -> Sequence[str]:
    return metric_tokenize(x) if isinstance(x, str) else x


def ngrams(tokens: Tokens, n: int) -> Counter[tuple[str, ...]]:
    if n < 1:
        raise ValueError("n must be at least 1")
    return Counter(zip(*(tokens[i:] for i in range(n))))


def _prf(match: float, cand_total: float, ref_total: float) -> PRF:
    p = match / cand_total if cand_total else 0.0
    r = match / ref_total if ref_total else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return PRF(p, r, f)


def rouge_n(candidate: str | Tokens, reference: str | Tokens, n: int = 1) -> PRF:
    """Clipped n-gram overlap as (precision, recall, f1)."""
    c, r = ngrams(_tokens(candidate), n), ngrams(_tokens(reference), n)
    match = sum(min(v, r[g]) for g, v in c.items() if g in r)
    return _prf(match, sum(c.values()), sum(r.values()))


def lcs_length(a: Tokens, b: Tokens) -> int:
    """Bit-parallel LCS length (Hyyro): one word-wide update per token of ``a``."""
    if not a or not b:
        return 0
    masks: dict[str, int] = {}
    for i, y in enumerate(b):
        masks[y] = masks.get(y, 0) | (1 << i)
    full = (1 << len(b)) - 1
    v = full
    for x in a:
        u = v & masks.get(x, 0)
        v = ((v + u) | (v - u)) & full
    return len(b) - v.bit_count()


def rouge_l(candidate: str | Tokens, reference: str | Tokens) -> PRF:
    c, r = _tokens(candidate), _tokens(reference)
    return _prf(lcs_length(c, r), len(c), len(r))


def bleu(candidate: str | Tokens, reference: str | Tokens, max_n: int = 4, *, smooth: bool = False) -> float:
    """Sentence BLEU against a single reference with uniform n-gram weights.

    Without smoothing any zero n-gram precision gives 0. With ``smooth`` the
    orders n >= 2 use add-one counts.
    """
    if not 1 <= max_n <= 4:
        raise ValueError("max_n must be between 1 and 4")
    c, r = _tokens(candidate), _tokens(reference)
    if not c:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cn, rn = ngrams(c, n), ngrams(r, n)
        match, total = sum((cn & rn).values()), sum(cn.values())
        if smooth and n > 1:
            match, total = match + 1, total + 1
        if match == 0 or total == 0:
            return 0.0
        log_sum += math.log(match / total)
    bp = 1.0 if len(c) >= len(r) else math.exp(1.0 - len(r) / len(c))
    return bp * math.exp(log_sum / max_n)


@dataclass(frozen=True)
class CorpusStats:
    """Document frequencies over a declared corpus."""

    n_docs: int
    df: dict[str, int]

    @classmethod
    def build(cls, corpus: Iterable[str | Tokens]) -> CorpusStats:
        df: Counter[str] = Counter()
        n = 0
        for doc in corpus:
            df.update(set(_tokens(doc)))
            n += 1
        return cls(n, dict(df))

    def idf(self, token: str) -> float:
        return math.log((1 + self.n_docs) / (1 + self.df.get(token, 0))) + 1.0


def tfidf_vector(text: str | Tokens, stats: CorpusStats) -> dict[str, float]:
    """Raw term counts times smoothed idf."""
    return {tok: count * stats.idf(tok) for tok, count in Counter(_tokens(text)).items()}


def tfidf_cosine(a: str | Tokens, b: str | Tokens, stats: CorpusStats) -> float:
    va, vb = tfidf_vector(a, stats), tfidf_vector(b, stats)
    na = math.sqrt(math.fsum(w * w for w in va.values()))
    nb = math.sqrt(math.fsum(w * w for w in vb.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    dot = math.fsum(w * vb[t] for t, w in va.items() if t in vb)
    return min(1.0, dot / (na * nb))


BASELINE_METRICS = ("bleu1", "bleu2", "bleu3", "bleu4", "tfidf", "rouge1", "rouge2", "rouge3", "rougeL")


def score_pair(metric: str, candidate: str | Tokens, reference: str | Tokens, stats: CorpusStats | None = None) -> float:
    """One named baseline score; ROUGE metrics report f1."""
    if metric.startswith("bleu"):
        return bleu(candidate, reference, int(metric[4:]))
    if metric == "rougeL":
        return rouge_l(candidate, reference).f1
    if metric.startswith("rouge"):
        return rouge_n(candidate, reference, int(metric[5:])).f1
    if metric == "tfidf":
        if stats is None:
            raise ValueError("tfidf needs corpus statistics")
        return tfidf_cosine(candidate, reference, stats)
    raise ValueError(f"unknown metric {metric!r}")


def score_baselines(
    candidates: Sequence[str],
    references: Sequence[str],
    metrics: Sequence[str] = BASELINE_METRICS,
    stats: CorpusStats | None = None,
    corpus: Iterable[str] | None = None,
) -> dict[str, list[float]]:
    """Score aligned candidate/reference lists with every requested metric.

    TF-IDF statistics come from ``stats`` if given, else from ``corpus``
    (typically the evaluation set's documents), else from the references.
    """
    if len(candidates) != len(references):
        raise ValueError("candidates and references are misaligned")
    cand_toks = [metric_tokenize(c) for c in candidates]
    ref_toks = [metric_tokenize(r) for r in references]
    if "tfidf" in metrics and stats is None:
        stats = CorpusStats.build(corpus if corpus is not None else ref_toks)
    return {m: [score_pair(m, c, r, stats) for c, r in zip(cand_toks, ref_toks)] for m in metrics}
