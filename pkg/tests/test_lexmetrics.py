from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import lexical_exhaustive
from oracles import bleu_oracle, lcs_exhaustive, rouge_n_oracle
from summscore.lexmetrics import (
    BASELINE_METRICS,
    CorpusStats,
    bleu,
    lcs_length,
    metric_tokenize,
    ngrams,
    rouge_l,
    rouge_n,
    score_baselines,
    score_pair,
    tfidf_cosine,
)


def test_tokenize_examples():
    assert metric_tokenize("") == []
    assert metric_tokenize("The cat.") == ["the", "cat", "."]
    toks = metric_tokenize("Hello, World! It's 3 p.m.")
    assert metric_tokenize(" ".join(toks)) == toks


def test_ngrams_rejects_zero_order():
    with pytest.raises(ValueError):
        ngrams(["a"], 0)


# -- rouge ----------------------------------------------------------------------


def test_rouge_examples():
    assert rouge_n("the cat sat", "the cat sat", 2) == (1.0, 1.0, 1.0)
    assert rouge_n("a b", "c d", 1) == (0.0, 0.0, 0.0)
    p, r, _ = rouge_n("the cat sat on the mat", "the cat lay on the mat", 1)
    assert (p, r) == (5 / 6, 5 / 6)
    assert r == rouge_n_oracle("the cat sat on the mat".split(), "the cat lay on the mat".split(), 1)[1]


def test_rouge_l_examples():
    assert lcs_length("a b c d".split(), "a c b d".split()) == 3
    assert lcs_exhaustive("a b c d".split(), "a c b d".split()) == 3
    assert rouge_l("a b c d", "a c b d").recall == 3 / 4
    assert rouge_l("same words here", "same words here") == (1.0, 1.0, 1.0)
    assert rouge_l("", "a b") == (0.0, 0.0, 0.0)


def test_lcs_long_inputs_against_dynamic_programming():
    rng = random.Random(5)

    def dp(a, b):
        table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
        for i, x in enumerate(a, 1):
            for j, y in enumerate(b, 1):
                table[i][j] = table[i - 1][j - 1] + 1 if x == y else max(table[i - 1][j], table[i][j - 1])
        return table[-1][-1]

    for _ in range(40):
        a = [rng.choice("abcdefg") for _ in range(rng.randint(0, 300))]
        b = [rng.choice("abcdefg") for _ in range(rng.randint(0, 90))]
        assert lcs_length(a, b) == dp(a, b)


def test_exhaustive_short_sequences_without_orbit_reduction():
    report = lexical_exhaustive.run(lexical_exhaustive.all_pairs(3))
    assert report.pairs == 40 * 40 and report.ok, report.mismatches[:3]


def test_canonical_pairs_cover_every_orbit():
    # each pair of length <= 3 is a relabeling of exactly one canonical pair
    canon = set(lexical_exhaustive.canonical_pairs(3))

    def normalise(a, b):
        names: dict = {}
        for x in a + b:
            if x not in names:
                names[x] = "abc"[len(names)]
        seq = [names[x] for x in a + b]
        return tuple(seq[: len(a)]), tuple(seq[len(a) :])

    assert {normalise(a, b) for a, b in lexical_exhaustive.all_pairs(3)} == canon


def test_set_intersection_lcs_matches_plain_search():
    assert lexical_exhaustive.spot_check_lcs(lexical_exhaustive.canonical_pairs(2))


@settings(max_examples=150, deadline=None)
@given(st.lists(st.sampled_from("abcd"), max_size=7), st.lists(st.sampled_from("abcd"), max_size=7),
       st.permutations("abcd"))
def test_scores_invariant_under_relabeling(a, b, perm):
    ren = dict(zip("abcd", perm))
    a2, b2 = [ren[x] for x in a], [ren[x] for x in b]
    for n in (1, 2, 3):
        assert rouge_n(a, b, n) == rouge_n(a2, b2, n)
        assert bleu(a, b, n) == bleu(a2, b2, n)
    assert rouge_l(a, b) == rouge_l(a2, b2)


# -- bleu -------------------------------------------------------------------------


def test_bleu_examples():
    assert bleu("the the the", "the cat", 1) == 1 / 3
    assert bleu("the cat sat on the mat", "the cat sat on the mat") == 1.0
    assert bleu("a b c", "d e f", 1) == 0.0
    assert bleu("", "a b") == 0.0
    # short candidate: brevity penalty exp(1 - 4/2) on perfect unigram precision
    assert bleu("a b", "a b c d", 1) == pytest.approx(math.exp(-1.0), abs=1e-15)
    # clipping in higher orders: "a a a a" vs "a a": p1 = 2/4, p2 = 1/3
    assert bleu("a a a a", "a a", 2) == pytest.approx(math.sqrt(2 / 4 * 1 / 3), abs=1e-15)
    with pytest.raises(ValueError):
        bleu("a", "a", 5)


def test_bleu_smoothing_flag():
    assert bleu("a b c", "a c b", 2) == 0.0
    assert bleu("a b c", "a c b", 2, smooth=True) == pytest.approx(math.sqrt(1.0 * 1 / 3))


def test_bleu_matches_clipped_count_oracle():
    rng = random.Random(11)
    for _ in range(500):
        c = [rng.choice("abc") for _ in range(rng.randint(1, 9))]
        r = [rng.choice("abc") for _ in range(rng.randint(1, 9))]
        for n in (1, 2, 3, 4):
            assert bleu(c, r, n) == pytest.approx(bleu_oracle(c, r, n), rel=1e-12, abs=1e-15)


def test_asymmetry_of_overlap_metrics():
    c, r = "the cat", "the cat sat down"
    assert rouge_n(c, r, 1) != rouge_n(r, c, 1)
    assert rouge_l(c, r).precision == rouge_l(r, c).recall
    assert bleu(c, r, 1) != bleu(r, c, 1)


# -- tfidf ------------------------------------------------------------------------


def test_tfidf_hand_table():
    stats = CorpusStats.build(["a b", "b c"])
    alpha = 1 + math.log(3 / 2)
    assert stats.idf("a") == alpha and stats.idf("b") == 1.0 and stats.idf("zzz") == 1 + math.log(3)
    # "a b b" -> {a: alpha, b: 2};  "b c" -> {b: 1, c: alpha}
    want = 2 / (math.sqrt(alpha**2 + 4) * math.sqrt(1 + alpha**2))
    assert tfidf_cosine("a b b", "b c", stats) == pytest.approx(want, abs=1e-12)


def test_tfidf_edges_and_symmetry():
    stats = CorpusStats.build(["x y z", "y z w"])
    assert tfidf_cosine("x y", "x y", stats) == pytest.approx(1.0, abs=1e-12)
    assert tfidf_cosine("x", "w", stats) == 0.0
    assert tfidf_cosine("", "w", stats) == 0.0
    assert tfidf_cosine("x y y", "y z", stats) == tfidf_cosine("y z", "x y y", stats)


# -- properties and batch ---------------------------------------------------------

texts = st.lists(st.sampled_from(["a", "b", "c", "d", ".", ","]), max_size=12).map(" ".join)


@settings(max_examples=200, deadline=None)
@given(texts, texts)
def test_every_score_in_unit_interval(c, r):
    stats = CorpusStats.build([c, r])
    for m in BASELINE_METRICS:
        assert 0.0 <= score_pair(m, c, r, stats) <= 1.0
    for prf in (rouge_n(c, r, 1), rouge_n(c, r, 2), rouge_l(c, r)):
        if prf.precision == prf.recall == 0.0:
            assert prf.f1 == 0.0


def test_score_baselines_shapes_and_errors():
    out = score_baselines(["a b", "c d"], ["a b", "e f"], corpus=["a b c", "d e f"])
    assert set(out) == set(BASELINE_METRICS) and all(len(v) == 2 for v in out.values())
    assert out["rouge1"] == [1.0, 0.0]
    with pytest.raises(ValueError, match="misaligned"):
        score_baselines(["a"], [])
    with pytest.raises(ValueError, match="unknown metric"):
        score_pair("meteor", "a", "a")
    with pytest.raises(ValueError, match="corpus statistics"):
        score_pair("tfidf", "a", "a")
