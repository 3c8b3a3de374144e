"""Exhaustive comparison of rouge_n / rouge_l against brute-force oracles.

Every score is invariant under renaming the alphabet, so it is enough to
visit one pair per relabeling orbit: the pair (a, b) is canonical when the
concatenation a + b is a restricted growth string (first occurrences appear
in alphabet order). Relabeling invariance itself is tested separately.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

from oracles import lcs_exhaustive, ngram_list, subsequences
from summscore.lexmetrics import rouge_l, rouge_n


def restricted_growth(max_len: int, alphabet: str) -> list[tuple[str, ...]]:
    out = [()]
    frontier = [((), 0)]
    for _ in range(max_len):
        nxt = []
        for seq, used in frontier:
            for k in range(min(used + 1, len(alphabet))):
                item = (seq + (alphabet[k],), max(used, k + 1))
                nxt.append(item)
                out.append(item[0])
        frontier = nxt
    return out


def canonical_pairs(max_len: int = 6, alphabet: str = "abc") -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    pairs = []
    for s in restricted_growth(2 * max_len, alphabet):
        for i in range(max(0, len(s) - max_len), min(max_len, len(s)) + 1):
            pairs.append((s[:i], s[i:]))
    return pairs


def all_pairs(max_len: int, alphabet: str = "abc"):
    seqs = [t for n in range(max_len + 1) for t in itertools.product(alphabet, repeat=n)]
    return [(a, b) for a in seqs for b in seqs]


def _sorted_match(a: list, b: list) -> int:
    """Size of the multiset intersection of two sorted lists, by merging."""
    i = j = m = 0
    while i < len(a) and j < len(b):
        if a[i] == b[j]:
            m, i, j = m + 1, i + 1, j + 1
        elif a[i] < b[j]:
            i += 1
        else:
            j += 1
    return m


def _exact_prf(match: int, nc: int, nr: int) -> tuple[float, float, float]:
    """Correctly rounded p and r; f1 via the equivalent form 2m / (|c| + |r|)."""
    p = match / nc if nc else 0.0
    r = match / nr if nr else 0.0
    f = 2 * match / (nc + nr) if match else 0.0
    return p, r, f


@dataclass
class ExhaustiveReport:
    pairs: int = 0
    comparisons: int = 0
    mismatches: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.pairs > 0 and not self.mismatches


def run(pairs, orders=(1, 2, 3)) -> ExhaustiveReport:
    start = time.perf_counter()
    report = ExhaustiveReport(pairs=len(pairs))
    seqs = {s for pair in pairs for s in pair}
    grams = {s: {n: sorted(ngram_list(s, n)) for n in orders} for s in seqs}
    subs = {s: subsequences(s) for s in seqs}
    for a, b in pairs:
        for n in orders:
            ga, gb = grams[a][n], grams[b][n]
            want = _exact_prf(_sorted_match(ga, gb), len(ga), len(gb))
            got = rouge_n(a, b, n)
            report.comparisons += 1
            if got[0] != want[0] or got[1] != want[1] or abs(got[2] - want[2]) > 1e-12:
                report.mismatches.append(("rouge", n, a, b, got, want))
        ell = max(map(len, subs[a] & subs[b]))
        want = _exact_prf(ell, len(a), len(b))
        got = rouge_l(a, b)
        report.comparisons += 1
        if got[0] != want[0] or got[1] != want[1] or abs(got[2] - want[2]) > 1e-12:
            report.mismatches.append(("rougeL", a, b, got, want))
    report.seconds = time.perf_counter() - start
    return report


def spot_check_lcs(pairs) -> bool:
    """The set-intersection LCS above agrees with the plain exhaustive oracle."""
    return all(max(map(len, subsequences(a) & subsequences(b))) == lcs_exhaustive(a, b) for a, b in pairs)
