"""BLEU, METEOR, ROUGE-L and CIDEr over whitespace-tokenized text.

All scores are returned on their natural scale: BLEU, METEOR and ROUGE-L in
[0, 1] and CIDEr in [0, 10]. Multiplying by 100 for display is left to the
caller.
"""
from __future__ import annotations

import math
import string
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

from .errors import ParameterError

_PUNCT = string.punctuation

METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5
CIDER_MAX_N = 4
# memo entries before the exact METEOR search falls back to greedy runs
MAX_ALIGNMENT_STATES = 200_000
CIDER_SCALE = 10.0


def tokenize(text: str) -> list:
    """Lowercase, split on whitespace, strip ASCII punctuation at token edges."""
    tokens = (tok.strip(_PUNCT) for tok in text.lower().split())
    return [tok for tok in tokens if tok]


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------

@dataclass
class BleuStats:
    """Sufficient statistics for BLEU; corpus BLEU is the sum over sentences."""

    max_n: int
    matches: list
    totals: list
    hyp_len: int = 0
    ref_len: int = 0

    def __add__(self, other):
        return BleuStats(
            self.max_n,
            [a + b for a, b in zip(self.matches, other.matches)],
            [a + b for a, b in zip(self.totals, other.totals)],
            self.hyp_len + other.hyp_len,
            self.ref_len + other.ref_len,
        )

    def score(self, max_n=None) -> float:
        max_n = self.max_n if max_n is None else max_n
        if self.hyp_len == 0:
            return 0.0
        log_p = 0.0
        for n in range(max_n):
            if self.matches[n] == 0:
                return 0.0
            log_p += math.log(self.matches[n] / self.totals[n]) / max_n
        brevity = min(1.0 - self.ref_len / self.hyp_len, 0.0)
        return math.exp(brevity + log_p)


def closest_ref_length(hyp_len: int, refs) -> int:
    return min((len(r) for r in refs), key=lambda length: (abs(length - hyp_len), length))


def bleu_stats(hyp, refs, max_n: int = 4) -> BleuStats:
    if not 1 <= max_n <= 4:
        raise ParameterError(f"max_n must be in 1..4, got {max_n}")
    if not refs:
        raise ParameterError("at least one reference is required")
    matches, totals = [], []
    for n in range(1, max_n + 1):
        hyp_counts = ngram_counts(hyp, n)
        max_ref = Counter()
        for ref in refs:
            max_ref |= ngram_counts(ref, n)
        matches.append(sum(min(c, max_ref[g]) for g, c in hyp_counts.items()))
        totals.append(max(len(hyp) - n + 1, 0))
    return BleuStats(max_n, matches, totals, len(hyp), closest_ref_length(len(hyp), refs))


def bleu(hyp, refs, max_n: int = 4) -> float:
    """Sentence BLEU with clipped n-gram precision and uniform weights.

    Any zero precision gives 0, as does an empty hypothesis.
    """
    return bleu_stats(hyp, refs, max_n).score()


def corpus_bleu(hyps, refs_list, max_n: int = 4) -> float:
    stats = [bleu_stats(h, r, max_n) for h, r in zip(hyps, refs_list)]
    if not stats:
        raise ParameterError("corpus is empty")
    total = stats[0]
    for s in stats[1:]:
        total = total + s
    return total.score()


# ---------------------------------------------------------------------------
# ROUGE-L
# ---------------------------------------------------------------------------

def lcs_length(a: Sequence, b: Sequence) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(hyp, ref) -> float:
    """LCS recall, ``LCS(hyp, ref) / len(ref)``."""
    if not ref:
        raise ParameterError("reference must be non-empty")
    return lcs_length(hyp, ref) / len(ref)


# ---------------------------------------------------------------------------
# METEOR
# ---------------------------------------------------------------------------

def meteor_alignment(hyp, ref):
    """Exact-match alignment with the most matches and, among those, fewest chunks.

    Returns ``(matches, chunks)``. A chunk is a maximal run of matches that
    are adjacent, in order, on both sides.

    A maximum alignment matches ``min(count_hyp, count_ref)`` tokens of each
    word type, so the search walks the hypothesis left to right and only
    skips a token while its type still has surplus hypothesis occurrences.
    The memo key is (position, used reference positions, reference position
    of the previous hypothesis token).
    """
    hyp = tuple(hyp)
    ref = tuple(ref)
    hyp_count = Counter(hyp)
    ref_count = Counter(ref)
    matches = sum(min(c, ref_count[t]) for t, c in hyp_count.items())
    if matches == 0:
        return 0, 0
    positions = {t: tuple(j for j, tok in enumerate(ref) if tok == t) for t in hyp_count}
    type_mask = {t: sum(1 << j for j in pos) for t, pos in positions.items()}
    seen_before = []
    running = Counter()
    for tok in hyp:
        seen_before.append(running[tok])
        running[tok] += 1
    inf = float("inf")
    budget = [MAX_ALIGNMENT_STATES]

    @lru_cache(maxsize=None)
    def fewest_chunks(i, used, prev):
        if i == len(hyp):
            return 0
        budget[0] -= 1
        if budget[0] < 0:
            raise _SearchExhausted
        tok = hyp[i]
        matched = bin(used & type_mask[tok]).count("1")
        skipped = seen_before[i] - matched
        best = inf
        if skipped < hyp_count[tok] - min(hyp_count[tok], ref_count[tok]):
            best = fewest_chunks(i + 1, used, -1)
        for j in positions[tok]:
            if used >> j & 1:
                continue
            step = 0 if prev >= 0 and j == prev + 1 else 1
            best = min(best, step + fewest_chunks(i + 1, used | (1 << j), j))
        return best

    try:
        chunks = fewest_chunks(0, 0, -1)
    except _SearchExhausted:
        chunks = _greedy_chunks(hyp, ref)
    finally:
        fewest_chunks.cache_clear()
    return matches, int(chunks)


class _SearchExhausted(Exception):
    pass


def _greedy_chunks(hyp, ref):
    # longest unused common run first; still reaches the maximum match count
    free_h = [True] * len(hyp)
    free_r = [True] * len(ref)
    chunks = 0
    while True:
        best_len, best_i, best_j = 0, -1, -1
        for i in range(len(hyp)):
            for j in range(len(ref)):
                k = 0
                while (i + k < len(hyp) and j + k < len(ref) and free_h[i + k]
                       and free_r[j + k] and hyp[i + k] == ref[j + k]):
                    k += 1
                if k > best_len:
                    best_len, best_i, best_j = k, i, j
        if best_len == 0:
            return chunks
        for k in range(best_len):
            free_h[best_i + k] = False
            free_r[best_j + k] = False
        chunks += 1


def meteor(hyp, ref) -> float:
    m, chunks = meteor_alignment(hyp, ref)
    if m == 0:
        return 0.0
    precision = m / len(hyp)
    recall = m / len(ref)
    f_mean = precision * recall / (METEOR_ALPHA * precision + (1 - METEOR_ALPHA) * recall)
    penalty = METEOR_GAMMA * (chunks / m) ** METEOR_BETA
    return f_mean * (1.0 - penalty)


# ---------------------------------------------------------------------------
# CIDEr
# ---------------------------------------------------------------------------

@dataclass
class CorpusStats:
    doc_count: int
    doc_freq: dict = field(default_factory=dict)

    @classmethod
    def from_refs(cls, refs_list):
        df = Counter()
        for refs in refs_list:
            grams = set()
            for ref in refs:
                for n in range(1, CIDER_MAX_N + 1):
                    grams.update(ngram_counts(ref, n))
            df.update(grams)
        return cls(len(refs_list), dict(df))

    def idf(self, gram) -> float:
        return math.log(self.doc_count / max(1.0, self.doc_freq.get(gram, 0)))


def _tfidf(tokens, n, stats):
    counts = ngram_counts(tokens, n)
    total = sum(counts.values())
    return {g: (c / total) * stats.idf(g) for g, c in counts.items()}


def _cosine(a: dict, b: dict) -> float:
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return sum(v * b.get(g, 0.0) for g, v in a.items()) / (na * nb)


def cider(hyps, refs_list):
    """Corpus CIDEr and the per-sentence scores.

    Document frequencies are counted over reference sets; n-grams missing
    from every reference set get document frequency 1.
    """
    if len(hyps) != len(refs_list):
        raise ParameterError(f"{len(hyps)} hypotheses but {len(refs_list)} reference sets")
    if not hyps:
        raise ParameterError("corpus is empty")
    stats = CorpusStats.from_refs(refs_list)
    per_sentence = []
    for hyp, refs in zip(hyps, refs_list):
        score = 0.0
        for n in range(1, CIDER_MAX_N + 1):
            vec = _tfidf(hyp, n, stats)
            sims = [_cosine(vec, _tfidf(ref, n, stats)) for ref in refs]
            score += sum(sims) / len(sims) / CIDER_MAX_N
        per_sentence.append(CIDER_SCALE * score)
    return sum(per_sentence) / len(per_sentence), per_sentence


# ---------------------------------------------------------------------------
# corpus report
# ---------------------------------------------------------------------------

@dataclass
class SentenceScores:
    id: str
    bleu: list
    meteor: float
    rouge_l: float
    cider: float
    flags: list = field(default_factory=list)

    def to_dict(self):
        return {
            "id": self.id,
            "bleu": list(self.bleu),
            "meteor": self.meteor,
            "rouge_l": self.rouge_l,
            "cider": self.cider,
            "flags": list(self.flags),
        }


@dataclass
class MetricReport:
    bleu: list
    meteor: float
    rouge_l: float
    cider: float
    per_sentence: list
    flags: list = field(default_factory=list)

    def to_dict(self):
        return {
            "corpus": {
                "bleu": list(self.bleu),
                "meteor": self.meteor,
                "rouge_l": self.rouge_l,
                "cider": self.cider,
                "flags": list(self.flags),
            },
            "per_sentence": [s.to_dict() for s in self.per_sentence],
        }

    def csv_table(self):
        rows = [
            [s.id, *s.bleu, s.meteor, s.rouge_l, s.cider, ";".join(s.flags)]
            for s in self.per_sentence
        ]
        return list(METRIC_CSV_COLUMNS), rows


METRIC_CSV_COLUMNS = (
    "id", "bleu1", "bleu2", "bleu3", "bleu4", "meteor", "rouge_l", "cider", "flags",
)


def evaluate_corpus(pairs) -> MetricReport:
    """Score ``(hypothesis, references)`` pairs; an optional leading id is allowed.

    Each pair is either ``(hyp, refs)`` or ``(id, hyp, refs)``; ``refs`` is a
    list of strings. BLEU pools clipped counts over the corpus, METEOR and
    ROUGE-L are sentence means, CIDEr uses corpus document frequencies.
    METEOR only scores against the first reference.
    """
    pairs = list(pairs)
    if not pairs:
        raise ParameterError("no pairs")
    ids, hyps, refs_list = [], [], []
    for i, pair in enumerate(pairs):
        if len(pair) == 3:
            pid, hyp, refs = pair
        else:
            (hyp, refs), pid = pair, str(i)
        if isinstance(refs, str):
            refs = [refs]
        if not refs:
            raise ParameterError(f"pair {pid!r} has no references")
        ids.append(str(pid))
        hyps.append(tokenize(hyp))
        refs_list.append([tokenize(r) for r in refs])

    corpus_flags = []
    cider_corpus, cider_each = cider(hyps, refs_list)
    if len(pairs) == 1:
        corpus_flags.append("degenerate_corpus")

    stats = []
    sentences = []
    for pid, hyp, refs, cid in zip(ids, hyps, refs_list, cider_each):
        flags = []
        if not hyp:
            flags.append("empty_hypothesis")
        if any(not r for r in refs):
            flags.append("empty_reference")
        if len(refs) > 1:
            flags.append("extra_references_dropped")
        st = bleu_stats(hyp, refs, 4)
        stats.append(st)
        first = refs[0]
        sentences.append(SentenceScores(
            id=pid,
            bleu=[st.score(n) for n in range(1, 5)],
            meteor=meteor(hyp, first),
            rouge_l=max((rouge_l(hyp, r) for r in refs if r), default=0.0),
            cider=cid,
            flags=flags,
        ))

    total = stats[0]
    for st in stats[1:]:
        total = total + st
    return MetricReport(
        bleu=[total.score(n) for n in range(1, 5)],
        meteor=sum(s.meteor for s in sentences) / len(sentences),
        rouge_l=sum(s.rouge_l for s in sentences) / len(sentences),
        cider=cider_corpus,
        per_sentence=sentences,
        flags=corpus_flags,
    )
