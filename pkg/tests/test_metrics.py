import itertools
import json
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from softrank.errors import ParameterError
from softrank.metrics import (
    bleu,
    bleu_stats,
    cider,
    corpus_bleu,
    evaluate_corpus,
    lcs_length,
    meteor,
    meteor_alignment,
    ngram_counts,
    rouge_l,
    tokenize,
)

tokens3 = st.lists(st.sampled_from("abc"), max_size=8)
tokens5 = st.lists(st.sampled_from(["the", "car", "red", "stop", "left"]), max_size=9)


# tokenizer -------------------------------------------------------------------

@pytest.mark.parametrize("text, expected", [
    ("Going ahead.", ["going", "ahead"]),
    ("", []),
    ("Keep  driving,  slowly", ["keep", "driving", "slowly"]),
    ("  ... (left) — ok!", ["left", "—", "ok"]),
    ("don't\tstop\nnow", ["don't", "stop", "now"]),
])
def test_tokenize(text, expected):
    assert tokenize(text) == expected


@given(st.text(max_size=40))
def test_tokenize_matches_plain_reimplementation(text):
    assert tokenize(text) == oracles.plain_tokenize(text)


def test_ngram_counts():
    c = ngram_counts(["a", "b", "a", "b"], 2)
    assert c == {("a", "b"): 2, ("b", "a"): 1}
    assert ngram_counts(["a"], 2) == {}


# BLEU ------------------------------------------------------------------------

def test_bleu_examples():
    sent = tokenize("the cat sat on the mat")
    assert bleu(sent, [sent], 4) == 1.0
    assert bleu(tokenize("the the the the"), [tokenize("the cat")], 1) == 0.25
    assert bleu(tokenize("dog runs"), [tokenize("the cat")], 1) == 0.0


def test_bleu_empty_hypothesis_scores_zero():
    assert bleu([], [["a", "b"]], 2) == 0.0


def test_bleu_brevity_uses_closest_length_ties_to_shorter():
    st = bleu_stats(["a", "b", "c"], [["a", "b"], ["a", "b", "c", "d"]], 1)
    assert st.ref_len == 2
    st = bleu_stats(["a", "b"], [["a", "b", "c", "d", "e"], ["a"]], 1)
    assert st.ref_len == 1
    # shorter hypothesis: exp(1 - 4/2) with full precision
    assert bleu(["a", "b"], [["a", "b", "c", "d"]], 1) == pytest.approx(0.36787944117144233, abs=1e-15)


def test_bleu_rejects_bad_order():
    with pytest.raises(ParameterError):
        bleu(["a"], [["a"]], 5)


@given(tokens5, st.lists(tokens5.filter(len), min_size=1, max_size=3), st.integers(1, 4))
def test_bleu_matches_oracle(hyp, refs, n):
    assert bleu(hyp, refs, n) == pytest.approx(oracles.brute_sentence_bleu(hyp, refs, n), abs=1e-12)


@given(st.lists(st.tuples(tokens5, st.lists(tokens5.filter(len), min_size=1, max_size=2)), min_size=1, max_size=4))
def test_corpus_bleu_matches_oracle(pairs):
    hyps, refs = [p[0] for p in pairs], [p[1] for p in pairs]
    assert corpus_bleu(hyps, refs, 4) == pytest.approx(oracles.brute_corpus_bleu(hyps, refs, 4), abs=1e-12)
    assert corpus_bleu(hyps[:1], refs[:1], 2) == bleu(hyps[0], refs[0], 2)


@given(tokens5, st.lists(tokens5.filter(len), min_size=1, max_size=3))
def test_bleu_and_rouge_ignore_case(hyp, refs):
    upper = [t.upper() for t in hyp]
    refs_upper = [[t.title() for t in r] for r in refs]
    hyp2 = tokenize(" ".join(upper))
    refs2 = [tokenize(" ".join(r)) for r in refs_upper]
    assert bleu(hyp2, refs2, 4) == bleu(hyp, refs, 4)
    assert rouge_l(hyp2, refs2[0]) == rouge_l(hyp, refs[0])


# ROUGE-L ---------------------------------------------------------------------

def test_rouge_examples():
    ref = tokenize("the cat sat on mat")
    assert rouge_l(ref, ref) == 1.0
    assert rouge_l(tokenize("the cat sat"), ref) == 0.6
    assert rouge_l(["x", "y"], ref) == 0.0
    assert rouge_l([], ref) == 0.0
    with pytest.raises(ParameterError):
        rouge_l(["a"], [])


def test_lcs_exhaustive_short_sequences():
    seqs = [list(s) for length in range(5) for s in itertools.product("abc", repeat=length)]
    for a in seqs:
        for b in seqs:
            assert lcs_length(a, b) == oracles.brute_lcs(a, b)


@settings(max_examples=300)
@given(tokens3, tokens3)
def test_lcs_matches_enumeration_up_to_length_8(a, b):
    assert lcs_length(a, b) == oracles.brute_lcs(a, b)


@given(tokens3.filter(len), tokens3)
def test_rouge_is_one_iff_ref_is_subsequence(ref, hyp):
    assert (rouge_l(hyp, ref) == 1.0) == oracles.is_subsequence(ref, hyp)
    assert 0.0 <= rouge_l(hyp, ref) <= 1.0


# METEOR ----------------------------------------------------------------------

def test_meteor_examples():
    abcd = ["a", "b", "c", "d"]
    assert meteor(abcd, abcd) == 0.9921875
    assert meteor(["x"], abcd) == 0.0
    assert meteor(["b", "a"], ["a", "b"]) == 0.5
    assert meteor([], abcd) == 0.0


def test_meteor_prefers_fewest_chunks():
    # "the" can align to either occurrence; the contiguous choice gives 1 chunk
    assert meteor_alignment(["the", "car"], ["the", "red", "the", "car"]) == (2, 1)


@settings(max_examples=200, deadline=None)
@given(tokens3, tokens3)
def test_meteor_matches_enumeration(hyp, ref):
    assert meteor(hyp, ref) == pytest.approx(oracles.brute_meteor(hyp, ref), abs=1e-12)


@given(tokens5, tokens5)
def test_meteor_in_unit_interval(hyp, ref):
    assert 0.0 <= meteor(hyp, ref) <= 1.0


def test_meteor_long_repetitive_input_is_bounded():
    hyp = ("the car the truck " * 10).split()
    ref = ("the truck the car " * 10).split()
    start = time.perf_counter()
    m, chunks = meteor_alignment(hyp, ref)
    assert time.perf_counter() - start < 10
    assert m == 40
    assert 1 <= chunks <= 40


# CIDEr -----------------------------------------------------------------------

def test_cider_identical_disjoint_pairs():
    hyps = [tokenize("red car turns left now"), tokenize("blue bus stops ahead")]
    corpus, each = cider(hyps, [[h] for h in hyps])
    assert each == [10.0, 10.0]
    assert corpus == 10.0


def test_cider_no_overlap_and_degenerate_corpus():
    _, each = cider([["x", "y"], ["a", "b"]], [[["p", "q"]], [["a", "b"]]])
    assert each[0] == 0.0
    corpus, _ = cider([["a", "b"]], [[["a", "b"]]])
    assert corpus == 0.0
    with pytest.raises(ParameterError):
        cider([], [])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(tokens5, st.lists(tokens5.filter(len), min_size=1, max_size=3)), min_size=1, max_size=4))
def test_cider_matches_hand_tfidf(pairs):
    hyps, refs = [p[0] for p in pairs], [p[1] for p in pairs]
    corpus, each = cider(hyps, refs)
    want_corpus, want_each = oracles.hand_cider(hyps, refs)
    assert corpus == pytest.approx(want_corpus, abs=1e-9)
    assert each == pytest.approx(want_each, abs=1e-9)
    assert all(0.0 <= c <= 10.0 + 1e-9 for c in each)
    _, shuffled = cider(hyps, [list(reversed(r)) for r in refs])
    assert shuffled == pytest.approx(each, abs=1e-12)


# corpus evaluation -----------------------------------------------------------

def test_evaluate_identical_pairs():
    pairs = [("red car turns left now", ["red car turns left now"]),
             ("blue bus stops ahead", ["blue bus stops ahead"])]
    report = evaluate_corpus(pairs)
    assert report.bleu == [1.0, 1.0, 1.0, 1.0]
    assert report.rouge_l == 1.0
    assert report.meteor > 0.99
    assert report.cider == 10.0


def test_evaluate_empty_hypothesis_and_flags():
    report = evaluate_corpus([
        ("a", "", ["stop here"]),
        ("b", "turn left", ["turn left", "go left"]),
    ])
    first, second = report.per_sentence
    assert first.bleu == [0.0] * 4 and first.meteor == 0.0 and first.rouge_l == 0.0 and first.cider == 0.0
    assert "empty_hypothesis" in first.flags
    assert "extra_references_dropped" in second.flags
    assert all(x == x for x in report.bleu)  # finite, not NaN

    single = evaluate_corpus([("a b", ["a b"])])
    assert "degenerate_corpus" in single.flags and single.cider == 0.0


def test_evaluate_requires_pairs():
    with pytest.raises(ParameterError):
        evaluate_corpus([])


def test_evaluate_deterministic_serialization():
    pairs = [("q1", "a pedestrian ahead", ["a pedestrian is ahead"]), ("q2", "stop now", ["stop"])]
    a = json.dumps(evaluate_corpus(pairs).to_dict())
    b = json.dumps(evaluate_corpus(pairs).to_dict())
    assert a == b


def test_evaluate_matches_oracle_on_random_corpus():
    import random
    rnd = random.Random(4)
    words = ["the", "car", "is", "red", "stop", "left", "a"]
    records = []
    for i in range(6):
        hyp = " ".join(rnd.choice(words) for _ in range(rnd.randint(1, 7)))
        refs = [" ".join(rnd.choice(words) for _ in range(rnd.randint(1, 7))) for _ in range(rnd.randint(1, 3))]
        records.append({"id": str(i), "hypothesis": hyp, "references": refs})
    report = evaluate_corpus([(r["id"], r["hypothesis"], r["references"]) for r in records]).to_dict()
    want = oracles.oracle_report(records)
    assert report["corpus"]["bleu"] == pytest.approx(want["bleu"], abs=1e-12)
    for key in ("meteor", "rouge_l", "cider"):
        assert report["corpus"][key] == pytest.approx(want[key], abs=1e-12)
