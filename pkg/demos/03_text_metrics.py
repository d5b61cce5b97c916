"""
Scoring generated answers: BLEU, METEOR, ROUGE-L and CIDEr
==========================================================

Run with ``python3 demos/03_text_metrics.py``. The same report is available
from the command line as ``softrank eval-metrics --input FILE.jsonl``.
"""
# %%
from softrank import bleu, cider, evaluate_corpus, meteor, rouge_l, tokenize
from softrank.harness import mini_corpus_path, read_pairs_jsonl, render_report
from softrank.metrics import meteor_alignment

# Tokenization lowercases and strips punctuation at token edges.
print(tokenize("Keep  driving,  slowly."))

# %% Clipping: a hypothesis cannot earn more credit for "the" than the reference offers.
print("BLEU-1", bleu(tokenize("the the the the"), [tokenize("the cat")], max_n=1))

# %% ROUGE-L is LCS recall against the reference.
print("ROUGE-L", rouge_l(tokenize("the cat sat"), tokenize("the cat sat on mat")))

# %% METEOR rewards matches and penalizes fragmentation.
for hyp, ref in [("a b c d", "a b c d"), ("b a", "a b"), ("turn left now", "now turn left")]:
    h, r = tokenize(hyp), tokenize(ref)
    m, chunks = meteor_alignment(h, r)
    print(f"METEOR {hyp!r:>16} vs {ref!r:<16} matches={m} chunks={chunks} score={meteor(h, r):.6f}")

# %% CIDEr weights n-grams by how rare they are across the corpus.
hyps = [tokenize("red car turns left now"), tokenize("blue bus stops ahead")]
corpus, each = cider(hyps, [[h] for h in hyps])
print("CIDEr, two exact answers:", each)

# With a single pair every n-gram appears in every document, so IDF is zero.
print("CIDEr, single pair:", cider(hyps[:1], [[hyps[0]]])[0])

# %% A full report on the shipped 10-pair corpus.
report = evaluate_corpus(read_pairs_jsonl(mini_corpus_path()))
for s in report.per_sentence:
    print(f"{s.id}  BLEU-4 {s.bleu[3]:.3f}  METEOR {s.meteor:.3f}  ROUGE-L {s.rouge_l:.3f}  "
          f"CIDEr {s.cider:.3f}  {','.join(s.flags)}")
print(render_report(report, "json")[:300], "...")
