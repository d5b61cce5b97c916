"""
Six ways to turn view scores into pooling weights
=================================================

Run with ``python3 demos/01_ranking_strategies.py``.
"""
# %%
import numpy as np

from softrank import (
    Strategy,
    StrategyConfig,
    WeightMode,
    flop_count,
    sinkhorn_sort,
    soft_sort,
    strategy_vjp,
    strategy_weights,
)

np.set_printoptions(precision=4, suppress=True)

# Cosine scores for six camera views against one question.
s = np.array([0.12, 0.81, -0.30, 0.55, 0.05, 0.49])

# %% SoftSort builds a relaxed permutation: row r spreads rank r over the views.
p = soft_sort(s, tau=0.1)
print("soft_sort, tau=0.1\n", p)
print("row sums", p.sum(axis=1))

# Lowering the temperature hardens it into the exact sorting permutation.
print("argmax per row at tau=1e-4:", soft_sort(s, 1e-4).argmax(axis=1), " np.argsort(-s):", np.argsort(-s))

# %% Sinkhorn uses the same kernel but also balances the columns.
q = sinkhorn_sort(s, tau=1.0, iters=50)
print("sinkhorn column sums", q.sum(axis=0))

# At small temperatures 50 sweeps are not enough to balance the columns.
q = sinkhorn_sort(s, tau=0.1, iters=50)
print("tau=0.1 column sums", q.sum(axis=0))

# %% Weights from every strategy at the same temperature.
for kind in Strategy:
    cfg = StrategyConfig(kind, tau=0.2)
    print(f"{kind.label:<15}", strategy_weights(cfg, s))

# The SoftSort and SimpleSoftmax rows match: rank 0 sits at max(s), so row 0 is
# softmax(-(max(s) - s) / tau) = softmax(s / tau). Top-row SoftSort only
# differs from a plain softmax in what it costs. The rank-decay reduction
# mixes in the lower ranks and really is different.
cfg = StrategyConfig(Strategy.SOFTSORT, tau=0.2, weight_mode=WeightMode.RANK_DECAY, rank_decay=0.5)
print(f"{'SoftSort/decay':<15}", strategy_weights(cfg, s))

# %% Gradients: how should the scores move to raise the weight on view 3?
e3 = np.eye(6)[3]
for kind in (Strategy.SOFTSORT, Strategy.SOFTMAX, Strategy.HARDTOP1, Strategy.UNIFORM):
    print(f"d w3 / d s  {kind.label:<15}", strategy_vjp(StrategyConfig(kind, tau=0.2), s, e3))

# %% Operation counts at six views.
for kind in Strategy:
    print(f"{kind.label:<15}{flop_count(StrategyConfig(kind), 6).total:>7}")
