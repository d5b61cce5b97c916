"""
A desk-scale strategy ablation
==============================

Trains the fusion module plus a linear classifier on the synthetic concept
retrieval task once per strategy and compares accuracy, how often the top
weight lands on the relevant view, and the forward-pass operation count.

This uses a reduced configuration so it finishes in well under a minute; the
full default run is ``softrank ablate`` (roughly 70 s on one core).
"""
# %%
import logging

from softrank import Strategy
from softrank.harness import SyntheticTaskConfig, TrainConfig, generate_task, render_report, run_ablation, train
from softrank.ranking import StrategyConfig

logging.basicConfig(level=logging.INFO, format="%(message)s")

task_cfg = SyntheticTaskConfig(samples_train=500, samples_eval=200, seed=0)
train_cfg = TrainConfig(steps=200)

# %% One training run up close: the loss starts near ln(10) and falls.
task = generate_task(task_cfg)
run = train(task, StrategyConfig(Strategy.SOFTSORT), train_cfg, task_cfg)
print(f"initial loss {run.initial_loss:.3f}")
for step, loss in run.loss_curve[::4]:
    print(f"  step {step:>3}: {loss:.4f}")

# %% All six strategies on identical data, batches and initial parameters.
report = run_ablation(task_cfg, train_cfg, repeats=1)
print(f"{'strategy':<16}{'accuracy':>9}{'hit rate':>10}{'FLOPs':>8}")
for r in report.strategies:
    print(f"{r.name:<16}{r.accuracy:>9.3f}{r.top_view_hit_rate:>10.3f}{r.flops['total']:>8}")

for name, ok in report.checks.items():
    print(f"[{'pass' if ok else 'FAIL'}] {name}")

# %% The same report as CSV, ready for a spreadsheet.
print(render_report(report, "csv"))
