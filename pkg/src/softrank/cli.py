"""Command-line entry point: ``softrank <subcommand>``.

Exit codes: 0 success, 1 failed check (ordering or gradient), 2 usage or IO
error. ``SOFTRANK_SEED`` in the environment overrides ``--seed``.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from .errors import ParameterError, SchemaError, ZeroNormError
from .fusion import fuse, init_params
from .harness import (
    SyntheticTaskConfig,
    TrainConfig,
    emit_report,
    eval_metrics_file,
    generate_task,
    grad_check_suite,
    render_report,
    run_ablation,
)
from .ranking import FLOP_CONVENTION, Strategy, StrategyConfig, WeightMode, flop_count

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


def _seed(args):
    env = os.environ.get("SOFTRANK_SEED")
    if env is None:
        return args.seed
    try:
        return int(env)
    except ValueError:
        raise ParameterError(f"SOFTRANK_SEED must be an integer, got {env!r}") from None


def _strategies(spec):
    if spec == "all":
        return list(Strategy)
    return [Strategy.parse(s) for s in spec.split(",") if s.strip()]


def cmd_grad_check(args):
    report = grad_check_suite(args.seeds, tol=args.tol)
    failures = [(n, e) for n, e in report.per_param_errors if not e < args.tol]
    print(f"checks run:      {len(report.per_param_errors)}")
    print(f"max rel. error:  {report.max_rel_error:.3e} (tolerance {args.tol:g})")
    for name, err in failures[:20]:
        print(f"FAIL {name}: {err:.3e}")
    print("PASSED" if report.passed else f"FAILED ({len(failures)} checks)")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_ablate(args):
    task_cfg = SyntheticTaskConfig(
        n_views=args.views, d_v=args.dim_v, d_t=args.dim_t, d_e=args.dim_e,
        n_concepts=args.concepts, seed=_seed(args),
    )
    tcfg = TrainConfig(steps=args.steps, seed=_seed(args))
    base = StrategyConfig(tau=args.tau)
    report = run_ablation(task_cfg, tcfg, _strategies(args.strategies), args.repeats,
                          base, timings=args.timings)
    if args.out:
        emit_report(report, args.format, args.out)
    else:
        sys.stdout.write(render_report(report, args.format))
    for name, ok in report.checks.items():
        state = "skip" if ok is None else ("pass" if ok else "FAIL")
        print(f"[{state}] {name}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_flops(args):
    print(f"N_v = {args.views}; {FLOP_CONVENTION}")
    header = f"{'strategy':<16}{'add':>8}{'mul':>8}{'exp':>8}{'cmp':>8}{'div':>8}{'total':>10}"
    print(header)
    for kind in Strategy:
        cfg = StrategyConfig(kind, top_k=min(args.topk, args.views),
                             sinkhorn_iters=args.sinkhorn_iters)
        fc = flop_count(cfg, args.views)
        print(f"{kind.label:<16}{fc.additions:>8}{fc.multiplications:>8}{fc.exponentials:>8}"
              f"{fc.comparisons:>8}{fc.divisions:>8}{fc.total:>10}")
    return EXIT_OK


def cmd_eval_metrics(args):
    report = eval_metrics_file(args.input, args.out, args.format)
    c = report.to_dict()["corpus"]
    bleu = "  ".join(f"BLEU-{n}={100 * b:.2f}" for n, b in enumerate(c["bleu"], start=1))
    print(f"{bleu}  METEOR={100 * c['meteor']:.2f}  ROUGE-L={100 * c['rouge_l']:.2f}  "
          f"CIDEr={c['cider']:.3f}")
    return EXIT_OK


def cmd_demo(args):
    task_cfg = SyntheticTaskConfig(n_views=args.views, samples_train=1, samples_eval=1,
                                   seed=_seed(args))
    task = generate_task(task_cfg)
    sample = task.eval[0]
    cfg = StrategyConfig(Strategy.parse(args.strategy), tau=args.tau,
                         top_k=min(3, args.views), weight_mode=WeightMode(args.weight_mode))
    params = init_params(task_cfg.d_v, task_cfg.d_t, task_cfg.d_e, _seed(args), cfg)
    out = fuse(sample.views, sample.query, params)
    np.set_printoptions(precision=4, suppress=True)
    print(f"strategy       {cfg.kind.label} (tau={cfg.tau:g})")
    print(f"relevant view  {sample.relevant_view}  (untrained projections)")
    print(f"scores         {out.scores}")
    print(f"weights        {out.weights}")
    print(f"top view       {int(np.argmax(out.weights))}")
    print(f"|fused|        {np.linalg.norm(out.fused):.4f}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="softrank", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grad-check", help="finite-difference check of every analytic gradient")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("ablate", help="train and compare the six ranking strategies")
    p.add_argument("--views", type=int, default=6)
    p.add_argument("--dim-v", type=int, default=48)
    p.add_argument("--dim-t", type=int, default=48)
    p.add_argument("--dim-e", type=int, default=32)
    p.add_argument("--concepts", type=int, default=10)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=3, help="seeds averaged per strategy")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--strategies", default="all", help="'all' or a comma-separated list")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--timings", action="store_true",
                   help="record wall times (the report is then no longer reproducible)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("flops", help="operation counts per strategy")
    p.add_argument("--views", type=int, default=6)
    p.add_argument("--sinkhorn-iters", type=int, default=50)
    p.add_argument("--topk", type=int, default=3)
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("eval-metrics", help="score a JSON-lines file of hypotheses")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_eval_metrics)

    p = sub.add_parser("demo", help="print one fusion forward pass")
    p.add_argument("--strategy", default="softsort")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--views", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weight-mode", choices=[m.value for m in WeightMode], default="top_row")
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SchemaError, ParameterError, ZeroNormError, OSError) as exc:
        print(f"softrank {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
