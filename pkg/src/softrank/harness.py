"""Synthetic multi-view retrieval benchmark and the ablation driver.

Each sample has ``n_views`` view embeddings. One of them (the relevant view)
is a noisy copy of the sample's concept; the others are other concepts,
scaled by ``distractor_sigma``, with the same noise. The query is a noisy
text-side embedding of the same concept. With the default
``distractor_sigma = 1`` the views are statistically interchangeable, so
only the query says which one matters. A linear classifier on the fused
embedding predicts the concept, and pooling that finds the relevant view
wins.

Noise vectors are isotropic Gaussians scaled so their expected norm is about
``noise_sigma`` (per-coordinate standard deviation ``noise_sigma / sqrt(d)``);
concepts have unit norm.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .core import GradCheckReport, finite_diff_check
from .errors import ParameterError, SchemaError, TrainingDiverged, ZeroNormError
from .fusion import (
    PARAM_KEYS,
    TgsspParams,
    fuse,
    fuse_backward,
    fuse_forward,
    init_params,
)
from .metrics import MetricReport, evaluate_corpus
from .ranking import (
    FLOP_CONVENTION,
    Strategy,
    StrategyConfig,
    WeightMode,
    flop_count,
    simple_softmax,
    strategy_vjp,
    strategy_weights,
)

log = logging.getLogger(__name__)

GUIDED = (Strategy.SOFTSORT, Strategy.TOPK, Strategy.SOFTMAX, Strategy.SINKHORN)
FLOP_ORDER = (
    Strategy.UNIFORM,
    Strategy.HARDTOP1,
    Strategy.SOFTMAX,
    Strategy.SOFTSORT,
    Strategy.TOPK,
    Strategy.SINKHORN,
)
ACCURACY_MARGIN = 0.10
MIN_SINKHORN_FLOP_RATIO = 50.0


# ---------------------------------------------------------------------------
# synthetic task
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticTaskConfig:
    n_views: int = 6
    d_v: int = 48
    d_t: int = 48
    d_e: int = 32
    n_concepts: int = 10
    noise_sigma: float = 0.3
    distractor_sigma: float = 1.0
    samples_train: int = 2000
    samples_eval: int = 500
    seed: int = 0

    def __post_init__(self):
        for name in ("n_views", "d_v", "d_t", "d_e", "n_concepts", "samples_train", "samples_eval"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be positive")
        if self.noise_sigma < 0 or not self.distractor_sigma > 0:
            raise ParameterError("noise levels must be non-negative")
        if not self.noise_sigma < self.distractor_sigma:
            raise ParameterError("noise_sigma must be smaller than distractor_sigma")


class Sample(NamedTuple):
    views: np.ndarray
    query: np.ndarray
    label: int
    relevant_view: int


@dataclass(frozen=True)
class SampleSet:
    views: np.ndarray  # (S, n_views, d_v)
    queries: np.ndarray  # (S, d_t)
    labels: np.ndarray
    relevant_view: np.ndarray

    def __len__(self):
        return self.labels.size

    def __getitem__(self, i) -> Sample:
        return Sample(self.views[i], self.queries[i], int(self.labels[i]), int(self.relevant_view[i]))


class ConceptBank(NamedTuple):
    visual: np.ndarray  # (n_concepts, d_v), unit rows
    text: np.ndarray  # (n_concepts, d_t), unit rows


class SyntheticTask(NamedTuple):
    train: SampleSet
    eval: SampleSet
    concepts: ConceptBank


def _unit_rows(x):
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _make_samples(rng, cfg, concepts, count):
    n, c = cfg.n_views, cfg.n_concepts
    labels = rng.integers(0, c, size=count)
    relevant = rng.integers(0, n, size=count)
    concept_ids = np.empty((count, n), dtype=np.int64)
    for i in range(count):
        others = np.delete(np.arange(c), labels[i])
        if others.size == 0:
            others = np.arange(c)
        replace_ = n - 1 > others.size
        concept_ids[i] = np.insert(rng.choice(others, size=n - 1, replace=replace_), relevant[i], labels[i])
    amplitude = np.full((count, n, 1), cfg.distractor_sigma)
    amplitude[np.arange(count), relevant] = 1.0
    noise = cfg.noise_sigma / math.sqrt(cfg.d_v) * rng.normal(size=(count, n, cfg.d_v))
    views = amplitude * concepts.visual[concept_ids] + noise
    queries = concepts.text[labels] + cfg.noise_sigma / math.sqrt(cfg.d_t) * rng.normal(size=(count, cfg.d_t))
    return SampleSet(views, queries, labels, relevant)


def generate_task(cfg: SyntheticTaskConfig) -> SyntheticTask:
    """Train and eval splits plus the concept bank; deterministic in ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    concepts = ConceptBank(
        _unit_rows(rng.normal(size=(cfg.n_concepts, cfg.d_v))),
        _unit_rows(rng.normal(size=(cfg.n_concepts, cfg.d_t))),
    )
    train_set = _make_samples(rng, cfg, concepts, cfg.samples_train)
    eval_set = _make_samples(rng, cfg, concepts, cfg.samples_eval)
    return SyntheticTask(train_set, eval_set, concepts)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    steps: int = 500
    batch: int = 16
    learning_rate: float = 1e-2
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.batch < 1:
            raise ParameterError("steps and batch must be >= 1")
        if not self.learning_rate > 0:
            raise ParameterError("learning_rate must be > 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ParameterError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")


@dataclass(frozen=True)
class Model:
    """Fusion parameters plus the linear concept classifier on top."""

    fusion: TgsspParams
    cls_weight: np.ndarray  # (n_concepts, d_e)
    cls_bias: np.ndarray

    def arrays(self):
        a = dict(self.fusion.arrays())
        a["classifier.weight"] = self.cls_weight
        a["classifier.bias"] = self.cls_bias
        return a

    def with_arrays(self, arrays):
        return Model(
            TgsspParams.from_arrays(arrays, self.fusion.strategy),
            arrays["classifier.weight"],
            arrays["classifier.bias"],
        )

    def logits(self, fused):
        return self.cls_weight @ fused + self.cls_bias


@dataclass
class TrainResult:
    model: Model
    initial_loss: float
    loss_curve: list = field(default_factory=list)  # (step, mean loss over the next 10 steps)

    @property
    def final_loss(self):
        return self.loss_curve[-1][1] if self.loss_curve else self.initial_loss


def init_model(task_cfg: SyntheticTaskConfig, strategy: StrategyConfig, seed: int = 0) -> Model:
    fusion = init_params(task_cfg.d_v, task_cfg.d_t, task_cfg.d_e, seed, strategy)
    rng = np.random.default_rng([seed, 1])
    w = 0.01 * rng.normal(size=(task_cfg.n_concepts, task_cfg.d_e))
    return Model(fusion, w, np.zeros(task_cfg.n_concepts))


class Adam:
    def __init__(self, tcfg: TrainConfig):
        self.cfg = tcfg
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> dict:
        c = self.cfg
        self.t += 1
        out = {}
        for k, p in params.items():
            g = grads[k]
            if c.optimizer == "sgd":
                out[k] = p - c.learning_rate * g
                continue
            m = self.m[k] = c.beta1 * self.m.get(k, 0.0) + (1 - c.beta1) * g
            v = self.v[k] = c.beta2 * self.v.get(k, 0.0) + (1 - c.beta2) * g * g
            m_hat = m / (1 - c.beta1 ** self.t)
            v_hat = v / (1 - c.beta2 ** self.t)
            out[k] = p - c.learning_rate * m_hat / (np.sqrt(v_hat) + c.eps)
        return out


def _log_softmax(z):
    z = z - z.max()
    return z - math.log(np.exp(z).sum())


def batch_loss_and_grads(model: Model, samples: SampleSet, idx):
    """Mean cross-entropy over ``idx`` and its gradients keyed like ``Model.arrays``."""
    grads = {k: np.zeros_like(a) for k, a in model.arrays().items()}
    total = 0.0
    b = len(idx)
    for i in idx:
        out, tape = fuse_forward(samples.views[i], samples.queries[i], model.fusion)
        logp = _log_softmax(model.logits(out.fused))
        label = samples.labels[i]
        total -= logp[label]
        d_logits = np.exp(logp)
        d_logits[label] -= 1.0
        d_logits /= b
        grads["classifier.weight"] += np.outer(d_logits, out.fused)
        grads["classifier.bias"] += d_logits
        g, _, _ = fuse_backward(tape, model.cls_weight.T @ d_logits)
        for k, a in g.arrays().items():
            grads[k] += a
    return total / b, grads


def train(task: SyntheticTask, strategy: StrategyConfig, tcfg: TrainConfig,
          task_cfg: SyntheticTaskConfig | None = None) -> TrainResult:
    """Jointly fit the fusion parameters and the classifier with cross-entropy.

    The batch sequence depends only on ``tcfg.seed``, so every strategy sees
    the same batches. Raises ``TrainingDiverged`` on a non-finite loss.
    """
    if task_cfg is None:
        n, d_v = task.train.views.shape[1:]
        task_cfg = SyntheticTaskConfig(
            n_views=n, d_v=d_v, d_t=task.train.queries.shape[1],
            n_concepts=task.concepts.visual.shape[0],
        )
    model = init_model(task_cfg, strategy, tcfg.seed)
    opt = Adam(tcfg)
    batch_rng = np.random.default_rng([tcfg.seed, 2])
    curve = []
    window = []
    initial = None
    for step in range(tcfg.steps):
        idx = batch_rng.integers(0, len(task.train), size=tcfg.batch)
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = batch_loss_and_grads(model, task.train, idx)
        except (ParameterError, ZeroNormError) as exc:
            if step == 0:
                raise
            # only reachable once an update has produced overflowing parameters
            raise TrainingDiverged(f"{strategy.kind.label}: {exc} at step {step}") from exc
        if not math.isfinite(loss):
            raise TrainingDiverged(
                f"{strategy.kind.label}: non-finite loss {loss} at step {step}"
            )
        if initial is None:
            initial = loss
        window.append(loss)
        if len(window) == 10 or step == tcfg.steps - 1:
            curve.append((step - len(window) + 1, float(np.mean(window))))
            window = []
        model = model.with_arrays(opt.step(model.arrays(), grads))
    return TrainResult(model, float(initial), curve)


def evaluate(samples: SampleSet, model: Model, strategy: StrategyConfig | None = None):
    """Returns ``(accuracy, top_view_hit_rate)`` over ``samples``."""
    params = model.fusion if strategy is None else model.fusion.with_strategy(strategy)
    correct = 0
    hits = 0
    for i in range(len(samples)):
        out = fuse(samples.views[i], samples.queries[i], params)
        correct += int(np.argmax(model.logits(out.fused)) == samples.labels[i])
        hits += int(np.argmax(out.weights) == samples.relevant_view[i])
    n = len(samples)
    return correct / n, hits / n


# ---------------------------------------------------------------------------
# ablation
# ---------------------------------------------------------------------------

def _sig6(x):
    return float(f"{x:.6g}")


def _round_floats(obj):
    if isinstance(obj, float):
        return _sig6(obj)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


@dataclass
class StrategyResult:
    name: str
    accuracy: float | None
    top_view_hit_rate: float | None
    accuracy_per_seed: list
    hit_rate_per_seed: list
    final_loss: float | None
    flops: dict
    wall_time: float | None
    status: str = "ok"

    def to_dict(self):
        return {
            "name": self.name,
            "accuracy": self.accuracy,
            "top_view_hit_rate": self.top_view_hit_rate,
            "accuracy_per_seed": self.accuracy_per_seed,
            "hit_rate_per_seed": self.hit_rate_per_seed,
            "final_loss": self.final_loss,
            "flops": self.flops,
            "wall_time": self.wall_time,
            "status": self.status,
        }


ABLATION_CSV_COLUMNS = (
    "strategy",
    "accuracy",
    "top_view_hit_rate",
    "final_loss",
    "flops.additions",
    "flops.multiplications",
    "flops.exponentials",
    "flops.comparisons",
    "flops.divisions",
    "flops.total",
    "wall_time",
    "status",
)


@dataclass
class AblationReport:
    task: dict
    train: dict
    seeds: list
    strategies: list
    checks: dict
    flop_convention: str = FLOP_CONVENTION

    @property
    def passed(self):
        return all(v is not False for v in self.checks.values())

    def result(self, kind: Strategy):
        for r in self.strategies:
            if r.name == kind.label:
                return r
        return None

    def to_dict(self):
        return {
            "task": self.task,
            "train": self.train,
            "seeds": list(self.seeds),
            "flop_convention": self.flop_convention,
            "strategies": [r.to_dict() for r in self.strategies],
            "ordering": {"checks": dict(self.checks), "passed": self.passed},
        }

    def csv_table(self):
        rows = []
        for r in self.strategies:
            row = {"strategy": r.name, "accuracy": r.accuracy,
                   "top_view_hit_rate": r.top_view_hit_rate, "final_loss": r.final_loss,
                   "wall_time": r.wall_time, "status": r.status}
            for k, v in r.flops.items():
                row[f"flops.{k}"] = v
            rows.append([row[c] for c in ABLATION_CSV_COLUMNS])
        return list(ABLATION_CSV_COLUMNS), rows


def ordering_checks(results: dict, n_views: int, base: StrategyConfig) -> dict:
    """Table-style ordering assertions; ``None`` marks a check whose inputs are missing."""
    checks = {}
    uniform = results.get(Strategy.UNIFORM)
    for kind in GUIDED:
        key = f"{kind.value}_beats_uniform_by_{ACCURACY_MARGIN:.2f}"
        r = results.get(kind)
        if r is None or uniform is None or r.accuracy is None or uniform.accuracy is None:
            checks[key] = None
        else:
            checks[key] = r.accuracy >= uniform.accuracy + ACCURACY_MARGIN
    soft, hard = results.get(Strategy.SOFTSORT), results.get(Strategy.HARDTOP1)
    if soft is None or hard is None or soft.accuracy is None or hard.accuracy is None:
        checks["softsort_at_least_hardtop1"] = None
    else:
        checks["softsort_at_least_hardtop1"] = soft.accuracy >= hard.accuracy
    totals = [flop_count(replace(base, kind=k, top_k=min(base.top_k, n_views)), n_views).total
              for k in FLOP_ORDER]
    checks["flop_ordering"] = all(a < b for a, b in zip(totals, totals[1:]))
    checks["sinkhorn_softsort_flop_ratio_gt_50"] = (
        totals[-1] / totals[FLOP_ORDER.index(Strategy.SOFTSORT)] > MIN_SINKHORN_FLOP_RATIO
    )
    return checks


def run_ablation(
    task_cfg: SyntheticTaskConfig | None = None,
    tcfg: TrainConfig | None = None,
    strategies: Sequence[Strategy] | None = None,
    repeats: int = 3,
    base: StrategyConfig | None = None,
    timings: bool = False,
) -> AblationReport:
    """Train and evaluate each strategy on identical data, batches and init.

    Repeat ``r`` uses task seed ``task_cfg.seed + r`` and training seed
    ``tcfg.seed + r``; reported accuracies are means over repeats. Wall times
    are only recorded when ``timings`` is set, which keeps the report
    reproducible byte for byte otherwise.
    """
    task_cfg = task_cfg or SyntheticTaskConfig()
    tcfg = tcfg or TrainConfig()
    base = base or StrategyConfig()
    kinds = [Strategy.parse(k) for k in (strategies or list(Strategy))]
    if repeats < 1:
        raise ParameterError("repeats must be >= 1")
    seeds = [task_cfg.seed + r for r in range(repeats)]
    tasks = [generate_task(replace(task_cfg, seed=s)) for s in seeds]

    results = {}
    for kind in kinds:
        cfg = replace(base, kind=kind, top_k=min(base.top_k, task_cfg.n_views))
        accs, hits, losses = [], [], []
        status = "ok"
        start = time.perf_counter()
        for r, task in enumerate(tasks):
            try:
                trained = train(task, cfg, replace(tcfg, seed=tcfg.seed + r), task_cfg)
            except TrainingDiverged as exc:
                log.warning("training aborted: %s", exc)
                status = f"diverged: {exc}"
                break
            acc, hit = evaluate(task.eval, trained.model)
            accs.append(acc)
            hits.append(hit)
            losses.append(trained.final_loss)
            log.info("%s repeat %d: accuracy %.4f hit rate %.4f", kind.label, r, acc, hit)
        elapsed = time.perf_counter() - start
        ok = status == "ok"
        results[kind] = StrategyResult(
            name=kind.label,
            accuracy=float(np.mean(accs)) if ok else None,
            top_view_hit_rate=float(np.mean(hits)) if ok else None,
            accuracy_per_seed=accs,
            hit_rate_per_seed=hits,
            final_loss=float(np.mean(losses)) if ok else None,
            flops=flop_count(cfg, task_cfg.n_views).to_dict(),
            wall_time=elapsed if timings else None,
            status=status,
        )
    return AblationReport(
        task=asdict(task_cfg),
        train=asdict(tcfg),
        seeds=seeds,
        strategies=[results[k] for k in kinds],
        checks=ordering_checks(results, task_cfg.n_views, base),
    )


# ---------------------------------------------------------------------------
# gradient-check suite
# ---------------------------------------------------------------------------

def _strategy_cases(n):
    k = min(3, n)
    yield "softsort/top_row", StrategyConfig(Strategy.SOFTSORT)
    yield "softsort/rank_decay", StrategyConfig(Strategy.SOFTSORT, weight_mode=WeightMode.RANK_DECAY)
    for iters in (10, 50):
        for mode in WeightMode:
            yield (f"sinkhorn{iters}/{mode.value}",
                   StrategyConfig(Strategy.SINKHORN, sinkhorn_iters=iters, weight_mode=mode))
    yield "topksoft", StrategyConfig(Strategy.TOPK, top_k=k)
    yield "simplesoftmax", StrategyConfig(Strategy.SOFTMAX)
    yield "hardtop1/straight_through", StrategyConfig(Strategy.HARDTOP1)
    yield "uniformpooling", StrategyConfig(Strategy.UNIFORM)


def _fusion_cases(n):
    yield "fuse/softsort", StrategyConfig(Strategy.SOFTSORT)
    yield "fuse/softsort_rank_decay", StrategyConfig(Strategy.SOFTSORT, weight_mode=WeightMode.RANK_DECAY)
    yield "fuse/sinkhorn10", StrategyConfig(Strategy.SINKHORN, sinkhorn_iters=10)
    yield "fuse/topksoft", StrategyConfig(Strategy.TOPK, top_k=min(3, n))
    yield "fuse/simplesoftmax", StrategyConfig(Strategy.SOFTMAX)
    yield "fuse/uniformpooling", StrategyConfig(Strategy.UNIFORM)


def check_strategy_gradient(cfg, s, upstream, h=1e-5, tol=1e-4, gradient_scale=1.0):
    """Finite-difference check of ``strategy_vjp`` for one score vector.

    HardTop1 is checked against its SimpleSoftmax surrogate, which is what
    its backward pass differentiates.
    """
    if cfg.kind is Strategy.HARDTOP1:
        def f(x):
            return upstream @ simple_softmax(x, cfg.tau)
    else:
        def f(x):
            return upstream @ strategy_weights(cfg, x)

    def grad(x):
        return gradient_scale * strategy_vjp(cfg, x, upstream)

    return finite_diff_check(f, grad, s, h=h, tol=tol)


def check_fusion_gradient(params, views, query, upstream, h=1e-5, tol=1e-4, gradient_scale=1.0):
    """Finite-difference check of ``fuse_vjp`` over every parameter, view and query entry."""
    arrays = params.arrays()
    shapes = [(k, arrays[k].shape) for k in PARAM_KEYS] + [("views", views.shape), ("query", query.shape)]
    names = [f"{k}[{i}]" for k, shp in shapes for i in range(math.prod(shp))]
    x0 = np.concatenate([arrays[k].ravel() for k in PARAM_KEYS] + [views.ravel(), query.ravel()])

    layout = []
    offset = 0
    for k, shp in shapes:
        size = math.prod(shp)
        layout.append((k, shp, offset, offset + size))
        offset += size

    def unpack(x):
        parts = {k: x[a:b].reshape(shp) for k, shp, a, b in layout}
        return TgsspParams.from_arrays(parts, params.strategy), parts["views"], parts["query"]

    def f(x):
        p, v, q = unpack(x)
        return upstream @ fuse(v, q, p).fused

    def grad(x):
        p, v, q = unpack(x)
        _, tape = fuse_forward(v, q, p)
        g, dv, dq = fuse_backward(tape, upstream)
        ga = g.arrays()
        return gradient_scale * np.concatenate([ga[k].ravel() for k in PARAM_KEYS] + [dv.ravel(), dq.ravel()])

    return finite_diff_check(f, grad, x0, h=h, tol=tol, names=names)


def grad_check_suite(
    seed_count: int = 20,
    tol: float = 1e-4,
    h: float = 1e-5,
    view_counts: Sequence[int] = (2, 6, 8),
    dims: tuple = (5, 4, 3),
    gradient_scale: float = 1.0,
) -> GradCheckReport:
    """Check every exported gradient over ``seed_count`` seeds and view counts.

    ``per_param_errors`` lists ``(check name, max relative error)`` for each
    check; ``gradient_scale`` != 1 corrupts the analytic side on purpose.
    """
    if seed_count < 1:
        raise ParameterError("seed_count must be >= 1")
    d_v, d_t, d_e = dims
    entries = []
    for seed in range(seed_count):
        for n in view_counts:
            rng = np.random.default_rng([seed, n])
            s = rng.uniform(-1.0, 1.0, size=n)
            u = rng.normal(size=n)
            for name, cfg in _strategy_cases(n):
                rep = check_strategy_gradient(cfg, s, u, h, tol, gradient_scale)
                entries.append((f"{name} n={n} seed={seed}", rep.max_rel_error))
            views = rng.normal(size=(n, d_v))
            query = rng.normal(size=d_t)
            up = rng.normal(size=d_e)
            for name, cfg in _fusion_cases(n):
                params = init_params(d_v, d_t, d_e, seed, cfg)
                rep = check_fusion_gradient(params, views, query, up, h, tol, gradient_scale)
                entries.append((f"{name} n={n} seed={seed}", rep.max_rel_error))
    worst = max(e for _, e in entries)
    return GradCheckReport(worst, entries, worst < tol, tol)


# ---------------------------------------------------------------------------
# metric files and report emission
# ---------------------------------------------------------------------------

def mini_corpus_path() -> Path:
    """Location of the 10-pair sample corpus shipped with the package."""
    return Path(__file__).parent / "data" / "mini_corpus.jsonl"


def read_pairs_jsonl(path) -> list:
    """Parse ``{"id", "hypothesis", "references"}`` lines; blank lines are skipped."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {lineno}: malformed JSON ({exc.msg})", lineno) from None
            if not isinstance(obj, dict):
                raise SchemaError(f"line {lineno}: expected a JSON object", lineno)
            missing = [k for k in ("id", "hypothesis", "references") if k not in obj]
            if missing:
                raise SchemaError(f"line {lineno}: missing field(s) {', '.join(missing)}", lineno)
            refs = obj["references"]
            if not isinstance(obj["hypothesis"], str):
                raise SchemaError(f"line {lineno}: 'hypothesis' must be a string", lineno)
            if not isinstance(refs, list) or not refs or not all(isinstance(r, str) for r in refs):
                raise SchemaError(f"line {lineno}: 'references' must be a non-empty list of strings", lineno)
            pairs.append((str(obj["id"]), obj["hypothesis"], refs))
    if not pairs:
        raise ParameterError("no pairs")
    return pairs


def eval_metrics_file(path, out=None, fmt="json") -> MetricReport:
    """Score a JSON-lines file and write the report to ``out`` or beside the input."""
    report = evaluate_corpus(read_pairs_jsonl(path))
    if out is None:
        p = Path(path)
        out = p.with_name(p.stem + (".report.json" if fmt == "json" else ".report.csv"))
    emit_report(report, fmt, out)
    return report


def render_report(report, fmt="json") -> str:
    if fmt == "json":
        return json.dumps(_round_floats(report.to_dict()), indent=2) + "\n"
    if fmt == "csv":
        header, rows = report.csv_table()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else f"{v:.6g}" if isinstance(v, float) else v
                             for v in row])
        return buf.getvalue()
    raise ParameterError(f"unknown report format {fmt!r}")


def emit_report(report, fmt, out_path) -> None:
    """Write ``report`` as JSON (one object) or CSV (header plus rows)."""
    text = render_report(report, fmt)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
