"""
Curriculum training loop and the baselines it is compared against.

Every trial gets its own integer seed drawn from the run generator; the
trial's context draw, exploration coin flips and environment outcome all
come from ``default_rng(trial_seed)``.  This keeps runs bit-reproducible and
makes individual trials replayable from the dataset log.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .curriculum import Curriculum, build_curriculum, energy_table
from .environments import Environment
from .learner import NotTrainedError, PolicyModel, eps_greedy_choice, make_model, select_greedy, select_uncertain
from .quasirandom import SaltelliDesign, saltelli_design
from .records import Dataset, TrialRecord
from .sensitivity import analyze_dataset

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
PAPER_RANDOM_ORDERS = {
    "random1": ("M_G", "alpha", "theta", "beta", "f_G", "h_G"),
    "random2": ("beta", "f_G", "alpha", "h_G", "M_G", "theta"),
}


@dataclass(frozen=True)
class StageConfig:
    eps_pre: float = 0.7
    eps_post: float = 0.15
    samples_per_stage: int = 128
    new_data_weight: float = 2.5
    epochs: int = 15
    duplicate: bool = False
    warm_start: bool = True

    def __post_init__(self):
        for name in ("eps_pre", "eps_post"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not self.new_data_weight > 0:
            raise ValueError("new_data_weight must be positive")
        if self.samples_per_stage < 1 or self.epochs < 0:
            raise ValueError("samples_per_stage must be >= 1 and epochs >= 0")


@dataclass(frozen=True)
class LearnerConfig:
    kind: str = "tabular"
    options: dict = field(default_factory=dict)

    def build(self, space, n_features: int, epochs: int | None = None) -> PolicyModel:
        opts = dict(self.options)
        if self.kind == "logistic" and epochs is not None:
            opts.setdefault("epochs", epochs)
        if self.kind == "tabular" and "context_levels" in opts and opts["context_levels"] is not None:
            opts["context_levels"] = tuple(opts["context_levels"])
        if self.kind == "tabular" and "smoothing" in opts:
            opts["smoothing"] = tuple(opts["smoothing"])
        return make_model(self.kind, space.bin_counts.tolist(), n_features, **opts)


@dataclass
class RunReport:
    method: str
    seed: int
    checkpoints: list[str] = field(default_factory=list)
    collection_rates: list[float] = field(default_factory=list)
    eval_seen: list[float] = field(default_factory=list)
    eval_novel: list[float] = field(default_factory=list)
    expected_seen: list[float] = field(default_factory=list)
    expected_novel: list[float] = field(default_factory=list)
    curriculum: dict | None = None
    sensitivity: dict | None = None
    energy_table: list | None = None
    n_evaluations: int = 0
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("collection_rates", "eval_seen", "eval_novel", "expected_seen", "expected_novel"):
            for v in getattr(self, name):
                if not (0.0 <= v <= 1.0 or math.isnan(v)):
                    raise ValueError(f"{name} entries must lie in [0, 1]")

    @property
    def final_seen(self) -> float:
        return self.eval_seen[-1]

    @property
    def final_novel(self) -> float:
        return self.eval_novel[-1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = REPORT_SCHEMA_VERSION
        d["kind"] = "run_report"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        d = {k: v for k, v in d.items() if k not in ("schema_version", "kind")}
        return cls(**d)


class _Counter:
    """Wraps an environment and counts evaluate() calls."""

    def __init__(self, env):
        self.env = env
        self.calls = 0

    def __getattr__(self, name):
        return getattr(self.env, name)

    def evaluate(self, context, action, rng):
        self.calls += 1
        return self.env.evaluate(context, action, rng)


def _trial_seed(rng) -> int:
    return int(rng.integers(0, 2 ** 63 - 1))


def _outcome(env, ctx, action, trng, trial_id):
    try:
        y = env.evaluate(ctx, action, trng)
    except Exception as exc:
        raise RuntimeError(f"environment failed on trial {trial_id}: {exc}") from exc
    return int(y > 0.5) if not env.deterministic else y


# ---------------------------------------------------------------------------
# data collection
# ---------------------------------------------------------------------------

def collect_initial(env: Environment, space, design: SaltelliDesign, rng, stage: int = 0,
                    first_id: int = 0, policy: str = "sobol") -> Dataset:
    """One trial per design row, in row order, with a freshly drawn seen context each."""
    if design.k != space.k:
        raise ValueError(f"design has {design.k} dimensions, space has {space.k}")
    actions = space.from_unit(design.rows)
    bins = space.bin_of(actions)
    out = Dataset()
    for r in range(design.n_rows):
        seed = _trial_seed(rng)
        trng = np.random.default_rng(seed)
        ctx = env.draw_context(trng, "seen")
        y = _outcome(env, ctx, actions[r], trng, first_id + r)
        out.append(TrialRecord(first_id + r, stage, ctx.id, ctx.features, tuple(actions[r].tolist()),
                               tuple(bins[r].tolist()), int(y), policy, seed))
    return out


def stage_action(model: PolicyModel, curriculum: Curriculum, k: int, context, cfg: StageConfig, rng,
                 space=None) -> tuple[np.ndarray, np.ndarray, str]:
    """Pick one bin per dimension with the three-case stage policy.

    Returns (action, bins, tags) where ``tags`` holds one character per
    dimension: ``g``/``r`` for the greedy/random branch of epsilon-greedy on
    learned and future dimensions, ``u`` for uncertainty sampling on the
    current stage.
    """
    if not model.trained:
        raise NotTrainedError("stage_action needs a model trained on earlier data")
    n_stages = len(curriculum.stages)
    if not 1 <= k <= n_stages:
        raise ValueError(f"stage must lie in [1, {n_stages}], got {k}")
    stage_of = curriculum.stage_of()
    p = model.predict(context.features)
    bins = np.empty(len(p), dtype=np.int64)
    tags = []
    for i in range(len(p)):
        if stage_of[i] == k:
            bins[i] = select_uncertain(p, i, rng)
            tags.append("u")
        else:
            eps = cfg.eps_post if stage_of[i] < k else cfg.eps_pre
            bins[i], explored = eps_greedy_choice(p, i, eps, rng)
            tags.append("r" if explored else "g")
    action = space.center_of(bins) if space is not None else None
    return action, bins, "".join(tags)


def run_stage(env: Environment, space, model: PolicyModel, curriculum: Curriculum, k: int, cfg: StageConfig,
              rng, first_id: int = 0, policy: str = "cassl") -> tuple[Dataset, float]:
    out = Dataset()
    for n in range(cfg.samples_per_stage):
        seed = _trial_seed(rng)
        trng = np.random.default_rng(seed)
        ctx = env.draw_context(trng, "seen")
        action, bins, tags = stage_action(model, curriculum, k, ctx, cfg, trng, space)
        y = _outcome(env, ctx, action, trng, first_id + n)
        out.append(TrialRecord(first_id + n, k, ctx.id, ctx.features, tuple(action.tolist()),
                               tuple(bins.tolist()), int(y), f"{policy}:{tags}", seed))
    return out, out.success_rate()


def aggregation_weights(n_prev: int, n_new: int, new_data_weight: float) -> np.ndarray:
    """Per-record weights: old records 1, new records sharing ``new_data_weight`` x the old mass."""
    if n_new < 1:
        raise ValueError("new stage dataset is empty")
    if n_prev == 0 or new_data_weight == 1.0:
        return np.ones(n_prev + n_new)
    return np.concatenate((np.ones(n_prev), np.full(n_new, new_data_weight * n_prev / n_new)))


def aggregate_and_train(model: PolicyModel, d_prev: Dataset, d_new: Dataset, cfg: StageConfig,
                        seed: int = 0, fresh: PolicyModel | None = None):
    """Fit on the union with new data up-weighted.  Returns (model, union, weights)."""
    if len(d_new) == 0:
        raise ValueError("new stage dataset is empty")
    union = d_prev.union(d_new)
    if cfg.duplicate:
        copies = max(1, int(round(cfg.new_data_weight * len(d_prev) / len(d_new)))) \
            if cfg.new_data_weight != 1.0 and len(d_prev) else 1
        train = Dataset(list(d_prev) + list(d_new) * copies)
        weights = np.ones(len(train))
    else:
        train = union
        weights = aggregation_weights(len(d_prev), len(d_new), cfg.new_data_weight)
    start = model if (cfg.warm_start or fresh is None) else fresh
    return start.fit(train, weights, seed=seed), union, weights


def evaluate(model: PolicyModel, env: Environment, contexts: Sequence, trials: int = 5, rng=None) -> float:
    """Greedy success rate over ``trials`` attempts per context."""
    return _evaluate(model, env, contexts, trials, rng)[0]


def _evaluate(model, env, contexts, trials, rng):
    rng = rng if rng is not None else np.random.default_rng(0)
    hits, n, expected = 0, 0, []
    for ctx in contexts:
        p = model.predict(ctx.features)
        for _ in range(trials):
            bins = np.array([select_greedy(p, i, rng) for i in range(len(p))])
            action = env.space.center_of(bins)
            hits += int(env.evaluate(ctx, action, rng) > 0.5)
            n += 1
            if hasattr(env, "probability"):
                expected.append(env.probability(ctx, action))
    return hits / n, (float(np.mean(expected)) if expected else float("nan"))


def _checkpoint(report: RunReport, label: str, model, env, cfg_eval: dict, eval_seed: int, rate: float):
    trials = int(cfg_eval.get("trials", 5))
    # the same evaluation stream at every checkpoint and for every method keeps comparisons paired
    seen, exp_seen = _evaluate(model, env, env.seen, trials, np.random.default_rng([eval_seed, 0]))
    novel, exp_novel = _evaluate(model, env, env.novel, trials, np.random.default_rng([eval_seed, 1]))
    report.checkpoints.append(label)
    report.collection_rates.append(rate)
    report.eval_seen.append(seen)
    report.eval_novel.append(novel)
    report.expected_seen.append(exp_seen)
    report.expected_novel.append(exp_novel)
    log.info("%s %s: collect %.3f seen %.3f novel %.3f", report.method, label, rate, seen, novel)


# ---------------------------------------------------------------------------
# full runs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    n_base: int = 32
    second_order: bool = True
    stage: StageConfig = field(default_factory=StageConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    eval_trials: int = 5

    def to_dict(self) -> dict:
        return asdict(self)


def _fresh(env, space, cfg: RunConfig) -> PolicyModel:
    return cfg.learner.build(space, env.n_features, epochs=cfg.stage.epochs)


def train_cassl(env: Environment, space, cfg: RunConfig, seed: int, curriculum: Curriculum | None = None,
                method: str = "cassl"):
    """Quasi-random collection, sensitivity ranking, then one stage per curriculum step.

    Passing ``curriculum`` skips the ranking (used by the random-curriculum
    baseline); the sensitivity analysis still runs on the initial data.
    Returns (model, dataset, report).
    """
    counted = _Counter(env)
    rng = np.random.default_rng(seed)
    eval_seed = seed
    design = saltelli_design(space.k, cfg.n_base, cfg.second_order)
    data = collect_initial(counted, space, design, rng)
    report = RunReport(method=method, seed=seed, config=cfg.to_dict())
    sens = analyze_dataset(space, design, data)
    report.sensitivity = sens.to_dict()
    ranked = build_curriculum(sens)
    report.energy_table = energy_table(sens, ranked)
    if curriculum is None:
        curriculum = ranked
    report.curriculum = curriculum.to_dict()

    fresh = _fresh(env, space, cfg)
    model = fresh.fit(data, None, seed=_trial_seed(rng))
    _checkpoint(report, "CL0", model, env, {"trials": cfg.eval_trials}, eval_seed, data.success_rate())
    for k in range(1, len(curriculum.stages) + 1):
        d_k, rate = run_stage(counted, space, model, curriculum, k, cfg.stage, rng, first_id=len(data))
        model, data, _ = aggregate_and_train(model, data, d_k, cfg.stage, seed=_trial_seed(rng), fresh=fresh)
        _checkpoint(report, f"CL{k}", model, env, {"trials": cfg.eval_trials}, eval_seed, rate)
    report.n_evaluations = counted.calls
    return model, data, report


def train_random_curriculum(env, space, cfg: RunConfig, seed: int, order: str | Sequence[str] = "random1"):
    """CASSL with a fixed curriculum instead of the sensitivity ranking.

    ``order`` is one of the named orders in :data:`PAPER_RANDOM_ORDERS`,
    ``"shuffle"`` (a seeded permutation), or an explicit list of names.
    """
    if isinstance(order, str) and order == "shuffle":
        names = [space.names[i] for i in np.random.default_rng([seed, 7]).permutation(space.k)]
    elif isinstance(order, str):
        names = PAPER_RANDOM_ORDERS[order]
    else:
        names = list(order)
    cur = Curriculum.from_order([space.index(n) for n in names], space.names)
    return train_cassl(env, space, cfg, seed, curriculum=cur, method="random-curriculum")


def train_random_baseline(env, space, total_budget: int, cfg: RunConfig, seed: int):
    counted = _Counter(env)
    rng = np.random.default_rng(seed)
    data = Dataset()
    for t in range(total_budget):
        s = _trial_seed(rng)
        trng = np.random.default_rng(s)
        ctx = env.draw_context(trng, "seen")
        bins = np.array([trng.integers(b) for b in space.bin_counts], dtype=np.int64)
        action = space.center_of(bins)
        y = _outcome(counted, ctx, action, trng, t)
        data.append(TrialRecord(t, 0, ctx.id, ctx.features, tuple(action.tolist()), tuple(bins.tolist()),
                                int(y), "random", s))
    model = _fresh(env, space, cfg).fit(data, None, seed=_trial_seed(rng))
    report = RunReport(method="random", seed=seed, config=cfg.to_dict())
    _checkpoint(report, "final", model, env, {"trials": cfg.eval_trials}, seed, data.success_rate())
    report.n_evaluations = counted.calls
    return model, data, report


def staged_budgets(total: int, n_initial: int, ratio: Sequence[float] = (2796, 350)) -> list[int]:
    """Split ``total - n_initial`` over the later stages in proportion to ``ratio``."""
    rest = total - n_initial
    if rest < len(ratio):
        raise ValueError("budget too small for the staged baseline")
    shares = np.asarray(ratio, dtype=float) / float(np.sum(ratio))
    out = [int(round(rest * s)) for s in shares[:-1]]
    out.append(rest - sum(out))
    return [n_initial] + out


def train_staged_baseline(env, space, budgets: Sequence[int], cfg: RunConfig, seed: int):
    """Quasi-random stage 0, then epsilon_post-greedy on every dimension with the latest model.

    ``budgets[0]`` must equal the Saltelli design size for ``cfg.n_base``.
    """
    counted = _Counter(env)
    rng = np.random.default_rng(seed)
    design = saltelli_design(space.k, cfg.n_base, cfg.second_order)
    if budgets[0] != design.n_rows:
        raise ValueError(f"first budget must equal the design size {design.n_rows}")
    data = collect_initial(counted, space, design, rng)
    fresh = _fresh(env, space, cfg)
    model = fresh.fit(data, None, seed=_trial_seed(rng))
    report = RunReport(method="staged", seed=seed, config={**cfg.to_dict(), "budgets": list(budgets)})
    _checkpoint(report, "S0", model, env, {"trials": cfg.eval_trials}, seed, data.success_rate())
    all_post = StageConfig(eps_pre=cfg.stage.eps_post, eps_post=cfg.stage.eps_post,
                           samples_per_stage=1, new_data_weight=cfg.stage.new_data_weight,
                           epochs=cfg.stage.epochs, duplicate=cfg.stage.duplicate, warm_start=cfg.stage.warm_start)
    for s, n in enumerate(budgets[1:], start=1):
        d_s = Dataset()
        for t in range(n):
            ts = _trial_seed(rng)
            trng = np.random.default_rng(ts)
            ctx = env.draw_context(trng, "seen")
            p = model.predict(ctx.features)
            bins = np.empty(space.k, dtype=np.int64)
            tags = []
            for i in range(space.k):
                bins[i], explored = eps_greedy_choice(p, i, cfg.stage.eps_post, trng)
                tags.append("r" if explored else "g")
            action = space.center_of(bins)
            y = _outcome(counted, ctx, action, trng, len(data) + t)
            d_s.append(TrialRecord(len(data) + t, s, ctx.id, ctx.features, tuple(action.tolist()),
                                   tuple(bins.tolist()), int(y), "staged:" + "".join(tags), ts))
        model, data, _ = aggregate_and_train(model, data, d_s, all_post, seed=_trial_seed(rng), fresh=fresh)
        _checkpoint(report, f"S{s}", model, env, {"trials": cfg.eval_trials}, seed, d_s.success_rate())
    report.n_evaluations = counted.calls
    return model, data, report
