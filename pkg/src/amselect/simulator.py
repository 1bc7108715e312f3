"""Seeded evaluation campaigns over replayed oracle judgments.

A realization samples a query pool, runs one strategy to its budget against
the dataset's stored judgments, and records the model that would be chosen
at every intermediate budget.  Campaigns aggregate many realizations into
identification-probability curves, labels-to-target counts, and tail
win-rate gaps.  Pool sampling depends only on (master seed, realization
index), so the same pools recur across strategies and pairwise comparisons
are paired.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import (
    Dataset,
    JudgmentVector,
    NoiseParams,
    outcome_score,
    select_final_model,
)
from .ngram import DEFAULT_JUDGE_COUNT, WeakJudgePanel, build_panel
from .strategies import SelectionState, StrategyKind

TARGET_DELTAS = (0.0, 0.01, 0.025, 0.05)
TARGET_LEVELS = (0.80, 0.90, 0.95, 1.00)

_LEVEL_SLACK = 1e-12

BestFn = Callable[[Sequence[str]], tuple[str, dict[str, float]]]
JudgmentSource = Callable[[str], JudgmentVector]


@dataclass(frozen=True)
class RealizationTrajectory:
    """One seeded strategy run and everything needed to score it."""

    seed: tuple[int, ...]
    strategy: StrategyKind
    pool_ids: tuple[str, ...]
    annotation_order: tuple[str, ...]
    chosen: tuple[str, ...]
    true_best: str
    pool_win_rates: dict[str, float]
    final_posterior: dict[str, float]

    def gap_at(self, budget: int) -> float:
        """True-best minus chosen win rate on the full pool, at a budget."""
        rates = self.pool_win_rates
        return rates[self.true_best] - rates[self.chosen[budget - 1]]


def replay_judgment_source(dataset: Dataset) -> JudgmentSource:
    """Judgments read back from the dataset's stored oracle outcomes."""

    def source(query_id: str) -> JudgmentVector:
        vec = dataset.oracle.get(query_id) if dataset.oracle else None
        if vec is None:
            raise ValueError(f"missing oracle judgments for query {query_id!r}")
        return vec

    return source


def pool_oracle_win_rates(
    dataset: Dataset, pool_ids: Sequence[str]
) -> dict[str, float]:
    """Full-pool win rate per model under the stored oracle judgments."""
    rates: dict[str, float] = {}
    for mid in dataset.model_ids:
        total = 0.0
        for qid in pool_ids:
            vec = dataset.oracle.get(qid) if dataset.oracle else None
            if vec is None:
                raise ValueError(f"missing oracle judgments for query {qid!r}")
            total += outcome_score(vec.outcomes[mid])
        rates[mid] = total / len(pool_ids)
    return rates


def best_by_rate(
    rates: Mapping[str, float], model_ids: Sequence[str]
) -> str:
    """Highest-rate model; rate ties go to the smaller model index."""
    best = model_ids[0]
    for mid in model_ids[1:]:
        if rates[mid] > rates[best]:
            best = mid
    return best


def oracle_best_fn(dataset: Dataset) -> BestFn:
    def best(pool_ids: Sequence[str]) -> tuple[str, dict[str, float]]:
        rates = pool_oracle_win_rates(dataset, pool_ids)
        return best_by_rate(rates, dataset.model_ids), rates

    return best


def sample_pool(
    dataset: Dataset, n_pool: int, pool_ss: np.random.SeedSequence
) -> tuple[str, ...]:
    """Uniform sample of query ids without replacement, in sampled order."""
    if n_pool > dataset.n:
        raise ValueError("pool size exceeds dataset")
    if n_pool < 1:
        raise ValueError("pool must be nonempty")
    rng = np.random.default_rng(pool_ss)
    idx = rng.choice(dataset.n, size=n_pool, replace=False)
    ids = dataset.query_ids()
    return tuple(ids[i] for i in idx)


def run_realization(
    dataset: Dataset,
    panel: WeakJudgePanel,
    params: NoiseParams,
    strategy: StrategyKind,
    n_pool: int,
    budget: int,
    seed: int | Sequence[int],
    judgment_source: JudgmentSource | None = None,
    best_fn: BestFn | None = None,
) -> RealizationTrajectory:
    """Sample a pool, run the strategy for ``budget`` steps, score each step.

    The seed splits into a pool stream and a strategy stream; only the pool
    stream drives sampling, so any two strategies run with the same seed see
    the same pool.  ``judgment_source`` defaults to the stored oracle and
    ``best_fn`` to the oracle pool win-rate argmax; both can be swapped for
    oracle-free operation.
    """
    if budget > n_pool:
        raise ValueError("budget exceeds pool")
    if budget < 1:
        raise ValueError("budget must be positive")
    ss = np.random.SeedSequence(seed)
    pool_ss, strategy_ss = ss.spawn(2)
    pool_ids = sample_pool(dataset, n_pool, pool_ss)
    if judgment_source is None:
        judgment_source = replay_judgment_source(dataset)
    if best_fn is None:
        best_fn = oracle_best_fn(dataset)
    true_best, rates = best_fn(pool_ids)
    state = SelectionState(
        dataset=dataset,
        panel=panel,
        params=params,
        strategy=strategy,
        pool_ids=pool_ids,
        rng=np.random.default_rng(strategy_ss),
    )
    chosen: list[str] = []
    for _ in range(budget):
        query_id = state.propose()
        state.apply(judgment_source(query_id))
        chosen.append(select_final_model(state.annotations, state.posterior))
    probs = state.posterior.probs()
    return RealizationTrajectory(
        seed=_entropy_tuple(ss),
        strategy=strategy,
        pool_ids=pool_ids,
        annotation_order=tuple(v.query_id for v in state.annotations),
        chosen=tuple(chosen),
        true_best=true_best,
        pool_win_rates=rates,
        final_posterior={
            mid: float(p) for mid, p in zip(dataset.model_ids, probs)
        },
    )


def _entropy_tuple(ss: np.random.SeedSequence) -> tuple[int, ...]:
    entropy = ss.entropy
    if isinstance(entropy, (list, tuple)):
        return tuple(int(e) for e in entropy)
    return (int(entropy),)


def identification_probability(
    trajectories: Sequence[RealizationTrajectory], budget: int
) -> float:
    """Fraction of realizations whose chosen model at ``budget`` is the
    pool's true best."""
    if not trajectories:
        raise ValueError("no trajectories")
    hits = sum(1 for t in trajectories if t.chosen[budget - 1] == t.true_best)
    return hits / len(trajectories)


def identification_curve(
    trajectories: Sequence[RealizationTrajectory],
) -> np.ndarray:
    if not trajectories:
        raise ValueError("no trajectories")
    budgets = len(trajectories[0].chosen)
    return np.array(
        [identification_probability(trajectories, b) for b in range(1, budgets + 1)]
    )


def labels_to_target(
    trajectories: Sequence[RealizationTrajectory],
    delta: float,
    level: float,
) -> int | None:
    """Smallest budget at which ``level`` of realizations select a model
    within ``delta`` win rate of the true best; None when never reached.

    delta = 0 accepts exactly the models attaining the best pool rate.
    """
    if not trajectories:
        raise ValueError("no trajectories")
    budgets = len(trajectories[0].chosen)
    threshold = level - _LEVEL_SLACK
    for budget in range(1, budgets + 1):
        hits = sum(
            1 for t in trajectories if t.gap_at(budget) <= delta + _LEVEL_SLACK
        )
        if hits / len(trajectories) >= threshold:
            return budget
    return None


def winrate_gap_percentile(
    trajectories: Sequence[RealizationTrajectory],
    budget: int,
    pct: float = 95.0,
) -> float:
    """Nearest-rank percentile of true-best minus chosen win rate."""
    if not trajectories:
        raise ValueError("no trajectories")
    gaps = sorted(t.gap_at(budget) for t in trajectories)
    rank = math.ceil(pct * len(gaps) / 100.0 - 1e-9)
    return gaps[max(rank, 1) - 1]


def settle_budget(trajectory: RealizationTrajectory) -> int:
    """Smallest budget from which the chosen model stays the true best for
    every later budget; budget + 1 when the final choice is still wrong."""
    budgets = len(trajectory.chosen)
    settled = budgets + 1
    for budget in range(budgets, 0, -1):
        if trajectory.chosen[budget - 1] != trajectory.true_best:
            break
        settled = budget
    return settled


def annotation_efficiency(ours: int, reference: int) -> float:
    """Relative label saving versus a reference count, in [0, 1] when we
    need fewer labels."""
    if reference <= 0:
        raise ValueError("reference label count must be positive")
    return (reference - ours) / reference


@dataclass(frozen=True)
class StrategyMetrics:
    strategy: StrategyKind
    curve: tuple[float, ...]
    labels: dict[tuple[float, float], int | None]
    gap_p95: dict[int, float]
    settle_budgets: tuple[int, ...]

    @property
    def mean_settle_budget(self) -> float:
        return float(np.mean(self.settle_budgets))


@dataclass(frozen=True)
class MetricsReport:
    config: dict
    metrics: dict[str, StrategyMetrics]

    def to_json_dict(self) -> dict:
        strategies = {}
        for name, sm in self.metrics.items():
            labels = {
                _target_key(delta, level): value
                for (delta, level), value in sm.labels.items()
            }
            strategies[name] = {
                "identification_curve": list(sm.curve),
                "labels_to_target": labels,
                "win_rate_gap_p95": {
                    str(budget): gap for budget, gap in sm.gap_p95.items()
                },
                "settle_budgets": list(sm.settle_budgets),
                "mean_settle_budget": sm.mean_settle_budget,
                "final_identification": sm.curve[-1],
            }
        return {"config": self.config, "strategies": strategies}

    def to_json_bytes(self) -> bytes:
        payload = json.dumps(
            self.to_json_dict(), sort_keys=True, separators=(",", ":")
        )
        return (payload + "\n").encode("utf-8")

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_json_bytes())


def _target_key(delta: float, level: float) -> str:
    return f"delta={delta:g},level={level:g}"


@dataclass(frozen=True)
class CampaignResult:
    report: MetricsReport
    trajectories: dict[str, tuple[RealizationTrajectory, ...]]


def run_campaign(
    dataset: Dataset,
    strategies: Sequence[StrategyKind],
    params: NoiseParams,
    n_pool: int,
    budget: int,
    realizations: int,
    master_seed: int,
    z: int = DEFAULT_JUDGE_COUNT,
    panel: WeakJudgePanel | None = None,
    deltas: Sequence[float] = TARGET_DELTAS,
    levels: Sequence[float] = TARGET_LEVELS,
) -> CampaignResult:
    """Run every strategy over the same seeded pools and aggregate metrics.

    Budgets at which tail gaps are reported come from the first strategy's
    reached labels-to-target values (the adaptive strategy when present), so
    gap columns line up across strategies.
    """
    if realizations < 1:
        raise ValueError("need at least one realization")
    if panel is None:
        panel = build_panel(dataset, z)
    all_trajectories: dict[str, tuple[RealizationTrajectory, ...]] = {}
    for strategy in strategies:
        runs = [
            run_realization(
                dataset,
                panel,
                params,
                strategy,
                n_pool,
                budget,
                (master_seed, r),
            )
            for r in range(realizations)
        ]
        all_trajectories[strategy.value] = tuple(runs)
    reference = strategies[0].value
    reference_runs = all_trajectories[reference]
    gap_budgets = sorted(
        {
            b
            for delta in deltas
            for level in levels
            if (b := labels_to_target(reference_runs, delta, level)) is not None
        }
    )
    metrics: dict[str, StrategyMetrics] = {}
    for strategy in strategies:
        runs = all_trajectories[strategy.value]
        curve = identification_curve(runs)
        labels = {
            (delta, level): labels_to_target(runs, delta, level)
            for delta in deltas
            for level in levels
        }
        gap_p95 = {
            b: winrate_gap_percentile(runs, b, 95.0) for b in gap_budgets
        }
        metrics[strategy.value] = StrategyMetrics(
            strategy=strategy,
            curve=tuple(float(v) for v in curve),
            labels=labels,
            gap_p95=gap_p95,
            settle_budgets=tuple(settle_budget(t) for t in runs),
        )
    config = {
        "dataset_hash": dataset.content_hash(),
        "baseline": dataset.baseline_id,
        "model_ids": list(dataset.model_ids),
        "strategies": [s.value for s in strategies],
        "n_pool": n_pool,
        "budget": budget,
        "realizations": realizations,
        "z": panel.z,
        "eps_loss": params.eps_loss,
        "eps_draw": params.eps_draw,
        "master_seed": master_seed,
        "target_deltas": list(deltas),
        "target_levels": list(levels),
    }
    return CampaignResult(
        report=MetricsReport(config=config, metrics=metrics),
        trajectories=all_trajectories,
    )


def write_curve_table(result: CampaignResult, path: str | Path) -> None:
    """Flat per-(strategy, budget) table for external plotting."""
    rows = []
    for name, runs in result.trajectories.items():
        curve = result.report.metrics[name].curve
        for budget in range(1, len(curve) + 1):
            rows.append(
                {
                    "strategy": name,
                    "budget": budget,
                    "identification_probability": curve[budget - 1],
                    "win_rate_gap_p95": winrate_gap_percentile(
                        runs, budget, 95.0
                    ),
                }
            )
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(
            handle,
            fieldnames=[
                "strategy",
                "budget",
                "identification_probability",
                "win_rate_gap_p95",
            ],
        )
        writer.writeheader()
        writer.writerows(rows)
