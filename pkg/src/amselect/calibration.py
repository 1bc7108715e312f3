"""Oracle-free tuning of the judgment-noise parameters.

The weak-judge ensemble stands in for the oracle: every grid point
(eps_loss, eps_draw) is scored by how often the selection loop, fed only
ensemble judgments, recovers the model the ensemble itself ranks best.
Nothing here may read stored oracle judgments; calibration has to be
runnable before a single label has been collected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .core import Dataset, JudgmentVector, NoiseParams, Outcome, outcome_score
from .ngram import (
    DEFAULT_JUDGE_COUNT,
    WeakJudgePanel,
    build_panel,
    compare_likelihoods,
    ensemble_score_from_nu,
    response_likelihoods,
)
from .simulator import (
    best_by_rate,
    identification_curve,
    run_realization,
)
from .strategies import StrategyKind

GRID_SUM_LIMIT = 0.95
_SUM_SLACK = 1e-9

_SCORE_TO_OUTCOME = {1.0: Outcome.WIN, 0.5: Outcome.DRAW, 0.0: Outcome.LOSS}


def default_grid_values() -> tuple[float, ...]:
    return tuple(round(i * 0.05, 2) for i in range(1, 20))


@dataclass(frozen=True)
class GridSpec:
    """Candidate noise probabilities; pairs are kept only when
    eps_loss + eps_draw stays within the sum limit."""

    values: tuple[float, ...] = default_grid_values()
    sum_limit: float = GRID_SUM_LIMIT

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("grid needs at least one value")
        for v in self.values:
            if not 0.0 < v < 1.0:
                raise ValueError(f"grid value {v} outside (0, 1)")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("grid values must be strictly ascending")

    def feasible_points(self) -> tuple[tuple[float, float], ...]:
        points = tuple(
            (loss, draw)
            for loss in self.values
            for draw in self.values
            if loss + draw <= self.sum_limit + _SUM_SLACK
        )
        if not points:
            raise ValueError(
                "infeasible grid: no (eps_loss, eps_draw) pair satisfies "
                f"eps_loss + eps_draw <= {self.sum_limit}"
            )
        return points


def noisy_oracle_vector(panel: WeakJudgePanel, query_id: str) -> JudgmentVector:
    """Ensemble decisions dressed up as a judgment vector."""
    scores = panel.ensemble_scores(query_id)
    outcomes = {
        mid: _SCORE_TO_OUTCOME[float(score)]
        for mid, score in zip(panel.model_ids, scores)
    }
    outcomes[panel.baseline_id] = Outcome.DRAW
    return JudgmentVector(query_id=query_id, outcomes=outcomes)


def noisy_pool_win_rates(
    panel: WeakJudgePanel, pool_ids: Sequence[str]
) -> dict[str, float]:
    rates: dict[str, float] = {}
    for mid in panel.model_ids:
        total = 0.0
        for qid in pool_ids:
            total += panel.ensemble_score(qid, mid)
        rates[mid] = total / len(pool_ids)
    return rates


def noisy_best_model(panel: WeakJudgePanel, pool_ids: Sequence[str]) -> str:
    """Model the ensemble ranks best over the pool; ties to smaller index."""
    if not pool_ids:
        raise ValueError("pool must be nonempty")
    rates = noisy_pool_win_rates(panel, pool_ids)
    return best_by_rate(rates, panel.model_ids)


@dataclass(frozen=True)
class CalibrationResult:
    eps_loss: float
    eps_draw: float
    grid_points: tuple[tuple[float, float], ...]
    curves: tuple[tuple[float, ...], ...]
    realizations: int
    budget: int
    n_pool: int
    seed: int

    def params(self) -> NoiseParams:
        return NoiseParams(eps_loss=self.eps_loss, eps_draw=self.eps_draw)

    def to_json_dict(self) -> dict:
        return {
            "eps_loss": self.eps_loss,
            "eps_draw": self.eps_draw,
            "grid": [
                {
                    "eps_loss": loss,
                    "eps_draw": draw,
                    "identification_curve": list(curve),
                }
                for (loss, draw), curve in zip(self.grid_points, self.curves)
            ],
            "realizations": self.realizations,
            "budget": self.budget,
            "n_pool": self.n_pool,
            "seed": self.seed,
        }

    def to_json_bytes(self) -> bytes:
        payload = json.dumps(
            self.to_json_dict(), sort_keys=True, separators=(",", ":")
        )
        return (payload + "\n").encode("utf-8")

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_json_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "CalibrationResult":
        raw = json.loads(Path(path).read_text())
        return cls(
            eps_loss=raw["eps_loss"],
            eps_draw=raw["eps_draw"],
            grid_points=tuple(
                (entry["eps_loss"], entry["eps_draw"]) for entry in raw["grid"]
            ),
            curves=tuple(
                tuple(entry["identification_curve"]) for entry in raw["grid"]
            ),
            realizations=raw["realizations"],
            budget=raw["budget"],
            n_pool=raw["n_pool"],
            seed=raw["seed"],
        )


def calibrate(
    dataset: Dataset,
    budget: int,
    realizations: int,
    seed: int,
    grid: GridSpec | None = None,
    n_pool: int | None = None,
    z: int = DEFAULT_JUDGE_COUNT,
    panel: WeakJudgePanel | None = None,
    strategy: StrategyKind = StrategyKind.LLM_SELECTOR,
) -> CalibrationResult:
    """Grid-search the noise parameters against the ensemble-as-oracle.

    Each feasible grid point runs ``realizations`` seeded selection loops
    (seeds derived from (seed, grid index, realization index)) and is scored
    by the fraction that finish on the ensemble's best model.  Ties prefer
    the larger area under the identification curve, then the smaller
    (eps_loss, eps_draw) pair.
    """
    if grid is None:
        grid = GridSpec()
    if n_pool is None:
        n_pool = dataset.n
    if budget > n_pool:
        raise ValueError("budget exceeds pool")
    if realizations < 1:
        raise ValueError("need at least one realization")
    if panel is None:
        panel = build_panel(dataset, z)

    def judgment_source(query_id: str) -> JudgmentVector:
        return noisy_oracle_vector(panel, query_id)

    def best_fn(pool_ids: Sequence[str]) -> tuple[str, dict[str, float]]:
        rates = noisy_pool_win_rates(panel, pool_ids)
        return best_by_rate(rates, panel.model_ids), rates

    points = grid.feasible_points()
    curves: list[tuple[float, ...]] = []
    best_index = 0
    best_score: tuple[float, float] | None = None
    for gi, (loss, draw) in enumerate(points):
        params = NoiseParams(eps_loss=loss, eps_draw=draw)
        runs = [
            run_realization(
                dataset,
                panel,
                params,
                strategy,
                n_pool,
                budget,
                (seed, gi, r),
                judgment_source=judgment_source,
                best_fn=best_fn,
            )
            for r in range(realizations)
        ]
        curve = tuple(float(v) for v in identification_curve(runs))
        curves.append(curve)
        score = (curve[-1], sum(curve) / len(curve))
        if best_score is None or score > best_score:
            best_index, best_score = gi, score
    loss, draw = points[best_index]
    return CalibrationResult(
        eps_loss=loss,
        eps_draw=draw,
        grid_points=points,
        curves=tuple(curves),
        realizations=realizations,
        budget=budget,
        n_pool=n_pool,
        seed=seed,
    )


def auto_select_baseline(dataset: Dataset, z: int = DEFAULT_JUDGE_COUNT) -> str:
    """Round-robin under the weak judges: every model is scored by the
    ensemble against every other model, and the highest mean score wins.

    Costs zero oracle labels; likelihoods are shared across pairings since
    the per-query judge corpus does not depend on the baseline choice.
    """
    if dataset.m < 2:
        raise ValueError("need at least 2 models to pick a baseline")
    likelihoods = response_likelihoods(dataset, z)
    m = dataset.m
    totals = [0.0] * m
    games = (m - 1) * dataset.n
    for table in likelihoods.values():
        for i in range(m):
            for j in range(m):
                if i == j:
                    continue
                nu = sum(
                    outcome_score(compare_likelihoods(table[k, i], table[k, j]))
                    for k in range(z)
                ) / z
                totals[i] += ensemble_score_from_nu(nu)
    rates = {
        mid: totals[i] / games for i, mid in enumerate(dataset.model_ids)
    }
    return best_by_rate(rates, dataset.model_ids)
