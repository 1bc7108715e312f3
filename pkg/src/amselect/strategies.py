"""Query acquisition strategies over a shared selection state.

The main strategy greedily annotates the query whose predicted judgment,
averaged over the weak-judge panel, leaves the posterior with the lowest
expected entropy.  The alternatives are a Bradley-Terry variant of the same
greedy rule and four cheaper heuristics.  All strategies consume queries
from the same sampled pool and share the posterior bookkeeping in ``step``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .core import (
    Dataset,
    JudgmentVector,
    NoiseParams,
    outcome_score,
)
from .ngram import WeakJudgePanel
from .posterior import Posterior, init_uniform, shannon_entropy, update

BT_DEFAULT_LAMBDA = 0.1
BT_MAX_ITERATIONS = 500
BT_TOLERANCE = 1e-8

# Objectives within these bands of the optimum count as tied and fall back to
# pool order.  Symmetric query configurations produce mathematically equal
# objectives whose floating-point images differ by a few ulps depending on
# summation order; without the band the winner would be rounding luck.  The
# Bradley-Terry band is wider because refit convergence noise dominates there.
TIE_EPSILON = 1e-12
BT_TIE_EPSILON = 1e-6

_SCORE_BY_CODE = np.array([0.0, 0.5, 1.0])


class StrategyKind(Enum):
    """Acquisition strategies, by their configuration names."""

    LLM_SELECTOR = "llm-selector"
    RANDOM = "random"
    BRADLEY_TERRY = "bradley-terry"
    MOST_DRAWS = "most-draws"
    UNCERTAINTY = "uncertainty"
    CONFIDENCE = "confidence"

    @classmethod
    def from_name(cls, name: str) -> "StrategyKind":
        for kind in cls:
            if kind.value == name:
                return kind
        known = ", ".join(k.value for k in cls)
        raise ValueError(f"unknown strategy {name!r} (known: {known})")


OracleFn = Callable[[str], JudgmentVector]


class SelectionState:
    """Mutable run state: pool, annotations, posterior, and per-pool caches.

    The pool keeps its sampled order; ties between equally scored queries are
    always resolved in favor of the earlier pool position.
    """

    def __init__(
        self,
        dataset: Dataset,
        panel: WeakJudgePanel,
        params: NoiseParams,
        strategy: StrategyKind,
        pool_ids: Sequence[str],
        rng: np.random.Generator,
    ):
        if not pool_ids:
            raise ValueError("pool must be nonempty")
        if len(set(pool_ids)) != len(pool_ids):
            raise ValueError("pool contains duplicate query ids")
        if tuple(panel.model_ids) != tuple(dataset.model_ids):
            raise ValueError("panel and dataset disagree on the model list")
        self.dataset = dataset
        self.panel = panel
        self.params = params
        self.strategy = strategy
        self.pool_ids: tuple[str, ...] = tuple(pool_ids)
        self.rng = rng
        self.posterior: Posterior = init_uniform(dataset.model_ids)
        self.annotations: list[JudgmentVector] = []
        self.t = 0
        self._remaining: list[str] = list(self.pool_ids)
        self._log_factors = params.log_factor_array()
        self._baseline_idx = dataset.model_ids.index(dataset.baseline_id)
        # Judge decisions for the pool, in pool order: (n_pool, m, z).
        self._pool_codes = np.stack(
            [panel.decision_codes(qid) for qid in self.pool_ids]
        )
        self._pool_pos = {qid: i for i, qid in enumerate(self.pool_ids)}
        self._bt_warm: np.ndarray | None = None
        # Static per-query scores for the non-adaptive strategies.
        self._pi_entropy_cache: dict[str, float] = {}
        self._draws_cache: dict[str, int] = {}

    @property
    def remaining(self) -> tuple[str, ...]:
        """Unannotated pool queries, still in pool order."""
        return tuple(self._remaining)

    def _remaining_codes(self) -> np.ndarray:
        idx = [self._pool_pos[qid] for qid in self._remaining]
        return self._pool_codes[idx]

    def propose(self) -> str:
        """Pick the next query per the configured strategy (no mutation of
        the annotation record; the random strategy consumes RNG state)."""
        return _SELECTORS[self.strategy](self)

    def apply(self, vec: JudgmentVector) -> None:
        """Record one judgment vector and fold it into the posterior."""
        if vec.query_id not in self._pool_pos:
            raise ValueError(f"query {vec.query_id!r} is not in the pool")
        if vec.query_id not in self._remaining:
            raise ValueError(f"query {vec.query_id!r} was already annotated")
        self.posterior = update(self.posterior, vec, self.params)
        self.annotations.append(vec)
        self._remaining.remove(vec.query_id)
        self.t += 1


def step(state: SelectionState, oracle: OracleFn) -> SelectionState:
    """Run one annotation round: select, judge, record."""
    query_id = state.propose()
    state.apply(oracle(query_id))
    return state


def _require_pool(state: SelectionState) -> list[str]:
    if not state._remaining:
        raise ValueError("budget exceeds pool")
    return state._remaining


def _hypothetical_entropies(state: SelectionState) -> np.ndarray:
    """Mean posterior entropy after each judge's predicted outcome, per
    remaining query: shape (u,)."""
    codes = state._remaining_codes()  # (u, m, z)
    lw = state.posterior.log_weights
    shifted = lw[None, :, None] + state._log_factors[codes]
    peak = shifted.max(axis=1, keepdims=True)
    log_norm = peak + np.log(np.exp(shifted - peak).sum(axis=1, keepdims=True))
    probs = np.exp(shifted - log_norm)
    with np.errstate(invalid="ignore"):
        contrib = np.where(probs > 0.0, probs * shifted, 0.0)
    entropies = log_norm[:, 0, :] - contrib.sum(axis=1)  # (u, z)
    return entropies.mean(axis=1)


def _first_minimizer(values: np.ndarray, epsilon: float) -> int:
    """Index of the earliest entry within epsilon of the minimum."""
    return int(np.flatnonzero(values <= values.min() + epsilon)[0])


def select_next_llm_selector(state: SelectionState) -> str:
    """Query minimizing the expected posterior entropy under the panel."""
    remaining = _require_pool(state)
    objective = _hypothetical_entropies(state)
    return remaining[_first_minimizer(objective, TIE_EPSILON)]


def select_next_random(state: SelectionState) -> str:
    """Uniform draw from the unannotated pool, consuming RNG state."""
    remaining = _require_pool(state)
    return remaining[int(state.rng.integers(len(remaining)))]


@dataclass(frozen=True)
class BTFit:
    """Bradley-Terry strengths normalized to sum to one."""

    model_ids: tuple[str, ...]
    strengths: np.ndarray
    iterations: int
    converged: bool

    def strength(self, model_id: str) -> float:
        return float(self.strengths[self.model_ids.index(model_id)])


def _bt_counts(
    annotations: Sequence[JudgmentVector],
    model_ids: Sequence[str],
    baseline_idx: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-model (wins, games) against the baseline; draws count half each."""
    m = len(model_ids)
    wins = np.zeros(m)
    games = np.zeros(m)
    for vec in annotations:
        for i, mid in enumerate(model_ids):
            if i == baseline_idx:
                continue
            wins[i] += outcome_score(vec.outcomes[mid])
            games[i] += 1.0
    return wins, games


def _bt_mm_batch(
    wins: np.ndarray,
    games: np.ndarray,
    baseline_idx: int,
    lam: float,
    init: np.ndarray | None = None,
) -> tuple[np.ndarray, int, bool]:
    """Minorization-maximization solve of the star-shaped comparison graph,
    batched over independent count matrices (rows of ``wins``/``games``).

    Each model additionally plays lam pseudo-wins and lam pseudo-losses
    against a shared virtual opponent whose strength is fitted alongside the
    models.  The extra edges connect the graph and regularize one-sided
    records; the virtual strength is dropped before normalizing.  Iteration
    stops once every row has converged.
    """
    h, m = wins.shape
    cand = np.flatnonzero(np.arange(m) != baseline_idx)
    gcand = games[:, cand]
    total_wins = np.empty((h, m + 1))
    total_wins[:, :m] = wins + lam
    total_wins[:, baseline_idx] = (gcand - wins[:, cand]).sum(axis=1) + lam
    total_wins[:, m] = m * lam
    if init is None:
        gamma = np.full((h, m + 1), 1.0 / (m + 1))
    else:
        gamma = np.empty((h, m + 1))
        gamma[:, :m] = init
        gamma[:, m] = 1.0 / m
        gamma /= gamma.sum(axis=1, keepdims=True)
    two_lam = 2.0 * lam
    denom = np.empty((h, m + 1))
    virt_q = np.empty((h, m))
    nxt = np.empty((h, m + 1))
    step_buf = np.empty((h, m + 1))
    floor_buf = np.empty((h, m + 1))
    for iteration in range(1, BT_MAX_ITERATIONS + 1):
        base = gamma[:, baseline_idx, None]
        virt = gamma[:, m, None]
        # 2*lam/(gamma + virt) feeds both the per-model denominators and the
        # virtual opponent's own.
        np.add(gamma[:, :m], virt, out=virt_q)
        np.divide(two_lam, virt_q, out=virt_q)
        denom[:, :m] = virt_q
        denom[:, m] = virt_q.sum(axis=1)
        ratio = gcand / (gamma[:, cand] + base)
        denom[:, cand] += ratio
        denom[:, baseline_idx] += ratio.sum(axis=1)
        np.divide(total_wins, denom, out=nxt)
        nxt /= nxt.sum(axis=1, keepdims=True)
        np.subtract(nxt, gamma, out=step_buf)
        np.abs(step_buf, out=step_buf)
        np.maximum(gamma, 1e-300, out=floor_buf)
        step_buf /= floor_buf
        shift = step_buf.max()
        gamma, nxt = nxt, gamma
        if shift < BT_TOLERANCE:
            break
    strengths = gamma[:, :m] / gamma[:, :m].sum(axis=1, keepdims=True)
    return strengths, iteration, shift < BT_TOLERANCE


def _fit_bt_from_counts(
    wins: np.ndarray,
    games: np.ndarray,
    baseline_idx: int,
    lam: float,
    init: np.ndarray | None = None,
) -> tuple[np.ndarray, int, bool]:
    strengths, iterations, converged = _bt_mm_batch(
        wins[None, :],
        games[None, :],
        baseline_idx,
        lam,
        None if init is None else init[None, :],
    )
    return strengths[0], iterations, converged


def fit_bradley_terry(
    annotations: Sequence[JudgmentVector],
    model_ids: Sequence[str],
    baseline_id: str,
    lam: float = BT_DEFAULT_LAMBDA,
    init: np.ndarray | None = None,
) -> BTFit:
    """Fit Bradley-Terry strengths to baseline-relative judgments.

    An empty annotation set yields the uniform fit.
    """
    ids = tuple(model_ids)
    baseline_idx = ids.index(baseline_id)
    wins, games = _bt_counts(annotations, ids, baseline_idx)
    strengths, iterations, converged = _fit_bt_from_counts(
        wins, games, baseline_idx, lam, init
    )
    return BTFit(ids, strengths, iterations, converged)


def select_next_bradley_terry(state: SelectionState) -> str:
    """Greedy entropy rule with Bradley-Terry strengths as the belief.

    For every remaining query and judge, the fit is redone with that judge's
    predicted vector appended; the query minimizing the mean entropy of the
    refit strengths wins.  Identical predicted columns share one refit, and
    all distinct refits run as a single warm-started batch.
    """
    remaining = _require_pool(state)
    ids = state.dataset.model_ids
    baseline_idx = state._baseline_idx
    lam = BT_DEFAULT_LAMBDA
    wins, games = _bt_counts(state.annotations, ids, baseline_idx)
    codes = state._remaining_codes()  # (u, m, z)
    u, m, z = codes.shape
    columns = codes.transpose(0, 2, 1).reshape(u * z, m)
    distinct, inverse = np.unique(columns, axis=0, return_inverse=True)
    # Row 0 refits the actual counts (next step's warm start); the rest append
    # one distinct predicted column each.
    batch_wins = np.empty((len(distinct) + 1, m))
    batch_games = np.empty_like(batch_wins)
    batch_wins[0] = wins
    batch_games[0] = games
    batch_wins[1:] = wins + _SCORE_BY_CODE[distinct]
    batch_games[1:] = games + 1.0
    batch_wins[1:, baseline_idx] = wins[baseline_idx]
    batch_games[1:, baseline_idx] = games[baseline_idx]
    init = None
    if state._bt_warm is not None:
        init = np.broadcast_to(state._bt_warm, batch_wins.shape)
    strengths, _, _ = _bt_mm_batch(batch_wins, batch_games, baseline_idx, lam, init)
    state._bt_warm = strengths[0]
    entropies = np.array([shannon_entropy(row) for row in strengths[1:]])
    objective = entropies[inverse].reshape(u, z).mean(axis=1)
    return remaining[_first_minimizer(objective, BT_TIE_EPSILON)]


def outcome_distribution(
    panel: WeakJudgePanel, query_id: str
) -> tuple[float, float, float]:
    """Panel-estimated (win, loss, draw) fractions over the m-1 candidates.

    Uses each judge's raw decisions, not the thresholded ensemble, averaged
    over judges and candidates.
    """
    codes = panel.decision_codes(query_id)
    baseline_idx = panel.model_ids.index(panel.baseline_id)
    mask = np.arange(len(panel.model_ids)) != baseline_idx
    cand = codes[mask]
    denom = cand.size
    win = float((cand == 2).sum() / denom)
    loss = float((cand == 0).sum() / denom)
    draw = float((cand == 1).sum() / denom)
    return win, loss, draw


def _pi_entropy(panel: WeakJudgePanel, query_id: str) -> float:
    return shannon_entropy(outcome_distribution(panel, query_id))


def _cached_pi_entropy(state: SelectionState, query_id: str) -> float:
    value = state._pi_entropy_cache.get(query_id)
    if value is None:
        value = _pi_entropy(state.panel, query_id)
        state._pi_entropy_cache[query_id] = value
    return value


def select_next_uncertainty(state: SelectionState) -> str:
    """Query with the highest entropy of its predicted outcome distribution."""
    remaining = _require_pool(state)
    values = np.array([_cached_pi_entropy(state, qid) for qid in remaining])
    return remaining[_first_minimizer(-values, TIE_EPSILON)]


def select_next_confidence(state: SelectionState) -> str:
    """Query with the lowest entropy of its predicted outcome distribution."""
    remaining = _require_pool(state)
    values = np.array([_cached_pi_entropy(state, qid) for qid in remaining])
    return remaining[_first_minimizer(values, TIE_EPSILON)]


def select_next_most_draws(state: SelectionState) -> str:
    """Query on which the thresholded ensemble calls the most draws."""
    remaining = _require_pool(state)
    baseline_idx = state._baseline_idx
    best_query, best = remaining[0], -1
    for qid in remaining:
        draws = state._draws_cache.get(qid)
        if draws is None:
            scores = state.panel.ensemble_scores(qid)
            draws = sum(
                1 for i, s in enumerate(scores) if i != baseline_idx and s == 0.5
            )
            state._draws_cache[qid] = draws
        if draws > best:
            best_query, best = qid, draws
    return best_query


_SELECTORS: dict[StrategyKind, Callable[[SelectionState], str]] = {
    StrategyKind.LLM_SELECTOR: select_next_llm_selector,
    StrategyKind.RANDOM: select_next_random,
    StrategyKind.BRADLEY_TERRY: select_next_bradley_terry,
    StrategyKind.MOST_DRAWS: select_next_most_draws,
    StrategyKind.UNCERTAINTY: select_next_uncertainty,
    StrategyKind.CONFIDENCE: select_next_confidence,
}
