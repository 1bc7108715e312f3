"""Log-domain categorical belief over which candidate model is best.

The posterior starts uniform and is multiplied, per judgment, by the noise
model's likelihood factor for each model's observed outcome.  All arithmetic
stays in log space; normalization uses log-sum-exp so long annotation
sequences cannot underflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .core import OUTCOME_CODES, JudgmentVector, NoiseParams

if TYPE_CHECKING:
    from .ngram import WeakJudgePanel


def _normalize_log(log_weights: np.ndarray) -> np.ndarray:
    peak = np.max(log_weights)
    if not np.isfinite(peak):
        raise ValueError("posterior weights are all zero")
    return log_weights - (peak + np.log(np.sum(np.exp(log_weights - peak))))


def shannon_entropy(probs: Sequence[float] | np.ndarray) -> float:
    """Entropy in nats of a probability vector; 0 * log 0 is taken as 0."""
    p = np.asarray(probs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, -p * np.log(p), 0.0)
    return float(np.sum(terms))


@dataclass(frozen=True)
class Posterior:
    """Normalized belief vector, stored as log weights aligned to model_ids."""

    model_ids: tuple[str, ...]
    log_weights: np.ndarray

    def probs(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def prob(self, model_id: str) -> float:
        return float(np.exp(self.log_weights[self.model_ids.index(model_id)]))

    def entropy(self) -> float:
        with np.errstate(invalid="ignore"):
            p = np.exp(self.log_weights)
            terms = np.where(p > 0.0, -p * self.log_weights, 0.0)
        return float(np.sum(terms))

    @classmethod
    def from_probs(
        cls, model_ids: Sequence[str], probs: Sequence[float]
    ) -> "Posterior":
        p = np.asarray(probs, dtype=float)
        if p.shape != (len(model_ids),):
            raise ValueError("probs must align with model_ids")
        if np.any(p < 0.0) or p.sum() <= 0.0:
            raise ValueError("probs must be nonnegative with positive mass")
        with np.errstate(divide="ignore"):
            lw = np.log(p / p.sum())
        return cls(tuple(model_ids), lw)


def init_uniform(model_ids: Sequence[str]) -> Posterior:
    """Uniform belief 1/m over a nonempty model list."""
    if not model_ids:
        raise ValueError("no models")
    m = len(model_ids)
    return Posterior(tuple(model_ids), np.full(m, -np.log(m)))


def update(
    posterior: Posterior, vector: JudgmentVector, params: NoiseParams
) -> Posterior:
    """Multiply in the likelihood of one judgment vector and renormalize."""
    factors = params.log_factor_array()
    codes = np.empty(len(posterior.model_ids), dtype=int)
    for i, mid in enumerate(posterior.model_ids):
        outcome = vector.outcomes.get(mid)
        if outcome is None:
            raise ValueError(
                f"judgment for query {vector.query_id!r} is missing model {mid!r}"
            )
        codes[i] = OUTCOME_CODES[outcome]
    return Posterior(
        posterior.model_ids, _normalize_log(posterior.log_weights + factors[codes])
    )


def hypothetical_update(
    posterior: Posterior,
    panel: "WeakJudgePanel",
    query_id: str,
    judge_k: int,
    params: NoiseParams,
) -> Posterior:
    """Posterior after judge k's predicted outcomes for one query.

    Pure: the input posterior is left untouched.
    """
    codes = panel.decision_codes(query_id)[:, judge_k - 1]
    if tuple(panel.model_ids) != posterior.model_ids:
        raise ValueError("panel and posterior disagree on the model list")
    factors = params.log_factor_array()
    return Posterior(
        posterior.model_ids, _normalize_log(posterior.log_weights + factors[codes])
    )
