"""Shared domain types and win-rate arithmetic for pairwise model judgments."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

if TYPE_CHECKING:
    from .posterior import Posterior

# Multi-turn conversations are flattened into a single judged text with this
# separator between turns.
TURN_SEPARATOR = "\n\n[TURN]\n\n"


class Outcome(str, Enum):
    """Result of judging one candidate response against the baseline response."""

    WIN = "win"
    DRAW = "draw"
    LOSS = "loss"


# Stable integer codes shared by array-backed components (panels, posteriors).
OUTCOME_CODES: dict[Outcome, int] = {Outcome.LOSS: 0, Outcome.DRAW: 1, Outcome.WIN: 2}
OUTCOME_FROM_CODE: tuple[Outcome, ...] = (Outcome.LOSS, Outcome.DRAW, Outcome.WIN)

_SCORES: dict[Outcome, float] = {Outcome.WIN: 1.0, Outcome.DRAW: 0.5, Outcome.LOSS: 0.0}


def outcome_score(outcome: Outcome) -> float:
    """Score a judgment: win 1.0, draw 0.5, loss 0.0."""
    return _SCORES[outcome]


def outcome_code(outcome: Outcome) -> int:
    return OUTCOME_CODES[outcome]


def flatten_turns(turns: Iterable[str]) -> str:
    """Join the turns of a multi-turn conversation into one judgable text."""
    return TURN_SEPARATOR.join(turns)


@dataclass(frozen=True)
class Query:
    """One evaluation prompt, identified by a stable id."""

    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("query id must be nonempty")
        if not self.text:
            raise ValueError(f"query {self.id!r}: text must be nonempty")


@dataclass(frozen=True)
class JudgmentVector:
    """Outcomes of judging every candidate against the baseline on one query.

    The baseline's own entry is always Draw.
    """

    query_id: str
    outcomes: Mapping[str, Outcome]

    def score(self, model_id: str) -> float:
        return outcome_score(self.outcomes[model_id])


@dataclass(frozen=True)
class NoiseParams:
    """Two-parameter judgment noise model for the best model's outcomes.

    eps_loss is the probability the best model loses a judgment, eps_draw the
    probability it draws; the win probability is the complement.  Both must be
    strictly inside (0, 1) and sum to strictly less than 1.
    """

    eps_loss: float
    eps_draw: float

    def __post_init__(self) -> None:
        if not (0.0 < self.eps_loss < 1.0):
            raise ValueError(f"eps_loss must be in (0, 1), got {self.eps_loss}")
        if not (0.0 < self.eps_draw < 1.0):
            raise ValueError(f"eps_draw must be in (0, 1), got {self.eps_draw}")
        if self.eps_loss + self.eps_draw >= 1.0:
            raise ValueError(
                f"eps_loss + eps_draw must be < 1, got {self.eps_loss + self.eps_draw}"
            )

    @property
    def eps_win(self) -> float:
        return 1.0 - self.eps_loss - self.eps_draw

    def log_factor(self, outcome: Outcome) -> float:
        return float(self.log_factor_array()[OUTCOME_CODES[outcome]])

    def log_factor_array(self) -> np.ndarray:
        """Log likelihood factors indexed by outcome code (loss, draw, win)."""
        return np.log(np.array([self.eps_loss, self.eps_draw, self.eps_win]))


@dataclass(frozen=True)
class Dataset:
    """Queries, per-model responses, and (optionally) replay oracle judgments.

    The baseline model is a member of ``model_ids``; every query has a
    response for every model.  ``oracle`` maps query ids to full judgment
    vectors when ground-truth replay is available.
    """

    queries: tuple[Query, ...]
    model_ids: tuple[str, ...]
    baseline_id: str
    responses: Mapping[str, Mapping[str, str]]
    oracle: Mapping[str, JudgmentVector] | None = None

    def __post_init__(self) -> None:
        if not self.queries:
            raise ValueError("dataset has no queries")
        if len(self.model_ids) < 2:
            raise ValueError("dataset needs at least two models")
        if len(set(self.model_ids)) != len(self.model_ids):
            raise ValueError("duplicate model ids")
        if self.baseline_id not in self.model_ids:
            raise ValueError(f"baseline {self.baseline_id!r} not among model ids")
        seen: set[str] = set()
        for q in self.queries:
            if q.id in seen:
                raise ValueError(f"duplicate query id {q.id!r}")
            seen.add(q.id)
        model_set = set(self.model_ids)
        for q in self.queries:
            resp = self.responses.get(q.id)
            if resp is None or set(resp) != model_set:
                raise ValueError(f"query {q.id!r}: responses must cover every model")
        if self.oracle is not None:
            for qid, vec in self.oracle.items():
                if qid not in seen:
                    raise ValueError(f"oracle references unknown query {qid!r}")
                if set(vec.outcomes) != model_set:
                    raise ValueError(
                        f"oracle for query {qid!r} must cover every model"
                    )
                if vec.outcomes[self.baseline_id] is not Outcome.DRAW:
                    raise ValueError(
                        f"oracle for query {qid!r}: baseline entry must be draw"
                    )

    @property
    def n(self) -> int:
        return len(self.queries)

    @property
    def m(self) -> int:
        return len(self.model_ids)

    def query_ids(self) -> tuple[str, ...]:
        return tuple(q.id for q in self.queries)

    def query(self, query_id: str) -> Query:
        for q in self.queries:
            if q.id == query_id:
                return q
        raise KeyError(query_id)

    def response(self, query_id: str, model_id: str) -> str:
        return self.responses[query_id][model_id]

    def has_full_oracle(self) -> bool:
        return self.oracle is not None and all(
            q.id in self.oracle for q in self.queries
        )

    def content_hash(self) -> str:
        """Hash of queries, models, and responses (oracle excluded)."""
        payload = {
            "model_ids": list(self.model_ids),
            "baseline_id": self.baseline_id,
            "queries": [[q.id, q.text] for q in self.queries],
            "responses": [
                [q.id, [self.responses[q.id][m] for m in self.model_ids]]
                for q in self.queries
            ],
        }
        blob = json.dumps(payload, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def win_rate(outcomes: Sequence[Outcome]) -> float:
    """Mean judgment score over a sequence of outcomes."""
    if not outcomes:
        raise ValueError("no judgments")
    return sum(outcome_score(o) for o in outcomes) / len(outcomes)


def annotated_win_rates(
    annotations: Sequence[JudgmentVector], model_ids: Sequence[str]
) -> dict[str, float]:
    """Per-model win rate over an annotation set.

    Every vector must carry an outcome for every listed model; the baseline's
    forced draws make its rate exactly 0.5.
    """
    if not annotations:
        raise ValueError("no judgments")
    rates: dict[str, float] = {}
    for mid in model_ids:
        total = 0.0
        for vec in annotations:
            if mid not in vec.outcomes:
                raise ValueError(
                    f"judgment for query {vec.query_id!r} is missing model {mid!r}"
                )
            total += outcome_score(vec.outcomes[mid])
        rates[mid] = total / len(annotations)
    return rates


def select_final_model(
    annotations: Sequence[JudgmentVector], posterior: "Posterior"
) -> str:
    """Model with the highest annotated win rate.

    Ties are broken by higher posterior probability, then by the smaller
    model index in the posterior's model order.
    """
    rates = annotated_win_rates(annotations, posterior.model_ids)
    probs = posterior.probs()
    best_idx = 0
    for idx in range(1, len(posterior.model_ids)):
        cur, best = posterior.model_ids[idx], posterior.model_ids[best_idx]
        if rates[cur] > rates[best]:
            best_idx = idx
        elif rates[cur] == rates[best] and probs[idx] > probs[best_idx]:
            best_idx = idx
    return posterior.model_ids[best_idx]
