"""Shared builders for compact test datasets and hand-written judge panels."""

from __future__ import annotations

from typing import Mapping, Sequence

from amselect.core import Dataset, JudgmentVector, Outcome, Query
from amselect.ngram import WeakJudgePanel

LETTER_OUTCOMES = {"W": Outcome.WIN, "D": Outcome.DRAW, "L": Outcome.LOSS}


def make_dataset(
    responses: Mapping[str, Mapping[str, str]],
    baseline: str,
    model_ids: Sequence[str] | None = None,
    oracle: Mapping[str, Mapping[str, str]] | None = None,
    texts: Mapping[str, str] | None = None,
) -> Dataset:
    """Assemble a Dataset from nested response dicts.

    ``oracle`` maps query ids to per-model outcome letters (W/D/L); the
    baseline entry is filled with a draw when omitted.
    """
    query_ids = list(responses)
    if model_ids is None:
        model_ids = list(responses[query_ids[0]])
    queries = tuple(
        Query(qid, (texts or {}).get(qid, f"prompt {qid}")) for qid in query_ids
    )
    oracle_vectors = None
    if oracle is not None:
        oracle_vectors = {}
        for qid, letters in oracle.items():
            outcomes = {mid: LETTER_OUTCOMES[sym] for mid, sym in letters.items()}
            outcomes.setdefault(baseline, Outcome.DRAW)
            oracle_vectors[qid] = JudgmentVector(qid, outcomes)
    return Dataset(
        queries=queries,
        model_ids=tuple(model_ids),
        baseline_id=baseline,
        responses={qid: dict(responses[qid]) for qid in query_ids},
        oracle=oracle_vectors,
    )


def panel_from_letters(
    model_ids: Sequence[str],
    baseline: str,
    decisions: Mapping[str, Mapping[str, str]],
) -> WeakJudgePanel:
    """Build a panel from strings of judge letters, e.g. {"q1": {"a": "WWD"}}.

    Each string has one letter per judge; all models must use the same length.
    """
    first = next(iter(decisions.values()))
    z = len(next(iter(first.values())))
    typed = {
        qid: {
            mid: [LETTER_OUTCOMES[ch] for ch in word] for mid, word in row.items()
        }
        for qid, row in decisions.items()
    }
    return WeakJudgePanel.from_decisions(model_ids, baseline, z, typed)


def vector(query_id: str, letters: Mapping[str, str]) -> JudgmentVector:
    return JudgmentVector(
        query_id, {mid: LETTER_OUTCOMES[sym] for mid, sym in letters.items()}
    )
