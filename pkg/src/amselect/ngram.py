"""Per-query k-gram language models acting as an ensemble of weak judges.

For each query, a k-gram model is fitted on the tokenized responses of all
models.  A judge of order k prefers the response with the higher average
token likelihood under that model; judges of orders 1..z form the panel.
No smoothing is applied: scoring is only defined for responses that were
part of the fitted corpus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from .core import (
    OUTCOME_CODES,
    OUTCOME_FROM_CODE,
    Dataset,
    JudgmentVector,
    Outcome,
)

if TYPE_CHECKING:
    pass

DEFAULT_JUDGE_COUNT = 10

# Two average likelihoods within this distance count as a draw.
LIKELIHOOD_TOLERANCE = 1e-12

_SCORE_BY_CODE = np.array([0.0, 0.5, 1.0])
_CHAR_BY_CODE = "LDW"
_CODE_BY_CHAR = {c: i for i, c in enumerate(_CHAR_BY_CODE)}

PANEL_CACHE_FORMAT = "amselect-panel-v1"


def tokenize(text: str) -> tuple[str, ...]:
    """Split on whitespace runs; tokens are kept verbatim, no normalization."""
    return tuple(text.split())


@dataclass(frozen=True)
class KGramModel:
    """Count-based k-gram model with truncated contexts at sequence starts.

    Position l of a sequence conditions on the previous min(k-1, l-1) tokens,
    so the first token is always scored by its corpus-wide unigram frequency.
    """

    k: int
    context_counts: Mapping[tuple[str, ...], int]
    continuation_counts: Mapping[tuple[str, ...], int]

    def probability(self, context: tuple[str, ...], token: str) -> float:
        hits = self.continuation_counts.get(context + (token,), 0)
        if hits == 0:
            raise ValueError("response not in fitted corpus")
        return hits / self.context_counts[context]


def fit_kgram(token_sequences: Iterable[Sequence[str]], k: int) -> KGramModel:
    """Fit a k-gram model on a corpus of token sequences.

    Counts are accumulated for every context length up to k-1 so that
    truncated contexts near sequence starts see full corpus statistics.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    context_counts: dict[tuple[str, ...], int] = {}
    continuation_counts: dict[tuple[str, ...], int] = {}
    for seq in token_sequences:
        toks = tuple(seq)
        for i, tok in enumerate(toks):
            for width in range(min(k - 1, i) + 1):
                ctx = toks[i - width : i]
                context_counts[ctx] = context_counts.get(ctx, 0) + 1
                gram = ctx + (tok,)
                continuation_counts[gram] = continuation_counts.get(gram, 0) + 1
    return KGramModel(k, context_counts, continuation_counts)


def avg_likelihood(model: KGramModel, tokens: Sequence[str]) -> float:
    """Mean conditional token probability of a response; empty responses score 0."""
    toks = tuple(tokens)
    if not toks:
        return 0.0
    k = model.k
    total = 0.0
    for i, tok in enumerate(toks):
        ctx = toks[max(0, i - (k - 1)) : i]
        total += model.probability(ctx, tok)
    return total / len(toks)


def compare_likelihoods(candidate: float, baseline: float) -> Outcome:
    if abs(candidate - baseline) <= LIKELIHOOD_TOLERANCE:
        return Outcome.DRAW
    return Outcome.WIN if candidate > baseline else Outcome.LOSS


def weak_judge_compare(
    dataset: Dataset, query_id: str, model_id: str, k: int
) -> Outcome:
    """Judge one candidate against the baseline with a fresh order-k model."""
    seqs = [
        tokenize(dataset.response(query_id, mid)) for mid in dataset.model_ids
    ]
    model = fit_kgram(seqs, k)
    by_id = dict(zip(dataset.model_ids, seqs))
    cand = avg_likelihood(model, by_id[model_id])
    base = avg_likelihood(model, by_id[dataset.baseline_id])
    return compare_likelihoods(cand, base)


def response_likelihoods(dataset: Dataset, z: int) -> dict[str, np.ndarray]:
    """Average likelihood of every model's response under each judge order.

    Returns, per query id, an array of shape (z, m) aligned to
    ``dataset.model_ids``.
    """
    if z < 1:
        raise ValueError(f"z must be >= 1, got {z}")
    table: dict[str, np.ndarray] = {}
    for q in dataset.queries:
        seqs = [tokenize(dataset.response(q.id, mid)) for mid in dataset.model_ids]
        liks = np.empty((z, len(seqs)))
        for k in range(1, z + 1):
            model = fit_kgram(seqs, k)
            liks[k - 1] = [avg_likelihood(model, s) for s in seqs]
        table[q.id] = liks
    return table


def ensemble_score_from_nu(nu: float) -> float:
    """Threshold the panel's mean judgment score into a win/draw/loss score."""
    if nu >= 2.0 / 3.0:
        return 1.0
    if nu >= 1.0 / 3.0:
        return 0.5
    return 0.0


@dataclass(frozen=True)
class WeakJudgePanel:
    """Cached decisions of all z judges for every (query, model) pair."""

    model_ids: tuple[str, ...]
    baseline_id: str
    z: int
    query_ids: tuple[str, ...]
    codes: np.ndarray  # shape (n_queries, m, z), outcome codes
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        expected = (len(self.query_ids), len(self.model_ids), self.z)
        if self.codes.shape != expected:
            raise ValueError(
                f"panel codes shape {self.codes.shape} != expected {expected}"
            )
        object.__setattr__(
            self, "_index", {qid: i for i, qid in enumerate(self.query_ids)}
        )

    def _row(self, query_id: str) -> int:
        try:
            return self._index[query_id]
        except KeyError:
            raise ValueError(f"no panel decisions for query {query_id!r}") from None

    def decision_codes(self, query_id: str) -> np.ndarray:
        """Outcome codes for one query, shape (m, z)."""
        return self.codes[self._row(query_id)]

    def decision(self, query_id: str, model_id: str, judge_k: int) -> Outcome:
        mi = self.model_ids.index(model_id)
        return OUTCOME_FROM_CODE[self.codes[self._row(query_id), mi, judge_k - 1]]

    def judge_vector(self, query_id: str, judge_k: int) -> JudgmentVector:
        """Judge k's predicted outcomes for every model on one query."""
        row = self.codes[self._row(query_id), :, judge_k - 1]
        return JudgmentVector(
            query_id,
            {mid: OUTCOME_FROM_CODE[c] for mid, c in zip(self.model_ids, row)},
        )

    def ensemble_nu(self, query_id: str, model_id: str) -> float:
        mi = self.model_ids.index(model_id)
        scores = _SCORE_BY_CODE[self.codes[self._row(query_id), mi]]
        return float(scores.sum() / self.z)

    def ensemble_score(self, query_id: str, model_id: str) -> float:
        return ensemble_score_from_nu(self.ensemble_nu(query_id, model_id))

    def ensemble_scores(self, query_id: str) -> np.ndarray:
        """Thresholded ensemble score per model for one query."""
        nus = _SCORE_BY_CODE[self.codes[self._row(query_id)]].sum(axis=1) / self.z
        return np.array([ensemble_score_from_nu(float(nu)) for nu in nus])

    @classmethod
    def from_decisions(
        cls,
        model_ids: Sequence[str],
        baseline_id: str,
        z: int,
        decisions: Mapping[str, Mapping[str, Sequence[Outcome]]],
    ) -> "WeakJudgePanel":
        """Build a panel directly from per-judge decisions (used by tests)."""
        query_ids = tuple(decisions)
        codes = np.empty((len(query_ids), len(model_ids), z), dtype=np.int8)
        for qi, qid in enumerate(query_ids):
            for mi, mid in enumerate(model_ids):
                row = decisions[qid][mid]
                if len(row) != z:
                    raise ValueError(
                        f"query {qid!r} model {mid!r}: expected {z} decisions"
                    )
                codes[qi, mi] = [OUTCOME_CODES[o] for o in row]
        return cls(tuple(model_ids), baseline_id, z, query_ids, codes)

    def save(self, path: str | Path, dataset_hash: str) -> None:
        decisions = {
            qid: {
                mid: "".join(_CHAR_BY_CODE[c] for c in self.codes[qi, mi])
                for mi, mid in enumerate(self.model_ids)
            }
            for qi, qid in enumerate(self.query_ids)
        }
        payload = {
            "format": PANEL_CACHE_FORMAT,
            "dataset_hash": dataset_hash,
            "z": self.z,
            "model_ids": list(self.model_ids),
            "baseline_id": self.baseline_id,
            "decisions": decisions,
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, dataset_hash: str) -> "WeakJudgePanel":
        """Load a cached panel, rejecting caches built for different content."""
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != PANEL_CACHE_FORMAT:
            raise ValueError(f"{path}: not a panel cache")
        if payload["dataset_hash"] != dataset_hash:
            raise ValueError(f"{path}: stale panel cache (dataset content changed)")
        model_ids = tuple(payload["model_ids"])
        z = int(payload["z"])
        decisions = payload["decisions"]
        query_ids = tuple(decisions)
        codes = np.empty((len(query_ids), len(model_ids), z), dtype=np.int8)
        for qi, qid in enumerate(query_ids):
            for mi, mid in enumerate(model_ids):
                word = decisions[qid][mid]
                codes[qi, mi] = [_CODE_BY_CHAR[ch] for ch in word]
        return cls(model_ids, payload["baseline_id"], z, query_ids, codes)


def build_panel(dataset: Dataset, z: int = DEFAULT_JUDGE_COUNT) -> WeakJudgePanel:
    """Run all z weak judges over every (query, candidate) pair of a dataset."""
    table = response_likelihoods(dataset, z)
    base_idx = dataset.model_ids.index(dataset.baseline_id)
    codes = np.empty((dataset.n, dataset.m, z), dtype=np.int8)
    for qi, qid in enumerate(dataset.query_ids()):
        liks = table[qid]  # (z, m)
        for k in range(z):
            base = liks[k, base_idx]
            for mi in range(dataset.m):
                codes[qi, mi, k] = OUTCOME_CODES[
                    compare_likelihoods(liks[k, mi], base)
                ]
    return WeakJudgePanel(
        dataset.model_ids, dataset.baseline_id, z, dataset.query_ids(), codes
    )
