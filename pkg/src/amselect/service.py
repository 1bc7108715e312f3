"""Live annotation sessions over an HTTP+JSON API.

The server proposes the next most informative query; whoever plays the
oracle (a human behind the browser UI, or any scripted client) submits one
judgment vector per proposal.  Proposals are pinned until answered, and
mutations carry an expected revision so raced submissions fail cleanly
instead of double-counting.

Sessions can persist as append-only JSONL transcripts (creation config
followed by accepted judgment vectors).  Rebuilding a session replays the
transcript through the ordinary selection loop, so a restarted server
reaches exactly the state the crashed one had.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .core import (
    Dataset,
    JudgmentVector,
    NoiseParams,
    Outcome,
    annotated_win_rates,
    select_final_model,
)
from .ngram import DEFAULT_JUDGE_COUNT, WeakJudgePanel, build_panel
from .strategies import SelectionState, StrategyKind

_SYMBOLS = {o.value: o for o in Outcome}

ACTIVE = "active"
EXHAUSTED = "exhausted"
FINALIZED = "finalized"


class CreateSessionBody(BaseModel):
    dataset_id: str
    budget: int
    eps_loss: float
    eps_draw: float
    strategy: str = StrategyKind.LLM_SELECTOR.value
    z: int | None = None  # None -> server default
    seed: int = 0


class JudgmentsBody(BaseModel):
    query_id: str
    outcomes: dict[str, str]
    expected_revision: int


@dataclass
class Session:
    session_id: str
    dataset_id: str
    dataset: Dataset
    state: SelectionState
    budget: int
    strategy: StrategyKind
    params: NoiseParams
    z: int
    seed: int
    status: str = ACTIVE
    revision: int = 0
    pending: str | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def summary(self) -> dict:
        posterior = self.state.posterior
        probs = posterior.probs()
        leader = None
        if self.state.annotations:
            leader = select_final_model(self.state.annotations, posterior)
        return {
            "session_id": self.session_id,
            "dataset_id": self.dataset_id,
            "status": self.status,
            "revision": self.revision,
            "t": self.state.t,
            "budget": self.budget,
            "budget_remaining": self.budget - self.state.t,
            "strategy": self.strategy.value,
            "eps_loss": self.params.eps_loss,
            "eps_draw": self.params.eps_draw,
            "z": self.z,
            "seed": self.seed,
            "posterior": {
                mid: float(p)
                for mid, p in zip(self.dataset.model_ids, probs)
            },
            "entropy": float(posterior.entropy()),
            "leader": leader,
            "pending_query_id": self.pending,
        }

    def proposal_body(self) -> dict:
        qid = self.pending
        query = self.dataset.query(qid)
        candidates = {
            mid: self.dataset.response(qid, mid)
            for mid in self.dataset.model_ids
            if mid != self.dataset.baseline_id
        }
        return {
            "query_id": qid,
            "query_text": query.text,
            "baseline_model": self.dataset.baseline_id,
            "baseline_response": self.dataset.response(
                qid, self.dataset.baseline_id
            ),
            "candidate_responses": candidates,
            "budget_remaining": self.budget - self.state.t,
            "revision": self.revision,
        }


class TranscriptStore:
    """Append-only JSONL transcript per session."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def path(self, session_id: str) -> Path:
        return self.directory / f"{session_id}.jsonl"

    def append(self, session_id: str, record: dict) -> None:
        with self.path(session_id).open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
            handle.flush()

    def load_all(self) -> list[list[dict]]:
        transcripts = []
        for path in sorted(self.directory.glob("*.jsonl")):
            records = [
                json.loads(line)
                for line in path.read_text(encoding="utf-8").splitlines()
                if line.strip()
            ]
            if records:
                transcripts.append(records)
        return transcripts


class SessionRegistry:
    """All live sessions plus the shared dataset/panel caches."""

    def __init__(
        self,
        datasets: Mapping[str, Dataset],
        store: TranscriptStore | None = None,
        default_z: int = DEFAULT_JUDGE_COUNT,
    ):
        self.datasets = dict(datasets)
        self.sessions: dict[str, Session] = {}
        self.store = store
        self.default_z = default_z
        self._panels: dict[tuple[str, int], WeakJudgePanel] = {}
        self._create_lock = threading.Lock()

    def panel(self, dataset_id: str, z: int) -> WeakJudgePanel:
        key = (dataset_id, z)
        if key not in self._panels:
            self._panels[key] = build_panel(self.datasets[dataset_id], z)
        return self._panels[key]

    def create(
        self, body: CreateSessionBody, session_id: str | None = None
    ) -> Session:
        dataset = self.datasets.get(body.dataset_id)
        if dataset is None:
            raise HTTPException(404, f"unknown dataset {body.dataset_id!r}")
        try:
            params = NoiseParams(
                eps_loss=body.eps_loss, eps_draw=body.eps_draw
            )
            strategy = StrategyKind.from_name(body.strategy)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
        z = body.z if body.z is not None else self.default_z
        if z < 1:
            raise HTTPException(422, "z must be at least 1")
        if body.budget < 1:
            raise HTTPException(422, "budget must be at least 1")
        if body.budget > dataset.n:
            raise HTTPException(
                422,
                f"budget {body.budget} exceeds the pool of {dataset.n} queries",
            )
        state = SelectionState(
            dataset=dataset,
            panel=self.panel(body.dataset_id, z),
            params=params,
            strategy=strategy,
            pool_ids=dataset.query_ids(),
            rng=np.random.default_rng(np.random.SeedSequence(body.seed)),
        )
        with self._create_lock:
            session = Session(
                session_id=session_id or uuid.uuid4().hex,
                dataset_id=body.dataset_id,
                dataset=dataset,
                state=state,
                budget=body.budget,
                strategy=strategy,
                params=params,
                z=z,
                seed=body.seed,
            )
            self.sessions[session.session_id] = session
        if self.store and session_id is None:
            self.store.append(
                session.session_id,
                {
                    "type": "create",
                    "session_id": session.session_id,
                    "dataset_id": body.dataset_id,
                    "strategy": body.strategy,
                    "eps_loss": body.eps_loss,
                    "eps_draw": body.eps_draw,
                    "z": z,
                    "budget": body.budget,
                    "seed": body.seed,
                },
            )
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return session

    def restore(self) -> None:
        """Rebuild sessions by replaying stored transcripts.

        Judgments are re-applied through propose+apply so strategy RNG
        streams advance exactly as they did originally.
        """
        if self.store is None:
            return
        for records in self.store.load_all():
            head = records[0]
            if head.get("type") != "create":
                continue
            if head["dataset_id"] not in self.datasets:
                continue
            body = CreateSessionBody(
                dataset_id=head["dataset_id"],
                budget=head["budget"],
                eps_loss=head["eps_loss"],
                eps_draw=head["eps_draw"],
                strategy=head["strategy"],
                z=head["z"],
                seed=head["seed"],
            )
            session = self.create(body, session_id=head["session_id"])
            for rec in records[1:]:
                if rec["type"] == "judgment":
                    session.state.propose()
                    vec = _vector_from_wire(
                        session.dataset, rec["query_id"], rec["outcomes"]
                    )
                    session.state.apply(vec)
                    session.revision += 1
                    if session.state.t >= session.budget:
                        session.status = EXHAUSTED
                elif rec["type"] == "finalize":
                    session.status = FINALIZED
                    session.revision += 1


def _vector_from_wire(
    dataset: Dataset, query_id: str, outcomes: Mapping[str, str]
) -> JudgmentVector:
    """Validate wire outcomes into a full judgment vector (HTTP 422 on
    shape problems).  The baseline entry may be omitted; when present it
    must be a draw."""
    parsed: dict[str, Outcome] = {}
    for mid, symbol in outcomes.items():
        if mid not in dataset.model_ids:
            raise HTTPException(422, f"unknown model {mid!r}")
        outcome = _SYMBOLS.get(symbol)
        if outcome is None:
            raise HTTPException(
                422,
                f"unknown outcome symbol {symbol!r} for model {mid!r} "
                "(expected win, draw, or loss)",
            )
        parsed[mid] = outcome
    baseline = dataset.baseline_id
    if parsed.get(baseline, Outcome.DRAW) is not Outcome.DRAW:
        raise HTTPException(422, "baseline entry must be a draw")
    parsed[baseline] = Outcome.DRAW
    missing = [mid for mid in dataset.model_ids if mid not in parsed]
    if missing:
        raise HTTPException(
            422, f"judgments missing for models {sorted(missing)}"
        )
    return JudgmentVector(query_id=query_id, outcomes=parsed)


def create_app(
    datasets: Mapping[str, Dataset] | Dataset,
    z: int = DEFAULT_JUDGE_COUNT,
    state_dir: str | Path | None = None,
) -> FastAPI:
    """Build the session service around one or more loaded datasets."""
    if isinstance(datasets, Dataset):
        datasets = {"default": datasets}
    store = TranscriptStore(state_dir) if state_dir else None
    registry = SessionRegistry(datasets, store, default_z=z)
    registry.restore()

    app = FastAPI(title="model-selection annotation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.registry = registry

    @app.get("/datasets")
    def list_datasets() -> list[dict]:
        return [
            {
                "id": did,
                "n": ds.n,
                "m": ds.m,
                "baseline": ds.baseline_id,
                "model_ids": list(ds.model_ids),
            }
            for did, ds in registry.datasets.items()
        ]

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody) -> dict:
        session = registry.create(body)
        return {"session_id": session.session_id, "state": session.summary()}

    @app.get("/sessions/{session_id}")
    def get_state(session_id: str) -> dict:
        return registry.get(session_id).summary()

    @app.get("/sessions/{session_id}/next")
    def next_query(session_id: str) -> dict:
        session = registry.get(session_id)
        with session.lock:
            if session.status == FINALIZED:
                raise HTTPException(409, "session is finalized")
            if session.status == EXHAUSTED:
                raise HTTPException(409, "budget exhausted")
            if session.pending is None:
                session.pending = session.state.propose()
            return session.proposal_body()

    @app.post("/sessions/{session_id}/judgments")
    def submit_judgments(session_id: str, body: JudgmentsBody) -> dict:
        session = registry.get(session_id)
        with session.lock:
            if session.status == FINALIZED:
                raise HTTPException(409, "session is finalized")
            if session.status == EXHAUSTED:
                raise HTTPException(409, "budget exhausted")
            if session.pending is None:
                raise HTTPException(
                    409, "no pending proposal; fetch /next first"
                )
            if body.query_id != session.pending:
                raise HTTPException(
                    409,
                    f"judgments are for query {body.query_id!r} but the "
                    f"pending proposal is {session.pending!r}",
                )
            if body.expected_revision != session.revision:
                raise HTTPException(
                    409,
                    f"stale revision {body.expected_revision} "
                    f"(current {session.revision}); refetch state",
                )
            vec = _vector_from_wire(
                session.dataset, body.query_id, body.outcomes
            )
            session.state.apply(vec)
            session.pending = None
            session.revision += 1
            if session.state.t >= session.budget:
                session.status = EXHAUSTED
            if registry.store:
                registry.store.append(
                    session.session_id,
                    {
                        "type": "judgment",
                        "query_id": body.query_id,
                        "outcomes": {
                            mid: vec.outcomes[mid].value
                            for mid in session.dataset.model_ids
                        },
                    },
                )
            return session.summary()

    @app.post("/sessions/{session_id}/finalize")
    def finalize(session_id: str) -> dict:
        session = registry.get(session_id)
        with session.lock:
            if session.status == FINALIZED:
                raise HTTPException(409, "session is already finalized")
            if not session.state.annotations:
                raise HTTPException(409, "nothing annotated yet")
            session.status = FINALIZED
            session.pending = None
            session.revision += 1
            if registry.store:
                registry.store.append(
                    session.session_id, {"type": "finalize"}
                )
            annotations = session.state.annotations
            posterior = session.state.posterior
            return {
                "session_id": session.session_id,
                "selected_model": select_final_model(annotations, posterior),
                "win_rates": annotated_win_rates(
                    annotations, session.dataset.model_ids
                ),
                "posterior": {
                    mid: float(p)
                    for mid, p in zip(
                        session.dataset.model_ids, posterior.probs()
                    )
                },
                "annotation_log": [
                    {
                        "query_id": vec.query_id,
                        "outcomes": {
                            mid: vec.outcomes[mid].value
                            for mid in session.dataset.model_ids
                        },
                    }
                    for vec in annotations
                ],
                "t": session.state.t,
            }

    return app
