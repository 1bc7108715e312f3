"""Line-delimited dataset files and structural validation.

One JSON record per line: query_id, query_text, responses (model id to
text), optional oracle (model id to "win"/"draw"/"loss").  The model
universe is whatever the first record declares; later records must match it
exactly.  The baseline model is chosen at load time, not stored in the
file, so one dump serves any baseline assignment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .core import Dataset, JudgmentVector, Outcome, Query

_SYMBOLS = {o.value: o for o in Outcome}


def _parse_record(line: str, line_no: int) -> dict:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
    if not isinstance(record, dict):
        raise ValueError(f"line {line_no}: record must be a JSON object")
    for field in ("query_id", "query_text", "responses"):
        if field not in record:
            raise ValueError(f"line {line_no}: missing field {field!r}")
    return record


def load_dataset(path: str | Path, baseline_id: str | None = None) -> Dataset:
    """Parse and cross-check a dataset file.

    ``baseline_id`` defaults to the first model of the universe (the order
    of the first record's responses).
    """
    path = Path(path)
    queries: list[Query] = []
    responses: dict[str, dict[str, str]] = {}
    oracle: dict[str, JudgmentVector] = {}
    universe: tuple[str, ...] | None = None
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            record = _parse_record(line, line_no)
            qid = record["query_id"]
            text = record["query_text"]
            resp = record["responses"]
            if not isinstance(resp, dict) or not resp:
                raise ValueError(f"line {line_no}: responses must be a nonempty object")
            if universe is None:
                universe = tuple(resp)
            if set(resp) != set(universe):
                missing = set(universe) ^ set(resp)
                raise ValueError(
                    f"query {qid!r}: responses disagree with the model universe "
                    f"(difference: {sorted(missing)})"
                )
            queries.append(Query(qid, text))
            responses[qid] = {mid: resp[mid] for mid in universe}
            raw_oracle = record.get("oracle")
            if raw_oracle is not None:
                oracle[qid] = _parse_oracle(
                    qid, raw_oracle, universe, baseline_id or universe[0], line_no
                )
    if universe is None:
        raise ValueError(f"{path.name}: no records")
    chosen_baseline = baseline_id or universe[0]
    if chosen_baseline not in universe:
        raise ValueError(f"baseline {chosen_baseline!r} not among model ids")
    return Dataset(
        queries=tuple(queries),
        model_ids=universe,
        baseline_id=chosen_baseline,
        responses=responses,
        oracle=oracle or None,
    )


def _parse_oracle(
    qid: str,
    raw: dict,
    universe: tuple[str, ...],
    baseline_id: str,
    line_no: int,
) -> JudgmentVector:
    if not isinstance(raw, dict):
        raise ValueError(f"line {line_no}: oracle must be an object")
    outcomes: dict[str, Outcome] = {}
    for mid, symbol in raw.items():
        if mid not in universe:
            raise ValueError(
                f"query {qid!r}: oracle names unknown model {mid!r}"
            )
        outcome = _SYMBOLS.get(symbol)
        if outcome is None:
            raise ValueError(
                f"query {qid!r}: unknown outcome symbol {symbol!r} "
                f"for model {mid!r}"
            )
        outcomes[mid] = outcome
    outcomes.setdefault(baseline_id, Outcome.DRAW)
    for mid in universe:
        if mid not in outcomes:
            raise ValueError(
                f"query {qid!r}: oracle is missing model {mid!r}"
            )
    return JudgmentVector(query_id=qid, outcomes=outcomes)


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write the line-delimited form; loading it back (with the same
    baseline) reproduces the Dataset value."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for q in dataset.queries:
            record: dict = {
                "query_id": q.id,
                "query_text": q.text,
                "responses": {
                    mid: dataset.responses[q.id][mid]
                    for mid in dataset.model_ids
                },
            }
            vec = (dataset.oracle or {}).get(q.id)
            if vec is not None:
                record["oracle"] = {
                    mid: vec.outcomes[mid].value for mid in dataset.model_ids
                }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class ValidationReport:
    """Hard violations fail the dataset; warnings are survivable."""

    violations: tuple[str, ...]
    warnings: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def lines(self) -> list[str]:
        out = [f"violation: {v}" for v in self.violations]
        out += [f"warning: {w}" for w in self.warnings]
        return out


def validate_dataset(dataset: Dataset) -> ValidationReport:
    """Structural checks beyond what construction already enforces."""
    violations: list[str] = []
    warnings: list[str] = []
    if dataset.baseline_id not in dataset.model_ids:
        violations.append(
            f"baseline {dataset.baseline_id!r} not among model ids"
        )
    for q in dataset.queries:
        for mid in dataset.model_ids:
            if not dataset.responses[q.id][mid].strip():
                warnings.append(
                    f"query {q.id!r}: empty response for model {mid!r}"
                )
    if dataset.oracle is None:
        warnings.append(
            "no oracle judgments: replay simulation and selection are "
            "unavailable (live annotation still works)"
        )
    elif not dataset.has_full_oracle():
        uncovered = [
            q.id for q in dataset.queries if q.id not in dataset.oracle
        ]
        violations.append(
            "oracle judgments cover only part of the dataset "
            f"(missing: {uncovered[:5]}{'...' if len(uncovered) > 5 else ''})"
        )
    return ValidationReport(tuple(violations), tuple(warnings))
