"""Regenerates tests/data/replay30.jsonl (committed; run only to rebuild).

30 queries, 5 models.  Oracle records are fixed counts, placed with a seeded
shuffle: m0 beats the baseline on 28 queries and draws 2, so every possible
20-query pool gives m0 a win rate of at least 0.95 while no other model can
exceed 0.55.  The full-information selection is therefore unique in every
pool a simulation can sample.

Responses are built so the k-gram judges are informative but imperfect:
better models use more of the corpus-wide common vocabulary.
"""

from __future__ import annotations

import random
from pathlib import Path

COMMON = "the quick note covers the main point with a clear answer".split()
RARE = "zephyr quartz fjord glyph vortex njord plinth crag".split()

MODELS = ["m0", "m1", "m2", "m3", "base"]

# per-model (wins, draws) against the baseline over the 30 queries
ORACLE_COUNTS = {"m0": (28, 2), "m1": (8, 6), "m2": (5, 5), "m3": (2, 4)}

# fraction of common-vocabulary tokens in each model's responses
COMMON_SHARE = {"m0": 0.9, "m1": 0.7, "m2": 0.5, "m3": 0.3, "base": 0.6}


def outcome_column(rng: random.Random, wins: int, draws: int) -> list[str]:
    column = ["win"] * wins + ["draw"] * draws
    column += ["loss"] * (30 - len(column))
    rng.shuffle(column)
    return column


def response_text(rng: random.Random, model: str, qid: int) -> str:
    tokens = []
    for _ in range(12):
        pool = COMMON if rng.random() < COMMON_SHARE[model] else RARE
        tokens.append(rng.choice(pool))
    tokens.append(f"topic{qid}")
    return " ".join(tokens)


def main() -> None:
    import json

    rng = random.Random(20240917)
    columns = {
        mid: outcome_column(rng, *ORACLE_COUNTS[mid]) for mid in ORACLE_COUNTS
    }
    out = Path(__file__).parent / "data" / "replay30.jsonl"
    with out.open("w", encoding="utf-8") as handle:
        for i in range(30):
            record = {
                "query_id": f"q{i:02d}",
                "query_text": f"question {i} about topic{i}",
                "responses": {
                    mid: response_text(rng, mid, i) for mid in MODELS
                },
                "oracle": {
                    **{mid: columns[mid][i] for mid in ORACLE_COUNTS},
                    "base": "draw",
                },
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
