"""k-gram judge tests, anchored on hand-counted likelihood fixtures."""

from __future__ import annotations

import numpy as np
import pytest

from amselect.core import Outcome
from amselect.ngram import (
    WeakJudgePanel,
    avg_likelihood,
    build_panel,
    compare_likelihoods,
    ensemble_score_from_nu,
    fit_kgram,
    response_likelihoods,
    tokenize,
    weak_judge_compare,
)

from conftest import make_dataset, panel_from_letters


def test_tokenize_splits_on_whitespace_runs():
    assert tokenize("the  cat\tsat\non a mat") == ("the", "cat", "sat", "on", "a", "mat")
    assert tokenize("") == ()
    assert tokenize("   \n\t ") == ()
    assert tokenize("Keep, punctuation!") == ("Keep,", "punctuation!")


def test_unigram_hand_counts():
    # Corpus [a a], [a b]: P(a) = 3/4, P(b) = 1/4.
    model = fit_kgram([("a", "a"), ("a", "b")], k=1)
    assert model.probability((), "a") == 0.75
    assert model.probability((), "b") == 0.25
    assert avg_likelihood(model, ("a", "b")) == pytest.approx(0.5, abs=1e-12)


def test_bigram_hand_counts():
    # Corpus [the cat sat]: the first token falls back to unigram frequency,
    # so the average is (1/3 + 1 + 1) / 3 = 7/9.
    model = fit_kgram([("the", "cat", "sat")], k=2)
    assert model.probability((), "the") == pytest.approx(1 / 3, abs=1e-15)
    assert model.probability(("the",), "cat") == 1.0
    assert avg_likelihood(model, ("the", "cat", "sat")) == pytest.approx(
        7 / 9, abs=1e-12
    )


def test_bigram_repeated_grams():
    model = fit_kgram([("a", "b", "a", "b")], k=2)
    # () -> a: 2/4; (a,) -> b: 2/2; (b,) -> a: 1/1.
    assert avg_likelihood(model, ("a", "b", "a", "b")) == pytest.approx(
        (0.5 + 1 + 1 + 1) / 4, abs=1e-12
    )


def test_trigram_truncated_contexts():
    model = fit_kgram([("x", "y", "z")], k=3)
    assert model.probability((), "x") == pytest.approx(1 / 3)
    assert model.probability(("x",), "y") == 1.0
    assert model.probability(("x", "y"), "z") == 1.0
    assert avg_likelihood(model, ("x", "y", "z")) == pytest.approx(7 / 9, abs=1e-12)


def test_empty_response_scores_zero():
    model = fit_kgram([("a",)], k=1)
    assert avg_likelihood(model, ()) == 0.0


def test_out_of_corpus_token_is_an_error():
    model = fit_kgram([("a", "b")], k=1)
    with pytest.raises(ValueError, match="response not in fitted corpus"):
        avg_likelihood(model, ("zebra",))


def test_fit_rejects_nonpositive_order():
    with pytest.raises(ValueError, match="k must be >= 1"):
        fit_kgram([("a",)], k=0)


def test_compare_likelihoods_tolerance():
    assert compare_likelihoods(0.5, 0.5) is Outcome.DRAW
    assert compare_likelihoods(0.5 + 5e-13, 0.5) is Outcome.DRAW
    assert compare_likelihoods(0.6, 0.5) is Outcome.WIN
    assert compare_likelihoods(0.4, 0.5) is Outcome.LOSS


def test_weak_judge_compare_on_tiny_dataset():
    # "a" repeats the dominant phrasing; "b" is idiosyncratic, so the unigram
    # judge scores "a" above the baseline and "b" below it.
    dataset = make_dataset(
        {
            "q1": {
                "base": "alpha beta gamma",
                "a": "alpha beta gamma",
                "b": "delta epsilon zeta",
            }
        },
        baseline="base",
    )
    assert weak_judge_compare(dataset, "q1", "a", k=1) is Outcome.DRAW
    assert weak_judge_compare(dataset, "q1", "base", k=1) is Outcome.DRAW
    assert weak_judge_compare(dataset, "q1", "b", k=1) is Outcome.LOSS


def test_weak_judge_empty_responses_draw():
    dataset = make_dataset(
        {"q1": {"base": "", "a": "", "b": "words words words"}}, baseline="base"
    )
    assert weak_judge_compare(dataset, "q1", "a", k=1) is Outcome.DRAW
    assert weak_judge_compare(dataset, "q1", "b", k=1) is Outcome.WIN


@pytest.mark.parametrize(
    "nu,expected",
    [
        (1.0, 1.0),
        (2 / 3, 1.0),
        (2 / 3 - 1e-9, 0.5),
        (0.5, 0.5),
        (1 / 3, 0.5),
        (1 / 3 - 1e-9, 0.0),
        (0.0, 0.0),
    ],
)
def test_ensemble_thresholds(nu, expected):
    assert ensemble_score_from_nu(nu) == expected


def test_ensemble_nu_from_panel():
    panel = panel_from_letters(
        ["base", "a"], "base", {"q1": {"base": "DDD", "a": "WWL"}}
    )
    assert panel.ensemble_nu("q1", "a") == pytest.approx(2 / 3, abs=1e-15)
    assert panel.ensemble_score("q1", "a") == 1.0
    assert panel.ensemble_score("q1", "base") == 0.5


def test_ensemble_monotone_in_single_decision():
    # Upgrading one judge's call never lowers the ensemble score.
    # nu("WDD") = (1 + 0.5 + 0.5) / 3 = 2/3, exactly the win threshold.
    ladders = [("LLL", 0.0), ("DLL", 0.0), ("DDL", 0.5), ("DDD", 0.5), ("WDD", 1.0),
               ("WWD", 1.0), ("WWW", 1.0)]
    previous = -1.0
    for word, expected in ladders:
        panel = panel_from_letters(["base", "a"], "base", {"q1": {"base": "DDD", "a": word}})
        score = panel.ensemble_score("q1", "a")
        assert score == expected
        assert score >= previous
        previous = score


def _texture_dataset():
    return make_dataset(
        {
            "q1": {
                "base": "the cat sat on the mat",
                "good": "the cat sat on a mat",
                "odd": "purple monkeys dishwasher",
            },
            "q2": {
                "base": "water boils at one hundred degrees",
                "good": "water boils at one hundred degrees celsius",
                "odd": "fish ride bicycles badly",
            },
        },
        baseline="base",
    )


def test_build_panel_shape_and_baseline_self_draws():
    dataset = _texture_dataset()
    panel = build_panel(dataset, z=3)
    assert panel.codes.shape == (2, 3, 3)
    for qid in ("q1", "q2"):
        for k in (1, 2, 3):
            assert panel.decision(qid, "base", k) is Outcome.DRAW


def test_build_panel_matches_single_judge_calls():
    dataset = _texture_dataset()
    panel = build_panel(dataset, z=2)
    for qid in ("q1", "q2"):
        for mid in dataset.model_ids:
            for k in (1, 2):
                assert panel.decision(qid, mid, k) is weak_judge_compare(
                    dataset, qid, mid, k
                )


def test_build_panel_deterministic():
    dataset = _texture_dataset()
    a, b = build_panel(dataset, z=4), build_panel(dataset, z=4)
    assert np.array_equal(a.codes, b.codes)


def test_response_likelihoods_shape():
    dataset = _texture_dataset()
    table = response_likelihoods(dataset, z=3)
    assert set(table) == {"q1", "q2"}
    assert table["q1"].shape == (3, 3)


def test_judge_vector_round_trip():
    panel = panel_from_letters(
        ["base", "a", "b"], "base", {"q1": {"base": "DD", "a": "WL", "b": "DW"}}
    )
    vec = panel.judge_vector("q1", 2)
    assert vec.outcomes["a"] is Outcome.LOSS
    assert vec.outcomes["b"] is Outcome.WIN
    assert vec.outcomes["base"] is Outcome.DRAW


def test_panel_cache_round_trip(tmp_path):
    dataset = _texture_dataset()
    panel = build_panel(dataset, z=3)
    cache = tmp_path / "panel.json"
    panel.save(cache, dataset.content_hash())
    loaded = WeakJudgePanel.load(cache, dataset.content_hash())
    assert loaded.model_ids == panel.model_ids
    assert loaded.baseline_id == panel.baseline_id
    assert loaded.z == panel.z
    assert np.array_equal(loaded.codes, panel.codes)


def test_panel_cache_rejects_stale_hash(tmp_path):
    dataset = _texture_dataset()
    panel = build_panel(dataset, z=2)
    cache = tmp_path / "panel.json"
    panel.save(cache, dataset.content_hash())
    with pytest.raises(ValueError, match="stale panel cache"):
        WeakJudgePanel.load(cache, "0" * 64)


def test_panel_unknown_query_is_an_error():
    panel = panel_from_letters(["base", "a"], "base", {"q1": {"base": "D", "a": "W"}})
    with pytest.raises(ValueError, match="no panel decisions"):
        panel.decision_codes("q999")
