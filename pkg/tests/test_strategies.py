"""Strategy tests: brute-force agreement, tie handling, fit properties."""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np
import pytest

from amselect.core import Dataset, JudgmentVector, NoiseParams, Outcome, select_final_model
from amselect.ngram import WeakJudgePanel
from amselect.posterior import shannon_entropy
from amselect.strategies import (
    BTFit,
    SelectionState,
    StrategyKind,
    fit_bradley_terry,
    outcome_distribution,
    select_next_bradley_terry,
    select_next_confidence,
    select_next_llm_selector,
    select_next_most_draws,
    select_next_random,
    select_next_uncertainty,
    step,
)

from conftest import make_dataset, panel_from_letters, vector
from oracles import (
    brute_force_bt_choice,
    brute_force_entropy_choice,
    posterior_after,
)


@dataclass
class Instance:
    dataset: Dataset
    panel: WeakJudgePanel
    params: NoiseParams
    pool_ids: tuple[str, ...]
    pre_annotations: list[JudgmentVector]


def random_instance(
    rnd: random.Random, n_max: int = 20, m_max: int = 6, z_max: int = 3
) -> Instance:
    m = rnd.randint(2, m_max)
    n = rnd.randint(4, n_max)
    z = rnd.randint(1, z_max)
    model_ids = ["base"] + [f"c{i}" for i in range(1, m)]
    letters = "WDL"
    decisions = {
        f"q{j:02d}": {
            mid: ("D" * z if mid == "base" else "".join(rnd.choice(letters) for _ in range(z)))
            for mid in model_ids
        }
        for j in range(n)
    }
    panel = panel_from_letters(model_ids, "base", decisions)
    responses = {qid: {mid: "r" for mid in model_ids} for qid in decisions}
    dataset = make_dataset(responses, baseline="base", model_ids=model_ids)
    while True:
        eps_loss = round(rnd.uniform(0.05, 0.6), 2)
        eps_draw = round(rnd.uniform(0.05, 0.6), 2)
        if eps_loss + eps_draw <= 0.9:
            break
    pool = list(decisions)
    rnd.shuffle(pool)
    pre = []
    for qid in pool[: rnd.randint(0, 3)]:
        outcomes = {
            mid: (Outcome.DRAW if mid == "base" else rnd.choice(list(Outcome)))
            for mid in model_ids
        }
        pre.append(JudgmentVector(qid, outcomes))
    return Instance(dataset, panel, NoiseParams(eps_loss, eps_draw), tuple(pool), pre)


def build_state(inst: Instance, strategy: StrategyKind, seed: int = 0) -> SelectionState:
    state = SelectionState(
        inst.dataset,
        inst.panel,
        inst.params,
        strategy,
        inst.pool_ids,
        np.random.default_rng(seed),
    )
    for vec in inst.pre_annotations:
        state.apply(vec)
    return state


def replay_oracle(dataset: Dataset):
    def fetch(query_id: str) -> JudgmentVector:
        return dataset.oracle[query_id]

    return fetch


def test_strategy_names_round_trip():
    for kind in StrategyKind:
        assert StrategyKind.from_name(kind.value) is kind
    with pytest.raises(ValueError, match="unknown strategy"):
        StrategyKind.from_name("zigzag")


def test_state_rejects_bad_pools():
    inst = random_instance(random.Random(7))
    with pytest.raises(ValueError, match="pool must be nonempty"):
        SelectionState(
            inst.dataset, inst.panel, inst.params, StrategyKind.RANDOM, (),
            np.random.default_rng(0),
        )
    dup = (inst.pool_ids[0], inst.pool_ids[0])
    with pytest.raises(ValueError, match="duplicate query ids"):
        SelectionState(
            inst.dataset, inst.panel, inst.params, StrategyKind.RANDOM, dup,
            np.random.default_rng(0),
        )


def test_apply_rejects_repeat_and_foreign_queries():
    inst = random_instance(random.Random(11))
    state = build_state(inst, StrategyKind.RANDOM)
    qid = state.remaining[0]
    outcomes = {
        mid: (Outcome.DRAW if mid == "base" else Outcome.WIN)
        for mid in inst.dataset.model_ids
    }
    state.apply(JudgmentVector(qid, outcomes))
    with pytest.raises(ValueError, match="already annotated"):
        state.apply(JudgmentVector(qid, outcomes))
    with pytest.raises(ValueError, match="not in the pool"):
        state.apply(JudgmentVector("nope", outcomes))


def test_exhausted_pool_is_an_error():
    inst = random_instance(random.Random(13))
    state = build_state(inst, StrategyKind.RANDOM)
    outcomes = {mid: Outcome.DRAW for mid in inst.dataset.model_ids}
    for qid in list(state.remaining):
        state.apply(JudgmentVector(qid, outcomes))
    with pytest.raises(ValueError, match="budget exceeds pool"):
        state.propose()


def test_llm_selector_matches_brute_force_sample():
    rnd = random.Random(4242)
    for _ in range(40):
        inst = random_instance(rnd)
        state = build_state(inst, StrategyKind.LLM_SELECTOR)
        probs = posterior_after(
            inst.dataset.model_ids, inst.pre_annotations, inst.params
        )
        expected = brute_force_entropy_choice(
            probs, inst.panel, state.remaining, inst.params
        )
        assert select_next_llm_selector(state) == expected


def test_llm_selector_breaks_ties_by_pool_order():
    # q1 and q2 carry identical judge columns, so their objectives are equal.
    decisions = {
        "q1": {"base": "D", "a": "W", "b": "L"},
        "q2": {"base": "D", "a": "W", "b": "L"},
        "q3": {"base": "D", "a": "D", "b": "D"},
    }
    panel = panel_from_letters(["base", "a", "b"], "base", decisions)
    responses = {qid: {m: "r" for m in ("base", "a", "b")} for qid in decisions}
    dataset = make_dataset(responses, baseline="base", model_ids=["base", "a", "b"])
    params = NoiseParams(0.2, 0.4)
    fwd = SelectionState(
        dataset, panel, params, StrategyKind.LLM_SELECTOR,
        ("q1", "q2", "q3"), np.random.default_rng(0),
    )
    rev = SelectionState(
        dataset, panel, params, StrategyKind.LLM_SELECTOR,
        ("q2", "q1", "q3"), np.random.default_rng(0),
    )
    assert select_next_llm_selector(fwd) == "q1"
    assert select_next_llm_selector(rev) == "q2"


def test_degenerate_posterior_picks_first_pool_query():
    inst = random_instance(random.Random(17))
    state = build_state(inst, StrategyKind.LLM_SELECTOR)
    lw = np.full(len(inst.dataset.model_ids), -np.inf)
    lw[0] = 0.0
    state.posterior = state.posterior.__class__(inst.dataset.model_ids, lw)
    assert select_next_llm_selector(state) == state.remaining[0]


def test_random_strategy_uniform_and_reproducible():
    inst = random_instance(random.Random(23))
    n = len(inst.pool_ids)
    counts = {qid: 0 for qid in inst.pool_ids}
    state = SelectionState(
        inst.dataset, inst.panel, inst.params, StrategyKind.RANDOM,
        inst.pool_ids, np.random.default_rng(99),
    )
    draws = 20000
    for _ in range(draws):
        counts[select_next_random(state)] += 1
    for qid in inst.pool_ids:
        assert counts[qid] / draws == pytest.approx(1 / n, abs=0.02)
    a = SelectionState(
        inst.dataset, inst.panel, inst.params, StrategyKind.RANDOM,
        inst.pool_ids, np.random.default_rng(5),
    )
    b = SelectionState(
        inst.dataset, inst.panel, inst.params, StrategyKind.RANDOM,
        inst.pool_ids, np.random.default_rng(5),
    )
    assert [select_next_random(a) for _ in range(10)] == [
        select_next_random(b) for _ in range(10)
    ]


def test_bt_fit_empty_is_uniform_and_converged():
    fit = fit_bradley_terry([], ["base", "a", "b"], "base")
    assert fit.strengths == pytest.approx([1 / 3] * 3, abs=1e-9)
    assert fit.converged
    assert fit.iterations <= 2


def test_bt_fit_symmetric_record_is_uniform():
    annotations = [
        vector("q1", {"base": "D", "a": "W", "b": "W"}),
        vector("q2", {"base": "D", "a": "L", "b": "L"}),
    ]
    fit = fit_bradley_terry(annotations, ["base", "a", "b"], "base")
    assert fit.strengths == pytest.approx([1 / 3] * 3, abs=1e-6)


def test_bt_fit_orders_strengths():
    annotations = [
        vector("q1", {"base": "D", "a": "W", "b": "L"}),
    ]
    fit = fit_bradley_terry(annotations, ["base", "a", "b"], "base")
    assert fit.strength("a") > fit.strength("base") > fit.strength("b")
    assert float(fit.strengths.sum()) == pytest.approx(1.0, abs=1e-9)
    assert np.all(fit.strengths > 0)


def test_bt_fit_draws_count_half():
    annotations = [vector("q1", {"base": "D", "a": "D"})]
    fit = fit_bradley_terry(annotations, ["base", "a"], "base")
    assert fit.strengths == pytest.approx([0.5, 0.5], abs=1e-9)


def test_bt_fit_matches_direct_likelihood_maximization():
    scipy_optimize = pytest.importorskip("scipy.optimize")
    from amselect.core import outcome_score

    rnd = random.Random(31)
    lam = 0.1
    for _ in range(5):
        m = rnd.randint(2, 5)
        ids = [f"m{i}" for i in range(m)]
        count = rnd.randint(1, 6)
        annotations = [
            JudgmentVector(
                f"q{t}",
                {
                    mid: (Outcome.DRAW if i == 0 else rnd.choice(list(Outcome)))
                    for i, mid in enumerate(ids)
                },
            )
            for t in range(count)
        ]
        wins = np.array(
            [
                sum(outcome_score(v.outcomes[mid]) for v in annotations)
                for mid in ids
            ]
        )
        fit = fit_bradley_terry(annotations, ids, ids[0], lam)

        def negloglik(theta):
            gamma = np.exp(theta)
            strengths, virt = gamma[:m], gamma[m]
            ll = 0.0
            for j in range(1, m):
                won = wins[j]
                ll += won * np.log(strengths[j]) + (count - won) * np.log(strengths[0])
                ll -= count * np.log(strengths[j] + strengths[0])
            for i in range(m):
                ll += lam * np.log(strengths[i]) + lam * np.log(virt)
                ll -= 2 * lam * np.log(strengths[i] + virt)
            return -ll

        res = scipy_optimize.minimize(
            negloglik, np.zeros(m + 1), method="L-BFGS-B",
            options={"gtol": 1e-12, "maxiter": 10000},
        )
        direct = np.exp(res.x[:m])
        direct /= direct.sum()
        assert fit.strengths == pytest.approx(direct, abs=1e-4)


def test_bt_warm_start_matches_cold_start():
    rnd = random.Random(37)
    for _ in range(10):
        inst = random_instance(rnd)
        cold = fit_bradley_terry(
            inst.pre_annotations or [], inst.dataset.model_ids, "base"
        )
        warm = fit_bradley_terry(
            inst.pre_annotations or [], inst.dataset.model_ids, "base",
            init=np.random.default_rng(1).dirichlet(np.ones(inst.dataset.m)),
        )
        assert warm.strengths == pytest.approx(cold.strengths, abs=1e-6)


def test_bt_selection_matches_brute_force_sample():
    rnd = random.Random(7321)
    for _ in range(12):
        inst = random_instance(rnd, n_max=12)
        state = build_state(inst, StrategyKind.BRADLEY_TERRY)
        expected = brute_force_bt_choice(
            inst.pre_annotations, inst.panel, state.remaining, "base"
        )
        assert select_next_bradley_terry(state) == expected


def test_outcome_distribution_hand_counts():
    panel = panel_from_letters(
        ["base", "a", "b", "c"],
        "base",
        {"q1": {"base": "DD", "a": "WW", "b": "WD", "c": "LD"}},
    )
    win, loss, draw = outcome_distribution(panel, "q1")
    assert win == pytest.approx(3 / 6)
    assert loss == pytest.approx(1 / 6)
    assert draw == pytest.approx(2 / 6)
    assert win + loss + draw == pytest.approx(1.0, abs=1e-12)


def _heterogeneous_fixture():
    # q_sharp: decisive judgments; q_mixed: split outcomes; q_flat: all draws.
    decisions = {
        "q_sharp": {"base": "DD", "a": "WW", "b": "LL"},
        "q_mixed": {"base": "DD", "a": "WL", "b": "DW"},
        "q_flat": {"base": "DD", "a": "DD", "b": "DD"},
    }
    panel = panel_from_letters(["base", "a", "b"], "base", decisions)
    responses = {qid: {m: "r" for m in ("base", "a", "b")} for qid in decisions}
    oracle = {
        qid: {"a": "W", "b": "L"}
        for qid in decisions
    }
    dataset = make_dataset(
        responses, baseline="base", model_ids=["base", "a", "b"], oracle=oracle
    )
    return dataset, panel


def test_uncertainty_and_confidence_pick_extremes():
    dataset, panel = _heterogeneous_fixture()
    params = NoiseParams(0.2, 0.4)
    pool = ("q_sharp", "q_mixed", "q_flat")

    def fresh(kind):
        return SelectionState(
            dataset, panel, params, kind, pool, np.random.default_rng(0)
        )

    # pi(q_flat) is a point mass on draw, the lowest possible entropy;
    # q_mixed spreads mass across all three outcomes, the highest here.
    assert select_next_confidence(fresh(StrategyKind.CONFIDENCE)) == "q_flat"
    assert select_next_uncertainty(fresh(StrategyKind.UNCERTAINTY)) == "q_mixed"


def test_most_draws_counts_thresholded_ensemble():
    dataset, panel = _heterogeneous_fixture()
    params = NoiseParams(0.2, 0.4)
    state = SelectionState(
        dataset, panel, params, StrategyKind.MOST_DRAWS,
        ("q_sharp", "q_mixed", "q_flat"), np.random.default_rng(0),
    )
    # q_flat: both candidates at the draw score; q_mixed: nu(a)=0.5, nu(b)=0.75
    # gives one draw call; q_sharp: none.
    assert select_next_most_draws(state) == "q_flat"


def test_non_adaptive_strategies_ignore_observed_outcomes():
    dataset, panel = _heterogeneous_fixture()
    params = NoiseParams(0.2, 0.4)
    pool = ("q_sharp", "q_mixed", "q_flat")
    all_win = {
        qid: JudgmentVector(
            qid, {"base": Outcome.DRAW, "a": Outcome.WIN, "b": Outcome.WIN}
        )
        for qid in pool
    }
    all_loss = {
        qid: JudgmentVector(
            qid, {"base": Outcome.DRAW, "a": Outcome.LOSS, "b": Outcome.LOSS}
        )
        for qid in pool
    }
    for kind in (StrategyKind.MOST_DRAWS, StrategyKind.UNCERTAINTY,
                 StrategyKind.CONFIDENCE):
        orders = []
        for feed in (all_win, all_loss):
            state = SelectionState(
                dataset, panel, params, kind, pool, np.random.default_rng(0)
            )
            order = []
            for _ in range(len(pool)):
                step(state, lambda qid: feed[qid])
                order.append(state.annotations[-1].query_id)
            orders.append(order)
        assert orders[0] == orders[1]


def test_all_strategies_exhaust_pool_and_agree_at_full_budget():
    dataset, panel = _heterogeneous_fixture()
    params = NoiseParams(0.2, 0.4)
    pool = ("q_sharp", "q_mixed", "q_flat")
    finals = set()
    for kind in StrategyKind:
        state = SelectionState(
            dataset, panel, params, kind, pool, np.random.default_rng(3)
        )
        for _ in range(len(pool)):
            step(state, replay_oracle(dataset))
        assert sorted(v.query_id for v in state.annotations) == sorted(pool)
        finals.add(select_final_model(state.annotations, state.posterior))
    assert finals == {"a"}


def test_step_runs_selection_judgment_update():
    dataset, panel = _heterogeneous_fixture()
    params = NoiseParams(0.2, 0.4)
    state = SelectionState(
        dataset, panel, params, StrategyKind.LLM_SELECTOR,
        ("q_sharp", "q_mixed", "q_flat"), np.random.default_rng(0),
    )
    before = state.posterior.probs().copy()
    result = step(state, replay_oracle(dataset))
    assert result is state
    assert state.t == 1
    assert len(state.annotations) == 1
    assert state.annotations[0].query_id not in state.remaining
    assert not np.allclose(state.posterior.probs(), before)


def test_runs_are_bit_reproducible():
    rnd = random.Random(91)
    inst = random_instance(rnd)
    full_oracle = {
        qid: JudgmentVector(
            qid,
            {
                mid: (Outcome.DRAW if mid == "base" else random.Random(hash(qid) % 1000).choice(list(Outcome)))
                for mid in inst.dataset.model_ids
            },
        )
        for qid in inst.pool_ids
    }
    for kind in StrategyKind:
        orders = []
        for _ in range(2):
            state = SelectionState(
                inst.dataset, inst.panel, inst.params, kind, inst.pool_ids,
                np.random.default_rng(1234),
            )
            for _ in range(len(inst.pool_ids)):
                step(state, lambda qid: full_oracle[qid])
            orders.append([v.query_id for v in state.annotations])
        assert orders[0] == orders[1]
        assert sorted(orders[0]) == sorted(inst.pool_ids)
