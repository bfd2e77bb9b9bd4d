import csv
import io
import json

import numpy as np
import pytest

from tradeprophets._rng import mix64, trial_seed, trial_seeds, uniforms
from tradeprophets.adversary import gen_phase, gen_prop_adversarial
from tradeprophets.engine import SCHEMA_VERSION, monte_carlo, run_episode
from tradeprophets.exceptions import InfeasibleAction
from tradeprophets.market import (NO_COSTS, CostModel, Deterministic, Iid, PriceDistribution,
                                  random_independent_sequence)
from tradeprophets.oracle import opt_telescoping, opt_with_costs_dp
from tradeprophets.traders import (Action, BaseTrader, BuyBelowSellAbove, BuyLowSellHigh,
                                   EpsMarginTrader, LookaheadTrader)


class AlwaysBuy(BaseTrader):
    vectorized = False

    def decide(self, holding, view):
        return Action.BUY


# --- rng ---------------------------------------------------------------------

def test_splitmix_reference_values():
    # published SplitMix64 outputs for state 0: first draw mixes 0x9E3779B97F4A7C15
    assert int(mix64(np.uint64(0x9E3779B97F4A7C15))) == 0xE220A8397B1DCDAF
    assert int(mix64(np.uint64(0x9E3779B97F4A7C15 * 2 % 2 ** 64))) == 0x6E789E6AA1B965F4


def test_trial_seeds_are_positional():
    s = trial_seeds(9, 10)
    assert s[4] == trial_seed(9, 4)
    assert np.array_equal(trial_seeds(9, 5, start=5), s[5:])
    assert len(set(s.tolist())) == 10


def test_uniform_draws():
    u = uniforms(np.arange(100, dtype=np.uint64), 1000)
    assert u.shape == (100, 1000)
    assert u.min() >= 0 and u.max() < 1
    assert u.mean() == pytest.approx(0.5, abs=0.005)
    assert np.array_equal(uniforms(np.array([7], dtype=np.uint64), 4, start=3)[0],
                          uniforms(np.array([7], dtype=np.uint64), 7)[0, 3:])


# --- episodes ----------------------------------------------------------------

def test_run_episode_deterministic_path():
    ep = run_episode(Deterministic((2.0, 1.0, 3.0)), BuyLowSellHigh())
    assert [(t.step, t.action) for t in ep.trade_log] == [(1, Action.SELL), (2, Action.BUY),
                                                           (3, Action.SELL)]
    assert ep.alg_profit == pytest.approx(4.0)
    assert ep.opt_profit == pytest.approx(opt_telescoping([2.0, 1.0, 3.0]))
    assert ep.holding.tolist() == [True, False, True]
    d = ep.to_dict()
    assert d["schema_version"] == SCHEMA_VERSION and d["realization"] == [2.0, 1.0, 3.0]
    json.dumps(d)


def test_infeasible_action():
    with pytest.raises(InfeasibleAction):
        run_episode(Deterministic((1.0, 2.0)), AlwaysBuy())


def test_trade_log_records_effective_prices():
    cm = CostModel(0.1, 0.05)
    ep = run_episode(Deterministic((2.0, 1.0, 3.0)), BuyLowSellHigh(), cm)
    assert [t.price for t in ep.trade_log] == pytest.approx([1.75, 1.15, 2.65])
    assert ep.alg_profit == pytest.approx(1.75 - 1.15 + 2.65)
    assert ep.opt_profit == pytest.approx(opt_with_costs_dp([2.0, 1.0, 3.0], cm))


def test_run_episode_does_not_mutate_trader():
    t = BuyBelowSellAbove()
    run_episode(Iid(PriceDistribution.uniform(0, 1), 5), t, CostModel(0, 0.1), 3)
    assert not hasattr(t, "thresholds_")


# --- batches -------------------------------------------------------------------

@pytest.fixture(scope="module")
def instance():
    return random_independent_sequence(np.random.default_rng(4), 25, 3, delta=0.1)


@pytest.mark.parametrize("cm", [NO_COSTS, CostModel(0.1, 0.2)])
def test_batch_replay_and_chunking(instance, cm):
    st = monte_carlo(instance, BuyLowSellHigh(), cm, 300, master_seed=11)
    st2 = monte_carlo(instance, BuyLowSellHigh(), cm, 300, master_seed=11, chunk_size=17)
    assert np.array_equal(st.alg, st2.alg) and np.array_equal(st.opt, st2.opt)
    for j in (0, 123, 299):
        ep = run_episode(instance, BuyLowSellHigh(), cm, trial_seed(11, j))
        assert ep.alg_profit == st.alg[j]
        assert ep.opt_profit == pytest.approx(st.opt[j], abs=1e-12)
        assert len([t for t in ep.trade_log if t.action == Action.BUY]) == st.n_buys[j]


def test_vectorized_and_episode_paths_agree(instance):
    cm = CostModel(0.0, 0.1)
    fast = monte_carlo(instance, LookaheadTrader("blsh", 1), cm, 50, 2)
    assert not LookaheadTrader.vectorized
    ep = run_episode(instance, LookaheadTrader("blsh", 1), cm, trial_seed(2, 7))
    assert fast.alg[7] == ep.alg_profit
    assert fast.holding_rate.shape == (instance.horizon,)


def test_different_seeds_differ(instance):
    a = monte_carlo(instance, BuyLowSellHigh(), NO_COSTS, 50, 1)
    b = monte_carlo(instance, BuyLowSellHigh(), NO_COSTS, 50, 2)
    assert not np.array_equal(a.alg, b.alg)


def test_batch_exports(instance):
    st = monte_carlo(instance, EpsMarginTrader(margin=0.5), NO_COSTS, 20, 5)
    rows = list(csv.DictReader(io.StringIO(st.to_csv())))
    assert list(rows[0]) == ["trial", "seed", "alg_profit", "opt_profit"]
    assert [float(r["alg_profit"]) for r in rows] == st.alg.tolist()
    assert int(rows[3]["seed"]) == trial_seed(5, 3)
    doc = json.loads(st.to_json())
    assert doc["schema_version"] == SCHEMA_VERSION and len(doc["rows"]) == 20
    assert st.to_json() == monte_carlo(instance, EpsMarginTrader(margin=0.5), NO_COSTS, 20,
                                       5).to_json()


def test_ratio_ci_covers_ratio(instance):
    st = monte_carlo(instance, BuyLowSellHigh(), NO_COSTS, 2000, 3)
    lo, hi = st.ratio_ci()
    assert lo < st.ratio < hi
    assert st.opt_mean >= st.alg_mean


def test_opt_dominates_alg_pathwise():
    proc = gen_prop_adversarial(0.2, 40)
    cm = CostModel(0.05, 0.05)
    st = monte_carlo(proc, BuyLowSellHigh(), cm, 500, 8)
    assert np.all(st.opt >= st.alg - 1e-9)


def test_adaptive_batch():
    st = monte_carlo(gen_phase(0.1, 10), LookaheadTrader("greedy"), NO_COSTS, 3, 0)
    assert np.all(st.alg <= 1e-9)
    assert st.opt == pytest.approx([0.5] * 3)


def test_trials_validation(instance):
    with pytest.raises(ValueError):
        monte_carlo(instance, BuyLowSellHigh(), NO_COSTS, 0)
