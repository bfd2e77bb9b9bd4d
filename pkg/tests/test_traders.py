import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from tradeprophets.exceptions import DiscontinuousCdf, LookaheadViolation
from tradeprophets.market import (NO_COSTS, CostModel, Deterministic, IndependentSequence, Iid,
                                  PriceDistribution)
from tradeprophets.oracle import opt_with_costs_dp
from tradeprophets.traders import (Action, BuyBelowSellAbove, BuyLowSellHigh, EpsMarginTrader,
                                   LookaheadTrader, MarketView, RevealedPrices, Thresholds,
                                   bbsa_decide, blsh_decide, eps_margin_decide, make_trader,
                                   median, requires_lookahead, solve_thresholds)

UNIFORM01 = PriceDistribution.uniform(0.0, 1.0)


def view(price, next_mean=0.0, lookahead=()):
    return MarketView(step=1, price=price, next_mean=next_mean, lookahead=lookahead)


# --- decision rules -------------------------------------------------------------

@pytest.mark.parametrize("holding, price, nm, want", [
    (True, 5.0, 4.0, Action.SELL),
    (True, 4.0, 4.0, Action.HOLD),    # sell is strict
    (False, 4.0, 4.0, Action.BUY),    # buy is weak
    (False, 4.5, 4.0, Action.HOLD),
    (True, 0.0, 0.0, Action.HOLD),
    (True, 0.1, 0.0, Action.SELL),    # last step: mean of the sentinel is 0
])
def test_blsh_rule(holding, price, nm, want):
    assert blsh_decide(holding, view(price, nm)) == want


TH = Thresholds(z_low=0.4, z_high=0.6, v=0.5, p=0.4, v_low=0.2, v_high=0.8, median=0.5)


@pytest.mark.parametrize("holding, price, want", [
    (True, 0.6, Action.SELL),
    (False, 0.5, Action.HOLD),
    (False, 0.4, Action.BUY),
    (True, 0.59, Action.HOLD),
    (False, 0.41, Action.HOLD),
])
def test_bbsa_rule(holding, price, want):
    assert bbsa_decide(holding, view(price), TH) == want


def test_eps_margin_rule():
    eps = 0.1
    assert eps_margin_decide(False, view(0.95, 1.0), eps) == Action.HOLD
    assert eps_margin_decide(False, view(0.9, 1.0), eps) == Action.BUY
    assert eps_margin_decide(True, view(1.05, 1.0), eps) == Action.HOLD
    assert eps_margin_decide(True, view(1.1, 1.0), eps) == Action.SELL
    assert eps_margin_decide(True, view(1.2, 0.0), eps, mean=1.0) == Action.SELL


# --- thresholds -------------------------------------------------------------------

def test_thresholds_uniform_fixed_fee():
    th = solve_thresholds(UNIFORM01, CostModel(0.0, 0.1))
    assert th.z_high == pytest.approx(0.6, abs=1e-10)
    assert th.z_low == pytest.approx(0.4, abs=1e-10)
    assert th.v == pytest.approx(0.5, abs=1e-10)
    assert th.p == pytest.approx(0.4, abs=1e-10)
    assert th.v_high == pytest.approx(0.8, abs=1e-10)
    assert th.v_low == pytest.approx(0.2, abs=1e-10)


def test_thresholds_uniform_proportional_fee():
    # l(h) = (2/3) h, so 1 - h = (2/3) h
    th = solve_thresholds(UNIFORM01, CostModel(0.2, 0.0))
    assert th.z_high == pytest.approx(0.6, abs=1e-10)
    assert th.z_low == pytest.approx(0.4, abs=1e-10)
    assert th.v == pytest.approx(0.48, abs=1e-10)


def test_thresholds_zero_cost_is_median():
    d = PriceDistribution(((1.0, 0.2), (2.0, 0.5), (6.0, 0.3)), delta=0.4)
    th = solve_thresholds(d, NO_COSTS)
    assert th.z_high == pytest.approx(th.median, abs=1e-9)
    assert th.z_low == pytest.approx(th.median, abs=1e-9)
    assert th.p == pytest.approx(0.5, abs=1e-9)
    assert d.cdf(th.median) == pytest.approx(0.5, abs=1e-10)


def test_thresholds_point_mass():
    th = solve_thresholds(PriceDistribution.point_mass(2.0), CostModel(0.0, 0.1))
    assert (th.z_low, th.z_high, th.median) == (pytest.approx(1.9), pytest.approx(2.1), 2.0)
    assert th.p == 0.0 and th.round_trip_gain(CostModel(0.0, 0.1)) < 0
    th0 = solve_thresholds(PriceDistribution.point_mass(2.0))
    assert th0.z_low == th0.z_high == th0.median == 2.0


def test_thresholds_discontinuous():
    with pytest.raises(DiscontinuousCdf, match="delta"):
        solve_thresholds(PriceDistribution(((1.0, 0.3), (2.0, 0.7))), CostModel(0.0, 0.1))


@st.composite
def perturbed(draw):
    k = draw(st.integers(1, 4))
    delta = draw(st.floats(0.05, 1.0))
    vals = draw(st.lists(st.floats(delta, 10.0), min_size=k, max_size=k))
    w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k)))
    probs = w / w.sum()
    probs[-1] = 1 - probs[:-1].sum()
    return PriceDistribution(tuple(zip(vals, probs.tolist())), delta)


@settings(max_examples=150, deadline=None)
@given(perturbed(), st.floats(0.0, 0.5), st.floats(0.0, 1.0))
def test_threshold_conditions_hold(d, eps_pi, eps_sigma):
    cm = CostModel(eps_pi, eps_sigma)
    th = solve_thresholds(d, cm)
    # equal tail mass, checked against the distribution directly
    assert abs(d.prob_at_least(th.z_high) - d.cdf(th.z_low)) <= 1e-9
    # equal effective prices
    assert abs((th.z_high * (1 - eps_pi) - eps_sigma) - (th.z_low * (1 + eps_pi) + eps_sigma)) \
        <= 1e-9
    assert th.z_low <= th.v + 1e-12 and th.v <= th.z_high + 1e-12


def test_median_bisection():
    assert median(UNIFORM01) == pytest.approx(0.5, abs=1e-12)


# --- estimators ---------------------------------------------------------------------

def test_estimator_params_and_clone():
    t = EpsMarginTrader(margin=0.2)
    assert t.get_params() == {"margin": 0.2, "mean": None}
    c = clone(t)
    assert c is not t and c.get_params() == t.get_params()
    t.set_params(margin=0.3)
    assert t.margin == 0.3


def test_predict_requires_fit():
    with pytest.raises(NotFittedError):
        BuyLowSellHigh().predict([1.0, 2.0])


def test_blsh_predict_and_score():
    proc = Deterministic((2.0, 1.0, 3.0))
    t = BuyLowSellHigh().fit(proc)
    # means (2, 1, 3), next means (1, 3, 0): sell 2 > 1, buy 1 <= 3, sell 3 > 0
    assert t.predict([2.0, 1.0, 3.0]).tolist() == [-1, 1, -1]
    assert t.score([2.0, 1.0, 3.0]) == pytest.approx(4.0)


def test_predict_horizon_mismatch():
    t = BuyLowSellHigh().fit(Deterministic((1.0, 2.0)))
    with pytest.raises(ValueError):
        t.predict([1.0, 2.0, 3.0])


def test_bbsa_fit_solves_thresholds():
    t = BuyBelowSellAbove().fit(Iid(UNIFORM01, 10), CostModel(0.0, 0.1))
    assert t.thresholds_.z_high == pytest.approx(0.6, abs=1e-10)
    with pytest.raises(TypeError):
        BuyBelowSellAbove().fit(IndependentSequence((UNIFORM01, PriceDistribution.point_mass(1))))
    preset = BuyBelowSellAbove(thresholds=TH).fit(Iid(UNIFORM01, 3))
    assert preset.thresholds_ is TH


def test_eps_margin_uses_iid_mean_everywhere():
    d = PriceDistribution(((1.2, 0.2), (0.95, 0.8)))
    t = EpsMarginTrader(margin=0.1).fit(Iid(d, 3))
    assert t.mean_ == pytest.approx(1.0)
    # the unit is sold only at 1.2 >= 1 + 0.1, never bought back at 0.95 > 0.9
    assert t.predict([0.95, 1.2, 0.95]).tolist() == [0, -1, 0]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=8), st.data())
def test_batch_decisions_match_scalar(x, data):
    proc = Deterministic(tuple(x))
    traders = [BuyLowSellHigh(), EpsMarginTrader(margin=0.3, mean=2.0),
               BuyBelowSellAbove(thresholds=TH)]
    for trader in traders:
        trader = trader.fit(proc)
        holding = np.array(data.draw(st.lists(st.booleans(), min_size=len(x), max_size=len(x))))
        prices = np.array(x)
        buy, sell = trader.decide_batch(holding, prices, 1.5)
        for h, p, b, s in zip(holding, prices, buy, sell):
            a = trader.decide(bool(h), view(float(p), 1.5))
            assert (a == Action.BUY) == b and (a == Action.SELL) == s


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=10))
def test_online_profit_never_beats_prophet(x):
    proc = Deterministic(tuple(x))
    cm = CostModel(0.05, 0.1)
    for trader in (BuyLowSellHigh(), LookaheadTrader("greedy", 1), LookaheadTrader("blsh", 2)):
        assert trader.fit(proc, cm).score(x) <= opt_with_costs_dp(x, cm) + 1e-9


# --- lookahead ----------------------------------------------------------------------

def test_lookahead_capability_checked_at_construction():
    @requires_lookahead(2)
    def peeks_two(holding, v, cm):
        return Action.HOLD

    with pytest.raises(LookaheadViolation):
        LookaheadTrader(peeks_two, k=1)
    assert LookaheadTrader(peeks_two, k=2).k == 2


def test_revealed_prices_guard_index():
    r = RevealedPrices((1.0,))
    assert r[0] == 1.0
    with pytest.raises(LookaheadViolation):
        r[1]


def test_policy_reading_past_lookahead_fails_at_runtime():
    def sneaky(holding, v, cm):
        return Action.SELL if v.lookahead[1] > v.price else Action.HOLD

    t = LookaheadTrader(sneaky, k=1).fit(Deterministic((1.0, 2.0)))
    with pytest.raises(LookaheadViolation):
        t.decide(True, view(1.0, 2.0, (2.0,)))
    with pytest.raises(LookaheadViolation):
        t.decide(True, view(1.0, 2.0, (2.0, 3.0)))   # wrong length


def test_greedy_lookahead_respects_costs():
    t = LookaheadTrader("greedy", 1).fit(None, CostModel(0.0, 0.1))
    assert t.decide(False, view(1.0, lookahead=(1.15,))) == Action.HOLD
    assert t.decide(False, view(1.0, lookahead=(1.25,))) == Action.BUY
    assert t.decide(True, view(1.0, lookahead=(0.9,))) == Action.SELL


@pytest.mark.parametrize("name, cls", [("blsh", BuyLowSellHigh), ("bbsa", BuyBelowSellAbove),
                                       ("eps-margin", EpsMarginTrader),
                                       ("lookahead:3", LookaheadTrader)])
def test_make_trader(name, cls):
    assert isinstance(make_trader(name), cls)
    assert make_trader("lookahead:3").k == 3


@pytest.mark.parametrize("name", ["nope", "lookahead:x", "lookahead:0"])
def test_make_trader_rejects(name):
    with pytest.raises(ValueError):
        make_trader(name)
