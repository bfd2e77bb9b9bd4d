"""Online traders, their decision rules, and the threshold solver.

The traders follow the scikit-learn estimator conventions: constructor
arguments are hyper-parameters (``get_params``/``set_params``/``clone`` work),
``fit`` learns what the rule needs from a price process (means, thresholds),
and ``predict`` replays the online rule over a realized price path.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_prices, check_scalar
from .exceptions import DiscontinuousCdf, LookaheadViolation
from .market import (NO_COSTS, CostModel, Iid, IndependentSequence, PeriodicSequence,
                     PriceDistribution,
                     PriceProcess)

BRACKET_WIDTH = 1e-12
# a step-function residual above this means the CDF jumped across the root
DISCONTINUITY_TOL = 1e-9


class Action(enum.IntEnum):
    SELL = -1
    HOLD = 0
    BUY = 1


class Trade(NamedTuple):
    step: int
    action: Action
    price: float


@dataclass
class TraderState:
    """Inventory flag, running cash and executed trades of one episode."""

    holding: bool = True
    cash: float = 0.0
    trade_log: list = field(default_factory=list)


class RevealedPrices(tuple):
    """Lookahead window; reading past its end raises :class:`LookaheadViolation`."""

    def __getitem__(self, i):
        try:
            return super().__getitem__(i)
        except IndexError:
            raise LookaheadViolation(
                f"price {i} ahead requested but only {len(self)} are revealed") from None


@dataclass(frozen=True)
class MarketView:
    """What an online trader sees at one step.

    ``next_mean`` is the expected price of the next step (0 at the last step).
    ``lookahead`` holds the revealed future prices for lookahead traders.
    """

    step: int
    price: float
    next_mean: float = 0.0
    lookahead: tuple = ()


# --------------------------------------------------------------------------
# decision rules


def blsh_decide(holding: bool, view: MarketView) -> Action:
    """Sell if the price beats tomorrow's mean; buy if it does not exceed it."""
    if holding:
        return Action.SELL if view.price > view.next_mean else Action.HOLD
    return Action.BUY if view.price <= view.next_mean else Action.HOLD


def bbsa_decide(holding: bool, view: MarketView, th: "Thresholds") -> Action:
    if holding:
        return Action.SELL if view.price >= th.z_high else Action.HOLD
    return Action.BUY if view.price <= th.z_low else Action.HOLD


def eps_margin_decide(holding: bool, view: MarketView, margin: float,
                      mean: float | None = None) -> Action:
    """BLSH with a dead band of half-width ``margin`` around the reference mean."""
    ref = view.next_mean if mean is None else mean
    if holding:
        return Action.SELL if view.price >= ref + margin else Action.HOLD
    return Action.BUY if view.price <= ref - margin else Action.HOLD


# --------------------------------------------------------------------------
# thresholds


@dataclass(frozen=True)
class Thresholds:
    """Buy/sell triggers with equal tail mass and equal effective price ``v``.

    ``p = Pr[X <= z_low] = Pr[X >= z_high]``; ``v_low``/``v_high`` are the
    conditional means of the two tails. When ``p == 0`` the tails are empty
    and ``v_low``/``v_high`` fall back to the thresholds themselves.
    """

    z_low: float
    z_high: float
    v: float
    p: float
    v_low: float
    v_high: float
    median: float
    residual_prob: float = 0.0
    residual_price: float = 0.0

    def round_trip_gain(self, cost_model: CostModel = NO_COSTS) -> float:
        """``v_high (1 - eps_pi) - v_low (1 + eps_pi) - 2 eps_sigma``."""
        return (self.v_high * (1 - cost_model.eps_pi) - self.v_low * (1 + cost_model.eps_pi)
                - 2 * cost_model.eps_sigma)

    def to_dict(self):
        return {k: float(getattr(self, k)) for k in self.__dataclass_fields__}


def bisect_decreasing(f, lo, hi, width=BRACKET_WIDTH, max_iter=400):
    """Root of a nonincreasing ``f`` with ``f(lo) >= 0 >= f(hi)``.

    Halves the bracket until it is narrower than ``width`` (or no double lies
    strictly inside it) and returns the midpoint. Stops early on an exact zero.
    """
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= width or mid <= lo or mid >= hi:
            return mid
        fm = f(mid)
        if fm > 0:
            lo = mid
        elif fm < 0:
            hi = mid
        else:
            return mid
    return 0.5 * (lo + hi)


def median(d: PriceDistribution) -> float:
    return bisect_decreasing(lambda h: 0.5 - d.cdf(h), 0.0, d.support_max + 1.0)


def solve_thresholds(d: PriceDistribution, cost_model: CostModel = NO_COSTS) -> Thresholds:
    """Solve ``Pr[X >= z_H] = Pr[X <= z_L]`` and ``z_H(1-eps_pi) - eps_sigma = z_L(1+eps_pi) + eps_sigma``.

    Writing ``z_L = l(h) = (h (1 - eps_pi) - 2 eps_sigma) / (1 + eps_pi)`` turns
    the pair into one equation ``f(h) = Pr[X >= h] - Pr[X <= l(h)] = 0`` with
    ``f`` nonincreasing, solved by bisection on
    ``[0, max support + 2 eps_sigma / (1 - eps_pi) + 1]``.

    Raises:
        DiscontinuousCdf: ``d`` has several unperturbed atoms and the CDF jump
            straddles the root. Add a perturbation ``delta > 0``.
    """
    a = 1.0 + cost_model.eps_pi
    b = 1.0 - cost_model.eps_pi
    s = cost_model.eps_sigma
    m = None if d.is_point_mass else median(d)

    if d.is_point_mass:
        c = m = float(d.values[0])
        z_high, z_low = (c + s) / b, (c - s) / a
    else:
        def f(h):
            return d.prob_at_least(h) - d.cdf((h * b - 2 * s) / a)

        z_high = bisect_decreasing(f, 0.0, d.support_max + 2 * s / b + 1.0)
        z_low = (z_high * b - 2 * s) / a

    p_high = float(d.prob_at_least(z_high))
    p_low = float(d.cdf(z_low))
    if abs(p_high - p_low) > DISCONTINUITY_TOL:
        raise DiscontinuousCdf(
            f"no thresholds balance the tails (Pr[X >= z_H] = {p_high:.6g}, "
            f"Pr[X <= z_L] = {p_low:.6g}); add a perturbation delta > 0")
    p = 0.5 * (p_high + p_low)
    v = z_high * b - s
    v_low = d.conditional_mean_below(z_low) if p_low > 0 else z_low
    v_high = d.conditional_mean_above(z_high) if p_high > 0 else z_high
    if d.is_point_mass:
        v_low = v_high = float(d.values[0])
    return Thresholds(z_low=z_low, z_high=z_high, v=v, p=p, v_low=v_low, v_high=v_high,
                      median=m, residual_prob=p_high - p_low,
                      residual_price=(z_high * b - s) - (z_low * a + s))


# --------------------------------------------------------------------------
# estimators


def _iid_distribution(process):
    if isinstance(process, PriceDistribution):
        return process
    if isinstance(process, Iid):
        return process.distribution
    if isinstance(process, IndependentSequence) and len(set(process.dists)) == 1:
        return process.dists[0]
    if isinstance(process, PeriodicSequence) and len(set(process.pattern)) == 1:
        return process.pattern[0]
    raise TypeError("this trader needs an i.i.d. price process or a single distribution")


class BaseTrader(BaseEstimator):
    """Shared machinery: fitting to a process and replaying realized paths."""

    vectorized = True

    def fit(self, process=None, cost_model: CostModel = NO_COSTS):
        self.cost_model_ = cost_model
        if isinstance(process, PriceProcess) and not process.adaptive:
            self.next_means_ = process.next_means()
        else:
            self.next_means_ = None
        return self

    def decide(self, holding: bool, view: MarketView) -> Action:
        raise NotImplementedError

    def decide_batch(self, holding, prices, next_mean):
        """Vectorized ``decide``: boolean ``(buy, sell)`` masks over trials."""
        raise NotImplementedError

    def _views(self, prices):
        x = check_prices(prices)
        T = len(x)
        if self.next_means_ is not None and len(self.next_means_) == T:
            nm = self.next_means_
        else:
            raise ValueError(f"fit on a process of horizon {T} before predicting a path of "
                             f"length {T}")
        for t in range(T):
            yield MarketView(step=t + 1, price=float(x[t]), next_mean=float(nm[t]))

    def predict(self, prices, initial_stock=True):
        """Actions taken along a realized path (``+1`` buy, ``-1`` sell, ``0`` hold)."""
        check_is_fitted(self)
        holding = initial_stock
        out = []
        for view in self._views(prices):
            act = self.decide(holding, view)
            if act == Action.BUY:
                holding = True
            elif act == Action.SELL:
                holding = False
            out.append(int(act))
        return np.array(out, dtype=np.int8)

    def score(self, prices, initial_stock=True):
        """Realized profit of the fitted rule on ``prices``."""
        x = check_prices(prices)
        acts = self.predict(x, initial_stock=initial_stock)
        cm = self.cost_model_
        return float(np.sum(np.where(acts == Action.SELL, cm.sell_price(x), 0.0))
                     - np.sum(np.where(acts == Action.BUY, cm.buy_price(x), 0.0)))


class BuyLowSellHigh(BaseTrader):
    """Sell when today's price exceeds tomorrow's mean, buy when it does not."""

    def decide(self, holding, view):
        return blsh_decide(holding, view)

    def decide_batch(self, holding, prices, next_mean):
        sell = holding & (prices > next_mean)
        buy = ~holding & (prices <= next_mean)
        return buy, sell


class BuyBelowSellAbove(BaseTrader):
    """Threshold trader for i.i.d. prices under transaction costs.

    Parameters
    ----------
    thresholds : Thresholds, optional
        Use these triggers instead of solving them from the fitted distribution.
    """

    def __init__(self, thresholds: Thresholds | None = None):
        self.thresholds = thresholds

    def fit(self, process=None, cost_model: CostModel = NO_COSTS):
        super().fit(process, cost_model)
        if self.thresholds is not None:
            self.thresholds_ = self.thresholds
        else:
            self.thresholds_ = solve_thresholds(_iid_distribution(process), cost_model)
        return self

    def decide(self, holding, view):
        check_is_fitted(self, "thresholds_")
        return bbsa_decide(holding, view, self.thresholds_)

    def decide_batch(self, holding, prices, next_mean):
        th = self.thresholds_
        return ~holding & (prices <= th.z_low), holding & (prices >= th.z_high)

    def _views(self, prices):
        x = check_prices(prices)
        for t in range(len(x)):
            yield MarketView(step=t + 1, price=float(x[t]))


class EpsMarginTrader(BaseTrader):
    """BLSH with a dead band: buy at ``mean - margin``, sell at ``mean + margin``.

    When fitted to an i.i.d. process (or given ``mean``) the reference is that
    fixed mean at every step; otherwise the step's ``next_mean`` is used.
    """

    def __init__(self, margin: float = 0.1, mean: float | None = None):
        self.margin = margin
        self.mean = mean

    def fit(self, process=None, cost_model: CostModel = NO_COSTS):
        super().fit(process, cost_model)
        check_scalar(self.margin, "margin", lo=0.0)
        if self.mean is not None:
            self.mean_ = float(self.mean)
        else:
            try:
                self.mean_ = _iid_distribution(process).mean()
            except TypeError:
                self.mean_ = None
        return self

    def decide(self, holding, view):
        return eps_margin_decide(holding, view, self.margin, getattr(self, "mean_", self.mean))

    def decide_batch(self, holding, prices, next_mean):
        ref = next_mean if self.mean_ is None else self.mean_
        return ~holding & (prices <= ref - self.margin), holding & (prices >= ref + self.margin)

    def _views(self, prices):
        if self.mean_ is None:
            yield from super()._views(prices)
            return
        x = check_prices(prices)
        for t in range(len(x)):
            yield MarketView(step=t + 1, price=float(x[t]), next_mean=self.mean_)


# --------------------------------------------------------------------------
# lookahead traders


def requires_lookahead(k: int):
    """Declare how many future prices a policy reads."""
    def deco(fn):
        fn.lookahead = k
        return fn
    return deco


@requires_lookahead(1)
def blsh_lookahead_policy(holding, view, cost_model=NO_COSTS):
    """BLSH with the revealed next price standing in for the next mean."""
    return blsh_decide(holding, replace(view, next_mean=view.lookahead[0]))


@requires_lookahead(1)
def greedy_lookahead_policy(holding, view, cost_model=NO_COSTS):
    """Buy if some revealed price would sell at a profit; sell ahead of a drop."""
    best = max(view.lookahead)
    if holding:
        return Action.SELL if view.price > best else Action.HOLD
    if cost_model.sell_price(best) > cost_model.buy_price(view.price):
        return Action.BUY
    return Action.HOLD


POLICIES = {"blsh": blsh_lookahead_policy, "greedy": greedy_lookahead_policy}


class LookaheadTrader(BaseTrader):
    """Wrap a policy that sees the next ``k`` realized prices and nothing else.

    ``policy(holding, view, cost_model)`` receives a view whose ``lookahead``
    has exactly ``k`` prices. A policy declaring (via
    :func:`requires_lookahead`) more than ``k`` prices is rejected here.
    """

    vectorized = False

    def __init__(self, policy: str | Callable = "greedy", k: int = 1):
        self.policy = policy
        self.k = k
        check_scalar(k, "k", lo=1, integer=True)
        needed = getattr(self._policy_fn(), "lookahead", 1)
        if needed > k:
            raise LookaheadViolation(f"policy reads {needed} prices ahead but k = {k}")

    def _policy_fn(self):
        if callable(self.policy):
            return self.policy
        try:
            return POLICIES[self.policy]
        except KeyError:
            raise ValueError(f"unknown lookahead policy {self.policy!r}; "
                             f"choose from {sorted(POLICIES)}") from None

    def fit(self, process=None, cost_model: CostModel = NO_COSTS):
        super().fit(process, cost_model)
        self.policy_ = self._policy_fn()
        return self

    def decide(self, holding, view):
        if len(view.lookahead) != self.k:
            raise LookaheadViolation(f"expected {self.k} revealed prices, got {len(view.lookahead)}")
        view = replace(view, lookahead=RevealedPrices(view.lookahead))
        cm = getattr(self, "cost_model_", NO_COSTS)
        return Action(self.policy_(holding, view, cm))

    def _views(self, prices):
        x = check_prices(prices)
        padded = np.concatenate([x, np.zeros(self.k)])
        for t in range(len(x)):
            ahead = tuple(float(v) for v in padded[t + 1:t + 1 + self.k])
            yield MarketView(step=t + 1, price=float(x[t]), next_mean=ahead[0], lookahead=ahead)


def make_trader(name: str, **params) -> BaseTrader:
    """Build a trader from its config name: ``blsh``, ``bbsa``, ``eps-margin``, ``lookahead:<k>``."""
    if name == "blsh":
        return BuyLowSellHigh()
    if name == "bbsa":
        return BuyBelowSellAbove(**params)
    if name == "eps-margin":
        return EpsMarginTrader(**params)
    if name.startswith("lookahead:"):
        try:
            k = int(name.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad lookahead trader name {name!r}") from None
        return LookaheadTrader(k=k, **params)
    raise ValueError(f"unknown trader {name!r}")
