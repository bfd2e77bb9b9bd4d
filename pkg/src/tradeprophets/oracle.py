"""Offline prophet profit, per realization and in expectation."""

from __future__ import annotations

import numpy as np

from ._validation import check_prices
from .exceptions import HorizonTooLarge
from .market import NO_COSTS, CostModel, PriceProcess, expected_positive_pair_gap

BRUTE_FORCE_MAX_T = 20


def opt_telescoping(prices, cost_model: CostModel | None = None) -> float:
    """Zero-cost prophet profit ``sum_i (x_i - x_{i-1})_+`` with ``x_0 = 0``."""
    if cost_model is not None and not cost_model.is_zero:
        raise ValueError("the telescoping formula only holds without transaction costs")
    x = check_prices(prices)
    return float(np.maximum(np.diff(x, prepend=0.0), 0.0).sum())


def opt_with_costs_dp(prices, cost_model: CostModel = NO_COSTS, initial_stock=True) -> float:
    """Best offline profit under transaction costs, by a two-state DP.

    ``hold`` and ``flat`` are the best cash balances while holding or not
    holding the unit. Inventory left at the end is worth nothing.
    """
    x = check_prices(prices)
    return float(opt_with_costs_dp_batch(x[None, :], cost_model, initial_stock)[0])


def opt_with_costs_dp_batch(prices, cost_model: CostModel = NO_COSTS, initial_stock=True):
    """Row-wise :func:`opt_with_costs_dp` over a ``(trials, T)`` price matrix."""
    prices = np.asarray(prices, dtype=np.float64)
    n = prices.shape[0]
    hold = np.full(n, 0.0 if initial_stock else -np.inf)
    flat = np.full(n, -np.inf if initial_stock else 0.0)
    a = 1.0 + cost_model.eps_pi
    b = 1.0 - cost_model.eps_pi
    fee = cost_model.eps_sigma
    for t in range(prices.shape[1]):
        x = prices[:, t]
        bought = flat - (a * x + fee)
        sold = hold + (b * x - fee)
        np.maximum(hold, bought, out=hold)
        np.maximum(flat, sold, out=flat)
    return np.maximum(hold, flat)


def opt_bruteforce(prices, cost_model: CostModel = NO_COSTS, initial_stock=True) -> float:
    """Exhaustive maximum over every set of trade times (exponential in ``T``).

    Each subset of steps defines exactly one feasible trade sequence: a trade
    at step ``t`` is a sale if the unit is held at that moment and a purchase
    otherwise.
    """
    x = check_prices(prices)
    T = len(x)
    if T > BRUTE_FORCE_MAX_T:
        raise HorizonTooLarge(f"brute force is limited to T <= {BRUTE_FORCE_MAX_T}, got {T}")
    masks = (np.arange(1 << T)[:, None] >> np.arange(T)[None, :]) & 1
    trades_before = np.cumsum(masks, axis=1) - masks
    holding = (trades_before + int(initial_stock)) % 2 == 1
    cash = np.where(holding, cost_model.sell_price(x), -cost_model.buy_price(x))
    return float((masks * cash).sum(axis=1).max())


def expected_opt_zero_cost(process: PriceProcess) -> float:
    """``sum_i E[(X_i - X_{i-1})_+]`` with ``X_0 = 0``; exact for independent steps."""
    if process.adaptive:
        raise TypeError("expected OPT has no closed form for adaptive processes")
    return process.sum_over_steps(expected_positive_pair_gap)


def expected_opt_upper_bound_iid_costs(d, cost_model: CostModel, T: int, th=None) -> float:
    """Upper bound ``v + pT [v_H (1 - eps_pi) - v_L (1 + eps_pi) - 2 eps_sigma]``.

    This bounds a relaxed prophet that may also trade against the fixed
    price ``v`` within a round, so it dominates the true prophet.
    """
    if th is None:
        from .traders import solve_thresholds
        th = solve_thresholds(d, cost_model)
    return th.v + th.p * T * th.round_trip_gain(cost_model)
