"""Episode execution, profit accounting and seeded Monte Carlo batches.

Conventions shared by every run:

* the trader (and the prophet) start holding one unit obtained for free,
  except against adaptive processes, which start empty;
* at step ``i`` the trader sees the price ``x_i`` and ``mu_{i+1}``, with
  ``mu_{T+1} = 0``;
* inventory left after step ``T`` expires worthless (no terminal fee).

Trial ``j`` of a batch with master seed ``s`` uses the per-trial seed
``trial_seed(s, j)``, a SplitMix64 hash, and its prices depend on nothing
else. Replaying that seed through :func:`run_episode` reproduces the trial.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import clone

from . import _rng
from .exceptions import InfeasibleAction
from .market import NO_COSTS, CostModel, PriceProcess
from .oracle import opt_with_costs_dp
from .traders import Action, BaseTrader, LookaheadTrader, MarketView, Trade, TraderState

SCHEMA_VERSION = 1
_TRIALS_PER_CHUNK = 1 << 18

trial_seed = _rng.trial_seed
trial_seeds = _rng.trial_seeds


@dataclass
class EpisodeResult:
    realization: np.ndarray
    trade_log: list
    alg_profit: float
    opt_profit: float
    seed: int
    holding: np.ndarray = field(repr=False, default=None)

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION, "seed": int(self.seed),
                "alg_profit": self.alg_profit, "opt_profit": self.opt_profit,
                "realization": [float(x) for x in self.realization],
                "trades": [[t.step, int(t.action), t.price] for t in self.trade_log]}


def _execute(state: TraderState, action, step, price, cm):
    if action == Action.BUY:
        if state.holding:
            raise InfeasibleAction(f"step {step}: buy while already holding")
        paid = cm.buy_price(price)
        state.cash -= paid
        state.holding = True
        state.trade_log.append(Trade(step, Action.BUY, float(paid)))
    elif action == Action.SELL:
        if not state.holding:
            raise InfeasibleAction(f"step {step}: sell with nothing in inventory")
        got = cm.sell_price(price)
        state.cash += got
        state.holding = False
        state.trade_log.append(Trade(step, Action.SELL, float(got)))
    elif action != Action.HOLD:
        raise InfeasibleAction(f"step {step}: unknown action {action!r}")


def _prepare(process, trader, cost_model, fit):
    if fit:
        trader = clone(trader).fit(process, cost_model)
    return trader


def run_episode(process: PriceProcess, trader: BaseTrader, cost_model: CostModel | None = None,
                seed: int = 0, *, fit=True) -> EpisodeResult:
    """Play one episode of ``trader`` against ``process``.

    ``trader`` is cloned and fitted to ``process`` unless ``fit=False`` (then
    it must already be fitted). ``seed`` is the per-trial seed.

    Raises:
        InfeasibleAction: the trader bought while holding or sold while empty.
    """
    if process.adaptive:
        return _run_adaptive(process, trader, cost_model, seed, fit)
    cm = NO_COSTS if cost_model is None else cost_model
    trader = _prepare(process, trader, cm, fit)
    prices = process.sample(np.array([seed], dtype=np.uint64))[0]
    next_means = process.next_means()
    T = len(prices)
    k = trader.k if isinstance(trader, LookaheadTrader) else 0
    padded = np.concatenate([prices, np.zeros(k)])
    state = TraderState(holding=process.initial_stock)
    holding = np.empty(T, dtype=bool)
    for t in range(T):
        holding[t] = state.holding
        ahead = tuple(float(v) for v in padded[t + 1:t + 1 + k])
        view = MarketView(step=t + 1, price=float(prices[t]),
                          next_mean=float(next_means[t]), lookahead=ahead)
        _execute(state, trader.decide(state.holding, view), t + 1, prices[t], cm)
    opt = opt_with_costs_dp(prices, cm, process.initial_stock)
    return EpisodeResult(prices, state.trade_log, float(state.cash), opt, int(seed), holding)


def _run_adaptive(process, trader, cost_model, seed, fit):
    adversary = process.make_adversary()
    cm = adversary.cost_model
    if cost_model is not None and cost_model != cm:
        raise ValueError(f"the adaptive adversary fixes the cost model to {cm}")
    if not isinstance(trader, LookaheadTrader):
        raise TypeError("only lookahead traders can face an adaptive adversary "
                        "(wrap BLSH as LookaheadTrader('blsh'))")
    if trader.k > adversary.k:
        raise ValueError(f"trader wants {trader.k} revealed prices, adversary reveals {adversary.k}")
    trader = _prepare(process, trader, cm, fit)
    state = TraderState(holding=process.initial_stock)
    prices, holding = [], []
    step = 0
    while not adversary.done:
        last = state.trade_log[-1].price if state.trade_log else None
        price, ahead = adversary.next_step(state.holding, last)
        step += 1
        holding.append(state.holding)
        prices.append(price)
        ahead = ahead[:trader.k]
        view = MarketView(step=step, price=price, next_mean=ahead[0], lookahead=ahead)
        _execute(state, trader.decide(state.holding, view), step, price, cm)
    prices = np.array(prices)
    opt = opt_with_costs_dp(prices, cm, process.initial_stock)
    return EpisodeResult(prices, state.trade_log, float(state.cash), opt, int(seed),
                         np.array(holding))


@dataclass
class BatchStats:
    """Per-trial outcomes of a batch plus their summary statistics."""

    master_seed: int
    seeds: np.ndarray
    alg: np.ndarray
    opt: np.ndarray
    n_buys: np.ndarray
    n_sells: np.ndarray
    holding_rate: np.ndarray = field(repr=False, default=None)

    @property
    def trials(self):
        return len(self.alg)

    @staticmethod
    def _se(x):
        return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0

    @property
    def alg_mean(self):
        return float(np.mean(self.alg))

    @property
    def opt_mean(self):
        return float(np.mean(self.opt))

    @property
    def alg_se(self):
        return self._se(self.alg)

    @property
    def opt_se(self):
        return self._se(self.opt)

    @property
    def ratio(self):
        return self.opt_mean / self.alg_mean if self.alg_mean != 0 else math.inf

    def ratio_ci(self, z=1.96):
        """Delta-method interval for ``mean(opt) / mean(alg)`` (paired trials)."""
        a, o = self.alg_mean, self.opt_mean
        if a == 0 or self.trials < 2:
            return (self.ratio, self.ratio)
        cov = np.cov(self.opt, self.alg, ddof=1)
        r = o / a
        var = (cov[0, 0] - 2 * r * cov[0, 1] + r * r * cov[1, 1]) / (a * a * self.trials)
        half = z * math.sqrt(max(var, 0.0))
        return (r - half, r + half)

    def summary(self):
        lo, hi = self.ratio_ci()
        return {"schema_version": SCHEMA_VERSION, "trials": self.trials,
                "master_seed": int(self.master_seed),
                "alg_mean": self.alg_mean, "alg_se": self.alg_se,
                "opt_mean": self.opt_mean, "opt_se": self.opt_se,
                "ratio": self.ratio, "ratio_ci_low": lo, "ratio_ci_high": hi,
                "trades_mean": float(np.mean(self.n_buys + self.n_sells))}

    def rows(self):
        for j in range(self.trials):
            yield {"trial": j, "seed": int(self.seeds[j]),
                   "alg_profit": float(self.alg[j]), "opt_profit": float(self.opt[j])}

    def to_json(self, with_rows=True):
        out = self.summary()
        if with_rows:
            out["rows"] = list(self.rows())
        return json.dumps(out, indent=2)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["trial", "seed", "alg_profit", "opt_profit"],
                           lineterminator="\n")
        w.writeheader()
        for row in self.rows():
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return buf.getvalue()


def monte_carlo(process: PriceProcess, trader: BaseTrader, cost_model: CostModel = NO_COSTS,
                trials: int = 1000, master_seed: int = 0, *, chunk_size=None) -> BatchStats:
    """Run ``trials`` independent episodes and collect the per-trial profits.

    ``trader`` acts as a factory: it is cloned and fitted once, then applied
    to every trial. Vectorized traders run all trials of a chunk in lockstep;
    others fall back to :func:`run_episode` per trial. Results do not depend
    on ``chunk_size``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seeds = trial_seeds(master_seed, trials)
    if process.adaptive or not trader.vectorized:
        return _monte_carlo_slow(process, trader, cost_model, seeds, master_seed)

    cm = cost_model
    fitted = clone(trader).fit(process, cm)
    T = process.horizon
    nm = process.next_means()
    if chunk_size is None:
        chunk_size = _TRIALS_PER_CHUNK
    alg = np.empty(trials)
    opt = np.empty(trials)
    n_buys = np.empty(trials, dtype=np.int64)
    n_sells = np.empty(trials, dtype=np.int64)
    held = np.zeros(T, dtype=np.int64)
    buy_scale, fee = 1.0 + cm.eps_pi, cm.eps_sigma
    sell_scale = 1.0 - cm.eps_pi
    init = process.initial_stock
    for start in range(0, trials, chunk_size):
        stop = min(trials, start + chunk_size)
        chunk_seeds = seeds[start:stop]
        n = stop - start
        holding = np.full(n, init, dtype=bool)
        cash = np.zeros(n)
        nb = np.zeros(n, dtype=np.int64)
        ns = np.zeros(n, dtype=np.int64)
        # prophet: best cash while holding / not holding (two-state DP)
        p_hold = np.full(n, 0.0 if init else -np.inf)
        p_flat = np.full(n, -np.inf if init else 0.0)
        for t in range(T):
            held[t] += np.count_nonzero(holding)
            xt = process.sample_step(chunk_seeds, t)
            buy, sell = fitted.decide_batch(holding, xt, nm[t])
            bid = sell_scale * xt - fee
            ask = buy_scale * xt + fee
            cash += np.where(sell, bid, 0.0)
            cash -= np.where(buy, ask, 0.0)
            holding ^= buy | sell
            nb += buy
            ns += sell
            bought = p_flat - ask
            np.maximum(p_flat, p_hold + bid, out=p_flat)
            np.maximum(p_hold, bought, out=p_hold)
        alg[start:stop] = cash
        n_buys[start:stop] = nb
        n_sells[start:stop] = ns
        opt[start:stop] = np.maximum(p_hold, p_flat)
    return BatchStats(master_seed, seeds, alg, opt, n_buys, n_sells, held / trials)


def _monte_carlo_slow(process, trader, cost_model, seeds, master_seed):
    trials = len(seeds)
    cm = cost_model
    if process.adaptive:
        cm = None if cost_model is None or cost_model.is_zero else cost_model
    episodes = [run_episode(process, trader, cm, int(s)) for s in seeds]
    alg = np.array([e.alg_profit for e in episodes])
    opt = np.array([e.opt_profit for e in episodes])
    n_buys = np.array([sum(t.action == Action.BUY for t in e.trade_log) for e in episodes])
    n_sells = np.array([sum(t.action == Action.SELL for t in e.trade_log) for e in episodes])
    lengths = {len(e.holding) for e in episodes}
    rate = (np.mean([e.holding for e in episodes], axis=0) if len(lengths) == 1 else None)
    return BatchStats(master_seed, seeds, alg, opt, n_buys, n_sells, rate)
