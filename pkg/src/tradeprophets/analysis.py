"""Closed-form expected profits, bound verification and ratio estimation."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import clone

from .adversary import gen_appendix_failure, gen_phase, gen_prop_adversarial, gen_prop_iid
from .engine import monte_carlo, run_episode
from .exceptions import BoundViolated, DegenerateFit
from .market import (NO_COSTS, ZERO, CostModel, Iid, PriceDistribution, PriceProcess,
                     expected_positive_part_gap, random_distribution,
                     random_independent_sequence)
from .oracle import expected_opt_upper_bound_iid_costs, expected_opt_zero_cost
from .traders import (BuyBelowSellAbove, BuyLowSellHigh, EpsMarginTrader, LookaheadTrader,
                      solve_thresholds)

EQUAL_MEANS_TOL = 1e-12
BOUND_RTOL = 1e-9


def _require_zero_cost(cost_model):
    if cost_model is not None and not cost_model.is_zero:
        raise ValueError("this closed form holds only without transaction costs")


def expected_alg_blsh(process: PriceProcess, cost_model: CostModel | None = None) -> float:
    """Exact expected BLSH profit ``sum_i E[(mu_i - X_{i-1})_+]`` (``X_0 = 0``)."""
    _require_zero_cost(cost_model)
    if process.adaptive:
        raise TypeError("no closed form for adaptive processes")
    return process.sum_over_steps(lambda prev, cur: expected_positive_part_gap(prev, cur.mean()))


def best_online_upper_bound(process: PriceProcess, cost_model: CostModel | None = None) -> float:
    """Largest expected profit any online trader can reach (zero costs).

    Numerically the same as :func:`expected_alg_blsh`: BLSH is optimal online.
    """
    return expected_alg_blsh(process, cost_model)


def best_online_value(process: PriceProcess, cost_model: CostModel = NO_COSTS,
                      initial_stock=True) -> float:
    """Optimal online expected profit by backward induction over ``(step, holding)``.

    Requires unperturbed distributions. ``hold[i]``/``flat[i]`` are the optimal
    expected future profits entering step ``i`` with or without the unit.
    """
    hold = flat = 0.0
    for d in reversed(process.distributions()):
        if d.delta:
            raise ValueError("backward induction needs unperturbed (discrete) distributions")
        x, p = d.values, d.probs
        new_hold = p @ np.maximum(hold, cost_model.sell_price(x) + flat)
        new_flat = p @ np.maximum(flat, hold - cost_model.buy_price(x))
        hold, flat = float(new_hold), float(new_flat)
    return hold if initial_stock else flat


def expected_profit_enumerated(process: PriceProcess, trader, cost_model: CostModel = NO_COSTS,
                               max_paths=200_000) -> float:
    """Exact expected profit of a (vectorized) trader by enumerating every path."""
    dists = process.distributions()
    if any(d.delta for d in dists):
        raise ValueError("enumeration needs unperturbed distributions")
    n_paths = math.prod(len(d.atoms) for d in dists)
    if n_paths > max_paths:
        raise ValueError(f"{n_paths} paths exceed max_paths={max_paths}")
    idx = np.array(list(itertools.product(*(range(len(d.atoms)) for d in dists))))
    prices = np.column_stack([d.values[idx[:, t]] for t, d in enumerate(dists)])
    weights = np.prod(np.column_stack([d.probs[idx[:, t]] for t, d in enumerate(dists)]), axis=1)
    fitted = clone(trader).fit(process, cost_model)
    nm = process.next_means()
    holding = np.full(len(prices), process.initial_stock, dtype=bool)
    cash = np.zeros(len(prices))
    for t in range(len(dists)):
        buy, sell = fitted.decide_batch(holding, prices[:, t], nm[t])
        cash += np.where(sell, cost_model.sell_price(prices[:, t]), 0.0)
        cash -= np.where(buy, cost_model.buy_price(prices[:, t]), 0.0)
        holding ^= buy | sell
    return float(weights @ cash)


def bbsa_expected_profit_lower_bound(d: PriceDistribution, cost_model: CostModel, T: int,
                                     th=None) -> float:
    """``(pT / 2) [v_H (1 - eps_pi) - v_L (1 + eps_pi) - 2 eps_sigma]``."""
    th = solve_thresholds(d, cost_model) if th is None else th
    return 0.5 * th.p * T * th.round_trip_gain(cost_model)


@dataclass
class VerificationReport:
    instance: str
    T: int
    e_alg: float
    e_opt: float
    bound: float
    slack: float
    passed: bool
    factor: float = 3.0

    def to_dict(self):
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out


def has_equal_means(process: PriceProcess) -> bool:
    mus = process.means()
    return bool(np.ptp(mus) <= EQUAL_MEANS_TOL * max(1.0, float(np.max(np.abs(mus)))))


def verify_upper_bound_theorem(process: PriceProcess, instance: str = "",
                               raise_on_violation=True) -> VerificationReport:
    """Check ``E[OPT] <= 3 E[BLSH]`` (``2 E[BLSH]`` when all means agree).

    Raises:
        BoundViolated: the inequality fails; the report carries the instance.
    """
    e_alg = expected_alg_blsh(process)
    e_opt = expected_opt_zero_cost(process)
    factor = 2.0 if has_equal_means(process) else 3.0
    bound = factor * e_alg
    ok = e_opt <= bound * (1 + BOUND_RTOL) + 1e-12
    rep = VerificationReport(instance or type(process).__name__, process.horizon, e_alg, e_opt,
                             bound, bound - e_opt, ok, factor)
    if not ok and raise_on_violation:
        dump = process.to_dict() if hasattr(process, "to_dict") else repr(process)
        raise BoundViolated(f"E[OPT]={e_opt!r} > {factor} * E[ALG]={bound!r} on {dump}", rep)
    return rep


def theorem1_sweep(n_instances: int, seed: int, *, max_T=50, max_atoms=4, high=10.0,
                   raise_on_violation=True):
    """Random zero-cost instances: independent sequences and equal-mean i.i.d. ones.

    Returns ``(general_reports, iid_reports)``.
    """
    rng = np.random.default_rng(seed)
    general, iid = [], []
    for j in range(n_instances):
        T = int(rng.integers(1, max_T + 1))
        proc = random_independent_sequence(rng, T, max_atoms, high=high)
        general.append(verify_upper_bound_theorem(proc, f"random-{j}", raise_on_violation))
    for j in range(n_instances):
        T = int(rng.integers(1, max_T + 1))
        proc = Iid(random_distribution(rng, max_atoms, high=high), T)
        iid.append(verify_upper_bound_theorem(proc, f"random-iid-{j}",
                                              raise_on_violation))
    return general, iid


def lower_bound_adversarial(eps: float, T: int) -> dict:
    """Closed-form ratio of prophet to best online profit on the alternating family."""
    proc = gen_prop_adversarial(eps, T)
    e_opt = expected_opt_zero_cost(proc)
    e_alg = best_online_upper_bound(proc)
    proof_bound = (3 - 6 * eps) / (1 + 2 / (eps * T))
    return {"instance": "prop-adv", "eps": eps, "T": T, "e_opt": e_opt, "e_alg": e_alg,
            "ratio": e_opt / e_alg, "bound": proof_bound,
            "pass": e_opt / e_alg >= proof_bound}


def lower_bound_iid(eps: float, T: int) -> dict:
    """Closed-form ratio on the i.i.d. family, against ``(eps/2 - eps^2/4) T / (1/2 + T eps/4)``."""
    proc = gen_prop_iid(eps, T)
    e_opt = expected_opt_zero_cost(proc)
    e_alg = best_online_upper_bound(proc)
    proof_bound = (eps / 2 - eps ** 2 / 4) * T / (0.5 + T * eps / 4)
    return {"instance": "prop-iid", "eps": eps, "T": T, "e_opt": e_opt, "e_alg": e_alg,
            "ratio": e_opt / e_alg, "bound": proof_bound,
            "pass": e_opt / e_alg >= proof_bound}


def lower_bound_iid_monte_carlo(eps: float, T: int, trials: int, seed: int, z=4.0) -> dict:
    """Simulate BLSH on the i.i.d. family and compare with the closed forms."""
    closed = lower_bound_iid(eps, T)
    stats = monte_carlo(gen_prop_iid(eps, T), BuyLowSellHigh(), NO_COSTS, trials, seed)
    lo, hi = stats.ratio_ci(z)
    out = {"trials": trials, "seed": seed, **stats.summary(), "ratio_ci_low": lo,
           "ratio_ci_high": hi}
    out["pass"] = bool(abs(stats.alg_mean - closed["e_alg"]) <= z * stats.alg_se
                       and abs(stats.opt_mean - closed["e_opt"]) <= z * stats.opt_se
                       and lo <= closed["ratio"] <= hi)
    return out


def theorem2_chain(d: PriceDistribution, cost_model: CostModel, T: int, trials: int,
                   seed: int, z=4.0) -> dict:
    """Certify the i.i.d.-with-costs guarantee through its two profit bounds.

    (a) simulated BBSA profit >= (pT/2)[...] - z SE;
    (b) simulated prophet profit <= v + pT[...] + z SE;
    (c) mean(OPT - 2 ALG) <= v + z SE of the paired difference.
    """
    th = solve_thresholds(d, cost_model)
    stats = monte_carlo(Iid(d, T), BuyBelowSellAbove(thresholds=th), cost_model, trials, seed)
    alg_lb = bbsa_expected_profit_lower_bound(d, cost_model, T, th)
    opt_ub = expected_opt_upper_bound_iid_costs(d, cost_model, T, th)
    diff = stats.opt - 2 * stats.alg
    diff_se = float(np.std(diff, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    out = {
        "T": T, "trials": trials, "eps_pi": cost_model.eps_pi, "eps_sigma": cost_model.eps_sigma,
        "thresholds": th.to_dict(),
        "alg_mean": stats.alg_mean, "alg_se": stats.alg_se, "alg_lower_bound": alg_lb,
        "opt_mean": stats.opt_mean, "opt_se": stats.opt_se, "opt_upper_bound": opt_ub,
        "gap_mean": float(diff.mean()), "gap_se": diff_se, "v": th.v,
        "ratio": stats.ratio,
        "ratio_allowance": 2 + th.v / stats.alg_mean if stats.alg_mean > 0 else math.inf,
    }
    out["a"] = stats.alg_mean >= alg_lb - z * stats.alg_se
    out["b"] = stats.opt_mean <= opt_ub + z * stats.opt_se
    out["c"] = out["gap_mean"] <= th.v + z * diff_se
    out["pass"] = out["a"] and out["b"] and out["c"]
    return out


def phase_adversary_check(eps: float, phases: int, k: int = 1) -> dict:
    """Run the phase adversary against BLSH-as-lookahead and the greedy lookahead trader."""
    proc = gen_phase(eps, phases, k)
    out = {"eps": eps, "phases": phases, "k": k, "prophet_target": phases * eps / 2}
    ok = True
    for name in ("blsh", "greedy"):
        ep = run_episode(proc, LookaheadTrader(name, k))
        out[name] = {"alg_profit": ep.alg_profit, "opt_profit": ep.opt_profit,
                     "steps": len(ep.realization)}
        ok &= ep.alg_profit <= 1e-9 and math.isclose(ep.opt_profit, phases * eps / 2,
                                                     rel_tol=0, abs_tol=1e-9)
    out["pass"] = bool(ok)
    return out


def eps_margin_failure(eps: float, T: int, trials: int, seed: int, z=4.0) -> dict:
    """eps-margin trader vs. the prophet (additive fee ``eps``) on the failure law.

    The trader never buys, so its exact expected profit is
    ``(1 + eps) * (1 - 0.8**T)``; the prophet's profit is simulated.
    """
    cm = CostModel(0.0, eps)
    proc = gen_appendix_failure(eps, T)
    stats = monte_carlo(proc, EpsMarginTrader(margin=eps), cm, trials, seed)
    e_alg = (1 + eps) * (1 - 0.8 ** T)
    opt_lb = (T - 1) * 2 * eps / 25
    out = {"eps": eps, "T": T, "trials": trials, "alg_exact": e_alg,
           "alg_mean": stats.alg_mean, "alg_se": stats.alg_se,
           "alg_max": float(stats.alg.max()), "opt_mean": stats.opt_mean,
           "opt_se": stats.opt_se, "opt_lower_bound": opt_lb,
           "never_buys": bool(np.all(stats.n_buys == 0))}
    out["ratio"] = stats.opt_mean / e_alg
    out["pass"] = bool(e_alg <= 1 + eps and stats.alg_mean <= 1 + eps
                       and stats.opt_mean >= opt_lb - z * stats.opt_se
                       and out["ratio"] >= 50)
    return out


@dataclass
class CompetitiveEstimate:
    """Least-squares fit ``E[OPT](T) ~ alpha * E[ALG](T) + c`` across horizons."""

    alpha_hat: float
    c_hat: float
    T_grid: list
    e_alg: list
    e_opt: list
    residuals: list = field(default_factory=list)

    @property
    def residual_norm(self):
        return float(np.linalg.norm(self.residuals))


def estimate_competitive_ratio(family, trader=None, cost_model: CostModel = NO_COSTS,
                               T_grid=(100, 1000, 10_000), trials=None, master_seed=0):
    """Fit the multiplicative ratio and additive constant over ``T_grid``.

    ``family(T)`` returns the process for horizon ``T``. With zero costs and
    BLSH the closed forms are used; otherwise ``trials`` Monte Carlo episodes
    per horizon.

    Raises:
        DegenerateFit: fewer than three horizons, or E[ALG] does not vary.
    """
    T_grid = list(T_grid)
    if len(T_grid) < 3:
        raise DegenerateFit("need at least three horizons")
    trader = BuyLowSellHigh() if trader is None else trader
    closed = (isinstance(trader, BuyLowSellHigh) and cost_model.is_zero and trials is None)
    e_alg, e_opt = [], []
    for j, T in enumerate(T_grid):
        proc = family(T)
        if closed:
            e_alg.append(expected_alg_blsh(proc))
            e_opt.append(expected_opt_zero_cost(proc))
        else:
            if trials is None:
                raise ValueError("trials is required when no closed form applies")
            st = monte_carlo(proc, trader, cost_model, trials, master_seed + j)
            e_alg.append(st.alg_mean)
            e_opt.append(st.opt_mean)
    alpha, c, resid = fit_competitive_ratio(e_alg, e_opt)
    return CompetitiveEstimate(alpha, c, T_grid, e_alg, e_opt, resid)


def fit_competitive_ratio(e_alg, e_opt):
    """Least squares ``e_opt ~ alpha * e_alg + c``; returns ``(alpha, c, residuals)``.

    Raises:
        DegenerateFit: fewer than three points, or ``e_alg`` does not vary.
    """
    a = np.asarray(e_alg, dtype=np.float64)
    o = np.asarray(e_opt, dtype=np.float64)
    if len(a) < 3:
        raise DegenerateFit("need at least three horizons")
    if np.ptp(a) <= 1e-12 * max(1.0, float(np.max(np.abs(a)))):
        raise DegenerateFit("E[ALG] is constant across the grid")
    design = np.column_stack([a, np.ones_like(a)])
    (alpha, c), *_ = np.linalg.lstsq(design, o, rcond=None)
    resid = o - design @ np.array([alpha, c])
    return float(alpha), float(c), resid.tolist()

