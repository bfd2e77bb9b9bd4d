"""Online single-unit trading against prophets: traders, instances and bound checks."""

from .adversary import (PhaseAdversary, gen_appendix_failure, gen_phase, gen_prop_adversarial,
                        gen_prop_iid)
from .analysis import (best_online_value, estimate_competitive_ratio, expected_alg_blsh,
                       theorem2_chain, verify_upper_bound_theorem)
from .config import ExperimentConfig
from .engine import BatchStats, EpisodeResult, monte_carlo, run_episode
from .exceptions import (BoundViolated, ConfigError, DegenerateFit, DiscontinuousCdf,
                         HorizonTooLarge, InfeasibleAction, LookaheadViolation,
                         ProtocolViolation, ZeroProbabilityEvent)
from .market import (NO_COSTS, CostModel, Deterministic, IndependentSequence, Iid, PeriodicSequence,
                     PriceDistribution)
from .oracle import (expected_opt_zero_cost, opt_bruteforce, opt_telescoping,
                     opt_with_costs_dp)
from .traders import (Action, BuyBelowSellAbove, BuyLowSellHigh, EpsMarginTrader,
                      LookaheadTrader, Thresholds, make_trader, solve_thresholds)

__version__ = "0.1.0"

__all__ = [
    "Action", "BatchStats", "BoundViolated", "BuyBelowSellAbove", "BuyLowSellHigh",
    "ConfigError", "CostModel", "DegenerateFit", "Deterministic", "DiscontinuousCdf",
    "EpisodeResult", "EpsMarginTrader", "ExperimentConfig", "HorizonTooLarge", "Iid",
    "IndependentSequence", "InfeasibleAction", "PeriodicSequence", "LookaheadTrader", "LookaheadViolation",
    "NO_COSTS", "PhaseAdversary", "PriceDistribution", "ProtocolViolation", "Thresholds",
    "ZeroProbabilityEvent", "best_online_value", "estimate_competitive_ratio",
    "expected_alg_blsh", "expected_opt_zero_cost", "gen_appendix_failure", "gen_phase",
    "gen_prop_adversarial", "gen_prop_iid", "make_trader", "monte_carlo", "opt_bruteforce",
    "opt_telescoping", "opt_with_costs_dp", "run_episode", "solve_thresholds", "theorem2_chain",
    "verify_upper_bound_theorem",
]
