"""Hard instances: lower-bound families and the adaptive phase adversary."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ._validation import check_scalar
from .exceptions import ProtocolViolation
from .market import Adaptive, CostModel, Iid, PeriodicSequence, PriceDistribution


def prop_adversarial_dists(eps):
    """The odd-step and even-step laws of the alternating lower-bound family."""
    odd = PriceDistribution(((1 / eps, 1 - eps), (0.0, eps)))
    even = PriceDistribution(((1 / eps - 1, 1 - eps), (2 / eps - 1, eps)))
    return odd, even


def gen_prop_adversarial(eps: float, T: int) -> PeriodicSequence:
    """Alternating independent prices forcing ratio ``3 - O(eps)`` on any online trader.

    Odd steps: ``1/eps`` w.p. ``1 - eps``, else 0 (mean ``1/eps - 1``).
    Even steps: ``1/eps - 1`` w.p. ``1 - eps``, else ``2/eps - 1`` (mean ``1/eps``).
    """
    check_scalar(eps, "eps", lo=0.0, hi=1.0, lo_open=True, hi_open=True)
    check_scalar(T, "T", lo=2, integer=True)
    if T % 2:
        raise ValueError(f"T must be even, got {T}")
    odd, even = prop_adversarial_dists(eps)
    return PeriodicSequence((odd, even), T)


def prop_iid_dist(eps):
    return PriceDistribution(((1.0, eps / 2), (0.5, 1 - eps), (0.0, eps / 2)))


def gen_prop_iid(eps: float, T: int) -> Iid:
    """i.i.d. prices 1, 1/2, 0 w.p. eps/2, 1 - eps, eps/2 (ratio ``2 - O(eps)``)."""
    check_scalar(eps, "eps", lo=0.0, hi=1.0, lo_open=True, hi_open=True)
    check_scalar(T, "T", lo=1, integer=True)
    return Iid(prop_iid_dist(eps), T)


def appendix_failure_dist(eps):
    return PriceDistribution(((1 + 2 * eps, 0.2), (1 - eps / 2, 0.8)))


def gen_appendix_failure(eps: float, T: int = 10_000) -> Iid:
    """i.i.d. law with mean 1 on which the eps-margin trader never buys."""
    check_scalar(eps, "eps", lo=0.0, hi=1.0, lo_open=True, hi_open=True)
    check_scalar(T, "T", lo=1, integer=True)
    return Iid(appendix_failure_dist(eps), T)


class Branch(enum.Enum):
    UNDECIDED = "undecided"
    ALG_HELD = "alg-held"
    ALG_EMPTY = "alg-empty"


@dataclass
class PhaseAdversaryState:
    phase: int = 0
    step: int = 0
    branch: Branch = Branch.UNDECIDED
    branches: list = field(default_factory=list)


class PhaseAdversary:
    """Adaptive price sequence defeating every ``k``-lookahead trader.

    Each phase opens with price 1 while revealing ``1 + eps``. If the trader
    holds stock after that first price, the phase continues
    ``1 + eps, 1 - eps, 1 + 1.5 eps``; otherwise ``1 + eps, 1 + 2.5 eps``.
    With lookahead ``k`` every price is repeated ``k`` times. The adversary
    only sees the trader's public inventory, and the additive fee equals
    ``eps``.

    Call :meth:`next_step` once per step with the trader's inventory before
    that step; it returns the current price and the ``k`` revealed prices
    (zeros past the final phase).
    """

    def __init__(self, eps: float, phases: int, k: int = 1):
        check_scalar(eps, "eps", lo=0.0, lo_open=True)
        check_scalar(phases, "phases", lo=1, integer=True)
        check_scalar(k, "k", lo=1, integer=True)
        self.eps = float(eps)
        self.phases = phases
        self.k = k
        self.reset()

    @property
    def cost_model(self):
        return CostModel(0.0, self.eps)

    def reset(self):
        self.state = PhaseAdversaryState()
        self._prices = []
        self._pos = 0
        self._decide_at = None
        self._phase_end = None
        self._open_phase()

    def _block(self, price):
        return [price] * self.k

    def _open_phase(self):
        self._decide_at = len(self._prices) + self.k
        self._prices += self._block(1.0) + self._block(1.0 + self.eps)

    @property
    def done(self):
        return self._pos >= len(self._prices) and self._decide_at is None

    @property
    def prices(self):
        """Prices emitted so far."""
        return self._prices[:self._pos]

    def _branch_prices(self, branch):
        e = self.eps
        if branch is Branch.ALG_HELD:
            return self._block(1.0 - e) + self._block(1.0 + 1.5 * e)
        return self._block(1.0 + 2.5 * e)

    def next_step(self, holding: bool, last_trade_price: float | None = None):
        """Emit ``(price, revealed)`` for the next step.

        Raises:
            ProtocolViolation: all phases were already emitted (call ``reset``).
        """
        if self._pos == self._decide_at:
            branch = Branch.ALG_HELD if holding else Branch.ALG_EMPTY
            self.state.branch = branch
            self.state.branches.append(branch)
            self._prices += self._branch_prices(branch)
            self._decide_at = None
            self._phase_end = len(self._prices)
            if self.state.phase + 1 < self.phases:
                self._open_phase()
        if self._pos >= len(self._prices):
            raise ProtocolViolation("the adversary has no phases left; call reset()")
        price = self._prices[self._pos]
        ahead = self._prices[self._pos + 1:self._pos + 1 + self.k]
        ahead = tuple(ahead + [0.0] * (self.k - len(ahead)))
        self._pos += 1
        self._advance_counters()
        return price, ahead

    def _advance_counters(self):
        self.state.step += 1
        if self.state.branch is not Branch.UNDECIDED and self._pos == self._phase_end:
            self.state.phase += 1
            self.state.step = 0
            self.state.branch = Branch.UNDECIDED

    def phase_prophet_profit(self):
        """Profit the prophet collects per phase (either branch): ``eps / 2``."""
        return self.eps / 2


def gen_phase(eps: float, phases: int, k: int = 1) -> Adaptive:
    """Adaptive process running a fresh :class:`PhaseAdversary` per episode."""
    PhaseAdversary(eps, phases, k)  # validate eagerly
    return Adaptive(lambda: PhaseAdversary(eps, phases, k),
                    params={"instance": "phase", "eps": eps, "phases": phases, "k": k})
