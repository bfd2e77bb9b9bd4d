"""Price distributions, transaction costs and price processes.

A :class:`PriceDistribution` is a finite set of nonnegative atoms, optionally
smeared by an independent uniform perturbation on ``[-delta, delta]``.  Every
probability primitive used by the traders and the closed-form profit
formulas is computed exactly from the atoms and the perturbation segments.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import _rng
from .exceptions import ZeroProbabilityEvent

PROB_TOL = 1e-12


@dataclass(frozen=True)
class PriceDistribution:
    """Discrete price law plus optional uniform perturbation.

    Args:
        atoms: ``(value, probability)`` pairs. Values must be nonnegative and
            probabilities must sum to one within ``1e-12``.
        delta: half-width of the uniform perturbation added to every draw.
            With ``delta > 0`` every atom must be at least ``delta`` so that
            perturbed prices stay nonnegative, and the CDF is continuous.
    """

    atoms: tuple
    delta: float = 0.0

    def __post_init__(self):
        atoms = tuple(sorted((float(v), float(p)) for v, p in self.atoms))
        if not atoms:
            raise ValueError("a distribution needs at least one atom")
        delta = float(self.delta)
        if not np.isfinite(delta) or delta < 0:
            raise ValueError(f"delta must be a finite nonnegative number, got {self.delta!r}")
        probs = np.array([p for _, p in atoms])
        values = np.array([v for v, _ in atoms])
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValueError("atom probabilities must lie in [0, 1]")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"atom probabilities sum to {probs.sum()!r}, not 1")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("atom values must be finite and nonnegative")
        if delta > 0 and np.any(values < delta):
            raise ValueError("with delta > 0 every atom must be >= delta")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "delta", delta)

    @classmethod
    def point_mass(cls, value):
        return cls(((value, 1.0),))

    @classmethod
    def uniform(cls, low, high):
        """Continuous uniform law on ``[low, high]`` (one perturbed atom)."""
        if not 0 <= low < high:
            raise ValueError("need 0 <= low < high")
        return cls((((low + high) / 2, 1.0),), delta=(high - low) / 2)

    @classmethod
    def from_dict(cls, spec):
        try:
            atoms = spec["atoms"]
        except (KeyError, TypeError):
            raise ValueError("distribution spec needs an 'atoms' list") from None
        return cls(tuple(tuple(a) for a in atoms), delta=spec.get("delta", 0.0))

    def to_dict(self):
        return {"atoms": [[v, p] for v, p in self.atoms], "delta": self.delta}

    @cached_property
    def values(self):
        return np.array([v for v, _ in self.atoms])

    @cached_property
    def probs(self):
        return np.array([p for _, p in self.atoms])

    @cached_property
    def _cumprobs(self):
        return np.cumsum(self.probs)

    @property
    def is_continuous(self):
        return self.delta > 0

    @property
    def is_point_mass(self):
        return self.delta == 0 and len(self.atoms) == 1

    @property
    def support_min(self):
        return float(self.values[0] - self.delta)

    @property
    def support_max(self):
        return float(self.values[-1] + self.delta)

    def mean(self):
        # the perturbation is symmetric, so it leaves the mean unchanged
        return float(self.probs @ self.values)

    def cdf(self, x):
        """``Pr[X <= x]``; vectorized over ``x``."""
        x = np.asarray(x, dtype=np.float64)
        if self.delta == 0:
            out = (self.values <= x[..., None]) @ self.probs
        else:
            lo = self.values - self.delta
            frac = np.clip((x[..., None] - lo) / (2 * self.delta), 0.0, 1.0)
            out = frac @ self.probs
        return _unwrap(np.minimum(out, 1.0))

    def prob_at_least(self, x):
        """``Pr[X >= x]``; vectorized over ``x``."""
        x = np.asarray(x, dtype=np.float64)
        if self.delta == 0:
            out = (self.values >= x[..., None]) @ self.probs
        else:
            out = 1.0 - np.asarray(self.cdf(x))
        return _unwrap(np.clip(out, 0.0, 1.0))

    def partial_mean_below(self, z):
        """``E[X; X <= z]`` (unnormalized)."""
        z = np.asarray(z, dtype=np.float64)
        if self.delta == 0:
            out = (self.values <= z[..., None]) @ (self.probs * self.values)
        else:
            lo = self.values - self.delta
            hi = self.values + self.delta
            c = np.clip(z[..., None], lo, hi)
            out = ((c * c - lo * lo) / (4 * self.delta)) @ self.probs
        return _unwrap(out)

    def partial_mean_above(self, z):
        """``E[X; X >= z]`` (unnormalized)."""
        z = np.asarray(z, dtype=np.float64)
        if self.delta == 0:
            out = (self.values >= z[..., None]) @ (self.probs * self.values)
        else:
            lo = self.values - self.delta
            hi = self.values + self.delta
            c = np.clip(z[..., None], lo, hi)
            out = ((hi * hi - c * c) / (4 * self.delta)) @ self.probs
        return _unwrap(out)

    def conditional_mean_below(self, z):
        """``E[X | X <= z]``."""
        mass = float(self.cdf(z))
        if mass <= 0:
            raise ZeroProbabilityEvent(f"Pr[X <= {z}] = 0")
        return float(self.partial_mean_below(z)) / mass

    def conditional_mean_above(self, z):
        """``E[X | X >= z]``."""
        mass = float(self.prob_at_least(z))
        if mass <= 0:
            raise ZeroProbabilityEvent(f"Pr[X >= {z}] = 0")
        return float(self.partial_mean_above(z)) / mass

    def from_uniforms(self, u_atom, u_pert):
        """Map uniform draws to prices: inverse-CDF atom choice plus perturbation."""
        u_atom = np.asarray(u_atom, dtype=np.float64)
        if len(self.atoms) == 1:
            base = np.full(u_atom.shape, self.values[0])
        else:
            idx = np.searchsorted(self._cumprobs, u_atom, side="right")
            base = self.values[np.minimum(idx, len(self.atoms) - 1)]
        if self.delta == 0:
            return base
        return base + self.delta * (2.0 * np.asarray(u_pert, dtype=np.float64) - 1.0)

    def sample(self, rng, size=None):
        """Draw prices using a :class:`numpy.random.Generator`."""
        shape = () if size is None else tuple(np.atleast_1d(size).tolist())
        u = rng.random((2,) + shape)
        out = self.from_uniforms(u[0], u[1])
        return float(out) if size is None else out


def _unwrap(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


def mean(d: PriceDistribution) -> float:
    return d.mean()


def cdf(d: PriceDistribution, x):
    return d.cdf(x)


def conditional_mean_below(d: PriceDistribution, z) -> float:
    return d.conditional_mean_below(z)


def conditional_mean_above(d: PriceDistribution, z) -> float:
    return d.conditional_mean_above(z)


def expected_positive_part_gap(d_prev: PriceDistribution, threshold: float) -> float:
    """``E[(threshold - X)_+]`` for ``X ~ d_prev``."""
    t = float(threshold)
    return float(t * d_prev.cdf(t) - d_prev.partial_mean_below(t))


def expected_excess(d: PriceDistribution, threshold: float) -> float:
    """``E[(X - threshold)_+]``."""
    t = float(threshold)
    return float(d.partial_mean_above(t) - t * d.prob_at_least(t))


def _point_antiderivative(b, x):
    # integral of (b - x)_+ ; zero at and beyond b
    return np.where(x <= b, -0.5 * (b - x) ** 2, 0.0)


def _uniform_antiderivative(c1, c2, x):
    # integral of E[(Y - x)_+] for Y ~ U[c1, c2]; zero at and beyond c2
    w = c2 - c1
    m = 0.5 * (c1 + c2)
    left = m * x - 0.5 * x * x - m * c1 + 0.5 * c1 * c1 - w * w / 6.0
    mid = -((c2 - x) ** 3) / (6.0 * w)
    return np.where(x <= c1, left, np.where(x < c2, mid, 0.0))


def _uniform_excess(c1, c2, x):
    w = c2 - c1
    m = 0.5 * (c1 + c2)
    return np.where(x <= c1, m - x, np.where(x < c2, (c2 - x) ** 2 / (2.0 * w), 0.0))


def expected_positive_pair_gap(d_prev: PriceDistribution, d_cur: PriceDistribution) -> float:
    """``E[(Y - X)_+]`` for independent ``X ~ d_prev`` and ``Y ~ d_cur``.

    Computed exactly: a double sum over atom pairs where each perturbed
    component contributes a closed-form piecewise-polynomial integral.
    """
    a = d_prev.values[:, None]
    b = d_cur.values[None, :]
    weights = d_prev.probs[:, None] * d_cur.probs[None, :]
    dp, dc = d_prev.delta, d_cur.delta
    if dc == 0:
        if dp == 0:
            terms = np.maximum(b - a, 0.0)
        else:
            a1, a2 = a - dp, a + dp
            terms = (_point_antiderivative(b, a2) - _point_antiderivative(b, a1)) / (2 * dp)
    else:
        c1, c2 = b - dc, b + dc
        if dp == 0:
            terms = _uniform_excess(c1, c2, a)
        else:
            a1, a2 = a - dp, a + dp
            terms = (_uniform_antiderivative(c1, c2, a2)
                     - _uniform_antiderivative(c1, c2, a1)) / (2 * dp)
    return float(np.sum(weights * terms))


ZERO = PriceDistribution.point_mass(0.0)


@dataclass(frozen=True)
class CostModel:
    """Multiplicative (``eps_pi``) and additive (``eps_sigma``) transaction costs."""

    eps_pi: float = 0.0
    eps_sigma: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.eps_pi < 1.0):
            raise ValueError(f"eps_pi must lie in [0, 1), got {self.eps_pi!r}")
        if not (np.isfinite(self.eps_sigma) and self.eps_sigma >= 0.0):
            raise ValueError(f"eps_sigma must be >= 0, got {self.eps_sigma!r}")
        object.__setattr__(self, "eps_pi", float(self.eps_pi))
        object.__setattr__(self, "eps_sigma", float(self.eps_sigma))

    @property
    def is_zero(self):
        return self.eps_pi == 0.0 and self.eps_sigma == 0.0

    def buy_price(self, x):
        return (1.0 + self.eps_pi) * x + self.eps_sigma

    def sell_price(self, x):
        # may be negative; never clamped
        return (1.0 - self.eps_pi) * x - self.eps_sigma

    def quote(self, x):
        return PriceQuote(float(x), self)


NO_COSTS = CostModel()


@dataclass(frozen=True)
class PriceQuote:
    base: float
    cost_model: CostModel = NO_COSTS

    @property
    def buy_price(self):
        return self.cost_model.buy_price(self.base)

    @property
    def sell_price(self):
        return self.cost_model.sell_price(self.base)


class PriceProcess:
    """Common surface of the price processes.

    Steps are numbered ``1..T``; the sentinel steps ``0`` and ``T + 1`` carry
    price 0 with probability one and are never materialized.
    """

    adaptive = False
    initial_stock = True

    @property
    def horizon(self):
        raise NotImplementedError

    def distributions(self):
        """Per-step laws ``D_1..D_T``."""
        raise NotImplementedError

    def means(self):
        return np.array([d.mean() for d in self.distributions()])

    def next_means(self):
        """``mu_{i+1}`` seen at step ``i``; zero at step ``T``."""
        return np.append(self.means()[1:], 0.0)

    def sample(self, seeds):
        """Realized price paths, one row per trial seed."""
        seeds = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
        T = self.horizon
        u = _rng.uniforms(seeds, 2 * T)
        out = np.empty((len(seeds), T))
        groups = {}
        for t, d in enumerate(self.distributions()):
            groups.setdefault(d, []).append(t)
        for d, cols in groups.items():
            cols = np.asarray(cols)
            out[:, cols] = d.from_uniforms(u[:, 2 * cols], u[:, 2 * cols + 1])
        return out

    def distribution_at(self, t):
        """Law of the price at 0-based step ``t``."""
        return self.distributions()[t]

    def step_pairs(self):
        """Distinct consecutive laws ``(D_{i-1}, D_i, count)`` for ``i = 1..T`` (``D_0 = ZERO``).

        Pairs are grouped by object identity, so sequences reusing a few
        distribution objects collapse to a handful of entries.
        """
        dists = self.distributions()
        prev = (ZERO,) + tuple(dists[:-1])
        counts = Counter((id(a), id(b)) for a, b in zip(prev, dists))
        objs = {id(o): o for o in (*prev, *dists)}
        return [(objs[a], objs[b], n) for (a, b), n in counts.items()]

    def sum_over_steps(self, fn) -> float:
        """``sum_i fn(D_{i-1}, D_i)`` over ``i = 1..T``."""
        return float(sum(n * fn(p, c) for p, c, n in self.step_pairs()))

    def sample_step(self, seeds, t):
        """Column ``t`` of :meth:`sample` without drawing the other steps."""
        seeds = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
        u = _rng.uniforms(seeds, 2, start=2 * t)
        return self.distribution_at(t).from_uniforms(u[:, 0], u[:, 1])


@dataclass(frozen=True)
class IndependentSequence(PriceProcess):
    dists: tuple

    def __post_init__(self):
        object.__setattr__(self, "dists", tuple(self.dists))
        if not self.dists:
            raise ValueError("horizon must be >= 1")

    @property
    def horizon(self):
        return len(self.dists)

    def distributions(self):
        return self.dists

    def distribution_at(self, t):
        return self.dists[t]

    def to_dict(self):
        return {"variant": "independent", "horizon": self.horizon,
                "distributions": [d.to_dict() for d in self.dists]}


@dataclass(frozen=True)
class PeriodicSequence(PriceProcess):
    """Independent prices whose laws cycle through ``pattern`` for ``T`` steps."""

    pattern: tuple
    T: int

    def __post_init__(self):
        object.__setattr__(self, "pattern", tuple(self.pattern))
        if not self.pattern:
            raise ValueError("pattern must not be empty")
        if int(self.T) < 1:
            raise ValueError("horizon must be >= 1")

    @property
    def horizon(self):
        return int(self.T)

    def distributions(self):
        reps = -(-self.horizon // len(self.pattern))
        return (self.pattern * reps)[:self.horizon]

    def distribution_at(self, t):
        return self.pattern[t % len(self.pattern)]

    def means(self):
        mus = np.array([d.mean() for d in self.pattern])
        return np.resize(mus, self.horizon)

    def step_pairs(self):
        p = len(self.pattern)
        counts = np.bincount(np.arange(1, self.horizon) % p, minlength=p)
        pairs = [(ZERO, self.pattern[0], 1)]
        for r in range(p):
            if counts[r]:
                pairs.append((self.pattern[r - 1], self.pattern[r], int(counts[r])))
        return pairs

    def sample(self, seeds):
        seeds = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
        u = _rng.uniforms(seeds, 2 * self.horizon)
        out = np.empty((len(seeds), self.horizon))
        p = len(self.pattern)
        for r, d in enumerate(self.pattern):
            out[:, r::p] = d.from_uniforms(u[:, 2 * r::2 * p], u[:, 2 * r + 1::2 * p])
        return out

    def to_dict(self):
        return {"variant": "periodic", "horizon": self.horizon,
                "pattern": [d.to_dict() for d in self.pattern]}


@dataclass(frozen=True)
class Iid(PriceProcess):
    distribution: PriceDistribution
    T: int

    def __post_init__(self):
        if int(self.T) < 1:
            raise ValueError("horizon must be >= 1")

    @property
    def horizon(self):
        return int(self.T)

    def distributions(self):
        return (self.distribution,) * self.horizon

    def means(self):
        return np.full(self.horizon, self.distribution.mean())

    def distribution_at(self, t):
        return self.distribution

    def step_pairs(self):
        d = self.distribution
        return [(ZERO, d, 1)] + ([(d, d, self.horizon - 1)] if self.horizon > 1 else [])

    def sample(self, seeds):
        seeds = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
        u = _rng.uniforms(seeds, 2 * self.horizon)
        return self.distribution.from_uniforms(u[:, 0::2], u[:, 1::2])

    def to_dict(self):
        return {"variant": "iid", "horizon": self.horizon,
                "distribution": self.distribution.to_dict()}


@dataclass(frozen=True)
class Deterministic(PriceProcess):
    prices: tuple

    def __post_init__(self):
        prices = tuple(float(p) for p in self.prices)
        if not prices:
            raise ValueError("horizon must be >= 1")
        if any(p < 0 for p in prices):
            raise ValueError("prices must be nonnegative")
        object.__setattr__(self, "prices", prices)

    @property
    def horizon(self):
        return len(self.prices)

    def distributions(self):
        return tuple(PriceDistribution.point_mass(p) for p in self.prices)

    def sample(self, seeds):
        n = len(np.atleast_1d(seeds))
        return np.tile(np.asarray(self.prices), (n, 1))

    def sample_step(self, seeds, t):
        return np.full(len(np.atleast_1d(seeds)), self.prices[t])

    def to_dict(self):
        return {"variant": "deterministic", "horizon": self.horizon, "prices": list(self.prices)}


@dataclass(frozen=True)
class Adaptive(PriceProcess):
    """Prices chosen online by an adversary reacting to the trader's inventory.

    ``make_adversary`` returns a fresh adversary per episode. Traders start
    without stock unless ``initial_stock`` is set.
    """

    make_adversary: Callable
    initial_stock: bool = False
    adaptive = True
    params: dict = field(default_factory=dict, compare=False)

    @property
    def horizon(self):
        return None

    def distributions(self):
        raise TypeError("an adaptive process has no fixed per-step distributions")

    def sample(self, seeds):
        raise TypeError("an adaptive process is realized only by running an episode")

    def to_dict(self):
        return {"variant": "adaptive", **self.params}


def random_distribution(rng, max_atoms=4, *, low=0.0, high=10.0, delta=0.0):
    """Random law with 1..max_atoms atoms drawn uniformly from ``[low, high]``."""
    k = int(rng.integers(1, max_atoms + 1))
    values = rng.uniform(max(low, delta), high, size=k)
    probs = rng.dirichlet(np.ones(k))
    probs[-1] = 1.0 - probs[:-1].sum()
    if probs[-1] < 0:
        probs = np.full(k, 1.0 / k)
    return PriceDistribution(tuple(zip(values.tolist(), probs.tolist())), delta=delta)


def random_independent_sequence(rng, T, max_atoms=4, **kwargs):
    return IndependentSequence(tuple(random_distribution(rng, max_atoms, **kwargs)
                                     for _ in range(T)))


def as_process(obj) -> PriceProcess:
    """Accept a process, a distribution (treated as one step) or a price list."""
    if isinstance(obj, PriceProcess):
        return obj
    if isinstance(obj, PriceDistribution):
        return Iid(obj, 1)
    if isinstance(obj, Sequence) or isinstance(obj, np.ndarray):
        return Deterministic(tuple(obj))
    raise TypeError(f"cannot interpret {type(obj).__name__} as a price process")


def process_from_dict(spec) -> PriceProcess:
    """Inverse of ``to_dict`` for the non-adaptive variants."""
    if not isinstance(spec, dict):
        raise ValueError("process spec must be a mapping")
    variant = spec.get("variant")
    if variant == "iid":
        return Iid(PriceDistribution.from_dict(spec["distribution"]), int(spec["horizon"]))
    if variant == "independent":
        dists = tuple(PriceDistribution.from_dict(d) for d in spec["distributions"])
        if "horizon" in spec and int(spec["horizon"]) != len(dists):
            raise ValueError(f"horizon {spec['horizon']} != {len(dists)} distributions")
        return IndependentSequence(dists)
    if variant == "periodic":
        return PeriodicSequence(tuple(PriceDistribution.from_dict(d) for d in spec["pattern"]),
                                int(spec["horizon"]))
    if variant == "deterministic":
        return Deterministic(tuple(spec["prices"]))
    raise ValueError(f"unknown process variant {variant!r}")
