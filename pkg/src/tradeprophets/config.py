"""Experiment configuration: parsing, validation and instance construction."""

from __future__ import annotations

import json
import os
import re
from dataclasses import asdict, dataclass, field, fields

import yaml

from .adversary import gen_appendix_failure, gen_phase, gen_prop_adversarial, gen_prop_iid
from .exceptions import ConfigError
from .market import CostModel, Iid, PriceDistribution, process_from_dict
from .traders import make_trader

INSTANCES = ("prop-adv", "prop-iid", "appendix-fail", "phase")
NAMED_DISTRIBUTIONS = {"uniform01": lambda: PriceDistribution.uniform(0.0, 1.0)}
FORMATS = ("csv", "json")


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-3`` (no dot) as a float, as YAML 1.2 and JSON do."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                |[-+]?\.(?:inf|Inf|INF)
                |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


def load_yaml(text):
    return yaml.load(text, Loader=_Loader)


@dataclass
class ExperimentConfig:
    """Everything needed to rerun one experiment.

    Exactly one of ``instance``, ``dist`` or ``process`` selects the prices.
    ``dist`` is a spec file path or a built-in name such as ``uniform01``.
    """

    instance: str | None = None
    dist: str | None = None
    process: str | None = None
    eps: float | None = None
    T: int | None = None
    T_grid: list | None = None
    phases: int | None = None
    k: int = 1
    trader: str = "blsh"
    trader_params: dict = field(default_factory=dict)
    eps_pi: float = 0.0
    eps_sigma: float = 0.0
    trials: int = 1000
    seed: int | None = None
    output: str | None = None
    format: str = "csv"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config", "expected a mapping of field names to values")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown config field")
        data = dict(data)
        if data.get("T_grid") is not None:
            data["T_grid"] = list(data["T_grid"])
        if data.get("trader_params") is None:
            data["trader_params"] = {}
        return cls(**data)

    def dumps(self, fmt="yaml"):
        if fmt == "json":
            return json.dumps(self.to_dict(), indent=2, sort_keys=True)
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text):
        """Parse JSON or YAML text (JSON is a subset of YAML)."""
        return cls.from_dict(load_yaml(text))

    @classmethod
    def load(cls, path):
        return cls.loads(read_text(path, "config"))

    @property
    def cost_model(self):
        return CostModel(self.eps_pi, self.eps_sigma)

    def validate(self, *, need_seed=True):
        """Check ranges and file references.

        Raises:
            ConfigError: naming the first offending field.
        """
        sources = [n for n in ("instance", "dist", "process") if getattr(self, n) is not None]
        if len(sources) != 1:
            raise ConfigError("instance", "give exactly one of --instance, --dist, --process")
        if self.instance is not None and self.instance not in INSTANCES:
            raise ConfigError("instance", f"unknown instance {self.instance!r}; "
                                          f"choose from {', '.join(INSTANCES)}")
        if self.eps is not None and not 0 < self.eps < 1:
            raise ConfigError("eps", f"must lie in (0, 1), got {self.eps}")
        if not 0 <= self.eps_pi < 1:
            raise ConfigError("eps_pi", f"must lie in [0, 1), got {self.eps_pi}")
        if not self.eps_sigma >= 0:
            raise ConfigError("eps_sigma", f"must be >= 0, got {self.eps_sigma}")
        for name in ("T", "trials", "phases", "k"):
            value = getattr(self, name)
            if value is not None and (isinstance(value, bool) or not isinstance(value, int)
                                      or value < 1):
                raise ConfigError(name, f"must be a positive integer, got {value!r}")
        if self.T_grid is not None and (len(self.T_grid) == 0 or any(
                isinstance(t, bool) or not isinstance(t, int) or t < 1 for t in self.T_grid)):
            raise ConfigError("T_grid", "must be a non-empty list of positive integers")
        if self.format not in FORMATS:
            raise ConfigError("format", f"must be one of {', '.join(FORMATS)}")
        if need_seed and self.seed is None:
            raise ConfigError("seed", "--seed is required; runs are never seeded from the clock")
        if self.seed is not None and (isinstance(self.seed, bool) or not isinstance(self.seed, int)
                                      or not 0 <= self.seed < 2 ** 64):
            raise ConfigError("seed", f"must be an integer in [0, 2**64), got {self.seed!r}")
        for name in ("dist", "process"):
            path = getattr(self, name)
            if path is not None and path not in NAMED_DISTRIBUTIONS and not os.path.isfile(path):
                raise ConfigError(name, f"file not found: {path}")
        try:
            make_trader(self.trader, **self.trader_params)
        except (ValueError, TypeError) as exc:
            raise ConfigError("trader", str(exc)) from None
        return self


def read_text(path, field_name):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(field_name, f"cannot read {path}: {exc.strerror}") from None


def _load_spec(path, field_name):
    try:
        spec = load_yaml(read_text(path, field_name))
    except yaml.YAMLError as exc:
        raise ConfigError(field_name, f"{path} is not valid JSON/YAML: {exc}") from None
    if not isinstance(spec, dict):
        raise ConfigError(field_name, f"{path} must hold a mapping")
    return spec


def load_distribution(ref: str, field_name="dist") -> PriceDistribution:
    """Distribution from a built-in name or a JSON/YAML file ``{atoms, delta}``."""
    if ref in NAMED_DISTRIBUTIONS:
        return NAMED_DISTRIBUTIONS[ref]()
    spec = _load_spec(ref, field_name)
    try:
        return PriceDistribution.from_dict(spec)
    except (ValueError, TypeError) as exc:
        raise ConfigError(field_name, f"{ref}: {exc}") from None


def _generator(cfg: ExperimentConfig, T):
    name = cfg.instance
    if cfg.eps is None:
        raise ConfigError("eps", f"instance {name!r} needs --eps")
    if name == "phase":
        return gen_phase(cfg.eps, cfg.phases if cfg.phases is not None else 1000, cfg.k)
    if T is None:
        raise ConfigError("T", f"instance {name!r} needs --T")
    try:
        if name == "prop-adv":
            return gen_prop_adversarial(cfg.eps, T)
        if name == "prop-iid":
            return gen_prop_iid(cfg.eps, T)
        return gen_appendix_failure(cfg.eps, T)
    except ValueError as exc:
        raise ConfigError("T", str(exc)) from None


def build_process(cfg: ExperimentConfig, T=None):
    """Price process for ``cfg`` at horizon ``T`` (defaults to ``cfg.T``)."""
    T = cfg.T if T is None else T
    if cfg.instance is not None:
        return _generator(cfg, T)
    if cfg.dist is not None:
        if T is None:
            raise ConfigError("T", "--dist needs --T")
        return Iid(load_distribution(cfg.dist), T)
    spec = _load_spec(cfg.process, "process")
    if spec.get("variant") == "generator":
        params = {k: v for k, v in spec.items() if k != "variant"}
        if "horizon" in params:
            params["T"] = params.pop("horizon")
        try:
            sub = ExperimentConfig.from_dict({**params, "seed": cfg.seed})
        except TypeError as exc:
            raise ConfigError("process", str(exc)) from None
        return _generator(sub, sub.T)
    try:
        return process_from_dict(spec)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError("process", f"{cfg.process}: {exc}") from None
