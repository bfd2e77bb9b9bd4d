"""Command-line front end.

    tradeprophets simulate --instance prop-iid --eps 0.2 --T 1000 --trader blsh \\
        --trials 100000 --seed 7
    tradeprophets verify theorem1 --random-instances 1000 --seed 3
    tradeprophets verify theorem2 --dist uniform01 --eps-sigma 0.1 --T 1000 \\
        --trials 200000 --seed 1
    tradeprophets verify lowerbound --which adversarial --eps 0.05 --T 10000
    tradeprophets verify appendix --seed 1
    tradeprophets thresholds --dist uniform01 --eps-sigma 0.1

Exit codes: 0 success, 1 a verified bound failed, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import analysis
from .engine import SCHEMA_VERSION, monte_carlo
from .exceptions import ConfigError, DegenerateFit, DiscontinuousCdf
from .config import ExperimentConfig, build_process, load_distribution
from .market import CostModel
from .traders import LookaheadTrader, make_trader, solve_thresholds

# flag dest -> config field; flags left at None fall back to the config file
_SHARED_FLAGS = ("instance", "dist", "process", "eps", "T", "T_grid", "phases", "k", "trader",
                 "eps_pi", "eps_sigma", "trials", "seed", "output", "format")


def _add_instance_flags(p):
    p.add_argument("--config", help="JSON/YAML experiment config; flags override it")
    p.add_argument("--instance", help="generator: prop-adv, prop-iid, appendix-fail, phase")
    p.add_argument("--dist", help="distribution file or a built-in name (uniform01)")
    p.add_argument("--process", help="process spec file")
    p.add_argument("--eps", type=float)
    p.add_argument("--T", type=int)
    p.add_argument("--eps-pi", dest="eps_pi", type=float)
    p.add_argument("--eps-sigma", dest="eps_sigma", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="file for per-trial rows / full reports")


def build_parser():
    parser = argparse.ArgumentParser(prog="tradeprophets",
                                     description="Trading-prophet simulations and bound checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte Carlo batch of one trader on one instance")
    _add_instance_flags(sim)
    sim.add_argument("--T-grid", dest="T_grid", type=int, nargs="+")
    sim.add_argument("--phases", type=int)
    sim.add_argument("--k", type=int)
    sim.add_argument("--trader", help="blsh | bbsa | eps-margin | lookahead:<k>")
    sim.add_argument("--format", choices=("csv", "json"))

    ver = sub.add_parser("verify", help="check a theorem, lower bound or appendix result")
    ver.add_argument("target", choices=("theorem1", "theorem2", "lowerbound", "appendix"))
    _add_instance_flags(ver)
    ver.add_argument("--random-instances", dest="random_instances", type=int, default=1000)
    ver.add_argument("--which", default=None,
                     help="lowerbound: adversarial | iid | both; appendix: phase | eps-margin | both")
    ver.add_argument("--phases", type=int)
    ver.add_argument("--k", type=int)
    ver.add_argument("--format", choices=("text", "json"), default="text")

    th = sub.add_parser("thresholds", help="solve the BBSA thresholds of a distribution")
    th.add_argument("--dist", required=True, help="distribution file or uniform01")
    th.add_argument("--eps-pi", dest="eps_pi", type=float, default=0.0)
    th.add_argument("--eps-sigma", dest="eps_sigma", type=float, default=0.0)
    th.add_argument("--format", choices=("text", "json"), default="text")
    return parser


def config_from_args(args) -> ExperimentConfig:
    base = (ExperimentConfig.load(args.config) if getattr(args, "config", None)
            else ExperimentConfig())
    data = base.to_dict()
    for name in _SHARED_FLAGS:
        value = getattr(args, name, None)
        if value is not None and not (name == "format" and args.command != "simulate"):
            data[name] = value
    return ExperimentConfig.from_dict(data)


def _dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(path, text):
    if path is None:
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError("output", f"cannot write {path}: {exc.strerror}") from None


def _flat_csv(record):
    keys = [k for k, v in record.items() if not isinstance(v, (dict, list))]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    w.writerow([repr(record[k]) if isinstance(record[k], float) else record[k] for k in keys])
    return buf.getvalue()


def _rows_text(rows, fmt):
    if fmt == "json":
        return _dump_json({"schema_version": SCHEMA_VERSION, "rows": rows})
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def cmd_simulate(cfg: ExperimentConfig, out=None) -> int:
    out = sys.stdout if out is None else out
    cfg.validate()
    cm = cfg.cost_model
    trader = make_trader(cfg.trader, **cfg.trader_params)
    if cfg.instance == "phase":
        if not isinstance(trader, LookaheadTrader):
            raise ConfigError("trader", "the phase adversary needs a lookahead:<k> trader")
        if not cm.is_zero and cm != CostModel(0.0, cfg.eps):
            raise ConfigError("eps_sigma", "the phase adversary fixes eps_pi=0, eps_sigma=eps")
    grid = cfg.T_grid if cfg.T_grid is not None else [cfg.T]
    summaries, rows = [], []
    for j, T in enumerate(grid):
        proc = build_process(cfg, T)
        try:
            stats = monte_carlo(proc, trader, cm, cfg.trials, cfg.seed + j)
        except (TypeError, DiscontinuousCdf) as exc:
            raise ConfigError("trader", f"{cfg.trader} cannot trade this instance: {exc}") from None
        summary = {"T": proc.horizon, **stats.summary()}
        summaries.append(summary)
        for row in stats.rows():
            rows.append({"T": proc.horizon, **row} if cfg.T_grid is not None else row)
    if cfg.T_grid is None:
        report = summaries[0]
    else:
        report = {"schema_version": SCHEMA_VERSION, "grid": summaries}
        if len(grid) >= 3:
            a = [s["alg_mean"] for s in summaries]
            o = [s["opt_mean"] for s in summaries]
            try:
                fit = analysis.fit_competitive_ratio(a, o)
                report.update(alpha_hat=fit[0], c_hat=fit[1])
            except DegenerateFit:
                pass
    report["config"] = cfg.to_dict()
    out.write(_dump_json(report) if cfg.format == "json" else _flat_csv(report))
    _write(cfg.output, _rows_text(rows, cfg.format))
    return 0


def _verify_theorem1(cfg, args, out):
    n = args.random_instances
    if n < 1:
        raise ConfigError("random_instances", "must be >= 1")
    general, iid = analysis.theorem1_sweep(n, cfg.seed, raise_on_violation=False)
    table = []
    for family, reps in (("general (3x)", general), ("equal-mean (2x)", iid)):
        table.append({"family": family, "instances": len(reps),
                      "violations": sum(not r.passed for r in reps),
                      "min_slack": min(r.slack for r in reps),
                      "max_ratio": max(r.e_opt / r.e_alg for r in reps if r.e_alg > 0)})
    ok = all(t["violations"] == 0 for t in table)
    full = {"schema_version": SCHEMA_VERSION, "check": "theorem1", "seed": cfg.seed,
            "families": table, "pass": ok,
            "reports": [r.to_dict() for r in general + iid]}
    if args.format == "json":
        out.write(_dump_json({k: v for k, v in full.items() if k != "reports"}))
    else:
        out.write(f"{'family':<18}{'instances':>10}{'violations':>12}{'min_slack':>14}"
                  f"{'max_ratio':>12}\n")
        for t in table:
            out.write(f"{t['family']:<18}{t['instances']:>10}{t['violations']:>12}"
                      f"{t['min_slack']:>14.6g}{t['max_ratio']:>12.6f}\n")
        out.write("PASS\n" if ok else "FAIL\n")
    _write(cfg.output, _dump_json(full))
    return ok


def _verify_theorem2(cfg, args, out):
    if cfg.dist is None:
        raise ConfigError("dist", "theorem2 needs --dist")
    if cfg.T is None:
        raise ConfigError("T", "theorem2 needs --T")
    d = load_distribution(cfg.dist)
    try:
        rep = analysis.theorem2_chain(d, cfg.cost_model, cfg.T, cfg.trials, cfg.seed)
    except DiscontinuousCdf as exc:
        raise ConfigError("dist", f"{exc}; add delta > 0 to the distribution") from None
    rep = {"schema_version": SCHEMA_VERSION, "check": "theorem2", "seed": cfg.seed, **rep}
    if args.format == "json":
        out.write(_dump_json(rep))
    else:
        out.write(f"thresholds  z_L={rep['thresholds']['z_low']:.9g} "
                  f"z_H={rep['thresholds']['z_high']:.9g} p={rep['thresholds']['p']:.9g} "
                  f"v={rep['v']:.9g}\n")
        out.write(f"(a) E[ALG] {rep['alg_mean']:.6f} +- {rep['alg_se']:.6f} "
                  f">= {rep['alg_lower_bound']:.6f}  {'ok' if rep['a'] else 'FAIL'}\n")
        out.write(f"(b) E[OPT] {rep['opt_mean']:.6f} +- {rep['opt_se']:.6f} "
                  f"<= {rep['opt_upper_bound']:.6f}  {'ok' if rep['b'] else 'FAIL'}\n")
        out.write(f"(c) E[OPT - 2 ALG] {rep['gap_mean']:.6f} +- {rep['gap_se']:.6f} "
                  f"<= v = {rep['v']:.6f}  {'ok' if rep['c'] else 'FAIL'}\n")
        out.write(f"ratio {rep['ratio']:.6f} (allowance 2 + v/E[ALG] = "
                  f"{rep['ratio_allowance']:.6f})\n")
        out.write("PASS\n" if rep["pass"] else "FAIL\n")
    _write(cfg.output, _dump_json(rep))
    return rep["pass"]


def _verify_lowerbound(cfg, args, out):
    which = args.which or "both"
    if which not in ("adversarial", "iid", "both"):
        raise ConfigError("which", "lowerbound takes adversarial, iid or both")
    for name in ("eps", "T"):
        if getattr(cfg, name) is None:
            raise ConfigError(name, f"lowerbound needs --{name}")
    reps = []
    try:
        if which in ("adversarial", "both"):
            reps.append(analysis.lower_bound_adversarial(cfg.eps, cfg.T))
        if which in ("iid", "both"):
            rep = analysis.lower_bound_iid(cfg.eps, cfg.T)
            if cfg.seed is not None and args.trials is not None:
                rep["monte_carlo"] = analysis.lower_bound_iid_monte_carlo(
                    cfg.eps, cfg.T, cfg.trials, cfg.seed)
                rep["pass"] = rep["pass"] and rep["monte_carlo"]["pass"]
            reps.append(rep)
    except ValueError as exc:
        raise ConfigError("T", str(exc)) from None
    ok = all(r["pass"] for r in reps)
    full = {"schema_version": SCHEMA_VERSION, "check": "lowerbound", "reports": reps, "pass": ok}
    if args.format == "json":
        out.write(_dump_json(full))
    else:
        for r in reps:
            out.write(f"{r['instance']:<10} eps={r['eps']:g} T={r['T']} E[OPT]={r['e_opt']:.6f} "
                      f"E[ALG]={r['e_alg']:.6f} ratio={r['ratio']:.6f} "
                      f"bound={r['bound']:.6f}  {'ok' if r['pass'] else 'FAIL'}\n")
            if "monte_carlo" in r:
                mc = r["monte_carlo"]
                out.write(f"{'':<10} monte carlo ratio {mc['ratio']:.6f} "
                          f"[{mc['ratio_ci_low']:.6f}, {mc['ratio_ci_high']:.6f}]  "
                          f"{'ok' if mc['pass'] else 'FAIL'}\n")
        out.write("PASS\n" if ok else "FAIL\n")
    _write(cfg.output, _dump_json(full))
    return ok


def _verify_appendix(cfg, args, out):
    which = args.which or "both"
    if which not in ("phase", "eps-margin", "both"):
        raise ConfigError("which", "appendix takes phase, eps-margin or both")
    eps = 0.1 if cfg.eps is None else cfg.eps
    reps = []
    if which in ("phase", "both"):
        reps.append({"check": "phase-adversary", **analysis.phase_adversary_check(
            eps, cfg.phases if cfg.phases is not None else 1000, cfg.k)})
    if which in ("eps-margin", "both"):
        if cfg.seed is None:
            raise ConfigError("seed", "--seed is required; runs are never seeded from the clock")
        T = 10_000 if cfg.T is None else cfg.T
        trials = args.trials if args.trials is not None else 1000
        reps.append({"check": "eps-margin", **analysis.eps_margin_failure(
            eps, T, trials, cfg.seed)})
    ok = all(r["pass"] for r in reps)
    full = {"schema_version": SCHEMA_VERSION, "check": "appendix", "reports": reps, "pass": ok}
    if args.format == "json":
        out.write(_dump_json(full))
    else:
        for r in reps:
            if r["check"] == "phase-adversary":
                for name in ("blsh", "greedy"):
                    out.write(f"phase adversary vs {name:<7} phases={r['phases']} "
                              f"victim={r[name]['alg_profit']:.9f} "
                              f"prophet={r[name]['opt_profit']:.9f} "
                              f"(target {r['prophet_target']:g})\n")
            else:
                out.write(f"eps-margin  E[ALG]={r['alg_exact']:.6f} (<= {1 + r['eps']:g}) "
                          f"E[OPT]={r['opt_mean']:.6f} +- {r['opt_se']:.6f} "
                          f"(>= {r['opt_lower_bound']:.6f}) ratio={r['ratio']:.3f}\n")
        out.write("PASS\n" if ok else "FAIL\n")
    _write(cfg.output, _dump_json(full))
    return ok


def cmd_verify(cfg: ExperimentConfig, args, out=None) -> int:
    out = sys.stdout if out is None else out
    target = args.target
    if target == "theorem1":
        cfg.instance = cfg.instance or "prop-adv"  # unused; satisfies the source check
        cfg.validate()
        ok = _verify_theorem1(cfg, args, out)
    elif target == "theorem2":
        cfg.validate()
        ok = _verify_theorem2(cfg, args, out)
    elif target == "lowerbound":
        cfg.instance = cfg.instance or "prop-adv"
        cfg.validate(need_seed=False)
        ok = _verify_lowerbound(cfg, args, out)
    else:
        cfg.instance = cfg.instance or "phase"
        cfg.validate(need_seed=False)
        ok = _verify_appendix(cfg, args, out)
    return 0 if ok else 1


def cmd_thresholds(args, out=None) -> int:
    out = sys.stdout if out is None else out
    cfg = ExperimentConfig(dist=args.dist, eps_pi=args.eps_pi, eps_sigma=args.eps_sigma)
    cfg.validate(need_seed=False)
    d = load_distribution(args.dist)
    hint = "add delta > 0 to the distribution to make its CDF continuous"
    try:
        if not d.is_continuous and not d.is_point_mass:
            raise DiscontinuousCdf(f"{args.dist} has {len(d.atoms)} atoms and delta = 0")
        th = solve_thresholds(d, cfg.cost_model)
    except DiscontinuousCdf as exc:
        raise ConfigError("dist", f"{exc}; {hint}") from None
    rep = {"schema_version": SCHEMA_VERSION, "eps_pi": args.eps_pi,
           "eps_sigma": args.eps_sigma, **th.to_dict()}
    if args.format == "json":
        out.write(_dump_json(rep))
    else:
        for key in ("z_low", "z_high", "v", "p", "v_low", "v_high", "median",
                    "residual_prob", "residual_price"):
            out.write(f"{key:<15}{rep[key]!r}\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "thresholds":
            return cmd_thresholds(args)
        cfg = config_from_args(args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        return cmd_verify(cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
