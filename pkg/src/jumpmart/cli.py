"""Command-line front end.

    jumpmart simulate --model stopped_scaled_cpp --a 0.5 --b 0.4 --rep 3
    jumpmart exponential --model compensated_poisson --reps 10000
    jumpmart check-inequalities --samples 1000000 --seed 7
    jumpmart novikov --model compensated_poisson --alpha 0.5
    jumpmart martingale-test --model compensated_poisson --a 1 --intensity 1 --t 1 --reps 1000000 --seed 42
    jumpmart example-optimality --delta 0.75

Settings come from flags, then ``--config FILE`` (flat ``key = value``
lines named like the flags), then built-in defaults.  Exit status: 0 when
every check passed, 1 when a verification check failed, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from jumpmart import __version__
from jumpmart import criteria, inequalities
from jumpmart.calculus import (
    log_stochastic_exponential,
    quadratic_variation,
    sde_residual_check,
)
from jumpmart.errors import JumpmartError
from jumpmart.generators import generate, resolve_threads, thread_limit
from jumpmart.paths import KINDS, JumpLaw, ModelSpec, dump_csv
from jumpmart.reports import csv_text, dumps, write_text
from jumpmart.rng import RngStream

log = logging.getLogger("jumpmart")

COMMANDS = ("simulate", "exponential", "check-inequalities", "novikov", "martingale-test", "example-optimality")
EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 1, 2

DEFAULTS = {
    "model": "compensated_poisson",
    "sigma": 1.0,
    "intensity": 1.0,
    "a": 1.0,
    "b": 0.4,
    "jump_law": "exponential",
    "jump_mean": 1.0,
    "jump_low": 0.0,
    "jump_high": 2.0,
    "t": 1.0,
    "step": None,
    "rep": 0,
    "alpha": 1.0,
    "eps_grid": criteria.DEFAULT_EPS_GRID,
    "scale": 1.0,
    "delta": 0.75,
    "reps": 100_000,
    "samples": 1_000_000,
    "seed": 1,
    "threads": None,
    "ci_level": 0.99,
    "blocks": 64,
    "out": None,
    "format": None,
}
COMMAND_DEFAULTS = {
    "exponential": {"reps": 10_000},
    "example-optimality": {"a": None, "b": None},
}
CSV_FIRST = ("simulate", "check-inequalities")


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: ModelSpec | None
    alpha: float
    eps_grid: tuple[float, ...]
    n_reps: int
    seed: int
    threads: int
    ci_level: float
    out_path: str
    format: str
    options: dict = field(default_factory=dict)

    def provenance(self) -> dict:
        """Everything that determines the results; threads and output path do not."""
        out = {f: getattr(self, f) for f in self.__dataclass_fields__ if f not in ("threads", "out_path")}
        out["model"] = None if self.model is None else self.model.to_dict()
        return out


def _eps_grid(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _threads(text: str) -> str | int:
    return text if text == "auto" else int(text)


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="flat key = value file with flag names as keys")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--threads", type=_threads, default=S, help="worker threads or 'auto' (env JUMPMART_THREADS)")
    p.add_argument("--ci-level", type=float, default=S)
    p.add_argument("--out", default=S, help="report path (default <command>.<format>)")
    p.add_argument("--format", choices=("json", "csv"), default=S)


def _add_model(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--model", choices=KINDS, default=S)
    p.add_argument("--sigma", type=float, default=S)
    p.add_argument("--intensity", type=float, default=S)
    p.add_argument("--a", type=float, default=S)
    p.add_argument("--b", type=float, default=S)
    p.add_argument("--jump-law", choices=("exponential", "deterministic", "uniform"), default=S)
    p.add_argument("--jump-mean", type=float, default=S, help="mean (exponential) or value (deterministic)")
    p.add_argument("--jump-low", type=float, default=S)
    p.add_argument("--jump-high", type=float, default=S)
    p.add_argument("--t", type=float, default=S, help="horizon")
    p.add_argument("--step", type=float, default=S, help="Brownian grid step")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="jumpmart", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"jumpmart {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}
    for name in COMMANDS:
        p = sub.add_parser(name)
        _add_common(p)
        subs[name] = p
    for name in ("simulate", "exponential", "novikov", "martingale-test"):
        _add_model(subs[name])
    subs["simulate"].add_argument("--rep", type=int, default=S, help="replicate index")
    for name in ("exponential", "novikov", "martingale-test", "example-optimality"):
        subs[name].add_argument("--reps", type=int, default=S)
    subs["check-inequalities"].add_argument("--samples", type=int, default=S)
    subs["novikov"].add_argument("--alpha", type=float, default=S)
    subs["novikov"].add_argument("--eps-grid", type=_eps_grid, default=S, help="comma-separated, decreasing")
    subs["novikov"].add_argument("--scale", type=float, default=S, help="exponent multiplier, e.g. 1 - delta")
    subs["martingale-test"].add_argument("--blocks", type=int, default=S)
    ex = subs["example-optimality"]
    ex.add_argument("--delta", type=float, default=S)
    ex.add_argument("--a", type=float, default=S, help="override the searched a")
    ex.add_argument("--b", type=float, default=S, help="override the searched b")
    ex.add_argument("--alpha", type=float, default=S)
    ex.add_argument("--blocks", type=int, default=S)
    return parser, subs


def _config_argv(path: str) -> list[str]:
    cp = configparser.ConfigParser(comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.read_string("[run]\n" + Path(path).read_text(encoding="utf-8"))
    argv = []
    for key, value in cp.items("run"):
        argv += ["--" + key.replace("_", "-"), value]
    return argv


def _model_from(s: dict) -> ModelSpec:
    kind = s["model"]
    t = s["t"]
    if kind == "brownian":
        return ModelSpec.brownian(s["sigma"], t)
    if kind == "compensated_poisson":
        return ModelSpec.compensated_poisson(s["intensity"], s["a"], t)
    if kind == "compound_poisson_martingale":
        law = {
            "exponential": lambda: JumpLaw.exponential(s["jump_mean"]),
            "deterministic": lambda: JumpLaw.deterministic(s["jump_mean"]),
            "uniform": lambda: JumpLaw.uniform(s["jump_low"], s["jump_high"]),
        }[s["jump_law"]]()
        return ModelSpec.compound_poisson(s["intensity"], law, t)
    if kind == "stopped_scaled_cpp":
        return ModelSpec.stopped_scaled_cpp(s["a"], s["b"])
    return ModelSpec.zero(t)


def parse_config(argv: list[str]) -> tuple[RunConfig, bool]:
    parser, subs = build_parser()
    ns = parser.parse_args(argv)
    cli = {k: v for k, v in vars(ns).items() if k not in ("command", "verbose")}
    settings = {**DEFAULTS, **COMMAND_DEFAULTS.get(ns.command, {})}
    if "config" in cli:
        file_ns = subs[ns.command].parse_args(_config_argv(cli.pop("config")))
        settings.update(vars(file_ns))
    settings.update(cli)
    fmt = settings["format"] or ("csv" if ns.command in CSV_FIRST else "json")
    model = None
    if ns.command in ("simulate", "exponential", "novikov", "martingale-test"):
        model = _model_from(settings)
    options = {
        k: settings[k]
        for k in {
            "simulate": ("rep", "step"),
            "exponential": ("step",),
            "check-inequalities": ("samples",),
            "novikov": ("scale",),
            "martingale-test": ("blocks", "step"),
            "example-optimality": ("delta", "a", "b", "blocks"),
        }[ns.command]
    }
    config = RunConfig(
        command=ns.command,
        model=model,
        alpha=float(settings["alpha"]),
        eps_grid=tuple(settings["eps_grid"]),
        n_reps=int(settings["reps"]),
        seed=int(settings["seed"]),
        threads=resolve_threads(settings["threads"]),
        ci_level=float(settings["ci_level"]),
        out_path=settings["out"] or f"{ns.command}.{fmt}",
        format=fmt,
        options=options,
    )
    return config, ns.verbose


# -- commands -----------------------------------------------------------------------
# Each returns (result, checks, csv (columns, rows), summary lines).


def _cmd_simulate(cfg: RunConfig):
    stream = RngStream(cfg.seed, cfg.options["rep"])
    path = generate(cfg.model, stream, cfg.options["step"])
    end = path.end_time
    var = quadratic_variation(path, end)
    result = {
        "seed_tag": list(path.seed_tag),
        "end_time": end,
        "stop_time": path.stop_time,
        "terminal_value": path.value(end),
        "variation": asdict(var),
        "log_stochastic_exponential": log_stochastic_exponential(path, end),
        "grid_times": path.grid_times,
        "continuous_values": path.continuous_values,
        "jump_times": path.jump_times,
        "jump_sizes": path.jump_sizes,
    }
    checks = {"nonnegative_jumps": bool(np.all(path.jump_sizes >= 0))}
    if cfg.model.kind == "stopped_scaled_cpp":
        checks["hitting_identity"] = abs(path.n_jumps - (1 + cfg.model["b"]) * end + 1) <= 1e-12
    rows = [line.split(",") for line in dump_csv(path).splitlines()[1:]]
    lines = [f"{cfg.model.kind}: {path.n_jumps} jumps, M_end = {result['terminal_value']:.6g} at t = {end:.6g}"]
    return result, checks, (("t", "value", "is_jump"), rows), lines


def _closed_form_log(spec: ModelSpec, n_jumps: int, end: float) -> float | None:
    if spec.kind == "compensated_poisson":
        a = spec["a"]
        return n_jumps * math.log1p(a) - a * spec["intensity"] * end
    if spec.kind == "stopped_scaled_cpp":
        a, b = spec["a"], spec["b"]
        return criteria.stopped_exponential_theta(a, b) * end - math.log1p(a)
    if spec.kind == "zero":
        return 0.0
    return None


def _cmd_exponential(cfg: RunConfig):
    spec = cfg.model
    rows, rel_errors, residuals, values = [], [], [], []
    for i in range(cfg.n_reps):
        path = generate(spec, RngStream(cfg.seed, i), cfg.options["step"])
        end = path.end_time
        log_e = log_stochastic_exponential(path, end)
        closed = _closed_form_log(spec, path.n_jumps, end)
        rel = None if closed is None else abs(math.expm1(log_e - closed))
        res = sde_residual_check(path) if spec.is_pure_jump else None
        values.append(math.exp(log_e))
        if rel is not None:
            rel_errors.append(rel)
        if res is not None:
            residuals.append(res)
        rows.append([i, path.n_jumps, end, math.exp(log_e), None if closed is None else math.exp(closed), rel, res])
    result = {
        "n_paths": cfg.n_reps,
        "mean_exponential": float(np.sum(values) / len(values)),
        "max_rel_error_closed_form": max(rel_errors) if rel_errors else None,
        "max_sde_residual": max(residuals) if residuals else None,
    }
    checks = {}
    if rel_errors:
        checks["closed_form"] = result["max_rel_error_closed_form"] <= 1e-12
    if residuals:
        checks["sde_residual"] = result["max_sde_residual"] <= 1e-10
    cols = ("rep", "n_jumps", "end_time", "exponential", "closed_form", "rel_error", "sde_residual")
    lines = [f"{cfg.n_reps} paths, mean E(M) = {result['mean_exponential']:.6g}",
             f"max closed-form rel error {result['max_rel_error_closed_form']}, "
             f"max SDE residual {result['max_sde_residual']}"]
    return result, checks, (cols, rows), lines


def _cmd_check_inequalities(cfg: RunConfig):
    searches = inequalities.check_all(cfg.options["samples"], cfg.seed)
    result = {
        s.lemma: {
            "n_points": s.n_points,
            "worst_relative_margin": s.worst_relative,
            "worst_lower": asdict(s.worst_lower),
            "worst_upper": asdict(s.worst_upper),
        }
        for s in searches
    }
    checks = {s.lemma: s.passed for s in searches}
    rows = [row for s in searches for row in s.csv_rows()]
    lines = [f"{s.lemma:13s} worst relative margin {s.worst_relative: .3e}  {'ok' if s.passed else 'FAIL'}"
             for s in searches]
    return result, checks, (inequalities.CSV_COLUMNS, rows), lines


def _cmd_novikov(cfg: RunConfig):
    curve = criteria.novikov_functional(
        cfg.model, cfg.alpha, cfg.eps_grid, cfg.n_reps, cfg.seed,
        scale=cfg.options["scale"], ci_level=cfg.ci_level, threads=cfg.threads,
    )
    checks = {}
    if curve.estimates is not None:
        # oracle inside the MC interval wherever both exist and the tail is light
        for eps, o, est in zip(curve.eps_grid, curve.oracle_values, curve.estimates):
            if o is not None and math.isfinite(o) and not est.tail_flag:
                checks[f"oracle_mc_agreement_eps={eps:g}"] = est.contains(math.exp(o / eps))
    rows = [[eps, v, o, m] for eps, v, o, m in zip(
        curve.eps_grid, curve.values, curve.oracle_values, curve.mc_values or [None] * len(curve.eps_grid))]
    lines = [f"eps={eps:<6g} g={v:.6g}" for eps, v in zip(curve.eps_grid, curve.values)]
    lines.append(f"verdict: {curve.verdict} (source: {curve.source})")
    return curve, checks, (("eps", "g", "g_oracle", "g_mc"), rows), lines


def _cmd_martingale_test(cfg: RunConfig):
    res = criteria.martingale_test(
        cfg.model, cfg.n_reps, cfg.seed, cfg.ci_level,
        n_blocks=cfg.options["blocks"], step=cfg.options["step"], threads=cfg.threads,
    )
    checks = {"no_above_one_anomaly": not res.anomaly}
    e = res.estimate
    rows = [[e.estimator, e.mean, e.std_error, e.ci_low, e.ci_high, e.n_reps, res.verdict,
             res.oracle_value, res.final_verdict]]
    cols = ("estimator", "mean", "std_error", "ci_low", "ci_high", "n_reps", "verdict", "oracle", "final_verdict")
    lines = [f"E E(M) ~ {e.mean:.6g} (SE {e.std_error:.3g}, {e.estimator}), "
             f"CI [{e.ci_low:.6g}, {e.ci_high:.6g}] -> {res.verdict}"]
    if res.oracle_value is not None:
        lines.append(f"oracle {res.oracle_value:.6g} -> {res.oracle_verdict}")
    return res, checks, (cols, rows), lines


def _cmd_example(cfg: RunConfig):
    o = cfg.options
    delta = o["delta"]
    a, b = criteria.search_example_params(delta)
    a = a if o["a"] is None else o["a"]
    b = b if o["b"] is None else o["b"]
    report = criteria.example_conditions(
        delta, a, b, cfg.alpha, cfg.n_reps, cfg.seed,
        ci_level=cfg.ci_level, n_blocks=o["blocks"], threads=cfg.threads,
    )
    d = report.to_dict()
    rows = [[k, v] for k, v in d.items() if not isinstance(v, dict)]
    lines = [
        f"delta={delta:g}: a={a:.6g}, b={b:.6g}",
        f"cond1: E exp(theta T_b) = {report.cond1_lhs:.6g} < {report.cond1_rhs:.6g}: {report.cond1_holds}",
        f"cond2: rate {report.exp_moment_rate:.6g} <= boundary {report.boundary:.6g}: {report.cond2_holds}",
        f"E E(M)_inf = {report.e_em_infty:.6g} -> {report.ui_verdict}",
    ]
    return report, report.checks, (("key", "value"), rows), lines


HANDLERS = {
    "simulate": _cmd_simulate,
    "exponential": _cmd_exponential,
    "check-inequalities": _cmd_check_inequalities,
    "novikov": _cmd_novikov,
    "martingale-test": _cmd_martingale_test,
    "example-optimality": _cmd_example,
}


def run(config: RunConfig) -> int:
    with thread_limit(config.threads):
        result, checks, (cols, rows), lines = HANDLERS[config.command](config)
    passed = all(checks.values())
    if config.format == "json":
        text = dumps({
            "artifact": "jumpmart",
            "version": __version__,
            "command": config.command,
            "seed": config.seed,
            "config": config.provenance(),
            "result": result,
            "checks": checks,
            "passed": passed,
        })
    else:
        text = csv_text(cols, rows)
    write_text(config.out_path, text)
    for line in lines:
        print(line)
    failed = [k for k, ok in checks.items() if not ok]
    print(f"{'FAILED: ' + ', '.join(failed) if failed else 'all checks passed'} -> {config.out_path}")
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config, verbose = parse_config(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_CONFIG if exc.code else EXIT_OK
    except (JumpmartError, ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format="%(name)s: %(message)s")
    log.debug("config %s", config)
    try:
        return run(config)
    except (JumpmartError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
