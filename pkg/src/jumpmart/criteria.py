"""Decision-level checks: the exponential-moment functional, the E E(M) = 1 test,
the Laplace transform of the Poisson first-passage time, and the optimality
example built on it.

The example process is M_t = a(N_{t ^ T_b} - t ^ T_b) with
T_b = inf{t : N_t - (1+b)t = -1}.  With X_t = (1+b)t - N_t, T_b is the first
passage of X above level 1, and X has Laplace exponent

    f_b(lam) = exp(-lam) + lam (1+b) - 1,

so that E exp(theta T_b) = exp(-lam_+) where lam_+ is the largest root of
f_b(lam) = -theta, finite exactly for theta <= (1+b) log(1+b) - b.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from jumpmart.calculus import batch_blend, batch_log_exponential, batch_variation
from jumpmart.errors import ConfigError, DomainError, NumericError
from jumpmart.estimators import DEFAULT_BLOCKS, McEstimate, median_of_means, sample_mean
from jumpmart.generators import simulate_batch
from jumpmart.paths import ModelSpec

DEFAULT_EPS_GRID = (0.2, 0.1, 0.05, 0.02, 0.01)
MIN_MARTINGALE_REPS = 10_000
ROOT_TOL = 1e-12
STRICT_SLACK = 1e-9

# Verdicts
CONSISTENT, BELOW, ABOVE = "consistent_with_one", "below_one", "above_one"
FINITE, DIVERGENT, INCONCLUSIVE = "finite_liminf_evidence", "divergence_evidence", "inconclusive"


def fb(lam: float, b: float) -> float:
    """Laplace exponent exp(-lam) + lam(1+b) - 1 of X_t = (1+b)t - N_t."""
    if not b > 0:
        raise DomainError(f"b must be positive, got {b}")
    return math.exp(-lam) + lam * (1.0 + b) - 1.0


def fb_boundary(b: float) -> float:
    """-min f_b = (1+b) log(1+b) - b, attained at lam = -log(1+b)."""
    return (1.0 + b) * math.log1p(b) - b


def _excess(s: float) -> float:
    """exp(-s) - 1 + s, accurate for small s."""
    if s < 1e-4:
        return s * s * (0.5 - s * (1.0 / 6.0 - s / 24.0))
    return math.expm1(-s) + s


def fb_largest_root(level: float, b: float) -> float:
    """Largest lam with f_b(lam) = level, for level >= min f_b.

    With lam = -log(1+b) + s, f_b(lam) - min f_b = (1+b)(exp(-s) - 1 + s),
    which is increasing in s >= 0.  Bisection on s over [0, hi], hi doubled
    until the bracket closes.  Working with the excess over the minimum keeps
    the root well conditioned right up to the boundary.
    """
    c = 1.0 + b
    lam_min = -math.log1p(b)
    target = (level + fb_boundary(b)) / c
    if target < -ROOT_TOL:
        raise DomainError(f"level {level} below the minimum of f_b")
    target = max(target, 0.0)
    lo, hi = 0.0, 1.0
    while _excess(hi) < target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _excess(mid) < target:
            lo = mid
        else:
            hi = mid
    root = lam_min + (hi if abs(_excess(hi) - target) <= abs(_excess(lo) - target) else lo)
    if abs(fb(root, b) - level) > ROOT_TOL:
        raise NumericError(f"root finding for f_b = {level} did not converge")
    return root


def laplace_oracle_Tb(theta: float, b: float) -> float:
    """E exp(theta T_b); +inf beyond the boundary (1+b) log(1+b) - b."""
    if not b > 0:
        raise DomainError(f"b must be positive, got {b}")
    if theta > fb_boundary(b):
        return math.inf
    return math.exp(-fb_largest_root(-theta, b))


def supermartingale_bound(lam: float) -> float:
    """Optional-sampling bound E exp(-T_b f_b(lam)) <= exp(-lam)."""
    return math.exp(-lam)


@dataclass(frozen=True)
class BoundPoint:
    """E exp(-T_b f_b(lam)) by Monte Carlo against exp(-lam) and the exact value."""

    lam: float
    bound: float
    oracle: float
    estimate: McEstimate

    @property
    def holds(self) -> bool:
        return self.estimate.mean <= self.bound * (1.0 + 3.0 * self.estimate.relative_se)

    def to_dict(self) -> dict:
        return {"lam": self.lam, "bound": self.bound, "oracle": self.oracle,
                "estimate": self.estimate.to_dict(), "holds": self.holds}


def supermartingale_check(
    b: float, lams: Sequence[float], n_reps: int, seed: int, *, ci_level: float = 0.99, threads=None
) -> list[BoundPoint]:
    """Check the bound on one common set of T_b samples.

    The exact value is exp(-lam_+(f_b(lam))); it equals the bound when lam
    lies on the increasing branch, lam >= -log(1+b).
    """
    spec = ModelSpec.stopped_scaled_cpp(1.0, b)
    t_b = simulate_batch(spec, n_reps, seed, threads=threads).end_time
    out = []
    for lam in lams:
        level = fb(lam, b)
        with np.errstate(over="ignore"):
            sample = np.exp(-level * t_b)
        out.append(BoundPoint(
            lam=float(lam),
            bound=supermartingale_bound(lam),
            oracle=laplace_oracle_Tb(-level, b),
            estimate=sample_mean(sample, seed, ci_level),
        ))
    return out


# -- exponential-moment functional ---------------------------------------------


def blend_mgf_oracle(spec: ModelSpec, alpha: float, c: float) -> float | None:
    """E exp(c (alpha [M] + (1-alpha) <M>)) at the end time in closed form, if known."""
    p = spec.parameters
    if spec.kind == "zero":
        return 1.0
    if spec.kind == "brownian":
        return math.exp(c * p["sigma"] ** 2 * spec.horizon)
    if spec.kind == "compensated_poisson":
        a2, lt = p["a"] ** 2, p["intensity"] * spec.horizon
        return math.exp(c * a2 * (1 - alpha) * lt + lt * math.expm1(c * a2 * alpha))
    if spec.kind == "compound_poisson_martingale":
        law, lt = spec.jump_law, p["intensity"] * spec.horizon
        mgf = law.mgf_of_square(c * alpha)
        if math.isinf(mgf):
            return math.inf
        return math.exp(c * (1 - alpha) * lt * law.second_moment + lt * (mgf - 1.0))
    # stopped: blend = a^2 (alpha N_T + (1-alpha) T) = a^2 (b alpha + 1) T - alpha a^2
    a2, b = p["a"] ** 2, p["b"]
    lap = laplace_oracle_Tb(c * a2 * (b * alpha + 1.0), b)
    return lap * math.exp(-alpha * c * a2)


@dataclass(frozen=True)
class NovikovCurve:
    """g(eps) = eps log E exp((1-eps) scale (alpha [M] + (1-alpha) <M>)/2) on a grid.

    ``values`` uses the closed form where one exists (``source == "oracle"``)
    and Monte Carlo otherwise; ``mc_values`` always holds the Monte Carlo
    version when replications were run.
    """

    alpha: float
    scale: float
    eps_grid: tuple[float, ...]
    values: tuple[float, ...]
    source: str
    oracle_values: tuple[float | None, ...]
    mc_values: tuple[float, ...] | None
    estimates: tuple[McEstimate, ...] | None
    verdict: str

    def to_dict(self) -> dict:
        out = asdict(self)
        out["estimates"] = None if self.estimates is None else [e.to_dict() for e in self.estimates]
        return out


def _check_eps_grid(eps_grid: Sequence[float]) -> tuple[float, ...]:
    grid = tuple(float(e) for e in eps_grid)
    if not grid or any(not 0 < e < 1 for e in grid):
        raise ConfigError("eps values must lie in (0, 1)")
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("eps grid must be strictly decreasing")
    return grid


def _g(eps: float, expectation: float) -> float:
    if math.isinf(expectation):
        return math.inf
    return eps * math.log(expectation)


def trend_verdict(values: Sequence[float], tail_flags: Sequence[bool] = ()) -> str:
    """finite_liminf_evidence when |g| does not grow as eps decreases."""
    if any(not math.isfinite(v) for v in values):
        return DIVERGENT
    if any(tail_flags):
        return INCONCLUSIVE
    if abs(values[-1]) <= abs(values[0]) * (1 + 1e-9) + 1e-12:
        return FINITE
    return INCONCLUSIVE


def novikov_functional(
    spec: ModelSpec,
    alpha: float,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    n_reps: int = 0,
    seed: int = 0,
    *,
    scale: float = 1.0,
    ci_level: float = 0.99,
    threads=None,
) -> NovikovCurve:
    """Evaluate the exponential-moment functional along a decreasing eps grid.

    ``scale`` multiplies the exponent; ``scale = 1 - delta`` gives the
    discounted functional of the optimality example.  With ``n_reps > 0``
    every eps is also estimated by Monte Carlo on one common set of paths.
    """
    if not 0 <= alpha <= 1:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    grid = _check_eps_grid(eps_grid)
    oracles = []
    for eps in grid:
        o = blend_mgf_oracle(spec, alpha, 0.5 * (1 - eps) * scale)
        oracles.append(None if o is None else _g(eps, o))

    mc_values = estimates = None
    if n_reps > 0:
        blend = batch_blend(simulate_batch(spec, n_reps, seed, threads=threads), alpha)
        est_list, mc_list = [], []
        for eps in grid:
            with np.errstate(over="ignore"):
                sample = np.exp(0.5 * (1 - eps) * scale * blend)
            e = sample_mean(sample, seed, ci_level)
            est_list.append(e)
            mc_list.append(_g(eps, e.mean) if math.isfinite(e.mean) else math.inf)
        estimates, mc_values = tuple(est_list), tuple(mc_list)

    if all(o is not None for o in oracles):
        values, source, flags = tuple(oracles), "oracle", ()
    elif mc_values is not None:
        values, source, flags = mc_values, "monte_carlo", [e.tail_flag for e in estimates]
    else:
        raise ConfigError(f"no closed form for {spec.kind}; n_reps must be positive")
    return NovikovCurve(
        alpha=float(alpha),
        scale=float(scale),
        eps_grid=grid,
        values=values,
        source=source,
        oracle_values=tuple(oracles),
        mc_values=mc_values,
        estimates=estimates,
        verdict=trend_verdict(values, flags),
    )


# -- martingale test -------------------------------------------------------------


def stopped_exponential_theta(a: float, b: float) -> float:
    """theta with E(M)_inf = exp(theta T_b)/(1+a) for the stopped example."""
    return (1.0 + b) * math.log1p(a) - a


def stopped_exponential_oracle(a: float, b: float) -> float:
    return laplace_oracle_Tb(stopped_exponential_theta(a, b), b) / (1.0 + a)


def _verdict(est: McEstimate) -> str:
    if est.ci_high < 1.0:
        return BELOW
    if est.ci_low > 1.0:
        return ABOVE
    return CONSISTENT


def _value_verdict(value: float) -> str:
    if value < 1.0 - STRICT_SLACK:
        return BELOW
    if value > 1.0 + STRICT_SLACK:
        return ABOVE
    return CONSISTENT


@dataclass(frozen=True)
class MartingaleTest:
    """Monte Carlo test of E E(M) = 1 at the horizon or stopping time.

    ``verdict`` follows from ``estimate``'s interval; ``above_one`` would
    contradict the supermartingale property and signals a bug.  For the
    stopped example E(M) can have infinite variance, so ``estimate`` is a
    median of means and the closed-form ``oracle_verdict`` is authoritative.
    """

    model: dict
    estimate: McEstimate
    plain_estimate: McEstimate
    verdict: str
    oracle_value: float | None = None
    oracle_verdict: str | None = None

    @property
    def final_verdict(self) -> str:
        return self.oracle_verdict or self.verdict

    @property
    def anomaly(self) -> bool:
        return ABOVE in (self.verdict, self.oracle_verdict)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "estimate": self.estimate.to_dict(),
            "plain_estimate": self.plain_estimate.to_dict(),
            "verdict": self.verdict,
            "oracle_value": self.oracle_value,
            "oracle_verdict": self.oracle_verdict,
            "final_verdict": self.final_verdict,
        }


def martingale_test(
    spec: ModelSpec,
    n_reps: int,
    seed: int,
    ci_level: float = 0.99,
    *,
    n_blocks: int = DEFAULT_BLOCKS,
    step: float | None = None,
    threads=None,
) -> MartingaleTest:
    if n_reps < MIN_MARTINGALE_REPS:
        raise ConfigError(f"martingale_test needs at least {MIN_MARTINGALE_REPS} replications")
    batch = simulate_batch(spec, n_reps, seed, step=step, threads=threads)
    values = np.exp(batch_log_exponential(batch))
    oracle = oracle_verdict = None
    if spec.kind == "stopped_scaled_cpp":
        a, b = spec["a"], spec["b"]
        infinite_var = 2 * stopped_exponential_theta(a, b) > fb_boundary(b)
        plain = sample_mean(values, seed, ci_level, heavy_tail=infinite_var)
        est = median_of_means(values, seed, n_blocks, ci_level, heavy_tail=infinite_var)
        oracle = stopped_exponential_oracle(a, b)
        oracle_verdict = _value_verdict(oracle)
    else:
        plain = est = sample_mean(values, seed, ci_level)
    return MartingaleTest(spec.to_dict(), est, plain, _verdict(est), oracle, oracle_verdict)


# -- the optimality example --------------------------------------------------------


def _h(x: float) -> float:
    """log(1+x) - x/(1+x), continuous and increasing on [0, inf)."""
    return math.log1p(x) - x / (1.0 + x)


def a_condition(a: float, delta: float) -> bool:
    return a * a / 2 <= _h(a) / math.sqrt(1 - delta)


def b_condition(a: float, b: float, delta: float) -> bool:
    return math.sqrt(1 - delta) * _h(a) <= _h(b)


def search_example_params(delta: float, max_iter: int = 200) -> tuple[float, float]:
    """Pick 0 < b < a with (1-delta) a^2 (b alpha + 1)/2 <= (1+b) log(1+b) - b for all alpha.

    a is halved from 1 until a^2/2 <= h(a)/sqrt(1-delta); b then moves by
    bisection upward inside (0, a) until sqrt(1-delta) h(a) <= h(b), where
    h(x) = log(1+x) - x/(1+x).  The first pair found is returned.
    """
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    a = 1.0
    for _ in range(max_iter):
        if a_condition(a, delta):
            break
        a *= 0.5
    else:
        raise NumericError("no admissible a found")
    lo, hi = 0.0, a
    for _ in range(max_iter):
        b = 0.5 * (lo + hi)
        if b_condition(a, b, delta):
            return a, b
        lo = b
    raise NumericError("no admissible b found")


@dataclass(frozen=True)
class ExampleReport:
    """Both sufficient conditions of the optimality example at (delta, a, b, alpha).

    Condition 1: E exp(T_b((1+b) log(1+a) - a)) < 1 + a, which makes
    E E(M)_inf < 1, so E(M) is not a uniformly integrable martingale.
    Condition 2: E exp(T_b (1-delta) a^2 (b alpha + 1)/2) < inf, which keeps
    the (1-delta)-discounted exponential moment of the alpha-blend finite.
    """

    delta: float
    a: float
    b: float
    alpha: float
    b_below_a: bool
    cond1_theta: float
    cond1_lhs: float
    cond1_rhs: float
    cond1_margin: float
    cond1_holds: bool
    exp_moment_rate: float
    boundary: float
    cond2_oracle: float
    cond2_holds: bool
    cond2_by_alpha: dict
    e_em_infty: float
    ui_verdict: str
    note: str
    cond1_lhs_mc: McEstimate | None = None
    e_em_infty_mc: McEstimate | None = None
    e_em_infty_plain_mc: McEstimate | None = None
    mc_verdict: str | None = None
    identity_max_rel_error: float | None = None
    blend_identity_max_abs_error: float | None = None
    checks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            out[k] = v.to_dict() if isinstance(v, McEstimate) else v
        return out


UI_NOTE = (
    "E exp(theta T_b) < 1 + a is equivalent to E E(M)_inf < 1; since E(M) is uniformly "
    "integrable iff E E(M)_inf = 1, the strict inequality means E(M) is NOT uniformly integrable."
)


def exp_moment_rate(delta: float, a: float, b: float, alpha: float) -> float:
    return (1 - delta) * a * a * (b * alpha + 1) / 2


def example_conditions(
    delta: float,
    a: float,
    b: float,
    alpha: float = 1.0,
    n_reps: int = 0,
    seed: int = 0,
    *,
    ci_level: float = 0.99,
    n_blocks: int = DEFAULT_BLOCKS,
    threads=None,
) -> ExampleReport:
    """Evaluate both conditions by the Laplace oracle, and by Monte Carlo when ``n_reps > 0``."""
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if not (a > 0 and b > 0):
        raise DomainError("a and b must be positive")
    if not 0 <= alpha <= 1:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    theta = stopped_exponential_theta(a, b)
    lhs = laplace_oracle_Tb(theta, b)
    rhs = 1.0 + a
    boundary = fb_boundary(b)
    rate = exp_moment_rate(delta, a, b, alpha)
    by_alpha = {
        str(al): exp_moment_rate(delta, a, b, al) <= boundary for al in (0.0, 0.5, 1.0)
    }
    e_em = lhs / rhs
    report = dict(
        delta=delta, a=a, b=b, alpha=alpha, b_below_a=b < a,
        cond1_theta=theta, cond1_lhs=lhs, cond1_rhs=rhs, cond1_margin=rhs - lhs,
        cond1_holds=lhs < rhs - STRICT_SLACK,
        exp_moment_rate=rate, boundary=boundary,
        cond2_oracle=laplace_oracle_Tb(rate, b), cond2_holds=rate <= boundary,
        cond2_by_alpha=by_alpha, e_em_infty=e_em,
        ui_verdict="not_uniformly_integrable" if e_em < 1 - STRICT_SLACK else "uniformly_integrable",
        note=UI_NOTE,
    )
    if n_reps > 0:
        spec = ModelSpec.stopped_scaled_cpp(a, b)
        batch = simulate_batch(spec, n_reps, seed, threads=threads)
        t_b = batch.end_time
        heavy = 2 * theta > boundary
        exp_theta_t = np.exp(theta * t_b)
        em_path = np.exp(batch_log_exponential(batch))
        em_closed = exp_theta_t / rhs
        report["cond1_lhs_mc"] = sample_mean(exp_theta_t, seed, ci_level, heavy_tail=heavy)
        report["e_em_infty_mc"] = median_of_means(em_path, seed, n_blocks, ci_level, heavy_tail=heavy)
        report["e_em_infty_plain_mc"] = sample_mean(em_path, seed, ci_level, heavy_tail=heavy)
        report["mc_verdict"] = _verdict(report["e_em_infty_mc"])
        report["identity_max_rel_error"] = float(np.max(np.abs(em_path / em_closed - 1.0)))
        qv, pqv, _ = batch_variation(batch)
        blend = alpha * qv + (1 - alpha) * pqv
        affine = a * a * (alpha * ((1 + b) * t_b - 1) + (1 - alpha) * t_b)
        report["blend_identity_max_abs_error"] = float(np.max(np.abs(blend - affine) / np.maximum(1.0, affine)))
    out = ExampleReport(**report)
    checks = {
        "b_below_a": out.b_below_a,
        "cond1": out.cond1_holds,
        "cond2": out.cond2_holds,
        "cond2_all_alpha": all(by_alpha.values()),
        "e_em_infty_below_one": out.e_em_infty < 1.0,
    }
    if out.e_em_infty_mc is not None:
        checks["mc_not_above_one"] = out.mc_verdict != ABOVE
        checks["identity"] = out.identity_max_rel_error <= 1e-12
        checks["blend_identity"] = out.blend_identity_max_abs_error <= 1e-12
    object.__setattr__(out, "checks", checks)
    return out
