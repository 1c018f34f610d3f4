"""Signed margins of the elementary inequalities behind the exponential-moment criterion.

Each inequality has the shape ``0 <= middle <= c x^2``.  A margin function
returns ``middle`` together with ``lower_margin = middle`` and
``upper_margin = c x^2 - middle``; the inequality holds at a point iff both
margins are >= -tol * max(1, |middle|).

Every middle is an equality to O(x^3) at x = 0, so below ``SERIES_CUTOFF``
the middles and upper margins come from fourth-order Taylor expansions
instead of differences of nearly equal numbers.

All ``*_array`` functions are vectorized over numpy arrays; the scalar
functions wrap them and validate their domains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from jumpmart.errors import DomainError

SERIES_CUTOFF = 1e-4
DEFAULT_TOL = 1e-9

LEMMAS = ("log1", "log2", "pred1", "pred2", "alpha_lambda")


@dataclass(frozen=True)
class InequalityMargin:
    point: dict
    middle: float
    lower_margin: float
    upper_margin: float

    def holds(self, tol: float = DEFAULT_TOL) -> bool:
        scale = tol * max(1.0, abs(self.middle))
        return self.lower_margin >= -scale and self.upper_margin >= -scale


def _series(x, c2, c3, c4):
    """(middle, upper_margin) with middle = c2 x^2 + c3 x^3 + c4 x^4 and bound c2 x^2."""
    x2 = x * x
    tail = x2 * x * (c3 + c4 * x)
    return c2 * x2 + tail, -tail


def _assemble(x, direct, bound, series):
    small = x < SERIES_CUTOFF
    mid_s, up_s = series
    middle = np.where(small, mid_s, direct)
    upper = np.where(small, up_s, bound - direct)
    return middle, middle, upper


def log1_array(x, lam):
    """0 <= log((1 + lam x)/(1 + x)^lam) <= lam(1-lam)/2 x^2."""
    x, lam = np.broadcast_arrays(np.asarray(x, float), np.asarray(lam, float))
    c2 = 0.5 * lam * (1 - lam)
    direct = np.log1p(lam * x) - lam * np.log1p(x)
    series = _series(x, c2, lam * (lam - 1) * (lam + 1) / 3, -lam * (lam - 1) * (lam * lam + lam + 1) / 4)
    return _assemble(x, direct, c2 * x * x, series)


def log2_array(x, a):
    """0 <= log((1 + x)^a/(1 + a x)) <= a(a-1)/2 x^2."""
    x, a = np.broadcast_arrays(np.asarray(x, float), np.asarray(a, float))
    c2 = 0.5 * a * (a - 1)
    direct = a * np.log1p(x) - np.log1p(a * x)
    series = _series(x, c2, -a * (a - 1) * (a + 1) / 3, a * (a - 1) * (a * a + a + 1) / 4)
    return _assemble(x, direct, c2 * x * x, series)


def pred1_array(x, lam):
    """0 <= (1 + lam x) - (1 + x)^lam <= lam(1-lam)/2 x^2."""
    x, lam = np.broadcast_arrays(np.asarray(x, float), np.asarray(lam, float))
    c2 = 0.5 * lam * (1 - lam)
    direct = lam * x - np.expm1(lam * np.log1p(x))
    series = _series(
        x, c2, -lam * (lam - 1) * (lam - 2) / 6, -lam * (lam - 1) * (lam - 2) * (lam - 3) / 24
    )
    return _assemble(x, direct, c2 * x * x, series)


def pred2_array(x, a):
    """0 <= (1 + x)^a - (1 + a x) <= a(a-1)/2 x^2, for 1 <= a <= 2."""
    x, a = np.broadcast_arrays(np.asarray(x, float), np.asarray(a, float))
    c2 = 0.5 * a * (a - 1)
    direct = np.expm1(a * np.log1p(x)) - a * x
    series = _series(x, c2, a * (a - 1) * (a - 2) / 6, a * (a - 1) * (a - 2) * (a - 3) / 24)
    return _assemble(x, direct, c2 * x * x, series)


def alpha_lambda_array(x, lam, alpha):
    """0 <= log((lam(1-beta)x + (1 + beta x)^lam)/(1 + x)^lam) <= alpha lam(1-lam)/2 x^2.

    beta = sqrt(1 - alpha); the numerator equals
    1 + lam x + (1 + beta x)^lam - (1 + lam beta x).
    """
    x, lam, alpha = np.broadcast_arrays(np.asarray(x, float), np.asarray(lam, float), np.asarray(alpha, float))
    beta = np.sqrt(1.0 - alpha)
    c2 = 0.5 * alpha * lam * (1 - lam)
    numer_minus_one = lam * (1 - beta) * x + np.expm1(lam * np.log1p(beta * x))
    direct = np.log1p(numer_minus_one) - lam * np.log1p(x)
    b2, b3 = beta * beta, beta * beta * beta
    l2 = lam * lam
    c3 = lam * (beta - 1) * (lam - 1) * (b2 * lam - 2 * b2 - 2 * beta * lam - 2 * beta - 2 * lam - 2) / 6
    c4 = (
        -lam
        * (beta - 1)
        * (lam - 1)
        * (
            b3 * l2 + b3 * lam - 3 * b3 + 3 * b2 * l2 - 3 * b2 * lam - 3 * b2
            - 3 * beta * l2 - 3 * beta * lam - 3 * beta - 3 * l2 - 3 * lam - 3
        )
        / 12
    )
    return _assemble(x, direct, c2 * x * x, _series(x, c2, c3, c4))


def _check(name, value, lo, hi):
    if not (lo <= value <= hi):
        raise DomainError(f"{name}={value} outside [{lo}, {hi}]")
    return float(value)


def _margin(point, arrays) -> InequalityMargin:
    middle, lower, upper = (float(v) for v in arrays)
    return InequalityMargin(point=point, middle=middle, lower_margin=lower, upper_margin=upper)


def margin_log1(x: float, lam: float) -> InequalityMargin:
    x = _check("x", x, 0, math.inf)
    lam = _check("lambda", lam, 0, 1)
    return _margin({"x": x, "lambda": lam}, log1_array(x, lam))


def margin_log2(x: float, a: float) -> InequalityMargin:
    x = _check("x", x, 0, math.inf)
    a = _check("a", a, 1, math.inf)
    return _margin({"x": x, "a": a}, log2_array(x, a))


def margin_pred1(x: float, lam: float) -> InequalityMargin:
    x = _check("x", x, 0, math.inf)
    lam = _check("lambda", lam, 0, 1)
    return _margin({"x": x, "lambda": lam}, pred1_array(x, lam))


def margin_pred2(x: float, a: float) -> InequalityMargin:
    # the bound fails for a > 2, so such points are refused rather than clamped
    x = _check("x", x, 0, math.inf)
    a = _check("a", a, 1, 2)
    return _margin({"x": x, "a": a}, pred2_array(x, a))


def margin_alpha_lambda(x: float, lam: float, alpha: float) -> InequalityMargin:
    x = _check("x", x, 0, math.inf)
    lam = _check("lambda", lam, 0, 1)
    alpha = _check("alpha", alpha, 0, 1)
    return _margin({"x": x, "lambda": lam, "alpha": alpha}, alpha_lambda_array(x, lam, alpha))


def limit_ratio(x: float, lam: float, alpha: float) -> float:
    """middle(x)/x^2 of the alpha-lambda inequality; tends to alpha lam(1-lam)/2 as x -> 0."""
    if not x > 0:
        raise DomainError("limit_ratio needs x > 0; the limit itself is alpha*lam*(1-lam)/2")
    return margin_alpha_lambda(x, lam, alpha).middle / (x * x)


def limit_value(lam: float, alpha: float) -> float:
    return 0.5 * alpha * lam * (1.0 - lam)


# -- grid search -------------------------------------------------------------

X_MIN_LOG, X_MAX = 1e-8, 100.0

# (array function, parameter names, box per parameter)
_SUITE = {
    "log1": (log1_array, ("lambda",), ((0.0, 1.0),)),
    # the lemma puts no upper limit on a; the search box stops at 10
    "log2": (log2_array, ("a",), ((1.0, 10.0),)),
    "pred1": (pred1_array, ("lambda",), ((0.0, 1.0),)),
    "pred2": (pred2_array, ("a",), ((1.0, 2.0),)),
    "alpha_lambda": (alpha_lambda_array, ("lambda", "alpha"), ((0.0, 1.0), (0.0, 1.0))),
}

CSV_COLUMNS = ("lemma", "x", "lambda", "a", "alpha", "middle", "lower_margin", "upper_margin")


@dataclass(frozen=True)
class LemmaSearch:
    """Worst points of one inequality over a quasi-random sample."""

    lemma: str
    n_points: int
    worst_lower: InequalityMargin
    worst_upper: InequalityMargin
    tol: float = DEFAULT_TOL

    @property
    def worst_relative(self) -> float:
        """Smallest margin over max(1, |middle|); the lemma passes iff >= -tol."""
        lo, up = self.worst_lower, self.worst_upper
        return min(lo.lower_margin / max(1.0, abs(lo.middle)), up.upper_margin / max(1.0, abs(up.middle)))

    @property
    def passed(self) -> bool:
        return self.worst_lower.holds(self.tol) and self.worst_upper.holds(self.tol)

    def csv_rows(self) -> list[list]:
        rows = []
        for m in (self.worst_lower, self.worst_upper):
            p = m.point
            rows.append([self.lemma, p.get("x"), p.get("lambda"), p.get("a"), p.get("alpha"),
                         m.middle, m.lower_margin, m.upper_margin])
        return rows


def sample_points(lemma: str, n: int, seed: int) -> dict[str, np.ndarray]:
    """Scrambled Sobol points: x log-uniform on [1e-8, 100] times the parameter box.

    The corners of the box at x = 0 and x = 100 are prepended, so at least
    ``n`` points are returned.
    """
    from scipy.stats import qmc

    _, names, box = _SUITE[lemma]
    dim = 1 + len(names)
    m = max(1, math.ceil(math.log2(max(n, 2))))
    u = qmc.Sobol(dim, scramble=True, seed=np.random.default_rng(seed)).random_base2(m)[:n]
    lo, hi = math.log(X_MIN_LOG), math.log(X_MAX)
    pts = {"x": np.exp(lo + (hi - lo) * u[:, 0])}
    for j, (name, (a, b)) in enumerate(zip(names, box)):
        pts[name] = a + (b - a) * u[:, j + 1]
    corners = np.array(np.meshgrid(*([[0.0, X_MAX]] + [list(b) for b in box]), indexing="ij")).reshape(dim, -1)
    for j, name in enumerate(["x", *names]):
        pts[name] = np.concatenate((corners[j], pts[name]))
    return pts


def search_lemma(lemma: str, n: int, seed: int, tol: float = DEFAULT_TOL) -> LemmaSearch:
    fn, names, _ = _SUITE[lemma]
    pts = sample_points(lemma, n, seed)
    middle, lower, upper = fn(pts["x"], *(pts[k] for k in names))
    scale = np.maximum(1.0, np.abs(middle))

    def pick(i):
        point = {k: float(v[i]) for k, v in pts.items()}
        return InequalityMargin(point, float(middle[i]), float(lower[i]), float(upper[i]))

    return LemmaSearch(
        lemma=lemma,
        n_points=int(middle.size),
        worst_lower=pick(int(np.argmin(lower / scale))),
        worst_upper=pick(int(np.argmin(upper / scale))),
        tol=tol,
    )


def check_all(n: int, seed: int, tol: float = DEFAULT_TOL) -> list[LemmaSearch]:
    return [search_lemma(lemma, n, seed + i, tol) for i, lemma in enumerate(LEMMAS)]
