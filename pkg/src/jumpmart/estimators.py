"""Monte Carlo estimators with heavy-tail safeguards.

All reductions are fixed-order: numpy's pairwise summation over the
replication-ordered sample array.  Since every replication is computed
independently of the thread layout, estimates are bit-identical for any
thread count.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from statistics import NormalDist

import numpy as np

from jumpmart.errors import ConfigError

SUMMATION_MODE = "numpy-pairwise-replication-order"
DEFAULT_BLOCKS = 64


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo estimate of an expectation.

    ``std_error`` is always the plain sample standard deviation over
    ``sqrt(n_reps)``.  For ``estimator == "median_of_means"`` the point
    estimate is the median of block means and the interval comes from order
    statistics of the block means, which stays valid without a finite
    variance.
    """

    mean: float
    std_error: float
    ci_low: float
    ci_high: float
    n_reps: int
    seed: int
    tail_flag: bool
    summation_mode: str = SUMMATION_MODE
    estimator: str = "sample_mean"
    ci_level: float = 0.99
    tail_index: float = math.inf

    @property
    def relative_se(self) -> float:
        return self.std_error / abs(self.mean) if self.mean else math.inf

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    def to_dict(self) -> dict:
        return asdict(self)


def hill_tail_index(samples: np.ndarray, k: int | None = None) -> float:
    """Hill estimate of the tail index of |samples| from the top k order statistics.

    Returns inf for samples without a spread in the upper tail.
    """
    x = np.abs(np.asarray(samples, dtype=np.float64))
    n = x.size
    if k is None:
        k = max(10, int(math.sqrt(n)))
    if n <= k + 1:
        return math.inf
    top = np.partition(x, n - k - 1)[n - k - 1 :]
    threshold = top.min()
    if not threshold > 0:
        return math.inf
    logs = np.log(np.sort(top)[1:] / threshold)
    xi = float(np.sum(logs)) / k
    return 1.0 / xi if xi > 0 else math.inf


def _z(ci_level: float) -> float:
    if not 0 < ci_level < 1:
        raise ConfigError(f"ci_level must lie in (0, 1), got {ci_level}")
    return NormalDist().inv_cdf(0.5 + 0.5 * ci_level)


def _moments(x: np.ndarray) -> tuple[float, float]:
    n = x.size
    mean = float(np.sum(x) / n)
    if n < 2 or not math.isfinite(mean):
        return mean, math.nan if n < 2 else math.inf
    sd = math.sqrt(float(np.sum((x - mean) ** 2)) / (n - 1))
    return mean, sd / math.sqrt(n)


def sample_mean(samples, seed: int, ci_level: float = 0.99, heavy_tail: bool = False) -> McEstimate:
    """Sample mean with a normal-approximation interval.

    ``heavy_tail`` forces ``tail_flag`` when infinite variance is known
    analytically; otherwise the flag is raised when the Hill tail index of
    the sample drops below 2.
    """
    x = np.ascontiguousarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ConfigError("no samples")
    mean, se = _moments(x)
    half = _z(ci_level) * se
    alpha = hill_tail_index(x)
    return McEstimate(
        mean=mean,
        std_error=se,
        ci_low=mean - half,
        ci_high=mean + half,
        n_reps=int(x.size),
        seed=int(seed),
        tail_flag=bool(heavy_tail or alpha < 2.0),
        ci_level=ci_level,
        tail_index=alpha,
    )


def order_statistic_rank(n_blocks: int, ci_level: float) -> int:
    """Largest r with P(Bin(n_blocks, 1/2) <= r - 1) <= (1 - ci_level)/2, at least 1.

    ``[m_(r), m_(n_blocks + 1 - r)]`` of the sorted block means then covers
    the median of the block-mean distribution with probability >= ci_level.
    """
    tail = 0.5 * (1.0 - ci_level)
    cdf = 0.0
    r = 0
    while r < n_blocks:
        cdf += math.comb(n_blocks, r) * 0.5**n_blocks
        if cdf > tail:
            break
        r += 1
    return max(r, 1)


def median_of_means(
    samples, seed: int, n_blocks: int = DEFAULT_BLOCKS, ci_level: float = 0.99, heavy_tail: bool = False
) -> McEstimate:
    """Median of the means of ``n_blocks`` contiguous blocks of replications."""
    x = np.ascontiguousarray(samples, dtype=np.float64)
    n = x.size
    if n_blocks < 1 or n < n_blocks:
        raise ConfigError(f"need at least {n_blocks} samples for {n_blocks} blocks")
    edges = (np.arange(n_blocks + 1) * n) // n_blocks
    block_means = np.sort([np.sum(x[lo:hi]) / (hi - lo) for lo, hi in zip(edges[:-1], edges[1:])])
    med = float(np.median(block_means))
    r = order_statistic_rank(n_blocks, ci_level)
    _, se = _moments(x)
    alpha = hill_tail_index(x)
    return McEstimate(
        mean=med,
        std_error=se,
        ci_low=float(block_means[r - 1]),
        ci_high=float(block_means[n_blocks - r]),
        n_reps=int(n),
        seed=int(seed),
        tail_flag=bool(heavy_tail or alpha < 2.0),
        estimator="median_of_means",
        ci_level=ci_level,
        tail_index=alpha,
    )
