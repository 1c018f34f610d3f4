"""Pathwise Doleans-Dade exponential and quadratic variations.

For a local martingale M with nonnegative jumps,

    E(M)_t = exp(M_t - [M^c]_t / 2) * prod_{0<s<=t} (1 + dM_s) exp(-dM_s),

evaluated here in log-space.  Predictable quadratic variations are the
closed-form compensators of the supported models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from jumpmart.errors import DomainError, UnsupportedModelError
from jumpmart.generators import PathBatch, log1p_minus
from jumpmart.paths import SamplePath


@nb.njit(cache=True)
def _log1p_minus_cumsum(sizes):
    out = np.empty(sizes.shape[0] + 1)
    out[0] = 0.0
    for i in range(sizes.shape[0]):
        out[i + 1] = out[i] + log1p_minus(sizes[i])
    return out


@dataclass(frozen=True)
class VariationReport:
    """[M]_t, <M>_t and [M^c]_t of one path at time t."""

    t: float
    qv: float
    pqv: float
    qv_cont: float

    @property
    def qv_jump(self) -> float:
        return self.qv - self.qv_cont

    def blend(self, alpha: float) -> float:
        """alpha [M]_t + (1 - alpha) <M>_t."""
        if not 0 <= alpha <= 1:
            raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
        return alpha * self.qv + (1.0 - alpha) * self.pqv


def quadratic_variation(path: SamplePath, t: float) -> VariationReport:
    t = path.check_time(t)
    k = path.jump_count(t)
    model = path.model
    qv_cont = float(model.qv_continuous(t))
    qv = qv_cont + math.fsum(path.jump_sizes[:k] ** 2)
    return VariationReport(t=t, qv=qv, pqv=float(model.predictable_qv(t)), qv_cont=qv_cont)


def log_stochastic_exponential(path: SamplePath, t: float, left: bool = False) -> float:
    """log E(M)_t, or log E(M)_{t-} when ``left``."""
    t = path.check_time(t)
    k = path.jump_count(t, left)
    jump_term = _log1p_minus_cumsum(path.jump_sizes[:k])[-1]
    return path.value(t, left) - 0.5 * float(path.model.qv_continuous(t)) + jump_term


def stochastic_exponential(path: SamplePath, t: float) -> float:
    return math.exp(log_stochastic_exponential(path, t))


def sde_residual_check(path: SamplePath) -> float:
    """Largest defect of Z = E(M) against dZ = Z_- dM along a pure-jump path.

    At each jump s the relative defect |dZ_s - Z_{s-} dM_s| / Z_{s-} is
    measured; between events Z must follow dZ = -r Z dt, where -r t is the
    model's compensating drift.  Both Z values in each comparison come from
    independent evaluations of the product formula.
    """
    model = path.model
    if not model.is_pure_jump:
        raise UnsupportedModelError("exact SDE residuals need a pure-jump model")
    times, sizes = path.jump_times, path.jump_sizes
    if times.size == 0:
        log_end = log_stochastic_exponential(path, path.end_time)
        return abs(math.expm1(log_end + model.drift_rate * path.end_time))
    r = model.drift_rate
    cum = np.cumsum(sizes)
    cum_left = np.concatenate(([0.0], cum[:-1]))
    logs = _log1p_minus_cumsum(sizes)
    log_right = cum - r * times + logs[1:]
    log_left = cum_left - r * times + logs[:-1]
    jump_defect = np.abs(np.exp(log_right - log_left) - 1.0 - sizes)
    # flow between events: from 0 (log Z = 0) to the first jump, jump to
    # jump, and from the last jump to the end time
    log_end_left = log_stochastic_exponential(path, path.end_time, left=True)
    starts = np.concatenate(([0.0], times))
    log_starts = np.concatenate(([0.0], log_right))
    ends = np.concatenate((times, [path.end_time]))
    log_ends = np.concatenate((log_left, [log_end_left]))
    flow_defect = np.abs(np.expm1(log_ends - log_starts + r * (ends - starts)))
    return float(max(jump_defect.max(), flow_defect.max()))


def batch_terminal_value(batch: PathBatch) -> np.ndarray:
    """M at the end time of every replication."""
    return batch.cont_end + batch.jump_sum - batch.model.drift_rate * batch.end_time


def batch_log_exponential(batch: PathBatch) -> np.ndarray:
    """log E(M) at the end time of every replication."""
    qv_cont = batch.model.qv_continuous(batch.end_time)
    return batch_terminal_value(batch) - 0.5 * qv_cont + batch.log_jump_sum


def batch_variation(batch: PathBatch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """([M], <M>, [M^c]) at the end time of every replication."""
    qv_cont = batch.model.qv_continuous(batch.end_time) * np.ones(batch.n_reps)
    return qv_cont + batch.jump_sq_sum, batch.model.predictable_qv(batch.end_time) * np.ones(batch.n_reps), qv_cont


def batch_blend(batch: PathBatch, alpha: float) -> np.ndarray:
    if not 0 <= alpha <= 1:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    qv, pqv, _ = batch_variation(batch)
    return alpha * qv + (1.0 - alpha) * pqv
