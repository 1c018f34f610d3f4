"""Seeded path generation for the supported models.

Poisson-type models are simulated exactly from their arrival times; only
Brownian motion lives on a grid.  The same per-replication kernels serve
both single-path generation (which records every event) and the batch
engine behind the Monte Carlo routines (which keeps the sufficient
statistics of each path), so replicate ``i`` of a batch is exactly the path
``generate(spec, RngStream(seed, i))``.
"""

from __future__ import annotations

import math
import os
from contextlib import contextmanager
from dataclasses import dataclass

import numba as nb
import numpy as np

from jumpmart.errors import ConfigError, NumericError, UnsupportedModelError
from jumpmart.paths import JumpEvent, JumpLaw, ModelSpec, SamplePath
from jumpmart.rng import TAG_ARRIVALS, TAG_SIZES, RngStream, split_seed, uniform_at, uniform_pair

if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    # an outdated TBB otherwise triggers a warning on first parallel launch
    nb.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

DEFAULT_EVENT_CAP = 10**9
DEFAULT_STEP_FRACTION = 2.0**-10

_LAW_EXPONENTIAL, _LAW_DETERMINISTIC, _LAW_UNIFORM = 0, 1, 2
_EMPTY = np.empty(0, dtype=np.float64)
_EMPTY.flags.writeable = False


@nb.njit(cache=True)
def log1p_minus(x):
    """log(1 + x) - x without cancellation for small x."""
    if abs(x) < 1e-4:
        x2 = x * x
        return x2 * (-0.5 + x * (1.0 / 3.0 + x * (-0.25 + x * 0.2)))
    return math.log1p(x) - x


@nb.njit(cache=True)
def _jump_size(law, p1, p2, u):
    if law == _LAW_EXPONENTIAL:
        return -p1 * math.log(u)
    if law == _LAW_DETERMINISTIC:
        return p1
    return p1 + (p2 - p1) * u


@nb.njit(cache=True)
def _compound_rep(k0, k1, rep, rate, horizon, law, p1, p2, cap, times, sizes):
    # Arrival k uses uniform k of the arrival stream, its size uniform k of
    # the size stream.  Arrays are filled while they have room.
    t = 0.0
    n = 0
    s1 = 0.0
    s2 = 0.0
    sl = 0.0
    while True:
        t += -math.log(uniform_at(k0, k1, rep, TAG_ARRIVALS, n)) / rate
        if t > horizon:
            break
        if n >= cap:
            return -1, s1, s2, sl
        j = _jump_size(law, p1, p2, uniform_at(k0, k1, rep, TAG_SIZES, n))
        if n < times.shape[0]:
            times[n] = t
            sizes[n] = j
        s1 += j
        s2 += j * j
        sl += log1p_minus(j)
        n += 1
    return n, s1, s2, sl


@nb.njit(cache=True)
def _stopped_rep(k0, k1, rep, b, cap, times):
    # After k arrivals (the last at time s) the level k - (1+b)t falls
    # linearly and reaches -1 at (k+1)/(1+b); T_b is that candidate unless
    # the next arrival comes first.
    s = 0.0
    k = 0
    slope = 1.0 + b
    while True:
        cand = (k + 1) / slope
        nxt = s - math.log(uniform_at(k0, k1, rep, TAG_ARRIVALS, k))
        if cand < nxt:
            return k, cand
        if k >= cap:
            return -1, np.nan
        if k < times.shape[0]:
            times[k] = nxt
        s = nxt
        k += 1


@nb.njit(cache=True)
def _brownian_rep(k0, k1, rep, scale, n_steps, values):
    # values, when non-empty, receives the n_steps + 1 grid values.
    store = values.shape[0] > 0
    v = 0.0
    if store:
        values[0] = 0.0
    i = 0
    c = 0
    while i < n_steps:
        u0, u1 = uniform_pair(k0, k1, rep, 2, c)
        r = math.sqrt(-2.0 * math.log(u0))
        v += scale * (r * math.cos(2.0 * math.pi * u1))
        i += 1
        if store:
            values[i] = v
        if i < n_steps:
            v += scale * (r * math.sin(2.0 * math.pi * u1))
            i += 1
            if store:
                values[i] = v
        c += 1
    return v


@nb.njit(cache=True, parallel=True)
def _compound_batch(k0, k1, start, rate, horizon, law, p1, p2, cap, count, s1, s2, sl):
    none = np.empty(0)
    for i in nb.prange(count.shape[0]):
        n, a, b, c = _compound_rep(k0, k1, start + i, rate, horizon, law, p1, p2, cap, none, none)
        count[i] = n
        s1[i] = a
        s2[i] = b
        sl[i] = c


@nb.njit(cache=True, parallel=True)
def _stopped_batch(k0, k1, start, b, cap, count, stop):
    none = np.empty(0)
    for i in nb.prange(count.shape[0]):
        n, t = _stopped_rep(k0, k1, start + i, b, cap, none)
        count[i] = n
        stop[i] = t


@nb.njit(cache=True, parallel=True)
def _brownian_batch(k0, k1, start, scale, n_steps, out):
    none = np.empty(0)
    for i in nb.prange(out.shape[0]):
        out[i] = _brownian_rep(k0, k1, start + i, scale, n_steps, none)


def resolve_threads(threads: int | str | None) -> int:
    """Worker count: explicit value, else $JUMPMART_THREADS, else all cores."""
    if threads is None:
        threads = os.environ.get("JUMPMART_THREADS", "auto")
    if threads == "auto":
        return nb.config.NUMBA_NUM_THREADS
    n = int(threads)
    if n < 1:
        raise ConfigError(f"threads must be positive, got {threads}")
    return n


@contextmanager
def thread_limit(threads: int | str | None):
    """Run numba parallel sections on at most ``threads`` workers."""
    n = min(resolve_threads(threads), nb.config.NUMBA_NUM_THREADS)
    prev = nb.get_num_threads()
    nb.set_num_threads(n)
    try:
        yield n
    finally:
        nb.set_num_threads(prev)


def _grid_steps(horizon: float, step: float) -> int:
    if not step > 0:
        raise ConfigError(f"step must be positive, got {step}")
    n = round(horizon / step)
    if n < 1 or abs(n * step - horizon) > 1e-9 * horizon:
        raise ConfigError(f"step {step} does not divide horizon {horizon}")
    return n


def _poisson_law(spec: ModelSpec) -> JumpLaw:
    if spec.kind == "compensated_poisson":
        return JumpLaw.deterministic(spec["a"])
    return spec.jump_law


def gen_brownian(spec: ModelSpec, step: float | None = None, stream: RngStream = RngStream(0)) -> SamplePath:
    """Brownian path on a uniform grid with N(0, sigma^2 step) increments."""
    if spec.kind != "brownian":
        raise UnsupportedModelError(f"gen_brownian needs a brownian spec, got {spec.kind}")
    horizon = spec.horizon
    if step is None:
        step = DEFAULT_STEP_FRACTION * horizon
    n = _grid_steps(horizon, step)
    values = np.empty(n + 1)
    k0, k1 = stream.key
    _brownian_rep(k0, k1, stream.replicate_index, spec["sigma"] * math.sqrt(horizon / n), n, values)
    grid = np.linspace(0.0, horizon, n + 1)
    return SamplePath(spec, grid, values, _EMPTY, _EMPTY, seed_tag=(stream.root_seed, stream.replicate_index))


def _compound_events(stream, rate, horizon, law, cap):
    k0, k1 = stream.key
    args = (k0, k1, stream.replicate_index, rate, horizon, law.code, law.p1, law.p2, cap)
    n = _compound_rep(*args, np.empty(0), np.empty(0))[0]
    if n < 0:
        raise NumericError(f"event cap {cap} exceeded")
    times, sizes = np.empty(n), np.empty(n)
    _compound_rep(*args, times, sizes)
    return times, sizes


def gen_poisson_events(
    intensity: float, horizon: float, stream: RngStream, cap: int = DEFAULT_EVENT_CAP
) -> tuple[JumpEvent, ...]:
    """Unit jumps of a Poisson process on (0, horizon], simulated exactly."""
    if not (intensity > 0 and horizon > 0):
        raise ConfigError("intensity and horizon must be positive")
    times, sizes = _compound_events(stream, intensity, horizon, JumpLaw.deterministic(1.0), cap)
    return tuple(JumpEvent(float(t), float(s)) for t, s in zip(times, sizes))


def gen_compound_poisson_martingale(
    spec: ModelSpec, stream: RngStream, cap: int = DEFAULT_EVENT_CAP
) -> SamplePath:
    """Compound Poisson martingale; the compensated Poisson model is the case of a point-mass law."""
    if spec.kind not in ("compound_poisson_martingale", "compensated_poisson"):
        raise UnsupportedModelError(f"not a compound Poisson model: {spec.kind}")
    times, sizes = _compound_events(stream, spec["intensity"], spec.horizon, _poisson_law(spec), cap)
    return SamplePath(spec, _EMPTY, _EMPTY, times, sizes, seed_tag=(stream.root_seed, stream.replicate_index))


def gen_stopped_scaled_cpp(spec: ModelSpec, stream: RngStream, cap: int = DEFAULT_EVENT_CAP) -> SamplePath:
    """M_t = a(N_{t ^ T_b} - t ^ T_b), recorded up to T_b."""
    if spec.kind != "stopped_scaled_cpp":
        raise UnsupportedModelError(f"gen_stopped_scaled_cpp needs stopped_scaled_cpp, got {spec.kind}")
    k0, k1 = stream.key
    rep = stream.replicate_index
    n, stop = _stopped_rep(k0, k1, rep, spec["b"], cap, np.empty(0))
    if n < 0:
        raise NumericError(f"event cap {cap} exceeded before T_b")
    times = np.empty(n)
    _stopped_rep(k0, k1, rep, spec["b"], cap, times)
    sizes = np.full(n, spec["a"])
    return SamplePath(spec, _EMPTY, _EMPTY, times, sizes, stop_time=stop, seed_tag=(stream.root_seed, rep))


def generate(spec: ModelSpec, stream: RngStream, step: float | None = None) -> SamplePath:
    """Path of any supported model."""
    if spec.kind == "brownian":
        return gen_brownian(spec, step, stream)
    if spec.kind == "stopped_scaled_cpp":
        return gen_stopped_scaled_cpp(spec, stream)
    if spec.kind == "zero":
        return SamplePath(spec, _EMPTY, _EMPTY, _EMPTY, _EMPTY, seed_tag=(stream.root_seed, stream.replicate_index))
    return gen_compound_poisson_martingale(spec, stream)


@dataclass(frozen=True, eq=False)
class PathBatch:
    """Per-replication sufficient statistics of a batch of paths at their end time.

    Attributes:
        count: number of jumps.
        jump_sum, jump_sq_sum: sums of the jump sizes and of their squares.
        log_jump_sum: sum of log(1 + dM) - dM over the jumps.
        cont_end: value of the continuous part at the end time.
        end_time: horizon, or the stopping time for stopped models.
    """

    model: ModelSpec
    seed: int
    start: int
    count: np.ndarray
    jump_sum: np.ndarray
    jump_sq_sum: np.ndarray
    log_jump_sum: np.ndarray
    cont_end: np.ndarray
    end_time: np.ndarray

    @property
    def n_reps(self) -> int:
        return int(self.count.size)


def simulate_batch(
    spec: ModelSpec,
    n_reps: int,
    seed: int,
    *,
    start: int = 0,
    step: float | None = None,
    threads: int | str | None = None,
    cap: int = DEFAULT_EVENT_CAP,
) -> PathBatch:
    """Simulate replications ``start .. start + n_reps - 1`` in parallel."""
    if n_reps < 1:
        raise ConfigError("n_reps must be positive")
    if start + n_reps > 2**32:
        raise ConfigError("replicate indices must stay below 2**32")
    k0, k1 = split_seed(seed)
    zeros = np.zeros(n_reps)
    with thread_limit(threads):
        if spec.kind == "brownian":
            horizon = spec.horizon
            n = _grid_steps(horizon, DEFAULT_STEP_FRACTION * horizon if step is None else step)
            cont = np.empty(n_reps)
            _brownian_batch(k0, k1, start, spec["sigma"] * math.sqrt(horizon / n), n, cont)
            return PathBatch(spec, seed, start, np.zeros(n_reps, np.int64), zeros, zeros, zeros, cont,
                             np.full(n_reps, horizon))
        if spec.kind == "zero":
            return PathBatch(spec, seed, start, np.zeros(n_reps, np.int64), zeros, zeros, zeros, zeros,
                             np.full(n_reps, spec.horizon))
        count = np.empty(n_reps, np.int64)
        if spec.kind == "stopped_scaled_cpp":
            stop = np.empty(n_reps)
            _stopped_batch(k0, k1, start, spec["b"], cap, count, stop)
            if np.any(count < 0):
                raise NumericError(f"event cap {cap} exceeded before T_b")
            a = spec["a"]
            # every jump has size a, so the sums are closed-form in the count
            return PathBatch(spec, seed, start, count, a * count, a * a * count,
                             count * log1p_minus(a), zeros, stop)
        law = _poisson_law(spec)
        s1, s2, sl = np.empty(n_reps), np.empty(n_reps), np.empty(n_reps)
        _compound_batch(k0, k1, start, spec["intensity"], spec.horizon, law.code, law.p1, law.p2, cap,
                        count, s1, s2, sl)
        if np.any(count < 0):
            raise NumericError(f"event cap {cap} exceeded")
        return PathBatch(spec, seed, start, count, s1, s2, sl, zeros, np.full(n_reps, spec.horizon))
