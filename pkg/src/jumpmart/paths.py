"""Sample paths of local martingales with nonnegative jumps, and model specs."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from jumpmart.errors import ConfigError, DomainError

UNTIL_STOP = "until-stop"

KINDS = (
    "brownian",
    "compensated_poisson",
    "compound_poisson_martingale",
    "stopped_scaled_cpp",
    "zero",
)

_REQUIRED = {
    "brownian": ("sigma",),
    "compensated_poisson": ("intensity", "a"),
    "compound_poisson_martingale": ("intensity",),
    "stopped_scaled_cpp": ("a", "b"),
    "zero": (),
}

JUMP_LAWS = ("exponential", "deterministic", "uniform")


@dataclass(frozen=True)
class JumpEvent:
    time: float
    size: float

    def __post_init__(self):
        if not self.time > 0:
            raise DomainError(f"jump time must be positive, got {self.time}")
        if not self.size >= 0:
            raise DomainError(f"jump size must be nonnegative, got {self.size}")


@dataclass(frozen=True)
class JumpLaw:
    """Distribution of the jump sizes of a compound Poisson martingale.

    ``exponential`` takes ``mean``; ``deterministic`` takes ``value``;
    ``uniform`` takes ``low`` and ``high``.  All laws live on [0, inf).
    """

    kind: str
    p1: float
    p2: float = 0.0

    def __post_init__(self):
        if self.kind not in JUMP_LAWS:
            raise ConfigError(f"unknown jump law {self.kind!r}")
        if self.kind == "exponential" and not self.p1 > 0:
            raise ConfigError("exponential jump law needs a positive mean")
        if self.kind == "deterministic" and not self.p1 > 0:
            raise ConfigError("deterministic jump size must be positive")
        if self.kind == "uniform" and not (0 <= self.p1 < self.p2):
            raise ConfigError("uniform jump law needs 0 <= low < high")

    @classmethod
    def exponential(cls, mean: float) -> JumpLaw:
        return cls("exponential", float(mean))

    @classmethod
    def deterministic(cls, value: float) -> JumpLaw:
        return cls("deterministic", float(value))

    @classmethod
    def uniform(cls, low: float, high: float) -> JumpLaw:
        return cls("uniform", float(low), float(high))

    @property
    def code(self) -> int:
        return JUMP_LAWS.index(self.kind)

    @property
    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.p1 + self.p2)
        return self.p1

    @property
    def second_moment(self) -> float:
        if self.kind == "exponential":
            return 2.0 * self.p1**2
        if self.kind == "deterministic":
            return self.p1**2
        lo, hi = self.p1, self.p2
        return (hi**3 - lo**3) / (3.0 * (hi - lo))

    def mgf_of_square(self, s: float) -> float:
        """E exp(s J^2), possibly +inf."""
        if s == 0:
            return 1.0
        if self.kind == "deterministic":
            return math.exp(s * self.p1**2)
        if self.kind == "exponential":
            return math.inf if s > 0 else _exp_law_neg_square_mgf(s, self.p1)
        from scipy.integrate import quad

        lo, hi = self.p1, self.p2
        val, _ = quad(lambda y: math.exp(s * y * y), lo, hi, epsabs=0, epsrel=1e-13)
        return val / (hi - lo)

    def to_dict(self) -> dict:
        names = {"exponential": ("mean",), "deterministic": ("value",), "uniform": ("low", "high")}
        vals = (self.p1, self.p2)
        return {"kind": self.kind, **{n: v for n, v in zip(names[self.kind], vals)}}


def _exp_law_neg_square_mgf(s: float, mean: float) -> float:
    from scipy.integrate import quad

    val, _ = quad(lambda y: math.exp(s * y * y - y / mean) / mean, 0, math.inf, epsrel=1e-13)
    return val


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of a supported martingale model.

    ``parameters`` holds the named reals of the model (``sigma`` for
    Brownian motion; ``intensity`` and ``a`` for the compensated Poisson
    process ``a(N_t - intensity t)``; ``intensity`` for the compound Poisson
    martingale, whose jumps follow ``jump_law``; ``a`` and ``b`` for the
    stopped process ``a(N_{t ^ T_b} - t ^ T_b)``).  The ``zero`` kind is the
    trivial martingale M = 0.
    """

    kind: str
    parameters: Mapping[str, float] = field(default_factory=dict)
    horizon: float | str = 1.0
    jump_law: JumpLaw | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        params = {k: float(v) for k, v in self.parameters.items()}
        for name in _REQUIRED[self.kind]:
            if name not in params:
                raise ConfigError(f"{self.kind} requires parameter {name!r}")
            if not params[name] > 0:
                raise ConfigError(f"parameter {name!r} must be positive, got {params[name]}")
        if self.kind == "compound_poisson_martingale":
            if self.jump_law is None:
                raise ConfigError("compound_poisson_martingale requires a jump law")
            params["jump_mean"] = self.jump_law.mean
        elif self.jump_law is not None:
            raise ConfigError(f"{self.kind} takes no jump law")
        if self.horizon == UNTIL_STOP:
            if self.kind != "stopped_scaled_cpp":
                raise ConfigError("horizon 'until-stop' is only legal for stopped_scaled_cpp")
        elif self.kind == "stopped_scaled_cpp":
            raise ConfigError("stopped_scaled_cpp runs until its stopping time; use 'until-stop'")
        elif not (isinstance(self.horizon, (int, float)) and self.horizon > 0):
            raise ConfigError(f"horizon must be positive, got {self.horizon!r}")
        else:
            object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "parameters", MappingProxyType(params))

    @classmethod
    def brownian(cls, sigma: float = 1.0, horizon: float = 1.0) -> ModelSpec:
        return cls("brownian", {"sigma": sigma}, horizon)

    @classmethod
    def compensated_poisson(cls, intensity: float = 1.0, a: float = 1.0, horizon: float = 1.0) -> ModelSpec:
        return cls("compensated_poisson", {"intensity": intensity, "a": a}, horizon)

    @classmethod
    def compound_poisson(cls, intensity: float, jump_law: JumpLaw, horizon: float = 1.0) -> ModelSpec:
        return cls("compound_poisson_martingale", {"intensity": intensity}, horizon, jump_law)

    @classmethod
    def stopped_scaled_cpp(cls, a: float, b: float) -> ModelSpec:
        return cls("stopped_scaled_cpp", {"a": a, "b": b}, UNTIL_STOP)

    @classmethod
    def zero(cls, horizon: float = 1.0) -> ModelSpec:
        return cls("zero", {}, horizon)

    def __getitem__(self, name: str) -> float:
        return self.parameters[name]

    @property
    def is_pure_jump(self) -> bool:
        return self.kind != "brownian"

    @property
    def drift_rate(self) -> float:
        """Rate r of the compensating drift -r t of the jump part."""
        p = self.parameters
        if self.kind == "compensated_poisson":
            return p["a"] * p["intensity"]
        if self.kind == "compound_poisson_martingale":
            return p["intensity"] * p["jump_mean"]
        if self.kind == "stopped_scaled_cpp":
            return p["a"]
        return 0.0

    def qv_continuous(self, t):
        """[M^c]_t."""
        if self.kind == "brownian":
            return self.parameters["sigma"] ** 2 * t
        return 0.0 * t

    def predictable_qv(self, t):
        """<M>_t for t already clipped to the path's domain."""
        p = self.parameters
        if self.kind == "brownian":
            return p["sigma"] ** 2 * t
        if self.kind == "compensated_poisson":
            return p["a"] ** 2 * p["intensity"] * t
        if self.kind == "compound_poisson_martingale":
            return p["intensity"] * self.jump_law.second_moment * t
        if self.kind == "stopped_scaled_cpp":
            return p["a"] ** 2 * t
        return 0.0 * t

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "parameters": dict(sorted(self.parameters.items())), "horizon": self.horizon}
        if self.jump_law is not None:
            out["jump_law"] = self.jump_law.to_dict()
        return out


def _frozen(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class SamplePath:
    """One realized cadlag trajectory.

    The continuous part lives on ``grid_times`` (empty for pure-jump
    models); the jumps are an exact event list.  The compensating drift of
    the jump part is not stored: it follows from the model.
    """

    model: ModelSpec
    grid_times: np.ndarray
    continuous_values: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    stop_time: float | None = None
    seed_tag: tuple[int, int] | None = None

    def __post_init__(self):
        for name in ("grid_times", "continuous_values", "jump_times", "jump_sizes"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        g, v = self.grid_times, self.continuous_values
        if g.shape != v.shape:
            raise ConfigError("grid_times and continuous_values differ in length")
        if g.size:
            if g[0] != 0 or v[0] != 0:
                raise ConfigError("continuous part must start at (0, 0)")
            if np.any(np.diff(g) <= 0):
                raise ConfigError("grid_times must be strictly increasing")
        jt, js = self.jump_times, self.jump_sizes
        if jt.shape != js.shape:
            raise ConfigError("jump_times and jump_sizes differ in length")
        if jt.size:
            if jt[0] <= 0 or np.any(np.diff(jt) <= 0):
                raise ConfigError("jump times must be positive and strictly increasing")
            if np.any(js < 0):
                raise ConfigError("jump sizes must be nonnegative")
        if self.model.kind == "stopped_scaled_cpp":
            if self.stop_time is None:
                raise ConfigError("stopped_scaled_cpp paths need a stop_time")
        if self.stop_time is not None and jt.size and jt[-1] > self.stop_time:
            raise ConfigError("jump after the stopping time")

    @property
    def end_time(self) -> float:
        if self.stop_time is not None:
            return float(self.stop_time)
        return float(self.model.horizon)

    @property
    def jumps(self) -> tuple[JumpEvent, ...]:
        return tuple(JumpEvent(float(t), float(s)) for t, s in zip(self.jump_times, self.jump_sizes))

    @property
    def n_jumps(self) -> int:
        return int(self.jump_times.size)

    def check_time(self, t: float) -> float:
        """Validated time; t = inf means the stopping time on stopped paths."""
        t = float(t)
        if t == math.inf and self.stop_time is not None:
            return float(self.stop_time)
        if not 0 <= t <= self.end_time:
            raise DomainError(f"t={t} outside path domain [0, {self.end_time}]")
        return t

    def jump_count(self, t: float, left: bool = False) -> int:
        """Number of jumps in (0, t], or in (0, t) when ``left``."""
        return int(np.searchsorted(self.jump_times, t, side="left" if left else "right"))

    def continuous_at(self, t: float) -> float:
        if self.grid_times.size == 0:
            return 0.0
        return float(np.interp(t, self.grid_times, self.continuous_values))

    def value(self, t: float, left: bool = False) -> float:
        """M_t, or the left limit M_{t-} when ``left``."""
        t = self.check_time(t)
        k = self.jump_count(t, left)
        jumps = math.fsum(self.jump_sizes[:k]) if k else 0.0
        return self.continuous_at(t) + jumps - self.model.drift_rate * t


def evaluate(path: SamplePath, t: float) -> float:
    """M_t: continuous part, plus jumps in (0, t], minus the compensating drift."""
    return path.value(t)


def dump_csv(path: SamplePath, out: io.TextIOBase | None = None) -> str:
    """Path as CSV ``t,value,is_jump``; at equal times event rows come first."""
    rows: list[tuple[float, int, int]] = [(float(t), 0, 1) for t in path.jump_times]
    grid: Sequence[float] = path.grid_times if path.grid_times.size else (0.0, path.end_time)
    rows += [(float(t), 1, 0) for t in grid]
    rows.sort()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "value", "is_jump"])
    for t, _, is_jump in rows:
        writer.writerow([repr(t), repr(path.value(t)), is_jump])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
