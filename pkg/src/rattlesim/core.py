"""Domain types shared across the package.

Everything here is immutable after construction. Behaviour is limited to
parameter lookup and validation; drift formulas live in :mod:`rattlesim.models`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional, Union

import numpy as np

DRIFT_KINDS = ("cubic", "allee", "ou", "table")
SCHEDULE_KINDS = ("constant", "inverse_linear", "power_law", "linear")

# Allee drift divides by beta
ALLEE_BETA_FLOOR = 1e-6
ALLEE_BETA_MAX = 1e3


@dataclass(frozen=True)
class ParamSchedule:
    """Time schedule for a single model parameter.

    ``constant``        v(t) = c0
    ``inverse_linear``  v(t) = c0 / (1 + c1 t)
    ``power_law``       v(t) = c0 t**c1
    ``linear``          v(t) = c0 + c1 t

    Values are clamped below at ``clamp_min``.
    """

    kind: str
    c0: float
    c1: float = 0.0
    clamp_min: float = 0.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not self.clamp_min >= 0:
            raise ValueError("clamp_min must be >= 0")

    @classmethod
    def constant(cls, value, clamp_min=0.0):
        return cls("constant", float(value), 0.0, clamp_min)

    @classmethod
    def inverse_linear(cls, c0, c1, clamp_min=0.0):
        return cls("inverse_linear", float(c0), float(c1), clamp_min)

    @classmethod
    def power_law(cls, c, p, clamp_min=0.0):
        return cls("power_law", float(c), float(p), clamp_min)

    @classmethod
    def linear(cls, v0, slope, clamp_min=0.0):
        return cls("linear", float(v0), float(slope), clamp_min)

    def raw(self, t):
        if np.ndim(t):
            t = np.asarray(t, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                return self._formula(t)
        try:
            return float(self._formula(float(t)))
        except (ZeroDivisionError, OverflowError):
            return math.inf

    def _formula(self, t):
        if self.kind == "constant":
            return self.c0 + 0.0 * t
        if self.kind == "inverse_linear":
            return self.c0 / (1.0 + self.c1 * t)
        if self.kind == "power_law":
            return self.c0 * t**self.c1
        return self.c0 + self.c1 * t

    def __call__(self, t):
        v = self.raw(t)
        if np.ndim(v):
            return np.maximum(v, self.clamp_min)
        return max(float(v), self.clamp_min)


ParamValue = Union[float, ParamSchedule]


def param_value(p: ParamValue, t: float) -> float:
    """Evaluate a constant-or-scheduled parameter at time ``t``."""
    return p(t) if isinstance(p, ParamSchedule) else float(p)


@dataclass(frozen=True)
class PotentialModel:
    """Drift/noise specification for dX = b(X, t) dt + a dB.

    ``params`` holds constant values; ``schedules`` overrides any of them with
    a time schedule. ``space_scale`` k > 0 replaces the drift by k b(k x, t),
    i.e. the potential V(x) by V(k x) with the noise left untouched.
    For ``table`` models the drift is interpolated from ``table`` = (xs, bs).
    """

    drift_kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    noise_amplitude: float = 0.0
    schedules: Mapping[str, ParamSchedule] = field(default_factory=dict)
    space_scale: float = 1.0
    table: Optional[tuple] = None

    def __post_init__(self):
        if self.drift_kind not in DRIFT_KINDS:
            raise ValueError(f"unknown drift kind {self.drift_kind!r}")
        object.__setattr__(self, "params", MappingProxyType({k: float(v) for k, v in self.params.items()}))
        object.__setattr__(self, "schedules", MappingProxyType(dict(self.schedules)))
        object.__setattr__(self, "noise_amplitude", float(self.noise_amplitude))
        if self.table is not None:
            xs, bs = self.table
            object.__setattr__(self, "table", (tuple(float(v) for v in xs), tuple(float(v) for v in bs)))

    def __repr__(self):
        return (
            f"PotentialModel({self.drift_kind!r}, params={dict(self.params)!r}, "
            f"noise_amplitude={self.noise_amplitude!r}, schedules={dict(self.schedules)!r}, "
            f"space_scale={self.space_scale!r}, table={self.table!r})"
        )

    def __hash__(self):
        return hash(repr(self))

    def __eq__(self, other):
        return isinstance(other, PotentialModel) and repr(self) == repr(other)

    def param(self, name: str, t: float = 0.0) -> float:
        if name in self.schedules:
            return self.schedules[name](t)
        return self.params[name]

    @property
    def is_scheduled(self) -> bool:
        return bool(self.schedules)


Bound = Union[float, Callable[[float], float]]


def eval_bound(bound: Optional[Bound], t, default: float):
    if bound is None:
        return default
    if callable(bound):
        return bound(t)
    return float(bound)


@dataclass(frozen=True)
class BasinSpec:
    """Basin of attraction (lower(t), upper(t)); ``None`` means unbounded."""

    lower: Optional[Bound] = None
    upper: Optional[Bound] = None

    def lower_at(self, t):
        return eval_bound(self.lower, t, -math.inf)

    def upper_at(self, t):
        return eval_bound(self.upper, t, math.inf)

    @property
    def is_static(self) -> bool:
        return not callable(self.lower) and not callable(self.upper)


@dataclass(frozen=True)
class ExitRecord:
    time: float
    boundary: str  # "lower" | "upper"
    state_at_exit: float
    index: int


@dataclass(frozen=True, eq=False)
class SamplePath:
    """One trajectory recorded at t0 + i * dt_record."""

    t0: float
    dt_record: float
    states: np.ndarray
    exit: Optional[ExitRecord]
    seed: int

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 1 or states.size == 0:
            raise ValueError("states must be a non-empty 1-D sequence")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.states.size) * self.dt_record

    def __len__(self):
        return self.states.size

    def __eq__(self, other):
        if not isinstance(other, SamplePath):
            return NotImplemented
        return (
            self.t0 == other.t0
            and self.dt_record == other.dt_record
            and self.seed == other.seed
            and self.exit == other.exit
            and self.states.tobytes() == other.states.tobytes()
        )

    __hash__ = None


@dataclass(frozen=True)
class EnsembleResult:
    paths: tuple
    master_seed: int
    config_digest: str
    horizon: float = math.inf

    def __len__(self):
        return len(self.paths)

    def exit_times(self) -> np.ndarray:
        """Exit time per path, +inf for paths that never exited."""
        return np.array([p.exit.time if p.exit else math.inf for p in self.paths], dtype=float)


@dataclass(frozen=True, eq=False)
class ExitTimeDistribution:
    sorted_exit_times: np.ndarray
    n_total: int
    horizon: float

    def cdf(self, tau):
        """Fraction of all paths (censored included) with exit time <= tau."""
        if self.n_total == 0:
            return np.zeros_like(np.asarray(tau, dtype=float))
        counts = np.searchsorted(self.sorted_exit_times, tau, side="right")
        return counts / self.n_total

    def quantile(self, q: float) -> float:
        """Empirical quantile over all paths; +inf when censoring reaches q."""
        k = math.ceil(q * self.n_total)
        if k <= 0:
            return float(self.sorted_exit_times[0]) if self.sorted_exit_times.size else math.inf
        if k > self.sorted_exit_times.size:
            return math.inf
        return float(self.sorted_exit_times[k - 1])


@dataclass(frozen=True, eq=False)
class RollingStatSeries:
    """Statistic over time; NaN marks a missing value (never 0)."""

    times: np.ndarray
    values: np.ndarray
    window: float
    lag: float = 0.0
    n_contributing: Optional[np.ndarray] = None

    def at(self, t: float) -> float:
        i = int(np.argmin(np.abs(self.times - t)))
        return float(self.values[i])

    def between(self, t_start: float, t_end: float):
        """(times, values) restricted to [t_start, t_end] with missing entries dropped."""
        sel = (self.times >= t_start) & (self.times <= t_end) & ~np.isnan(self.values)
        return self.times[sel], self.values[sel]


_REQUIRED = {
    "cubic": ("alpha", "beta"),
    "allee": ("r", "A", "C", "beta"),
    "ou": ("b",),
    "table": (),
}


def validate_model(model: PotentialModel, horizon: float, t0: float = 0.0) -> list:
    """Return every invariant violation of ``model`` on a 1000-point grid.

    An empty list means the model is valid over [t0, t0 + horizon].
    """
    errors = []
    if not model.noise_amplitude >= 0 or not math.isfinite(model.noise_amplitude):
        errors.append("noise_amplitude must be finite and >= 0")
    if not (model.space_scale > 0 and math.isfinite(model.space_scale)):
        errors.append("space_scale must be finite and > 0")
    missing = [p for p in _REQUIRED[model.drift_kind] if p not in model.params and p not in model.schedules]
    if missing:
        errors.append(f"missing parameters: {', '.join(missing)}")
        return errors
    if model.drift_kind == "table":
        if model.table is None or len(model.table[0]) == 0 or len(model.table[0]) != len(model.table[1]):
            errors.append("table drift needs equal-length non-empty (xs, drift) sequences")
        else:
            xs, bs = (np.asarray(v) for v in model.table)
            if np.any(np.diff(xs) <= 0):
                errors.append("table xs must be strictly increasing")
            if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(bs))):
                errors.append("table values must be finite")
        return errors

    grid = np.linspace(t0, t0 + horizon, 1000)
    seen = set()

    def check(ok, message):
        if not ok and message not in seen:
            seen.add(message)
            errors.append(message)

    for t in grid:
        p = {name: model.param(name, float(t)) for name in _REQUIRED[model.drift_kind]}
        for name, v in p.items():
            check(math.isfinite(v), f"{name} not finite at t={t:g}")
        if model.drift_kind == "cubic":
            check(p["alpha"] >= 0, "alpha >= 0 violated")
            check(p["beta"] > 0, "beta > 0 violated")
        elif model.drift_kind == "allee":
            check(p["r"] > 0, "r > 0 violated")
            check(p["A"] > 0, "A > 0 violated")
            check(p["C"] > p["A"], "C > A violated")
            check(0 < p["beta"] <= ALLEE_BETA_MAX, "beta in (0, 1e3] violated")
        elif model.drift_kind == "ou":
            check(p["b"] > 0, "b > 0 violated")
    return errors


def ensure_valid(model: PotentialModel, horizon: float, t0: float = 0.0) -> None:
    errors = validate_model(model, horizon, t0)
    if errors:
        raise ValueError("invalid model: " + "; ".join(errors))

