"""Concrete drift functions, equilibria and closed-form OU analytics.

The cubic testbed uses V(x) = beta^3 x^3 - alpha beta x, so the drift is
-V'(x) = alpha beta - 3 beta^3 x^2. The population model is the Allee drift

    (r / beta) x (x / (beta A) - 1) (1 - x / (beta C))

whose roots 0 < beta A < beta C are the extinct, threshold and carrying
capacity states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    ALLEE_BETA_FLOOR,
    ParamSchedule,
    ParamValue,
    PotentialModel,
    param_value,
)


@dataclass(frozen=True)
class EquilibriumSet:
    points: tuple
    stability: tuple  # "stable" | "unstable" | "degenerate", parallel to points

    @property
    def stable_points(self):
        return tuple(p for p, s in zip(self.points, self.stability) if s == "stable")


# -- cubic testbed -----------------------------------------------------------

def cubic_potential(x, alpha, beta):
    return beta**3 * x**3 - alpha * beta * x


def cubic_drift(x, alpha: ParamValue, beta: ParamValue, t: float = 0.0):
    """-V'(x) for V(x) = beta^3 x^3 - alpha beta x at time ``t``."""
    a = param_value(alpha, t)
    b = param_value(beta, t)
    return a * b - 3.0 * b**3 * x * x


def cubic_equilibria(alpha: float, beta: float) -> EquilibriumSet:
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if beta <= 0:
        raise ValueError("beta must be > 0")
    if alpha == 0:
        return EquilibriumSet((0.0,), ("degenerate",))
    x = math.sqrt(alpha / (3.0 * beta**2))
    return EquilibriumSet((-x, x), ("unstable", "stable"))


def cubic_ou_rate(alpha: float, beta: float) -> float:
    """Mean-reversion rate 2 beta^2 sqrt(3 alpha) of the linearisation at the stable point."""
    return 2.0 * beta**2 * math.sqrt(3.0 * alpha)


# -- Allee population model -----------------------------------------------------

def allee_drift(x, r: float, A: float, C: float, beta: ParamValue, t: float = 0.0):
    b = max(param_value(beta, t), ALLEE_BETA_FLOOR)
    return (r / b) * x * (x / (b * A) - 1.0) * (1.0 - x / (b * C))


def allee_equilibria(beta: float, A: float, C: float) -> EquilibriumSet:
    if not (C > A > 0):
        raise ValueError("C > A > 0 violated")
    if beta <= 0:
        raise ValueError("beta must be > 0")
    return EquilibriumSet((0.0, beta * A, beta * C), ("stable", "unstable", "stable"))


def fig1_beta_schedule(t):
    """Shrinking territory fraction beta(t) = 4 / (1 + 0.01 t)."""
    return 4.0 / (1.0 + 0.01 * t)


FIG1_BETA = ParamSchedule.inverse_linear(4.0, 0.01, clamp_min=ALLEE_BETA_FLOOR)


# -- Ornstein-Uhlenbeck analytics -------------------------------------------------

def ou_covariance(a, b, t, s):
    """Cov(X_t, X_{t+s}) for dX = -b X dt + a dB with deterministic X_0."""
    if b <= 0:
        raise ValueError("b must be > 0")
    return a**2 / (2.0 * b) * (np.exp(-s * b) - np.exp(-(2.0 * t + s) * b))


def ou_variance(a, b, t):
    if b <= 0:
        raise ValueError("b must be > 0")
    return a**2 / (2.0 * b) * (1.0 - np.exp(-2.0 * b * t))


def csd_variance_slope(a, beta):
    """Growth rate m of the variance when alpha(t) = t^-2 approaches the bifurcation."""
    k = 4.0 * beta**2 * math.sqrt(3.0)
    return a**2 * (1.0 - math.exp(-k)) / k


def csu_variance(a, alpha, t):
    """Variance under the narrowing schedule beta(t) = t (alpha fixed, t >= 1)."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if np.any(np.asarray(t) < 1):
        raise ValueError("t must be >= 1")
    c = 4.0 * math.sqrt(3.0 * alpha)
    return a**2 / (c * t**2) * (1.0 - np.exp(-c * t**3))


# -- model construction -----------------------------------------------------------

def cubic_model(alpha, beta, noise, *, alpha_schedule=None, beta_schedule=None) -> PotentialModel:
    schedules = {}
    if alpha_schedule is not None:
        schedules["alpha"] = alpha_schedule
    if beta_schedule is not None:
        schedules["beta"] = beta_schedule
    return PotentialModel("cubic", {"alpha": alpha, "beta": beta}, noise, schedules)


def allee_model(r=1.0, A=1.5, C=2.5, beta=1.0, noise=0.22, *, beta_schedule=None) -> PotentialModel:
    schedules = {}
    if beta_schedule is not None:
        if beta_schedule.clamp_min < ALLEE_BETA_FLOOR:
            beta_schedule = replace(beta_schedule, clamp_min=ALLEE_BETA_FLOOR)
        schedules["beta"] = beta_schedule
    return PotentialModel("allee", {"r": r, "A": A, "C": C, "beta": beta}, noise, schedules)


def ou_model(b, noise) -> PotentialModel:
    return PotentialModel("ou", {"b": b}, noise)


def table_model(xs, drift, noise) -> PotentialModel:
    """Drift interpolated linearly from samples, held constant beyond the ends."""
    return PotentialModel("table", {}, noise, table=(tuple(xs), tuple(drift)))


def driftless_model(noise) -> PotentialModel:
    return table_model((0.0,), (0.0,), noise)


def fig1_model(noise=0.22, r=1.0, A=1.5, C=2.5) -> PotentialModel:
    return allee_model(r, A, C, 4.0, noise, beta_schedule=FIG1_BETA)


# -- evaluation against a PotentialModel ----------------------------------------------

def drift_function(model: PotentialModel, t: float):
    """Freeze scheduled parameters at ``t`` and return x -> b(x, t)."""
    k = model.space_scale
    kind = model.drift_kind
    if kind == "cubic":
        al, be = model.param("alpha", t), model.param("beta", t)
        c0, c2 = al * be, 3.0 * be**3

        def f(x):
            y = k * x
            return k * (c0 - c2 * y * y)
    elif kind == "allee":
        r, A, C = model.param("r", t), model.param("A", t), model.param("C", t)
        be = max(model.param("beta", t), ALLEE_BETA_FLOOR)
        g, ia, ic = r / be, 1.0 / (be * A), 1.0 / (be * C)

        def f(x):
            y = k * x
            return k * (g * y * (y * ia - 1.0) * (1.0 - y * ic))
    elif kind == "ou":
        b = model.param("b", t)

        def f(x):
            return k * (-b * (k * x))
    else:
        xs, bs = (np.asarray(v) for v in model.table)

        def f(x):
            return k * np.interp(k * x, xs, bs)
    return f


def drift(model: PotentialModel, x, t: float):
    return drift_function(model, t)(x)


def equilibria(model: PotentialModel, t: float = 0.0) -> EquilibriumSet:
    k = model.space_scale
    if model.drift_kind == "cubic":
        eq = cubic_equilibria(model.param("alpha", t), model.param("beta", t))
    elif model.drift_kind == "allee":
        eq = allee_equilibria(max(model.param("beta", t), ALLEE_BETA_FLOOR), model.param("A", t), model.param("C", t))
    elif model.drift_kind == "ou":
        eq = EquilibriumSet((0.0,), ("stable",))
    else:
        raise ValueError("equilibria are not defined for table drifts")
    return EquilibriumSet(tuple(p / k for p in eq.points), eq.stability)


def stable_equilibrium(model: PotentialModel, t: float = 0.0) -> float:
    """Largest stable equilibrium (the basin the experiments start in)."""
    eq = equilibria(model, t)
    stable = [p for p, s in zip(eq.points, eq.stability) if s != "unstable"]
    return max(stable)


def unstable_equilibrium(model: PotentialModel, t: float = 0.0) -> float:
    """Threshold below the upper stable state (beta A, or -sqrt(alpha/3)/beta)."""
    eq = equilibria(model, t)
    unstable = [p for p, s in zip(eq.points, eq.stability) if s != "stable"]
    return max(unstable)


@dataclass(frozen=True)
class EquilibriumTrack:
    """Callable t -> equilibrium position, usable as a basin bound or baseline."""

    model: PotentialModel
    which: str = "unstable"

    def __call__(self, t):
        m, k = self.model, self.model.space_scale
        scalar = not np.ndim(t)
        t = np.asarray(t, dtype=float)
        if m.drift_kind == "cubic":
            al, be = m.param("alpha", t) + 0.0 * t, m.param("beta", t) + 0.0 * t
            x = np.sqrt(al / 3.0) / be
            out = (-x if self.which == "unstable" else x) / k
        elif m.drift_kind == "allee":
            be = np.maximum(m.param("beta", t), ALLEE_BETA_FLOOR) + 0.0 * t
            out = be * m.param("A" if self.which == "unstable" else "C", 0.0) / k
        elif m.drift_kind == "ou" and self.which == "stable":
            out = 0.0 * t
        else:
            raise ValueError(f"no {self.which} equilibrium track for {m.drift_kind!r} drift")
        return float(out) if scalar else out


# -- the two scheduled cubic scenarios -------------------------------------------------

def csd_model(beta=1.0, noise=0.1) -> PotentialModel:
    """Cubic well flattening towards the alpha = 0 bifurcation, alpha(t) = t^-2."""
    return cubic_model(1.0, beta, noise, alpha_schedule=ParamSchedule.power_law(1.0, -2.0))


def csu_model(alpha=1.0 / 3.0, noise=0.1) -> PotentialModel:
    """Cubic well narrowing at fixed depth, beta(t) = t."""
    return cubic_model(alpha, 1.0, noise, beta_schedule=ParamSchedule.power_law(1.0, 1.0))
