"""The population-collapse experiments and the two cubic-well scenarios.

Each function returns in-memory results; :mod:`rattlesim.cli` handles files.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import ews
from .core import BasinSpec, EnsembleResult, ExitTimeDistribution, RollingStatSeries
from .engine import SimConfig, exit_time_distribution, run_ensemble, split_seed
from .models import (
    EquilibriumTrack,
    allee_model,
    csd_model,
    csd_variance_slope,
    csu_model,
    fig1_model,
)

log = logging.getLogger(__name__)

HIST_BIN_WIDTH = 10.0


@dataclass(frozen=True)
class AlleeParams:
    r: float = 1.0
    A: float = 1.5
    C: float = 2.5
    noise: float = 0.22


@dataclass(frozen=True, eq=False)
class Figure1Result:
    ensemble: EnsembleResult
    variance: RollingStatSeries
    autocorrelation: RollingStatSeries
    n_surviving: np.ndarray
    exits: ExitTimeDistribution
    threshold_times: np.ndarray
    threshold: np.ndarray

    def histogram(self, bin_width: float = HIST_BIN_WIDTH):
        """(bin_start, bin_end, count) rows covering [0, horizon]."""
        edges = np.arange(0.0, self.ensemble.horizon + bin_width, bin_width)
        counts, _ = np.histogram(self.exits.sorted_exit_times, bins=edges)
        return list(zip(edges[:-1], edges[1:], counts.astype(int)))


def figure1(n=500, master_seed=0, horizon=1500.0, dt=0.01, dt_record=0.1, window=10.0, lag=1.0,
            params=AlleeParams(), workers=1, model=None) -> Figure1Result:
    """Shrinking-territory ensemble: beta(t) = 4 / (1 + 0.01 t), collapse below beta(t) A.

    ``model`` replaces the default Allee model built from ``params``; the
    collapse threshold is always its unstable equilibrium track.
    """
    if model is None:
        model = fig1_model(params.noise, params.r, params.A, params.C)
    threshold = EquilibriumTrack(model, "unstable")
    cfg = SimConfig(horizon=horizon, dt=dt, dt_record=dt_record, basin=BasinSpec(lower=threshold))
    ens = run_ensemble(model, cfg, n, master_seed, workers)
    times = np.arange(cfg.n_records + 1) * dt_record
    if n == 0:
        empty = RollingStatSeries(times, np.full(times.size, np.nan), window, lag, np.zeros(times.size, dtype=int))
        return Figure1Result(ens, empty, empty, np.zeros(times.size, dtype=int),
                             exit_time_distribution(ens), times, threshold(times))
    var = ews.survivor_mean_series(ens, "variance", window, lag)
    ac = ews.survivor_mean_series(ens, "autocorrelation", window, lag)
    return Figure1Result(ens, var, ac, ews.survivor_counts(ens), exit_time_distribution(ens), times, threshold(times))


@dataclass(frozen=True)
class Figure2Row:
    beta: float
    exit_time: tuple  # (mean, p5, p95)
    pre_exit_variance: tuple
    pre_exit_autocorr: tuple
    n_exited: int = 0
    n_total: int = 0


def _summary(values) -> tuple:
    v = np.asarray([x for x in values if not math.isnan(x)], dtype=float)
    if v.size == 0:
        return (math.nan, math.nan, math.nan)
    return (float(v.mean()), float(np.percentile(v, 5)), float(np.percentile(v, 95)))


def figure2_betas(lo=0.2, hi=1.2, count=10) -> np.ndarray:
    return np.linspace(lo, hi, count)


def figure2(n=500, master_seed=0, betas=None, horizon=10_000.0, dt=0.01, dt_record=0.1, window=10.0, lag=1.0,
            params=AlleeParams(), workers=1) -> list:
    """Frozen-beta sweep: exit time from (beta A, inf) and pre-exit statistics per beta."""
    betas = figure2_betas() if betas is None else np.asarray(betas, dtype=float)
    rows = []
    for j, beta in enumerate(betas):
        model = allee_model(params.r, params.A, params.C, float(beta), params.noise)
        cfg = SimConfig(horizon=horizon, dt=dt, dt_record=dt_record, stop_on_exit=True,
                        basin=BasinSpec(lower=float(beta) * params.A))
        ens = run_ensemble(model, cfg, n, split_seed(master_seed, j), workers)
        exited = [p for p in ens.paths if p.exit is not None]
        if len(exited) < len(ens.paths):
            log.warning("beta=%g: %d of %d paths did not exit within horizon %g",
                        beta, len(ens.paths) - len(exited), len(ens.paths), horizon)
        pre = [ews.pre_exit_statistics(p, window, lag) for p in exited]
        rows.append(Figure2Row(
            beta=float(beta),
            exit_time=_summary([p.exit.time for p in exited]),
            pre_exit_variance=_summary([v for v, _ in pre]),
            pre_exit_autocorr=_summary([a for _, a in pre]),
            n_exited=len(exited),
            n_total=len(ens.paths),
        ))
    return rows


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    ensemble: EnsembleResult
    variance: RollingStatSeries
    span: tuple
    trend: ews.TrendLabel
    slope: float
    reference_slope: float
    extras: dict = field(default_factory=dict)


def _cubic_scenario_run(model, n, master_seed, t0, horizon, dt, dt_record, workers):
    basin = BasinSpec(lower=EquilibriumTrack(model, "unstable"))
    cfg = SimConfig(horizon=horizon, dt=dt, dt_record=dt_record, t0=t0, stop_on_exit=True, basin=basin)
    return run_ensemble(model, cfg, n, master_seed, workers)


def csd_scenario(n=1000, master_seed=0, noise=0.1, beta=1.0, dt=0.001, dt_record=0.01, window=2.0,
                 span=(3.0, 6.0), horizon=7.0, workers=1) -> ScenarioResult:
    """alpha(t) = t^-2 from t = 1: the well flattens towards the fold at alpha = 0.

    Statistics are taken on the deviation from the moving stable point
    sqrt(alpha(t) / 3) / beta. The span ends before escapes over the
    shrinking barrier become common.
    """
    model = csd_model(beta, noise)
    ens = _cubic_scenario_run(model, n, master_seed, 1.0, horizon, dt, dt_record, workers)
    var = ews.survivor_mean_series(ens, "variance", window, baseline=EquilibriumTrack(model, "stable"))
    trend = ews.classify_trend(var, *span)
    slope = ews.least_squares_slope(var, *span)
    exits = ens.exit_times()
    return ScenarioResult(ens, var, span, trend, slope, csd_variance_slope(noise, beta),
                          {"exit_fraction_by_span_end": float(np.mean(exits <= span[1]))})


def csu_scenario(n=500, master_seed=0, noise=0.1, alpha=1.0 / 3.0, dt=0.0005, dt_record=0.005, window=1.0,
                 span=(2.0, 10.0), horizon=9.0, workers=1) -> ScenarioResult:
    """beta(t) = t from t = 1: the well narrows at fixed depth.

    Returns the log-log slope of survivor-mean rolling variance against t;
    the reference is the t^-2 decay of the quasi-static variance.
    """
    model = csu_model(alpha, noise)
    ens = _cubic_scenario_run(model, n, master_seed, 1.0, horizon, dt, dt_record, workers)
    var = ews.survivor_mean_series(ens, "variance", window, baseline=EquilibriumTrack(model, "stable"))
    trend = ews.classify_trend(var, *span)
    slope = ews.loglog_slope(var, *span)
    return ScenarioResult(ens, var, span, trend, slope, -2.0,
                          {"exit_fraction": float(np.mean(np.isfinite(ens.exit_times())))})
