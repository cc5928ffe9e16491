"""Rolling early-warning statistics and trend classification.

Windows are time-based: a window of length w at time t holds the recorded
samples in (t - w, t], i.e. round(w / dt_record) samples, and a statistic is
reported only once t >= t0 + w. Missing values are NaN.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import stats

from .core import EnsembleResult, RollingStatSeries, SamplePath

TREND_THRESHOLD = 0.3
MIN_TREND_POINTS = 10

Baseline = Optional[Callable[[np.ndarray], np.ndarray]]


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class TrendLabel:
    label: str  # "rising" | "falling" | "none"
    kendall_tau: float
    p_value_proxy: float


def _samples(length: float, dt_record: float, what: str) -> int:
    n = int(round(length / dt_record))
    if n < 1 or abs(n * dt_record - length) > 1e-9 * max(1.0, length):
        raise ValueError(f"{what} must be a positive integer multiple of dt_record")
    return n


def _residual(path: SamplePath, baseline: Baseline) -> np.ndarray:
    if baseline is None:
        return np.asarray(path.states, dtype=float)
    return path.states - baseline(path.times)


def window_variance(x: np.ndarray, W: int) -> np.ndarray:
    """Unbiased variance of every length-W window of ``x`` (window ending at each index >= W-1)."""
    if x.size < W:
        return np.empty(0)
    views = sliding_window_view(x, W)
    out = views.var(axis=1, ddof=1) if W > 1 else np.full(views.shape[0], np.nan)
    out[np.ptp(views, axis=1) == 0] = 0.0
    return out


def window_autocorrelation(x: np.ndarray, W: int, L: int) -> np.ndarray:
    """Lag-L correlation in every length-W window, centred on the window mean."""
    if x.size < W:
        return np.empty(0)
    views = sliding_window_view(x, W)
    centred = views - views.mean(axis=1, keepdims=True)
    u, v = centred[:, :-L], centred[:, L:]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (u * v).sum(axis=1) / np.sqrt((u * u).sum(axis=1) * (v * v).sum(axis=1))
    flat = (np.ptp(views[:, :-L], axis=1) == 0) | (np.ptp(views[:, L:], axis=1) == 0)
    out[flat] = np.nan
    return out


def _place(values: np.ndarray, n: int, W: int) -> np.ndarray:
    # value for the window ending at index i sits at i; first full window ends at index W
    out = np.full(n, np.nan)
    if n > W:
        out[W:] = values[1:]
    return out


def rolling_variance(path: SamplePath, window: float, baseline: Baseline = None) -> RollingStatSeries:
    W = _samples(window, path.dt_record, "window")
    if W < 2:
        raise ValueError("window must span at least 2 samples")
    x = _residual(path, baseline)
    values = _place(window_variance(x, W), x.size, W)
    return RollingStatSeries(path.times, values, window, 0.0, (~np.isnan(values)).astype(int))


def rolling_autocorrelation(path: SamplePath, window: float, lag: float = 1.0, baseline: Baseline = None) -> RollingStatSeries:
    L = _samples(lag, path.dt_record, "lag")
    W = _samples(window, path.dt_record, "window")
    if W < 2 * L:
        raise ValueError("window must be at least twice the lag")
    x = _residual(path, baseline)
    values = _place(window_autocorrelation(x, W, L), x.size, W)
    return RollingStatSeries(path.times, values, window, lag, (~np.isnan(values)).astype(int))


STATISTICS = {
    "variance": lambda p, w, lag, base: rolling_variance(p, w, base),
    "autocorrelation": lambda p, w, lag, base: rolling_autocorrelation(p, w, lag, base),
}


def survivor_counts(ens: EnsembleResult) -> np.ndarray:
    """Number of paths still inside the basin at each recorded time."""
    n_max = max(len(p) for p in ens.paths)
    counts = np.zeros(n_max, dtype=int)
    for p in ens.paths:
        counts[: len(p)] += _alive(p)
    return counts


def _alive(p: SamplePath) -> np.ndarray:
    alive = np.ones(len(p), dtype=bool)
    if p.exit is not None:
        alive[p.exit.index:] = False
    return alive


def survivor_mean_series(ens: EnsembleResult, stat: str, window: float = 10.0, lag: float = 1.0,
                         baseline: Baseline = None) -> RollingStatSeries:
    """Mean over surviving paths of a per-path rolling statistic.

    A path contributes at time t while its exit time (if any) is later than t
    and its own value is not missing. Paths are accumulated in index order.
    """
    if len(ens.paths) == 0:
        raise ValueError("ensemble is empty")
    compute = STATISTICS[stat]
    first = ens.paths[0]
    n_max = max(len(p) for p in ens.paths)
    times = first.t0 + np.arange(n_max) * first.dt_record
    total = np.zeros(n_max)
    count = np.zeros(n_max, dtype=int)
    for p in ens.paths:
        if p.t0 != first.t0 or p.dt_record != first.dt_record:
            raise ValueError("paths must share t0 and dt_record")
        vals = compute(p, window, lag, baseline).values
        use = _alive(p) & ~np.isnan(vals)
        total[: len(p)][use] += vals[use]
        count[: len(p)] += use
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(count > 0, total / np.maximum(count, 1), np.nan)
    return RollingStatSeries(times, mean, window, lag if stat == "autocorrelation" else 0.0, count)


def pre_exit_statistics(path: SamplePath, window: float = 10.0, lag: float = 1.0, baseline: Baseline = None):
    """(variance, lag autocorrelation) over the samples preceding the exit sample.

    Uses the last round(window / dt_record) in-basin samples, fewer when the
    path exits earlier. Variance needs 2 samples, autocorrelation 2 * lag.
    """
    if path.exit is None:
        return math.nan, math.nan
    W = _samples(window, path.dt_record, "window")
    L = _samples(lag, path.dt_record, "lag")
    x = _residual(path, baseline)[: path.exit.index]
    seg = x[-W:]
    var = math.nan
    if seg.size >= 2:
        var = float(window_variance(seg, seg.size)[0])
    ac = math.nan
    if seg.size >= 2 * L:
        ac = float(window_autocorrelation(seg, seg.size, L)[0])
    return var, ac


def kendall_tau(x, y):
    res = stats.kendalltau(x, y)
    return float(res.statistic), float(res.pvalue)


def classify_trend(series: RollingStatSeries, t_start: float, t_end: float,
                   threshold: float = TREND_THRESHOLD) -> TrendLabel:
    """Kendall tau of (time, value) over [t_start, t_end]; +-threshold decides the label.

    The p-value assumes independent points, which rolling statistics are not,
    hence only a proxy.
    """
    t, v = series.between(t_start, t_end)
    if t.size < MIN_TREND_POINTS:
        raise InsufficientData(f"need >= {MIN_TREND_POINTS} non-missing values in [{t_start}, {t_end}], got {t.size}")
    tau, p = kendall_tau(t, v)
    if math.isnan(tau):
        tau = 0.0
    label = "rising" if tau >= threshold else "falling" if tau <= -threshold else "none"
    return TrendLabel(label, tau, p)


def least_squares_slope(series: RollingStatSeries, t_start: float, t_end: float) -> float:
    t, v = series.between(t_start, t_end)
    return float(np.polyfit(t, v, 1)[0])


def loglog_slope(series: RollingStatSeries, t_start: float, t_end: float) -> float:
    t, v = series.between(t_start, t_end)
    keep = v > 0
    return float(np.polyfit(np.log(t[keep]), np.log(v[keep]), 1)[0])
