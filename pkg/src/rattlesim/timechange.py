"""Narrowing a potential by k versus running the original k^2 times faster.

For dX = -V'(X) dt + a dB, the process X^ driven by V(k x) satisfies
Y_s = k X^_{s / k^2} ~ X_s, so the exit time of X^ from (l/k, u/k) started at
x0/k has the law of T(x0) / k^2.

:func:`verify_time_change` simulates both sides. The narrowed ensemble runs
on the image of the original time grid (step dt / k^2, recording every
dt_record / k^2), so record index i means time i dt_record / k^2 on one side
and i dt_record on the other. Exit times are compared by record index, which
keeps ties on the two grids exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import BasinSpec, EnsembleResult, PotentialModel
from .engine import SimConfig, run_ensemble, split_seed

# two-sample KS critical coefficient at the 1% level
KS_C_001 = 1.628


class InconclusiveError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class RescaleReport:
    k: float
    ks_distance: float
    threshold: float
    n_per_ensemble: int
    tau_grid: np.ndarray
    passed: bool
    median_narrowed: float
    median_original: float
    exit_fraction_narrowed: float
    exit_fraction_original: float

    @property
    def median_ratio(self) -> float:
        """median_original / (k^2 median_narrowed); 1 under the time-change identity."""
        return self.median_original / (self.k**2 * self.median_narrowed)


def narrow_model(model: PotentialModel, k: float) -> PotentialModel:
    """Model with potential V(k x): drift k b(k x), noise unchanged."""
    if not k > 0:
        raise ValueError("k must be > 0")
    if model.is_scheduled:
        raise ValueError("time change only holds for a frozen potential; model has schedules")
    return replace(model, space_scale=model.space_scale * k)


def ks_threshold(n: int) -> float:
    return KS_C_001 * math.sqrt(2.0 / n)


def _exit_indices(ens: EnsembleResult) -> np.ndarray:
    return np.sort(np.array([p.exit.index for p in ens.paths if p.exit is not None], dtype=np.int64))


def ks_distance_censored(a_idx: np.ndarray, b_idx: np.ndarray, n_a: int, n_b: int, max_index: int):
    """sup |F_a - F_b| over exit indices <= max_index; CDFs count censored paths in the denominator."""
    grid = np.union1d(a_idx[a_idx <= max_index], b_idx[b_idx <= max_index])
    if grid.size == 0:
        return 0.0, grid
    fa = np.searchsorted(a_idx, grid, side="right") / n_a
    fb = np.searchsorted(b_idx, grid, side="right") / n_b
    return float(np.max(np.abs(fa - fb))), grid


def _median_time(idx: np.ndarray, n: int, dt_record: float) -> float:
    k = math.ceil(0.5 * n)
    if idx.size < k or k == 0:
        return math.inf
    return float(idx[k - 1]) * dt_record


def verify_time_change(model: PotentialModel, basin: BasinSpec, x0: float, k: float, n: int, horizon: float,
                       master_seed: int, dt: float = 0.01, dt_record: float = 0.1, workers: int = 1) -> RescaleReport:
    """Compare exit laws of the k-narrowed model against the original on a k^2-stretched clock.

    ``horizon`` is in the narrowed model's time (the original ensemble runs
    for horizon k^2); ``dt`` and ``dt_record`` are steps of the original
    model's clock, the narrowed side uses dt / k^2 and dt_record / k^2.
    """
    if not k > 0:
        raise ValueError("k must be > 0")
    if not basin.is_static:
        raise ValueError("basin must be static")
    if not basin.lower_at(0) < x0 < basin.upper_at(0):
        raise ValueError("x0 must lie inside the basin")
    if n < 1:
        raise ValueError("n must be >= 1")
    k2 = k * k
    narrowed = narrow_model(model, k)
    nb = BasinSpec(
        None if basin.lower is None else basin.lower / k,
        None if basin.upper is None else basin.upper / k,
    )
    cfg_a = SimConfig(horizon=horizon, dt=dt / k2, dt_record=dt_record / k2, x0=x0 / k, stop_on_exit=True, basin=nb)
    cfg_b = SimConfig(horizon=horizon * k2, dt=dt, dt_record=dt_record, x0=x0, stop_on_exit=True, basin=basin)
    ens_a = run_ensemble(narrowed, cfg_a, n, split_seed(master_seed, 0), workers)
    ens_b = run_ensemble(model, cfg_b, n, split_seed(master_seed, 1), workers)

    a_idx, b_idx = _exit_indices(ens_a), _exit_indices(ens_b)
    if a_idx.size == 0 and b_idx.size == 0:
        raise InconclusiveError(f"no exits in either ensemble within horizon {horizon} (k={k})")
    max_index = min(cfg_a.n_records, cfg_b.n_records)
    d, grid = ks_distance_censored(a_idx, b_idx, n, n, max_index)
    thr = ks_threshold(n)
    return RescaleReport(
        k=k,
        ks_distance=d,
        threshold=thr,
        n_per_ensemble=n,
        tau_grid=grid * (dt_record / k2),
        passed=d < thr,
        median_narrowed=_median_time(a_idx, n, dt_record / k2),
        median_original=_median_time(b_idx, n, dt_record),
        exit_fraction_narrowed=a_idx.size / n,
        exit_fraction_original=b_idx.size / n,
    )


def widen_is_slowdown(model: PotentialModel, basin: BasinSpec, x0: float, k: float, n: int, horizon: float,
                      master_seed: int, **kwargs) -> RescaleReport:
    """Same check for 0 < k <= 1: a widened well behaves like a slowed-down clock."""
    if not 0 < k <= 1:
        raise ValueError("widening needs 0 < k <= 1")
    return verify_time_change(model, basin, x0, k, n, horizon, master_seed, **kwargs)
