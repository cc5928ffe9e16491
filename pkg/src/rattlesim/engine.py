"""Euler-Maruyama ensembles with exit detection against moving basins.

Random streams
--------------
Every path owns an independent Philox4x64 stream (a counter-based
generator) keyed by ``split_seed(master_seed, index)``. The split is the
``index + 1``-th output of SplitMix64 seeded with ``master_seed``:

    z = master_seed + (index + 1) * 0x9E3779B97F4A7C15   (mod 2**64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    key = z ^ (z >> 31)

The finaliser is a bijection of 64-bit words, so keys are pairwise distinct
for distinct indices. A path's trajectory depends only on its key, which
makes ensembles independent of batching and worker count.
"""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .core import (
    BasinSpec,
    EnsembleResult,
    ExitRecord,
    ExitTimeDistribution,
    PotentialModel,
    SamplePath,
    ensure_valid,
)
from .models import drift_function, stable_equilibrium

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

# normals drawn per block, bounds block memory at 16 MB
_BLOCK_BUDGET = 1 << 21


def split_seed(master_seed: int, index: int) -> int:
    z = (master_seed + (index + 1) * GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def path_generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed & MASK64))


class NumericalBlowup(ArithmeticError):
    def __init__(self, t, x, path_index=None):
        self.t, self.x, self.path_index = t, x, path_index
        where = f" in path {path_index}" if path_index is not None else ""
        super().__init__(f"non-finite state{where} at t={t!r} (x={x!r})")


@dataclass(frozen=True)
class SimConfig:
    """Integration grid, initial condition and exit rule.

    ``x0`` is a number or ``"upper-stable-equilibrium"``. ``noise_substeps``
    m builds each step's normal from m consecutive stream draws as
    sum(z_i) / sqrt(m); a run at (dt, m=2) then shares its Brownian path with
    a run at (dt / 2, m=1) from the same seed.
    """

    horizon: float
    dt: float = 0.01
    dt_record: float = 0.1
    t0: float = 0.0
    x0: Union[float, str] = "upper-stable-equilibrium"
    stop_on_exit: bool = False
    basin: BasinSpec = field(default_factory=BasinSpec)
    noise_substeps: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and self.dt_record > 0 and self.horizon > 0):
            raise ValueError("dt, dt_record and horizon must be > 0")
        if not (self.dt <= self.dt_record * (1 + 1e-12) and self.dt_record <= self.horizon * (1 + 1e-12)):
            raise ValueError("need dt <= dt_record <= horizon")
        ratio = self.dt_record / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ValueError("dt_record must be an integer multiple of dt")
        if int(self.noise_substeps) < 1:
            raise ValueError("noise_substeps must be >= 1")
        if isinstance(self.x0, str) and self.x0 != "upper-stable-equilibrium":
            raise ValueError(f"unknown x0 rule {self.x0!r}")

    @property
    def steps_per_record(self) -> int:
        return int(round(self.dt_record / self.dt))

    @property
    def n_records(self) -> int:
        """Recorded intervals; a full path holds n_records + 1 states."""
        return int(math.floor(self.horizon / self.dt_record + 1e-9))

    def initial_state(self, model: PotentialModel) -> float:
        if isinstance(self.x0, str):
            return stable_equilibrium(model, self.t0)
        return float(self.x0)


def em_step(x: float, t: float, model: PotentialModel, dt: float, z: float) -> float:
    """One Euler-Maruyama step x + b(x, t) dt + a sqrt(dt) z."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    with np.errstate(over="ignore", invalid="ignore"):
        out = x + drift_function(model, t)(x) * dt + (model.noise_amplitude * math.sqrt(dt)) * z
    if not math.isfinite(out):
        raise NumericalBlowup(t, x)
    return out


def _bound_values(bound, times: np.ndarray, default: float) -> np.ndarray:
    if bound is None:
        return np.full(times.shape, default)
    if not callable(bound):
        return np.full(times.shape, float(bound))
    try:
        vals = np.asarray(bound(times), dtype=float)
        if vals.shape == times.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([bound(float(t)) for t in times], dtype=float)


def basin_bounds(basin: BasinSpec, times: np.ndarray):
    times = np.asarray(times, dtype=float)
    return _bound_values(basin.lower, times, -math.inf), _bound_values(basin.upper, times, math.inf)


def detect_exit(states, t0: float, dt_record: float, basin: BasinSpec) -> Optional[ExitRecord]:
    """First recorded sample on or beyond a basin boundary, if any."""
    states = np.asarray(states, dtype=float)
    if states.size == 0:
        raise ValueError("states must be non-empty")
    times = t0 + np.arange(states.size) * dt_record
    lo, hi = basin_bounds(basin, times)
    out = (states <= lo) | (states >= hi)
    if not out.any():
        return None
    i = int(np.argmax(out))
    return ExitRecord(float(times[i]), "lower" if states[i] <= lo[i] else "upper", float(states[i]), i)


def _simulate_batch(model: PotentialModel, cfg: SimConfig, seeds, first_index: int = 0):
    n = len(seeds)
    if n == 0:
        return []
    spr, m = cfg.steps_per_record, int(cfg.noise_substeps)
    n_rec = cfg.n_records
    dt = cfg.dt
    scale = model.noise_amplitude * math.sqrt(dt)
    inv_sqrt_m = 1.0 / math.sqrt(m)
    gens = [path_generator(s) for s in seeds]

    x0 = cfg.initial_state(model)
    pieces = [[np.array([x0])] for _ in range(n)]
    exit_idx = np.full(n, -1, dtype=np.int64)
    lo0, hi0 = basin_bounds(cfg.basin, np.array([cfg.t0]))
    if x0 <= lo0[0] or x0 >= hi0[0]:
        exit_idx[:] = 0

    active = np.arange(n) if not (cfg.stop_on_exit and exit_idx[0] == 0) else np.arange(0)
    x = np.full(active.size, x0)
    rec = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while rec < n_rec and active.size:
            nb = min(n_rec - rec, max(1, _BLOCK_BUDGET // (active.size * spr * m)))
            K = nb * spr
            Z = np.empty((active.size, K * m))
            for row, p in enumerate(active):
                gens[p].standard_normal(out=Z[row])
            if m > 1:
                Z = Z.reshape(active.size, K, m).sum(axis=2) * inv_sqrt_m
            buf = np.empty((active.size, nb))
            for r in range(nb):
                base = (rec + r) * spr
                for s in range(spr):
                    f = drift_function(model, cfg.t0 + (base + s) * dt)
                    x = x + f(x) * dt + scale * Z[:, r * spr + s]
                buf[:, r] = x

            idx = np.arange(rec + 1, rec + nb + 1)
            lo, hi = basin_bounds(cfg.basin, cfg.t0 + idx * cfg.dt_record)
            outside = (buf <= lo) | (buf >= hi)
            pending = exit_idx[active] < 0
            hit = outside.any(axis=1) & pending
            exit_idx[active[hit]] = idx[np.argmax(outside[hit], axis=1)]

            # blowup only matters up to the exit sample when paths stop there
            bad = ~np.isfinite(buf)
            if cfg.stop_on_exit:
                ends = exit_idx[active]
                bad &= (ends < 0)[:, None] | (idx[None, :] <= ends[:, None])
            if bad.any():
                row = int(np.argmax(bad.any(axis=1)))
                col = int(np.argmax(bad[row]))
                p = int(active[row])
                raise NumericalBlowup(cfg.t0 + idx[col] * cfg.dt_record, float(buf[row, col]), first_index + p)

            for row, p in enumerate(active):
                pieces[p].append(buf[row])
            rec += nb
            if cfg.stop_on_exit:
                keep = exit_idx[active] < 0
                active, x = active[keep], x[keep]

    paths = []
    for p in range(n):
        states = np.concatenate(pieces[p])
        ext = None
        if exit_idx[p] >= 0:
            i = int(exit_idx[p])
            if cfg.stop_on_exit:
                states = states[: i + 1]
            t = cfg.t0 + i * cfg.dt_record
            lo, _ = basin_bounds(cfg.basin, np.array([t]))
            ext = ExitRecord(float(t), "lower" if states[i] <= lo[0] else "upper", float(states[i]), i)
        paths.append(SamplePath(cfg.t0, cfg.dt_record, states, ext, int(seeds[p])))
    return paths


def simulate_path(model: PotentialModel, cfg: SimConfig, seed: int) -> SamplePath:
    ensure_valid(model, cfg.horizon, cfg.t0)
    return _simulate_batch(model, cfg, [seed])[0]


def config_digest(model: PotentialModel, cfg: SimConfig, n: int) -> str:
    return hashlib.sha256(repr((model, cfg, n)).encode()).hexdigest()


def run_ensemble(model: PotentialModel, cfg: SimConfig, n: int, master_seed: int, workers: int = 1) -> EnsembleResult:
    """Simulate ``n`` paths; path i uses the stream keyed by split_seed(master_seed, i)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    ensure_valid(model, cfg.horizon, cfg.t0)
    seeds = [split_seed(master_seed, i) for i in range(n)]
    workers = max(1, min(int(workers), n or 1))
    bounds = np.linspace(0, n, workers + 1).astype(int)
    batches = [(int(a), seeds[a:b]) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if workers == 1:
        results = [_simulate_batch(model, cfg, s, a) for a, s in batches]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _simulate_batch(model, cfg, job[1], job[0]), batches))
    paths = tuple(p for batch in results for p in batch)
    return EnsembleResult(paths, int(master_seed), config_digest(model, cfg, n), cfg.horizon)


def exit_time_distribution(ens: EnsembleResult) -> ExitTimeDistribution:
    times = np.sort(np.array([p.exit.time for p in ens.paths if p.exit is not None], dtype=float))
    return ExitTimeDistribution(times, len(ens.paths), ens.horizon)
