"""Acceptance criteria AC1-AC8 at their stated tolerances.

Each test prints one PASS/FAIL line (also collected in the terminal summary)
and then asserts the same condition.
"""
import math
import time

import numpy as np
import pytest

from rattlesim import ews
from rattlesim.core import BasinSpec
from rattlesim.csvio import read_csv, write_csv
from rattlesim.engine import SimConfig, run_ensemble, split_seed
from rattlesim.experiments import csd_scenario, csu_scenario, figure1, figure2
from rattlesim.models import cubic_model, driftless_model, ou_covariance, ou_model, ou_variance
from rattlesim.timechange import verify_time_change

pytestmark = pytest.mark.slow

SEED = 0


@pytest.fixture(scope="module")
def fig1():
    start = time.perf_counter()
    res = figure1(n=500, master_seed=SEED)
    return res, time.perf_counter() - start


def test_ac1_figure1(fig1, report):
    res, elapsed = fig1
    exits = res.ensemble.exit_times()
    all_exit = bool(np.all(exits < 1500))
    t_max = float(np.max(exits))
    v100, v600 = res.variance.at(100), res.variance.at(600)
    a100, a600 = res.autocorrelation.at(100), res.autocorrelation.at(600)
    ok = (all_exit and 400 <= t_max <= 1300 and v600 < 0.5 * v100 and a600 < 0.5 * a100 and elapsed < 180)
    report("AC1 figure 1", ok,
           f"all exit={all_exit}, max exit={t_max:.1f} in [400,1300], var {v100:.4f}->{v600:.4f} "
           f"(ratio {v600 / v100:.3f} < 0.5), ac {a100:.3f}->{a600:.3f} (ratio {a600 / a100:.3f} < 0.5), "
           f"{elapsed:.0f}s < 180s")
    assert ok


def test_figure1_signature_is_falling(fig1):
    res, _ = fig1
    assert ews.classify_trend(res.variance, 100, 600).label == "falling"
    assert ews.classify_trend(res.autocorrelation, 100, 600).label == "falling"


def test_ac2_figure2(report):
    start = time.perf_counter()
    rows = figure2(n=500, master_seed=SEED)
    elapsed = time.perf_counter() - start
    exit_mean = np.array([r.exit_time[0] for r in rows])
    var_mean = np.array([r.pre_exit_variance[0] for r in rows])
    ac_mean = np.array([r.pre_exit_autocorr[0] for r in rows])
    increasing = bool(np.all(np.diff(exit_mean) > 0))
    var_steps = int(np.sum(np.diff(var_mean) >= 0))
    ac_steps = int(np.sum(np.diff(ac_mean) >= 0))
    censored = sum(r.n_total - r.n_exited for r in rows)
    ok = increasing and var_steps >= 8 and ac_steps >= 8 and elapsed < 300
    report("AC2 figure 2", ok,
           f"exit mean strictly increasing={increasing} ({exit_mean[0]:.2f}..{exit_mean[-1]:.1f}), "
           f"variance nondecreasing steps={var_steps}/9, autocorr steps={ac_steps}/9, "
           f"censored={censored}, {elapsed:.0f}s < 300s")
    assert ok


def _ou_moments(paths, i_t, i_s):
    x = np.array([p.states[i_t] for p in paths])
    y = np.array([p.states[i_s] for p in paths])
    n = x.size
    xc, yc = x - x.mean(), y - y.mean()
    var, cov = float(np.var(x, ddof=1)), float(np.sum(xc * yc) / (n - 1))
    return var, float(np.std(xc * xc) / math.sqrt(n)), cov, float(np.std(xc * yc) / math.sqrt(n))


def test_ac3_ou_analytics(report):
    n, worst_z, worst_shift, lines = 10_000, 0.0, 0.0, []
    for j, b in enumerate((0.5, 1.0, 2.0)):
        model = ou_model(b, 1.0)
        seed = split_seed(SEED, j)
        base = run_ensemble(model, SimConfig(horizon=6.0, dt=0.01, dt_record=0.5, x0=0.0, noise_substeps=2), n, seed)
        half = run_ensemble(model, SimConfig(horizon=6.0, dt=0.005, dt_record=0.5, x0=0.0), n, seed)
        for t in (0.5, 1.0, 5.0):
            i_t, i_s = int(round(t / 0.5)), int(round((t + 1) / 0.5))
            var, se_v, cov, se_c = _ou_moments(base.paths, i_t, i_s)
            var_h, _, cov_h, _ = _ou_moments(half.paths, i_t, i_s)
            z_v = abs(var - ou_variance(1.0, b, t)) / se_v
            z_c = abs(cov - ou_covariance(1.0, b, t, 1.0)) / se_c
            shift = max(abs(var_h - var) / se_v, abs(cov_h - cov) / se_c)
            worst_z, worst_shift = max(worst_z, z_v, z_c), max(worst_shift, shift)
            lines.append((b, t, z_v, z_c, shift))
    ok = worst_z < 3 and worst_shift < 1
    report("AC3 OU analytics", ok,
           f"max |z| vs ou_variance/ou_covariance = {worst_z:.2f} < 3 over 9 (b, t) cells; "
           f"max dt-halving shift = {worst_shift:.2f} SE < 1")
    assert ok, lines


def test_ac4_csd_scenario(report):
    res = csd_scenario(n=1000, master_seed=SEED)
    m = res.reference_slope
    factor = res.slope / m
    rising = res.trend.kendall_tau >= 0.3
    within = 1 / 3 <= factor <= 3
    ok = rising and within
    report("AC4 CSD scenario", ok,
           f"Kendall tau={res.trend.kendall_tau:.3f} >= 0.3 ({res.trend.label}); slope={res.slope:.6f} vs "
           f"m={m:.6f} (factor {factor:.2f}, needs [1/3, 3]); exits by t={res.span[1]:g}: "
           f"{res.extras['exit_fraction_by_span_end']:.3f}")
    assert ok


def test_ac5_csu_scenario(report):
    res = csu_scenario(n=500, master_seed=SEED)
    ok = abs(res.slope + 2.0) <= 0.3
    report("AC5 CSU scenario", ok,
           f"log-log slope={res.slope:.3f} (target -2 +- 0.3), trend={res.trend.label}, "
           f"exit fraction={res.extras['exit_fraction']:.3f}")
    assert ok


def test_ac6_time_change(report):
    # noise 1.5 rather than 0.3: at 0.3 the barrier 2 dV / a^2 is ~89 and no path ever exits
    model, basin = cubic_model(3.0, 1.0, 1.5), BasinSpec(lower=-1.0)
    parts, ok = [], True
    for idx, k in enumerate((0.5, 1.0, 2.0, 4.0)):
        rep = verify_time_change(model, basin, 1.0, k, 2000, 200.0 / k**2, split_seed(SEED, idx))
        good = rep.passed and abs(rep.median_ratio - 1) <= 0.25
        ok &= good
        parts.append(f"k={k:g}: KS={rep.ks_distance:.4f}<{rep.threshold:.4f} median ratio={rep.median_ratio:.3f}")
    report("AC6 time change", ok, "; ".join(parts))
    assert ok


def test_ac7_first_passage(report):
    # exits are checked on recorded samples, so dt_record must be fine to avoid late detection
    cfg = SimConfig(horizon=12.0, dt=2e-4, dt_record=2e-4, x0=0.0, stop_on_exit=True, basin=BasinSpec(-1.0, 1.0))
    t = run_ensemble(driftless_model(1.0), cfg, 10_000, SEED).exit_times()
    mean = float(np.mean(t))
    ok = bool(np.all(np.isfinite(t))) and abs(mean - 1.0) <= 0.05
    report("AC7 first passage", ok, f"mean exit time={mean:.4f} (target 1.0 +- 5%), censored={int(np.sum(~np.isfinite(t)))}")
    assert ok


def test_ac8_property_suites(report, tmp_path):
    checks = {}
    cfg = SimConfig(horizon=20.0, x0=0.0, basin=BasinSpec(-1.0, 1.0))
    runs = [run_ensemble(driftless_model(0.7), cfg, 16, 99, workers=w) for w in (1, 2, 4, 16)]
    ref = [p.states.tobytes() for p in runs[0].paths]
    checks["workers byte-equal"] = all([p.states.tobytes() for p in r.paths] == ref and r == runs[0] for r in runs)

    rng = np.random.default_rng(SEED)
    x = np.cumsum(rng.standard_normal(1000)) * 0.3
    base = ews.window_variance(x, 50), ews.window_autocorrelation(x, 50, 5)
    shifted = ews.window_variance(x + 7.0, 50), ews.window_autocorrelation(x + 7.0, 50, 5)
    scaled = ews.window_variance(3.0 * x, 50), ews.window_autocorrelation(3.0 * x, 50, 5)
    checks["shift invariance"] = bool(np.allclose(base[0], shifted[0], rtol=1e-12, atol=1e-12)
                                      and np.allclose(base[1], shifted[1], rtol=1e-12, atol=1e-12))
    checks["scale behaviour"] = bool(np.allclose(scaled[0], 9 * base[0], rtol=1e-12)
                                     and np.allclose(scaled[1], base[1], rtol=1e-12, atol=1e-12))

    naive_v = np.array([np.var(x[i: i + 50], ddof=1) for i in range(x.size - 49)])
    naive_a = []
    for i in range(x.size - 49):
        w = x[i: i + 50] - x[i: i + 50].mean()
        u, v = w[:-5], w[5:]
        naive_a.append(np.dot(u, v) / math.sqrt(np.dot(u, u) * np.dot(v, v)))
    checks["streaming vs naive 1e-10"] = bool(np.max(np.abs(base[0] - naive_v)) <= 1e-10
                                              and np.max(np.abs(base[1] - np.array(naive_a))) <= 1e-10)

    values = rng.standard_normal((200, 3)) * 10.0 ** rng.integers(-300, 300, (200, 3))
    values[5, 1] = np.nan
    path = write_csv(tmp_path / "rt.csv", ("a", "b", "c"), values.tolist())
    _, back = read_csv(path)
    checks["CSV round trip exact"] = bool(np.array_equal(np.array(back), values, equal_nan=True))

    ok = all(checks.values())
    report("AC8 property suites", ok, ", ".join(f"{k}={v}" for k, v in checks.items()))
    assert ok
