"""Command-line front end.

    rattlesim <simulate|figure1|figure2|verify-timechange> --config FILE
              [--seed U64] [--out DIR] [--n N] [--svg] [--workers W]

The config is an INI file. Every key is optional; missing keys take the
defaults of the chosen command (the population-collapse values for figure1
and figure2). Keys are case-sensitive so that ``A`` and ``C`` read naturally.

Exit status: 0 success, 1 time-change check failed, 2 config error,
3 inconclusive time-change check, 4 I/O error, 5 numerical blow-up.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ews, svg
from .core import BasinSpec, ParamSchedule, validate_model
from .csvio import write_csv
from .engine import NumericalBlowup, SimConfig, run_ensemble, split_seed
from .experiments import AlleeParams, figure1, figure2, figure2_betas
from .models import (
    FIG1_BETA,
    EquilibriumTrack,
    allee_model,
    cubic_model,
    driftless_model,
    ou_model,
)
from .timechange import InconclusiveError, verify_time_change

log = logging.getLogger("rattlesim")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INCONCLUSIVE, EXIT_IO, EXIT_BLOWUP = 0, 1, 2, 3, 4, 5

COMMANDS = ("simulate", "figure1", "figure2", "verify-timechange")

# Allowed keys per section; the value is the parser applied to the raw text.
_float = float


def _int(text):
    v = int(text)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float_list(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _x0(text):
    text = text.strip()
    return text if text == "upper-stable-equilibrium" else float(text)


def _bound(text):
    text = text.strip()
    if text in ("none", "unstable-equilibrium"):
        return text
    return float(text)


SCHEMA = {
    "model": {
        "kind": str, "noise": _float, "r": _float, "A": _float, "C": _float,
        "alpha": _float, "beta": _float, "b": _float,
    },
    "schedule": {"param": str, "kind": str, "c0": _float, "c1": _float, "clamp_min": _float},
    "simulation": {
        "n_paths": _int, "seed": _int, "dt": _float, "dt_record": _float, "horizon": _float,
        "t0": _float, "x0": _x0, "stop_on_exit": _bool, "workers": _int,
    },
    "basin": {"lower": _bound, "upper": _bound},
    "statistics": {"window": _float, "lag": _float},
    "output": {"dir": str, "svg": _bool, "paths_to_write": _int, "hist_bin_width": _float},
    "figure2": {"beta_min": _float, "beta_max": _float, "beta_count": _int},
    "timechange": {"k": _float_list, "x0": _float, "n_paths": _int, "horizon": _float},
}

# Per-command defaults. figure1/figure2 carry the population-collapse values.
_COMMON = {
    "simulation": {"seed": 0, "dt": 0.01, "dt_record": 0.1, "t0": 0.0, "workers": 1},
    "statistics": {"window": 10.0, "lag": 1.0},
    "output": {"dir": "out", "svg": False, "paths_to_write": 5, "hist_bin_width": 10.0},
    "schedule": {},
    "figure2": {"beta_min": 0.2, "beta_max": 1.2, "beta_count": 10},
    "timechange": {"k": [0.5, 1.0, 2.0, 4.0], "x0": 1.0, "n_paths": 2000, "horizon": 200.0},
}
DEFAULTS = {
    "figure1": {
        "model": {"kind": "allee", "noise": 0.22, "r": 1.0, "A": 1.5, "C": 2.5, "beta": 4.0},
        "schedule": {"param": "beta", "kind": FIG1_BETA.kind, "c0": FIG1_BETA.c0, "c1": FIG1_BETA.c1,
                     "clamp_min": FIG1_BETA.clamp_min},
        "simulation": {"n_paths": 500, "horizon": 1500.0, "x0": "upper-stable-equilibrium",
                       "stop_on_exit": False},
        "basin": {"lower": "unstable-equilibrium", "upper": "none"},
    },
    "figure2": {
        "model": {"kind": "allee", "noise": 0.22, "r": 1.0, "A": 1.5, "C": 2.5},
        "simulation": {"n_paths": 500, "horizon": 10_000.0},
    },
    "verify-timechange": {
        "model": {"kind": "cubic", "noise": 1.5, "alpha": 3.0, "beta": 1.0},
        "basin": {"lower": -1.0, "upper": "none"},
    },
    "simulate": {
        "model": {"kind": "ou", "noise": 1.0, "b": 1.0},
        "simulation": {"n_paths": 1, "horizon": 10.0, "x0": 0.0, "stop_on_exit": False},
        "basin": {"lower": "none", "upper": "none"},
    },
}


class ConfigError(ValueError):
    pass


def _key_lines(text: str) -> dict:
    """(section, key) -> 1-based line number, scanned from the raw text."""
    where, section = {}, None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            where[(section, None)] = no
        elif section is not None:
            for sep in ("=", ":"):
                if sep in s:
                    where.setdefault((section, s.split(sep, 1)[0].strip()), no)
                    break
    return where


def parse_config(text: str, command: str, source: str = "<config>") -> dict:
    """Parse INI text into a nested dict of typed values merged over the command defaults."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        if lineno is None and getattr(exc, "errors", None):
            lineno = exc.errors[0][0]
        raise ConfigError(f"{source}: line {lineno}: {exc.message.splitlines()[0]}") from exc

    lines = _key_lines(text)
    cfg = {name: dict(values) for name, values in _COMMON.items()}
    for name, values in DEFAULTS[command].items():
        cfg.setdefault(name, {}).update(values)
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: line {lines.get((section, None))}: unknown section [{section}]")
        user = {}
        for key, raw in parser.items(section):
            no = lines.get((section, key))
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}: line {no}: unknown key {key!r} in [{section}]")
            try:
                user[key] = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: line {no}: bad value for {section}.{key}: {exc}") from exc
        if section == "schedule" and user:
            cfg["schedule"] = {"clamp_min": 0.0, "c1": 0.0}
        cfg.setdefault(section, {}).update(user)
    return cfg


def load_config(path, command: str) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return parse_config(text, command, str(path))


# -- building domain objects ----------------------------------------------------------

def build_model(cfg: dict):
    m = cfg["model"]
    kind = m.get("kind", "")
    schedule = None
    if cfg["schedule"]:
        s = cfg["schedule"]
        try:
            schedule = ParamSchedule(s["kind"], s["c0"], s.get("c1", 0.0), s.get("clamp_min", 0.0))
        except KeyError as exc:
            raise ConfigError(f"[schedule] needs key {exc.args[0]!r}") from exc
        except ValueError as exc:
            raise ConfigError(f"[schedule]: {exc}") from exc

    def need(*names):
        missing = [n for n in names if n not in m]
        if missing:
            raise ConfigError(f"[model] kind={kind} needs keys: {', '.join(missing)}")
        return [m[n] for n in names]

    def sched_for(*allowed):
        if schedule is None:
            return {}
        param = cfg["schedule"].get("param")
        if param not in allowed:
            raise ConfigError(f"[schedule] param must be one of {allowed} for kind={kind}, got {param!r}")
        return {f"{param}_schedule": schedule}

    if kind == "allee":
        r, A, C, noise = need("r", "A", "C", "noise")
        return allee_model(r, A, C, m.get("beta", 1.0), noise, **sched_for("beta"))
    if kind == "cubic":
        alpha, beta, noise = need("alpha", "beta", "noise")
        return cubic_model(alpha, beta, noise, **sched_for("alpha", "beta"))
    if kind == "ou":
        b, noise = need("b", "noise")
        sched_for()
        return ou_model(b, noise)
    if kind == "driftless":
        (noise,) = need("noise")
        sched_for()
        return driftless_model(noise)
    raise ConfigError(f"[model] unknown kind {kind!r} (allee, cubic, ou, driftless)")


def _bound_value(v, model):
    if v == "none":
        return None
    if v == "unstable-equilibrium":
        return EquilibriumTrack(model, "unstable")
    return float(v)


def build_basin(cfg: dict, model) -> BasinSpec:
    b = cfg.get("basin", {})
    return BasinSpec(_bound_value(b.get("lower", "none"), model), _bound_value(b.get("upper", "none"), model))


def build_sim(cfg: dict, model) -> SimConfig:
    s = cfg["simulation"]
    try:
        return SimConfig(horizon=s["horizon"], dt=s["dt"], dt_record=s["dt_record"], t0=s["t0"],
                         x0=s.get("x0", "upper-stable-equilibrium"), stop_on_exit=s.get("stop_on_exit", False),
                         basin=build_basin(cfg, model))
    except ValueError as exc:
        raise ConfigError(f"[simulation]: {exc}") from exc


def _check_model(model, horizon, t0=0.0):
    problems = validate_model(model, horizon, t0)
    if problems:
        raise ConfigError("invalid model: " + "; ".join(problems))


@dataclass
class RunContext:
    cfg: dict
    out: Path
    svg: bool
    workers: int

    @property
    def seed(self) -> int:
        return self.cfg["simulation"]["seed"]

    @property
    def n(self) -> int:
        return self.cfg["simulation"]["n_paths"]


# -- commands ---------------------------------------------------------------------

def _path_rows(paths, first_id=0):
    for i, p in enumerate(paths, first_id):
        exit_index = p.exit.index if p.exit is not None else len(p)
        for j, (t, x) in enumerate(zip(p.times, p.states)):
            yield (i, float(t), float(x), j >= exit_index)


PATHS_HEADER = ("path_id", "t", "x", "exited")


def cmd_figure1(ctx: RunContext) -> int:
    cfg = ctx.cfg
    model = build_model(cfg)
    sim = cfg["simulation"]
    _check_model(model, sim["horizon"], sim["t0"])
    st = cfg["statistics"]
    res = figure1(n=ctx.n, master_seed=ctx.seed, horizon=sim["horizon"], dt=sim["dt"], dt_record=sim["dt_record"],
                  window=st["window"], lag=st["lag"], workers=ctx.workers, model=model)
    shown = res.ensemble.paths[: cfg["output"]["paths_to_write"]]
    write_csv(ctx.out / "paths.csv", PATHS_HEADER, _path_rows(shown))
    write_csv(ctx.out / "survivor_stats.csv",
              ("t", "n_surviving", "mean_rolling_variance", "mean_lag1_autocorr"),
              zip(res.variance.times, res.n_surviving, res.variance.values, res.autocorrelation.values))
    write_csv(ctx.out / "collapse_hist.csv", ("bin_start", "bin_end", "count"),
              res.histogram(cfg["output"]["hist_bin_width"]))
    write_csv(ctx.out / "threshold.csv", ("t", "threshold"), zip(res.threshold_times, res.threshold))
    n_exit = int(np.isfinite(res.ensemble.exit_times()).sum())
    print(f"figure1: {n_exit}/{ctx.n} paths collapsed; outputs in {ctx.out}")
    if ctx.svg:
        lines = [svg.Line(p.times, p.states) for p in shown]
        lines.append(svg.Line(res.threshold_times, res.threshold, "collapse threshold", "#000", dashed=True))
        hist = res.histogram(cfg["output"]["hist_bin_width"])
        svg.render(ctx.out / "figure1.svg", [
            svg.Panel(lines, "sample paths", "t", "x"),
            svg.Panel([svg.Line(res.variance.times, res.variance.values)], "survivor-mean rolling variance", "t"),
            svg.Panel([svg.Line(res.autocorrelation.times, res.autocorrelation.values)],
                      "survivor-mean lag-1 autocorrelation", "t"),
            svg.Panel([], "collapse times", "t", "count", bars=tuple(zip(*hist)) if hist else ()),
        ])
    return EXIT_OK


FIGURE2_HEADER = ("beta", "exit_mean", "exit_p5", "exit_p95", "var_mean", "var_p5", "var_p95",
                  "ac_mean", "ac_p5", "ac_p95")


def cmd_figure2(ctx: RunContext) -> int:
    cfg = ctx.cfg
    m, sim, st, f2 = cfg["model"], cfg["simulation"], cfg["statistics"], cfg["figure2"]
    if m.get("kind") != "allee" or cfg["schedule"]:
        raise ConfigError("figure2 needs [model] kind=allee without a [schedule]")
    if f2["beta_count"] < 1:
        raise ConfigError("[figure2] beta_count must be >= 1")
    params = AlleeParams(m["r"], m["A"], m["C"], m["noise"])
    betas = figure2_betas(f2["beta_min"], f2["beta_max"], f2["beta_count"])
    for beta in betas:
        _check_model(allee_model(params.r, params.A, params.C, float(beta), params.noise), sim["horizon"])
    rows = figure2(n=ctx.n, master_seed=ctx.seed, betas=betas, horizon=sim["horizon"], dt=sim["dt"],
                   dt_record=sim["dt_record"], window=st["window"], lag=st["lag"], params=params,
                   workers=ctx.workers)
    write_csv(ctx.out / "figure2.csv", FIGURE2_HEADER,
              ((r.beta, *r.exit_time, *r.pre_exit_variance, *r.pre_exit_autocorr) for r in rows))
    print(f"figure2: {len(rows)} beta values; outputs in {ctx.out}")
    if ctx.svg:
        b = np.array([r.beta for r in rows])

        def band(attr, title, logy=False):
            v = np.array([getattr(r, attr) for r in rows], dtype=float).reshape(-1, 3)
            return svg.Panel([svg.Line(b, v[:, 0], "mean"), svg.Line(b, v[:, 1], "p5", dashed=True),
                              svg.Line(b, v[:, 2], "p95", dashed=True)], title, "beta", logy=logy)

        svg.render(ctx.out / "figure2.svg", [
            band("exit_time", "exit time", logy=True),
            band("pre_exit_variance", "pre-exit variance"),
            band("pre_exit_autocorr", "pre-exit lag-1 autocorrelation"),
        ])
    return EXIT_OK


def cmd_verify_timechange(ctx: RunContext) -> int:
    cfg = ctx.cfg
    tc, sim = cfg["timechange"], cfg["simulation"]
    model = build_model(cfg)
    if model.is_scheduled:
        raise ConfigError("verify-timechange needs a model without a [schedule]")
    basin = build_basin(cfg, model)
    if not basin.is_static:
        raise ConfigError("verify-timechange needs numeric basin bounds")
    ks = tc["k"]
    if not ks or any(not k > 0 for k in ks):
        raise ConfigError("[timechange] k must be a non-empty list of positive numbers")
    n = tc["n_paths"]
    if n < 1:
        raise ConfigError("[timechange] n_paths must be >= 1")
    _check_model(model, tc["horizon"])
    reports = []
    for idx, k in enumerate(ks):
        rep = verify_time_change(model, basin, tc["x0"], k, n, tc["horizon"] / (k * k), split_seed(ctx.seed, idx),
                                 dt=sim["dt"], dt_record=sim["dt_record"], workers=ctx.workers)
        reports.append(rep)
        print(f"k={k:g}: KS={rep.ks_distance:.4f} threshold={rep.threshold:.4f} "
              f"median ratio={rep.median_ratio:.3f} {'pass' if rep.passed else 'FAIL'}")
    write_csv(ctx.out / "timechange.csv", ("k", "ks_distance", "threshold", "pass"),
              ((r.k, r.ks_distance, r.threshold, r.passed) for r in reports))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_simulate(ctx: RunContext) -> int:
    cfg = ctx.cfg
    model = build_model(cfg)
    sim_cfg = build_sim(cfg, model)
    _check_model(model, sim_cfg.horizon, sim_cfg.t0)
    ens = run_ensemble(model, sim_cfg, ctx.n, ctx.seed, ctx.workers)
    write_csv(ctx.out / "paths.csv", PATHS_HEADER, _path_rows(ens.paths))
    st = cfg["statistics"]

    def stat_rows():
        for i, p in enumerate(ens.paths):
            var = ews.rolling_variance(p, st["window"]).values
            ac = ews.rolling_autocorrelation(p, st["window"], st["lag"]).values
            for t, v, a in zip(p.times, var, ac):
                yield (i, float(t), v, a)

    try:
        write_csv(ctx.out / "stats.csv", ("path_id", "t", "rolling_variance", "lag_autocorr"), stat_rows())
    except ValueError as exc:
        raise ConfigError(f"[statistics]: {exc}") from exc
    print(f"simulate: {ctx.n} paths; outputs in {ctx.out}")
    if ctx.svg and ens.paths:
        shown = ens.paths[: max(cfg["output"]["paths_to_write"], 1)]
        svg.render(ctx.out / "paths.svg", [svg.Panel([svg.Line(p.times, p.states) for p in shown], "paths", "t", "x")])
    return EXIT_OK


HANDLERS = {
    "simulate": cmd_simulate,
    "figure1": cmd_figure1,
    "figure2": cmd_figure2,
    "verify-timechange": cmd_verify_timechange,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rattlesim", description="Stochastic regime-shift simulations.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="INI config file")
    ap.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--n", type=int, help="number of paths (per beta for figure2, per side for verify-timechange)")
    ap.add_argument("--svg", action="store_true", help="also render SVG figures")
    ap.add_argument("--workers", type=int, help="worker threads for ensembles")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.command)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg["simulation"]["seed"] = args.seed
        if args.n is not None:
            if args.n < 0:
                raise ConfigError("--n must be >= 0")
            key = "timechange" if args.command == "verify-timechange" else "simulation"
            cfg[key]["n_paths"] = args.n
        workers = args.workers if args.workers is not None else cfg["simulation"]["workers"]
        ctx = RunContext(cfg, Path(args.out or cfg["output"]["dir"]), args.svg or cfg["output"]["svg"],
                         max(1, workers))
        return HANDLERS[args.command](ctx)
    except ConfigError as exc:
        print(f"rattlesim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InconclusiveError as exc:
        print(f"rattlesim: inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except NumericalBlowup as exc:
        print(f"rattlesim: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except OSError as exc:
        name = f" ({exc.filename})" if getattr(exc, "filename", None) else ""
        print(f"rattlesim: I/O error{name}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
