"""Reproducible experiment runner: declarative JSON configs, one random
stream per (parameter, replicate) cell, CSV output with a JSON sidecar
capturing the full configuration.

Every statistic in the output table is a deterministic function of
(config, seed); cells are independent, so serial and parallel execution
produce identical tables.
"""

import json
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import exp, log, sqrt

import numpy as np

from . import __version__
from ._backend import BACKEND
from .errors import ConfigError, ResourceGuardError
from .stochastic import AffineBoundary, RngStream
from . import analytics as an
from . import branching as br
from . import fkpp

__all__ = ["ExperimentConfig", "ResultRow", "EXPERIMENTS", "run_experiment", "write_results"]

SQRT2 = sqrt(2.0)
LOG_COEFF = 3.0 / (2.0 * SQRT2)
LIMINF_SLOPE = -3.0 / (2.0 * SQRT2)
LIMSUP_SLOPE = -1.0 / (2.0 * SQRT2)

EXPERIMENTS = (
    "frontier",
    "dependence",
    "barrier",
    "abundo",
    "watanabe",
    "minimal",
    "pde-front",
    "renewal",
    "profile",
)

_DEFAULTS = {
    "frontier": dict(replicates=500, horizons=[6.0, 8.0, 10.0, 12.0], delta=0.5),
    "dependence": dict(replicates=2000, horizons=[4.0, 10.0], threshold_offsets=None),
    "barrier": dict(replicates=2000, horizons=[8.0], y_offsets=[0.0, 1.0, 2.0, 3.0], dt_path=1e-2),
    "abundo": dict(
        boundary_intercept=1.0,
        boundary_slope=1.0,
        horizons=[1.0],
        band=[0.4, 0.6],
        n_paths=10**6,
        path_dt=1e-3,
        n_max=12,
    ),
    "watanabe": dict(replicates=100, horizons=[8.0, 11.0], interval=[-1.0, 1.0]),
    "minimal": dict(replicates=300, horizons=[4.0, 8.0, 10.0], delta=0.5),
    "pde-front": dict(
        dx=0.05, T=30.0, fit_window=[20.0, 30.0], delta=0.5, systems=["line", "halfline"]
    ),
    "renewal": dict(
        dx=0.025,
        T=5.0,
        x_shift=8.0,
        sample_times=[5.0],
        sample_y=[0.0, 1.0, 2.0],
        store_dt=0.05,
        refine=True,
    ),
    "profile": dict(
        dx=0.1, T=15.0, times=[5.0, 10.0, 15.0], y_pair=[0.0, 2.0], delta=0.5, compare_line=True
    ),
}

_COMMON_KEYS = {"experiment", "seed", "guard", "workers", "output_path", "raw_path"}


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    params: str
    statistic: str
    value: float
    std_error: float | None
    n: int
    wall_time: float


@dataclass
class ExperimentConfig:
    """Validated experiment description; unknown keys are rejected."""

    experiment: str
    seed: int = 0
    guard: int = br.DEFAULT_GUARD
    workers: int = 1
    output_path: str = "results.csv"
    raw_path: str | None = None
    options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data):
        problems = []
        if "experiment" not in data:
            problems.append("experiment: missing")
            raise ConfigError("; ".join(problems))
        exp = data["experiment"]
        if exp not in EXPERIMENTS:
            problems.append(f"experiment: unknown {exp!r} (choose from {', '.join(EXPERIMENTS)})")
            raise ConfigError("; ".join(problems))
        allowed = _COMMON_KEYS | set(_DEFAULTS[exp])
        unknown = sorted(set(data) - allowed)
        if unknown:
            problems.append(f"unknown keys for {exp}: {', '.join(unknown)}")
        options = dict(_DEFAULTS[exp])
        for key in _DEFAULTS[exp]:
            if key in data:
                options[key] = data[key]
        cfg = cls(
            experiment=exp,
            seed=int(data.get("seed", 0)),
            guard=int(data.get("guard", br.DEFAULT_GUARD)),
            workers=int(data.get("workers", 1)),
            output_path=str(data.get("output_path", "results.csv")),
            raw_path=data.get("raw_path"),
            options=options,
        )
        problems.extend(cfg._validate())
        if problems:
            raise ConfigError("; ".join(problems))
        return cfg

    def _validate(self):
        problems = []
        o = self.options
        if self.guard <= 0:
            problems.append(f"guard: must be > 0, got {self.guard}")
        if self.workers < 1:
            problems.append(f"workers: must be >= 1, got {self.workers}")
        if "replicates" in o and int(o["replicates"]) < 1:
            problems.append(f"replicates: must be >= 1, got {o['replicates']}")
        if "horizons" in o:
            hs = list(o["horizons"])
            if not hs or sorted(hs) != hs:
                problems.append(f"horizons: must be non-empty ascending, got {hs}")
            if any(h <= 0 for h in hs):
                problems.append("horizons: must be positive")
        if "y_offsets" in o and any(y < 0 for y in o["y_offsets"]):
            problems.append("y_offsets: must be >= 0")
        if "dt_path" in o and o["dt_path"] <= 0:
            problems.append(f"dt_path: must be > 0, got {o['dt_path']}")
        if "dx" in o and o["dx"] <= 0:
            problems.append(f"dx: must be > 0, got {o['dx']}")
        if "delta" in o and not 0 < o["delta"] < 1:
            problems.append(f"delta: must lie in (0,1), got {o['delta']}")
        if "band" in o and not 0 <= o["band"][0] < o["band"][1]:
            problems.append(f"band: must satisfy 0 <= lo < hi, got {o['band']}")
        if self.experiment == "frontier" and len(set(o["horizons"])) < 4:
            problems.append("horizons: frontier fit needs at least 4 distinct horizons")
        if self.experiment == "watanabe" and len(o["horizons"]) != 2:
            problems.append("horizons: watanabe needs exactly [t1, t2]")
        return problems

    def to_dict(self):
        data = {
            "experiment": self.experiment,
            "seed": self.seed,
            "guard": self.guard,
            "workers": self.workers,
            "output_path": self.output_path,
            "raw_path": self.raw_path,
        }
        data.update(self.options)
        return data


# ---------------------------------------------------------------------------
# cell functions (top level, picklable); one RngStream per (parameter, replicate)

def _cell_extremes(args):
    seed, cell, t, guard = args
    snap = br.simulate_bbm(t, RngStream(seed, cell), guard=guard)
    mx, mn = br.extremes(snap)
    return mx, mn


def _cell_census(args):
    seed, cell, t, y_offsets, dt_path, guard = args
    h, g, n_leaves = br.barrier_census_multi(
        t, y_offsets, RngStream(seed, cell), dt_path=dt_path, guard=guard
    )
    return h, g, n_leaves


def _cell_nested_counts(args):
    seed, cell, t1, t2, interval, guard = args
    snaps = br.simulate_bbm_nested([t1, t2], RngStream(seed, cell), guard=guard)
    lo, hi = interval
    n1 = an.interval_count(snaps[0], (lo, hi))
    n2 = an.interval_count(snaps[1], (lo, hi))
    width = hi - lo
    d1 = an.interval_count(snaps[1], (lo - width, lo))
    d2 = an.interval_count(snaps[1], (hi, hi + width))
    return n1, n2, d1, d2


def _cell_min_reflected(args):
    seed, cell, t, guard = args
    snap = br.simulate_bbm(t, RngStream(seed, cell), guard=guard)
    return float(np.abs(snap.positions).min())


def _map_cells(func, cells, workers):
    if workers <= 1 or len(cells) < 2:
        return [func(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, len(cells) // (workers * 8))
        return list(pool.map(func, cells, chunksize=chunk))


class _RowBuilder:
    def __init__(self, experiment):
        self.experiment = experiment
        self.rows = []
        self._t0 = time.perf_counter()

    def add(self, params, statistic, value, std_error=None, n=1):
        now = time.perf_counter()
        self.rows.append(
            ResultRow(
                experiment=self.experiment,
                params=params,
                statistic=statistic,
                value=float(value),
                std_error=None if std_error is None else float(std_error),
                n=int(n),
                wall_time=round(now - self._t0, 6),
            )
        )
        self._t0 = now


def _quantile_rows(rb, params, name, values, delta, horizon):
    est = an.quantile_estimate(values, delta, horizon=horizon)
    se = (est.ci_high - est.ci_low) / (2 * 1.959964)
    rb.add(params, name, est.value, se, est.n)
    rb.add(params, name + "_ci_low", est.ci_low, None, est.n)
    rb.add(params, name + "_ci_high", est.ci_high, None, est.n)
    return est


def _fit_rows(rb, label, fit):
    rb.add(label, "fit_speed", fit.speed)
    rb.add(label, "fit_log_coeff", fit.log_coeff)
    rb.add(label, "fit_intercept", fit.intercept)
    rb.add(label, "fit_residual_rms", fit.residual_rms)


def _run_frontier(cfg, rb, raw):
    o = cfg.options
    horizons = [float(t) for t in o["horizons"]]
    reps = int(o["replicates"])
    delta = float(o["delta"])
    med_signed, med_reflected = [], []
    for pi, t in enumerate(horizons):
        cells = [(cfg.seed, pi * reps + r, t, cfg.guard) for r in range(reps)]
        out = _map_cells(_cell_extremes, cells, cfg.workers)
        mx = np.array([m for m, _ in out])
        mn = np.array([m for _, m in out])
        mref = np.maximum(mx, -mn)
        params = f"t={t:g}"
        est_s = _quantile_rows(rb, params, "quantile_max_signed", mx, delta, t)
        est_r = _quantile_rows(rb, params, "quantile_max_reflected", mref, delta, t)
        med_signed.append(est_s.value)
        med_reflected.append(est_r.value)
        if raw is not None:
            for r in range(reps):
                raw.append((f"t={t:g}", r, mx[r], mn[r], mref[r]))
    fit_s = an.frontier_fit(horizons, med_signed)
    fit_r = an.frontier_fit(horizons, med_reflected)
    _fit_rows(rb, "system=signed", fit_s)
    _fit_rows(rb, "system=reflected", fit_r)
    rb.add("reference", "liminf_log_slope", LIMINF_SLOPE)
    rb.add("reference", "limsup_log_slope", LIMSUP_SLOPE)
    rb.add("reference", "speed", SQRT2)


def _run_dependence(cfg, rb, raw):
    o = cfg.options
    horizons = [float(t) for t in o["horizons"]]
    reps = int(o["replicates"])
    offsets = o["threshold_offsets"]
    for pi, t in enumerate(horizons):
        cells = [(cfg.seed, pi * reps + r, t, cfg.guard) for r in range(reps)]
        out = _map_cells(_cell_extremes, cells, cfg.workers)
        pairs = np.array(out)
        x = SQRT2 * t - LOG_COEFF * log(t)
        if offsets is not None:
            x += float(offsets[pi])
        est = an.dependence_statistic(pairs, x)
        params = f"t={t:g};x={x:.6g}"
        rb.add(params, "dependence_delta", est.value, est.std_error, est.n)
        if raw is not None:
            for r in range(reps):
                raw.append((params, r, pairs[r, 0], pairs[r, 1], np.nan))


def _run_barrier(cfg, rb, raw):
    o = cfg.options
    horizons = [float(t) for t in o["horizons"]]
    y_offsets = [float(y) for y in o["y_offsets"]]
    reps = int(o["replicates"])
    dt_path = float(o["dt_path"])
    for pi, t in enumerate(horizons):
        cells = [(cfg.seed, pi * reps + r, t, y_offsets, dt_path, cfg.guard) for r in range(reps)]
        out = _map_cells(_cell_census, cells, cfg.workers)
        H = np.array([h for h, _, _ in out], dtype=float)
        G = np.array([g for _, g, _ in out], dtype=float)
        pop = np.array([n for _, _, n in out], dtype=float)
        rb.add(f"t={t:g}", "population_mean", pop.mean(), pop.std(ddof=1) / sqrt(reps), reps)
        for yi, y in enumerate(y_offsets):
            params = f"t={t:g};y={y:g}"
            h_mean = H[:, yi].mean()
            h_se = H[:, yi].std(ddof=1) / sqrt(reps)
            g_mean = G[:, yi].mean()
            g_se = G[:, yi].std(ddof=1) / sqrt(reps)
            rb.add(params, "census_H_mean", h_mean, h_se, reps)
            rb.add(params, "census_Gamma_mean", g_mean, g_se, reps)
            scale = exp(SQRT2 * y) / (y + 2.0) ** 2
            rb.add(params, "census_Gamma_scaled", g_mean * scale, g_se * scale, reps)
            rb.add(params, "expected_H_formula", an.expected_band_count(y, t), None, 1)
            if raw is not None:
                for r in range(reps):
                    raw.append((params, r, H[r, yi], G[r, yi], pop[r]))


def _run_abundo(cfg, rb, raw):
    o = cfg.options
    boundary = AffineBoundary(float(o["boundary_intercept"]), float(o["boundary_slope"]))
    t = float(o["horizons"][0])
    lo, hi = (float(v) for v in o["band"])
    n_max = int(o["n_max"])
    series = an.taboo_band_probability(boundary, t, lo, hi, n_max=n_max)
    mid_density, mid_bound = an.taboo_density(boundary, t, 0.5 * (lo + hi), n_max)
    mc, se = an.fpt_band_estimate(
        boundary,
        t,
        lo,
        hi,
        RngStream(cfg.seed, 0),
        n_paths=int(o["n_paths"]),
        dt=float(o["path_dt"]),
    )
    params = f"a={boundary.intercept:g};b={boundary.slope:g};t={t:g};band=[{lo:g},{hi:g}]"
    rb.add(params, "series_band_probability", series)
    rb.add(params, "series_mid_density", mid_density)
    rb.add(params, "series_truncation_bound", mid_bound)
    rb.add(params, "mc_band_probability", mc, se, int(o["n_paths"]))
    rb.add(params, "abs_difference_in_se", abs(series - mc) / se, None, int(o["n_paths"]))


def _run_watanabe(cfg, rb, raw):
    o = cfg.options
    t1, t2 = (float(t) for t in o["horizons"])
    lo, hi = (float(v) for v in o["interval"])
    reps = int(o["replicates"])
    cells = [(cfg.seed, r, t1, t2, (lo, hi), cfg.guard) for r in range(reps)]
    out = _map_cells(_cell_nested_counts, cells, cfg.workers)
    ratios = []
    excluded = 0
    side_ratios = []
    for n1, n2, d1, d2 in out:
        if n1 == 0:
            excluded += 1
        else:
            ratios.append((n2 / n1) * sqrt(t2 / t1) * exp(-(t2 - t1)))
        if d2 > 0:
            side_ratios.append(d1 / d2)
    params = f"t1={t1:g};t2={t2:g};D=[{lo:g},{hi:g}]"
    ratios = np.array(ratios)
    rb.add(params, "ratio_median", np.median(ratios), None, ratios.size)
    rb.add(params, "excluded_fraction", excluded / reps, None, reps)
    rb.add(params, "disjoint_interval_ratio_median", np.median(side_ratios), None, len(side_ratios))
    if raw is not None:
        for r, (n1, n2, d1, d2) in enumerate(out):
            raw.append((params, r, n1, n2, np.nan))


def _run_minimal(cfg, rb, raw):
    o = cfg.options
    horizons = [float(t) for t in o["horizons"]]
    reps = int(o["replicates"])
    delta = float(o["delta"])
    for pi, t in enumerate(horizons):
        cells = [(cfg.seed, pi * reps + r, t, cfg.guard) for r in range(reps)]
        out = np.array(_map_cells(_cell_min_reflected, cells, cfg.workers))
        _quantile_rows(rb, f"t={t:g}", "quantile_min_reflected", out, delta, t)
        if raw is not None:
            for r in range(reps):
                raw.append((f"t={t:g}", r, out[r], np.nan, np.nan))


def _run_pde_front(cfg, rb, raw):
    o = cfg.options
    dx = float(o["dx"])
    T = float(o["T"])
    w_lo, w_hi = (float(v) for v in o["fit_window"])
    delta = float(o["delta"])
    dt = dx * dx
    if "line" in o["systems"]:
        grid = fkpp.Grid1D(lo=-20.0, hi=SQRT2 * T + 20.0, dx=dx, dt=dt, T=T)
        hist = fkpp.solve_fkpp_line(grid, store_dt=0.5)
        ts, fs = fkpp.front_trajectory(hist, delta, t_min=w_lo, t_max=w_hi)
        fit = an.frontier_fit(ts, fs)
        _fit_rows(rb, "system=line", fit)
        rb.add(
            "system=line",
            "two_point_speed",
            (fs[-1] - fs[0]) / (ts[-1] - ts[0]),
        )
        for tt, ff in zip(ts, fs):
            rb.add(f"system=line;t={tt:g}", "front_position", ff)
    if "halfline" in o["systems"]:
        grid = fkpp.Grid1D(lo=0.0, hi=SQRT2 * T + 20.0, dx=dx, dt=dt, T=T)
        q_lo = SQRT2 * w_lo - LOG_COEFF * log(w_lo)
        q_hi = SQRT2 * w_hi - LOG_COEFF * log(w_hi)
        xs = np.arange(q_lo - 8.0, q_hi + 8.0 + 1e-9, 0.25)
        family = fkpp.solve_halfline_family(grid, xs, store_dt=0.5)
        ts = [t for t in family.times if w_lo - 1e-9 <= t <= w_hi + 1e-9]
        fronts = []
        for t in ts:
            prof = family.threshold_profile(t, 0.0)
            fronts.append(float(np.interp(delta, prof, xs)))
        fit = an.frontier_fit(ts, fronts)
        _fit_rows(rb, "system=halfline", fit)
        for tt, ff in zip(ts, fronts):
            rb.add(f"system=halfline;t={tt:g}", "front_position", ff)
    rb.add("reference", "liminf_log_slope", LIMINF_SLOPE)
    rb.add("reference", "limsup_log_slope", LIMSUP_SLOPE)
    rb.add("reference", "speed", SQRT2)


def _run_renewal(cfg, rb, raw):
    o = cfg.options
    T = float(o["T"])
    x_shift = float(o["x_shift"])
    store_dt = float(o["store_dt"])
    sample_points = [
        (float(t), x_shift, float(y)) for t in o["sample_times"] for y in o["sample_y"]
    ]
    dx_levels = [float(o["dx"])]
    if o.get("refine", True):
        dx_levels.append(float(o["dx"]) / 2.0)
    for dx in dx_levels:
        grid = fkpp.Grid1D(lo=0.0, hi=SQRT2 * T + 20.0, dx=dx, dt=dx * dx, T=T)
        hist = fkpp.solve_fkpp_halfline(grid, x_shift, store_dt=store_dt)
        res = fkpp.renewal_residuals(hist, sample_points)
        for (t, x, y), r in zip(sample_points, res):
            rb.add(f"dx={dx:g};t={t:g};x={x:g};y={y:g}", "renewal_residual", r)
        rb.add(f"dx={dx:g}", "renewal_residual_max", res.max(), None, len(sample_points))


def _run_profile(cfg, rb, raw):
    o = cfg.options
    dx = float(o["dx"])
    T = float(o["T"])
    times = [float(t) for t in o["times"]]
    y_pair = tuple(float(y) for y in o["y_pair"])
    delta = float(o["delta"])
    grid = fkpp.Grid1D(lo=0.0, hi=SQRT2 * T + 20.0, dx=dx, dt=dx * dx, T=T)
    q_max = SQRT2 * T
    xs = np.arange(0.0, q_max + 8.0 + 1e-9, 0.25)
    family = fkpp.solve_halfline_family(grid, xs, store_dt=min(times + [1.0]))
    dists = fkpp.profile_convergence(family, y_pair, times, delta=delta)
    for t, d in dists:
        rb.add(f"t={t:g};y0={y_pair[0]:g};y1={y_pair[1]:g}", "profile_sup_distance", d)
    if o.get("compare_line", True):
        t = times[-1]
        lgrid = fkpp.Grid1D(lo=-20.0, hi=SQRT2 * T + 20.0, dx=dx, dt=dx * dx, T=t)
        lhist = fkpp.solve_fkpp_line(lgrid, store_dt=t)
        lstate = lhist.final
        lx = lgrid.nodes()
        q_line = fkpp.front_position(lstate, delta)
        xi = np.arange(-6.0, 6.0 + 1e-9, 0.25)
        line_prof = np.interp(q_line + xi, lx, lstate.values)
        prof = family.threshold_profile(t, y_pair[0])
        q_half = float(np.interp(delta, prof, xs))
        half_prof = np.interp(q_half + xi, xs, prof)
        rb.add(
            f"t={t:g};line_vs_halfline_y={y_pair[0]:g}",
            "profile_sup_distance",
            float(np.max(np.abs(line_prof - half_prof))),
        )


_RUNNERS = {
    "frontier": _run_frontier,
    "dependence": _run_dependence,
    "barrier": _run_barrier,
    "abundo": _run_abundo,
    "watanabe": _run_watanabe,
    "minimal": _run_minimal,
    "pde-front": _run_pde_front,
    "renewal": _run_renewal,
    "profile": _run_profile,
}


def run_experiment(config: ExperimentConfig):
    """Execute the experiment; returns (rows, partial) where partial flags a
    resource-guard interruption (completed rows are still returned)."""
    rb = _RowBuilder(config.experiment)
    raw = [] if config.raw_path else None
    partial = False
    try:
        _RUNNERS[config.experiment](config, rb, raw)
    except ResourceGuardError:
        partial = True
    if raw is not None:
        _write_atomic(
            config.raw_path,
            _format_csv(
                ["params", "replicate", "value_a", "value_b", "value_c"],
                [
                    (p, r, repr(float(a)), repr(float(b)), repr(float(c)))
                    for p, r, a, b, c in raw
                ],
            ),
        )
    return rb.rows, partial


def _format_csv(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    return "\n".join(lines) + "\n"


def _write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rows_to_csv(rows):
    header = ["experiment", "params", "statistic", "value", "std_error", "n", "wall_time"]
    out = []
    for r in rows:
        out.append(
            (
                r.experiment,
                r.params,
                r.statistic,
                repr(r.value),
                "" if r.std_error is None else repr(r.std_error),
                r.n,
                r.wall_time,
            )
        )
    return _format_csv(header, out)


def write_results(config, rows, partial):
    """Write the CSV table atomically plus the JSON provenance sidecar."""
    _write_atomic(config.output_path, rows_to_csv(rows))
    sidecar = {
        "config": config.to_dict(),
        "version": __version__,
        "backend": BACKEND,
        "partial": partial,
    }
    _write_atomic(os.path.splitext(config.output_path)[0] + ".json", json.dumps(sidecar, indent=2) + "\n")
