"""Monte Carlo experiments confronting F_n with its limit, plus report output.

Every replica r draws its path from the substream ``(seed, "paths", r)`` on
a grid with dt = 1 reaching the largest horizon n * t needed, and all
scales n are read off prefixes of that one path.  Per-replica results are
stored by index and reduced with exactly rounded sums, so tables are a pure
function of (config, seed) whatever the thread count.
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analytic import beta_norm_spectral, chd_closed_form, gamma_bound
from .errors import ConfigError, DomainError, PlanningError
from .fbm_core import FbmSampler, HurstModel, TimeGrid, write_path_csv
from .functionals import (
    calibrate_bandwidth,
    expected_local_time,
    occupation_integrals,
    simulate_limit_variable,
)
from .moments import MomentSpec, clt_moment_target
from .rng import RngStream
from .stats import MomentEstimate, ecdf, ks_two_sample, z_score
from .testfunc import TestFunction, verify_membership

MAX_PATH_STEPS = 1 << 22
BANDWIDTH_PILOT_PATHS = 200

# pass/fail thresholds used by --check
ODD_Z_MAX = 4.0
EVEN_REL_ERR_MAX = 0.15
LLN_REL_ERR_MAX = 0.10
SLOPE_TOL = 0.15
KS_P_MIN = 0.01


def _ints(values, name):
    try:
        return [int(v) if float(v).is_integer() else float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of numbers") from None


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run depends on.  JSON keys match the field names."""

    hurst: float
    dim: int = 1
    function: TestFunction = field(default_factory=TestFunction)
    lln_function: TestFunction | None = None
    n_schedule: tuple = (4096, 8192, 16384, 32768, 65536)
    replicas: int = 1000
    t_points: tuple = (1.0,)
    moments: tuple = (MomentSpec.single(0.0, 1.0, 2),)
    lengths: tuple = (0.125, 0.25, 0.5, 1.0)
    tightness_start: float = 0.0
    seed: int = 0
    bandwidth: object = "auto"
    limit_steps: int = 4096
    oracle_samples: int = 200_000
    n_steps: int = 1024
    dt: float = 1.0
    paths: int = 1
    threads: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        try:
            object.__setattr__(self, "model", HurstModel(self.hurst, self.dim))
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
        if self.function.d != self.dim:
            raise ConfigError("function dimension does not match dim")
        if self.lln_function is None:
            object.__setattr__(self, "lln_function", TestFunction.gaussian(1.0, 1.0, self.dim))
        if self.replicas < 100:
            raise ConfigError(f"replicas must be >= 100, got {self.replicas}")
        ns = list(self.n_schedule)
        if not ns or any(n <= 0 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("n_schedule must be nonempty, positive and strictly increasing")
        if not self.t_points or any(t < 0 for t in self.t_points):
            raise ConfigError("t_points must be nonempty and nonnegative")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not (self.bandwidth == "auto" or (isinstance(self.bandwidth, (int, float)) and self.bandwidth > 0)):
            raise ConfigError("bandwidth must be 'auto' or a positive number")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "hurst" not in data:
            raise ConfigError("config needs 'hurst'")
        kw = dict(data)
        dim = int(kw.get("dim", 1))
        try:
            if "function" in kw:
                kw["function"] = TestFunction.from_dict({"dim": dim, **kw["function"]})
            else:
                kw["function"] = TestFunction(d=dim)
            if kw.get("lln_function") is not None:
                kw["lln_function"] = TestFunction.from_dict({"dim": dim, "kind": "gaussian", **kw["lln_function"]})
            if "moments" in kw:
                kw["moments"] = tuple(MomentSpec.from_dict(m) for m in kw["moments"])
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
        for key in ("n_schedule", "t_points", "lengths"):
            if key in kw:
                kw[key] = tuple(_ints(kw[key], key))
        try:
            for key in ("replicas", "limit_steps", "oracle_samples", "n_steps", "paths", "threads", "seed"):
                if key in kw:
                    kw[key] = int(kw[key])
            for key in ("hurst", "tightness_start", "dt"):
                if key in kw:
                    kw[key] = float(kw[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad config value: {exc}") from None
        kw["dim"] = dim
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data)

    def replace(self, **changes) -> "ExperimentConfig":
        data = {k: getattr(self, k) for k in self.__dataclass_fields__}
        data.update(changes)
        return ExperimentConfig(**data)

    def to_dict(self) -> dict:
        out = {}
        for key in self.__dataclass_fields__:
            val = getattr(self, key)
            if isinstance(val, TestFunction):
                val = val.to_dict()
            elif key == "moments":
                val = [m.to_dict() for m in val]
            elif isinstance(val, tuple):
                val = list(val)
            out[key] = val
        return out

    @property
    def root(self) -> RngStream:
        return RngStream(self.seed)


@dataclass
class Report:
    """Tables (name -> (header, rows)) plus a JSON-able summary."""

    kind: str
    tables: dict
    summary: dict
    checks: dict = field(default_factory=dict)
    stages: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


# ---- replica engine ----------------------------------------------------------

def _plan_steps(config: ExperimentConfig, horizons) -> int:
    steps = int(math.ceil(max(horizons) - 1e-9))
    steps = max(steps, 1)
    if steps > MAX_PATH_STEPS:
        raise PlanningError(
            f"longest horizon needs {steps} path steps, above the limit {MAX_PATH_STEPS}"
        )
    return steps


def map_replicas(work, count: int, threads: int = 1) -> np.ndarray:
    """Evaluate ``work(r)`` for r in range(count); rows are stored by index."""
    first = np.asarray(work(0), dtype=float)
    out = np.empty((count,) + first.shape)
    out[0] = first
    if count == 1:
        return out

    def run(r):
        out[r] = work(r)

    if threads <= 1:
        for r in range(1, count):
            run(r)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(1, count)))
    return out


def functional_table(config: ExperimentConfig, func, times, exponent: float, stage: str = "paths"):
    """Per-replica n^exponent * int_0^{n t} func(B) for every (n, t).

    Returns an array of shape (replicas, len(n_schedule), len(times)).
    """
    ns = np.asarray(config.n_schedule, dtype=float)
    times = np.asarray(times, dtype=float)
    horizons = (ns[:, None] * times[None, :]).ravel()
    steps = _plan_steps(config, horizons)
    sampler = FbmSampler(config.model, TimeGrid(1.0, steps))
    scale = (ns**exponent)[:, None]
    root = config.root.substream(stage)

    def work(r):
        path = sampler.sample(root.substream(r))
        vals = occupation_integrals(path, func, horizons).reshape(ns.size, times.size)
        return vals * scale

    return map_replicas(work, config.replicas, config.threads)


def _trend_slope(ns, values) -> float:
    x = np.log2(np.asarray(ns, dtype=float))
    y = np.asarray(values, dtype=float)
    if x.size < 2:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


# ---- runners -----------------------------------------------------------------

def _require_clt(config: ExperimentConfig):
    if not config.model.clt_regime:
        raise ConfigError(
            f"H={config.hurst:g}, d={config.dim} is outside the CLT regime 1/(d+2) < H < 1/d"
        )
    try:
        verify_membership(config.function, config.model.beta)
    except DomainError as exc:
        raise ConfigError(f"function not admissible: {exc}") from None


def run_clt_moments(config: ExperimentConfig) -> Report:
    """Empirical E prod (F_n(b_i) - F_n(a_i))^{m_i} against the limit moments."""
    _require_clt(config)
    model = config.model
    times = sorted({x for spec in config.moments for iv in spec.intervals for x in iv})
    col = {t: i for i, t in enumerate(times)}
    table = functional_table(config, config.function, times, (model.hd - 1.0) / 2.0)

    header = ["n", "m_spec", "empirical", "stderr", "target", "target_stderr", "z"]
    rows = []
    summary = {"specs": []}
    checks = {}
    oracle_root = config.root.substream("oracle")
    for k, spec in enumerate(config.moments):
        target = clt_moment_target(spec, model, config.function, config.oracle_samples,
                                   oracle_root.substream(k))
        prod = np.ones(table.shape[:2])
        for (a, b), m in zip(spec.intervals, spec.multi_index):
            prod *= (table[:, :, col[b]] - table[:, :, col[a]]) ** m
        ests = [MomentEstimate.from_samples(prod[:, j]) for j in range(len(config.n_schedule))]
        rel = []
        for n, est in zip(config.n_schedule, ests):
            z = z_score(est, target)
            rows.append([n, spec.label, est.value, est.stderr, target.value, target.stderr, z])
            rel.append(abs(est.value - target.value) / abs(target.value) if target.value else math.nan)
        final = ests[-1]
        entry = {
            "m_spec": spec.label,
            "even": spec.all_even,
            "target": target.to_dict(),
            "final_empirical": final.to_dict(),
            "final_z": z_score(final, target),
        }
        if spec.all_even:
            entry["relative_errors"] = rel
            entry["abs_error_trend_slope"] = _trend_slope(config.n_schedule, rel)
            checks[f"{spec.label} final relative error <= {EVEN_REL_ERR_MAX}"] = rel[-1] <= EVEN_REL_ERR_MAX
            checks[f"{spec.label} |error| trend decreasing"] = entry["abs_error_trend_slope"] <= 0.0
        else:
            checks[f"{spec.label} |z| <= {ODD_Z_MAX} at final n"] = abs(entry["final_z"]) <= ODD_Z_MAX
        summary["specs"].append(entry)
    summary["gamma_bound"] = gamma_bound(model)
    stages = {"paths": config.root.substream("paths").describe(), "oracle": oracle_root.describe()}
    return Report("clt-moments", {"moments": (header, rows)}, summary, checks, stages)


def run_lln(config: ExperimentConfig) -> Report:
    """Mean of n^{Hd-1} int_0^{nt} g(B) against E L_t(0) int g."""
    model = config.model
    try:
        model.require_local_time()
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    g = config.lln_function
    times = list(config.t_points)
    table = functional_table(config, g, times, model.hd - 1.0)
    header = ["n", "t", "empirical", "stderr", "limit", "rel_err"]
    rows = []
    checks = {}
    for j, n in enumerate(config.n_schedule):
        for i, t in enumerate(times):
            est = MomentEstimate.from_samples(table[:, j, i])
            limit = expected_local_time(model, t) * g.integral
            rel = abs(est.value - limit) / abs(limit) if limit else abs(est.value)
            rows.append([n, t, est.value, est.stderr, limit, rel])
            if j == len(config.n_schedule) - 1 and t > 0:
                checks[f"t={t:g} final relative error <= {LLN_REL_ERR_MAX}"] = rel <= LLN_REL_ERR_MAX
    summary = {"integral_g": g.integral}
    stages = {"paths": config.root.substream("paths").describe()}
    return Report("lln", {"lln": (header, rows)}, summary, checks, stages)


def run_tightness_scan(config: ExperimentConfig) -> Report:
    """Log-log regression of E[(F_n(a+l) - F_n(a))^2] on the interval length l."""
    _require_clt(config)
    lengths = sorted(config.lengths)
    if len(lengths) < 4 or any(ell <= 0 for ell in lengths):
        raise ConfigError("tightness scan needs at least 4 positive interval lengths")
    model = config.model
    a = config.tightness_start
    times = sorted({a} | {a + ell for ell in lengths})
    col = {t: i for i, t in enumerate(times)}
    n = config.n_schedule[-1]
    sub = config.replace(n_schedule=(n,))
    table = functional_table(sub, config.function, times, (model.hd - 1.0) / 2.0)[:, 0, :]
    ests = [MomentEstimate.from_samples((table[:, col[a + ell]] - table[:, col[a]]) ** 2) for ell in lengths]
    x = np.log(lengths)
    y = np.log([e.value for e in ests])
    slope, intercept = np.polyfit(x, y, 1)
    theory = 1.0 - model.hd
    gam = gamma_bound(model)
    header = ["n", "ell", "empirical", "stderr", "log_ell", "log_moment", "fitted_log_moment"]
    rows = [
        [n, ell, e.value, e.stderr, float(lx), float(ly), float(intercept + slope * lx)]
        for ell, e, lx, ly in zip(lengths, ests, x, y)
    ]
    summary = {
        "n": n,
        "start": a,
        "slope": float(slope),
        "intercept": float(intercept),
        "theoretical_exponent": theory,
        "gamma_bound": gam,
        "exponent_band": [theory - gam, theory],
    }
    checks = {f"slope within {theory:g} +- {SLOPE_TOL}": abs(slope - theory) <= SLOPE_TOL}
    stages = {"paths": sub.root.substream("paths").describe()}
    return Report("tightness", {"tightness": (header, rows)}, summary, checks, stages)


def limit_samples(config: ExperimentConfig, t: float, count: int, stage: str = "limit"):
    """Draws of sqrt(C) ||f|| W(L_t(0)) and the bandwidth used."""
    model = config.model
    chd = chd_closed_form(model).value
    f_norm = beta_norm_spectral(config.function, model.beta).value
    root = config.root.substream(stage)
    if config.bandwidth == "auto":
        grid = TimeGrid(t / config.limit_steps, config.limit_steps)
        sampler = FbmSampler(model, grid)
        pilot_root = config.root.substream("bandwidth")
        pilots = [sampler.sample(pilot_root.substream(i)) for i in range(BANDWIDTH_PILOT_PATHS)]
        choice = calibrate_bandwidth(pilots, t)
        eps = choice.epsilon
    else:
        eps = float(config.bandwidth)
    work = lambda r: simulate_limit_variable(model, f_norm, chd, t, root.substream(r),
                                             config.limit_steps, eps)
    return map_replicas(work, count, config.threads), eps


def run_distribution_test(config: ExperimentConfig) -> Report:
    """Two-sample KS between F_n(t) at the largest n and limit-variable draws."""
    _require_clt(config)
    if config.replicas < 2000:
        raise ConfigError("distribution test needs replicas >= 2000")
    model = config.model
    t = config.t_points[0]
    n = config.n_schedule[-1]
    sub = config.replace(n_schedule=(n,))
    fn = functional_table(sub, config.function, [t], (model.hd - 1.0) / 2.0)[:, 0, 0]
    lim, eps = limit_samples(config, t, config.replicas)
    ks = ks_two_sample(fn, lim)
    pts = np.union1d(fn, lim)
    rows = [[float(x), float(a), float(b)] for x, a, b in zip(pts, ecdf(fn, pts), ecdf(lim, pts))]
    summary = {
        "n": n,
        "t": t,
        "statistic": ks.statistic,
        "pvalue": ks.pvalue,
        "n_functional": ks.n1,
        "n_limit": ks.n2,
        "bandwidth": eps,
    }
    checks = {f"KS p-value > {KS_P_MIN}": ks.pvalue > KS_P_MIN}
    stages = {
        "paths": sub.root.substream("paths").describe(),
        "limit": config.root.substream("limit").describe(),
        "bandwidth": config.root.substream("bandwidth").describe(),
    }
    return Report("ks", {"ks": (["x", "ecdf_functional", "ecdf_limit"], rows)}, summary, checks, stages)


def run_simulate(config: ExperimentConfig) -> Report:
    """Sample ``paths`` fBm paths on the grid (dt, n_steps)."""
    grid = TimeGrid(config.dt, config.n_steps)
    sampler = FbmSampler(config.model, grid)
    root = config.root.substream("simulate")
    tables = {}
    header = ["t"] + [f"coord_{i + 1}" for i in range(config.dim)]
    for r in range(config.paths):
        path = sampler.sample(root.substream(r))
        buf = io.StringIO()
        write_path_csv(path, buf)
        tables[f"path_{r:04d}"] = buf.getvalue()
    summary = {"paths": config.paths, "n_steps": grid.n_steps, "dt": grid.dt, "method": sampler.method,
               "columns": header}
    return Report("simulate", tables, summary, {}, {"simulate": root.describe()})


RUNNERS = {
    "clt-moments": run_clt_moments,
    "lln": run_lln,
    "tightness": run_tightness_scan,
    "ks": run_distribution_test,
    "simulate": run_simulate,
}


# ---- output ------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def emit_report(report: Report, config: ExperimentConfig, out_dir) -> dict:
    """Write every table as ``<name>.csv`` plus ``manifest.json``; return the manifest."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out_dir}: {exc}") from None
    checksums = {}
    for name, table in report.tables.items():
        text = table if isinstance(table, str) else render_csv(*table)
        data = text.encode("utf-8")
        fname = f"{name}.csv"
        try:
            with open(os.path.join(out_dir, fname), "wb") as fh:
                fh.write(data)
        except OSError as exc:
            raise ConfigError(f"cannot write {fname}: {exc}") from None
        checksums[fname] = hashlib.sha256(data).hexdigest()
    manifest = {
        "kind": report.kind,
        "config": config.to_dict(),
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "stages": report.stages,
        "checksums": checksums,
        "summary": report.summary,
        "checks": report.checks,
    }
    manifest = _jsonable(manifest)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
