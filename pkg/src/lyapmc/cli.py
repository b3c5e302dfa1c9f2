"""Configuration-driven experiment runner.

``lyapmc run --config run.yaml --out dir`` writes ``results.csv``, a
``manifest.json`` that replays the run byte for byte, experiment-specific
plot-data tables, PNG figures under ``figures/`` and optional path traces
under ``trace/``.  ``validate`` lists problems in a run config without running it;
``bounds`` and ``green-table`` are shortcuts for the two deterministic
experiments.
"""
import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from . import __version__
from .diffusion import PathConfig, simulate_until_hit
from .errors import ConfigError, DegenerateEstimateError, QuadratureError
from .estimators import (Estimate, a_from_e, bound_sznitman, bound_theorem4, calibrate_slack, default_drift,
                         estimate_annealed_beta_sausage, estimate_e, estimate_exponents, fingerprint,
                         richardson_sqrt_dt, scaling_experiment, scaling_from_config, SAUSAGE_STREAM,
                         environment_seed, gaps_nonincreasing)
from .potential import make_environment, mean_potential, shape_from_config
from .reference import SUPPORTED_DIMS, alpha_const, green_table, hitting_laplace_1d

EXPERIMENTS = ("e-estimate", "quenched", "annealed-direct", "annealed-sausage", "scaling", "bounds", "green-table")
COLUMNS = ("n", "n_dist", "estimator", "mean", "stderr", "samples", "truncated_fraction", "target",
           "bound_t4", "bound_sznitman")
BUDGET_DEFAULTS = {"n_envs": 100, "n_paths": 1000, "dt": 1e-2, "t_max": 100.0, "h": 2.0 ** -7,
                   "sausage_method": "auto"}
GREEN_DEFAULTS = {"dim": 1, "l_min": 0.5, "l_max": 64.0, "points": 25}
MANIFEST_VERSION = 1
MAX_SEED = 2 ** 64 - 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_IO = 4


@dataclass
class RunSpec:
    """Everything a run needs.  ``to_config`` echoes it into the manifest.

    ``budget`` holds n_envs, n_paths, dt, t_max, h and sausage_method; scaling
    runs may override it per n through ``budgets``, a list of dicts with key n.
    """

    experiment: str
    seed: int = 0
    shape: dict = None
    intensity: float = 0.0
    eta: float = 0.0
    direction: list = None
    n_dist: float = None
    target: list = None
    drift: list = None
    budget: dict = field(default_factory=dict)
    schedule: dict = None
    budgets: list = None
    quenched: bool = True
    refine_ratio: float = None
    calibrate_paths: int = 0
    green: dict = None
    trace: int = 0

    @classmethod
    def from_mapping(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping")
        if "manifest_version" in data:
            data = data.get("config")
            if not isinstance(data, dict):
                raise ConfigError("manifest has no config section", key="config")
        known = set(cls.__dataclass_fields__)
        for key in data:
            if key not in known:
                raise ConfigError("unknown key", key=key)
        if "experiment" not in data:
            raise ConfigError("missing required key", key="experiment")
        spec = cls(**data)
        spec.budget = {**BUDGET_DEFAULTS, **(spec.budget or {})}
        for key in spec.budget:
            if key not in BUDGET_DEFAULTS:
                raise ConfigError("unknown key", key=f"budget.{key}")
        if spec.green is not None:
            spec.green = {**GREEN_DEFAULTS, **spec.green}
        return spec

    def to_config(self):
        return asdict(self)

    def with_seed(self, seed):
        data = self.to_config()
        data["seed"] = seed
        return RunSpec.from_mapping(data)

    # ---- derived objects -------------------------------------------------

    def make_shape(self):
        if self.shape is None:
            raise ConfigError("missing required key", key="shape")
        return shape_from_config(self.shape)

    @property
    def dim(self):
        if self.shape is not None:
            return int(self.shape.get("dim", 0))
        return int((self.green or GREEN_DEFAULTS)["dim"])

    def path_config(self, budget=None, seed=None):
        b = self.budget if budget is None else budget
        return PathConfig(self.dim, dt=float(b["dt"]), t_max=float(b["t_max"]), drift=self.drift,
                          seed=self.seed if seed is None else seed, h=float(b["h"]),
                          sausage_method=b["sausage_method"])

    def budget_for(self, n):
        out = dict(self.budget)
        for entry in self.budgets or []:
            if int(entry.get("n", -1)) == n:
                out.update({k: v for k, v in entry.items() if k != "n"})
        return out

    def scaling(self):
        if self.schedule is None:
            raise ConfigError("missing required key", key="schedule")
        return scaling_from_config(self.schedule, self.make_shape())


def load_spec(path):
    """Read a YAML (or JSON, including a saved manifest) run spec."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", key="config") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}", key="config") from None
    return RunSpec.from_mapping(data)


# --------------------------------------------------------------------------
# validation


def _positive(value, key, out, integer=False):
    try:
        ok = value is not None and float(value) > 0 and math.isfinite(float(value))
        if integer and ok:
            ok = float(value) == int(value)
    except (TypeError, ValueError):
        ok = False
    if not ok:
        out.append(f"{key}: must be a positive {'integer' if integer else 'number'}")


def _check_budget(b, key, out, experiment):
    for name in ("dt", "t_max", "h"):
        _positive(b.get(name), f"{key}.{name}", out)
    for name in ("n_paths", "n_envs"):
        _positive(b.get(name), f"{key}.{name}", out, integer=True)
    try:
        if float(b["dt"]) > float(b["t_max"]):
            out.append(f"{key}.dt: exceeds {key}.t_max")
    except (TypeError, ValueError, KeyError):
        pass
    if b.get("sausage_method") not in ("auto", "exact", "grid"):
        out.append(f"{key}.sausage_method: must be auto, exact or grid")
    if experiment in ("e-estimate", "annealed-sausage", "scaling") and b.get("n_paths", 0) < 2:
        out.append(f"{key}.n_paths: at least 2 paths are needed for a standard error")


def _listed_ns(schedule):
    try:
        return tuple(int(n) for n in schedule["ns"])
    except (KeyError, TypeError, ValueError):
        return ()


def validate(spec):
    """Problems that would stop ``spec`` from running; empty when it is runnable."""
    out = []
    if spec.experiment not in EXPERIMENTS:
        return [f"experiment: unknown kind {spec.experiment!r}; expected one of {', '.join(EXPERIMENTS)}"]
    if not isinstance(spec.seed, int) or isinstance(spec.seed, bool) or not 0 <= spec.seed <= MAX_SEED:
        out.append("seed: must be an integer in [0, 2^64)")
    if spec.experiment == "green-table":
        g = spec.green or GREEN_DEFAULTS
        if g.get("dim") not in SUPPORTED_DIMS:
            out.append(f"green.dim: must be one of {SUPPORTED_DIMS}")
        _positive(spec.eta, "eta", out)
        _positive(g.get("l_min"), "green.l_min", out)
        _positive(g.get("points"), "green.points", out, integer=True)
        try:
            if float(g["l_max"]) <= float(g["l_min"]):
                out.append("green.l_max: must exceed green.l_min")
        except (TypeError, ValueError, KeyError):
            out.append("green.l_max: must be a number")
        return out
    shape = None
    try:
        shape = spec.make_shape()
    except ConfigError as exc:
        out.append(str(exc) if exc.key is None or str(exc).startswith("shape") else f"shape.{exc}")
    except (TypeError, ValueError) as exc:
        out.append(f"shape: {exc}")
    if not (isinstance(spec.intensity, (int, float)) and spec.intensity >= 0 and math.isfinite(spec.intensity)):
        out.append("intensity: must be a finite nonnegative number")
    if not (isinstance(spec.eta, (int, float)) and spec.eta >= 0 and math.isfinite(spec.eta)):
        out.append("eta: must be a finite nonnegative number")
    if spec.experiment == "bounds" or shape is None:
        return out
    d = shape.dim
    if spec.drift is not None:
        v = np.atleast_1d(np.asarray(spec.drift, dtype=float))
        if v.shape != (d,) or not np.all(np.isfinite(v)):
            out.append(f"drift: must be a finite vector of length {d}")
    if spec.experiment == "e-estimate":
        y = np.atleast_1d(np.asarray(spec.target if spec.target is not None else [], dtype=float))
        if y.shape != (d,):
            out.append(f"target: must have {d} coordinates")
        if spec.refine_ratio is not None and not (isinstance(spec.refine_ratio, (int, float))
                                                  and spec.refine_ratio > 1):
            out.append("refine_ratio: must exceed 1")
    else:
        u = np.atleast_1d(np.asarray(spec.direction if spec.direction is not None else [], dtype=float))
        if u.shape != (d,):
            out.append(f"direction: must have {d} coordinates")
        elif abs(np.linalg.norm(u) - 1.0) > 1e-9:
            out.append("direction: must be a unit vector")
        if spec.n_dist is None or not isinstance(spec.n_dist, (int, float)) or spec.n_dist <= 1:
            out.append("n_dist: must exceed 1")
    if spec.experiment == "scaling":
        try:
            seq = spec.scaling()
        except ConfigError as exc:
            msg = str(exc)
            out.extend(m if m.startswith("schedule") else f"schedule: {m}" for m in msg.split("; "))
            seq = None
        except (KeyError, TypeError) as exc:
            out.append(f"schedule: malformed ({exc})")
            seq = None
        ns = seq.ns if seq is not None else _listed_ns(spec.schedule)
        for n in ns:
            _check_budget(spec.budget_for(n), f"budgets[n={n}]", out, spec.experiment)
    else:
        _check_budget(spec.budget, "budget", out, spec.experiment)
    if not isinstance(spec.trace, int) or spec.trace < 0:
        out.append("trace: must be a nonnegative integer")
    return out


# --------------------------------------------------------------------------
# execution


@dataclass
class Report:
    rows: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    figures: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    fingerprints: list = field(default_factory=list)


def _row(estimator, est=None, n=None, n_dist=None, target=None, t4=None, sz=None, mean=None):
    row = {"n": n, "n_dist": n_dist, "estimator": estimator, "mean": mean, "stderr": None, "samples": None,
           "truncated_fraction": None, "target": target, "bound_t4": t4, "bound_sznitman": sz}
    if est is not None:
        row.update(mean=est.mean, stderr=est.stderr, samples=est.n, truncated_fraction=est.truncated_fraction)
    return row


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def _bounds(shape, spec):
    return bound_theorem4(shape, spec.intensity, spec.eta), bound_sznitman(shape, spec.intensity, spec.eta)


def _run_bounds(spec, report):
    shape = spec.make_shape()
    t4, sz = _bounds(shape, spec)
    report.rows.append(_row("mean_potential", mean=mean_potential(shape, spec.intensity)))
    report.rows.append(_row("bounds", t4=t4, sz=sz))
    report.figures.append(("bounds.png", "bounds", ([f"d={shape.dim}"], [t4], [sz])))


def _run_green(spec, report):
    g = spec.green or GREEN_DEFAULTS
    table = green_table(float(spec.eta), int(g["dim"]), float(g["l_min"]), float(g["l_max"]), int(g["points"]))
    report.tables["green_table.csv"] = (("l", "g", "ratio", "neg_log_g_over_l"), table)
    report.rows.append(_row("green_decay", n_dist=table[-1][0], mean=table[-1][3],
                            target=math.sqrt(2.0 * spec.eta)))
    report.rows.append(_row("green_ratio", n_dist=table[-1][0], mean=table[-1][2]))
    report.figures.append(("green.png", "green", (table, float(spec.eta))))


def _exact_e(shape, spec, y):
    # closed form only without obstacles in one dimension
    if spec.intensity == 0 and len(y) == 1:
        return hitting_laplace_1d(spec.eta, max(abs(float(y[0])) - 1.0, 0.0))
    return None


def _traces(spec, env, shape, eta, y, cfg, report, stream=0):
    for i in range(spec.trace):
        report.traces.append((f"path_{i:05d}.csv", (cfg, env, shape, eta, y, i, stream)))


def _run_e(spec, report, workers):
    shape = spec.make_shape()
    y = np.asarray(spec.target, dtype=float)
    env = make_environment(shape.dim, spec.intensity, spec.seed, shape=shape) if spec.intensity > 0 else None
    cfg = spec.path_config()
    if cfg.drift is None:
        cfg = cfg.with_drift(default_drift(shape, spec.intensity, spec.eta, y))
    n_paths = int(spec.budget["n_paths"])
    t4, sz = _bounds(shape, spec)
    dist = float(np.linalg.norm(y))
    exact = _exact_e(shape, spec, y)
    est = estimate_e(env, shape, spec.eta, y, n_paths, cfg, workers=workers)
    report.rows.append(_row("e", est, n_dist=dist, target=exact, t4=t4, sz=sz))
    a = a_from_e(est)
    report.rows.append(_row("a", a, n_dist=dist, target=None if exact is None else -math.log(exact), t4=t4, sz=sz))
    report.fingerprints += [est.config_fingerprint]
    points = [(cfg.dt, est)]
    extrap = None
    if spec.refine_ratio is not None:
        coarse_cfg = PathConfig(cfg.dim, cfg.dt * spec.refine_ratio, cfg.t_max, cfg.drift, cfg.seed, cfg.h,
                                cfg.sausage_method)
        coarse = estimate_e(env, shape, spec.eta, y, n_paths, coarse_cfg, stream=1, workers=workers)
        extrap = richardson_sqrt_dt(coarse, est, spec.refine_ratio)
        report.rows.append(_row("e_coarse", coarse, n_dist=dist, target=exact, t4=t4, sz=sz))
        report.rows.append(_row("e_extrapolated", extrap, n_dist=dist, target=exact, t4=t4, sz=sz))
        report.fingerprints += [coarse.config_fingerprint, extrap.config_fingerprint]
        points.append((coarse_cfg.dt, coarse))
    report.figures.append(("refinement.png", "refinement", (points, extrap, exact)))
    _traces(spec, env, shape, spec.eta, y, cfg, report)


def _run_environments(spec, report, workers):
    shape = spec.make_shape()
    u = np.asarray(spec.direction, dtype=float)
    cfg = spec.path_config()
    b = spec.budget
    t4, sz = _bounds(shape, spec)
    sweeps = []
    alpha, beta = estimate_exponents(shape, spec.intensity, spec.eta, u, spec.n_dist, int(b["n_envs"]),
                                     int(b["n_paths"]), cfg, workers, sweep_out=sweeps)
    sweep = sweeps[0]
    exact = alpha_const(spec.eta, u) if spec.intensity == 0 else None
    if spec.experiment == "quenched":
        report.rows.append(_row("alpha_quenched", alpha, n_dist=spec.n_dist, target=exact, t4=t4, sz=sz))
        report.fingerprints.append(alpha.config_fingerprint)
    report.rows.append(_row("beta_direct", beta, n_dist=spec.n_dist, target=exact, t4=t4, sz=sz))
    report.fingerprints.append(beta.config_fingerprint)
    if spec.calibrate_paths:
        c = calibrate_slack(shape, spec.intensity, spec.eta, u, spec.n_dist, int(spec.calibrate_paths),
                            spec.path_config(), workers)
        report.rows.append(_row("slack_c", c, n_dist=spec.n_dist, t4=t4, sz=sz))
        report.fingerprints.append(c.config_fingerprint)
    env_rows = [(i, s, le, -le / spec.n_dist, tr) for i, (s, le, tr)
                in enumerate(zip(sweep.seeds, sweep.log_e, sweep.truncated))]
    report.tables["environments.csv"] = (("env", "env_seed", "log_e", "a_over_n", "truncated_fraction"), env_rows)
    report.figures.append(("environments.png", "environments", (sweep.a_over_n, alpha.mean, t4)))
    if spec.trace:
        tcfg = cfg if cfg.drift is not None else cfg.with_drift(
            default_drift(shape, spec.intensity, spec.eta, spec.n_dist * u))
        env = make_environment(shape.dim, spec.intensity, environment_seed(spec.seed, 0), shape=shape)
        _traces(spec, env, shape, spec.eta, spec.n_dist * u, tcfg, report)


def _run_sausage(spec, report, workers):
    shape = spec.make_shape()
    u = np.asarray(spec.direction, dtype=float)
    cfg = spec.path_config()
    t4, sz = _bounds(shape, spec)
    weights = []
    est = estimate_annealed_beta_sausage(shape, spec.intensity, spec.eta, u, spec.n_dist,
                                         int(spec.budget["n_paths"]), cfg, workers, log_weights_out=weights)
    exact = alpha_const(spec.eta, u) if spec.intensity == 0 else None
    report.rows.append(_row("beta_sausage", est, n_dist=spec.n_dist, target=exact, t4=t4, sz=sz))
    report.fingerprints.append(est.config_fingerprint)
    y = spec.n_dist * u
    tcfg = cfg if cfg.drift is not None else cfg.with_drift(default_drift(shape, spec.intensity, spec.eta, y))
    report.figures.append(("weights.png", "weights", (-weights[0] / spec.n_dist, "-ln(weight) / n_dist")))
    _traces(spec, None, shape, spec.eta, y, tcfg, report, stream=SAUSAGE_STREAM)


def _run_scaling(spec, report, workers):
    seq = spec.scaling()
    u = np.asarray(spec.direction, dtype=float)
    budgets = {}
    for n in seq.ns:
        b = spec.budget_for(n)
        budgets[n] = {"n_paths": int(b["n_paths"]), "dt": float(b["dt"]), "t_max": float(b["t_max"]),
                      "h": float(b["h"]), "n_envs": int(b["n_envs"]),
                      "n_env_paths": int(b.get("n_env_paths", b["n_paths"]))}
    rows = scaling_experiment(seq, u, spec.n_dist, budgets, seed=spec.seed, quenched=spec.quenched, workers=workers)
    for r in rows:
        shape = seq.shape(r.n)
        nu, eta = seq.intensity(r.n), seq.eta(r.n)
        t4 = bound_theorem4(shape, nu, eta) * math.sqrt(r.n)
        sz = bound_sznitman(shape, nu, eta) * math.sqrt(r.n)
        if r.alpha is not None:
            report.rows.append(_row("sqrt_n_alpha", r.sqrt_n_alpha, n=r.n, n_dist=r.n_dist, target=r.target,
                                    t4=t4, sz=sz))
            report.fingerprints.append(r.alpha.config_fingerprint)
        report.rows.append(_row("sqrt_n_beta", r.sqrt_n_beta, n=r.n, n_dist=r.n_dist, target=r.target, t4=t4, sz=sz))
        gap = Estimate(r.gap, r.sqrt_n_beta.stderr, r.beta.n, r.beta.truncated_fraction)
        report.rows.append(_row("gap", gap, n=r.n, n_dist=r.n_dist, target=0.0))
        report.fingerprints.append(r.beta.config_fingerprint)
    report.rows.append(_row("gap_nonincreasing", mean=1.0 if gaps_nonincreasing(rows) else 0.0))
    d_rows = [(n, seq.d_term(n), seq.target_d, seq.d_correction(n)) for n in seq.ns]
    report.tables["schedule.csv"] = (("n", "n_times_rate", "D", "closed_form_correction"), d_rows)
    report.figures.append(("scaling.png", "scaling", (rows, seq.target)))


RUNNERS = {
    "e-estimate": _run_e,
    "quenched": _run_environments,
    "annealed-direct": _run_environments,
    "annealed-sausage": _run_sausage,
    "scaling": _run_scaling,
}


def execute(spec, workers=1):
    """Run ``spec`` in memory; raises ConfigError on an invalid spec."""
    problems = validate(spec)
    if problems:
        raise ConfigError("; ".join(problems))
    report = Report()
    if spec.experiment == "bounds":
        _run_bounds(spec, report)
    elif spec.experiment == "green-table":
        _run_green(spec, report)
    else:
        RUNNERS[spec.experiment](spec, report, workers)
    return report


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _render(kind, path, args):
    from . import plotting

    {"scaling": plotting.scaling_figure, "green": plotting.green_figure,
     "environments": plotting.environment_figure, "weights": plotting.weight_figure,
     "refinement": plotting.refinement_figure, "bounds": plotting.bounds_figure}[kind](path, *args)


def write_report(spec, report, out, plots=True):
    """Write every artifact of ``report`` under ``out`` and return the list of relative paths."""
    os.makedirs(out, exist_ok=True)
    files = []
    _write_csv(os.path.join(out, "results.csv"), COLUMNS, [[r[c] for c in COLUMNS] for r in report.rows])
    files.append("results.csv")
    for name, (header, rows) in report.tables.items():
        _write_csv(os.path.join(out, name), header, rows)
        files.append(name)
    if report.traces:
        os.makedirs(os.path.join(out, "trace"), exist_ok=True)
        for name, (cfg, env, shape, eta, y, index, stream) in report.traces:
            simulate_until_hit(cfg, env, shape, eta, y, path_index=index, stream=stream,
                               trace=os.path.join(out, "trace", name))
            files.append(f"trace/{name}")
    if plots and report.figures:
        os.makedirs(os.path.join(out, "figures"), exist_ok=True)
        for name, kind, args in report.figures:
            _render(kind, os.path.join(out, "figures", name), args)
            files.append(f"figures/{name}")
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "package_version": __version__,
        "experiment": spec.experiment,
        "seed": spec.seed,
        "config": spec.to_config(),
        "config_fingerprint": fingerprint(spec.to_config()),
        "estimate_fingerprints": report.fingerprints,
        "plots": bool(plots),
        "files": {f: _sha256(os.path.join(out, f)) for f in files},
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return files + ["manifest.json"]


def run(spec, out, workers=1, plots=True):
    """Execute and write a run; returns the process exit status."""
    try:
        report = execute(spec, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateEstimateError, QuadratureError) as exc:
        print(f"estimator error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    try:
        write_report(spec, report, out, plots)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    with open(os.path.join(out, "results.csv")) as fh:
        sys.stdout.write(fh.read())
    return EXIT_OK


# --------------------------------------------------------------------------
# command line


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def _workers(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("workers must be positive")
    return v


def build_parser():
    parser = argparse.ArgumentParser(prog="lyapmc", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required):
        p.add_argument("--config", required=config_required, help="YAML or JSON run spec (a manifest also works)")
        p.add_argument("--seed", type=_seed, help="master seed, overriding the config")

    def output(p):
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--workers", type=_workers, default=1, help="worker threads (results do not depend on it)")
        p.add_argument("--no-plots", action="store_true", help="skip the PNG figures")

    p = sub.add_parser("run", help="run the experiment described by a config")
    common(p, True)
    output(p)
    p.add_argument("--trace", type=int, help="dump this many per-path traces under trace/")

    p = sub.add_parser("validate", help="list problems in a config without running it")
    common(p, True)

    p = sub.add_parser("bounds", help="evaluate both upper bounds for a shape")
    common(p, False)
    output(p)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--radius", type=float, default=0.5, help="ball-indicator radius when no config is given")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--intensity", type=float, default=0.5)
    p.add_argument("--eta", type=float, default=0.0)

    p = sub.add_parser("green-table", help="tabulate the constant-rate Green function")
    common(p, False)
    output(p)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--l-min", type=float, default=GREEN_DEFAULTS["l_min"])
    p.add_argument("--l-max", type=float, default=GREEN_DEFAULTS["l_max"])
    p.add_argument("--points", type=int, default=GREEN_DEFAULTS["points"])
    return parser


def _spec_from_args(args):
    if args.config:
        spec = load_spec(args.config)
        if args.command in ("bounds", "green-table") and spec.experiment != args.command:
            raise ConfigError(f"config describes a {spec.experiment!r} run", key="experiment")
    elif args.command == "bounds":
        spec = RunSpec.from_mapping({
            "experiment": "bounds", "intensity": args.intensity, "eta": args.eta,
            "shape": {"dim": args.dim, "kind": "ball-indicator", "radius": args.radius,
                      "amplitude": args.amplitude}})
    else:
        spec = RunSpec.from_mapping({
            "experiment": "green-table", "eta": args.eta,
            "green": {"dim": args.dim, "l_min": args.l_min, "l_max": args.l_max, "points": args.points}})
    if args.seed is not None:
        spec = spec.with_seed(args.seed)
    if getattr(args, "trace", None) is not None:
        spec.trace = args.trace
    return spec


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        spec = _spec_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TypeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        problems = validate(spec)
        for p in problems:
            print(p)
        if not problems:
            print("ok")
        return EXIT_OK if not problems else EXIT_CONFIG
    return run(spec, args.out, args.workers, plots=not args.no_plots)


if __name__ == "__main__":
    sys.exit(main())
