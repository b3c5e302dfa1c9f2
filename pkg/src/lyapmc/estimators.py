"""Monte Carlo estimators of survival, quenched and annealed exponents, and the upper bounds.

Survival weights are combined in log space, so targets far enough away that
e(ny) underflows a double are still handled.  Every estimate carries a
fingerprint of its inputs; equal fingerprints give bit-identical estimates.
"""
import hashlib
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .diffusion import PathConfig, simulate_paths
from .errors import ConfigError, DegenerateEstimateError
from .potential import make_environment, shape_from_config
from .reference import alpha_const, dirichlet_eigenvalue, unit_ball_volume

# spawn tags below a run's master seed
ENV_SEEDS = 11
SAUSAGE_STREAM = 1 << 20
# largest share of environments that may be dropped for an infinite a
MAX_EXCLUDED = 0.01
# relative stderr of e above which -ln e is noticeably biased
A_BIAS_WARN = 0.1


def fingerprint(obj):
    """First 16 hex digits of the sha256 of the canonical JSON encoding of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot encode {type(v).__name__}")


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo mean with its standard error.

    ``n`` counts the independent samples behind ``stderr`` (paths, or
    environments for the quenched exponent).  ``excluded`` counts samples
    dropped as degenerate.
    """

    mean: float
    stderr: float
    n: int
    truncated_fraction: float = 0.0
    config_fingerprint: str = ""
    excluded: int = 0

    def z_score(self, other):
        """(self - other) in units of the combined standard error."""
        se = math.hypot(self.stderr, other.stderr)
        diff = self.mean - other.mean
        if se == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / se

    def scaled(self, factor):
        return Estimate(self.mean * factor, self.stderr * abs(factor), self.n, self.truncated_fraction,
                        self.config_fingerprint, self.excluded)


def sample_estimate(values, truncated_fraction=0.0, fp="", excluded=0):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise DegenerateEstimateError("at least two samples are needed for a standard error")
    return Estimate(float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size)), int(values.size),
                    float(truncated_fraction), fp, int(excluded))


def log_mean_exp(lw):
    """(ln of the mean of exp(lw), standard error of that log) by the delta method.

    Returns (-inf, inf) when every weight is zero.
    """
    lw = np.asarray(lw, dtype=float)
    top = lw.max()
    if not np.isfinite(top):
        return -math.inf, math.inf
    w = np.exp(lw - top)
    m = w.mean()
    rel = w.std(ddof=1) / math.sqrt(w.size) / m
    return top + math.log(m), rel


# --------------------------------------------------------------------------
# bounds


def bound_theorem4(shape, intensity, eta):
    """Upper bound sqrt(2 (eta + nu |W|_1)) on the quenched exponent per unit length."""
    return math.sqrt(2.0 * (eta + intensity * shape.l1_norm))


def bound_sznitman(shape, intensity, eta, d=None):
    """The coarser bound sqrt(2 (eta + lambda_d + |W|_inf nu omega_d (a + 2)^d)), a the support radius."""
    d = shape.dim if d is None else d
    obstacle = shape.linf_norm * intensity * unit_ball_volume(d) * (shape.support_radius + 2.0) ** d
    return math.sqrt(2.0 * (eta + dirichlet_eigenvalue(d) + obstacle))


def default_drift(shape, intensity, eta, y):
    """The tilt mu * y/|y| with mu the first bound; zero if y is the origin."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    norm = float(np.linalg.norm(y))
    mu = bound_theorem4(shape, intensity, eta) if shape is not None else math.sqrt(2.0 * eta)
    if norm == 0 or mu == 0:
        return tuple(0.0 for _ in y)
    return tuple(float(v) for v in mu * y / norm)


def _tilted(cfg, shape, intensity, eta, y):
    if cfg.drift is not None:
        return cfg
    return cfg.with_drift(default_drift(shape, intensity, eta, y))


def _unit_direction(y_dir, dim):
    u = np.atleast_1d(np.asarray(y_dir, dtype=float))
    if u.shape != (dim,):
        raise ConfigError(f"direction must have {dim} coordinates", key="direction")
    if abs(np.linalg.norm(u) - 1.0) > 1e-9:
        raise ConfigError("direction must be a unit vector", key="direction")
    return u


def _check_distance(n_dist):
    if not n_dist > 1:
        raise ConfigError("n_dist must exceed 1 so that the target ball excludes the origin", key="n_dist")


def _common_fp(kind, shape, intensity, eta, y, cfg, **extra):
    return fingerprint({"kind": kind, "shape": None if shape is None else shape.to_config(),
                        "intensity": intensity, "eta": eta, "y": [float(v) for v in np.atleast_1d(y)],
                        "path": cfg.to_config(), **extra})


# --------------------------------------------------------------------------
# survival


def estimate_e(env, shape, eta, y, n_paths, cfg, stream=0, workers=1):
    """Mean tilt-corrected Feynman-Kac weight; truncated paths count as zero."""
    if n_paths < 2:
        raise ConfigError("n_paths must be at least 2", key="n_paths")
    intensity = 0.0 if env is None else env.intensity
    cfg = _tilted(cfg, shape, intensity, eta, y)
    batch = simulate_paths(cfg, env, shape, eta, y, n_paths, stream=stream, workers=workers)
    if not batch.hit.any():
        raise DegenerateEstimateError("every path reached t_max before hitting the target")
    fp = _common_fp("e", shape, intensity, eta, y, cfg, env=None if env is None else env.to_config(),
                    n_paths=n_paths, stream=stream)
    w = np.exp(batch.log_weights())
    return sample_estimate(w, 1.0 - batch.hit.mean(), fp)


def a_from_e(est):
    """-ln e with the delta-method stderr."""
    if est.mean <= 0:
        raise DegenerateEstimateError("survival estimate is zero, so a is infinite")
    rel = est.stderr / est.mean
    if rel > A_BIAS_WARN:
        warnings.warn(f"relative stderr {rel:.3f} of e makes -ln e noticeably biased", RuntimeWarning, stacklevel=2)
    return Estimate(-math.log(est.mean), rel, est.n, est.truncated_fraction, est.config_fingerprint, est.excluded)


def estimate_a(env, shape, eta, y, n_paths, cfg, stream=0, workers=1):
    """a = -ln e from :func:`estimate_e`."""
    return a_from_e(estimate_e(env, shape, eta, y, n_paths, cfg, stream=stream, workers=workers))


def richardson_sqrt_dt(coarse, fine, ratio=4.0):
    """Cancel a bias linear in sqrt(dt) from estimates at dt and dt / ratio.

    With r = sqrt(ratio) the combination is (r fine - coarse) / (r - 1).
    """
    r = math.sqrt(ratio)
    mean = (r * fine.mean - coarse.mean) / (r - 1.0)
    se = math.hypot(r * fine.stderr, coarse.stderr) / (r - 1.0)
    return Estimate(mean, se, min(coarse.n, fine.n), max(coarse.truncated_fraction, fine.truncated_fraction),
                    fingerprint([coarse.config_fingerprint, fine.config_fingerprint, ratio]))


# --------------------------------------------------------------------------
# exponents


@dataclass
class EnvironmentSweep:
    """Per-environment outcomes of a quenched run, in environment order."""

    seeds: list
    log_e: np.ndarray
    log_e_se: np.ndarray
    truncated: np.ndarray
    n_paths: int
    n_dist: float
    pooled_log_w: list = field(default=None, repr=False)

    @property
    def a_over_n(self):
        return -self.log_e / self.n_dist


def environment_seed(master_seed, index):
    return rng.derive_seed(master_seed, ENV_SEEDS, index)


def sweep_environments(shape, intensity, eta, y_dir, n_dist, n_envs, n_paths, cfg, workers=1, keep_weights=False):
    """Simulate ``n_paths`` tilted paths to n_dist * y_dir in each of ``n_envs`` environments.

    Environment i draws its points from seed environment_seed(cfg.seed, i) and its
    paths from stream i of cfg.seed.
    """
    _check_distance(n_dist)
    if n_envs < 1:
        raise ConfigError("n_envs must be positive", key="n_envs")
    if n_paths < 2:
        raise ConfigError("n_paths must be at least 2", key="n_paths")
    u = _unit_direction(y_dir, shape.dim)
    y = n_dist * u
    cfg = _tilted(cfg, shape, intensity, eta, y)
    seeds = [environment_seed(cfg.seed, i) for i in range(n_envs)]
    log_e = np.empty(n_envs)
    log_se = np.empty(n_envs)
    trunc = np.empty(n_envs)
    kept = [None] * n_envs

    def one(i):
        env = make_environment(shape.dim, intensity, seeds[i], shape=shape)
        batch = simulate_paths(cfg, env, shape, eta, y, n_paths, stream=i)
        lw = batch.log_weights()
        log_e[i], log_se[i] = log_mean_exp(lw)
        trunc[i] = 1.0 - batch.hit.mean()
        if keep_weights:
            kept[i] = lw

    if workers <= 1 or n_envs == 1:
        for i in range(n_envs):
            one(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, range(n_envs)))
    return EnvironmentSweep(seeds, log_e, log_se, trunc, n_paths, float(n_dist), kept if keep_weights else None), cfg


def _quenched_from_sweep(sweep, fp):
    finite = np.isfinite(sweep.log_e)
    excluded = int((~finite).sum())
    if excluded > MAX_EXCLUDED * sweep.log_e.size:
        raise DegenerateEstimateError(f"{excluded} of {sweep.log_e.size} environments gave zero survival; "
                                      f"more than {MAX_EXCLUDED:.0%} excluded")
    vals = sweep.a_over_n[finite]
    if vals.size < 2:
        raise DegenerateEstimateError("fewer than two usable environments")
    return sample_estimate(vals, float(sweep.truncated.mean()), fp, excluded)


def _annealed_from_sweep(sweep, fp):
    """-ln of the pooled mean weight over n_dist; stderr from the spread of per-environment means."""
    finite = np.isfinite(sweep.log_e)
    if not finite.any():
        raise DegenerateEstimateError("pooled survival is zero, so the annealed exponent is infinite")
    # environment means share one offset so that the pooled mean never underflows
    top = sweep.log_e[finite].max()
    means = np.where(finite, np.exp(sweep.log_e - top), 0.0)
    m = means.mean()
    n = means.size
    rel = means.std(ddof=1) / math.sqrt(n) / m if n > 1 else math.inf
    beta = -(top + math.log(m)) / sweep.n_dist
    return Estimate(float(beta), float(rel / sweep.n_dist), n * sweep.n_paths, float(sweep.truncated.mean()), fp)


def estimate_quenched_alpha(shape, intensity, eta, y_dir, n_dist, n_envs, n_paths, cfg, workers=1):
    """Mean over environments of a(n_dist y_dir) / n_dist; stderr from the spread across environments."""
    return estimate_exponents(shape, intensity, eta, y_dir, n_dist, n_envs, n_paths, cfg, workers)[0]


def estimate_annealed_beta_direct(shape, intensity, eta, y_dir, n_dist, n_envs, n_paths, cfg, workers=1):
    """-ln of the weight pooled over environments and paths, over n_dist."""
    return estimate_exponents(shape, intensity, eta, y_dir, n_dist, n_envs, n_paths, cfg, workers)[1]


def estimate_exponents(shape, intensity, eta, y_dir, n_dist, n_envs, n_paths, cfg, workers=1, sweep_out=None):
    """(quenched alpha, direct annealed beta) from one set of environment and path samples.

    ``sweep_out``, a list, receives the :class:`EnvironmentSweep` when given.
    """
    sweep, tcfg = sweep_environments(shape, intensity, eta, y_dir, n_dist, n_envs, n_paths, cfg, workers)
    if sweep_out is not None:
        sweep_out.append(sweep)
    base = dict(n_dist=n_dist, n_envs=n_envs, n_paths=n_paths)
    y = n_dist * np.asarray(y_dir, float)
    alpha = _quenched_from_sweep(sweep, _common_fp("alpha", shape, intensity, eta, y, tcfg, **base))
    beta = _annealed_from_sweep(sweep, _common_fp("beta-direct", shape, intensity, eta, y, tcfg, **base))
    return alpha, beta


def estimate_annealed_beta_sausage(shape, intensity, eta, y_dir, n_dist, n_paths, cfg, workers=1,
                                   log_weights_out=None):
    """-ln mean exp(-eta H - nu S) / n_dist with S the sausage functional of each path.

    The environment is integrated out exactly, so no environments are sampled.
    ``log_weights_out``, a list, receives the per-path log weights when given.
    """
    _check_distance(n_dist)
    if n_paths < 2:
        raise ConfigError("n_paths must be at least 2", key="n_paths")
    u = _unit_direction(y_dir, shape.dim)
    y = n_dist * u
    cfg = _tilted(cfg, shape, intensity, eta, y)
    batch = simulate_paths(cfg, None, shape, eta, y, n_paths, sausage=True, stream=SAUSAGE_STREAM, workers=workers)
    if not batch.hit.any():
        raise DegenerateEstimateError("every path reached t_max before hitting the target")
    lw = batch.log_weights(intensity)
    if log_weights_out is not None:
        log_weights_out.append(lw)
    log_m, rel = log_mean_exp(lw)
    if not math.isfinite(log_m):
        raise DegenerateEstimateError("mean weight is zero, so the annealed exponent is infinite")
    fp = _common_fp("beta-sausage", shape, intensity, eta, y, cfg, n_dist=n_dist, n_paths=n_paths)
    return Estimate(float(-log_m / n_dist), float(rel / n_dist), n_paths, float(1.0 - batch.hit.mean()), fp)


def calibrate_slack(shape, intensity, eta, y_dir, n_dist, n_paths, cfg, workers=1):
    """Finite-distance slack c with alpha(n) ~ alpha + c / n, measured without obstacles.

    Brownian motion killed at the constant rate eta + nu |W|_1 has the same limiting
    exponent as the first bound, so n_dist (a(n y)/n - sqrt(2 (eta + nu |W|_1))) is
    the additive finite-n offset of the unit-ball target.
    """
    _check_distance(n_dist)
    u = _unit_direction(y_dir, shape.dim)
    eta_c = eta + intensity * shape.l1_norm
    y = n_dist * u
    if cfg.drift is None:
        cfg = cfg.with_drift(default_drift(None, 0.0, eta_c, y))
    a = estimate_a(None, None, eta_c, y, n_paths, cfg, workers=workers)
    c = a.mean - n_dist * alpha_const(eta_c, u)
    return Estimate(c, a.stderr, a.n, a.truncated_fraction, a.config_fingerprint)


# --------------------------------------------------------------------------
# scaling sequences


@dataclass(frozen=True)
class PowerLaw:
    """n -> coef * n^(-power)."""

    coef: float
    power: float

    def __call__(self, n):
        return self.coef * float(n) ** (-self.power)

    def to_config(self):
        return {"coef": self.coef, "power": self.power}


@dataclass
class ScalingSequence:
    """W_n = amplitude(n) W, nu_n = intensity(n), eta_n = eta(n) for n in ``ns``.

    ``w_inf`` = sup_n |n W_n|_inf and ``xi`` = sup_n diam supp W_n are certified at
    construction; D = lim n (eta_n + nu_n |W_n|_1) follows from the power laws.
    """

    base: object
    ns: tuple
    amplitude: PowerLaw
    intensity: PowerLaw
    eta: PowerLaw = PowerLaw(0.0, 0.0)

    def __post_init__(self):
        self.ns = tuple(int(n) for n in self.ns)
        problems = self.violations()
        if problems:
            raise ConfigError("; ".join(problems), key="schedule")

    def violations(self):
        out = []
        if not self.ns or any(n < 1 for n in self.ns):
            out.append("ns must be a nonempty list of positive integers")
        if self.amplitude.coef <= 0:
            out.append("amplitude coefficient must be positive")
        if self.intensity.coef < 0 or self.eta.coef < 0:
            out.append("intensity and eta coefficients must be nonnegative")
        if not math.isfinite(self.w_inf):
            out.append("w_inf unbounded: |n W_n|_inf grows with n")
        if not math.isfinite(self.target_d):
            out.append("D infinite: n (eta_n + nu_n |W_n|_1) grows with n")
        return out

    @property
    def w_inf(self):
        """sup over all n >= 1 of n |W_n|_inf."""
        p = 1.0 - self.amplitude.power
        if p > 0:
            return math.inf
        return self.amplitude.coef * self.base.linf_norm

    @property
    def xi(self):
        return 2.0 * self.base.support_radius

    def _terms(self):
        # (coefficient, exponent of n) of n eta_n and n nu_n |W_n|_1
        return [(self.eta.coef, 1.0 - self.eta.power),
                (self.intensity.coef * self.amplitude.coef * self.base.l1_norm,
                 1.0 - self.intensity.power - self.amplitude.power)]

    @property
    def target_d(self):
        d = 0.0
        for c, e in self._terms():
            if c == 0 or e < 0:
                continue
            if e > 0:
                return math.inf
            d += c
        return d

    @property
    def target(self):
        """sqrt(2 D), the limit of sqrt(n) times either exponent per unit length."""
        return math.sqrt(2.0 * self.target_d)

    def d_term(self, n):
        """n (eta_n + nu_n |W_n|_1)."""
        return n * (self.eta(n) + self.intensity(n) * self.shape(n).l1_norm)

    def d_correction(self, n):
        """Closed form of d_term(n) - D: the terms that vanish as n grows."""
        return sum(c * float(n) ** e for c, e in self._terms() if c != 0 and e < 0)

    def shape(self, n):
        return self.base.scaled(self.amplitude(n))

    def to_config(self):
        return {"ns": list(self.ns), "amplitude": self.amplitude.to_config(),
                "intensity": self.intensity.to_config(), "eta": self.eta.to_config(),
                "base": self.base.to_config()}


def scaling_from_config(cfg, base=None):
    base = base if base is not None else shape_from_config(cfg["base"])
    return ScalingSequence(base, tuple(cfg["ns"]), PowerLaw(**cfg["amplitude"]), PowerLaw(**cfg["intensity"]),
                           PowerLaw(**cfg.get("eta", {"coef": 0.0, "power": 0.0})))


@dataclass
class ScalingRow:
    n: int
    n_dist: float
    alpha: Estimate
    beta: Estimate
    target: float

    @property
    def sqrt_n_alpha(self):
        return None if self.alpha is None else self.alpha.scaled(math.sqrt(self.n))

    @property
    def sqrt_n_beta(self):
        return self.beta.scaled(math.sqrt(self.n))

    @property
    def gap(self):
        return abs(self.sqrt_n_beta.mean - self.target)


def scaling_experiment(seq, y_dir, n_dist, budgets, seed=0, quenched=True, workers=1):
    """One row per n: sqrt(n) alpha_n (optional), sqrt(n) beta_n from the sausage estimator, and sqrt(2 D).

    ``budgets`` maps n to a dict with n_paths, dt, t_max and optionally h, n_envs
    and n_env_paths (paths per environment for the quenched estimate).
    """
    rows = []
    for n in seq.ns:
        b = budgets[n]
        shape = seq.shape(n)
        nu = seq.intensity(n)
        eta = seq.eta(n)
        cfg = PathConfig(shape.dim, dt=b["dt"], t_max=b["t_max"], seed=rng.derive_seed(seed, n),
                         h=b.get("h", 2.0 ** -7))
        beta = estimate_annealed_beta_sausage(shape, nu, eta, y_dir, n_dist, b["n_paths"], cfg, workers)
        alpha = None
        if quenched:
            alpha, _ = estimate_exponents(shape, nu, eta, y_dir, n_dist, b["n_envs"], b["n_env_paths"], cfg, workers)
        rows.append(ScalingRow(n, float(n_dist), alpha, beta, seq.target))
    return rows


def gaps_nonincreasing(rows, k=2.0):
    """True if |sqrt(n) beta_n - target| never increases by more than k standard errors along ``rows``."""
    for a, b in zip(rows, rows[1:]):
        se = math.hypot(a.sqrt_n_beta.stderr, b.sqrt_n_beta.stderr)
        if b.gap - a.gap > k * se:
            return False
    return True
