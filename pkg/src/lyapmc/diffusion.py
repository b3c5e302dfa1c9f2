"""Discretized Brownian paths killed at rate eta + V.

Paths follow x_{j+1} = x_j + drift dt + sqrt(dt) xi_j and stop on the first grid
time their position lies in the closed unit ball around the target.  The
Feynman-Kac integral uses the left-endpoint rule and a nonzero drift is undone
by the exact Girsanov weight exp(-drift . x_J + |drift|^2 J dt / 2).

Each path draws its normals from its own counter-based stream addressed by
(seed, stream, path index), so batches may be split across threads freely.
"""
import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import rng
from .errors import ConfigError
from .potential import local_points, sum_w, w_row

PATH_STREAM = 2
CHUNK = 256
MODE_FK = 0
MODE_SAUSAGE_EXACT = 1
MODE_SAUSAGE_GRID = 2
# dense sausage grids beyond this many cells are refused
MAX_GRID_CELLS = 50_000_000

_NO_ENV = (False, np.uint64(0), np.uint64(0), 0.0, 1.0)


@njit(cache=True, nogil=True, inline="always")
def _refresh_local(x, dim, env, radius, anchor, pts):
    """Points within radius + cell_size of an anchor, re-anchored once x strays a cell_size away.

    Every point within ``radius`` of x is then in the list.
    """
    env_on, ek0, ek1, intensity, cell_size = env
    d2 = 0.0
    for i in range(dim):
        d2 += (x[i] - anchor[i]) ** 2
    if d2 > cell_size * cell_size:
        for i in range(dim):
            anchor[i] = x[i]
        pts = local_points(ek0, ek1, anchor, dim, intensity, cell_size, radius + cell_size)
    return pts


@njit(cache=True, nogil=True)
def _walk(path, pk0, pk1, dim, dt, n_max, drift, y, eta, env, sv, pos_buf, v_buf, record):
    x = np.zeros(3)
    anchor = np.full(3, np.inf)
    pts = np.zeros((0, 3))
    sq = math.sqrt(dt)
    integral = 0.0
    steps = 0
    call = 0
    spare = 0.0
    have = False
    d2 = 0.0
    for i in range(dim):
        d2 += (x[i] - y[i]) ** 2
    hit = d2 <= 1.0
    env_on, ek0, ek1, intensity, cell_size = env
    radius = math.sqrt(sv[1])
    v = 0.0
    while not hit and steps < n_max:
        if env_on:
            # the staleness test is spelled out here; see _refresh_local
            d2 = 0.0
            for i in range(dim):
                d2 += (x[i] - anchor[i]) ** 2
            if d2 > cell_size * cell_size:
                for i in range(dim):
                    anchor[i] = x[i]
                pts = local_points(ek0, ek1, anchor, dim, intensity, cell_size, radius + cell_size)
            v = sum_w(sv, dim, x, pts)
        if record:
            for i in range(dim):
                pos_buf[steps, i] = x[i]
            v_buf[steps] = v
        integral += (eta + v) * dt
        d2 = 0.0
        for i in range(dim):
            if have:
                z = spare
                have = False
            else:
                z, spare = rng.normal_pair(call, path, pk0, pk1)
                call += 1
                have = True
            x[i] += drift[i] * dt + sq * z
            d2 += (x[i] - y[i]) ** 2
        steps += 1
        hit = d2 <= 1.0
    if record:
        for i in range(dim):
            pos_buf[steps, i] = x[i]
        if env_on:
            pts = _refresh_local(x, dim, env, radius, anchor, pts)
            v_buf[steps] = sum_w(sv, dim, x, pts)
    dd = 0.0
    dx = 0.0
    for i in range(dim):
        dd += drift[i] * drift[i]
        dx += drift[i] * x[i]
    log_lr = -dx + 0.5 * dd * steps * dt
    return hit, steps, integral, log_lr


@njit(cache=True, nogil=True)
def _sausage_exact_1d(pos, n, dt, pieces):
    """Exact S for a 1-d path held piecewise constant: sweep over the breakpoints of the occupation field."""
    npc = pieces.shape[0]
    m = 2 * n * npc
    if m == 0:
        return 0.0
    xs = np.empty(m)
    ds = np.empty(m)
    k = 0
    for j in range(n):
        for q in range(npc):
            xs[k] = pos[j, 0] - pieces[q, 1]
            ds[k] = pieces[q, 2] * dt
            k += 1
            xs[k] = pos[j, 0] - pieces[q, 0]
            ds[k] = -pieces[q, 2] * dt
            k += 1
    order = np.argsort(xs, kind="mergesort")
    f = 0.0
    s = 0.0
    for t in range(m - 1):
        f += ds[order[t]]
        gap = xs[order[t + 1]] - xs[order[t]]
        if gap > 0.0 and f > 0.0:
            s -= math.expm1(-f) * gap
    return s


@njit(cache=True, nogil=True)
def _sausage_grid(pos, n, dt, sv, dim, radius, h):
    """Midpoint-rule S on the grid of pitch h over the bounding box of the sausage."""
    if n == 0:
        return 0.0
    lo = np.zeros(3)
    cells = np.ones(3, np.int64)
    for i in range(dim):
        a = pos[0, i]
        b = pos[0, i]
        for j in range(n):
            a = min(a, pos[j, i])
            b = max(b, pos[j, i])
        lo[i] = a - radius - h
        cells[i] = np.int64(math.ceil((b - a + 2.0 * radius + 2.0 * h) / h))
    total = cells[0] * cells[1] * cells[2]
    if total > MAX_GRID_CELLS:
        return -1.0
    field_ = np.zeros(total)
    first = np.zeros(3, np.int64)
    last = np.zeros(3, np.int64)
    c = np.zeros((1, 3))
    x = np.zeros(3)
    for j in range(n):
        for i in range(dim):
            x[i] = pos[j, i]
            first[i] = max(0, np.int64(math.ceil((pos[j, i] - radius - lo[i]) / h - 0.5)))
            last[i] = min(cells[i] - 1, np.int64(math.floor((pos[j, i] + radius - lo[i]) / h - 0.5)))
        for a in range(first[0], last[0] + 1):
            c[0, 0] = lo[0] + (a + 0.5) * h
            for b in range(first[1], last[1] + 1):
                c[0, 1] = lo[1] + (b + 0.5) * h
                for e in range(first[2], last[2] + 1):
                    c[0, 2] = lo[2] + (e + 0.5) * h
                    w = w_row(sv, dim, x, c, 0)
                    if w > 0.0:
                        field_[(a * cells[1] + b) * cells[2] + e] += w * dt
    s = 0.0
    for q in range(total):
        if field_[q] > 0.0:
            s -= math.expm1(-field_[q])
    return s * h ** dim


@njit(cache=True, nogil=True)
def _batch(first, count, pk0, pk1, dim, dt, n_max, drift, y, eta, env, sv,
           mode, pieces, radius, h, out_hit, out_steps, out_int, out_lr, out_s):
    record = mode != MODE_FK
    rows = n_max + 1 if record else 1
    pos_buf = np.zeros((rows, 3))
    v_buf = np.zeros(rows)
    for i in range(count):
        hit, steps, integral, log_lr = _walk(first + i, pk0, pk1, dim, dt, n_max, drift, y, eta,
                                             env, sv, pos_buf, v_buf, record)
        out_hit[i] = hit
        out_steps[i] = steps
        out_int[i] = integral
        out_lr[i] = log_lr
        if not hit:
            out_s[i] = np.nan
        elif mode == MODE_SAUSAGE_EXACT:
            out_s[i] = _sausage_exact_1d(pos_buf, steps, dt, pieces)
        elif mode == MODE_SAUSAGE_GRID:
            out_s[i] = _sausage_grid(pos_buf, steps, dt, sv, dim, radius, h)
        else:
            out_s[i] = 0.0


@njit(cache=True, nogil=True)
def _segment_integral(positions, dt, eta, dim, env, sv):
    anchor = np.full(3, np.inf)
    radius = math.sqrt(sv[1])
    pts = np.zeros((0, 3))
    x = np.zeros(3)
    total = 0.0
    for j in range(positions.shape[0]):
        for i in range(dim):
            x[i] = positions[j, i]
        v = 0.0
        if env[0]:
            pts = _refresh_local(x, dim, env, radius, anchor, pts)
            v = sum_w(sv, dim, x, pts)
        total += (eta + v) * dt
    return total


# --------------------------------------------------------------------------
# python surface


@dataclass
class PathConfig:
    """Discretization and stream settings for path sampling.

    ``drift`` of None lets the estimators pick their default tilt; the path
    functions treat it as zero.
    """

    dim: int
    dt: float = 1e-3
    t_max: float = 100.0
    drift: tuple = None
    seed: int = 0
    h: float = 2.0 ** -7
    sausage_method: str = "auto"

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"unsupported dimension {self.dim}", key="dim")
        if not self.dt > 0:
            raise ConfigError("dt must be positive", key="dt")
        if not self.t_max > 0:
            raise ConfigError("t_max must be positive", key="t_max")
        if self.dt > self.t_max:
            raise ConfigError("dt exceeds t_max", key="dt")
        if not self.h > 0:
            raise ConfigError("quadrature pitch must be positive", key="h")
        if self.sausage_method not in ("auto", "exact", "grid"):
            raise ConfigError("sausage_method must be auto, exact or grid", key="sausage_method")
        if self.drift is not None:
            drift = tuple(float(v) for v in np.atleast_1d(self.drift))
            if len(drift) != self.dim or not all(math.isfinite(v) for v in drift):
                raise ConfigError(f"drift must be a finite vector of length {self.dim}", key="drift")
            self.drift = drift

    @property
    def n_max(self):
        return int(math.floor(self.t_max / self.dt + 1e-9))

    def drift_vector(self):
        v = np.zeros(3)
        if self.drift is not None:
            v[:self.dim] = self.drift
        return v

    def with_drift(self, drift):
        return PathConfig(self.dim, self.dt, self.t_max, drift, self.seed, self.h, self.sausage_method)

    def to_config(self):
        return {"dim": self.dim, "dt": self.dt, "t_max": self.t_max,
                "drift": None if self.drift is None else list(self.drift), "seed": self.seed,
                "h": self.h, "sausage_method": self.sausage_method}


@dataclass
class HittingResult:
    hit: bool
    H: float
    steps: int


@dataclass
class FKSample:
    hitting: HittingResult
    integral: float
    log_lr: float
    truncated: bool = False

    @property
    def weight(self):
        if not self.hitting.hit:
            return 0.0
        return math.exp(-self.integral + self.log_lr)


@dataclass
class PathBatch:
    """Per-path outcomes of a batch, indexed by path number."""

    dt: float
    hit: np.ndarray
    steps: np.ndarray
    integral: np.ndarray
    log_lr: np.ndarray
    sausage: np.ndarray = field(default=None)

    @property
    def H(self):
        return self.steps * self.dt

    @property
    def truncated(self):
        return ~self.hit

    def log_weights(self, intensity=None):
        """Log of the tilt-corrected Feynman-Kac weights; -inf for truncated paths.

        With ``intensity`` given, the environment is integrated out through the
        sausage functional: log w = -integral - intensity * S + log_lr.
        """
        lw = -self.integral + self.log_lr
        if intensity is not None:
            lw = lw - intensity * np.where(self.hit, self.sausage, 0.0)
        return np.where(self.hit, lw, -np.inf)


def _env_args(env):
    return _NO_ENV if env is None else env.kernel_args()


def _check_target(cfg, y):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (cfg.dim,):
        raise ConfigError(f"target must have {cfg.dim} coordinates", key="y")
    out = np.zeros(3)
    out[:cfg.dim] = y
    return out


def _check_env(cfg, env, shape):
    if shape is not None and shape.dim != cfg.dim:
        raise ConfigError("shape dimension differs from path dimension", key="dim")
    if env is not None:
        if env.dim != cfg.dim:
            raise ConfigError("environment dimension differs from path dimension", key="dim")
        if shape is None:
            raise ConfigError("an environment needs an obstacle shape", key="shape")
        if env.cell_size < shape.support_radius:
            raise ConfigError("cell_size must be at least the shape's support radius", key="cell_size")


def _dummy_shape_args(dim):
    # a radial shape of zero amplitude
    return np.array([0.0, 1.0, 1.0, 0.0])


def path_key(cfg, stream=0):
    return rng.derive_key(cfg.seed, PATH_STREAM, stream)


def simulate_until_hit(cfg, env, shape, eta, y, path_index=0, stream=0, trace=None):
    """One path from the origin until it enters the closed unit ball around ``y``.

    ``trace`` names an optional CSV file receiving step, t, x1..xd, V and the
    running integral.
    """
    _check_env(cfg, env, shape)
    yy = _check_target(cfg, y)
    k0, k1 = path_key(cfg, stream)
    record = trace is not None
    rows = cfg.n_max + 1 if record else 1
    pos = np.zeros((rows, 3))
    vals = np.zeros(rows)
    shp = shape.kernel_args() if shape is not None else _dummy_shape_args(cfg.dim)
    hit, steps, integral, log_lr = _walk(path_index, k0, k1, cfg.dim, cfg.dt, cfg.n_max, cfg.drift_vector(),
                                         yy, float(eta), _env_args(env), shp, pos, vals, record)
    if record:
        _write_trace(trace, cfg, eta, pos, vals, steps)
    hitting = HittingResult(hit=bool(hit), H=steps * cfg.dt, steps=int(steps))
    return FKSample(hitting=hitting, integral=float(integral), log_lr=float(log_lr), truncated=not hit)


def _write_trace(path, cfg, eta, pos, vals, steps):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "t"] + [f"x{i + 1}" for i in range(cfg.dim)] + ["V", "integral"])
        running = 0.0
        for j in range(steps + 1):
            writer.writerow([j, repr(j * cfg.dt)] + [repr(float(v)) for v in pos[j, :cfg.dim]]
                            + [repr(float(vals[j])), repr(float(running))])
            running += (eta + float(vals[j])) * cfg.dt


def _sausage_mode(cfg):
    method = cfg.sausage_method
    if method == "auto":
        method = "exact" if cfg.dim == 1 else "grid"
    if method == "exact" and cfg.dim != 1:
        raise ConfigError("the exact sausage sweep is one-dimensional", key="sausage_method")
    return MODE_SAUSAGE_EXACT if method == "exact" else MODE_SAUSAGE_GRID


def simulate_paths(cfg, env, shape, eta, y, n_paths, sausage=False, stream=0, workers=1, first=0):
    """Simulate paths ``first .. first + n_paths - 1`` of ``stream``.

    With ``sausage`` the environment must be None and each hitting path also
    gets its sausage functional S.  Output is identical for any ``workers``.
    """
    if n_paths < 1:
        raise ConfigError("n_paths must be positive", key="n_paths")
    if sausage and env is not None:
        raise ConfigError("the sausage functional integrates the environment out; pass env=None", key="env")
    if sausage and shape is None:
        raise ConfigError("the sausage functional needs an obstacle shape", key="shape")
    _check_env(cfg, env, shape)
    yy = _check_target(cfg, y)
    k0, k1 = path_key(cfg, stream)
    shp = shape.kernel_args() if shape is not None else _dummy_shape_args(cfg.dim)
    mode = _sausage_mode(cfg) if sausage else MODE_FK
    pieces = np.array(shape.pieces_1d() if (shape is not None and cfg.dim == 1) else np.zeros((0, 3)),
                      dtype=float).reshape(-1, 3)
    radius = shape.support_radius if shape is not None else 0.0
    env_args = _env_args(env)
    drift = cfg.drift_vector()
    hit = np.zeros(n_paths, np.bool_)
    steps = np.zeros(n_paths, np.int64)
    integral = np.zeros(n_paths)
    log_lr = np.zeros(n_paths)
    s = np.zeros(n_paths)

    def work(lo):
        hi = min(lo + CHUNK, n_paths)
        _batch(first + lo, hi - lo, k0, k1, cfg.dim, cfg.dt, cfg.n_max, drift, yy, float(eta), env_args, shp,
               mode, pieces, radius, cfg.h, hit[lo:hi], steps[lo:hi], integral[lo:hi], log_lr[lo:hi], s[lo:hi])

    starts = range(0, n_paths, CHUNK)
    if workers <= 1:
        for lo in starts:
            work(lo)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, starts))
    if sausage and np.any(s[hit] < 0):
        raise ConfigError("sausage quadrature grid too large; increase h", key="h")
    return PathBatch(dt=cfg.dt, hit=hit, steps=steps, integral=integral, log_lr=log_lr,
                     sausage=s if sausage else None)


def integrate_potential_segment(env, shape, eta, positions, dt):
    """Left-endpoint sum of (eta + V(x_j)) dt over ``positions`` (shape (n, dim))."""
    positions = np.asarray(positions, dtype=float)
    if positions.ndim == 1:
        positions = positions.reshape(-1, 1 if env is None else env.dim)
    if positions.shape[0] == 0:
        raise ValueError("positions must be nonempty")
    dim = positions.shape[1]
    if env is not None:
        _check_env(PathConfig(dim), env, shape)
    shp = shape.kernel_args() if shape is not None else _dummy_shape_args(dim)
    return _segment_integral(np.ascontiguousarray(positions), float(dt), float(eta), dim, _env_args(env), shp)


def sausage_of_path(positions, dt, shape, method="auto", h=2.0 ** -7):
    """S = int (1 - exp(-sum_j W(x_j - x) dt)) dx for a path held at ``positions`` for dt each."""
    positions = np.asarray(positions, dtype=float).reshape(-1, shape.dim)
    n = positions.shape[0]
    pos = np.zeros((n + 1, 3))
    pos[:n, :shape.dim] = positions
    if method == "auto":
        method = "exact" if shape.dim == 1 else "grid"
    if method == "exact":
        if shape.dim != 1:
            raise ConfigError("the exact sausage sweep is one-dimensional", key="sausage_method")
        return _sausage_exact_1d(pos, n, dt, np.array(shape.pieces_1d(), dtype=float).reshape(-1, 3))
    s = _sausage_grid(pos, n, dt, shape.kernel_args(), shape.dim, shape.support_radius, h)
    if s < 0:
        raise ConfigError("sausage quadrature grid too large; increase h", key="h")
    return s


def sausage_functional(cfg, shape, y, path_index=0, stream=0):
    """(T_hit, S) for one path without environment; S is nan when the path is truncated."""
    batch = simulate_paths(cfg, None, shape, 0.0, y, 1, sausage=True, stream=stream, first=path_index)
    return float(batch.H[0]), float(batch.sausage[0])
