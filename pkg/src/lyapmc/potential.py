"""Obstacle shapes and Poissonian potentials V(x) = sum_p W(x - p).

The Poisson cloud is never stored as a whole.  Space is cut into cubic cells and
the points of a cell are regenerated on demand from the counter-based stream
keyed by (environment seed, cell coordinate), so a cell looks the same no matter
who asks for it or when.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import rng
from .errors import ConfigError, DiscretizationSizeError, ShapeError
from .reference import SUPPORTED_DIMS, unit_ball_volume

KINDS = ("ball-indicator", "radial-step", "grid-table")
RADIAL = 0
GRID = 1

# spawn tag of the environment stream inside a master seed
ENV_STREAM = 1
# Poisson draws are split into pieces of at most this mean
_POISSON_PIECE = 64.0


# --------------------------------------------------------------------------
# numba kernels


# A shape reaches the kernels as one flat float64 vector ``sv``:
#   radial: [RADIAL, R^2, n, r_1 .. r_n, a_1 .. a_n]
#   grid:   [GRID, R^2, pitch, origin(3), extent(3), table ...]
# with R the support radius.  Hot loops test |x - p|^2 <= R^2 themselves and
# only then call w_near; passing arrays into a call costs refcount traffic.
_RADIAL_HEADER = 3
_GRID_HEADER = 9


@njit(cache=True, nogil=True)
def w_near(sv, dim, u0, u1, u2, r2):
    """W(u) for u = (u0, u1, u2) with r2 = |u|^2 already known."""
    if sv[0] == RADIAL:
        n = int(sv[2])
        r = math.sqrt(r2)
        for i in range(n):
            if r <= sv[_RADIAL_HEADER + i]:
                return sv[_RADIAL_HEADER + n + i]
        return 0.0
    pitch = sv[2]
    flat = 0
    for i in range(dim):
        u = u0 if i == 0 else (u1 if i == 1 else u2)
        m = math.floor((u - sv[3 + i]) / pitch)
        ext = int(sv[6 + i])
        if m < 0 or m >= ext:
            return 0.0
        flat = flat * ext + int(m)
    return sv[_GRID_HEADER + flat]


@njit(cache=True, nogil=True, inline="always")
def w_row(sv, dim, x, pts, j):
    """W(x - pts[j]); rows are indexed in place because slicing allocates.

    ``x`` and the rows of ``pts`` have length 3 with zeros past ``dim``.
    """
    u0 = x[0] - pts[j, 0]
    u1 = x[1] - pts[j, 1]
    u2 = x[2] - pts[j, 2]
    r2 = u0 * u0 + u1 * u1 + u2 * u2
    if r2 > sv[1]:
        return 0.0
    return w_near(sv, dim, u0, u1, u2, r2)


@njit(cache=True, nogil=True)
def w_values(sv, dim, u):
    """W at each row of the (n, dim) array ``u``."""
    out = np.empty(u.shape[0])
    zero = np.zeros((1, 3))
    x = np.zeros(3)
    for i in range(u.shape[0]):
        for q in range(dim):
            x[q] = u[i, q]
        out[i] = w_row(sv, dim, x, zero, 0)
    return out


@njit(cache=True, nogil=True)
def sum_w(sv, dim, x, pts):
    """sum_j W(x - pts[j]) with ``x`` and the rows of ``pts`` padded to length 3.

    Kept as its own function: numba compiles the loop much better here than
    when it sits inside the path kernel.
    """
    s2 = sv[1]
    v = 0.0
    for j in range(pts.shape[0]):
        u0 = x[0] - pts[j, 0]
        u1 = x[1] - pts[j, 1]
        u2 = x[2] - pts[j, 2]
        r2 = u0 * u0 + u1 * u1 + u2 * u2
        if r2 <= s2:
            v += w_near(sv, dim, u0, u1, u2, r2)
    return v


def _pad3(a):
    a = np.asarray(a, float)
    out = np.zeros(a.shape[:-1] + (3,))
    out[..., :a.shape[-1]] = a
    return out


@njit(cache=True, nogil=True)
def sup_on_box(sv, dim, lo, hi):
    """Supremum of W over the closed box [lo, hi]."""
    if sv[0] == RADIAL:
        n = int(sv[2])
        dmin2 = 0.0
        dmax2 = 0.0
        for i in range(dim):
            if lo[i] > 0.0:
                dmin2 += lo[i] * lo[i]
            elif hi[i] < 0.0:
                dmin2 += hi[i] * hi[i]
            far = max(abs(lo[i]), abs(hi[i]))
            dmax2 += far * far
        dmin = math.sqrt(dmin2)
        dmax = math.sqrt(dmax2)
        best = 0.0
        inner = -1.0
        for i in range(n):
            # annulus (inner, r_i], the first one closed at 0
            r = sv[_RADIAL_HEADER + i]
            a = sv[_RADIAL_HEADER + n + i]
            if dmin <= r and dmax > inner and a > best:
                best = a
            inner = r
        return best
    pitch = sv[2]
    jlo = np.zeros(3, np.int64)
    jhi = np.zeros(3, np.int64)
    ext = np.ones(3, np.int64)
    for i in range(dim):
        ext[i] = int(sv[6 + i])
        a = math.floor((lo[i] - sv[3 + i]) / pitch)
        b = math.floor((hi[i] - sv[3 + i]) / pitch)
        if b < 0 or a >= ext[i]:
            return 0.0
        jlo[i] = max(a, 0)
        jhi[i] = min(b, ext[i] - 1)
    best = 0.0
    for a in range(jlo[0], jhi[0] + 1):
        for b in range(jlo[1], jhi[1] + 1):
            for c in range(jlo[2], jhi[2] + 1):
                v = sv[_GRID_HEADER + (a * ext[1] + b) * ext[2] + c]
                if v > best:
                    best = v
    return best


@njit(cache=True, nogil=True)
def _cell_uniform(k0, k1, c0, c1, c2, i):
    u0, u1 = rng.uniform_pair(c0, c1, c2, np.uint64(i >> 1), k0, k1)
    return u0 if (i & 1) == 0 else u1


@njit(cache=True, nogil=True)
def _poisson_inversion(u, lam):
    p = math.exp(-lam)
    cdf = p
    k = 0
    while u > cdf and k < 100000:
        k += 1
        p *= lam / k
        cdf += p
        if p == 0.0:
            break
    return k


@njit(cache=True, nogil=True, inline="always")
def _cell_count(k0, k1, c0, c1, c2, lam, pieces):
    n = 0
    for i in range(pieces):
        n += _poisson_inversion(_cell_uniform(k0, k1, c0, c1, c2, i), lam / pieces)
    return n


@njit(cache=True, nogil=True, inline="always")
def _cell_words(cell):
    mask = np.uint64(0xFFFFFFFF)
    return np.uint64(cell[0]) & mask, np.uint64(cell[1]) & mask, np.uint64(cell[2]) & mask


@njit(cache=True, nogil=True, inline="always")
def _cell_fill(k0, k1, cell, dim, cell_size, pieces, n, out, pos):
    c0, c1, c2 = _cell_words(cell)
    idx = pieces
    for j in range(n):
        for i in range(dim):
            out[pos + j, i] = (cell[i] + _cell_uniform(k0, k1, c0, c1, c2, idx)) * cell_size
            idx += 1


@njit(cache=True, nogil=True)
def cell_points(k0, k1, cell, dim, intensity, cell_size):
    """Points of the Poisson cloud inside ``cell`` (integer coordinates, length 3)."""
    lam = intensity * cell_size ** dim
    if lam <= 0.0:
        return np.empty((0, dim))
    pieces = max(1, int(math.ceil(lam / _POISSON_PIECE)))
    c0, c1, c2 = _cell_words(cell)
    n = _cell_count(k0, k1, c0, c1, c2, lam, pieces)
    out = np.empty((n, dim))
    _cell_fill(k0, k1, cell, dim, cell_size, pieces, n, out, 0)
    return out


@njit(cache=True, nogil=True)
def block_points(k0, k1, center, dim, intensity, cell_size, reach=1):
    """Points of the (2 reach + 1)^dim cells around ``center``, as rows of length 3.

    Coordinates past ``dim`` are zero so that hot loops can read all three.
    """
    lam = intensity * cell_size ** dim
    if lam <= 0.0:
        return np.zeros((0, 3))
    pieces = max(1, int(math.ceil(lam / _POISSON_PIECE)))
    span = np.zeros(3, np.int64)
    for i in range(dim):
        span[i] = reach
    side = 2 * reach + 1
    counts = np.zeros(side ** dim, np.int64)
    cell = np.zeros(3, np.int64)
    total = 0
    q = 0
    for a in range(-span[0], span[0] + 1):
        for b in range(-span[1], span[1] + 1):
            for c in range(-span[2], span[2] + 1):
                cell[0] = center[0] + a
                cell[1] = center[1] + b
                cell[2] = center[2] + c
                c0, c1, c2 = _cell_words(cell)
                counts[q] = _cell_count(k0, k1, c0, c1, c2, lam, pieces)
                total += counts[q]
                q += 1
    out = np.zeros((total, 3))
    pos = 0
    q = 0
    for a in range(-span[0], span[0] + 1):
        for b in range(-span[1], span[1] + 1):
            for c in range(-span[2], span[2] + 1):
                cell[0] = center[0] + a
                cell[1] = center[1] + b
                cell[2] = center[2] + c
                _cell_fill(k0, k1, cell, dim, cell_size, pieces, counts[q], out, pos)
                pos += counts[q]
                q += 1
    return out


@njit(cache=True, nogil=True)
def local_points(k0, k1, x, dim, intensity, cell_size, radius):
    """Points within ``radius`` of ``x`` as rows of length 3 (zeros past ``dim``)."""
    center = np.zeros(3, np.int64)
    for i in range(dim):
        center[i] = np.int64(math.floor(x[i] / cell_size))
    reach = np.int64(math.ceil(radius / cell_size))
    blk = block_points(k0, k1, center, dim, intensity, cell_size, reach)
    r2 = radius * radius
    keep = np.zeros(blk.shape[0], np.bool_)
    n = 0
    for j in range(blk.shape[0]):
        d2 = 0.0
        for i in range(dim):
            d2 += (blk[j, i] - x[i]) ** 2
        if d2 <= r2:
            keep[j] = True
            n += 1
    out = np.zeros((n, 3))
    q = 0
    for j in range(blk.shape[0]):
        if keep[j]:
            out[q] = blk[j]
            q += 1
    return out


# --------------------------------------------------------------------------
# shapes


@dataclass(frozen=True, eq=False)
class ObstacleShape:
    """A bounded, compactly supported, nonnegative obstacle W on R^dim."""

    dim: int
    kind: str
    amplitudes: tuple = ()
    radii: tuple = ()
    table: np.ndarray = None
    pitch: float = 0.0
    origin: tuple = ()
    support_radius: float = 0.0
    l1_norm: float = 0.0
    linf_norm: float = 0.0
    extent: tuple = ()
    _kernel: np.ndarray = field(default=None, repr=False)

    def __call__(self, u):
        """W evaluated at one point or at an (n, dim) array of points."""
        u = np.asarray(u, dtype=float)
        vals = w_values(self._kernel, self.dim, np.ascontiguousarray(u.reshape(-1, self.dim)))
        if u.ndim == 0 or (u.ndim == 1 and self.dim > 1):
            return float(vals[0])
        return vals

    def kernel_args(self):
        """The flat float vector the numba kernels read."""
        return self._kernel

    def sup_on_box(self, lo, hi):
        return sup_on_box(self._kernel, self.dim, np.asarray(lo, float).reshape(self.dim),
                          np.asarray(hi, float).reshape(self.dim))

    def pieces_1d(self):
        """Intervals (lo, hi, value) on which the 1-d shape is constant and nonzero."""
        if self.dim != 1:
            raise ValueError("pieces are only defined in one dimension")
        out = []
        if self.kind == "grid-table":
            for i, v in enumerate(self.table):
                if v > 0:
                    lo = self.origin[0] + i * self.pitch
                    out.append((lo, lo + self.pitch, float(v)))
            return out
        inner = 0.0
        for i, (r, a) in enumerate(zip(self.radii, self.amplitudes)):
            if a > 0:
                if i == 0:
                    out.append((-r, r, a))
                else:
                    out.append((-r, -inner, a))
                    out.append((inner, r, a))
            inner = r
        return out

    def scaled(self, factor):
        """The shape factor * W."""
        if factor <= 0:
            raise ShapeError("scale factor must be positive")
        cfg = self.to_config()
        if self.kind == "grid-table":
            cfg["values"] = (np.asarray(self.table) * factor).reshape(self.extent).tolist()
        elif self.kind == "ball-indicator":
            cfg["amplitude"] = self.amplitudes[0] * factor
        else:
            cfg["amplitudes"] = [a * factor for a in self.amplitudes]
        return shape_from_config(cfg)

    def to_config(self):
        if self.kind == "grid-table":
            return {"dim": self.dim, "kind": self.kind, "values": np.asarray(self.table).reshape(self.extent).tolist(),
                    "pitch": self.pitch, "origin": list(self.origin)}
        if self.kind == "ball-indicator":
            return {"dim": self.dim, "kind": self.kind, "radius": self.radii[0], "amplitude": self.amplitudes[0]}
        return {"dim": self.dim, "kind": self.kind, "radii": list(self.radii), "amplitudes": list(self.amplitudes)}


def make_shape(dim, kind, params):
    """Build an ObstacleShape with its exact norms.

    ``params`` per kind:

    - ball-indicator: ``radius``, ``amplitude``
    - radial-step: ``radii`` (strictly increasing), ``amplitudes``
    - grid-table: ``values`` (nested lists of shape n_1 x ... x n_dim), ``pitch``,
      optional ``origin`` (lower corner, default centers the table at 0)
    """
    if dim not in SUPPORTED_DIMS:
        raise ShapeError(f"unsupported dimension {dim}", key="dim")
    if kind not in KINDS:
        raise ShapeError(f"unknown shape kind {kind!r}; expected one of {KINDS}", key="kind")
    if kind == "grid-table":
        return _make_grid_shape(dim, params)
    if kind == "ball-indicator":
        radii = [float(params["radius"])]
        amps = [float(params["amplitude"])]
    else:
        radii = [float(r) for r in params["radii"]]
        amps = [float(a) for a in params["amplitudes"]]
        if len(radii) != len(amps) or not radii:
            raise ShapeError("radii and amplitudes must be nonempty and of equal length", key="radii")
    if any(a < 0 or not math.isfinite(a) for a in amps):
        raise ShapeError("amplitudes must be finite and nonnegative", key="amplitudes")
    if radii[0] <= 0 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ShapeError("radii must be positive and strictly increasing", key="radii")
    if max(amps) <= 0:
        raise ShapeError("shape is almost everywhere zero", key="amplitudes")
    omega = unit_ball_volume(dim)
    l1 = 0.0
    inner = 0.0
    for r, a in zip(radii, amps):
        l1 += a * omega * (r ** dim - inner ** dim)
        inner = r
    support = max(r for r, a in zip(radii, amps) if a > 0)
    kernel = np.array([RADIAL, support * support, len(radii)] + radii + amps, dtype=float)
    return ObstacleShape(dim=dim, kind=kind, amplitudes=tuple(amps), radii=tuple(radii),
                         support_radius=support, l1_norm=l1, linf_norm=max(amps), _kernel=kernel)


def _make_grid_shape(dim, params):
    values = np.asarray(params["values"], dtype=float)
    if values.ndim != dim:
        raise ShapeError(f"values must be a {dim}-dimensional table", key="values")
    pitch = float(params["pitch"])
    if pitch <= 0:
        raise ShapeError("pitch must be positive", key="pitch")
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ShapeError("table values must be finite and nonnegative", key="values")
    if values.max() <= 0:
        raise ShapeError("shape is almost everywhere zero", key="values")
    origin = params.get("origin")
    origin = np.array([-0.5 * n * pitch for n in values.shape] if origin is None else origin, dtype=float)
    if origin.shape != (dim,):
        raise ShapeError(f"origin must have {dim} entries", key="origin")
    # farthest corner of any nonzero cell
    idx = np.argwhere(values > 0)
    lo = origin + idx * pitch
    hi = lo + pitch
    far = np.maximum(np.abs(lo), np.abs(hi))
    support = float(np.sqrt((far ** 2).sum(axis=1)).max())
    head = np.zeros(_GRID_HEADER)
    head[0] = GRID
    head[1] = support * support
    head[2] = pitch
    head[3:3 + dim] = origin
    head[6:9] = 1
    head[6:6 + dim] = values.shape
    kernel = np.concatenate([head, values.ravel()])
    return ObstacleShape(dim=dim, kind="grid-table", table=values.ravel().copy(), pitch=pitch, extent=values.shape,
                         origin=tuple(origin), support_radius=support,
                         l1_norm=float(values.sum() * pitch ** dim), linf_norm=float(values.max()),
                         _kernel=kernel)


def shape_from_config(cfg):
    cfg = dict(cfg)
    try:
        dim = int(cfg.pop("dim"))
        kind = cfg.pop("kind")
    except KeyError as exc:
        raise ShapeError("missing required key", key=exc.args[0]) from None
    try:
        return make_shape(dim, kind, cfg)
    except KeyError as exc:
        raise ShapeError("missing required key", key=exc.args[0]) from None


def mean_potential(shape, intensity):
    """E V(0) = intensity * |W|_1 (Campbell's formula)."""
    return intensity * shape.l1_norm


# --------------------------------------------------------------------------
# environments


class Environment:
    """A Poisson point cloud of the given intensity on R^dim, generated cell by cell.

    ``realized_cells`` caches the cells materialized so far.  The cache is only
    an optimization: a cell's points are a pure function of (seed, cell).
    """

    def __init__(self, dim, intensity, seed, cell_size=1.0):
        if dim not in SUPPORTED_DIMS:
            raise ConfigError(f"unsupported dimension {dim}", key="dim")
        if intensity < 0 or not math.isfinite(intensity):
            raise ConfigError("intensity must be finite and nonnegative", key="intensity")
        if cell_size <= 0:
            raise ConfigError("cell_size must be positive", key="cell_size")
        self.dim = int(dim)
        self.intensity = float(intensity)
        self.seed = int(seed)
        self.cell_size = float(cell_size)
        self.key = rng.derive_key(self.seed, ENV_STREAM)
        self.realized_cells = {}

    def __repr__(self):
        return (f"Environment(dim={self.dim}, intensity={self.intensity}, seed={self.seed}, "
                f"cell_size={self.cell_size})")

    def cell_points(self, cell):
        cell = tuple(int(c) for c in cell)
        pts = self.realized_cells.get(cell)
        if pts is None:
            padded = np.zeros(3, np.int64)
            padded[:self.dim] = cell
            pts = cell_points(self.key[0], self.key[1], padded, self.dim, self.intensity, self.cell_size)
            pts.setflags(write=False)
            # setdefault keeps the first copy if two threads race; both are identical
            pts = self.realized_cells.setdefault(cell, pts)
        return pts

    def cells_in_box(self, lo, hi):
        lo = np.floor(np.asarray(lo, float) / self.cell_size).astype(int)
        hi = np.floor(np.asarray(hi, float) / self.cell_size).astype(int)
        ranges = [range(a, b + 1) for a, b in zip(lo, hi)]
        return [tuple(c) for c in np.array(np.meshgrid(*ranges, indexing="ij")).reshape(self.dim, -1).T]

    def points_in_box(self, lo, hi):
        """All points in cells meeting the box [lo, hi], filtered to the box."""
        lo = np.asarray(lo, float).reshape(self.dim)
        hi = np.asarray(hi, float).reshape(self.dim)
        chunks = [self.cell_points(c) for c in self.cells_in_box(lo, hi)]
        pts = np.concatenate(chunks) if chunks else np.empty((0, self.dim))
        inside = np.all((pts >= lo) & (pts <= hi), axis=1)
        return pts[inside]

    def cells_near(self, x, radius):
        """Cells meeting the closed ball B(x, radius)."""
        x = np.asarray(x, float).reshape(self.dim)
        out = []
        for c in self.cells_in_box(x - radius, x + radius):
            lo = np.asarray(c) * self.cell_size
            gap = np.clip(x, lo, lo + self.cell_size) - x
            if gap @ gap <= radius * radius:
                out.append(c)
        return out

    def points_near(self, x, radius):
        chunks = [self.cell_points(c) for c in self.cells_near(x, radius)]
        return np.concatenate(chunks) if chunks else np.empty((0, self.dim))

    def kernel_args(self):
        return (self.intensity > 0, self.key[0], self.key[1], self.intensity, self.cell_size)

    def with_seed(self, seed):
        return Environment(self.dim, self.intensity, seed, self.cell_size)

    def to_config(self):
        return {"dim": self.dim, "intensity": self.intensity, "seed": self.seed, "cell_size": self.cell_size}

    def dump_points_csv(self, path, lo, hi):
        pts = self.points_in_box(lo, hi)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"x{i + 1}" for i in range(self.dim)])
            for p in pts:
                writer.writerow([repr(float(v)) for v in p])
        return len(pts)


def make_environment(dim, intensity, seed, cell_size=None, shape=None):
    """Environment with ``cell_size`` defaulting to max(1, shape support radius)."""
    if cell_size is None:
        cell_size = max(1.0, shape.support_radius if shape is not None else 1.0)
    return Environment(dim, intensity, seed, cell_size)


def environment_from_config(cfg, shape=None):
    try:
        return make_environment(int(cfg["dim"]), float(cfg["intensity"]), int(cfg["seed"]),
                                cfg.get("cell_size"), shape)
    except KeyError as exc:
        raise ConfigError("missing required key", key=exc.args[0]) from None


def _check_pair(env, shape):
    if env.dim != shape.dim:
        raise ConfigError(f"environment is {env.dim}-dimensional but shape is {shape.dim}-dimensional", key="dim")
    if env.cell_size < shape.support_radius:
        raise ConfigError("cell_size must be at least the shape's support radius", key="cell_size")


def potential_at(env, shape, x):
    """V(x) = sum of W(x - p) over the points p within the support radius of x."""
    _check_pair(env, shape)
    x = np.asarray(x, float).reshape(env.dim)
    pts = env.points_near(x, shape.support_radius)
    return sum_w(shape.kernel_args(), env.dim, _pad3(x), _pad3(pts))


# --------------------------------------------------------------------------
# sup-discretization on the dyadic grid


@dataclass(frozen=True, eq=False)
class DiscretizedShape:
    """W with its point argument rounded down to the grid of pitch 2^-k.

    ``table[j]`` is the supremum of W over the closed grid cube with lower corner
    ``corner + j * 2^-k``; it covers the support of W.
    """

    base: ObstacleShape
    k: int
    table: np.ndarray
    corner: np.ndarray

    @property
    def pitch(self):
        return 2.0 ** -self.k

    def value(self, x, p):
        """sup of W(x - t) over t in the grid cube containing p."""
        x = np.asarray(x, float).reshape(self.base.dim)
        p = np.asarray(p, float).reshape(self.base.dim)
        return _disc_value(self.base.kernel_args(), self.base.dim, self.k, x, p)


@njit(cache=True, nogil=True)
def _disc_value(sv, dim, k, x, p):
    h = 2.0 ** -k
    lo = np.empty(dim)
    hi = np.empty(dim)
    for i in range(dim):
        f = math.floor(p[i] * 2.0 ** k) * h
        # x - t for t in [f, f + h); widened by a few ulps against rounding
        eps = 1e-12 * (1.0 + abs(x[i]) + abs(f))
        lo[i] = x[i] - f - h - eps
        hi[i] = x[i] - f + eps
    return sup_on_box(sv, dim, lo, hi)


@njit(cache=True, nogil=True)
def _disc_sum(sv, dim, k, x, pts):
    total = 0.0
    for j in range(pts.shape[0]):
        total += _disc_value(sv, dim, k, x, pts[j])
    return total


def discretize_shape(shape, k, max_entries=2 ** 24):
    if k < 1:
        raise ValueError("k must be at least 1")
    h = 2.0 ** -k
    R = shape.support_radius
    lo = np.floor(-R / h) - 1
    n = int(np.floor(R / h) + 1 - lo) + 1
    if n ** shape.dim > max_entries:
        raise DiscretizationSizeError(f"table of {n}^{shape.dim} entries exceeds budget {max_entries}")
    corner = np.full(shape.dim, lo * h)
    table = np.empty((n,) * shape.dim)
    shp = shape.kernel_args()
    for idx in np.ndindex(*table.shape):
        a = corner + np.array(idx) * h
        table[idx] = sup_on_box(shp, shape.dim, a, a + h)
    return DiscretizedShape(base=shape, k=int(k), table=table, corner=corner)


def discretized_potential_at(env, dshape, x):
    """Sum over points p of sup W(x - t), t ranging over the grid cube of p."""
    shape = dshape.base
    _check_pair(env, shape)
    x = np.asarray(x, float).reshape(env.dim)
    reach = shape.support_radius + math.sqrt(env.dim) * dshape.pitch
    pts = env.points_near(x, reach)
    return _disc_sum(shape.kernel_args(), env.dim, dshape.k, x, np.ascontiguousarray(pts))
