import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from lyapmc.errors import ConfigError, DiscretizationSizeError, ShapeError
from lyapmc.potential import (
    Environment, discretize_shape, discretized_potential_at, environment_from_config, make_environment,
    make_shape, mean_potential, potential_at, shape_from_config,
)


def brute_force_v(env, shape, x, span=4.0):
    """Sum W(x - p) over every point of a generous box around x."""
    x = np.atleast_1d(np.asarray(x, float))
    pts = env.points_in_box(x - span, x + span)
    return float(np.sum(shape(x - pts))) if len(pts) else 0.0


def test_shape_norms():
    s = make_shape(1, "ball-indicator", {"radius": 0.5, "amplitude": 2.0})
    assert s.l1_norm == pytest.approx(2.0)
    assert s.linf_norm == 2.0 and s.support_radius == 0.5
    disk = make_shape(2, "ball-indicator", {"radius": 1.0, "amplitude": 1.0})
    assert disk.l1_norm == pytest.approx(math.pi)
    rings = make_shape(3, "radial-step", {"radii": [0.5, 1.0], "amplitudes": [2.0, 0.5]})
    expected = 4 * math.pi / 3 * (2.0 * 0.125 + 0.5 * (1 - 0.125))
    assert rings.l1_norm == pytest.approx(expected, rel=1e-14)


def test_grid_shape_l1_matches_quadrature():
    vals = [[0.0, 1.0, 0.5], [2.0, 0.0, 0.25]]
    s = make_shape(2, "grid-table", {"values": vals, "pitch": 0.5})
    assert s.l1_norm == pytest.approx(0.9375)
    # midpoint rule on a grid finer than the table, over a box containing it
    h = 1 / 64
    a = np.arange(-1 + h / 2, 1, h)
    u = np.array(np.meshgrid(a, a, indexing="ij")).reshape(2, -1).T
    assert s(u).sum() * h * h == pytest.approx(s.l1_norm, rel=1e-12)
    assert s([0.0, 0.76]) == 0.0 and s([-0.51, 0.0]) == 0.0


@pytest.mark.parametrize("kind,params", [
    ("ball-indicator", {"radius": 1.0, "amplitude": 0.0}),
    ("radial-step", {"radii": [0.5, 1.0], "amplitudes": [0.0, 0.0]}),
    ("grid-table", {"values": [0.0, 0.0], "pitch": 0.1}),
    ("radial-step", {"radii": [1.0, 0.5], "amplitudes": [1.0, 1.0]}),
    ("ball-indicator", {"radius": 1.0, "amplitude": -1.0}),
])
def test_invalid_shapes_are_rejected(kind, params):
    with pytest.raises(ShapeError):
        make_shape(1, kind, params)


def test_shape_evaluation_and_config_round_trip(two_level_1d, table_3d):
    assert two_level_1d(0.0) == 3.0
    assert two_level_1d(0.25) == 3.0
    assert two_level_1d(-0.3) == 1.0
    assert two_level_1d(0.51) == 0.0
    for s in (two_level_1d, table_3d):
        back = shape_from_config(s.to_config())
        u = np.random.default_rng(0).uniform(-1, 1, (200, s.dim))
        np.testing.assert_array_equal(back(u), s(u))
        assert back.l1_norm == s.l1_norm


def test_scaled_shape(unit_bump_1d):
    half = unit_bump_1d.scaled(0.5)
    assert half.l1_norm == pytest.approx(0.5)
    assert half(0.1) == 0.5


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_potential_matches_brute_force(dim):
    shape = make_shape(dim, "radial-step", {"radii": [0.3, 0.8], "amplitudes": [2.0, 0.7]})
    env = make_environment(dim, 1.5, seed=44, shape=shape)
    gen = np.random.default_rng(dim)
    for x in gen.uniform(-6, 6, (40, dim)):
        assert potential_at(env, shape, x) == pytest.approx(brute_force_v(env, shape, x), abs=1e-12)


def test_potential_is_local(disk_2d):
    env = make_environment(2, 2.0, seed=5, shape=disk_2d)
    x = np.array([3.3, -1.2])
    near = env.points_near(x, disk_2d.support_radius)
    v = potential_at(env, disk_2d, x)
    assert v == pytest.approx(sum(disk_2d(x - p) for p in near))
    # the empty environment gives V = 0 everywhere
    assert potential_at(make_environment(2, 0.0, seed=5, shape=disk_2d), disk_2d, x) == 0.0


def test_environment_does_not_depend_on_query_order(table_3d):
    xs = np.random.default_rng(8).uniform(-10, 10, (30, 3))
    a = make_environment(3, 1.0, seed=12, shape=table_3d)
    b = make_environment(3, 1.0, seed=12, shape=table_3d)
    va = [potential_at(a, table_3d, x) for x in xs]
    vb = [potential_at(b, table_3d, x) for x in xs[::-1]][::-1]
    assert va == vb
    c = make_environment(3, 1.0, seed=13, shape=table_3d)
    assert [potential_at(c, table_3d, x) for x in xs] != va


def test_campbell_mean(two_level_1d):
    nu = 0.8
    vals = np.array([potential_at(make_environment(1, nu, seed=s, shape=two_level_1d), two_level_1d, [0.37])
                     for s in range(10_000)])
    mean = mean_potential(two_level_1d, nu)
    assert mean == pytest.approx(nu * 2.0)
    assert abs(vals.mean() - mean) < 3 * vals.std(ddof=1) / math.sqrt(vals.size)


@pytest.mark.parametrize("dim,intensity", [(1, 0.7), (2, 3.0), (3, 0.4)])
def test_cell_counts_are_poisson(dim, intensity):
    env = Environment(dim, intensity, seed=77, cell_size=1.0)
    side = {1: 4000, 2: 60, 3: 15}[dim]
    counts = np.array([len(env.cell_points(c)) for c in env.cells_in_box([0] * dim, [side - 1] * dim)])
    kmax = int(stats.poisson.ppf(0.999, intensity))
    observed = np.array([(counts == k).sum() for k in range(kmax)] + [(counts >= kmax).sum()])
    probs = np.append(stats.poisson.pmf(np.arange(kmax), intensity), stats.poisson.sf(kmax - 1, intensity))
    chi2, p = stats.chisquare(observed, probs * counts.size)
    assert p > 1e-3


def test_points_are_uniform_within_cells():
    env = Environment(2, 5.0, seed=3, cell_size=2.0)
    pts = env.points_in_box([0, 0], [39.999, 39.999])
    frac = (pts % 2.0) / 2.0
    for col in frac.T:
        assert stats.kstest(col, "uniform").pvalue > 1e-3


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32), x=st.floats(-50, 50), k=st.sampled_from([2, 4, 6]))
def test_discretization_dominates(seed, x, k):
    shape = make_shape(1, "radial-step", {"radii": [0.2, 0.5], "amplitudes": [1.0, 0.3]})
    env = make_environment(1, 2.0, seed, shape=shape)
    d = discretize_shape(shape, k)
    assert discretized_potential_at(env, d, [x]) >= potential_at(env, shape, [x])


def test_discretized_indicator_table():
    shape = make_shape(1, "ball-indicator", {"radius": 0.5, "amplitude": 1.0})
    d = discretize_shape(shape, 2)
    # cells of pitch 1/4 meeting [-1/2, 1/2], closed cubes included
    assert d.table.sum() * d.pitch == pytest.approx(1.0 + 2 * d.pitch)
    assert set(np.unique(d.table)) <= {0.0, 1.0}


def test_discretized_value_dominates_dense_samples():
    shape = make_shape(2, "radial-step", {"radii": [0.4, 0.9], "amplitudes": [1.5, 0.5]})
    d = discretize_shape(shape, 3)
    gen = np.random.default_rng(1)
    for _ in range(50):
        x = gen.uniform(-1, 1, 2)
        p = gen.uniform(-0.5, 0.5, 2)
        corner = np.floor(p / d.pitch) * d.pitch
        t = corner + gen.random((400, 2)) * d.pitch
        dense = shape(x - t).max()
        assert d.value(x, p) >= dense
        assert d.value(x, p) <= shape.linf_norm


def test_discretization_converges():
    shape = make_shape(1, "ball-indicator", {"radius": 0.5, "amplitude": 1.0})
    env = make_environment(1, 3.0, seed=2, shape=shape)
    xs = np.linspace(-20, 20, 801)
    exact = np.array([potential_at(env, shape, [x]) for x in xs])
    gaps = []
    for k in (2, 4, 6, 8):
        d = discretize_shape(shape, k)
        gaps.append(np.mean([discretized_potential_at(env, d, [x]) for x in xs]) - exact.mean())
    assert all(g >= 0 for g in gaps)
    assert np.all(np.diff(gaps) < 0)


def test_discretization_size_limit(table_3d):
    with pytest.raises(DiscretizationSizeError):
        discretize_shape(table_3d, 12, max_entries=10 ** 6)
    with pytest.raises(ValueError):
        discretize_shape(table_3d, 0)


def test_environment_config_and_dump(tmp_path, disk_2d):
    env = make_environment(2, 1.3, seed=9, shape=disk_2d)
    again = environment_from_config(env.to_config())
    lo, hi = [-3, -3], [3, 3]
    np.testing.assert_array_equal(env.points_in_box(lo, hi), again.points_in_box(lo, hi))
    n = env.dump_points_csv(tmp_path / "pts.csv", lo, hi)
    data = np.loadtxt(tmp_path / "pts.csv", delimiter=",", skiprows=1, ndmin=2)
    assert data.shape == (n, 2)
    np.testing.assert_array_equal(data, env.points_in_box(lo, hi))


def test_environment_validation(disk_2d):
    with pytest.raises(ConfigError):
        Environment(2, -1.0, 0)
    with pytest.raises(ConfigError):
        potential_at(Environment(2, 1.0, 0, cell_size=0.1), disk_2d, [0, 0])
