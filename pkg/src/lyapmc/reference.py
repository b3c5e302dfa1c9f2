"""Exact and quadrature oracles for a constant killing rate.

With a constant potential ``eta`` the Lyapunov norm, Green function and the 1-d
hitting time transform are all explicit.  These functions are the yardstick the
Monte Carlo estimators are checked against.
"""
import math
import warnings

import numpy as np
from scipy import integrate

from .errors import ConfigError, QuadratureError, SingularityError

SUPPORTED_DIMS = (1, 2, 3)

# log-space switch for exp(-k l)
_LOG_SPACE_KL = 500.0


def _check_dim(d):
    if d not in SUPPORTED_DIMS:
        raise ConfigError(f"unsupported dimension {d}; expected one of {SUPPORTED_DIMS}", key="dim")


def alpha_const(eta, y):
    """Lyapunov norm of Brownian motion killed at constant rate ``eta``: sqrt(2 eta) |y|."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    return math.sqrt(2.0 * eta) * float(np.linalg.norm(np.atleast_1d(np.asarray(y, dtype=float))))


def hitting_laplace_1d(eta, level):
    """E[exp(-eta T)] for T the hitting time of distance ``level`` by 1-d Brownian motion."""
    if eta < 0 or level < 0:
        raise ValueError("eta and level must be nonnegative")
    return math.exp(-level * math.sqrt(2.0 * eta))


def unit_ball_volume(d):
    _check_dim(d)
    return {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}[d]


def unit_sphere_area(d):
    _check_dim(d)
    return {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}[d]


def bessel_j0_series(x, tol=1e-17):
    """J0 from its power series; accurate for the small arguments needed here (|x| < 10)."""
    term = 1.0
    total = 1.0
    q = -0.25 * x * x
    m = 0
    while True:
        m += 1
        term *= q / (m * m)
        total += term
        if abs(term) < tol * max(1.0, abs(total)):
            return total


def first_bessel_j0_zero(lo=2.0, hi=3.0, tol=1e-15):
    """Bisection for the first positive zero of J0 (J0(2) > 0 > J0(3))."""
    flo = bessel_j0_series(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fmid = bessel_j0_series(mid)
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def dirichlet_eigenvalue(d):
    """Principal Dirichlet eigenvalue of -1/2 Laplacian on the unit ball of R^d."""
    _check_dim(d)
    if d == 1:
        return math.pi ** 2 / 8.0
    if d == 2:
        return first_bessel_j0_zero() ** 2 / 2.0
    return math.pi ** 2 / 2.0


def _prefactor(eta, d):
    # 2 (2 eta)^((d-2)/2) / (sigma_d (d-2)!)
    return 2.0 * (2.0 * eta) ** ((d - 2) / 2.0) / (unit_sphere_area(d) * math.factorial(d - 2))


def green_shape_integral(eta, l, d, epsrel=1e-11):
    """The slowly varying factor D_l = int_0^inf e^{-k v} (v (v/l + 2))^((d-3)/2) dv.

    For d = 2 the substitution v = u^2 removes the endpoint singularity, leaving
    2 int_0^inf e^{-k u^2} / sqrt(u^2/l + 2) du.
    """
    _check_dim(d)
    if d == 1:
        raise ValueError("the d = 1 Green function has no integral representation here")
    k = math.sqrt(2.0 * eta)
    if d == 2:
        def integrand(u):
            return 2.0 * math.exp(-k * u * u) / math.sqrt(u * u / l + 2.0)
    else:
        def integrand(v):
            return math.exp(-k * v) * (v * (v / l + 2.0)) ** ((d - 3) / 2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=epsrel, limit=200)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature did not converge for eta={eta}, l={l}: {exc}") from exc
    if not err <= 1e-8 * abs(val):
        raise QuadratureError(f"quadrature error {err:.3e} exceeds tolerance for eta={eta}, l={l}")
    return val


def log_green_const(eta, l, d):
    """Natural log of the constant-potential Green function at separation ``l``."""
    _check_dim(d)
    if eta <= 0:
        raise ValueError("Green function requires eta > 0")
    k = math.sqrt(2.0 * eta)
    if d == 1:
        return -k * l - math.log(k)
    if l <= 0:
        raise SingularityError(f"Green function is singular at l = 0 for d = {d}")
    return (math.log(_prefactor(eta, d)) - k * l - 0.5 * (d - 1) * math.log(l)
            + math.log(green_shape_integral(eta, l, d)))


def green_const(eta, x, y, d=None):
    """Green function g_eta(x, y) of Brownian motion killed at constant rate ``eta``.

    ``x`` and ``y`` are points (or scalars in d = 1); ``d`` defaults to their length.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if d is None:
        d = x.size
    l = float(np.linalg.norm(y - x))
    return green_const_at(eta, l, d)


def green_const_at(eta, l, d):
    lg = log_green_const(eta, l, d)
    k = math.sqrt(2.0 * eta)
    if d == 1 and k * l <= _LOG_SPACE_KL:
        return math.exp(-k * l) / k
    return math.exp(lg)


def green_asymptotic_ratio(eta, l, d):
    """l^{-(d-1)/2} e^{-k l} / g_eta at separation l; tends to a constant as l grows."""
    _check_dim(d)
    if eta <= 0:
        raise ValueError("eta must be positive")
    if l < 1:
        raise ValueError("ratio is defined for l >= 1")
    k = math.sqrt(2.0 * eta)
    if d == 1:
        return k
    # the exponential and power factors cancel analytically
    return 1.0 / (_prefactor(eta, d) * green_shape_integral(eta, l, d))


def green_table(eta, d, l_min=0.5, l_max=64.0, points=25):
    """Rows (l, g, ratio, -ln g / l) on a geometric grid of separations."""
    rows = []
    for l in np.geomspace(l_min, l_max, points):
        l = float(l)
        lg = log_green_const(eta, l, d)
        ratio = green_asymptotic_ratio(eta, l, d) if l >= 1 else float("nan")
        rows.append((l, math.exp(lg), ratio, -lg / l))
    return rows
