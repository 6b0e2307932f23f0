"""Independent reference computations used by the tests.

Nothing here imports the package's numerical kernels: curvatures come from
sympy, geodesics on surfaces of revolution from Clairaut's relation, and
maximal functions and distribution functions from exact rational arithmetic.
"""
from __future__ import annotations

import math
import warnings
from fractions import Fraction

import numpy as np
import sympy as sp
from scipy import integrate, optimize
from scipy.sparse.csgraph import shortest_path


# ----------------------------------------------------------------------------
# symbolic curvature

def riemann_tensor(metric: sp.Matrix, coords):
    """R^a_{bcd} of a metric given as a sympy matrix."""
    n = len(coords)
    ginv = metric.inv()
    gamma = [[[sp.simplify(sum(ginv[a, e] * (sp.diff(metric[e, b], coords[c]) + sp.diff(metric[e, c], coords[b])
                                             - sp.diff(metric[b, c], coords[e])) for e in range(n)) / 2)
               for c in range(n)] for b in range(n)] for a in range(n)]
    R = {}
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    expr = sp.diff(gamma[a][b][d], coords[c]) - sp.diff(gamma[a][b][c], coords[d])
                    expr += sum(gamma[a][c][e] * gamma[e][b][d] - gamma[a][d][e] * gamma[e][b][c] for e in range(n))
                    R[a, b, c, d] = expr
    return R


def scalar_curvature(metric: sp.Matrix, coords) -> sp.Expr:
    n = len(coords)
    R = riemann_tensor(metric, coords)
    ginv = metric.inv()
    ric = sp.Matrix(n, n, lambda b, d: sum(R[a, b, a, d] for a in range(n)))
    return sp.simplify(sum(ginv[b, d] * ric[b, d] for b in range(n) for d in range(n)))


def sectional_curvature(metric: sp.Matrix, coords, i: int, k: int) -> sp.Expr:
    """K(e_i, e_k) for coordinate fields of an orthogonal metric."""
    R = riemann_tensor(metric, coords)
    n = len(coords)
    R_low = sum(metric[i, a] * R[a, k, i, k] for a in range(n))
    return sp.simplify(R_low / (metric[i, i] * metric[k, k] - metric[i, k] ** 2))


def conformal_gaussian_curvature(psi_expr: sp.Expr, y: sp.Symbol) -> sp.Expr:
    """Gaussian curvature of psi(y)^2 (dx^2 + dy^2), from the full Riemann tensor."""
    x = sp.Symbol("x", real=True)
    g = sp.diag(psi_expr ** 2, psi_expr ** 2)
    return sectional_curvature(g, (x, y), 0, 1)


def warped_curvatures(j_expr: sp.Expr, t: sp.Symbol, m: int):
    """(radial, tangential, scalar) of dt^2 + j(t)^2 g_sphere in dimension m (m = 2 or 3)."""
    if m == 2:
        th = sp.Symbol("theta", real=True)
        g = sp.diag(1, j_expr ** 2)
        K = sectional_curvature(g, (t, th), 0, 1)
        return K, None, sp.simplify(2 * K)
    if m != 3:
        raise ValueError("only m = 2, 3 are supported")
    th, ph = sp.symbols("theta phi", real=True)
    g = sp.diag(1, j_expr ** 2, j_expr ** 2 * sp.sin(th) ** 2)
    coords = (t, th, ph)
    return (sectional_curvature(g, coords, 0, 1), sectional_curvature(g, coords, 1, 2),
            scalar_curvature(g, coords))


# ----------------------------------------------------------------------------
# Clairaut geodesics on dt^2 + sigma(t)^2 dtheta^2

def _turning_integrals(sigma, t_star: float, t0: float):
    """Angle swept and length of the geodesic arc from t0 down to its turning row t_star and back.

    With c = sigma(t_star) the arc satisfies sigma sin(angle) = c.  The
    substitution t = t_star + u^2 removes the inverse square root at the
    turning point.
    """
    c = sigma(t_star)
    U = math.sqrt(t0 - t_star)

    def root(u):
        t = t_star + u * u
        s = sigma(t)
        return s, math.sqrt(max(s * s - c * c, 0.0)), t

    def dtheta(u):
        if u == 0.0:
            return 0.0
        s, q, _ = root(u)
        return 2 * u * c / (s * q) if q > 0 else 0.0

    def dlen(u):
        if u == 0.0:
            return 0.0
        s, q, _ = root(u)
        return 2 * u * s / q if q > 0 else 0.0

    # the integrands have finite nonzero limits at u = 0; start just above it
    lo = 1e-9 * U
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        th = 2 * integrate.quad(dtheta, lo, U, limit=200, epsabs=1e-12, epsrel=1e-11)[0]
        L = 2 * integrate.quad(dlen, lo, U, limit=200, epsabs=1e-12, epsrel=1e-11)[0]
    return th, L


def clairaut_distance(sigma, t0: float, dtheta: float, t_low: float, n_scan: int = 40) -> float:
    """Length of the shortest geodesic joining (t0, 0) and (t0, dtheta) that dips toward smaller sigma.

    ``sigma`` must increase on [t_low, t0].  Every turning row t_star in
    (t_low, t0) whose swept angle equals dtheta gives a geodesic; the
    shortest one is returned.  The circle arc at row t0 is included as a
    competitor.
    """
    grid = t_low + (t0 - t_low) * (1 - np.geomspace(1, 1e-4, n_scan)[::-1])
    grid = np.unique(np.clip(grid, t_low + 1e-6, t0 - 1e-6))
    angles = np.array([_turning_integrals(sigma, s, t0)[0] for s in grid])
    best = dtheta * sigma(t0)
    diff = angles - dtheta
    for k in range(len(grid) - 1):
        if diff[k] == 0 or diff[k] * diff[k + 1] < 0:
            ts = optimize.brentq(lambda s: _turning_integrals(sigma, s, t0)[0] - dtheta,
                                 grid[k], grid[k + 1], xtol=1e-12)
            best = min(best, _turning_integrals(sigma, ts, t0)[1])
    return best


def polar_hyperbolic_distance(t1: float, t2: float, dtheta: float, kappa: float = 1.0) -> float:
    """Law of cosines in the space form of curvature -kappa^2 (geodesic polar coordinates)."""
    k = kappa
    c = (math.cosh(k * t1) * math.cosh(k * t2)
         - math.sinh(k * t1) * math.sinh(k * t2) * math.cos(dtheta))
    return math.acosh(max(c, 1.0)) / k


# ----------------------------------------------------------------------------
# exact rational references on finite spaces

def exact_centred_maximal(D, w, f, r_min: float = 0.0, r_max: float = math.inf):
    n = len(w)
    best = [Fraction(0)] * n
    for c, r, _, avg in _windowed(D, w, f, r_min, r_max):
        best[c] = max(best[c], avg)
    return [float(v) for v in best]


def exact_uncentred_maximal(D, w, f, r_min: float = 0.0, r_max: float = math.inf):
    n = len(w)
    best = [Fraction(0)] * n
    for _, _, members, avg in _windowed(D, w, f, r_min, r_max):
        for x in members:
            best[x] = max(best[x], avg)
    return [float(v) for v in best]


def _windowed(D, w, f, r_min, r_max):
    """Balls realised by some radius r with r_min < r <= r_max."""
    n = len(w)
    dists = sorted(set(float(v) for v in np.asarray(D).ravel()))
    cands = set()
    for k, d in enumerate(dists):
        nxt = dists[k + 1] if k + 1 < len(dists) else math.inf
        # the ball {d' <= d} is realised by r in (d, nxt]; pick any such r in the window
        lo, hi = max(d, r_min), min(nxt, r_max)
        if lo < hi:
            cands.add(hi if math.isfinite(hi) else lo + 1.0)
    W = [Fraction(float(v)) for v in w]
    F = [Fraction(abs(float(v))) for v in f]
    for c in range(n):
        for r in sorted(cands):
            members = [x for x in range(n) if D[c][x] < r]
            if not members:
                continue
            mass = sum(W[x] for x in members)
            yield c, r, members, sum(F[x] * W[x] for x in members) / mass


def distribution_function(values, weights, alpha: float) -> float:
    """mu{|f| > alpha} by direct summation."""
    return math.fsum(float(w) for v, w in zip(values, weights) if abs(v) > alpha)


def lorentz_norm_quadrature(values, weights, p: float, r: float) -> float:
    """(r * int_0^inf alpha^(r-1) mu{|f| > alpha}^(r/p) d alpha)^(1/r) by piecewise quadrature."""
    levels = sorted(set(abs(float(v)) for v in values if v != 0))
    edges = [0.0] + levels
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        E = distribution_function(values, weights, mid)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            total += integrate.quad(lambda a: r * a ** (r - 1) * E ** (r / p), lo, hi)[0]
    return total ** (1.0 / r)


# ----------------------------------------------------------------------------
# random test spaces

def random_graph_metric(rng, n, dyadic=True):
    """Shortest-path metric of a random connected graph with integer edge lengths, plus weights."""
    A = np.zeros((n, n))
    for i in range(1, n):
        j = rng.integers(0, i)
        A[i, j] = A[j, i] = rng.integers(1, 4)
    for _ in range(n):
        i, j = rng.integers(0, n, 2)
        if i != j:
            A[i, j] = A[j, i] = rng.integers(1, 4)
    D = shortest_path(A, directed=False)
    w = rng.integers(1, 9, n) / 8.0 if dyadic else rng.uniform(0.1, 2.0, n)
    return D, w
