"""Finite metric measure spaces: nets, overlap numbers, rough isometries and
the transfer of functions between roughly isometric spaces."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from .geodesy import hyperbolic_distance_array
from .maximal_ops import RadiusWindow, centred_maximal
from .measure_lorentz import SampledField, lp_norm


class RangeError(ValueError):
    pass


class FiniteMetricMeasureSpace:
    """n points with a distance matrix and positive weights."""

    def __init__(self, distance, weight, geodesic: bool = False, check: bool = True,
                 coords: Optional[np.ndarray] = None, seed: int = 0):
        D = np.asarray(distance, dtype=float)
        w = np.asarray(weight, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] != len(w):
            raise ValueError("distance must be n x n with n weights")
        if np.any(~(w > 0)):
            raise ValueError("weights must be positive")
        self.distance, self.weight, self.geodesic = D, w, geodesic
        self.coords = coords
        if check:
            self.check_metric(seed=seed)

    @property
    def n(self) -> int:
        return len(self.weight)

    def check_metric(self, tol: float = 1e-9, seed: int = 0, samples: int = 200000) -> None:
        D = self.distance
        if np.any(D < 0) or np.any(np.diag(D) != 0) or not np.allclose(D, D.T, atol=0, rtol=0):
            raise ValueError("distance must be symmetric, nonnegative, zero on the diagonal")
        n = self.n
        if n <= 500:
            # d(x, z) <= d(x, y) + d(y, z), one y at a time
            for y in range(n):
                if np.any(D > D[:, y][:, None] + D[y][None, :] + tol):
                    raise ValueError("triangle inequality fails")
        else:
            rng = np.random.default_rng(seed)
            x, y, z = rng.integers(0, n, (3, samples))
            if np.any(D[x, z] > D[x, y] + D[y, z] + tol):
                raise ValueError("triangle inequality fails")

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[tuple[int, int, float]], weight,
                   coords=None) -> "FiniteMetricMeasureSpace":
        """Shortest-path metric of a weighted graph."""
        e = np.asarray(edges, dtype=float).reshape(-1, 3)
        if len(e) == 0:
            return cls(np.zeros((n, n)) if n == 1 else np.full((n, n), np.inf), weight, geodesic=True,
                       check=False, coords=coords)
        G = coo_matrix((e[:, 2], (e[:, 0].astype(int), e[:, 1].astype(int))), shape=(n, n)).tocsr()
        D = shortest_path(G, directed=False)
        if np.any(np.isinf(D)):
            raise ValueError("graph is disconnected")
        return cls(D, weight, geodesic=True, check=False, coords=coords)

    @classmethod
    def from_csv(cls, edges_path: str, weights_path: str) -> "FiniteMetricMeasureSpace":
        """Edge list (node, node, length) plus node weights (node, weight); headers optional."""
        def rows(path):
            with open(path, newline="") as fh:
                for row in csv.reader(fh):
                    if not row:
                        continue
                    try:
                        yield [float(c) for c in row]
                    except ValueError:
                        continue
        wt = sorted(rows(weights_path))
        n = len(wt)
        w = np.array([r[1] for r in wt])
        edges = [(int(r[0]), int(r[1]), r[2]) for r in rows(edges_path)]
        return cls.from_edges(n, edges, w)

    def ball(self, x: int, r: float) -> np.ndarray:
        return self.distance[x] < r

    def ball_measures(self, r: float) -> np.ndarray:
        """mu(B_r(x)) for every x."""
        return (self.distance < r) @ self.weight

    def diameter(self) -> float:
        return float(self.distance.max())


# ----------------------------------------------------------------------------
# generators

def path_space(n: int, step: float = 1.0) -> FiniteMetricMeasureSpace:
    x = step * np.arange(n)
    return FiniteMetricMeasureSpace(np.abs(x[:, None] - x[None, :]), np.ones(n), geodesic=True,
                                    coords=x[:, None])


def cycle_space(n: int) -> FiniteMetricMeasureSpace:
    k = np.arange(n)
    d = np.abs(k[:, None] - k[None, :])
    return FiniteMetricMeasureSpace(np.minimum(d, n - d).astype(float), np.ones(n), geodesic=True)


def hyperbolic_mesh_space(radius: float, h: float = 0.25, kappa: float = 1.0) -> FiniteMetricMeasureSpace:
    """Graph on a graded half-plane mesh inside B_radius(i).

    Row j sits at y = e^{jh}; its nodes are spaced h*y apart in x, so every
    cell has hyperbolic area h^2/kappa^2.  Nodes are joined to nearby nodes
    in the same row and in the next two rows, with exact hyperbolic edge
    lengths; the graph metric overestimates distances by a few percent.
    """
    n_u = int(math.ceil(radius * kappa / h)) + 1
    rows = []
    for j in range(-n_u, n_u + 1):
        y = math.exp(j * h)
        kmax = int(math.ceil(math.sinh(radius * kappa) / h))
        xs = h * y * np.arange(-kmax, kmax + 1)
        xs = xs[hyperbolic_distance_array(xs, y, 0.0, 1.0, kappa) < radius]
        rows.append((y, xs))
    offsets = np.cumsum([0] + [len(xs) for _, xs in rows])
    edges = []
    for j, (y, xs) in enumerate(rows):
        if len(xs) == 0:
            continue
        ids = offsets[j] + np.arange(len(xs))
        for step in (1, 2):
            if len(xs) > step:
                L = hyperbolic_distance_array(xs[:-step], y, xs[step:], y, kappa)
                edges.append(np.column_stack([ids[:-step], ids[step:], L]))
        for dj, reach in ((1, 2.5), (2, 3.5)):
            if j + dj >= len(rows):
                continue
            y2, xs2 = rows[j + dj]
            if len(xs2) == 0:
                continue
            ids2 = offsets[j + dj] + np.arange(len(xs2))
            span = reach * h * y2
            lo = np.searchsorted(xs2, xs - span)
            hi = np.searchsorted(xs2, xs + span, side="right")
            for a_, l_, r_ in zip(range(len(xs)), lo, hi):
                if r_ > l_:
                    L = hyperbolic_distance_array(xs[a_], y, xs2[l_:r_], y2, kappa)
                    edges.append(np.column_stack([np.full(r_ - l_, ids[a_]), ids2[l_:r_], L]))
    E = np.vstack(edges)
    pts = np.vstack([np.column_stack([xs, np.full(len(xs), y)]) for y, xs in rows])
    w = np.full(len(pts), h * h / kappa ** 2)
    return FiniteMetricMeasureSpace.from_edges(len(pts), E, w, coords=pts)


def tube_mesh_space(length: int, circumference: int, h: float = 1.0) -> FiniteMetricMeasureSpace:
    """Cylinder grid graph (length x circumference) with 8-neighbour edges."""
    L, C = length, circumference
    idx = np.arange(L * C).reshape(L, C)
    edges = []
    for i in range(L):
        for j in range(C):
            a = idx[i, j]
            edges.append((a, idx[i, (j + 1) % C], h))
            if i + 1 < L:
                edges.append((a, idx[i + 1, j], h))
                edges.append((a, idx[i + 1, (j + 1) % C], h * math.sqrt(2)))
                edges.append((a, idx[i + 1, (j - 1) % C], h * math.sqrt(2)))
    coords = np.column_stack([np.repeat(np.arange(L), C), np.tile(np.arange(C), L)]) * h
    return FiniteMetricMeasureSpace.from_edges(L * C, edges, np.full(L * C, h * h), coords=coords)


def perturbed_copy(space: FiniteMetricMeasureSpace, weight_jitter: float = 0.2,
                   distance_jitter: float = 0.1, seed: int = 0) -> FiniteMetricMeasureSpace:
    """Same points, weights scaled by 1 +- weight_jitter, distances d + u_x + u_y.

    With u in [0, distance_jitter/2] the triangle inequality is preserved and
    the identity map distorts distances by at most distance_jitter.
    """
    rng = np.random.default_rng(seed)
    w = space.weight * (1 + weight_jitter * rng.uniform(-1, 1, space.n))
    u = rng.uniform(0, distance_jitter / 2, space.n)
    # u_x + u_y first: float addition is commutative but not associative
    D = space.distance + (u[:, None] + u[None, :])
    np.fill_diagonal(D, 0.0)
    return FiniteMetricMeasureSpace(D, w, geodesic=False, check=False, coords=space.coords)


# ----------------------------------------------------------------------------
# discretisations

@dataclass(frozen=True)
class Discretisation:
    eta: float
    net: np.ndarray
    covering_radius: float
    separation: float

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["point_id"])
            for z in self.net:
                w.writerow([int(z)])


def _greedy_net(D: np.ndarray, eta: float, order: np.ndarray, strict: bool = True) -> np.ndarray:
    """Insert points in ``order`` whose distance to the current net exceeds eta
    (is at least eta when ``strict`` is False)."""
    dmin = np.full(D.shape[0], math.inf)
    net = []
    for x in order:
        if (dmin[x] > eta) if strict else (dmin[x] >= eta):
            net.append(int(x))
            dmin = np.minimum(dmin, D[x])
    return np.array(net, dtype=int)


def _net_stats(D: np.ndarray, net: np.ndarray) -> tuple[float, float]:
    cover = float(D[:, net].min(axis=1).max())
    if len(net) > 1:
        sub = D[np.ix_(net, net)] + np.diag(np.full(len(net), math.inf))
        sep = float(sub.min())
    else:
        sep = math.inf
    return cover, sep


def build_discretisation(space: FiniteMetricMeasureSpace, eta: float, seed: int = 0) -> Discretisation:
    """Maximal eta-separated net by greedy insertion in a seeded random order."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    order = np.random.default_rng(seed).permutation(space.n)
    net = np.sort(_greedy_net(space.distance, eta, order))
    cover, sep = _net_stats(space.distance, net)
    return Discretisation(eta, net, cover, sep)


def overlap_number(space: FiniteMetricMeasureSpace, disc: Discretisation, radius: float) -> int:
    """max over x of #{z in net : d(x, z) < radius}."""
    return int((space.distance[:, disc.net] < radius).sum(axis=1).max())


def upsilon(space: FiniteMetricMeasureSpace, disc: Discretisation, R: float) -> int:
    """sup over balls B of radius R (centred at points of the space) of the number of net points in B."""
    return overlap_number(space, disc, R)


def local_doubling(space: FiniteMetricMeasureSpace, s: float, radii: Optional[Sequence[float]] = None) -> float:
    """max of mu(B_2r)/mu(B_r) over points and sampled radii r <= s."""
    if radii is None:
        d = np.unique(space.distance)
        d = d[(d > 0) & (d <= s)]
        radii = np.unique(np.concatenate([d, np.nextafter(d, math.inf), [s]]))
    best = 1.0
    for r in radii:
        best = max(best, float(np.max(space.ball_measures(2 * r) / space.ball_measures(r))))
    return best


def dilation_constant(space: FiniteMetricMeasureSpace, delta: float, radii: Sequence[float]) -> float:
    """gamma_delta = max of mu(B_{R+delta})/mu(B_R) over points and the given radii."""
    return max(float(np.max(space.ball_measures(R + delta) / space.ball_measures(R))) for R in radii)


@dataclass(frozen=True)
class BallSizeStats:
    v: float
    V: float
    ubsc: bool
    doubling_bound_holds: bool
    D1: float
    upsilon_1R: int


def ball_size_stats(space: FiniteMetricMeasureSpace, R: float, seed: int = 0) -> BallSizeStats:
    """(v(R), V(R)) with the uniform ball size flag and the check V(R) <= D_1 V(1) Upsilon_{1,R}."""
    m = space.ball_measures(R)
    m1 = space.ball_measures(1.0)
    v, V = float(m.min()), float(m.max())
    ubsc = bool(m1.min() > 0 and np.isfinite(m1.max()))
    disc = build_discretisation(space, 1.0, seed)
    D1 = local_doubling(space, 1.0)
    ups = upsilon(space, disc, R)
    holds = V <= D1 * float(m1.max()) * ups * (1 + 1e-12)
    return BallSizeStats(v, V, ubsc, bool(holds), D1, ups)


# ----------------------------------------------------------------------------
# strict rough isometries

@dataclass
class QuasiIsometry:
    X: FiniteMetricMeasureSpace
    Xp: FiniteMetricMeasureSpace
    map: np.ndarray
    K: float
    beta: float
    Gamma0: float = math.nan
    Gamma1: float = math.nan

    @property
    def kappa(self) -> float:
        return max(self.K, self.beta + 2)

    @property
    def R0(self) -> float:
        return 6 * (2 * self.kappa + self.beta) + 1


def fit_quasi_isometry_params(phi, X: FiniteMetricMeasureSpace, Xp: FiniteMetricMeasureSpace) -> QuasiIsometry:
    """beta = max |d(x,y) - d'(phi x, phi y)|, K = max distance from X' to phi(X)."""
    phi = np.asarray(phi, dtype=int)
    if len(phi) != X.n:
        raise ValueError("map must be defined on every point of X")
    Dp = Xp.distance[np.ix_(phi, phi)]
    beta = float(np.max(np.abs(X.distance - Dp)))
    K = float(Xp.distance[:, np.unique(phi)].min(axis=1).max())
    return QuasiIsometry(X, Xp, phi, K, beta)


def admissible_radii(qi: QuasiIsometry, n: int = 6, margin: float = 0.0) -> np.ndarray:
    """Radii in [R0, R_max] for which balls are proper subsets of both spaces."""
    R_max = min(qi.X.diameter(), qi.Xp.diameter()) / 2 - margin
    if R_max <= qi.R0:
        raise RangeError(f"no admissible radius: need half-diameter > {qi.R0 + margin:.6g}, "
                         f"have {min(qi.X.diameter(), qi.Xp.diameter()) / 2:.6g}")
    return np.linspace(qi.R0, R_max, n)


def volume_comparison(qi: QuasiIsometry, R: float) -> tuple[float, float]:
    """min and max over x of mu'(B_R(phi x)) / mu(B_R(x))."""
    if R < qi.R0:
        raise RangeError(f"R = {R} is below R0 = {qi.R0}")
    num = qi.Xp.ball_measures(R)[qi.map]
    den = qi.X.ball_measures(R)
    ratio = num / den
    return float(ratio.min()), float(ratio.max())


# ----------------------------------------------------------------------------
# transfer operator

@dataclass
class Transfer:
    EF: SampledField
    F: np.ndarray
    net: np.ndarray
    net_prime: np.ndarray
    omega: int
    omega_prime: int
    Psi: np.ndarray


def _transfer_nets(qi: QuasiIsometry, seed: int = 0):
    kap = qi.kappa
    image = np.unique(qi.map)
    order = np.random.default_rng(seed).permutation(image)
    # maximal subset of phi(X) with pairwise distances >= kappa
    net_p = np.sort(_greedy_net(qi.Xp.distance, kap, order, strict=False))
    pre = {}
    for x, xp in enumerate(qi.map):
        pre.setdefault(int(xp), x)
    net = np.array([pre[int(zp)] for zp in net_p], dtype=int)
    return net, net_p


def transfer_field(qi: QuasiIsometry, f: SampledField, seed: int = 0) -> Transfer:
    """EF = omega * sum_l F(l) psi_l with F = (pi_{2 kappa} f) o phi on the net."""
    kap, beta = qi.kappa, qi.beta
    net, net_p = _transfer_nets(qi, seed)
    absf = np.abs(f.values) * qi.Xp.weight
    F = np.array([math.fsum(absf[qi.Xp.distance[zp] < 2 * kap]) for zp in net_p])
    cover = qi.X.distance[:, net] < 2 * kap + beta  # points x nets
    Psi = cover.sum(axis=1).astype(float)
    if np.any(Psi < 1):
        raise RangeError("balls of radius 2 kappa + beta around the net do not cover X")
    omega = int(Psi.max())
    omega_p = int((qi.Xp.distance[:, net_p] < 2 * kap).sum(axis=1).max())
    EF = omega * (cover @ F) / Psi
    return Transfer(SampledField(np.arange(qi.X.n), EF, qi.X.weight), F, net, net_p, omega, omega_p, Psi)


@dataclass
class ComparisonReport:
    holds: bool
    worst_slack: float
    sigma: float
    gamma: float
    Gamma0: float
    v_X: float
    omega: int
    ef_dominates_f: bool
    l1_bound_holds: bool
    l1_lhs: float
    l1_rhs: float
    tested_points: int

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, indent=2, default=float)


def _ball_steps(space: FiniteMetricMeasureSpace, x: int):
    d = space.distance[x]
    order = np.argsort(d, kind="stable")
    return d[order], np.concatenate([[0.0], np.cumsum(space.weight[order])])


def _ratio_extreme(top: FiniteMetricMeasureSpace, top_pts, bottom: FiniteMetricMeasureSpace,
                   r_min: float, shift: float, reduce) -> float:
    """Extreme over x and over every R > r_min of mu_top(B_{R+shift}(top_pts[x])) / mu_bottom(B_R(x)).

    Both measures are step functions of R, so evaluating at every jump and
    just after it visits all values of the ratio.
    """
    best = []
    for x in range(bottom.n):
        dt, ct = _ball_steps(top, int(top_pts[x]))
        db, cb = _ball_steps(bottom, x)
        jumps = np.concatenate([dt - shift, db])
        jumps = np.concatenate([jumps, np.nextafter(jumps, math.inf), [np.nextafter(r_min, math.inf)]])
        R = np.unique(jumps[jumps > r_min])
        num = ct[np.searchsorted(dt, R + shift, side="left")]
        den = cb[np.searchsorted(db, R, side="left")]
        best.append(reduce(num / den))
    return float(reduce(best))


def verify_maximal_comparison(qi: QuasiIsometry, f: SampledField, R_grid: Sequence[float],
                              seed: int = 0) -> ComparisonReport:
    """Check M_{R0+2k} f(phi x) <= sigma M_{R0+6k+2b}(EF)(x) at every x.

    Gamma0 and gamma_{4k+2b} are measured over every radius above R0 + 2k,
    v_X(2k+b) and the overlap number directly; ``R_grid`` only has to reach
    into the admissible range.
    """
    kap, beta = qi.kappa, qi.beta
    R_grid = np.asarray(R_grid, dtype=float)
    lo_p = qi.R0 + 2 * kap
    lo = qi.R0 + 6 * kap + 2 * beta
    R_grid = R_grid[R_grid > lo_p]
    if len(R_grid) == 0 or lo_p >= qi.Xp.diameter():
        raise RangeError(f"need radii above R0 + 2 kappa = {lo_p:.6g} inside the space")
    tr = transfer_field(qi, f, seed)
    Gamma0 = _ratio_extreme(qi.Xp, qi.map, qi.X, lo_p, 0.0, np.min)
    gamma = _ratio_extreme(qi.X, np.arange(qi.X.n), qi.X, lo_p, 4 * kap + 2 * beta, np.max)
    v_X = float(qi.X.ball_measures(2 * kap + beta).min())
    sigma = gamma / Gamma0 * tr.omega ** 2 / v_X
    lhs = centred_maximal(f, qi.Xp, RadiusWindow(lo_p)).values.values[qi.map]
    rhs = centred_maximal(tr.EF, qi.X, RadiusWindow(lo)).values.values
    slack = sigma * rhs - lhs
    dominates = bool(np.all(tr.EF.values[tr.net] >= tr.F * (1 - 1e-12)))
    l1_lhs = tr.EF.integral()
    VX = float(qi.X.ball_measures(2 * kap + beta).max())
    l1_rhs = tr.omega * VX * tr.omega_prime * f.integral()
    return ComparisonReport(bool(np.all(slack >= -1e-12 * np.maximum(1, lhs))), float(slack.min()),
                            sigma, gamma, Gamma0, v_X, tr.omega, dominates,
                            bool(l1_lhs <= l1_rhs * (1 + 1e-12)), l1_lhs, l1_rhs, int(qi.X.n))
