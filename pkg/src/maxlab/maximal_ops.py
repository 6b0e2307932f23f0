"""Centred, uncentred and omega maximal operators, weak-type ratios, exponent fits.

Finite spaces are any object with ``distance`` (n x n) and ``weight`` (n)
arrays.  There the supremum over radii is exact: an open ball B_r(x) only
changes when r crosses a distance from x, so it suffices to visit the
distinct prefix sets of the sorted distances.  Continuum spaces are handled
by a geometric radius grid (``grid_maximal``) with a reported doubling
correction.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .measure_lorentz import SampledField, lorentz_norm, lp_norm


class DegenerateInput(ValueError):
    pass


class ZeroNorm(ValueError):
    pass


@dataclass(frozen=True)
class RadiusWindow:
    """Radii r with r_min < r <= r_max (r_min <= r when ``include_min``)."""
    r_min: float
    r_max: float = math.inf
    include_min: bool = False
    ratio: float = 1.05

    def __post_init__(self):
        if not (self.r_min >= 0 and self.r_max > self.r_min):
            raise ValueError("need 0 <= r_min < r_max")
        if not (1 < self.ratio <= 1.05):
            raise ValueError("grid ratio must lie in (1, 1.05]")

    def contains(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        lo = r >= self.r_min if self.include_min else r > self.r_min
        return lo & (r <= self.r_max) & (r > 0)

    def grid(self, r_cap: Optional[float] = None, r_floor: float = 1e-3) -> np.ndarray:
        """Geometric grid covering the window; an infinite r_max is truncated at ``r_cap``."""
        hi = self.r_max if math.isfinite(self.r_max) else r_cap
        if hi is None:
            raise ValueError("an unbounded window needs r_cap")
        lo = max(self.r_min, r_floor)
        n = max(1, int(math.ceil(math.log(hi / lo) / math.log(self.ratio))))
        g = lo * (hi / lo) ** (np.arange(n + 1) / n)
        g[-1] = hi
        if not self.include_min:
            g = g[g > self.r_min]
        return g

    def describe(self) -> str:
        left = "[" if self.include_min else "("
        return f"{left}{self.r_min!r}, {self.r_max!r}]"


@dataclass
class MaximalReport:
    values: SampledField
    operator: str
    window: RadiusWindow
    argmax_radius: np.ndarray
    correction: float = 1.0
    node_restricted: bool = False
    extra: dict = field(default_factory=dict)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["point_id", "value", "argmax_radius"])
            for i, v, r in zip(self.values.ids, self.values.values, self.argmax_radius):
                w.writerow([i, f"{v:.17g}", f"{r:.17g}"])

    def summary(self, weak_ratios: Optional[dict] = None) -> dict:
        return {"operator": self.operator, "window": self.window.describe(),
                "correction_factor": self.correction, "node_restricted": self.node_restricted,
                "weak_type_ratios": weak_ratios or {}, **self.extra}

    def summary_json(self, weak_ratios: Optional[dict] = None) -> str:
        return json.dumps(self.summary(weak_ratios), sort_keys=True, indent=2)


# ----------------------------------------------------------------------------
# exact operators on finite spaces

def _realised(delta: np.ndarray, window: RadiusWindow) -> np.ndarray:
    """For distinct sorted distances delta_k, whether some radius in the window
    gives the ball {d <= delta_k}, i.e. r in (delta_k, delta_{k+1}]."""
    upper = np.append(delta[1:], math.inf)
    U = np.minimum(upper, window.r_max)
    lo = window.r_min
    if window.include_min:
        return np.where(lo > delta, lo <= U, delta < U)
    return np.maximum(delta, lo) < U


def _as_scaled_ints(x: np.ndarray):
    """Integers I and a shift K with x = I / 2**K exactly (x finite, >= 0)."""
    ratios = [float(v).as_integer_ratio() for v in x]
    K = max((d.bit_length() - 1 for _, d in ratios), default=0)
    out = np.empty(len(ratios), dtype=object)
    for i, (num, den) in enumerate(ratios):
        out[i] = num << (K - (den.bit_length() - 1))
    return out, K


def _rounded_prefix_sums(ints: np.ndarray, K: int, order: np.ndarray, last: np.ndarray) -> np.ndarray:
    """Correctly rounded sums of the sorted prefixes ending at ``last``."""
    cum = np.cumsum(ints[order])[last]
    scale = 1 << K
    # int / int true division in Python is correctly rounded
    return np.array([c / scale for c in cum], dtype=float)


def _prefix_tables(space, x: int, absf: np.ndarray, power: float, exact=None):
    """Distinct sorted distances from x and the ball averages for each.

    Ball sums are correctly rounded (exact integer accumulation), so the
    result does not depend on the order in which atoms are visited.
    """
    d = np.asarray(space.distance[x], dtype=float)
    w = np.asarray(space.weight, dtype=float)
    if exact is None:
        exact = (_as_scaled_ints(absf * w), _as_scaled_ints(w))
    (num_i, kn), (den_i, kd) = exact
    order = np.argsort(d, kind="stable")
    ds = d[order]
    delta, first = np.unique(ds, return_index=True)
    last = np.append(first[1:], len(ds)) - 1
    num_k = _rounded_prefix_sums(num_i, kn, order, last)
    den_k = _rounded_prefix_sums(den_i, kd, order, last)
    if power != 1.0:
        den_k = np.array([math.pow(v, power) for v in den_k])
    return delta, num_k / den_k


def _check_field(f: SampledField, space) -> np.ndarray:
    if len(f) != len(space.weight):
        raise ValueError("field and space sizes differ")
    return np.abs(f.values)


def _centred(f: SampledField, space, window: RadiusWindow, power: float, tag: str) -> MaximalReport:
    absf = _check_field(f, space)
    n = len(absf)
    vals = np.zeros(n)
    arg = np.full(n, math.nan)
    w = np.asarray(space.weight, dtype=float)
    exact = (_as_scaled_ints(absf * w), _as_scaled_ints(w))
    for x in range(n):
        delta, avg = _prefix_tables(space, x, absf, power, exact)
        ok = _realised(delta, window)
        if not ok.any():
            continue
        cand = np.where(ok, avg, -math.inf)
        k = int(np.argmax(cand))
        vals[x] = cand[k]
        upper = delta[k + 1] if k + 1 < len(delta) else math.inf
        arg[x] = min(upper, window.r_max)
    out = SampledField(f.ids, vals, space.weight)
    return MaximalReport(out, tag, window, arg)


def centred_maximal(f: SampledField, space, window: RadiusWindow) -> MaximalReport:
    """sup over r in the window of the average of |f| over B_r(x), exactly.

    The reported radius is the largest radius of the first ball composition
    attaining the maximum.
    """
    return _centred(f, space, window, 1.0, "centred")


def omega_maximal(f: SampledField, space, omega: float, r_min: float = 1.0) -> MaximalReport:
    """sup over R >= r_min of |B_R(x)|^(-1/omega) times the integral of |f| over B_R(x)."""
    if not omega > 1:
        raise ValueError("omega must exceed 1")
    window = RadiusWindow(r_min, math.inf, include_min=True)
    return _centred(f, space, window, 1.0 / omega, f"omega({omega!r})")


def uncentred_maximal(f: SampledField, space, window: RadiusWindow) -> MaximalReport:
    """sup of averages over balls B_r(c) containing x, centres at the space's points."""
    absf = _check_field(f, space)
    n = len(absf)
    D = np.asarray(space.distance, dtype=float)
    vals = np.zeros(n)
    arg = np.full(n, math.nan)
    w = np.asarray(space.weight, dtype=float)
    exact = (_as_scaled_ints(absf * w), _as_scaled_ints(w))
    for c in range(n):
        delta, avg = _prefix_tables(space, c, absf, 1.0, exact)
        ok = _realised(delta, window)
        if not ok.any():
            continue
        cand = np.where(ok, avg, -math.inf)
        # suffix maxima: the balls {d <= delta_k} with k >= rank(x) contain x
        rev = cand[::-1]
        sufmax = np.maximum.accumulate(rev)[::-1]
        rank = np.searchsorted(delta, D[c])
        best = sufmax[rank]
        better = best > vals
        if better.any():
            upper = np.append(delta[1:], math.inf)
            # first composition (from rank on) reaching the suffix maximum
            for x in np.nonzero(better)[0]:
                k = rank[x] + int(np.argmax(cand[rank[x]:] == best[x]))
                arg[x] = min(upper[k], window.r_max)
            vals[better] = best[better]
    out = SampledField(f.ids, vals, space.weight)
    return MaximalReport(out, "uncentred", window, arg, node_restricted=True)


def brute_force_maximal(f: SampledField, space, window: RadiusWindow, mode: str = "centred",
                        omega: Optional[float] = None) -> np.ndarray:
    """Reference evaluation: every centre, every candidate radius, direct membership tests."""
    absf = np.abs(f.values)
    w = np.asarray(space.weight, dtype=float)
    D = np.asarray(space.distance, dtype=float)
    n = len(w)
    cands = set(np.unique(D).tolist())
    cands.add(window.r_max if math.isfinite(window.r_max) else float(D.max()) * 2 + 1)
    cands.add(window.r_min if window.include_min else float(np.nextafter(window.r_min, math.inf)))
    radii = [r for r in sorted(cands) if window.contains(r)]
    power = 1.0 / omega if omega is not None else 1.0
    out = np.zeros(n)
    for c in range(n):
        for r in radii:
            ball = D[c] < r
            den = math.fsum(w[ball])
            if den == 0:
                continue
            avg = math.fsum(absf[ball] * w[ball]) / math.pow(den, power)
            if mode == "centred":
                out[c] = max(out[c], avg)
            else:
                out[ball] = np.maximum(out[ball], avg)
    return out


# ----------------------------------------------------------------------------
# grid operators on continuum spaces

def doubling_correction(radii: np.ndarray, volumes: np.ndarray) -> float:
    """max of |B_{r_{k+1}}| / |B_{r_k}| over consecutive grid radii.

    Between grid radii the true average is at most this factor above the
    grid value, so the reported maximum is a one-sided approximation.
    """
    volumes = np.asarray(volumes, dtype=float)
    if volumes.ndim == 1:
        volumes = volumes[None, :]
    if volumes.shape[1] < 2:
        return 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        q = volumes[:, 1:] / volumes[:, :-1]
    q = q[np.isfinite(q)]
    return float(q.max()) if len(q) else 1.0


def grid_maximal(ids, weights, radii, integrals, volumes, window: RadiusWindow,
                 operator: str = "centred", omega: Optional[float] = None,
                 node_restricted: bool = False) -> MaximalReport:
    """Grid supremum from precomputed ball integrals and volumes (points x radii)."""
    radii = np.asarray(radii, dtype=float)
    integrals = np.atleast_2d(np.asarray(integrals, dtype=float))
    volumes = np.atleast_2d(np.asarray(volumes, dtype=float))
    keep = window.contains(radii)
    if not keep.any():
        raise ValueError("no grid radius lies in the window")
    radii, integrals, volumes = radii[keep], integrals[:, keep], volumes[:, keep]
    den = volumes if omega is None else volumes ** (1.0 / omega)
    avg = integrals / den
    k = np.argmax(avg, axis=1)
    vals = avg[np.arange(len(k)), k]
    tag = operator if omega is None else f"omega({omega!r})"
    corr = doubling_correction(radii, volumes)
    if omega is not None:
        corr = corr ** (1.0 - 1.0 / omega)
    out = SampledField(np.asarray(ids), vals, np.asarray(weights, dtype=float))
    return MaximalReport(out, tag, window, radii[k], correction=corr, node_restricted=node_restricted)


# ----------------------------------------------------------------------------
# statistics

def weak_type_ratio(report: MaximalReport, f: SampledField, p: float, mode: str = "weak") -> float:
    """sup_alpha alpha mu{Mf > alpha}^(1/p) divided by ||f||_p (weak) or ||f||_{p,1} (restricted)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if mode == "weak":
        denom = lp_norm(f, p)
    elif mode == "restricted":
        denom = lorentz_norm(f, p, 1).value
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if denom == 0:
        raise ZeroNorm("f vanishes identically")
    return lorentz_norm(report.values, p, math.inf).value / denom


def exponent_fit(series: Sequence[tuple[float, float]], mode: str = "loglog",
                 q: Optional[float] = None) -> tuple[float, float]:
    """Least-squares slope and r^2.

    Modes: ``loglog`` (log value vs log t), ``linear`` (log value vs t),
    ``log_q`` (log_q value vs t; needs q).
    """
    if len(series) < 4:
        raise DegenerateInput("need at least 4 points")
    t = np.array([s[0] for s in series], dtype=float)
    v = np.array([s[1] for s in series], dtype=float)
    if np.any(v <= 0):
        raise DegenerateInput("values must be positive")
    if np.all(v == v[0]):
        raise DegenerateInput("constant series")
    y = np.log(v)
    if mode == "loglog":
        x = np.log(t)
    elif mode == "linear":
        x = t
    elif mode == "log_q":
        if q is None or q <= 1:
            raise ValueError("log_q mode needs q > 1")
        x, y = t, y / math.log(q)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if np.all(x == x[0]):
        raise DegenerateInput("constant abscissa")
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2
