"""Ball and region measures, distribution functions and Lorentz quasi-norms."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .geodesy import (DEFAULT_H, DistanceField, DistanceResult, HalfPlaneChart, HalfPlanePoint,
                      RevolutionChart, RevolutionPoint)
from .geometry_profiles import (ConformalProfile, ConnectedSumProfile, SpaceFormParams,
                                _log_space_form_volume)


# ----------------------------------------------------------------------------
# sampled fields

@dataclass(frozen=True)
class SampledField:
    """Atoms (id, value, weight); the weight is the measure of the atom's cell."""
    ids: np.ndarray
    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids)
        values = np.asarray(self.values, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if not (len(ids) == len(values) == len(weights)):
            raise ValueError("ids, values and weights must have equal length")
        if np.any(~(weights > 0)):
            raise ValueError("weights must be positive")
        if np.any(~np.isfinite(values)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_arrays(cls, values, weights, ids=None) -> "SampledField":
        values = np.asarray(values, dtype=float)
        if ids is None:
            ids = np.arange(len(values))
        return cls(np.asarray(ids), values, np.asarray(weights, dtype=float))

    def __len__(self) -> int:
        return len(self.values)

    def with_values(self, values) -> "SampledField":
        return SampledField(self.ids, np.asarray(values, dtype=float), self.weights)

    def scaled(self, c: float) -> "SampledField":
        return self.with_values(c * self.values)

    @property
    def total_weight(self) -> float:
        return math.fsum(self.weights)

    def integral(self) -> float:
        return math.fsum(np.abs(self.values) * self.weights)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["point_id", "value", "weight"])
            for i, v, wt in zip(self.ids, self.values, self.weights):
                w.writerow([i, f"{v:.17g}", f"{wt:.17g}"])

    @classmethod
    def from_csv(cls, path: str) -> "SampledField":
        ids, vals, wts = [], [], []
        with open(path, newline="") as fh:
            r = csv.DictReader(fh)
            for row in r:
                ids.append(row["point_id"])
                vals.append(float(row["value"]))
                wts.append(float(row["weight"]))
        try:
            ids_arr = np.array([int(i) for i in ids])
        except ValueError:
            ids_arr = np.array(ids)
        return cls(ids_arr, np.array(vals), np.array(wts))


@dataclass(frozen=True)
class LorentzNorm:
    p: float
    r: float
    value: float
    divergent: bool = False


# ----------------------------------------------------------------------------
# volumes

def space_form_ball_volume(params: SpaceFormParams, R: float) -> float:
    """Measure of a ball of radius R in the space form of curvature -kappa^2."""
    if R < 0:
        raise ValueError("R must be nonnegative")
    if R == 0:
        return 0.0
    return math.exp(_log_space_form_volume(params.kappa, params.m, R))


def _chart_and_row(space, center):
    if isinstance(space, ConformalProfile):
        chart = HalfPlaneChart(space)
        if not isinstance(center, HalfPlanePoint):
            center = HalfPlanePoint(*center)
        return chart, float(chart.s_of_y(center.y))
    if isinstance(space, ConnectedSumProfile):
        chart = RevolutionChart.from_profile(space)
    elif isinstance(space, RevolutionChart):
        chart = space
    else:
        raise TypeError(f"unsupported space {type(space).__name__}")
    t = center.t if isinstance(center, RevolutionPoint) else float(np.atleast_1d(center)[0])
    return chart, float(t)


def ball_volume_numeric(space, center, R: float, h: float = DEFAULT_H) -> DistanceResult:
    """Measure of B_R(center) by quadrature of the marching field's ball rows.

    The error estimate compares against the finer of the two marching levels.
    """
    chart, s0 = _chart_and_row(space, center)
    f = DistanceField(chart, s0, R, h=h)
    return f.ball_volume(R)


# ----------------------------------------------------------------------------
# regions

@dataclass(frozen=True)
class Rectangle:
    """(x0, x1) x (y0, y1) in the half plane."""
    x0: float
    x1: float
    y0: float
    y1: float

    def contains(self, x, y):
        return (x > self.x0) & (x < self.x1) & (y > self.y0) & (y < self.y1)


@dataclass(frozen=True)
class Annulus:
    """Points of a revolution surface with t0 <= t <= t1 (t is the signed meridian coordinate)."""
    t0: float
    t1: float


@dataclass(frozen=True)
class CellRegion:
    """Half-plane region given by a vectorised predicate and a bounding box."""
    predicate: Callable
    x_range: tuple
    y_range: tuple
    n: int = 800


def _psi2_integral(profile: ConformalProfile, y0: float, y1: float) -> float:
    # substitute y = e^u so the integrand y Psi^2 stays well scaled
    g = lambda u: math.exp(u) * float(profile.psi(math.exp(u))) ** 2
    val, _ = integrate.quad(g, math.log(y0), math.log(y1), epsabs=0, epsrel=1e-12, limit=200)
    return val


def region_measure(space, region) -> float:
    """Measure of a rectangle, annulus or predicate region."""
    if isinstance(region, Rectangle):
        if not isinstance(space, ConformalProfile):
            raise TypeError("rectangles live in the half plane")
        if region.x1 <= region.x0 or region.y1 <= region.y0:
            return 0.0
        return (region.x1 - region.x0) * _psi2_integral(space, region.y0, region.y1)
    if isinstance(region, Annulus):
        if region.t1 <= region.t0:
            return 0.0
        if isinstance(space, SpaceFormParams):
            k, m = space.kappa, space.m
            omega = 2 * math.pi ** (m / 2) / math.gamma(m / 2)
            if m == 2:
                return omega * (math.cosh(k * region.t1) - math.cosh(k * region.t0)) / k ** 2
            g = lambda t: (math.sinh(k * t) / k) ** (m - 1)
            return omega * integrate.quad(g, region.t0, region.t1, epsrel=1e-12)[0]
        sigma = space.sigma if isinstance(space, (ConnectedSumProfile, RevolutionChart)) else space
        g = lambda t: float(sigma(t))
        pts = [p for p in (-1.0, 0.0, 1.0) if region.t0 < p < region.t1]
        val = integrate.quad(g, region.t0, region.t1, points=pts or None, epsrel=1e-12, limit=200)[0]
        return 2 * math.pi * val
    if isinstance(region, CellRegion):
        if not isinstance(space, ConformalProfile):
            raise TypeError("cell regions are supported on the half plane")
        x0, x1 = region.x_range
        u0, u1 = math.log(region.y_range[0]), math.log(region.y_range[1])
        n = region.n
        hx, hu = (x1 - x0) / n, (u1 - u0) / n
        xs = x0 + hx * (np.arange(n) + 0.5)
        us = u0 + hu * (np.arange(n) + 0.5)
        ys = np.exp(us)
        dens = ys * np.asarray(space.psi(ys)) ** 2 * hx * hu
        X, Y = np.meshgrid(xs, ys, indexing="xy")
        inside = region.predicate(X, Y)
        return math.fsum((inside * dens[:, None]).ravel())
    raise TypeError(f"unsupported region {type(region).__name__}")


# ----------------------------------------------------------------------------
# distribution function and Lorentz norms

def level_set_measure(field: SampledField, alpha: float) -> float:
    """mu{|f| > alpha}."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return math.fsum(field.weights[np.abs(field.values) > alpha])


def distribution_steps(field: SampledField):
    """Distinct nonzero levels a_1 > ... > a_k of |f| with W_j = mu{|f| >= a_j}.

    On [a_{j+1}, a_j) the distribution function equals W_j.
    """
    v = np.abs(field.values)
    keep = v > 0
    v, w = v[keep], field.weights[keep]
    if len(v) == 0:
        return np.zeros(0), np.zeros(0)
    order = np.argsort(-v, kind="stable")
    v, w = v[order], w[order]
    levels, start = np.unique(-v, return_index=True)
    levels = -levels
    # fixed-order cumulative sums keep the output bit-stable
    cum = np.array([math.fsum(w[:s]) for s in np.append(start[1:], len(v))])
    return levels, cum


def lorentz_norm(field: SampledField, p: float, r: float) -> LorentzNorm:
    """L^{p,r} quasi-norm computed exactly from the step distribution function."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if r < 1:
        raise ValueError("r must be >= 1")
    a, W = distribution_steps(field)
    if len(a) == 0:
        return LorentzNorm(p, r, 0.0)
    if math.isinf(r):
        return LorentzNorm(p, r, float(np.max(a * W ** (1.0 / p))))
    nxt = np.append(a[1:], 0.0)
    terms = W ** (r / p) * (a ** r - nxt ** r)
    total = math.fsum(terms)
    if not math.isfinite(total):
        return LorentzNorm(p, r, math.inf, divergent=True)
    return LorentzNorm(p, r, total ** (1.0 / r))


def lp_norm(field: SampledField, p: float) -> float:
    if math.isinf(p):
        return float(np.max(np.abs(field.values))) if len(field) else 0.0
    return math.fsum(np.abs(field.values) ** p * field.weights) ** (1.0 / p)
