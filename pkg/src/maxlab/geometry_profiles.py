"""Explicit metric profiles and their curvatures.

Four families live here:

* space forms of curvature -kappa**2 (``SpaceFormParams``),
* conformal metrics Psi(y)**2 (dx**2 + dy**2) on the upper half plane
  (``ConformalProfile``),
* rotationally symmetric warped metrics dt**2 + j(t)**2 g_sphere
  (``WarpingProfile``),
* the two-leaf surface of revolution dt**2 + sigma(t)**2 dtheta**2
  (``ConnectedSumProfile``).

Every profile is immutable and can be written to and read back from a
plain ``key=value`` descriptor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import BPoly, BSpline


class ProfileError(ValueError):
    """Invalid profile parameters or an evaluation outside the domain."""


class ConvergenceError(RuntimeError):
    """Two refinement levels of a numerical derivative disagree."""


class ConstructionInfeasible(ValueError):
    """No admissible perturbation exists in the chosen bump family."""


class TailDivergence(RuntimeError):
    """The integral of 1/j over [1, inf) does not appear to converge."""


# ----------------------------------------------------------------------------
# numerical derivatives

def central_second_derivative(f: Callable[[float], float], x: float, h: float,
                              tol: float = 1e-6) -> tuple[float, float]:
    """Five-point second derivative at step h and h/2, combined by Richardson.

    Returns ``(value, error_estimate)``.  Raises ``ConvergenceError`` when the
    two levels disagree by more than ``tol`` (relative to max(1, |value|)).
    """
    def d2(step):
        f0 = f(x)
        return (-f(x + 2 * step) + 16 * f(x + step) - 30 * f0
                + 16 * f(x - step) - f(x - 2 * step)) / (12 * step * step)

    coarse = d2(h)
    fine = d2(h / 2)
    value = fine + (fine - coarse) / 15.0
    err = abs(fine - coarse)
    if err > tol * max(1.0, abs(value)):
        raise ConvergenceError(f"second derivative at {x}: levels differ by {err:.3g}")
    return value, err


def central_first_derivative(f: Callable[[float], float], x: float, h: float) -> float:
    def d1(step):
        return (-f(x + 2 * step) + 8 * f(x + step) - 8 * f(x - step) + f(x - 2 * step)) / (12 * step)

    coarse, fine = d1(h), d1(h / 2)
    return fine + (fine - coarse) / 15.0


def _fd_step(t: float) -> float:
    # 1e-5 loses ~5 digits to cancellation in a second difference; 1e-3 with
    # a fourth-order stencil keeps the truncation error near 1e-12
    return 1e-3 * max(1.0, abs(t))


# ----------------------------------------------------------------------------
# descriptors

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(_fmt(float(x)) for x in v)
    return str(v)


def to_descriptor(pairs: dict) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in pairs.items())


def parse_descriptor(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        k, _, v = line.partition("=")
        out[k.strip()] = v.strip()
    return out


# ----------------------------------------------------------------------------
# space forms

def _log_space_form_volume(kappa: float, m: int, R: float) -> float:
    """log of vol(S^{m-1}) * int_0^R (sinh(kappa t)/kappa)^{m-1} dt."""
    if R <= 0:
        return -math.inf
    log_sphere = math.log(2) + (m / 2) * math.log(math.pi) - math.lgamma(m / 2)
    x = kappa * R
    if m == 2:
        # cosh x - 1 = 2 sinh^2(x/2)
        return log_sphere + math.log(2) + 2 * _log_sinh(x / 2) - 2 * math.log(kappa)
    if m == 3:
        # int_0^x sinh^2 = (sinh(2x) - 2x)/4
        if x < 1e-3:
            inner = math.log(x ** 3 / 3 * (1 + x * x / 5))
        elif x < 300:
            inner = math.log((math.sinh(2 * x) - 2 * x) / 4)
        else:
            inner = 2 * x - math.log(8) + math.log1p(-4 * x * math.exp(-2 * x))
        return log_sphere + inner - 3 * math.log(kappa)
    # generic dimension: integrate e^{-(m-1)x} sinh(s)^{m-1} to stay finite
    shift = (m - 1) * x

    def g(s):
        return math.exp((m - 1) * (_log_sinh(s) - x)) if s > 0 else 0.0

    val, _ = integrate.quad(g, 0.0, x, limit=200, epsabs=0, epsrel=1e-12)
    return log_sphere + math.log(val) + shift - m * math.log(kappa)


def _log_sinh(x: float) -> float:
    if x > 20:
        return x - math.log(2) + math.log1p(-math.exp(-2 * x))
    return math.log(math.sinh(x))


@dataclass(frozen=True)
class SpaceFormParams:
    """Space form of curvature -kappa**2 in dimension m."""
    kappa: float
    m: int
    eta1: float = field(init=False)
    eta2: float = field(init=False)

    def __post_init__(self):
        if not self.kappa > 0:
            raise ProfileError("kappa must be positive")
        if int(self.m) != self.m or self.m < 2:
            raise ProfileError("m must be an integer >= 2")
        Rs = np.linspace(1.0, 60.0, 5901)
        logs = np.array([_log_space_form_volume(self.kappa, self.m, R) for R in Rs])
        normalised = logs - (self.m - 1) * self.kappa * Rs
        object.__setattr__(self, "eta1", float(math.exp(normalised.min())))
        object.__setattr__(self, "eta2", float(math.exp(normalised.max())))

    @property
    def q(self) -> float:
        return math.e ** (self.m - 1)

    @property
    def rho_vol(self) -> float:
        return (self.m - 1) * self.kappa / 2

    def descriptor(self) -> str:
        return to_descriptor({"variant": "space_form", "kappa": float(self.kappa), "m": self.m})


# ----------------------------------------------------------------------------
# conformal half-plane profiles

def eval_stromberg_psi(y, a: float, b: float):
    """Psi(y) = (1/y) sqrt(1/b^2 + (1/a^2 - 1/b^2)/(y + 1)); vectorised in y."""
    if not (0 < a < b):
        raise ProfileError("need 0 < a < b")
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ProfileError("y must be positive")
    c = 1 / a ** 2 - 1 / b ** 2
    out = np.sqrt(1 / b ** 2 + c / (y + 1)) / y
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ConformalProfile:
    """Metric Psi(y)^2 (dx^2 + dy^2) on the upper half plane.

    ``variant`` is ``"stromberg"`` (uses a < b) or ``"hyperbolic"`` (uses
    ``kappa``; a and b are both set to kappa for the sandwich bounds).
    """
    variant: str
    a: float
    b: float
    kappa: Optional[float] = None

    def __post_init__(self):
        if self.variant == "stromberg":
            if not (0 < self.a < self.b):
                raise ProfileError("stromberg profile needs 0 < a < b")
        elif self.variant == "hyperbolic":
            if not (self.kappa and self.kappa > 0):
                raise ProfileError("hyperbolic profile needs kappa > 0")
        else:
            raise ProfileError(f"unknown variant {self.variant!r}")

    @classmethod
    def stromberg(cls, a: float, b: float) -> "ConformalProfile":
        return cls("stromberg", float(a), float(b))

    @classmethod
    def hyperbolic(cls, kappa: float) -> "ConformalProfile":
        return cls("hyperbolic", float(kappa), float(kappa), float(kappa))

    def psi(self, y):
        if self.variant == "stromberg":
            return eval_stromberg_psi(y, self.a, self.b)
        y = np.asarray(y, dtype=float)
        out = 1.0 / (self.kappa * y)
        return float(out) if out.ndim == 0 else out

    def log_psi2(self, y: float) -> float:
        return 2.0 * math.log(self.psi(y))

    def y_psi(self, y):
        """y * Psi(y), the vertical length density in the coordinate log y."""
        y = np.asarray(y, dtype=float)
        if self.variant == "hyperbolic":
            out = np.full_like(y, 1.0 / self.kappa)
        else:
            c = 1 / self.a ** 2 - 1 / self.b ** 2
            out = np.sqrt(1 / self.b ** 2 + c / (y + 1))
        return float(out) if out.ndim == 0 else out

    def vertical_length(self, y1, y2):
        """int_{y1}^{y2} Psi(y) dy (signed); vectorised."""
        if self.variant == "hyperbolic":
            out = np.log(np.asarray(y2, dtype=float) / np.asarray(y1, dtype=float)) / self.kappa
            return float(out) if out.ndim == 0 else out
        a2, b2 = 1 / self.a ** 2, 1 / self.b ** 2
        return _stromberg_antiderivative(y2, a2, b2) - _stromberg_antiderivative(y1, a2, b2)

    def descriptor(self) -> str:
        if self.variant == "hyperbolic":
            return to_descriptor({"variant": "hyperbolic", "kappa": self.kappa})
        return to_descriptor({"variant": "stromberg", "a": self.a, "b": self.b})

    @classmethod
    def from_descriptor(cls, text: str) -> "ConformalProfile":
        d = parse_descriptor(text)
        if d["variant"] == "hyperbolic":
            return cls.hyperbolic(float(d["kappa"]))
        return cls.stromberg(float(d["a"]), float(d["b"]))


def _stromberg_antiderivative(y, A: float, B: float):
    """Antiderivative of sqrt(B + (A - B)/(y+1))/y with A = 1/a^2 > B = 1/b^2.

    Substituting w = sqrt((B y + A)/(y + 1)) makes the integrand rational in
    w.  The differences w - sqrt(B) and sqrt(A) - w are rewritten without
    cancellation so that very large and very small y stay accurate.
    """
    y = np.asarray(y, dtype=float)
    sa, sb = math.sqrt(A), math.sqrt(B)
    c = A - B
    w = np.sqrt((B * y + A) / (y + 1))
    out = (sb * np.log((w + sb) ** 2 * (y + 1) / c)
           - sa * np.log((sa + w) ** 2 * (y + 1) / (c * y)))
    return float(out) if out.ndim == 0 else out


def gaussian_curvature_halfplane(profile: ConformalProfile, y: float,
                                 h: Optional[float] = None) -> tuple[float, float]:
    """K(y) = -(1/(2 Psi^2)) d^2/dy^2 log Psi^2, by finite differences.

    Returns ``(K, error_estimate)``.
    """
    if y <= 0:
        raise ProfileError("y must be positive")
    if h is None:
        h = 1e-3 * y
    d2, err = central_second_derivative(profile.log_psi2, y, h)
    scale = -1.0 / (2.0 * profile.psi(y) ** 2)
    return scale * d2, abs(scale) * err


def stromberg_curvature_exact(y, a: float, b: float):
    """Closed form of K for the Strömberg profile (used as a cross-check)."""
    y = np.asarray(y, dtype=float)
    A, B = 1 / a ** 2, 1 / b ** 2
    c = A - B
    u = B + c / (y + 1)          # (y Psi)^2
    du = -c / (y + 1) ** 2
    d2u = 2 * c / (y + 1) ** 3
    # log Psi^2 = log u - 2 log y
    d2 = (d2u * u - du * du) / (u * u) + 2 / (y * y)
    return -d2 * y * y / (2 * u)


# ----------------------------------------------------------------------------
# warped products

@dataclass(frozen=True)
class PsiTauRecord:
    tau: float
    nu: float
    delta: float
    c_m: float
    T: float
    eps: float       # half-width of the negative spike
    A: float         # amplitude of the positive bumps


class _BumpTerm:
    """c * B((t - centre)/width) with B a cubic B-spline of height 1 on [-1, 1].

    Gives closed-form first and second antiderivatives from t = -inf.
    """
    _base = BSpline.basis_element([-1.0, -0.5, 0.0, 0.5, 1.0], extrapolate=False)
    _peak = float(_base(0.0))
    _I1 = _base.antiderivative(1)
    _I2 = _base.antiderivative(2)
    _mass = float(_I1(1.0)) / _peak       # integral over [-1, 1] of the unit-height bump
    _moment = float(_I2(1.0)) / _peak     # second antiderivative at the right end

    def __init__(self, coeff, centre, width):
        self.c, self.x0, self.w = coeff, centre, width

    def _u(self, t):
        return np.clip((np.asarray(t, dtype=float) - self.x0) / self.w, -1.0, 1.0)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        u = (t - self.x0) / self.w
        out = np.where(np.abs(u) < 1, np.nan_to_num(self._base(np.clip(u, -1, 1))), 0.0)
        return self.c * out / self._peak

    def first(self, t):
        return self.c * self.w * self._I1(self._u(t)) / self._peak

    def second(self, t):
        t = np.asarray(t, dtype=float)
        u = (t - self.x0) / self.w
        inside = self._I2(self._u(t)) / self._peak
        beyond = self._moment + self._mass * np.maximum(u - 1.0, 0.0)
        return self.c * self.w ** 2 * np.where(u > 1, beyond, inside)

    @classmethod
    def unit_mass(cls) -> float:
        return cls._mass


@dataclass(frozen=True)
class WarpingProfile:
    """Warped metric dt^2 + j(t)^2 g_{S^{m-1}} on R^m.

    ``j``, ``dj``, ``d2j`` are vectorised callables; ``dj``/``d2j`` may be
    None, in which case derivatives are taken numerically.
    """
    j: Callable
    m: int
    dj: Optional[Callable] = None
    d2j: Optional[Callable] = None
    perturbation: Optional[PsiTauRecord] = None
    label: str = "custom"
    params: tuple = ()

    @classmethod
    def hyperbolic(cls, a: float = 1.0, m: int = 2) -> "WarpingProfile":
        return cls(j=lambda t: np.sinh(a * np.asarray(t, float)) / a,
                   dj=lambda t: np.cosh(a * np.asarray(t, float)),
                   d2j=lambda t: a * np.sinh(a * np.asarray(t, float)),
                   m=m, label="hyperbolic", params=(("a", float(a)),))

    @classmethod
    def euclidean(cls, m: int = 2) -> "WarpingProfile":
        return cls(j=lambda t: np.asarray(t, float), dj=lambda t: np.ones_like(np.asarray(t, float)),
                   d2j=lambda t: np.zeros_like(np.asarray(t, float)), m=m, label="euclidean")

    def derivatives(self, t, numeric: bool = False):
        """Return (j, j', j'') at t."""
        t = float(t)
        jv = float(self.j(t))
        if self.dj is not None and self.d2j is not None and not numeric:
            return jv, float(self.dj(t)), float(self.d2j(t))
        f = lambda s: float(self.j(s))
        h = _fd_step(t)
        if t - 2 * h <= 0:
            h = t / 4
        d1 = central_first_derivative(f, t, h)
        d2, _ = central_second_derivative(f, t, h, tol=1e-4)
        return jv, d1, d2

    def descriptor(self) -> str:
        pairs = {"variant": f"warping:{self.label}", "m": self.m}
        pairs.update(dict(self.params))
        if self.perturbation is not None:
            p = self.perturbation
            pairs.update(tau=p.tau, nu=p.nu, delta=p.delta, c_m=p.c_m, T=p.T, eps=p.eps, A=p.A)
        return to_descriptor(pairs)


def model_curvatures(profile: WarpingProfile, t: float, numeric: bool = False):
    """(radial, tangential, scalar) curvature of dt^2 + j^2 g_sphere at t."""
    if t <= 0:
        raise ProfileError("t must be positive")
    j, dj, d2j = profile.derivatives(t, numeric=numeric)
    if j <= 0:
        raise ProfileError(f"j({t}) = {j} is not positive")
    m = profile.m
    radial = -d2j / j
    tangential = (1.0 - dj * dj) / (j * j)
    scalar = (m - 1) * (m - 2) * tangential - 2 * (m - 1) * d2j / j
    return radial, tangential, scalar


def build_psi_tau(tau: float, nu: float, delta: float, c_m: float, m: int) -> WarpingProfile:
    """j_tau = sinh + psi_tau with psi_tau'' = phi_tau a sum of cubic B-spline bumps.

    phi_tau(tau + s) = A (w(s - 0.6 nu) + w(s + 0.6 nu)) - T v(s / eps) where w
    has half-width 0.35 nu and v is a narrow spike of half-width eps.  Both
    have height 1, so min phi = -T at tau and max phi = A.  The zero mean on
    [tau, tau + nu] fixes A linearly; eps is set so that the L1 norm and A
    stay below delta.
    """
    if not tau > 2:
        raise ProfileError("tau must exceed 2")
    if not 0 < nu < 0.5:
        raise ProfileError("nu must lie in (0, 1/2)")
    if not 0 < delta < 1:
        raise ProfileError("delta must lie in (0, 1)")
    if int(m) != m or m < 3:
        raise ProfileError("m must be an integer >= 3")
    if not 1 < c_m < 3 * m / 8:
        raise ProfileError("c_m must lie in (1, 3m/8)")
    T = c_m * math.exp(-nu) * math.sinh(tau + nu)
    I = _BumpTerm.unit_mass()              # integral of a unit-height bump on [-1, 1]
    w_half = 0.35 * nu
    W = I * w_half                          # integral of one positive bump
    budget = 0.9 * delta * min(0.5, 2 * W)  # = T * eps * I
    eps = budget / (T * I)
    if eps >= 0.25 * nu:
        raise ConstructionInfeasible("spike would overlap the positive bumps")
    A = budget / (2 * W)
    if A > delta:
        raise ConstructionInfeasible("positive bump height exceeds delta")
    terms = [_BumpTerm(-T, tau, eps),
             _BumpTerm(A, tau - 0.6 * nu, w_half),
             _BumpTerm(A, tau + 0.6 * nu, w_half)]

    def phi(t):
        return sum(term.value(t) for term in terms)

    def dpsi(t):
        return sum(term.first(t) for term in terms)

    def psi(t):
        return sum(term.second(t) for term in terms)

    rec = PsiTauRecord(tau, nu, delta, c_m, T, eps, A)
    prof = WarpingProfile(
        j=lambda t: np.sinh(np.asarray(t, float)) + psi(t),
        dj=lambda t: np.cosh(np.asarray(t, float)) + dpsi(t),
        d2j=lambda t: np.sinh(np.asarray(t, float)) + phi(t),
        m=int(m), perturbation=rec, label="psi_tau")
    object.__setattr__(prof, "_phi", phi)
    object.__setattr__(prof, "_psi", psi)
    object.__setattr__(prof, "_dpsi", dpsi)
    return prof


def psi_tau_parts(profile: WarpingProfile):
    """(phi, psi', psi) callables of a perturbed profile."""
    return profile._phi, profile._dpsi, profile._psi


def validate_psi_tau(profile: WarpingProfile, n: int = 200001) -> dict:
    """Check the defining properties of phi_tau and psi_tau by dense sampling."""
    rec = profile.perturbation
    phi, dpsi, psi = psi_tau_parts(profile)
    lo, hi = rec.tau - rec.nu, rec.tau + rec.nu
    # dense grid with extra resolution around the spike
    t = np.union1d(np.linspace(lo, hi, n), rec.tau + np.linspace(-rec.eps, rec.eps, 2001))
    ph = phi(t)
    half = t >= rec.tau
    mean_all = integrate.trapezoid(ph, t)
    mean_half = integrate.trapezoid(ph[half], t[half])
    outside = np.concatenate([np.linspace(0, lo, 2001), np.linspace(hi, hi + 5, 2001)])
    inside = np.linspace(0, hi + 5, 40001)
    checks = {
        "even": float(np.max(np.abs(phi(rec.tau + (t - rec.tau)) - phi(rec.tau - (t - rec.tau))))),
        "mean_all": float(mean_all),
        "mean_half": float(mean_half),
        "max_phi": float(ph.max()),
        "min_phi": float(ph.min()),
        "l1": float(integrate.trapezoid(np.abs(ph), t)),
        "psi_outside": float(np.max(np.abs(psi(outside)))),
        "max_abs_psi": float(np.max(np.abs(psi(inside)))),
        "max_abs_dpsi": float(np.max(np.abs(dpsi(inside)))),
    }
    checks["ok"] = bool(
        checks["even"] < 1e-9 * rec.T
        and abs(mean_all) < 1e-6 and abs(mean_half) < 1e-6
        and checks["max_phi"] <= rec.delta
        and abs(checks["min_phi"] + rec.T) <= 1e-3 * rec.T
        and checks["l1"] <= rec.delta * (1 + 1e-6)
        and checks["psi_outside"] < 1e-9
        and checks["max_abs_psi"] <= rec.delta and checks["max_abs_dpsi"] <= rec.delta)
    return checks


# ----------------------------------------------------------------------------
# the two-leaf surface of revolution

@dataclass(frozen=True)
class ConnectedSumProfile:
    """sigma(t) = sinh(a t)/a for t > 1, sinh(-b t)/b for t < -1, quintic bridge between."""
    a: float
    b: float
    m: int
    bridge: BPoly = field(repr=False, compare=False)
    bump: float = 0.0

    def sigma(self, t):
        t = np.asarray(t, dtype=float)
        up = np.sinh(self.a * np.maximum(t, 1.0)) / self.a
        down = np.sinh(-self.b * np.minimum(t, -1.0)) / self.b
        mid = self.bridge(np.clip(t, -1.0, 1.0)) + self.bump * _even_bump(np.clip(t, -1.0, 1.0))
        out = np.where(t > 1, up, np.where(t < -1, down, mid))
        return float(out) if out.ndim == 0 else out

    def dsigma(self, t):
        t = np.asarray(t, dtype=float)
        up = np.cosh(self.a * np.maximum(t, 1.0))
        down = -np.cosh(-self.b * np.minimum(t, -1.0))
        tc = np.clip(t, -1.0, 1.0)
        mid = self.bridge.derivative(1)(tc) + self.bump * _even_bump(tc, 1)
        out = np.where(t > 1, up, np.where(t < -1, down, mid))
        return float(out) if out.ndim == 0 else out

    def d2sigma(self, t):
        t = np.asarray(t, dtype=float)
        up = self.a * np.sinh(self.a * np.maximum(t, 1.0))
        down = self.b * np.sinh(-self.b * np.minimum(t, -1.0))
        tc = np.clip(t, -1.0, 1.0)
        mid = self.bridge.derivative(2)(tc) + self.bump * _even_bump(tc, 2)
        out = np.where(t > 1, up, np.where(t < -1, down, mid))
        return float(out) if out.ndim == 0 else out

    def antipodal_arc(self) -> float:
        """Length of the half circle at the seam t = -1."""
        return math.pi * self.sigma(-1.0)

    def descriptor(self) -> str:
        c = self.bridge.c[:, 0]
        return to_descriptor({"variant": "connected_sum", "a": self.a, "b": self.b, "m": self.m,
                              "bridge_bernstein": list(c), "bump": float(self.bump)})


def _even_bump(t, order: int = 0):
    """(1 - t^2)^3 on [-1, 1] and its derivatives; C^2 at the ends."""
    t = np.asarray(t, dtype=float)
    u = 1 - t * t
    if order == 0:
        return u ** 3
    if order == 1:
        return -6 * t * u ** 2
    return -6 * u ** 2 + 24 * t * t * u


def build_connected_sum_profile(a: float, b: float, m: int = 2) -> ConnectedSumProfile:
    if not 0 < a < b:
        raise ProfileError("need 0 < a < b")
    left = [math.sinh(b) / b, -math.cosh(b), b * math.sinh(b)]
    right = [math.sinh(a) / a, math.cosh(a), a * math.sinh(a)]
    bridge = BPoly.from_derivatives([-1.0, 1.0], [left, right])
    tt = np.linspace(-1, 1, 20001)
    low = float(np.min(bridge(tt)))
    bump = 0.0
    if low <= 0:
        # smallest amplitude of the even C^2 bump that restores positivity
        need = (0.01 - bridge(tt)) / np.maximum(_even_bump(tt), 1e-300)
        bump = float(np.max(need[np.abs(tt) < 1 - 1e-3]))
    prof = ConnectedSumProfile(float(a), float(b), int(m), bridge, bump)
    if np.min(prof.sigma(tt)) <= 0:
        raise ProfileError("bridge positivity could not be restored")
    return prof


# ----------------------------------------------------------------------------
# conformal factor of a warped metric

@dataclass
class ConformalFactorReport:
    rho: np.ndarray
    t: np.ndarray
    lam: np.ndarray
    lam_b: np.ndarray
    ratio_min: float
    ratio_max: float
    b: float
    phi: Callable = field(repr=False)
    psi: Callable = field(repr=False)

    @property
    def ratio(self) -> np.ndarray:
        return self.lam / self.lam_b


def _tail_check(inv_j: Callable[[float], float], T0: float = 1.0) -> float:
    """Integral of 1/j over [T0, inf) after a doubling-convergence test."""
    pieces = []
    T = max(T0, 1.0)
    for _ in range(12):
        v, _ = integrate.quad(inv_j, T, 2 * T, limit=200)
        pieces.append(v)
        T *= 2
    pieces = np.array(pieces)
    ratios = pieces[1:] / np.where(pieces[:-1] > 0, pieces[:-1], np.inf)
    decaying = [r < 0.9 for r in ratios]
    ok = any(all(decaying[k:k + 4]) for k in range(len(decaying) - 3))
    if not ok:
        raise TailDivergence("1/j does not appear integrable at infinity")
    tail, _ = integrate.quad(inv_j, T0, np.inf, limit=400)
    return tail


def conformal_factor_from_warping(profile: WarpingProfile, b: float,
                                  rho_grid: Optional[np.ndarray] = None) -> ConformalFactorReport:
    """Conformal factor lambda(rho) = j(t)/rho at rho = psi(t) = exp(-int_t^inf 1/j).

    psi is the diffeomorphism taking the warped model to the unit ball, so
    the metric pulls back to lambda(rho)^2 times the Euclidean metric.  The
    reference factor 2/(b (1 - rho^2)) is the one of curvature -b^2.
    """
    if rho_grid is None:
        rho_grid = np.linspace(0.01, 0.99, 99)

    def inv_j(q):
        with np.errstate(over="ignore"):
            return 1.0 / float(profile.j(q))

    tail1 = _tail_check(inv_j, 1.0)

    def I(t):
        # int_t^inf 1/j, split at 1 to keep quad accurate near the pole at 0
        if t >= 1:
            v, _ = integrate.quad(inv_j, t, np.inf, limit=400, epsabs=1e-13, epsrel=1e-12)
            return v
        v, _ = integrate.quad(inv_j, t, 1.0, limit=400, epsabs=1e-13, epsrel=1e-12)
        return v + tail1

    def psi(t):
        return math.exp(-I(t))

    A = math.exp(-tail1)

    def phi(t):
        return psi(t) / A

    rho_grid = np.asarray(rho_grid, dtype=float)
    ts = np.empty(len(rho_grid))
    lam = np.empty(len(rho_grid))
    # increasing rho means increasing t; I is carried from the last solved point
    anchor = (1.0, tail1)

    def I_from(t, anc):
        ta, Ia = anc
        v, _ = integrate.quad(inv_j, ta, t, limit=200, epsabs=1e-15, epsrel=1e-13)
        return Ia - v

    for idx in np.argsort(rho_grid, kind="stable"):
        rho = float(rho_grid[idx])
        target = -math.log(rho)       # I(t) = -log rho, I decreasing in t
        t, done = anchor[0], False
        for _ in range(60):
            It = I_from(t, anchor)
            if It <= 0:
                break
            # Newton on log I against log t
            step = (math.log(It) - math.log(target)) * It * float(profile.j(t)) / t
            step = max(-2.0, min(2.0, step))
            t_new = t * math.exp(step)
            if abs(t_new - t) <= 1e-14 * t:
                t, done = t_new, True
                break
            t = t_new
        if not done:
            lo, hi = 1e-12, 1.0
            while I(hi) > target:
                hi *= 2
            while I(lo) < target:
                lo /= 10
            t = optimize.brentq(lambda s: I(s) - target, lo, hi, xtol=1e-13, rtol=1e-14)
        anchor = (t, I_from(t, anchor))
        ts[idx] = t
        lam[idx] = float(profile.j(t)) / rho
    lam_b = 2.0 / (b * (1.0 - rho_grid ** 2))
    r = lam / lam_b
    return ConformalFactorReport(np.asarray(rho_grid), np.array(ts), lam, lam_b,
                                 float(r.min()), float(r.max()), float(b), phi, psi)


def ode_warping(k: Callable[[float], float], m: int = 2, t_max: float = 40.0,
                label: str = "ode") -> WarpingProfile:
    """Warping with j'' = k(t)^2 j, j(0) = 0, j'(0) = 1, solved on [0, t_max].

    For m = 2 the scalar curvature is -2 k(t)^2, so the pinching is read
    directly from the range of k.  Beyond t_max the solution is continued
    by the exact exponential solution with rate k(t_max).
    """
    sol = integrate.solve_ivp(lambda t, u: [u[1], k(t) ** 2 * u[0]], (0.0, t_max), [0.0, 1.0],
                              method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
    kend = k(t_max)
    jT, djT = sol.y[0, -1], sol.y[1, -1]
    # continuation: j = P cosh(k s) + Q sinh(k s), s = t - t_max
    P, Q = jT, djT / kend

    def _eval(t, order):
        t = np.asarray(t, dtype=float)
        inside = np.clip(t, 0.0, t_max)
        u = sol.sol(inside)
        s = np.maximum(t - t_max, 0.0)
        ch, sh = np.cosh(kend * s), np.sinh(kend * s)
        if order == 0:
            far, near = P * ch + Q * sh, u[0]
        elif order == 1:
            far, near = kend * (P * sh + Q * ch), u[1]
        else:
            far = kend ** 2 * (P * ch + Q * sh)
            near = np.vectorize(lambda x: k(x) ** 2)(inside) * u[0]
        out = np.where(t > t_max, far, near)
        return float(out) if out.ndim == 0 else out

    return WarpingProfile(j=lambda t: _eval(t, 0), dj=lambda t: _eval(t, 1),
                          d2j=lambda t: _eval(t, 2), m=m, label=label)
