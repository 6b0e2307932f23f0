import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from maxlab.geometry_profiles import ConformalProfile, SpaceFormParams, build_connected_sum_profile
from maxlab.measure_lorentz import (Annulus, CellRegion, Rectangle, SampledField, ball_volume_numeric,
                                    distribution_steps, level_set_measure, lorentz_norm, lp_norm,
                                    region_measure, space_form_ball_volume)

from oracles import distribution_function, lorentz_norm_quadrature

fields = st.integers(1, 30).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-10, 10, allow_nan=False, allow_subnormal=False), min_size=n, max_size=n),
    st.lists(st.floats(0.01, 5), min_size=n, max_size=n)))


def test_sampled_field_validation(tmp_path):
    with pytest.raises(ValueError):
        SampledField.from_arrays([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        SampledField.from_arrays([1.0], [0.0])
    with pytest.raises(ValueError):
        SampledField.from_arrays([math.nan], [1.0])
    f = SampledField.from_arrays([0.1, -2.5, 1 / 3], [1.0, 0.25, 3.0])
    path = tmp_path / "f.csv"
    f.to_csv(str(path))
    g = SampledField.from_csv(str(path))
    assert np.array_equal(g.values, f.values) and np.array_equal(g.weights, f.weights)
    assert np.array_equal(g.ids, f.ids)


@given(fields)
@settings(max_examples=100, deadline=None)
def test_distribution_steps_match_direct_count(data):
    vals, wts = data
    f = SampledField.from_arrays(vals, wts)
    levels, W = distribution_steps(f)
    assert np.all(np.diff(levels) < 0)
    for a, Wj in zip(levels, W):
        # mu{|f| >= a} = mu{|f| > a'} for a' just below a
        assert Wj == pytest.approx(distribution_function(vals, wts, np.nextafter(a, 0)), rel=1e-12)
        assert level_set_measure(f, a) == pytest.approx(distribution_function(vals, wts, a), rel=1e-12, abs=0)


@given(fields, st.sampled_from([1.0, 1.5, 2.0, 3.0]), st.sampled_from([1.0, 2.0, 4.0]))
@settings(max_examples=60, deadline=None)
def test_lorentz_norm_matches_quadrature(data, p, r):
    vals, wts = data
    f = SampledField.from_arrays(vals, wts)
    ref = lorentz_norm_quadrature(vals, wts, p, r)
    assert lorentz_norm(f, p, r).value == pytest.approx(ref, rel=1e-8, abs=1e-12)


@given(fields, st.sampled_from([1.0, 1.5, 2.5]))
@settings(max_examples=60, deadline=None)
def test_lorentz_pp_is_lp(data, p):
    vals, wts = data
    f = SampledField.from_arrays(vals, wts)
    assert lorentz_norm(f, p, p).value == pytest.approx(lp_norm(f, p), rel=1e-10, abs=1e-12)


@given(fields, st.sampled_from([1.0, 2.0]))
@settings(max_examples=60, deadline=None)
def test_weak_norm_is_sup_over_levels(data, p):
    vals, wts = data
    f = SampledField.from_arrays(vals, wts)
    levels = sorted(set(abs(v) for v in vals if v != 0))
    ref = max([a * distribution_function(vals, wts, np.nextafter(a, 0)) ** (1 / p) for a in levels], default=0.0)
    assert lorentz_norm(f, p, math.inf).value == pytest.approx(ref, rel=1e-12, abs=0)


def test_lorentz_norm_of_indicator():
    # ||1_E||_{p,r} = |E|^{1/p} for every r with this normalisation
    f = SampledField.from_arrays([1.0, 1.0, 0.0], [0.5, 1.5, 4.0])
    for p in (1.0, 1.5, 3.0):
        for r in (1.0, 2.0, math.inf):
            assert lorentz_norm(f, p, r).value == pytest.approx(2.0 ** (1 / p), rel=1e-14)
    assert lorentz_norm(SampledField.from_arrays([0.0], [1.0]), 2, 1).value == 0.0
    with pytest.raises(ValueError):
        lorentz_norm(f, 0.5, 1)


@pytest.mark.parametrize("kappa,m", [(1.0, 2), (2.0, 2), (1.0, 3), (0.5, 4)])
def test_space_form_ball_volume(kappa, m):
    p = SpaceFormParams(kappa, m)
    omega = 2 * math.pi ** (m / 2) / math.gamma(m / 2)
    for R in (0.1, 1.0, 5.0, 20.0):
        ref = omega * integrate.quad(lambda t: (math.sinh(kappa * t) / kappa) ** (m - 1), 0, R, epsrel=1e-13)[0]
        assert space_form_ball_volume(p, R) == pytest.approx(ref, rel=1e-10)
    assert space_form_ball_volume(p, 0.0) == 0.0


@pytest.mark.parametrize("kappa", [1.0, 2.0])
def test_numeric_ball_volume(kappa):
    prof = ConformalProfile.hyperbolic(kappa)
    params = SpaceFormParams(kappa, 2)
    for R in (1.0, 4.0):
        r = ball_volume_numeric(prof, (0.0, 1.0), R)
        assert r.value == pytest.approx(space_form_ball_volume(params, R), rel=1e-2)


def test_region_measures():
    hyp = ConformalProfile.hyperbolic(2.0)
    # int int dx dy / (4 y^2) over (0, 3) x (1, 2)
    assert region_measure(hyp, Rectangle(0.0, 3.0, 1.0, 2.0)) == pytest.approx(3 * 0.5 / 4, rel=1e-10)
    strom = ConformalProfile.stromberg(1.0, 1.5)
    ref = 2.0 * integrate.quad(lambda y: strom.psi(y) ** 2, 0.5, 4.0, epsrel=1e-12)[0]
    assert region_measure(strom, Rectangle(-1.0, 1.0, 0.5, 4.0)) == pytest.approx(ref, rel=1e-9)
    assert region_measure(SpaceFormParams(1.0, 2), Annulus(1.0, 2.0)) == pytest.approx(
        2 * math.pi * (math.cosh(2) - math.cosh(1)), rel=1e-12)
    cs = build_connected_sum_profile(1.0, 2.0)
    ref = 2 * math.pi * integrate.quad(lambda t: float(cs.sigma(t)), -3, 3, points=[-1, 1], epsrel=1e-12)[0]
    assert region_measure(cs, Annulus(-3.0, 3.0)) == pytest.approx(ref, rel=1e-10)
    disc = CellRegion(lambda x, y: np.ones_like(x, dtype=bool), (0.0, 1.0), (1.0, 2.0), 200)
    assert region_measure(ConformalProfile.hyperbolic(1.0), disc) == pytest.approx(0.5, rel=1e-4)
