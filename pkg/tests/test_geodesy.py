import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxlab.geodesy import (DistanceField, HalfPlaneChart, HalfPlanePoint, RevolutionChart, RevolutionPoint,
                            explicit_path_length, horizontal_geodesic_profile, hyperbolic_distance,
                            hyperbolic_distance_array, l_path, numeric_distance_halfplane,
                            numeric_distance_revolution, trace_geodesic)
from maxlab.geometry_profiles import ConformalProfile, build_connected_sum_profile

from oracles import clairaut_distance

points = st.builds(HalfPlanePoint, st.floats(-50, 50), st.floats(1e-3, 1e3))


def _chordal(z, w, kappa):
    # 2 asinh(|z - w| / (2 sqrt(y1 y2))), an equivalent closed form
    return 2 * math.asinh(math.hypot(z.x - w.x, z.y - w.y) / (2 * math.sqrt(z.y * w.y))) / kappa


@given(points, points, st.sampled_from([0.5, 1.0, 2.0]))
@settings(max_examples=200, deadline=None)
def test_hyperbolic_distance_closed_form(z, w, kappa):
    d = hyperbolic_distance(z, w, kappa)
    assert d == pytest.approx(_chordal(z, w, kappa), rel=1e-9, abs=1e-12)
    assert d == pytest.approx(hyperbolic_distance(w, z, kappa), rel=1e-12, abs=1e-14)


@given(points, points, points)
@settings(max_examples=200, deadline=None)
def test_hyperbolic_triangle_inequality(z, w, u):
    assert hyperbolic_distance(z, u) <= hyperbolic_distance(z, w) + hyperbolic_distance(w, u) + 1e-9


def test_hyperbolic_distance_array_matches_scalar():
    rng = np.random.default_rng(1)
    x1, x2 = rng.uniform(-3, 3, (2, 50))
    y1, y2 = np.exp(rng.uniform(-2, 2, (2, 50)))
    arr = hyperbolic_distance_array(x1, y1, x2, y2, 2.0)
    ref = [hyperbolic_distance(HalfPlanePoint(a, b), HalfPlanePoint(c, d), 2.0) for a, b, c, d in zip(x1, y1, x2, y2)]
    assert np.allclose(arr, ref, rtol=1e-12)


def test_point_validation():
    with pytest.raises(ValueError):
        HalfPlanePoint(0.0, 0.0)


def test_chart_round_trip():
    chart = HalfPlaneChart(ConformalProfile.stromberg(1.0, 3.0))
    y = np.geomspace(1e-6, 1e6, 41)
    assert np.allclose(chart.y_of_s(chart.s_of_y(y)), y, rtol=1e-12)


@pytest.mark.parametrize("kappa", [1.0, 2.0])
def test_numeric_distance_matches_closed_form(kappa):
    prof = ConformalProfile.hyperbolic(kappa)
    rng = np.random.default_rng(7)
    for _ in range(6):
        z = HalfPlanePoint(rng.uniform(-2, 2), math.exp(rng.uniform(-1, 1)))
        w = HalfPlanePoint(rng.uniform(-2, 2), math.exp(rng.uniform(-1, 1)))
        r = numeric_distance_halfplane(prof, z, w)
        assert r.value == pytest.approx(_chordal(z, w, kappa), rel=1e-3)


def test_near_horizontal_pair_does_not_degrade():
    # the target row is a fraction of a cell away from the source row
    prof = ConformalProfile.hyperbolic(2.0)
    z, w = HalfPlanePoint(1.7164, 0.27205), HalfPlanePoint(1.3653, 0.27255)
    assert numeric_distance_halfplane(prof, z, w).value == pytest.approx(_chordal(z, w, 2.0), rel=3e-4)


def test_stromberg_distance_is_sandwiched():
    a, b = 1.0, 1.5
    prof = ConformalProfile.stromberg(a, b)
    rng = np.random.default_rng(3)
    for _ in range(6):
        z = HalfPlanePoint(rng.uniform(-2, 2), math.exp(rng.uniform(-2, 2)))
        w = HalfPlanePoint(rng.uniform(-2, 2), math.exp(rng.uniform(-2, 2)))
        r = numeric_distance_halfplane(prof, z, w)
        assert hyperbolic_distance(z, w, b) - r.error_estimate <= r.value
        assert r.value <= hyperbolic_distance(z, w, a) + r.error_estimate


def test_dijkstra_method_overestimates_within_its_bias():
    # graph paths are admissible curves, so the graph metric can only be longer;
    # the stencil bias does not vanish under refinement
    prof = ConformalProfile.hyperbolic(1.0)
    z, w = HalfPlanePoint(0.0, 1.0), HalfPlanePoint(1.0, 2.0)
    exact = hyperbolic_distance(z, w)
    r = numeric_distance_halfplane(prof, z, w, method="dijkstra")
    assert exact * (1 - 1e-3) <= r.value <= 1.1 * exact


def test_l_path_length_in_hyperbolic_plane():
    prof = ConformalProfile.hyperbolic(1.0)
    z, w = HalfPlanePoint(0.0, 1.0), HalfPlanePoint(3.0, 2.0)
    path = l_path(z, w, 4.0)
    assert path[0] == (0.0, 1.0) and path[-1] == (3.0, 2.0)
    assert explicit_path_length(prof, path) == pytest.approx(math.log(4) + 3 / 4 + math.log(2), rel=1e-12)
    with pytest.raises(ValueError):
        explicit_path_length(prof, [(0.0, 1.0), (1.0, 2.0)])


def test_revolution_distance_matches_clairaut_geodesic():
    prof = build_connected_sum_profile(1.0, 2.0)
    tt = np.linspace(-1, 1, 4001)
    t_neck = float(tt[np.argmin(prof.sigma(tt))])
    ref = clairaut_distance(lambda t: float(prof.sigma(t)), 3.0, math.pi, t_neck)
    r = numeric_distance_revolution(prof, RevolutionPoint(3.0, 0.0), RevolutionPoint(3.0, math.pi))
    assert abs(r.value - ref) <= max(r.error_estimate, 1e-4 * ref)
    # far shorter than the half circle at t = 3
    assert r.value < math.pi * float(prof.sigma(3.0)) / 4


def test_revolution_distance_is_rotation_invariant():
    prof = build_connected_sum_profile(1.0, 2.0)
    r1 = numeric_distance_revolution(prof, RevolutionPoint(2.0, 0.0), RevolutionPoint(-2.0, 1.0))
    r2 = numeric_distance_revolution(prof, RevolutionPoint(2.0, 2.0), RevolutionPoint(-2.0, 3.0))
    assert r1.value == pytest.approx(r2.value, rel=1e-12)


@pytest.mark.parametrize("kappa", [1.0, 2.0])
def test_ball_volumes_from_field(kappa):
    chart = HalfPlaneChart(ConformalProfile.hyperbolic(kappa))
    f = DistanceField(chart, 0.0, 3.0)
    radii = np.array([0.5, 1.0, 2.0, 3.0])
    vols = f.ball_volumes(radii)
    ref = 2 * math.pi * (np.cosh(kappa * radii) - 1) / kappa ** 2
    assert np.allclose(vols, ref, rtol=1e-2)
    assert np.all(np.diff(vols) > 0)


def test_traced_geodesic_follows_semicircle():
    # the geodesic from i to 2 + i is the arc of |z - 1| = sqrt 2
    chart = HalfPlaneChart(ConformalProfile.hyperbolic(1.0))
    f = DistanceField(chart, 0.0, 2.5)
    pts = trace_geodesic(f, 0.0, 2.0)
    y = np.exp(pts[:, 0])
    x = pts[:, 1]
    assert np.max(np.abs(np.hypot(x - 1, y) - math.sqrt(2))) < 0.02
    assert pts[-1, 1] == 0.0


def test_horizontal_geodesic_in_hyperbolic_plane_is_unit_semicircle():
    x_of_y, x0 = horizontal_geodesic_profile(ConformalProfile.hyperbolic(1.0), 1.0)
    assert x0 == pytest.approx(1.0, rel=1e-6)
    assert x_of_y(0.6) == pytest.approx(0.8, rel=1e-6)


def test_periodic_chart_wraps_angles():
    chart = RevolutionChart(lambda t: np.cosh(np.asarray(t, float)))
    assert chart.to_chart(RevolutionPoint(0.5, 1.5 * math.pi)) == pytest.approx((0.5, -0.5 * math.pi))
