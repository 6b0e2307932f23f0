import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxlab.discrete_spaces import (FiniteMetricMeasureSpace, RangeError, admissible_radii, ball_size_stats,
                                    build_discretisation, cycle_space, dilation_constant,
                                    fit_quasi_isometry_params, hyperbolic_mesh_space, local_doubling,
                                    overlap_number, path_space, perturbed_copy, transfer_field,
                                    tube_mesh_space, upsilon, verify_maximal_comparison, volume_comparison)
from maxlab.geodesy import hyperbolic_distance_array
from maxlab.measure_lorentz import SampledField


def random_points(seed, n):
    rng = np.random.default_rng(seed)
    P = rng.uniform(0, 10, (n, 2))
    D = np.hypot(P[:, None, 0] - P[None, :, 0], P[:, None, 1] - P[None, :, 1])
    return FiniteMetricMeasureSpace(D, rng.uniform(0.5, 2.0, n))


def test_space_validation():
    with pytest.raises(ValueError):
        FiniteMetricMeasureSpace(np.array([[0.0, 1.0], [2.0, 0.0]]), [1, 1])
    with pytest.raises(ValueError):
        FiniteMetricMeasureSpace(np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0.0]]), [1, 1, 1])
    with pytest.raises(ValueError):
        FiniteMetricMeasureSpace(np.zeros((2, 2)), [1.0, 0.0])
    with pytest.raises(ValueError):
        FiniteMetricMeasureSpace.from_edges(3, [(0, 1, 1.0)], np.ones(3))


def test_generators():
    P = path_space(5, step=0.5)
    assert P.distance[0, 4] == 2.0 and P.diameter() == 2.0
    C = cycle_space(6)
    assert C.distance[0, 5] == 1.0 and C.diameter() == 3.0
    T = tube_mesh_space(4, 5)
    assert T.n == 20
    # around the tube at most floor(5/2) steps, plus diagonal moves along it
    assert T.distance[0, 2] == 2.0 and T.distance[0, 5 + 1] == pytest.approx(math.sqrt(2))
    T.check_metric()


def test_hyperbolic_mesh_overestimates_slightly():
    H = hyperbolic_mesh_space(2.0, h=0.25)
    x, y = H.coords[:, 0], H.coords[:, 1]
    true = hyperbolic_distance_array(x[:, None], y[:, None], x[None, :], y[None, :])
    mask = true > 1.0
    ratio = H.distance[mask] / true[mask]
    assert ratio.min() >= 1 - 1e-9
    assert ratio.max() < 1.15
    # every cell has area h^2
    assert np.allclose(H.weight, 0.0625)


def test_csv_round_trip(tmp_path):
    edges = tmp_path / "edges.csv"
    weights = tmp_path / "weights.csv"
    edges.write_text("node_a,node_b,length\n0,1,1.5\n1,2,2\n0,2,5\n")
    weights.write_text("node,weight\n0,1\n1,2\n2,0.5\n")
    X = FiniteMetricMeasureSpace.from_csv(str(edges), str(weights))
    assert X.distance[0, 2] == 3.5
    assert X.weight.tolist() == [1.0, 2.0, 0.5]


@given(st.integers(0, 10 ** 6), st.integers(2, 60), st.floats(0.3, 4.0))
@settings(max_examples=50, deadline=None)
def test_net_is_separated_covering_and_maximal(seed, n, eta):
    X = random_points(seed, n)
    disc = build_discretisation(X, eta, seed=seed)
    D = X.distance
    net = disc.net
    sub = D[np.ix_(net, net)][~np.eye(len(net), dtype=bool)]
    assert np.all(sub > eta)
    assert np.all(D[:, net].min(axis=1) <= eta)
    assert disc.covering_radius <= eta and (len(net) == 1 or disc.separation > eta)


@given(st.integers(0, 10 ** 6), st.integers(2, 40), st.floats(0.5, 5.0))
@settings(max_examples=30, deadline=None)
def test_overlap_number_by_enumeration(seed, n, radius):
    X = random_points(seed, n)
    disc = build_discretisation(X, 1.0, seed=seed)
    ref = max(sum(1 for z in disc.net if X.distance[x, z] < radius) for x in range(n))
    assert overlap_number(X, disc, radius) == ref
    assert upsilon(X, disc, radius) == ref


def test_local_doubling_and_dilation_on_path():
    n = 21

    def count(x, r):
        return sum(1 for k in range(n) if abs(k - x) < r)

    # the ratio only changes where r or 2r crosses an integer: probe there and just above
    half = [k / 2 for k in range(1, 7)]
    probes = half + [r + 1e-9 for r in [0.0] + half[:-1]]
    ref = max(count(x, 2 * r) / count(x, r) for x in range(n) for r in probes)
    X = path_space(n)
    assert local_doubling(X, 3.0) == pytest.approx(ref, rel=1e-15)
    ref_dil = max(count(x, R + 1) / count(x, R) for x in range(n) for R in (2.0, 5.0))
    assert dilation_constant(X, 1.0, [2.0, 5.0]) == pytest.approx(ref_dil, rel=1e-15)


def test_ball_size_stats():
    X = tube_mesh_space(40, 6)
    s = ball_size_stats(X, 4.0)
    assert s.ubsc and s.doubling_bound_holds
    assert s.v <= s.V


def test_quasi_isometry_fit_on_perturbed_copy():
    # too short for any radius above R0 to give proper balls
    X = tube_mesh_space(40, 6)
    Xp = perturbed_copy(X, 0.2, 0.1, seed=3)
    Xp.check_metric()
    qi = fit_quasi_isometry_params(np.arange(X.n), X, Xp)
    assert qi.K == 0.0
    assert 0 < qi.beta <= 0.1
    assert qi.kappa == pytest.approx(qi.beta + 2)
    assert qi.R0 == pytest.approx(6 * (2 * qi.kappa + qi.beta) + 1)
    with pytest.raises(RangeError):
        admissible_radii(qi)
    with pytest.raises(RangeError):
        volume_comparison(qi, qi.R0 / 2)


def test_transfer_and_comparison():
    X = tube_mesh_space(150, 6)
    Xp = perturbed_copy(X, 0.2, 0.1, seed=1)
    qi = fit_quasi_isometry_params(np.arange(X.n), X, Xp)
    radii = admissible_radii(qi, 6)
    f = SampledField.from_arrays(np.random.default_rng(0).integers(0, 5, Xp.n) * 1.0, Xp.weight)
    tr = transfer_field(qi, f)
    assert np.all(tr.EF.values[tr.net] >= tr.F * (1 - 1e-12))
    rep = verify_maximal_comparison(qi, f, radii)
    assert rep.holds and rep.ef_dominates_f and rep.l1_bound_holds
    assert rep.tested_points == X.n
    assert '"holds": true' in rep.to_json()
