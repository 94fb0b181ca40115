import numpy as np
import pytest
from hypothesis import given, settings

from simplex_ot.errors import BoundaryError, DensityError
from simplex_ot.geometry import connection, jacobi_propagate
from simplex_ot.graph import random_density, random_tangent, triangle_graph
from simplex_ot.laplacian import WeightedLaplacian
from simplex_ot.metric import (
    DistanceOptions,
    SimplexPath,
    embed_metric_apply,
    first_variation,
    metric_dual,
    metric_primal,
    path_energy,
    potential_of_tangent,
    second_variation,
    tangent_of_potential,
    wasserstein_distance,
)
from simplex_ot.calculus import grad, inner_rho

from conftest import instance, seeds


def test_primal_two_point(two):
    assert metric_primal(two, [0.3, 0.7], [1, -1], [1, -1]) == pytest.approx(1.0, rel=1e-14)
    assert metric_primal(two, [0.3, 0.7], [1, -1], [0, 0]) == 0


def test_dual_two_point(two):
    phi = [-0.25, 0.25]
    assert metric_dual(two, [0.5, 0.5], phi, phi) == pytest.approx(0.25, rel=1e-14)
    assert metric_dual(two, [0.5, 0.5], [1, 1], phi) == pytest.approx(0, abs=1e-15)


def test_identification_two_point(two):
    np.testing.assert_allclose(potential_of_tangent(two, [0.4, 0.6], [1, -1]), [0.5, -0.5], atol=1e-15)
    np.testing.assert_allclose(tangent_of_potential(two, [0.4, 0.6], [0.5, -0.5]), [1, -1], atol=1e-15)
    np.testing.assert_array_equal(tangent_of_potential(two, [0.4, 0.6], [2, 2]), 0)


@pytest.mark.parametrize("fn", [metric_primal, metric_dual])
def test_boundary_raises(two, fn):
    with pytest.raises(BoundaryError):
        fn(two, [0.0, 1.0], [1, -1], [1, -1])


@given(seeds)
def test_primal_dual_consistency(seed):
    rng, g, rho = instance(seed)
    p1, p2 = rng.normal(size=(2, g.n))
    s1, s2 = tangent_of_potential(g, rho, p1), tangent_of_potential(g, rho, p2)
    d = metric_dual(g, rho, p1, p2)
    assert metric_primal(g, rho, s1, s2) == pytest.approx(d, rel=1e-10, abs=1e-10)
    assert d == pytest.approx(inner_rho(g, rho, grad(g, p1), grad(g, p2)), rel=1e-12, abs=1e-12)
    assert metric_dual(g, rho, p1 + 3.0, p2 - 1.0) == pytest.approx(d, rel=1e-12, abs=1e-12)


@given(seeds)
def test_primal_symmetric_positive(seed):
    rng, g, rho = instance(seed)
    s1, s2 = random_tangent(rng, g.n), random_tangent(rng, g.n)
    assert metric_primal(g, rho, s1, s2) == pytest.approx(metric_primal(g, rho, s2, s1), rel=1e-12, abs=1e-14)
    assert metric_primal(g, rho, s1, s1) > 0


@given(seeds)
def test_identification_round_trip(seed):
    rng, g, rho = instance(seed)
    s = random_tangent(rng, g.n)
    phi = potential_of_tangent(g, rho, s)
    np.testing.assert_allclose(tangent_of_potential(g, rho, phi), s, atol=1e-10 * np.abs(s).max())
    assert abs(phi.sum()) < 1e-12 * max(1, np.abs(phi).max())
    p = rng.normal(size=g.n)
    p -= p.mean()
    np.testing.assert_allclose(potential_of_tangent(g, rho, tangent_of_potential(g, rho, p)), p, atol=1e-10 * np.abs(p).max())


@given(seeds)
def test_embedding_metric(seed):
    rng, g, _ = instance(seed)
    mu = rng.uniform(0.1, 2.0, size=g.n)
    u0 = np.full(g.n, 1 / np.sqrt(g.n))
    np.testing.assert_allclose(embed_metric_apply(g, mu, u0), u0, atol=1e-14)
    a = random_tangent(rng, g.n)
    L = WeightedLaplacian(g, mu)
    np.testing.assert_allclose(embed_metric_apply(g, mu, a), L.pinv_apply(a), atol=1e-12)
    b = rng.normal(size=g.n)
    back = (L.matrix + np.outer(u0, u0)) @ embed_metric_apply(g, mu, b)
    np.testing.assert_allclose(back, b, atol=1e-10 * np.abs(b).max())
    # pullback by the inclusion of the simplex
    s1, s2 = random_tangent(rng, g.n), random_tangent(rng, g.n)
    assert s1 @ embed_metric_apply(g, mu, s2) == pytest.approx(s1 @ L.pinv_apply(s2), rel=1e-12, abs=1e-12)


def test_embedding_rejects_nonpositive(two):
    with pytest.raises(DensityError):
        embed_metric_apply(two, [1.0, 0.0], [1, 0])


def test_energy_constant_path(tri):
    path = SimplexPath.linear([0.2, 0.3, 0.5], [0.2, 0.3, 0.5], K=10)
    assert path_energy(tri, path) == 0


def test_energy_two_point_linear(two):
    path = SimplexPath.linear([0.2, 0.8], [0.7, 0.3], K=20)
    assert path_energy(two, path) == pytest.approx(0.125, rel=1e-13)


def test_energy_rejects_boundary_path(two):
    path = SimplexPath.linear([0.2, 0.8], [1.0, 0.0], K=4)
    with pytest.raises(BoundaryError):
        path_energy(two, path)


def test_distance_trivial(tri):
    r = wasserstein_distance(tri, [0.2, 0.3, 0.5], [0.2, 0.3, 0.5])
    assert r.distance == 0
    np.testing.assert_array_equal(r.geodesic.rho, np.tile([0.2, 0.3, 0.5], (101, 1)))


def test_distance_two_point(two):
    r = wasserstein_distance(two, [0.2, 0.8], [0.7, 0.3])
    assert r.distance == pytest.approx(0.5, rel=1e-12)
    lin = SimplexPath.linear([0.2, 0.8], [0.7, 0.3], K=100)
    np.testing.assert_allclose(r.geodesic.rho, lin.rho, atol=1e-10)


def test_distance_symmetry_and_energy(tri, rng):
    for _ in range(5):
        a, b = random_density(rng, 3), random_density(rng, 3)
        r1, r2 = wasserstein_distance(tri, a, b), wasserstein_distance(tri, b, a)
        assert r1.distance == pytest.approx(r2.distance, abs=1e-6)
        assert r1.distance**2 == pytest.approx(2 * path_energy(tri, r1.geodesic), rel=1e-5)
        geo = r1.geodesic
        sp = [metric_primal(tri, x, v, v) for x, v in zip(geo.rho, geo.velocity)]
        assert np.ptp(sp) / sp[0] < 1e-5
        np.testing.assert_allclose(geo.rho[-1], b, atol=1e-8)


def test_geodesic_equation_residual(tri, rng):
    a, b = random_density(rng, 3), random_density(rng, 3)
    geo = wasserstein_distance(tri, a, b, DistanceOptions(K=400)).geodesic
    t, v = geo.t, geo.velocity
    acc = np.gradient(v, t, axis=0, edge_order=2)
    res = [acc[k] + connection(tri, geo.rho[k], v[k], v[k]) for k in range(1, len(t) - 1)]
    assert np.max(np.abs(res)) < 1e-3 * max(1, np.abs(v).max() ** 2)


def test_fallback_direct_minimization(tri, rng):
    a, b = random_density(rng, 3), random_density(rng, 3)
    ref = wasserstein_distance(tri, a, b).distance
    r = wasserstein_distance(tri, a, b, DistanceOptions(max_newton=0, K=60))
    assert r.method == "direct"
    assert r.distance == pytest.approx(ref, rel=1e-3)
    assert r.distance >= ref * (1 - 1e-6)


@settings(max_examples=25)
@given(seeds)
def test_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    g = triangle_graph()
    p = [random_density(rng, 3, concentration=3.0) for _ in range(3)]
    W = lambda a, b: wasserstein_distance(g, a, b).distance  # noqa: E731
    assert W(p[0], p[2]) <= W(p[0], p[1]) + W(p[1], p[2]) + 1e-5


def test_energy_dominates_half_distance_squared(tri, rng):
    a, b = random_density(rng, 3), random_density(rng, 3)
    W = wasserstein_distance(tri, a, b).distance
    assert path_energy(tri, SimplexPath.linear(a, b, 200)) >= 0.5 * W**2 - 1e-8


def _bump(path, rng):
    # variation vanishing at both ends
    s = np.sin(np.pi * path.t)[:, None]
    d = np.array([random_tangent(rng, path.rho.shape[1]) for _ in range(3)])
    return s * d[0] + np.sin(2 * np.pi * path.t)[:, None] * d[1] * 0.5


def test_variations_vanish_for_zero_field(tri, rng):
    path = SimplexPath.linear(random_density(rng, 3), random_density(rng, 3), 30)
    z = np.zeros_like(path.rho)
    assert first_variation(tri, path, z) == 0
    assert second_variation(tri, path, z) == 0


def test_first_variation_fd(tri, rng):
    path = SimplexPath.linear(random_density(rng, 3, concentration=4.0), random_density(rng, 3, concentration=4.0), 40)
    h = 0.05 * _bump(path, rng)
    eps = 1e-5
    E = lambda e: path_energy(tri, SimplexPath(path.t, path.rho + e * h))  # noqa: E731
    fd = (E(eps) - E(-eps)) / (2 * eps)
    assert first_variation(tri, path, h) == pytest.approx(fd, rel=1e-5)


def test_first_variation_vanishes_on_geodesic(tri, rng):
    a, b = random_density(rng, 3, concentration=4.0), random_density(rng, 3, concentration=4.0)
    geo = wasserstein_distance(tri, a, b).geodesic
    h = _bump(geo, rng)
    scale = np.abs(h).max() * np.abs(geo.velocity).max()
    assert abs(first_variation(tri, geo, h)) <= 1e-6 * max(scale, 1)


def test_second_variation_fd_on_geodesic(tri, rng):
    a, b = random_density(rng, 3, concentration=4.0), random_density(rng, 3, concentration=4.0)
    geo = wasserstein_distance(tri, a, b).geodesic
    h = 0.05 * _bump(geo, rng)
    eps = 1e-4
    E = lambda e: path_energy(tri, SimplexPath(geo.t, geo.rho + e * h))  # noqa: E731
    fd = (E(eps) - 2 * E(0) + E(-eps)) / eps**2
    sv = second_variation(tri, geo, h)
    assert sv >= 0
    assert sv == pytest.approx(fd, rel=1e-3)


@pytest.mark.parametrize("method", ["rk45", "midpoint"])
def test_second_variation_vanishes_on_jacobi_field(tri, rng, method):
    a, b = random_density(rng, 3, concentration=4.0), random_density(rng, 3, concentration=4.0)
    geo = wasserstein_distance(tri, a, b).geodesic
    h0 = random_tangent(rng, 3)
    H = jacobi_propagate(tri, geo, h0, method=method)
    assert second_variation(tri, geo, H) <= 1e-8 * np.abs(H).max() ** 2
