from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial import cKDTree

from conftest import random_graphon
from graphon_cocluster.bench import quantization_check
from graphon_cocluster.geometry import (EpsilonCover, PointSetSupport, cover_indices, epsilon_cover,
                                        epsilon_schedule, f_profile_empirical, f_profile_population,
                                        f_support_empirical, f_support_population,
                                        g_support_empirical, g_support_from_matrix,
                                        g_support_population, hausdorff_estimate, profile_vector,
                                        psi_cdf_distance, quantize_latents)
from graphon_cocluster.graphon import (constant_graphon, eval_graphon, four_block_graphon, make_rng,
                                       sample_bipartite)
from graphon_cocluster.population import AllocationMap, PopulationLatentMap, realize_partition
from graphon_cocluster.stats import GeneralLatent, LatentError, in_domain, one_hot


def random_direction(gen, K, D):
    return np.concatenate([gen.standard_normal(K * D), gen.standard_normal(K)])


def test_constant_graphon_profile_blocks():
    p = 0.4
    s = sample_bipartite(constant_graphon(p), 12, 30, 1)
    T = np.arange(30) % 3
    G = profile_vector(s.W, T, 3, side="column")
    piT = np.bincount(T, minlength=3) / 30
    assert np.allclose(np.linalg.norm(G.coords, axis=1), p * piT, atol=1e-15)


def test_single_label_profile():
    s = sample_bipartite(four_block_graphon(), 10, 15, 2)
    G = profile_vector(s.W, np.zeros(15, int), 1, side="column")
    assert np.allclose(G.coords[0], s.W.sum(axis=1) / (15 * math.sqrt(10)), atol=1e-15)
    assert np.array_equal(G.pi, [1.0])


def test_flat_norm_matches_direct_definitions():
    gen = make_rng(21)
    g = random_graphon(21)
    s = sample_bipartite(g, 20, 25, 21)
    K = 3
    T = gen.integers(K, size=25)
    G = profile_vector(s.W, T, K)
    gT = s.W @ one_hot(T, K) / 25
    direct = np.sum(gT ** 2) / 20 + np.sum((np.bincount(T, minlength=K) / 25) ** 2)
    assert abs(G.norm() ** 2 - direct) <= 1e-10
    # population F: integrate f_sigma(y)^2 over a realized partition, cell piece by cell piece
    mass = gen.dirichlet(np.ones(K), size=g.shape[0]) * g.row_widths[:, None]
    alloc = AllocationMap(g.row_widths, mass)
    F = profile_vector(g, alloc, side="row")
    ivs = realize_partition(alloc, g.row_breaks)
    edges = g.col_breaks
    total = 0.0
    for b in range(edges.size - 1):
        y = (edges[b] + edges[b + 1]) / 2
        f = np.zeros(K)
        for lo, hi, k in ivs:
            f[k] += eval_graphon(g, (lo + hi) / 2, y) * (hi - lo)
        total += (f ** 2).sum() * (edges[b + 1] - edges[b])
    total += np.sum(alloc.pi ** 2)
    assert abs(F.norm() ** 2 - total) <= 1e-10
    # empirical F against its definition
    S = gen.integers(K, size=20)
    Fs = f_profile_empirical(g, s.x, S, K)
    assert np.allclose(Fs.coords.sum(axis=0), g.values[g.row_cells(s.x)].mean(axis=0), atol=1e-15)


def test_profile_shape_errors():
    with pytest.raises(ValueError):
        profile_vector(np.ones((3, 4)), np.zeros(5, int), 1)
    with pytest.raises(ValueError):
        profile_vector(np.ones((3, 4)), np.zeros(4, int), 1, side="diagonal")
    g = four_block_graphon()
    a = f_profile_population(g, AllocationMap.uniform(g.row_widths, 2))
    b = profile_vector((g, np.array([0.2])), np.array([0]), 2, side="row")
    assert a.coords.shape == b.coords.shape
    with pytest.raises(ValueError):
        _ = profile_vector(np.ones((2, 2)), np.zeros(2, int), 1) - a


def test_support_trivial_values():
    g = four_block_graphon()
    x = make_rng(1).random(7)
    gam = g_support_population(g, x, 3)
    H = np.zeros(3 * 7 + 3)
    H[3 * 7] = 1.0
    assert gam(H) == 1.0
    p = 0.35
    gen = make_rng(2)
    H = random_direction(gen, 3, 7)
    val = g_support_population(constant_graphon(p), x, 3)(H)
    h = H[:21].reshape(3, 7)
    assert val == pytest.approx(np.max(p * h.sum(axis=1) / math.sqrt(7) + H[21:]), abs=1e-14)


def test_empirical_support_equals_brute_force_over_labelings():
    gen = make_rng(5)
    g = random_graphon(5)
    s = sample_bipartite(g, 4, 5, 5)
    K = 2
    gam = g_support_empirical(g, s.x, s.y, K)
    gam_w = g_support_from_matrix(s.W, K)
    for _ in range(10):
        H = random_direction(gen, K, 4)
        best = -np.inf
        for T in itertools.product(range(K), repeat=5):
            G = profile_vector(s.W, np.array(T), K)
            best = max(best, H @ G.flat)
        assert gam(H) == pytest.approx(best, abs=1e-12)
        assert gam_w(H) == pytest.approx(best, abs=1e-12)


def test_f_support_brute_force():
    gen = make_rng(6)
    g = random_graphon(6)
    x = gen.random(4)
    K = 2
    gam = f_support_empirical(g, x, K)
    D = g.shape[1]
    for _ in range(5):
        H = random_direction(gen, K, D)
        fw = np.concatenate([np.tile(g.col_widths, K), np.ones(K)])
        best = max((H * fw) @ f_profile_empirical(g, x, np.array(S), K).flat
                   for S in itertools.product(range(K), repeat=4))
        assert gam(H) == pytest.approx(best, abs=1e-12)


@given(st.integers(0, 10**6), st.floats(0.01, 100))
def test_support_positively_homogeneous(seed, c):
    gen = make_rng(seed)
    g = random_graphon(seed % 1000)
    gam = f_support_population(g, 2)
    H = random_direction(gen, 2, g.shape[1])
    assert gam(c * H) == pytest.approx(c * gam(H), rel=1e-12, abs=1e-12)


def test_empirical_support_is_unbiased():
    g = four_block_graphon()
    x = make_rng(0).random(8)
    K = 3
    H = random_direction(make_rng(1), K, 8)
    vals = np.array([g_support_empirical(g, x, make_rng(100, s).random(40), K)(H) for s in range(200)])
    target = g_support_population(g, x, K)(H)
    assert abs(vals.mean() - target) <= 4 * vals.std(ddof=1) / math.sqrt(vals.size)


def test_hausdorff_trivial_cases():
    g = four_block_graphon()
    gam = g_support_population(g, np.linspace(0, 1, 6), 2)
    assert hausdorff_estimate(gam, gam, 50, 0) == 0.0
    a, b = 0.3, 1.7
    seg_a, seg_b = PointSetSupport([[0.0], [a]]), PointSetSupport([[0.0], [b]])
    assert hausdorff_estimate(seg_a, seg_b, 10, 3) == pytest.approx(abs(a - b), abs=1e-15)
    with pytest.raises(ValueError):
        hausdorff_estimate(seg_a, seg_b, 0, 3)


def test_hausdorff_shrinks_with_sample_size():
    g = four_block_graphon()
    x = make_rng(7).random(10)
    pop = g_support_population(g, x, 2)
    wins = 0
    for s in range(50):
        small = g_support_empirical(g, x, make_rng(8, s, 0).random(100), 2)
        big = g_support_empirical(g, x, make_rng(8, s, 1).random(1600), 2)
        wins += hausdorff_estimate(big, pop, 100, s) < hausdorff_estimate(small, pop, 100, s)
    assert wins >= 45


def _uniform_domain(gen, d, count):
    pts = gen.random((count * 3, d))
    pts = pts[np.linalg.norm(pts, axis=1) <= 1.0]
    return pts[:count]


@pytest.mark.parametrize("d, eps", [(1, 0.5), (2, 0.25), (2, 0.1), (3, 0.4), (2, math.sqrt(2))])
def test_cover_audit(d, eps):
    cover = epsilon_cover(d, eps)
    assert in_domain(cover.points)
    assert len(cover) <= math.ceil(math.sqrt(d) / eps) ** d
    pts = _uniform_domain(make_rng(d, int(eps * 1000)), d, 10**6)
    dist, _ = cKDTree(cover.points).query(pts)
    assert dist.max() <= eps


def test_cover_small_examples():
    c1 = epsilon_cover(1, 0.5)
    assert len(c1) <= 2
    grid = np.arange(0, 1, 1e-4)[:, None]
    assert np.abs(grid - c1.points.T).min(axis=1).max() <= 0.5
    assert len(epsilon_cover(2, math.sqrt(2))) == 1
    assert len(epsilon_cover(2, 0.25)) <= 36
    with pytest.raises(ValueError):
        epsilon_cover(2, 0.0)


def test_quantization_conventions():
    cover = epsilon_cover(2, 0.3)
    lat = GeneralLatent(np.arange(len(cover)) % 2, cover.points, 2)
    assert np.array_equal(quantize_latents(lat, cover).vectors, cover.points)
    two = EpsilonCover(0.25, 1, np.array([[0.25], [0.75]]))
    assert cover_indices([[0.5]], two)[0] == 0
    with pytest.raises(LatentError):
        cover_indices([[0.1, 0.2]], two)


@given(st.integers(0, 10**6), st.sampled_from([0.15, 0.3, 0.7, 1.0]), st.integers(1, 3))
def test_quantization_moves_at_most_eps(seed, eps, d):
    gen = make_rng(seed)
    pts = _uniform_domain(gen, d, 40)
    lat = GeneralLatent(np.zeros(len(pts), int), pts, 1)
    q = quantize_latents(lat, epsilon_cover(d, eps))
    assert np.all(np.linalg.norm(q.vectors - lat.vectors, axis=1) <= eps)
    assert in_domain(q.vectors)
    assert np.array_equal(q.labels, lat.labels)


def test_quantization_bounds_on_random_instances():
    for seed in range(100):
        c = quantization_check(seed)
        assert c["risk_gap"] <= c["risk_bound"]
        assert c["psi"] <= c["psi_bound"]


def test_psi_trivial_and_degenerate():
    gen = make_rng(9)
    lat = GeneralLatent(gen.integers(3, size=20), _uniform_domain(gen, 2, 20), 3)
    assert psi_cdf_distance(lat, lat, 16) == 0.0
    a = GeneralLatent.from_labels([0, 0, 1, 2], 3)
    b = GeneralLatent.from_labels([1, 1, 2], 3)
    cdf_a, cdf_b = np.array([0.5, 0.75, 1.0]), np.array([0.0, 2 / 3, 1.0])
    assert psi_cdf_distance(a, b, 8) == pytest.approx(np.sum((cdf_a - cdf_b) ** 2), abs=1e-15)
    with pytest.raises(ValueError):
        psi_cdf_distance(lat, lat, 4)
    big = GeneralLatent([0], np.full((1, 4), 0.1), 1)
    with pytest.raises(ValueError):
        psi_cdf_distance(big, big, 8)


def test_psi_population_map_agrees_with_equal_weight_points():
    gen = make_rng(10)
    vec = _uniform_domain(gen, 1, 4)
    labels = np.array([0, 1, 1, 0])
    lat = GeneralLatent(labels, vec, 2)
    pm = PopulationLatentMap(cells=[0, 0, 1, 1], lengths=[0.25] * 4, labels=labels, vectors=vec, K=2,
                             cell_widths=[0.5, 0.5])
    other = GeneralLatent([0, 1], [[0.2], [0.6]], 2)
    assert psi_cdf_distance(lat, other, 32) == pytest.approx(psi_cdf_distance(pm, other, 32), abs=1e-15)


def test_psi_one_dimensional_closed_form():
    # one point each at 0.2 and 0.7, same label: squared L2 of the step difference over [0.2, 0.7)
    a = GeneralLatent([0], [[0.2]], 1)
    b = GeneralLatent([0], [[0.7]], 1)
    assert psi_cdf_distance(a, b, 1000) == pytest.approx(0.5, abs=2e-3)


def test_epsilon_schedule_value():
    assert epsilon_schedule(2, 0, 100) == pytest.approx(4 * math.log(100) / 10)
    assert epsilon_schedule(4, 2, 1600) == pytest.approx((16 * 2 * math.log(1600) / 40) ** (1 / 3))
