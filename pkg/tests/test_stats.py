from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from graphon_cocluster.graphon import make_rng
from graphon_cocluster.stats import (CoClusterLabels, GeneralLatent, LatentError, block_summary,
                                     empirical_risk, in_domain, kernel_matrix, model_kernel,
                                     project_to_domain)


def random_labels(gen, m, n, K):
    return CoClusterLabels(gen.integers(K, size=m), gen.integers(K, size=n), K)


@given(st.integers(0, 10**6), st.integers(1, 12), st.integers(1, 12), st.integers(1, 4))
def test_phi_sums_to_mean(seed, m, n, K):
    gen = make_rng(seed)
    M = gen.random((m, n))
    bs = block_summary(M, random_labels(gen, m, n, K))
    assert abs(bs.phi.sum() - M.mean()) <= 1e-12
    assert np.allclose(bs.theta_hat * np.outer(bs.pi_row, bs.pi_col), bs.phi, atol=1e-15)


def test_empty_block_theta_is_zero():
    M = np.ones((3, 3))
    bs = block_summary(M, CoClusterLabels([0, 0, 0], [0, 1, 1], 3))
    assert bs.theta_hat[1, 0] == 0 and bs.theta_hat[0, 2] == 0
    assert bs.theta_hat[0, 0] == 1 and bs.theta_hat[0, 1] == 1


def test_block_summary_shape_errors():
    with pytest.raises(LatentError):
        block_summary(np.ones((2, 3)), CoClusterLabels([0, 1, 0], [0, 1, 0], 2))
    with pytest.raises(LatentError):
        CoClusterLabels([0, 2], [0], 2)


@given(st.integers(0, 10**6))
def test_permutation_equivariance(seed):
    gen = make_rng(seed)
    K = 3
    A = (gen.random((9, 11)) < 0.5).astype(float)
    lab = random_labels(gen, 9, 11, K)
    perm = gen.permutation(K)
    theta = gen.random((K, K))
    theta_p = np.empty_like(theta)
    theta_p[np.ix_(perm, perm)] = theta
    lab_p = lab.permuted(perm)
    S, T = GeneralLatent.from_labels(lab.S, K), GeneralLatent.from_labels(lab.T, K)
    Sp, Tp = GeneralLatent.from_labels(lab_p.S, K), GeneralLatent.from_labels(lab_p.T, K)
    assert empirical_risk(A, S, T, theta, 1) == empirical_risk(A, Sp, Tp, theta_p, 1)
    bs, bsp = block_summary(A, lab), block_summary(A, lab_p)
    assert np.array_equal(bsp.phi[np.ix_(perm, perm)], bs.phi)
    assert np.array_equal(bsp.theta_hat[np.ix_(perm, perm)], bs.theta_hat)


def test_theta_hat_minimizes_blockmodel_risk():
    gen = make_rng(5)
    K = 3
    A = (gen.random((30, 40)) < 0.4).astype(float)
    lab = random_labels(gen, 30, 40, K)
    S, T = GeneralLatent.from_labels(lab.S, K), GeneralLatent.from_labels(lab.T, K)
    th = block_summary(A, lab).theta_hat
    best = empirical_risk(A, S, T, th, 1)
    for _ in range(100):
        pert = np.clip(th + gen.normal(0, 0.05, (K, K)), 0, 1)
        assert best <= empirical_risk(A, S, T, pert, 1)


@given(st.integers(0, 10**6))
def test_family_reductions(seed):
    gen = make_rng(seed)
    d = 3
    B = project_to_domain(gen.random((6, d)))
    D = project_to_domain(gen.random((5, d)))
    one = np.array([[1.0]])
    S1, T1 = GeneralLatent(np.zeros(6, int), B, 1), GeneralLatent(np.zeros(5, int), D, 1)
    assert np.array_equal(kernel_matrix(S1, T1, one, 4), kernel_matrix(S1, T1, None, 3))
    K = 2
    b, dd = gen.random((6, 1)) * 0.99, gen.random((5, 1)) * 0.99
    th = gen.random((K, K))
    S, T = GeneralLatent(gen.integers(K, size=6), b, K), GeneralLatent(gen.integers(K, size=5), dd, K)
    assert np.array_equal(kernel_matrix(S, T, th, 4), kernel_matrix(S, T, th, 2))


def test_model_kernel_values():
    th = np.array([[0.2, 0.4], [0.6, 0.8]])
    assert model_kernel(1, 0, th, 1) == 0.6
    assert model_kernel([0.5, 0.5], [0.2, 0.4], None, 3) == pytest.approx(0.3)
    assert model_kernel((0, 0.5), (1, 0.5), th, 2) == pytest.approx(0.1)
    assert model_kernel((1, [0.6, 0.0]), (1, [0.5, 0.5]), th, 4) == pytest.approx(0.24)


@pytest.mark.parametrize("bad", [[1.0], [-0.1], [0.8, 0.8]])
def test_model_kernel_rejects_vectors_outside_domain(bad):
    with pytest.raises(LatentError):
        model_kernel(bad, [0.1] * len(bad), None, 3)


def test_family_and_theta_errors():
    S = GeneralLatent.from_labels([0, 1], 2)
    with pytest.raises(LatentError):
        kernel_matrix(S, S, np.ones((2, 2)), 7)
    with pytest.raises(LatentError):
        kernel_matrix(S, S, np.ones((3, 3)), 1)
    with pytest.raises(LatentError):
        kernel_matrix(S, S, np.full((2, 2), 1.5), 1)
    with pytest.raises(LatentError):
        kernel_matrix(S, S, None, 3)          # family 3 needs vectors
    V = GeneralLatent([0, 1], [[0.1, 0.2], [0.3, 0.1]], 2)
    with pytest.raises(LatentError):
        kernel_matrix(V, V, np.ones((2, 2)), 2)   # family 2 is scalar
    with pytest.raises(LatentError):
        empirical_risk(np.ones((3, 2)), S, S, np.ones((2, 2)), 1)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=12))
def test_projection_lands_in_domain(vals):
    v = np.array(vals).reshape(-1, 1) if len(vals) % 2 else np.array(vals).reshape(-1, 2)
    p = project_to_domain(v)
    assert in_domain(p)
    inside = in_domain(v[:1])
    if inside and v[0].max() <= 1 - 1e-9:
        assert np.array_equal(p[0], v[0])
