"""Candidate fits: spectral co-clustering and alternating least squares."""
from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import svds

from .graphon import make_rng
from .stats import (CoClusterLabels, GeneralLatent, LatentError, as_theta, block_summary,
                    one_hot, project_to_domain)

# dense LAPACK below this size, Lanczos above
DENSE_SVD_MAX = 400


def truncated_svd(A, k: int):
    """Top-k singular triple (U, s, V) with s descending, deterministic."""
    A = np.asarray(A, float)
    m, n = A.shape
    if min(m, n) <= DENSE_SVD_MAX or k >= min(m, n) - 1:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
        return U[:, :k], s[:k], Vt[:k].T
    v0 = np.full(min(m, n), 1.0 / np.sqrt(min(m, n)))
    U, s, Vt = svds(A, k=k, v0=v0, tol=0)
    order = np.argsort(-s, kind="stable")
    return U[:, order], s[order], Vt[order].T


def kmeans(X, K: int, rng: np.random.Generator, max_iter: int = 100, tol: float = 1e-10) -> np.ndarray:
    """Lloyd's algorithm from a farthest-point start.

    The first centre is a seeded random point; each next centre is the point
    farthest from the chosen ones (lowest index on ties).  Empty clusters
    keep their previous centroid.
    """
    X = np.asarray(X, float)
    N = X.shape[0]
    centers = [int(rng.integers(N))]
    dist = np.sum((X - X[centers[0]]) ** 2, axis=1)
    for _ in range(1, K):
        nxt = int(np.argmax(dist))
        centers.append(nxt)
        dist = np.minimum(dist, np.sum((X - X[nxt]) ** 2, axis=1))
    C = X[centers].copy()
    labels = np.zeros(N, dtype=np.int64)
    for _ in range(max_iter):
        D = np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2)
        labels = np.argmin(D, axis=1)
        newC = C.copy()
        for k in range(K):
            members = labels == k
            if members.any():
                newC[k] = X[members].mean(axis=0)
        shift = np.max(np.abs(newC - C))
        C = newC
        if shift < tol:
            break
    D = np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2)
    return np.argmin(D, axis=1)


def spectral_cocluster(A, K: int, seed: int) -> CoClusterLabels:
    """k-means on the rank-K singular coordinates U*s (rows) and V*s (columns)."""
    A = np.asarray(A, float)
    if A.size == 0:
        raise LatentError("A is empty")
    m, n = A.shape
    if K < 1 or K > min(m, n):
        raise LatentError(f"K={K} must lie in 1..min(m, n)={min(m, n)}")
    if K == 1:
        return CoClusterLabels(np.zeros(m, np.int64), np.zeros(n, np.int64), 1)
    U, s, V = truncated_svd(A, K)
    S = kmeans(U * s, K, make_rng(seed, 0))
    T = kmeans(V * s, K, make_rng(seed, 1))
    return CoClusterLabels(S, T, K)


def _block_risk(A, S, T, theta) -> float:
    return float(np.mean((A - theta[np.ix_(S, T)]) ** 2))


def _reassign(N, cnt, theta, current):
    """Labels minimizing sum_t (-2 N[:, t] theta[s, t] + cnt[t] theta[s, t]^2); ties keep ``current``."""
    cost = -2.0 * N @ theta.T + (theta ** 2 @ cnt)[None, :]
    best = np.argmin(cost, axis=1)
    idx = np.arange(current.size)
    keep = cost[idx, current] <= cost[idx, best]
    return np.where(keep, current, best)


def fit_blockmodel_als(A, K: int, init: CoClusterLabels, max_iters: int = 100):
    """Alternate theta <- theta_hat, row reassignment, column reassignment.

    Returns ``(labels, theta, trace)``; ``trace[0]`` is the risk at ``init``
    and each later entry the risk after one accepted sweep.  A sweep that
    would raise the risk (only possible through rounding) is discarded and
    the fit stops, so the trace is non-increasing by construction.
    """
    if K < 1:
        raise LatentError("K must be at least 1")
    A = np.asarray(A, float)
    if init.K != K or init.S.size != A.shape[0] or init.T.size != A.shape[1]:
        raise LatentError("init does not match A and K")
    S, T = init.S.copy(), init.T.copy()
    theta = block_summary(A, CoClusterLabels(S, T, K)).theta_hat
    trace = [_block_risk(A, S, T, theta)]
    for _ in range(max_iters):
        S_new = _reassign(A @ one_hot(T, K), np.bincount(T, minlength=K), theta, S)
        th = block_summary(A, CoClusterLabels(S_new, T, K)).theta_hat
        T_new = _reassign(A.T @ one_hot(S_new, K), np.bincount(S_new, minlength=K), th.T, T)
        th = block_summary(A, CoClusterLabels(S_new, T_new, K)).theta_hat
        risk = _block_risk(A, S_new, T_new, th)
        if risk > trace[-1]:
            break
        changed = not (np.array_equal(S_new, S) and np.array_equal(T_new, T))
        S, T, theta = S_new, T_new, th
        trace.append(risk)
        if not changed:
            break
    return CoClusterLabels(S, T, K), theta, np.array(trace)


# -- dot-product families -------------------------------------------------------

def _kernel(B, D, S, T, theta, family):
    P = B @ D.T
    return P if family == 3 else P * theta[np.ix_(S, T)]


def _risk(A, B, D, S, T, theta, family) -> float:
    return float(np.mean((A - _kernel(B, D, S, T, theta, family)) ** 2))


def _theta_update(A, P, S, T, K, theta):
    RS, CT = one_hot(S, K), one_hot(T, K)
    num = RS.T @ (A * P) @ CT
    den = RS.T @ (P * P) @ CT
    out = np.divide(num, den, out=theta.copy(), where=den > 0)
    return np.clip(out, 0.0, 1.0)


def _side_update(A, B, D, S, T, theta, K, family, update_labels, update_vectors):
    """Best labels, then projected least-squares vectors, for the rows of A."""
    P = B @ D.T
    CT = one_hot(T, K)
    if update_labels and family != 3 and K > 1:
        S = _label_step(A, P, CT, theta, S)
    if update_vectors:
        B = B.copy()
        rowsq = np.sum(A * A, axis=1)
        for s in np.unique(S):
            rows = np.flatnonzero(S == s)
            scale = np.ones(T.size) if family == 3 else theta[s, T]
            X = D * scale[:, None]
            G = X.T @ X
            rhs = A[rows] @ X
            cand = project_to_domain(np.linalg.lstsq(G, rhs.T, rcond=None)[0].T)
            old = B[rows]
            def cost(V):
                return rowsq[rows] - 2.0 * np.sum(V * rhs, axis=1) + np.einsum("id,de,ie->i", V, G, V)
            better = cost(cand) <= cost(old)
            B[rows[better]] = cand[better]
    return B, S


def _label_step(A, P, CT, theta, S):
    N1 = (A * P) @ CT
    N2 = (P * P) @ CT
    cost = -2.0 * N1 @ theta.T + N2 @ (theta ** 2).T
    best = np.argmin(cost, axis=1)
    idx = np.arange(S.size)
    keep = cost[idx, S] <= cost[idx, best]
    return np.where(keep, S, best)


def _initial_vectors(A, d):
    U, s, V = truncated_svd(A, d)
    B, D = np.abs(U) * np.sqrt(s), np.abs(V) * np.sqrt(s)
    nb, nd = np.linalg.norm(B, axis=1).max(), np.linalg.norm(D, axis=1).max()
    # keep the product scale, pull both sides inside the unit ball
    if nb > 0.9:
        B *= 0.9 / nb
    if nd > 0.9:
        D *= 0.9 / nd
    return project_to_domain(B), project_to_domain(D)


def fit_dot_product_model(A, K: int, d: int, family: int, seed: int, max_iters: int = 50,
                          init=None, update_vectors: bool = True, tol: float = 1e-12):
    """Alternating minimization of the squared-error risk for families 2, 3, 4.

    Each sweep updates theta (ratio of sums, clipped to [0, 1]), the row
    labels and row vectors, theta again, then the column labels and column
    vectors, then theta.  Vectors come from unconstrained least squares
    projected onto D and are kept only when they lower that row's cost.
    Family 3 has no labels: K is forced to 1 and theta to [[1]].

    ``init`` optionally gives ``(row GeneralLatent, col GeneralLatent, theta)``;
    ``update_vectors=False`` freezes the vectors at ``init``.
    Returns ``(row latent, col latent, theta, trace)``.
    """
    if family not in (2, 3, 4):
        raise LatentError(f"dot-product fits need family 2, 3 or 4, got {family!r}")
    if d < 1 or (family == 2 and d != 1):
        raise LatentError(f"family {family} does not allow d={d}")
    A = np.asarray(A, float)
    if family == 3:
        K = 1
    if init is None:
        labels = spectral_cocluster(A, K, seed)
        S, T = labels.S, labels.T
        B, D = _initial_vectors(A, d)
        theta = np.ones((K, K))
        if family != 3:
            theta = _theta_update(A, B @ D.T, S, T, K, np.zeros((K, K)))
    else:
        row, col, theta = init
        if row.K != K or col.K != K or row.d != d or col.d != d:
            raise LatentError("init latents disagree with K or d")
        S, T, B, D = row.labels.copy(), col.labels.copy(), row.vectors.copy(), col.vectors.copy()
        theta = as_theta(theta, K).copy()
    trace = [_risk(A, B, D, S, T, theta, family)]
    for _ in range(max_iters):
        th, Bn, Sn, Dn, Tn = theta, B, S, D, T
        if family != 3:
            th = _theta_update(A, Bn @ Dn.T, Sn, Tn, K, th)
        Bn, Sn = _side_update(A, Bn, Dn, Sn, Tn, th, K, family, True, update_vectors)
        if family != 3:
            th = _theta_update(A, Bn @ Dn.T, Sn, Tn, K, th)
        Dn, Tn = _side_update(A.T, Dn, Bn, Tn, Sn, th.T, K, family, True, update_vectors)
        if family != 3:
            th = _theta_update(A, Bn @ Dn.T, Sn, Tn, K, th)
        risk = _risk(A, Bn, Dn, Sn, Tn, th, family)
        if risk > trace[-1]:
            break
        theta, B, S, D, T = th, Bn, Sn, Dn, Tn
        prev = trace[-1]
        trace.append(risk)
        if prev - risk <= tol * max(prev, 1e-300):
            break
    return (GeneralLatent(S, B, K), GeneralLatent(T, D, K), theta, np.array(trace))
