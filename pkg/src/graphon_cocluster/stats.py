"""Empirical block quantities and the squared-error risk for model families 1-4.

Labels are 0-based: a K-cluster labeling takes values in ``range(K)``.

Model families (the kernel ``omega_theta(s, t)``):

1. co-blockmodel, ``theta[u, v]``
2. degree-corrected, ``b * d * theta[u, v]`` with scalar degrees
3. dot product, ``b @ d`` (labels and theta unused)
4. dot product + blockmodel, ``(b @ d) * theta[u, v]``

Latent vectors live in ``D = {c in [0, 1)^d : ||c|| <= 1}``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = (1, 2, 3, 4)
# slack for ||c|| <= 1 after a floating-point rescale
NORM_SLACK = 1e-12
COORD_CAP = 1.0 - 1e-9


class LatentError(ValueError):
    pass


def _as_labels(labels, K, name):
    lab = np.asarray(labels)
    if lab.ndim != 1:
        raise LatentError(f"{name} must be one-dimensional")
    if lab.size and not np.issubdtype(lab.dtype, np.integer):
        if not np.all(lab == np.round(lab)):
            raise LatentError(f"{name} must be integers")
    lab = lab.astype(np.int64)
    if lab.size and (lab.min() < 0 or lab.max() >= K):
        raise LatentError(f"{name} must take values in 0..{K - 1}")
    return lab


def one_hot(labels: np.ndarray, K: int) -> np.ndarray:
    out = np.zeros((labels.size, K))
    out[np.arange(labels.size), labels] = 1.0
    return out


@dataclass(frozen=True)
class CoClusterLabels:
    S: np.ndarray
    T: np.ndarray
    K: int

    def __post_init__(self):
        if self.K < 1:
            raise LatentError("K must be at least 1")
        object.__setattr__(self, "S", _as_labels(self.S, self.K, "S"))
        object.__setattr__(self, "T", _as_labels(self.T, self.K, "T"))

    def permuted(self, perm) -> "CoClusterLabels":
        """Rename label k to perm[k] on both sides."""
        perm = np.asarray(perm)
        return CoClusterLabels(perm[self.S], perm[self.T], self.K)


@dataclass(frozen=True)
class BlockSummary:
    phi: np.ndarray
    pi_row: np.ndarray
    pi_col: np.ndarray
    theta_hat: np.ndarray


def in_domain(vectors: np.ndarray) -> bool:
    v = np.asarray(vectors, float)
    if v.size == 0:
        return True
    return bool(
        np.all(np.isfinite(v)) and v.min() >= 0.0 and v.max() < 1.0
        and np.all(np.linalg.norm(v, axis=-1) <= 1.0 + NORM_SLACK)
    )


def project_to_domain(vectors) -> np.ndarray:
    """Clip negatives to 0 and coordinates to 1 - 1e-9, then rescale rows with norm > 1."""
    v = np.clip(np.asarray(vectors, float), 0.0, COORD_CAP)
    if v.ndim == 1:
        return project_to_domain(v[None, :])[0]
    norms = np.linalg.norm(v, axis=1)
    big = norms > 1.0
    v[big] /= norms[big, None]
    return v


@dataclass(frozen=True)
class GeneralLatent:
    """Latent values for one side: labels in range(K) and vectors in D (shape (count, d))."""
    labels: np.ndarray
    vectors: np.ndarray
    K: int

    def __post_init__(self):
        if self.K < 1:
            raise LatentError("K must be at least 1")
        lab = _as_labels(self.labels, self.K, "labels")
        vec = np.asarray(self.vectors, float)
        if vec.ndim == 1:
            vec = vec[:, None]
        if vec.ndim != 2 or vec.shape[0] != lab.size:
            raise LatentError(f"vectors shape {vec.shape} does not match {lab.size} labels")
        if not in_domain(vec):
            raise LatentError("latent vectors must lie in D = {c in [0,1)^d : ||c|| <= 1}")
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "vectors", vec)

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return self.labels.size

    @classmethod
    def from_labels(cls, labels, K: int) -> "GeneralLatent":
        lab = np.asarray(labels)
        return cls(lab, np.zeros((lab.size, 0)), K)


def as_theta(theta, K: int | None = None) -> np.ndarray:
    th = np.atleast_2d(np.asarray(theta, float))
    if th.ndim != 2 or th.shape[0] != th.shape[1]:
        raise LatentError(f"theta must be square, got shape {th.shape}")
    if K is not None and th.shape[0] != K:
        raise LatentError(f"theta is {th.shape[0]}x{th.shape[0]} but K={K}")
    if not np.all(np.isfinite(th)) or th.min() < 0.0 or th.max() > 1.0:
        raise LatentError("theta entries must lie in [0, 1]")
    return th


def block_summary(M, labels: CoClusterLabels) -> BlockSummary:
    """Phi (normalized block sums), cluster proportions and block means of M.

    ``theta_hat[s, t]`` is 0 when block (s, t) is empty.
    """
    M = np.asarray(M, float)
    m, n = M.shape
    if labels.S.size != m or labels.T.size != n:
        raise LatentError(f"labels ({labels.S.size}, {labels.T.size}) do not match M {M.shape}")
    if not np.all(np.isfinite(M)):
        raise LatentError("M must be finite")
    K = labels.K
    RS, CT = one_hot(labels.S, K), one_hot(labels.T, K)
    phi = RS.T @ (M @ CT) / (m * n)
    pi_row = RS.sum(axis=0) / m
    pi_col = CT.sum(axis=0) / n
    denom = np.outer(pi_row, pi_col)
    theta_hat = np.divide(phi, denom, out=np.zeros_like(phi), where=denom > 0)
    return BlockSummary(phi=phi, pi_row=pi_row, pi_col=pi_col, theta_hat=theta_hat)


def _check_family(family):
    if family not in FAMILIES:
        raise LatentError(f"unknown model family {family!r}; expected one of {FAMILIES}")


def _check_pair(S: GeneralLatent, T: GeneralLatent, theta, family):
    _check_family(family)
    if family in (2, 3, 4) and S.d != T.d:
        raise LatentError(f"row and column vectors differ in dimension ({S.d} vs {T.d})")
    if family == 2 and S.d != 1:
        raise LatentError("family 2 uses scalar degree parameters (d = 1)")
    if family in (3, 4) and S.d < 1:
        raise LatentError(f"family {family} needs latent vectors (d >= 1)")
    if family != 3:
        if S.K != T.K:
            raise LatentError("row and column latents disagree on K")
        return as_theta(theta, S.K)
    return None


def kernel_matrix(S: GeneralLatent, T: GeneralLatent, theta, family: int) -> np.ndarray:
    """Matrix of omega_theta(S_i, T_j)."""
    th = _check_pair(S, T, theta, family)
    if family == 1:
        return th[np.ix_(S.labels, T.labels)]
    dots = S.vectors @ T.vectors.T
    if family == 3:
        return dots
    return dots * th[np.ix_(S.labels, T.labels)]


def model_kernel(s, t, theta, family: int) -> float:
    """omega_theta for single latent values.

    ``s`` and ``t`` are a label (family 1), a vector (family 3) or a
    ``(label, vector)`` pair (families 2 and 4; the vector may be a scalar
    degree for family 2).
    """
    _check_family(family)
    theta = None if family == 3 else as_theta(theta)
    K = 1 if theta is None else theta.shape[0]

    def unpack(z):
        if family == 1:
            return z, np.zeros(0)
        if family == 3:
            return 0, np.atleast_1d(np.asarray(z, float))
        u, v = z
        return u, np.atleast_1d(np.asarray(v, float))

    (u, b), (v, d) = unpack(s), unpack(t)
    S = GeneralLatent(np.array([u]), b[None, :], K)
    T = GeneralLatent(np.array([v]), d[None, :], K)
    return float(kernel_matrix(S, T, theta, family)[0, 0])


def empirical_risk(A, S: GeneralLatent, T: GeneralLatent, theta, family: int) -> float:
    """Mean squared error between A and omega_theta(S_i, T_j)."""
    A = np.asarray(A, float)
    if A.shape != (len(S), len(T)):
        raise LatentError(f"A has shape {A.shape} but latents give {(len(S), len(T))}")
    return float(np.mean((A - kernel_matrix(S, T, theta, family)) ** 2))
