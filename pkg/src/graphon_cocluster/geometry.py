"""Profile vectors, support functions and the latent-space discretization.

Profile vectors come in two flavours.  The column-side profile of a
labeling stacks ``g_t / sqrt(m)`` (vectors over the m sampled rows) and the
label proportions.  The row-side profile stacks ``f_s``, step functions of y
stored by their values on the graphon's column cells, and the proportions.
Step-basis coordinates carry the cell width as inner-product weight, so
Euclidean geometry in the flat embedding equals L2 geometry of the functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .graphon import StepGraphon, make_rng
from .population import AllocationMap, PopulationLatentMap
from .stats import GeneralLatent, LatentError, in_domain, one_hot


@dataclass(frozen=True)
class ProfileVector:
    """Blocks ``coords[k]`` (length D each, inner-product weights ``weights``) plus ``pi``."""
    coords: np.ndarray
    pi: np.ndarray
    weights: np.ndarray

    @property
    def K(self) -> int:
        return self.pi.size

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.coords.ravel(), self.pi])

    @property
    def flat_weights(self) -> np.ndarray:
        return flat_weights(self.weights, self.K)

    def inner(self, other: "ProfileVector") -> float:
        return float(np.sum(self.coords * other.coords * self.weights) + self.pi @ other.pi)

    def norm(self) -> float:
        return math.sqrt(max(self.inner(self), 0.0))

    def __sub__(self, other: "ProfileVector") -> "ProfileVector":
        if self.coords.shape != other.coords.shape or not np.array_equal(self.weights, other.weights):
            raise ValueError("profile vectors live in different spaces")
        return ProfileVector(self.coords - other.coords, self.pi - other.pi, self.weights)


def flat_weights(weights: np.ndarray, K: int) -> np.ndarray:
    return np.concatenate([np.tile(weights, K), np.ones(K)])


def g_profile_empirical(W, T, K: int) -> ProfileVector:
    """(g_{T=t}/sqrt(m))_t and pi_T with g_{T=t} = W 1_{T=t} / n."""
    W = np.asarray(W, float)
    m, n = W.shape
    T = np.asarray(T)
    if T.size != n:
        raise ValueError("T must label the n columns of W")
    onehot = one_hot(T, K)
    return ProfileVector((W @ onehot / n).T / math.sqrt(m), onehot.mean(axis=0), np.ones(m))


def g_profile_population(g: StepGraphon, x, col_alloc: AllocationMap) -> ProfileVector:
    """(g_{tau=t}/sqrt(m))_t and pi_tau, with g_{tau=t}(i) = int omega(x_i, y) 1{tau(y)=t} dy."""
    x = np.asarray(x, float)
    G = g.values[g.row_cells(x)] @ col_alloc.mass
    return ProfileVector(G.T / math.sqrt(x.size), col_alloc.pi, np.ones(x.size))


def f_profile_empirical(g: StepGraphon, x, S, K: int) -> ProfileVector:
    """(f_{S=s})_s and pi_S, with f_{S=s}(y) = (1/m) sum_i omega(x_i, y) 1{S_i = s}."""
    x = np.asarray(x, float)
    S = np.asarray(S)
    onehot = one_hot(S, K)
    f = onehot.T @ g.values[g.row_cells(x)] / x.size
    return ProfileVector(f, onehot.mean(axis=0), g.col_widths)


def f_profile_population(g: StepGraphon, row_alloc: AllocationMap) -> ProfileVector:
    """(f_{sigma=s})_s and pi_sigma, with f_{sigma=s}(y) = int omega(x, y) 1{sigma(x)=s} dx."""
    return ProfileVector(row_alloc.mass.T @ g.values, row_alloc.pi, g.col_widths)


def profile_vector(source, labels_or_alloc, K: int | None = None, side: str = "column") -> ProfileVector:
    """Dispatch to the four profile constructors.

    column side: ``source`` is W with labels, or ``(g, x)`` with an allocation;
    row side: ``source`` is ``(g, x)`` with labels, or ``g`` with an allocation.
    """
    is_alloc = isinstance(labels_or_alloc, AllocationMap)
    if side == "column":
        if is_alloc:
            g, x = source
            return g_profile_population(g, x, labels_or_alloc)
        return g_profile_empirical(source, labels_or_alloc, K)
    if side == "row":
        if is_alloc:
            return f_profile_population(source, labels_or_alloc)
        g, x = source
        return f_profile_empirical(g, x, labels_or_alloc, K)
    raise ValueError(f"side must be 'row' or 'column', got {side!r}")


# -- support functions ---------------------------------------------------------

class SupportFunction:
    """Support function of the profile set generated by weighted atoms.

    ``Gamma(H) = sum_a atom_weights[a] * max_k (<h_k, atoms[a]> + pi_H[k])``,
    the closed form of the sup of <H, G> over all labelings of the atoms.
    """

    def __init__(self, atoms, atom_weights, weights, K: int):
        self.atoms = np.atleast_2d(np.asarray(atoms, float))
        self.atom_weights = np.asarray(atom_weights, float)
        self.weights = np.asarray(weights, float)
        self.K = K
        if self.atoms.shape != (self.atom_weights.size, self.weights.size):
            raise ValueError("atoms, atom weights and coordinate weights disagree")
        self.flat_weights = flat_weights(self.weights, K)

    def evaluate(self, Hs) -> np.ndarray:
        """Gamma for each row of a (B, K*D + K) batch of flat directions."""
        Hs = np.atleast_2d(np.asarray(Hs, float))
        D = self.weights.size
        if Hs.shape[1] != self.K * D + self.K:
            raise ValueError(f"direction dimension {Hs.shape[1]} != {self.K * D + self.K}")
        h = Hs[:, : self.K * D].reshape(-1, self.K, D) * self.weights
        vals = np.einsum("bkd,ad->bak", h, self.atoms) + Hs[:, None, self.K * D:]
        return vals.max(axis=2) @ self.atom_weights

    def __call__(self, H) -> float:
        flat = H.flat if isinstance(H, ProfileVector) else np.asarray(H, float)
        return float(self.evaluate(flat[None, :])[0])


class PointSetSupport:
    """Support function of a finite point set (weighted inner product)."""

    def __init__(self, points, weights=None):
        self.points = np.atleast_2d(np.asarray(points, float))
        self.flat_weights = np.ones(self.points.shape[1]) if weights is None else np.asarray(weights, float)

    def evaluate(self, Hs) -> np.ndarray:
        Hs = np.atleast_2d(np.asarray(Hs, float))
        return ((Hs * self.flat_weights) @ self.points.T).max(axis=1)

    def __call__(self, H) -> float:
        return float(self.evaluate(np.asarray(H, float)[None, :])[0])


def g_support_empirical(g: StepGraphon, x, y, K: int) -> SupportFunction:
    """Support function of {G_T : T in [K]^n}; columns of W are grouped by graphon cell."""
    x = np.asarray(x, float)
    cols = g.col_cells(np.asarray(y, float))
    counts = np.bincount(cols, minlength=g.shape[1])
    present = np.flatnonzero(counts)
    atoms = g.values[g.row_cells(x)][:, present].T / math.sqrt(x.size)
    return SupportFunction(atoms, counts[present] / cols.size, np.ones(x.size), K)


def g_support_from_matrix(W, K: int) -> SupportFunction:
    W = np.asarray(W, float)
    m, n = W.shape
    return SupportFunction(W.T / math.sqrt(m), np.full(n, 1.0 / n), np.ones(m), K)


def g_support_population(g: StepGraphon, x, K: int) -> SupportFunction:
    """Support function of {G_tau : tau measurable}."""
    x = np.asarray(x, float)
    atoms = g.values[g.row_cells(x)].T / math.sqrt(x.size)
    return SupportFunction(atoms, g.col_widths, np.ones(x.size), K)


def f_support_empirical(g: StepGraphon, x, K: int) -> SupportFunction:
    x = np.asarray(x, float)
    return SupportFunction(g.values[g.row_cells(x)], np.full(x.size, 1.0 / x.size), g.col_widths, K)


def f_support_population(g: StepGraphon, K: int) -> SupportFunction:
    return SupportFunction(g.values, g.row_widths, g.col_widths, K)


def support_function(H, source: SupportFunction) -> float:
    return source(H)


def unit_directions(flat_w: np.ndarray, n_random: int, rng: np.random.Generator) -> np.ndarray:
    """Random directions uniform on the weighted unit sphere, then every +/- coordinate axis."""
    dim = flat_w.size
    scale = 1.0 / np.sqrt(flat_w)
    Z = rng.standard_normal((n_random, dim)) * scale
    Z /= np.sqrt(np.sum(Z * Z * flat_w, axis=1))[:, None]
    axes = np.diag(scale)
    return np.vstack([Z, axes, -axes])


def hausdorff_estimate(gamma_1, gamma_2, n_directions: int, seed: int, chunk: int = 256) -> float:
    """Max of |Gamma_1(H) - Gamma_2(H)| over sampled unit directions.

    For convex hulls this sup over the whole sphere equals the Hausdorff
    distance, so the returned value is a lower bound on it.
    """
    if n_directions < 1:
        raise ValueError("need at least one direction")
    w = gamma_1.flat_weights
    if not np.array_equal(w, gamma_2.flat_weights):
        raise ValueError("support functions live in different spaces")
    dirs = unit_directions(w, n_directions, make_rng(seed))
    best = 0.0
    for start in range(0, dirs.shape[0], chunk):
        block = dirs[start:start + chunk]
        best = max(best, float(np.max(np.abs(gamma_1.evaluate(block) - gamma_2.evaluate(block)))))
    return best


# -- epsilon covers and quantization ------------------------------------------

@dataclass(frozen=True)
class EpsilonCover:
    epsilon: float
    d: int
    points: np.ndarray

    def __len__(self):
        return self.points.shape[0]

    @property
    def size_bound(self) -> int:
        return grid_per_axis(self.d, self.epsilon) ** self.d


def grid_per_axis(d: int, epsilon: float) -> int:
    return max(1, math.ceil(math.sqrt(d) / epsilon))


def epsilon_cover(d: int, epsilon: float) -> EpsilonCover:
    """Grid cover of D = {c in [0,1)^d : ||c|| <= 1}.

    [0,1)^d is tiled by cubes of side 1/N with N = ceil(sqrt(d)/eps), so a
    cube's diameter is at most eps.  D is closed under decreasing
    coordinates, so a cube meets D exactly when its lower corner is in D;
    each such cube contributes one point of D inside it (the cube centre, or
    the point where the segment from the corner to the centre leaves the
    unit ball).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if d < 1:
        raise ValueError("d must be at least 1")
    N = grid_per_axis(d, epsilon)
    h = 1.0 / N
    pts = []
    for idx in product(range(N), repeat=d):
        lo = np.array(idx, float) * h
        if lo @ lo > 1.0:
            continue
        c = (lo + np.minimum(lo + h, 1.0)) / 2.0
        if c @ c > 1.0:
            # |lo + t (c - lo)| = 1 for t in [0, 1]
            u = c - lo
            a, b, cc = u @ u, 2.0 * lo @ u, lo @ lo - 1.0
            t = (-b + math.sqrt(b * b - 4.0 * a * cc)) / (2.0 * a)
            c = lo + t * u
        pts.append(c)
    return EpsilonCover(float(epsilon), d, np.array(pts))


def cover_indices(vectors, cover: EpsilonCover) -> np.ndarray:
    """Nearest cover point for each vector; ties go to the lowest index."""
    v = np.atleast_2d(np.asarray(vectors, float))
    if v.shape[1] != cover.d:
        raise LatentError(f"vectors have dimension {v.shape[1]}, cover has {cover.d}")
    diff = v[:, None, :] - cover.points[None, :, :]
    return np.argmin(np.sum(diff * diff, axis=2), axis=1)


def quantize_latents(latent: GeneralLatent, cover: EpsilonCover) -> GeneralLatent:
    idx = cover_indices(latent.vectors, cover)
    return GeneralLatent(latent.labels, cover.points[idx], latent.K)


def composite_labels(latent: GeneralLatent, cover: EpsilonCover) -> np.ndarray:
    """Index of (label, nearest cover point) in the product space [K] x cover."""
    return latent.labels * len(cover) + cover_indices(latent.vectors, cover)


def composite_table(K: int, cover: EpsilonCover) -> tuple[np.ndarray, np.ndarray]:
    """Latent label and vector of every composite index."""
    P = len(cover)
    return np.repeat(np.arange(K), P), np.tile(cover.points, (K, 1))


def epsilon_schedule(K: int, d: int, n: int) -> float:
    """eps = (K^2 d^(d/2) log n / sqrt(n))^(1/(1+d))."""
    return (K ** 2 * d ** (d / 2.0) * math.log(n) / math.sqrt(n)) ** (1.0 / (1.0 + d))


# -- CDF distance --------------------------------------------------------------

def _weighted_points(obj):
    if isinstance(obj, PopulationLatentMap):
        return obj.labels, obj.vectors, obj.lengths, obj.K
    if isinstance(obj, GeneralLatent):
        return obj.labels, obj.vectors, np.full(len(obj), 1.0 / len(obj)), obj.K
    raise TypeError(f"expected GeneralLatent or PopulationLatentMap, got {type(obj).__name__}")


def psi_grid(obj, resolution: int) -> np.ndarray:
    """Psi(k, c) on label k and the midpoint grid ((g + 1/2)/r)_g of [0,1)^d."""
    labels, vectors, weights, K = _weighted_points(obj)
    d = vectors.shape[1]
    mids = (np.arange(resolution) + 0.5) / resolution
    # first grid index whose midpoint is >= the coordinate; r means "never"
    start = np.searchsorted(mids, vectors, side="left")
    hist = np.zeros((K,) + (resolution + 1,) * d)
    np.add.at(hist, (labels,) + tuple(start[:, l] for l in range(d)), weights)
    for axis in range(d + 1):
        hist = np.cumsum(hist, axis=axis)
    return hist[(slice(None),) + (slice(0, resolution),) * d]


def psi_cdf_distance(latents_1, latents_2, grid_resolution: int = 64) -> float:
    """Squared L2 distance between Psi_1 and Psi_2.

    Counting measure on labels, Lebesgue measure on [0,1)^d, midpoint rule on
    a uniform grid; for d = 0 this is the squared distance of label CDFs.
    """
    _, v1, _, K1 = _weighted_points(latents_1)
    _, v2, _, K2 = _weighted_points(latents_2)
    if K1 != K2 or v1.shape[1] != v2.shape[1]:
        raise LatentError("latents differ in K or d")
    d = v1.shape[1]
    if d > 3:
        raise ValueError("grid integration supports d <= 3")
    if grid_resolution < 8:
        raise ValueError("grid resolution must be at least 8")
    diff = psi_grid(latents_1, grid_resolution) - psi_grid(latents_2, grid_resolution)
    return float(np.sum(diff * diff) / grid_resolution ** d)


def psi_quadrature_slack(K: int, d: int, resolution: int) -> float:
    """Bound on the midpoint-rule error of the quantization inequality, 2 K d / r."""
    return 2.0 * K * d / resolution


def latent_in_domain(latent: GeneralLatent) -> bool:
    return in_domain(latent.vectors)
